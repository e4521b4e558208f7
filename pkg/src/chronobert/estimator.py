"""Minimal estimator parameter protocol shared by the trainable models."""

from __future__ import annotations

import inspect


class ParamsMixin:
    """get_params / set_params over the constructor keyword arguments.

    Subclasses must store every ``__init__`` keyword on ``self`` under the
    same name, which makes instances cloneable via
    ``type(est)(**est.get_params())``.
    """

    @classmethod
    def _param_names(cls) -> list[str]:
        signature = inspect.signature(cls.__init__)
        return [name for name, p in signature.parameters.items()
                if name != "self" and p.kind not in (p.VAR_POSITIONAL, p.VAR_KEYWORD)]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for name, value in params.items():
            if name not in valid:
                raise ValueError(
                    f"invalid parameter {name!r} for {type(self).__name__}; "
                    f"valid parameters: {sorted(valid)}")
            setattr(self, name, value)
        return self
