"""Two-component PCA by power iteration on the sample covariance.

Deliberately dependency-free: the matrices involved (token-embedding tables)
are small, so power iteration with deflation converges in microseconds and
the code stays auditable end to end.
"""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError

POWER_TOL = 1e-12
POWER_MAX_ITER = 100_000


def _top_eigenpair(matrix: np.ndarray, tol: float, max_iter: int):
    """Dominant (eigenvalue, unit eigenvector) of a PSD matrix, or zeros."""
    d = matrix.shape[0]
    # a slight deterministic tilt avoids starting exactly orthogonal to the
    # dominant eigenvector on symmetric inputs
    vec = 1.0 + 1e-3 * np.arange(d)
    vec /= np.linalg.norm(vec)
    for _ in range(max_iter):
        nxt = matrix @ vec
        norm = float(np.linalg.norm(nxt))
        if norm <= tol:
            return 0.0, np.zeros(d)
        nxt /= norm
        if float(np.linalg.norm(nxt - vec)) < tol:
            vec = nxt
            break
        vec = nxt
    value = float(vec @ matrix @ vec)
    if value <= tol:
        return 0.0, np.zeros(d)
    return value, vec


def _fix_sign(vec: np.ndarray) -> np.ndarray:
    """Flip so the first loading of visible magnitude is positive."""
    for x in vec:
        if abs(x) > 1e-12:
            return vec if x > 0 else -vec
    return vec


def pca_2d(rows, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER):
    """Project ``rows`` (n, d) onto the top two principal axes.

    Returns ``(coords (n, 2), components (2, d), eigenvalues (2,))``. A
    degenerate direction (zero eigenvalue) yields all-zero coordinates for
    that component rather than noise.
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2:
        raise ValidationError([f"expected a 2-d matrix, got shape {rows.shape}"])
    n, d = rows.shape
    if n < 2:
        raise ValidationError([f"principal components need at least 2 rows, got {n}"])

    centered = rows - rows.mean(axis=0)
    covariance = centered.T @ centered / (n - 1)

    components = np.zeros((2, d))
    eigenvalues = np.zeros(2)
    deflated = covariance
    for k in range(2):
        value, vec = _top_eigenpair(deflated, tol, max_iter)
        if value > 0.0:
            components[k] = _fix_sign(vec)
            eigenvalues[k] = value
            deflated = deflated - value * np.outer(vec, vec)
    coords = centered @ components.T
    return coords, components, eigenvalues
