import sys
from pathlib import Path

# Make sibling test helpers (gradcheck, oracles) importable without packaging them.
sys.path.insert(0, str(Path(__file__).parent))
