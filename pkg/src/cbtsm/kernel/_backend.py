"""Simplex backend selection: compiled Cython core with pure-Python fallback.

Set ``CBTSM_PURE_PYTHON=1`` to force the numpy implementation (useful for the
backend benchmark and for environments without a C toolchain).  Both backends
implement identical pivot rules; objectives agree to solver tolerance and each
backend is bit-deterministic run to run.
"""

from __future__ import annotations

import os

_force_python = os.environ.get("CBTSM_PURE_PYTHON", "").strip().lower() in ("1", "true", "yes")

if _force_python:
    from . import simplex_py as _impl
    BACKEND = "python"
else:
    try:
        from . import _simplex as _impl   # type: ignore[attr-defined]
        BACKEND = "cython"
    except ImportError:
        from . import simplex_py as _impl
        BACKEND = "python"

solve_canonical = _impl.solve_canonical
OPTIMAL, INFEASIBLE, UNBOUNDED = 0, 1, 2
