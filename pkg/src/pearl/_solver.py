"""Backend selection for the weight-solver kernels.

The compiled extension is preferred when importable; set PEARL_PURE_PYTHON=1
to force the numpy fallback. Both backends expose the same functions with
the same semantics (see `pearl._solver_py`).
"""

from __future__ import annotations

import os

from . import _solver_py

if os.environ.get("PEARL_PURE_PYTHON", "") == "1":
    _impl = _solver_py
    BACKEND = "python"
else:
    try:
        from . import _solver_cy as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _solver_py
        BACKEND = "python"

FLAG_OK = _solver_py.FLAG_OK
FLAG_MAX_ITER = _solver_py.FLAG_MAX_ITER
FLAG_STALLED = _solver_py.FLAG_STALLED

project_to_simplex = _impl.project_to_simplex
objective = _impl.objective
solve = _impl.solve
