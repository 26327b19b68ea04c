"""Hot-loop kernels with a compiled core and a pure-numpy fallback.

The compiled extension is preferred when it imported successfully; set
``SYMSPLIT_BACKEND=python`` (or ``cython``) to force a choice. The selected
module's ``project_rows`` / ``gp_rows`` are re-exported here and used by the
solvers; ``available_backends`` exposes both for the benchmark.
"""

import os

from . import _gp_py

try:
    from . import _gp
except ImportError:
    _gp = None

_choice = os.environ.get("SYMSPLIT_BACKEND", "").strip().lower()
if _choice == "python":
    _impl = _gp_py
elif _choice == "cython":
    if _gp is None:
        raise ImportError(
            "SYMSPLIT_BACKEND=cython but the compiled extension is not built"
        )
    _impl = _gp
else:
    _impl = _gp if _gp is not None else _gp_py

BACKEND = _impl.BACKEND
project_rows = _impl.project_rows
gp_rows = _impl.gp_rows


def available_backends():
    """Mapping of backend name -> kernel module, for benchmarking."""
    out = {"python": _gp_py}
    if _gp is not None:
        out["cython"] = _gp
    return out
