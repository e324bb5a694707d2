"""Backend selection for the incremental RREF kernel.

The compiled extension is used when it imports; setting ``FBNC_FORCE_PYTHON=1``
selects the numpy fallback regardless.
"""

import os

from fbnc import _rref_py

DECODED = _rref_py.DECODED
FREE = _rref_py.FREE

BACKENDS = {"python": _rref_py.IncrementalRref}

try:
    from fbnc import _rref_core
except ImportError:  # extension not built
    _rref_core = None
else:
    BACKENDS["cython"] = _rref_core.IncrementalRref

if _rref_core is not None and os.environ.get("FBNC_FORCE_PYTHON") != "1":
    BACKEND = "cython"
else:
    BACKEND = "python"

IncrementalRref = BACKENDS[BACKEND]


def make_rref(q, backend=None):
    """New empty kernel over GF(q), optionally from a named backend."""
    cls = IncrementalRref if backend is None else BACKENDS[backend]
    return cls(q)
