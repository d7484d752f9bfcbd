"""Pick the compiled kernels when built, else the NumPy fallback.

Set ``STLFTC_PURE_PYTHON=1`` to force the fallback.
"""

import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if os.environ.get("STLFTC_PURE_PYTHON") != "1":
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py


def _prep(succ, mask):
    return (np.ascontiguousarray(succ, dtype=np.int32),
            np.ascontiguousarray(mask, dtype=np.uint8).ravel())


def pred_exists(succ, mask):
    s, m = _prep(succ, mask)
    return np.asarray(_impl.pred_exists(s, m)).astype(bool)


def pred_forall(succ, mask):
    s, m = _prep(succ, mask)
    return np.asarray(_impl.pred_forall(s, m)).astype(bool)
