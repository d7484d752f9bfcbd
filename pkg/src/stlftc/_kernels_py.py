"""NumPy versions of the predecessor kernels; used when the extension is absent."""

import numpy as np


def pred_exists(succ, mask):
    hit = np.zeros(succ.shape, dtype=bool)
    ok = succ >= 0
    hit[ok] = mask[succ[ok]].astype(bool)
    return hit.any(axis=1).astype(np.uint8)


def pred_forall(succ, mask):
    good = np.ones(succ.shape, dtype=bool)
    ok = succ >= 0
    good[ok] = mask[succ[ok]].astype(bool)
    return good.all(axis=1).astype(np.uint8)
