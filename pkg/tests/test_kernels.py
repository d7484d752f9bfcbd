import os
import subprocess
import sys

import numpy as np
import pytest

from stlftc import _kernels_py, kernels


def _case(seed, cells=500, inputs=7):
    rng = np.random.default_rng(seed)
    succ = rng.integers(-1, cells, size=(cells, inputs)).astype(np.int32)
    mask = rng.random(cells) < 0.3
    return succ, mask


@pytest.mark.parametrize("seed", range(5))
def test_backends_agree(seed):
    succ, mask = _case(seed)
    ex = _kernels_py.pred_exists(succ, mask.astype(np.uint8)).astype(bool)
    fa = _kernels_py.pred_forall(succ, mask.astype(np.uint8)).astype(bool)
    np.testing.assert_array_equal(kernels.pred_exists(succ, mask), ex)
    np.testing.assert_array_equal(kernels.pred_forall(succ, mask), fa)


def test_semantics_by_loop():
    succ, mask = _case(9, cells=40, inputs=3)
    ex = kernels.pred_exists(succ, mask)
    fa = kernels.pred_forall(succ, mask)
    for i, row in enumerate(succ):
        hits = [bool(mask[j]) for j in row if j >= 0]
        assert ex[i] == any(hits)
        # an input leaving the lattice does not block forall
        assert fa[i] == all(hits)


def test_compiled_backend_is_built():
    assert kernels.BACKEND == "cython"


def test_env_forces_fallback():
    code = "from stlftc import kernels; print(kernels.BACKEND)"
    r = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                       env={**os.environ, "STLFTC_PURE_PYTHON": "1"})
    assert r.stdout.strip() == "python"
