"""Time the compiled predecessor kernels against the NumPy fallback.

    python3 benchmarks/bench_kernels.py [--cells 200000] [--inputs 25] [--repeat 20]

Also checks that both backends return identical masks.
"""

import argparse
import timeit

import numpy as np

from stlftc import _kernels_py

try:
    from stlftc import _kernels
except ImportError:
    _kernels = None


def workload(cells, inputs, seed):
    rng = np.random.default_rng(seed)
    succ = rng.integers(-1, cells, size=(cells, inputs), dtype=np.int32)
    mask = (rng.random(cells) < 0.3).astype(np.uint8)
    return succ, mask


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", type=int, default=200_000)
    ap.add_argument("--inputs", type=int, default=25)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    succ, mask = workload(args.cells, args.inputs, args.seed)
    backends = {"numpy": _kernels_py}
    if _kernels is not None:
        backends["cython"] = _kernels
    else:
        print("compiled extension not built; timing the fallback only")
    results = {}
    print(f"{args.cells} cells x {args.inputs} inputs, best of {args.repeat}")
    for kernel in ("pred_exists", "pred_forall"):
        ref = None
        for name, mod in backends.items():
            fn = getattr(mod, kernel)
            out = np.asarray(fn(succ, mask)).astype(bool)
            if ref is None:
                ref = out
            elif not np.array_equal(ref, out):
                raise SystemExit(f"{kernel}: backends disagree")
            best = min(timeit.repeat(lambda: fn(succ, mask), number=1, repeat=args.repeat))
            results[(kernel, name)] = best
            print(f"  {kernel:12s} {name:7s} {best * 1e3:8.2f} ms")
        if "cython" in backends:
            print(f"  {kernel:12s} speedup {results[(kernel, 'numpy')] / results[(kernel, 'cython')]:.1f}x")
    return results


if __name__ == "__main__":
    main()
