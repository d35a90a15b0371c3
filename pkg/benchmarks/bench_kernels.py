"""Compare the compiled and pure-Python reduction backends.

Times each kernel on random log-weights, then one end-to-end information
profile per backend (in a subprocess, since the backend is chosen at import).

    python3 benchmarks/bench_kernels.py --size 200000
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from infobounds import _pykernels

try:
    from infobounds import _ckernels
except ImportError:
    _ckernels = None

END_TO_END = """
import time
from infobounds import golden, kernels
from infobounds.measures import information_profile, maximal_leakage
spec = golden.extended_gibbs({n}, 2.0)
model = spec.build()
t = time.perf_counter()
information_profile(model)
maximal_leakage(model)
print(kernels.BACKEND, model.joint_log_probs.size, time.perf_counter() - t)
"""


def kernel_cases(size, rng):
    log_w = np.log(rng.dirichlet(np.ones(size)))
    log_w[rng.random(size) < 0.1] = -np.inf
    f = rng.normal(size=size)
    mask = (rng.random(size) < 0.5).astype(np.uint8)
    rows = log_w[: size - size % 100].reshape(-1, 100)
    frows = f[: rows.size].reshape(rows.shape)
    return {
        "compensated_sum": lambda k: k.compensated_sum(f),
        "logsumexp": lambda k: k.logsumexp(log_w),
        "logsumexp_rows": lambda k: k.logsumexp_rows(rows),
        "weighted_sum": lambda k: k.weighted_sum(log_w, f),
        "weighted_sum_rows": lambda k: k.weighted_sum_rows(rows, frows),
        "masked_mass": lambda k: k.masked_mass(log_w, mask),
        "suffix_mass": lambda k: k.suffix_mass(log_w),
    }


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--n", type=int, default=8, help="sample size of the end-to-end extended Gibbs model")
    args = ap.parse_args(argv)

    if _ckernels is None:
        print("compiled backend not built; nothing to compare")
        return 1
    cases = kernel_cases(args.size, np.random.default_rng(0))
    print(f"{'kernel':<20}{'cython s':>12}{'python s':>12}{'speedup':>10}")
    for name, call in cases.items():
        tc = best_of(lambda: call(_ckernels), args.repeat)
        tp = best_of(lambda: call(_pykernels), args.repeat)
        print(f"{name:<20}{tc:>12.5f}{tp:>12.5f}{tp / tc:>9.1f}x")

    print(f"\nend to end: information profile and leakage, extended Gibbs n={args.n}")
    for pure in ("", "1"):
        env = dict(os.environ, INFOBOUNDS_PURE_PYTHON=pure)
        out = subprocess.run([sys.executable, "-c", END_TO_END.format(n=args.n)], env=env,
                             capture_output=True, text=True, check=True).stdout.split()
        print(f"{out[0]:<8} {out[1]:>9} atoms {float(out[2]):>10.3f} s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
