"""Compare the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Sizes match one acquisition step of the polynomial experiment: 201 candidate
designs, N = M = 500 nested Monte Carlo samples, 200 test designs and a
10-point design history.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from boed_lab import _kernels_py

try:
    from boed_lab import _kernels as _kernels_c
except ImportError:  # extension not built
    _kernels_c = None


def make_inputs(rng, n_cand=201, n_outer=500, n_inner=500, n_test=200, n_hist=10):
    mu_out = rng.normal(size=(n_cand, n_outer))
    var_out = np.full((n_cand, n_outer), 0.1)
    y = mu_out + np.sqrt(var_out) * rng.standard_normal((n_cand, n_outer))
    mu_in = rng.normal(size=(n_cand, n_inner))
    var_in = np.full((n_cand, n_inner), 0.1)
    nmc = (y, mu_out, var_out, mu_in, var_in)
    hist = rng.uniform(-4, 4, (n_hist, 1))
    cand = np.linspace(-4, 4, n_cand)[:, None]
    test = rng.uniform(-4, 4, (n_test, 1))
    mmd = (hist, cand, test, 1.0)
    return nmc, mmd


def bench(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    nmc, mmd = make_inputs(np.random.default_rng(0))
    cases = [("nmc_terms 201x500x500", "nmc_terms", nmc),
             ("mmd2_augmented 201 cand", "mmd2_augmented", mmd)]
    print(f"{'kernel':28s} {'numpy [s]':>10s} {'cython [s]':>11s} {'speedup':>8s} {'max |diff|':>11s}")
    for label, name, inputs in cases:
        t_py = bench(getattr(_kernels_py, name), inputs, args.repeat)
        if _kernels_c is None:
            print(f"{label:28s} {t_py:10.4f} {'n/a':>11s}")
            continue
        t_c = bench(getattr(_kernels_c, name), inputs, args.repeat)
        diff = np.max(np.abs(getattr(_kernels_py, name)(*inputs) - getattr(_kernels_c, name)(*inputs)))
        print(f"{label:28s} {t_py:10.4f} {t_c:11.4f} {t_py / t_c:7.1f}x {diff:11.2e}")
    if _kernels_c is None:
        print("compiled extension not available; rebuild with `pip install -e .`")


if __name__ == "__main__":
    main()
