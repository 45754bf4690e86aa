"""Acceptance criteria, each at its stated tolerance and runtime budget.

Every test records a one-line PASS/FAIL verdict; the lines are printed in the
pytest terminal summary (see conftest.py) and when this file is run directly:

    python3 tests/test_acceptance.py
"""

from __future__ import annotations

import itertools
import math
import time

import numpy as np
import pytest

from boed_lab import _kernels_py, kernels
from boed_lab.acquisition import AcquisitionSpec, select_bad, select_ri, select_ridea
from boed_lab.config import ExperimentConfig
from boed_lab.eig import eig_linear_gaussian, eig_nmc
from boed_lab.harness import config_from_manifest, final_values, run_experiment, sweep
from boed_lab.inference import ConjugateState, conjugate_update, predictive_mean
from boed_lab.numerics import mmd_squared
from boed_lab.testbeds import build_testbed, polynomial_features
from boed_lab.validation import (approx_subset_study, bound_study, decomposition_study,
                                 proxy_subset_study)

RESULTS: list[str] = []


def record(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d} {title}: {detail}"
    RESULTS.append(line)
    print(line)


def finish(number, title, passed, detail, elapsed, budget):
    within = elapsed < budget
    record(number, title, passed and within,
           f"{detail}; {elapsed:.1f}s (budget {budget:g}s)")
    assert within, f"runtime {elapsed:.1f}s exceeds {budget}s"
    assert passed, detail


# ---------------------------------------------------------------- 1


def test_criterion_01_decomposition_identity():
    t0 = time.perf_counter()
    r = decomposition_study(trials=100, n_test=200, tol=1e-10)
    finish(1, "decomposition identity", r.passed, r.summary, time.perf_counter() - t0, 1.0)


# ---------------------------------------------------------------- 2


def test_criterion_02_eig_oracle():
    t0 = time.perf_counter()
    st = ConjugateState.from_prior(np.zeros(2), np.eye(2), 0.01,
                                   lambda x: polynomial_features(x, 1))
    xi = np.linspace(-4, 4, 20)[:, None]
    est = eig_nmc(st, xi, 2000, 2000, rng=np.random.default_rng(0))
    exact = eig_linear_gaussian(st, xi)
    z = (est.value - exact) / est.se
    at0 = eig_nmc(st, np.array([[0.0]]), 2000, 2000, rng=np.random.default_rng(0))
    ok0 = abs(at0.value[0] - 0.5 * math.log(101)) <= 3 * at0.se[0]
    elapsed = time.perf_counter() - t0
    passed = bool(np.all(np.abs(z) <= 3)) and ok0
    finish(2, "EIG oracle equivalence", passed,
           f"max |NMC - exact| / SE = {np.abs(z).max():.2f} over 20 points "
           f"(EIG {exact.min():.3f}..{exact.max():.3f} nats); at xi=0 "
           f"{at0.value[0]:.4f} vs {0.5 * math.log(101):.4f} (SE {at0.se[0]:.4f})",
           elapsed, 30.0)


# ---------------------------------------------------------------- 3


def test_criterion_03_mmd_properties():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    worst_self, symmetric = 0.0, True
    impls = [("selected", lambda p, q: mmd_squared(p, q)),
             ("numpy", lambda p, q: _kernels_py.mmd2(p, q, 1.0))]
    for _ in range(50):
        n, m, d = rng.integers(1, 40), rng.integers(1, 40), rng.integers(1, 4)
        P, Q = rng.normal(size=(n, d)), rng.normal(size=(m, d)) * 2
        for _, f in impls:
            worst_self = max(worst_self, abs(f(P, P)))
        symmetric &= mmd_squared(P, Q) == mmd_squared(Q, P)
    single = mmd_squared([0.0], [1.0])
    ok_single = abs(single - (2 - 2 * math.exp(-0.5))) <= 1e-9
    passed = worst_self <= 1e-12 and symmetric and ok_single
    finish(3, "MMD properties", passed,
           f"max |MMD2(P,P)| = {worst_self:.1e}; symmetric={symmetric}; "
           f"singleton {single:.9f} (backend {kernels.BACKEND})",
           time.perf_counter() - t0, 1.0)


# ---------------------------------------------------------------- 4


def test_criterion_04_region_subsets():
    t0 = time.perf_counter()
    approx = approx_subset_study(trials=50, tau0_values=(0.0, 0.1), c=2.0)
    proxy = proxy_subset_study(trials=50, tau0_values=(0.0, 0.1), c=2.0)
    detail = (f"approx within exact: {approx.summary}; "
              f"proxy within approx: {proxy.summary}")
    if approx.details["examples"]:
        ex = approx.details["examples"][0]
        detail += (f"; e.g. xi={ex['xi']:.2f} fhat={ex['fhat']:.3f} fbar={ex['fbar']:.3f} "
                   f"fstar={ex['fstar']:.3f} tau1={ex['tau1']:.3f}")
    finish(4, "de-amplifying region subsets", approx.passed and proxy.passed, detail,
           time.perf_counter() - t0, 10.0)


# ---------------------------------------------------------------- 5


def test_criterion_05_bound_validation():
    t0 = time.perf_counter()
    r = bound_study(trials=200, n=50, n_models=41, delta=0.05, required_rate=0.95)
    finish(5, "generalization bound", r.passed, r.summary, time.perf_counter() - t0, 60.0)


# ---------------------------------------------------------------- 6, 7


def _five_method_run(spec: str):
    cfg = ExperimentConfig(testbed="poly", spec=spec,
                           methods=("random", "bad", "ri", "ridea", "ridea-oracle"),
                           lam=1.0, tau=0.5, steps=10, seeds=tuple(range(20)))
    rows, manifest = run_experiment(cfg)
    assert manifest["status"] == "complete", manifest["cells"]
    mse = final_values(rows, "mse")
    mmd2 = final_values(rows, "mmd2")
    return mse, mmd2


def _fmt(values: dict) -> str:
    return ", ".join(f"{m} {v.mean():.4g}±{v.std(ddof=1) / math.sqrt(len(v)):.2g}"
                     for m, v in values.items())


@pytest.mark.slow
def test_criterion_06_misspecified_ordering():
    t0 = time.perf_counter()
    mse, _ = _five_method_run("mis")
    m = {k: v.mean() for k, v in mse.items()}
    ordering = m["ridea"] < m["ri"] < max(m["bad"], m["random"])
    rel = abs(m["ridea"] - m["ridea-oracle"]) / m["ridea-oracle"]
    finish(6, "misspecified polynomial ordering", ordering and rel <= 0.2,
           f"final MSE {_fmt(mse)}; R-IDeA vs oracle {rel:.1%}",
           time.perf_counter() - t0, 600.0)


@pytest.mark.slow
def test_criterion_07_well_specified_null():
    t0 = time.perf_counter()
    mse, mmd2 = _five_method_run("well")
    # every pair of method means must differ by at most 2 standard errors of the difference
    worst, worst_pair = 0.0, None
    for a, b in itertools.combinations(mse, 2):
        se = math.sqrt(mse[a].var(ddof=1) / len(mse[a]) + mse[b].var(ddof=1) / len(mse[b]))
        z = abs(mse[a].mean() - mse[b].mean()) / se
        if z > worst:
            worst, worst_pair = z, (a, b)
    finish(7, "well-specified null result", worst <= 2.0,
           f"largest pairwise gap {worst:.2f} pooled SE ({worst_pair[0]} vs {worst_pair[1]}); "
           f"final MSE {_fmt(mse)}; final MMD2 {_fmt(mmd2)}",
           time.perf_counter() - t0, 600.0)


# ---------------------------------------------------------------- 8


@pytest.mark.slow
def test_criterion_08_lambda_sweep():
    t0 = time.perf_counter()
    cfg = ExperimentConfig(testbed="poly", spec="mis", methods=("ri",), tau=0.5, steps=10,
                           seeds=tuple(range(20)))
    lams = [0.25, 0.5, 1.0]
    res = sweep(cfg, "lambda", lams)
    means = [final_values(res[v][0], "mmd2")["ri"].mean() for v in lams]
    decreasing = all(a > b for a, b in zip(means, means[1:]))
    finish(8, "lambda sweep trend", decreasing,
           "final mean MMD2 for R-I: " + ", ".join(f"lambda={v}: {m:.4g}" for v, m in zip(lams, means)),
           time.perf_counter() - t0, 900.0)


# ---------------------------------------------------------------- 9


def _random_posterior(tb, rng):
    st = ConjugateState.from_prior(tb.prior_mean(), tb.prior_cov(), tb.cfg.noise_var, tb.features)
    k = int(rng.integers(1, 8))
    x = rng.uniform(-4, 4, (k, 1))
    return conjugate_update(st, x, tb.dgp_sample(x, rng)), x


def test_criterion_09_reduction_identities():
    t0 = time.perf_counter()
    tb = build_testbed("poly", "mis")
    cand = tb.grid(201)
    rng = np.random.default_rng(0)
    same_bad, same_ri = 0, 0
    for i in range(10):
        st, hist = _random_posterior(tb, rng)
        test = tb.sample_test(200, rng)
        spec0 = AcquisitionSpec(method="ri", lam=0.0)
        a = select_ri(st, hist, cand, test, spec0, np.random.default_rng(100 + i))
        b = select_bad(st, cand, spec0, np.random.default_rng(100 + i))
        same_bad += a.index == b.index and np.array_equal(a.scores, np.maximum(b.scores, 0))

        spec = AcquisitionSpec(method="ridea", lam=1.0, tau=0.5)
        fhat = lambda x, st=st: predictive_mean(st, x)
        ri = select_ri(st, hist, cand, test, spec, np.random.default_rng(200 + i))
        ridea = select_ridea(st, hist, cand, test, spec, np.random.default_rng(200 + i),
                             fhat=fhat, reference=lambda x, f=fhat: f(x) - 0.3)
        same_ri += ridea.index == ri.index
    finish(9, "reduction identities", same_bad == 10 and same_ri == 10,
           f"lambda=0 R-I == BAD on {same_bad}/10 states; constant DeA R-IDeA == R-I on {same_ri}/10",
           time.perf_counter() - t0, 60.0)


# ---------------------------------------------------------------- 10


def test_criterion_10_reproducibility(tmp_path):
    t0 = time.perf_counter()
    cfg = ExperimentConfig(testbed="poly", spec="mis",
                           methods=("random", "bad", "ri", "ridea", "ridea-oracle"),
                           steps=4, seeds=(0, 1), eig_outer=200, eig_inner=200,
                           oracle_diagnostics=True)
    run_experiment(cfg, tmp_path / "orig")
    replay = config_from_manifest(tmp_path / "orig" / "manifest.json")
    run_experiment(replay, tmp_path / "a")
    run_experiment(replay, tmp_path / "b")
    src = ExperimentConfig(testbed="source", spec="mis", methods=("bad", "ridea"), steps=3,
                           seeds=(0,), eig_outer=100, eig_inner=100, particles=500)
    run_experiment(src, tmp_path / "s0")
    run_experiment(config_from_manifest(tmp_path / "s0" / "manifest.json"), tmp_path / "s1")
    read = lambda name: (tmp_path / name / "metrics.csv").read_bytes()
    same = read("a") == read("b") == read("orig") and read("s0") == read("s1")
    finish(10, "reproducibility", same,
           f"metrics.csv byte-identical across manifest replays: {same} "
           f"(polynomial {len(read('a'))} bytes, source {len(read('s0'))} bytes)",
           time.perf_counter() - t0, float("inf"))


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
