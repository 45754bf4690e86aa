"""Randomised property studies behind ``boed-lab validate``.

* decomposition identity on random predictor triples,
* the finite-class generalization bound on a synthetic covariate-shift problem,
* the subset relations between exact, approximate and proxy de-amplifying regions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diagnostics import (amplification_term, approx_threshold, best_in_class, bound_rhs,
                          boundedness_constant, decompose, deamp_region_approx,
                          deamp_region_exact, density_ratio_sup, misspecification_sup)
from .testbeds import PolyConfig, poly_dgp_mean, polynomial_features


@dataclass
class StudyResult:
    name: str
    passed: bool
    summary: str
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.summary}"


def decomposition_study(trials: int = 100, n_test: int = 200, seed: int = 0,
                        tol: float = 1e-10) -> StudyResult:
    """Random cubic f*, quadratic fbar and fhat; B + C + A must equal the direct risk."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        x = rng.uniform(-4, 4, n_test)
        fs = polynomial_features(x, 3) @ rng.normal(size=4)
        fb = polynomial_features(x, 2) @ rng.normal(size=3)
        fh = polynomial_features(x, 2) @ rng.normal(size=3)
        rep = decompose(fh, fb, fs)
        worst = max(worst, abs(rep.residual))
    return StudyResult("decomposition identity", worst <= tol,
                       f"max |B+C+A-R| = {worst:.2e} over {trials} trials (tol {tol:g})",
                       {"max_residual": worst, "trials": trials})


# --------------------------------------------------------------------------
# finite-class bound


def linear_class(n_models: int = 41, intercept: float | None = None,
                 slopes=(0.0, 4.0)) -> np.ndarray:
    """Coefficient rows ``[a, b]`` of a finite class of lines with a common intercept."""
    if intercept is None:
        intercept = 1.0 - 0.5 * 16.0 / 3.0
    b = np.linspace(slopes[0], slopes[1], n_models)
    return np.column_stack([np.full(n_models, intercept), b])


def shifted_train_designs(n: int, rng: np.random.Generator, left_mass: float = 0.7,
                          low: float = -4.0, high: float = 4.0) -> np.ndarray:
    """Mixture of uniforms on the two halves of the domain (positive density everywhere)."""
    mid = 0.5 * (low + high)
    left = rng.uniform(size=n) < left_mass
    return np.where(left, rng.uniform(low, mid, n), rng.uniform(mid, high, n))


def bound_study(trials: int = 200, n: int = 50, n_models: int = 41, delta: float = 0.05,
                seed: int = 0, required_rate: float = 0.95) -> StudyResult:
    """Empirical test risk of the finite-class ERM versus the bound's right-hand side.

    The DGP is the quadratic polynomial testbed; the class is ``n_models``
    lines sharing the best-in-class intercept; training designs are drawn
    from a covariate-shifted mixture; ``C_inf`` is estimated by the grid
    histogram, ``B_inf`` and ``y_inf`` from the dense grid.
    """
    rng = np.random.default_rng(seed)
    cfg = PolyConfig()
    grid = np.linspace(-4.0, 4.0, 201)
    dense = np.linspace(-4.0, 4.0, 4001)
    coefs = linear_class(n_models)
    fstar_dense = poly_dgp_mean(dense, cfg)
    fbar = best_in_class(lambda x: poly_dgp_mean(np.ravel(x), cfg),
                         lambda x: polynomial_features(x, 1), dense)
    fbar_dense = fbar(dense)
    class_dense = polynomial_features(dense, 1) @ coefs.T  # (D, |F|)
    b_inf = float(np.max(np.abs(fbar_dense - fstar_dense)))
    y_inf = boundedness_constant([fstar_dense, fbar_dense, class_dense])

    holds, rhs_all, risk_all = [], [], []
    for _ in range(trials):
        x = shifted_train_designs(n, rng)
        y = poly_dgp_mean(x, cfg) + np.sqrt(cfg.noise_var) * rng.standard_normal(n)
        preds = polynomial_features(x, 1) @ coefs.T
        k = int(np.argmin(np.mean((preds - y[:, None]) ** 2, axis=0)))
        risk = float(np.mean((class_dense[:, k] - fstar_dense) ** 2))
        fh_x = preds[:, k]
        a_hat = amplification_term(fh_x, fbar(x), poly_dgp_mean(x, cfg))
        c_inf = density_ratio_sup(x, grid)
        rhs = bound_rhs(c_inf, b_inf, y_inf, a_hat, n_models, delta, n)
        holds.append(risk <= rhs)
        rhs_all.append(rhs)
        risk_all.append(risk)
    rate = float(np.mean(holds))
    return StudyResult(
        "generalization bound (finite class)", rate >= required_rate,
        f"bound held in {rate:.1%} of {trials} trials (need >= {required_rate:.0%}); "
        f"median R_test {np.median(risk_all):.3g} vs median RHS {np.median(rhs_all):.3g}",
        {"rate": rate, "median_risk": float(np.median(risk_all)),
         "median_rhs": float(np.median(rhs_all)), "b_inf": b_inf, "y_inf": y_inf},
    )


# --------------------------------------------------------------------------
# de-amplifying region subset relations


def random_poly_triple(rng: np.random.Generator, dense):
    """A random quadratic f*, its linear best-in-class fbar, and a learned linear fhat.

    ``fhat`` is the least-squares line through 2-10 noisy observations drawn
    from a random sub-interval of the domain, i.e. a small covariate-shifted
    training set.
    """
    base = np.array([1.0, 2.0, -0.5])
    coef = base + rng.normal(scale=0.5, size=3)

    def fstar(x):
        return polynomial_features(x, 2) @ coef

    fbar = best_in_class(fstar, lambda x: polynomial_features(x, 1), dense)
    n = int(rng.integers(2, 11))
    lo = rng.uniform(-4.0, 3.0)
    hi = rng.uniform(lo + 1.0, 4.0)
    x = rng.uniform(lo, hi, n)
    y = fstar(x) + np.sqrt(0.1) * rng.standard_normal(n)
    w, *_ = np.linalg.lstsq(polynomial_features(x, 1), y, rcond=None)

    def fhat(xx):
        return polynomial_features(xx, 1) @ w

    return fhat, fbar, fstar


def approx_subset_study(trials: int = 50, tau0_values=(0.0, 0.1), c: float = 2.0,
                        seed: int = 0) -> StudyResult:
    """Check approx-region(tau1) is contained in exact-region(tau0) on random triples."""
    rng = np.random.default_rng(seed)
    grid = np.linspace(-4.0, 4.0, 201)
    dense = np.linspace(-4.0, 4.0, 2001)
    violations, nonempty, checks = 0, 0, 0
    examples = []
    for trial in range(trials):
        fhat, fbar, fstar = random_poly_triple(rng, dense)
        b_inf = misspecification_sup(fbar, fstar, dense)
        for tau0 in tau0_values:
            tau1 = approx_threshold(tau0, b_inf, c)
            approx = deamp_region_approx(fhat, fbar, grid, tau1)
            exact = deamp_region_exact(fhat, fbar, fstar, grid, tau0)
            checks += 1
            nonempty += int(approx.any())
            bad = approx & ~exact
            if bad.any():
                violations += 1
                if len(examples) < 3:
                    i = int(np.flatnonzero(bad)[0])
                    xi = grid[i]
                    examples.append({
                        "trial": trial, "tau0": tau0, "xi": float(xi),
                        "fhat": float(fhat(xi)[0]), "fbar": float(fbar(xi)[0]),
                        "fstar": float(fstar(xi)[0]), "tau1": tau1,
                    })
    return StudyResult(
        "approximate region within exact region", violations == 0,
        f"{violations} violating checks of {checks} ({nonempty} with a non-empty approximate region)",
        {"violations": violations, "checks": checks, "nonempty": nonempty, "examples": examples},
    )


def proxy_subset_study(trials: int = 50, tau0_values=(0.0, 0.1), c: float = 2.0,
                       seed: int = 1) -> StudyResult:
    """Check proxy-region(tau1 + tau2) is contained in approx-region(tau1) when sup|g - fbar| <= tau2."""
    rng = np.random.default_rng(seed)
    grid = np.linspace(-4.0, 4.0, 201)
    dense = np.linspace(-4.0, 4.0, 2001)
    violations, nonempty, checks = 0, 0, 0
    for _ in range(trials):
        fhat, fbar, fstar = random_poly_triple(rng, dense)
        b_inf = misspecification_sup(fbar, fstar, dense)
        tau2 = float(rng.uniform(0.1, 3.0))
        # g = fbar + a bounded perturbation whose sup over the domain is at most tau2
        pert = rng.normal(size=2)
        scale = tau2 * rng.uniform(0.0, 1.0) / (abs(pert[0]) + 4.0 * abs(pert[1]))
        w = pert * scale

        def g(x, w=w, fbar=fbar):
            return fbar(x) + polynomial_features(x, 1) @ w

        assert np.max(np.abs(g(dense) - fbar(dense))) <= tau2
        for tau0 in tau0_values:
            tau1 = approx_threshold(tau0, b_inf, c)
            # use a threshold the learned fhat can actually exceed so the check is not vacuous
            for t1 in (tau1, 0.25 * tau1):
                proxy = deamp_region_approx(fhat, g, grid, t1 + tau2)
                approx = deamp_region_approx(fhat, fbar, grid, t1)
                checks += 1
                nonempty += int(proxy.any())
                violations += int((proxy & ~approx).any())
    return StudyResult(
        "proxy region within approximate region", violations == 0,
        f"{violations} violating checks of {checks} ({nonempty} with a non-empty proxy region)",
        {"violations": violations, "checks": checks, "nonempty": nonempty},
    )


def run_all(quick: bool = False) -> list[StudyResult]:
    bound_trials = 50 if quick else 200
    return [
        decomposition_study(),
        bound_study(trials=bound_trials),
        approx_subset_study(),
        proxy_subset_study(),
    ]
