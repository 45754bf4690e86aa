"""Oracle-mode diagnostics: best-in-class predictor, error decomposition, bound, de-amplifying regions.

Everything here needs the true mean function, so it is only meaningful in
simulation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import least_squares

from .numerics import NumericalError, as_points

Func = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class DecompositionReport:
    misspecification: float  # B
    estimation: float  # C
    amplification: float  # A
    total: float
    n_samples: int

    @property
    def residual(self) -> float:
        return self.misspecification + self.estimation + self.amplification - self.total


@dataclass(frozen=True)
class BoundReport:
    c_inf: float
    b_inf: float
    y_inf: float
    a_hat: float
    class_size: int
    delta: float
    n: int
    rhs: float
    r_test: float | None = None

    @property
    def holds(self) -> bool:
        return self.r_test is None or self.r_test <= self.rhs


# --------------------------------------------------------------------------
# best-in-class predictor


class LinearPredictor:
    """``f(xi) = features(xi) @ coef``."""

    def __init__(self, coef, features: Func):
        self.coef = np.asarray(coef, dtype=np.float64)
        self.features = features

    def __call__(self, xi):
        return self.features(xi) @ self.coef

    def __repr__(self):
        return f"LinearPredictor(coef={self.coef!r})"


def best_in_class(target: Func, features: Func, grid) -> LinearPredictor:
    """Least-squares projection of ``target`` onto ``span(features)`` under uniform grid weights."""
    phi = np.atleast_2d(features(grid))
    f = np.asarray(target(grid), dtype=np.float64)
    gram = phi.T @ phi
    rank = np.linalg.matrix_rank(gram)
    if rank < gram.shape[0]:
        raise NumericalError(f"design matrix is rank deficient ({rank} < {gram.shape[0]})")
    coef = np.linalg.solve(gram, phi.T @ f)
    return LinearPredictor(coef, features)


class ParametricPredictor:
    """``f(xi) = model.predict(theta, xi)`` for one fixed parameter vector."""

    def __init__(self, theta, model):
        self.theta = np.asarray(theta, dtype=np.float64)
        self.model = model

    def __call__(self, xi):
        return self.model.predict(self.theta[None, :], xi)[0]


def best_in_class_testbed(testbed, grid, n_starts: int = 8, rng=None):
    """Best-in-class predictor for a testbed's assumed model.

    Linear-Gaussian models use the normal equations; nonlinear models use a
    multi-start nonlinear least-squares fit over the parameters.
    """
    if testbed.is_linear_gaussian:
        return best_in_class(testbed.dgp_mean, testbed.features, grid)
    target = testbed.dgp_mean(grid)
    rng = rng if rng is not None else np.random.default_rng(0)
    starts = testbed.prior_sample(n_starts, rng)
    best, best_cost = None, np.inf

    def resid(theta):
        with np.errstate(all="ignore"):
            r = testbed.predict(theta[None, :], grid)[0] - target
        return np.where(np.isfinite(r), r, 1e6)

    for x0 in starts:
        try:
            sol = least_squares(resid, x0, method="lm" if len(target) >= len(x0) else "trf")
        except ValueError:
            continue
        if sol.cost < best_cost:
            best, best_cost = sol.x, sol.cost
    if best is None:
        raise NumericalError("best-in-class fit failed from every start")
    return ParametricPredictor(best, testbed)


# --------------------------------------------------------------------------
# error decomposition and the amplification term


def decompose(fhat, fbar, fstar, sample=None) -> DecompositionReport:
    """Split the test risk of ``fhat`` into misspecification, estimation and amplification terms.

    Functions may be callables (evaluated on ``sample``) or arrays of values.
    """
    fh, fb, fs = (_values(f, sample) for f in (fhat, fbar, fstar))
    mis = fb - fs
    est = fh - fb
    B = float(np.mean(mis**2))
    C = float(np.mean(est**2))
    A = float(2.0 * np.mean(mis * est))
    total = float(np.mean((fh - fs) ** 2))
    return DecompositionReport(B, C, A, total, len(fh))


def _values(f, sample):
    if callable(f):
        return np.asarray(f(sample), dtype=np.float64)
    return np.asarray(f, dtype=np.float64)


def amplification_term(fhat, fbar, fstar, train_sample=None) -> float:
    """Training-sample mean of ``(fhat - fbar) * (fbar - fstar)``."""
    fh, fb, fs = (_values(f, train_sample) for f in (fhat, fbar, fstar))
    if fh.size == 0:
        raise ValueError("training sample must be non-empty")
    return float(np.mean((fh - fb) * (fb - fs)))


# --------------------------------------------------------------------------
# generalization bound


def density_ratio_sup(train_designs, grid) -> float:
    """sup over the grid of d_test / d_train with d_test uniform over the grid.

    ``d_train`` is a histogram of the training designs snapped to their nearest
    grid point, with one pseudo-count per grid point so it is positive
    everywhere.
    """
    grid = as_points(grid)
    train = as_points(train_designs, grid.shape[1])
    k = len(grid)
    d2 = ((train[:, None, :] - grid[None, :, :]) ** 2).sum(axis=-1)
    counts = np.bincount(np.argmin(d2, axis=1), minlength=k) + 1.0
    d_train = counts / counts.sum()
    return float(np.max((1.0 / k) / d_train))


def misspecification_sup(fbar, fstar, grid) -> float:
    return float(np.max(np.abs(_values(fbar, grid) - _values(fstar, grid))))


def boundedness_constant(arrays, safety: float = 1.5) -> float:
    return safety * max(float(np.max(np.abs(a))) for a in arrays)


def bound_rhs(c_inf: float, b_inf: float, y_inf: float, a_hat: float,
              class_size: int, delta: float, n: int) -> float:
    """Right-hand side of the covariate-shift generalization bound with the amplification term."""
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    if n < 1:
        raise ValueError("n must be >= 1")
    if class_size < 2:
        raise ValueError("the model class needs at least two members")
    log_term = y_inf**2 * np.log(class_size / delta) / (3.0 * n)
    if a_hat < 0:
        inner = b_inf**2 + 224.0 * log_term - 2.0 * a_hat
    else:
        inner = b_inf**2 + 128.0 * log_term - np.sqrt(3.0) * a_hat
    return float(c_inf * inner)


def bound_report(fhat, fbar, fstar, train_designs, grid, class_size: int, delta: float,
                 y_inf: float, test_sample=None) -> BoundReport:
    c_inf = density_ratio_sup(train_designs, grid)
    b_inf = misspecification_sup(fbar, fstar, grid)
    a_hat = amplification_term(fhat, fbar, fstar, train_designs)
    n = len(as_points(train_designs))
    rhs = bound_rhs(c_inf, b_inf, y_inf, a_hat, class_size, delta, n)
    r_test = None
    if test_sample is not None:
        r_test = float(np.mean((_values(fhat, test_sample) - _values(fstar, test_sample)) ** 2))
    return BoundReport(c_inf, b_inf, y_inf, a_hat, class_size, delta, n, rhs, r_test)


# --------------------------------------------------------------------------
# de-amplifying regions


def deamp_region_exact(fhat, fbar, fstar, grid, tau0: float) -> np.ndarray:
    """Boolean mask over the grid: ``(fhat - fbar) * (fbar - fstar) >= tau0``."""
    if tau0 < 0:
        raise ValueError("tau0 must be non-negative")
    fh, fb, fs = (_values(f, grid) for f in (fhat, fbar, fstar))
    return (fh - fb) * (fb - fs) >= tau0


def approx_threshold(tau0: float, b_inf: float, c: float = 2.0) -> float:
    """``tau0 / B_inf + c * B_inf``; undefined for a well-specified model with ``tau0 > 0``."""
    if c < 2:
        raise ValueError("c must be >= 2")
    if b_inf == 0:
        if tau0 > 0:
            raise ValueError("threshold undefined: zero misspecification with tau0 > 0")
        return 0.0
    return tau0 / b_inf + c * b_inf


def deamp_region_approx(fhat, reference, grid, threshold: float) -> np.ndarray:
    """Boolean mask over the grid: ``|fhat - reference| >= threshold``."""
    return np.abs(_values(fhat, grid) - _values(reference, grid)) >= threshold
