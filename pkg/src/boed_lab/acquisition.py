"""Design selection: random, BAD (max EIG), R-I and R-IDeA.

R-I multiplies the EIG by a robust ratio that rewards designs which move the
design history towards the test distribution in MMD.  R-IDeA further
multiplies by a sigmoid de-amplification factor measuring how far the current
predictor is from a proxy function ``g`` (or from the best-in-class predictor
in the oracle variant).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .eig import DEFAULT_INNER, DEFAULT_OUTER, eig_nmc
from .numerics import DEFAULT_BANDWIDTH, NumericalError, as_points, sigmoid

METHODS = ("random", "bad", "ri", "ridea", "ridea-oracle")


class ProxyTrainingError(NumericalError):
    pass


@dataclass(frozen=True)
class AcquisitionSpec:
    method: str = "bad"
    lam: float = 1.0
    tau: float = 0.5
    kappa: float = 1.0
    n_outer: int = DEFAULT_OUTER
    n_inner: int = DEFAULT_INNER
    bandwidth: float = DEFAULT_BANDWIDTH
    proxy_steps: int = 2000
    proxy_lr: float = 0.1
    proxy_enriched: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if not (np.isfinite(self.lam) and np.isfinite(self.tau)):
            raise ValueError("lambda and tau must be finite")
        if self.lam < 0 or self.tau < 0:
            raise ValueError("lambda and tau must be non-negative")


@dataclass(frozen=True)
class Selection:
    index: int
    design: np.ndarray
    score: float
    scores: np.ndarray = field(repr=False)


def _argmax_first(scores) -> int:
    # np.argmax returns the first maximal index, which is the tie-break we want
    return int(np.argmax(np.asarray(scores)))


def _pick(candidates, scores) -> Selection:
    i = _argmax_first(scores)
    return Selection(i, candidates[i].copy(), float(scores[i]), np.asarray(scores))


def select_random(candidates, rng: np.random.Generator) -> Selection:
    candidates = as_points(candidates)
    if len(candidates) == 0:
        raise ValueError("empty candidate grid")
    i = int(rng.integers(len(candidates)))
    return Selection(i, candidates[i].copy(), float("nan"), np.full(len(candidates), np.nan))


def eig_scores(state, candidates, spec: AcquisitionSpec, rng) -> np.ndarray:
    est = eig_nmc(state, candidates, spec.n_outer, spec.n_inner, rng)
    return est.value


def select_bad(state, candidates, spec: AcquisitionSpec, rng) -> Selection:
    candidates = as_points(candidates)
    if len(candidates) == 0:
        raise ValueError("empty candidate grid")
    return _pick(candidates, eig_scores(state, candidates, spec, rng))


def robust_ratios(history, candidates, test, lam: float,
                  bandwidth: float = DEFAULT_BANDWIDTH) -> np.ndarray:
    """``max(0, 1 - lam * MMD(h + [xi], test) / MMD(h, test))`` for every candidate.

    Returns ones when ``lam == 0``, when the history is empty, or when the
    history already matches the test sample exactly (zero MMD).
    """
    candidates = as_points(candidates)
    d = candidates.shape[1]
    test = as_points(test, d)
    if len(test) == 0:
        raise ValueError("test sample must be non-empty")
    history = np.asarray(history, dtype=np.float64).reshape(-1, d)
    if lam == 0 or len(history) == 0:
        return np.ones(len(candidates))
    base = np.sqrt(max(kernels.mmd2(history, test, bandwidth), 0.0))
    if base == 0.0:
        return np.ones(len(candidates))
    aug = np.sqrt(np.maximum(kernels.mmd2_augmented(history, candidates, test, bandwidth), 0.0))
    return np.maximum(1.0 - lam * aug / base, 0.0)


def robust_ratio(history, xi, test, lam: float, bandwidth: float = DEFAULT_BANDWIDTH) -> float:
    return float(robust_ratios(history, as_points(xi, as_points(test).shape[1])[:1], test,
                               lam, bandwidth)[0])


def ri_scores(state, history, candidates, test, spec: AcquisitionSpec, rng) -> np.ndarray:
    eig = np.maximum(eig_scores(state, candidates, spec, rng), 0.0)
    return eig * robust_ratios(history, candidates, test, spec.lam, spec.bandwidth)


def select_ri(state, history, candidates, test, spec: AcquisitionSpec, rng) -> Selection:
    candidates = as_points(candidates)
    return _pick(candidates, ri_scores(state, history, candidates, test, spec, rng))


def dea_factor(fhat, g, tau: float, kappa: float = 1.0):
    """``sigmoid((|fhat - g| - tau) / kappa)``, elementwise."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    return sigmoid((np.abs(np.asarray(fhat) - np.asarray(g)) - tau) / kappa)


def select_ridea(state, history, candidates, test, spec: AcquisitionSpec, rng,
                 fhat: Callable | None = None, reference: Callable | None = None) -> Selection:
    """Maximise R-I times the de-amplification factor.

    ``reference`` is the proxy ``g`` (method ``ridea``) or the best-in-class
    predictor (``ridea-oracle``).  No proxy can be trained before the first
    observation; while ``reference`` is ``None`` the factor is 1 for every design.
    """
    candidates = as_points(candidates)
    scores = ri_scores(state, history, candidates, test, spec, rng)
    if reference is not None:
        if fhat is None:
            raise ValueError("fhat is required when a reference function is given")
        scores = scores * dea_factor(fhat(candidates), reference(candidates), spec.tau, spec.kappa)
    return _pick(candidates, scores)


# --------------------------------------------------------------------------
# proxy function


@dataclass(frozen=True, eq=False)
class ProxyFunction:
    """Linear-in-parameters proxy ``g(xi) = basis(xi) @ weights``."""

    weights: np.ndarray
    basis: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    steps: int = 0
    lr: float = 0.0
    loss_history: np.ndarray = field(default=None, repr=False)
    hinge_history: np.ndarray = field(default=None, repr=False)

    def __call__(self, xi) -> np.ndarray:
        return self.basis(xi) @ self.weights


def proxy_loss(g_vals, y, fhat_vals, tau: float) -> tuple[float, float]:
    """(squared-error term, hinge term) of the proxy objective, both per-point averages."""
    fit = float(np.mean((g_vals - y) ** 2))
    hinge = float(np.mean(np.maximum(0.0, tau - np.abs(fhat_vals - g_vals))))
    return fit, hinge


def train_proxy(designs, y, fhat_vals, tau: float, basis: Callable,
                steps: int = 2000, lr: float = 0.1) -> ProxyFunction:
    """Fit ``g`` to the observations while keeping it at least ``tau`` away from ``fhat``.

    Minimises ``mean((g - y)^2) + mean(max(0, tau - |fhat - g|))`` over the
    basis weights by full-batch gradient descent from zero weights.  The
    subgradient of the hinge is taken as 0 at its kinks (``|fhat - g| == tau``
    and ``fhat == g``).
    """
    phi = np.atleast_2d(basis(designs))
    y = np.asarray(y, dtype=np.float64).ravel()
    fhat_vals = np.asarray(fhat_vals, dtype=np.float64).ravel()
    n = len(y)
    if n == 0:
        raise ValueError("proxy training needs at least one observation")
    if len(phi) != n or len(fhat_vals) != n:
        raise ValueError("designs, observations and fhat values must align")
    w = np.zeros(phi.shape[1])
    losses = np.empty(steps + 1)
    hinges = np.empty(steps + 1)
    for k in range(steps + 1):
        with np.errstate(over="ignore", invalid="ignore"):  # divergence is reported below
            g = phi @ w
            fit, hinge = proxy_loss(g, y, fhat_vals, tau)
        losses[k], hinges[k] = fit + hinge, hinge
        if not np.isfinite(losses[k]):
            raise ProxyTrainingError(
                f"non-finite proxy loss at step {k} (|w|={np.linalg.norm(w):.3g}, lr={lr})"
            )
        if k == steps:
            break
        diff = fhat_vals - g
        active = np.abs(diff) < tau
        grad = (2.0 / n) * (phi.T @ (g - y)) + (1.0 / n) * (phi.T @ (active * np.sign(diff)))
        w = w - lr * grad
    return ProxyFunction(w, basis, steps, lr, losses, hinges)
