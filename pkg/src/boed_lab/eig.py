"""Expected information gain: nested Monte Carlo estimator and linear-Gaussian closed form."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .inference import ConjugateState
from .numerics import NumericalError, as_points

DEFAULT_OUTER = 500
DEFAULT_INNER = 500


class EigEstimationError(NumericalError):
    pass


@dataclass(frozen=True)
class EigEstimate:
    """EIG values (nats) for a batch of designs, with Monte Carlo standard errors."""

    value: np.ndarray
    se: np.ndarray
    n_outer: int
    n_inner: int

    def __post_init__(self):
        if self.n_outer < 1 or self.n_inner < 1:
            raise ValueError("sample counts must be >= 1")


def eig_nmc(state, xi, n_outer: int = DEFAULT_OUTER, n_inner: int = DEFAULT_INNER,
            rng: np.random.Generator | None = None, dim: int | None = None) -> EigEstimate:
    """Nested Monte Carlo EIG at every design in ``xi``.

    Outer draws ``(theta_n, y_n)`` come from the current posterior and the
    assumed likelihood; the marginal ``p(y_n | xi)`` is averaged over
    ``n_inner`` fresh posterior draws plus ``theta_n`` itself.  All designs
    share the same parameter draws and standard-normal noise, so differences
    between candidates carry less Monte Carlo noise than the values do.
    """
    if n_outer < 1 or n_inner < 1:
        raise ValueError("sample counts must be >= 1")
    if rng is None:
        raise ValueError("eig_nmc needs an explicit rng")
    xi = as_points(xi, dim)
    theta_out = state.sample(n_outer, rng)
    theta_in = state.sample(n_inner, rng)
    z = rng.standard_normal(n_outer)

    mu_out = state.predict_params(theta_out, xi).T  # (C, N)
    var_out = state.obs_var(mu_out)
    y = mu_out + np.sqrt(var_out) * z[None, :]
    mu_in = state.predict_params(theta_in, xi).T  # (C, M)
    var_in = state.obs_var(mu_in)
    for name, arr in (("outer mean", mu_out), ("inner mean", mu_in),
                      ("outer variance", var_out), ("inner variance", var_in)):
        if not np.all(np.isfinite(arr)):
            raise EigEstimationError(f"non-finite {name} in {np.sum(~np.isfinite(arr))} entries")
    if np.any(var_out <= 0) or np.any(var_in <= 0):
        raise EigEstimationError("observation variance must be positive")

    terms = kernels.nmc_terms(y, mu_out, np.broadcast_to(var_out, y.shape),
                              mu_in, np.broadcast_to(var_in, mu_in.shape))
    if not np.all(np.isfinite(terms)):
        bad = np.flatnonzero(~np.all(np.isfinite(terms), axis=1))
        raise EigEstimationError(f"non-finite log-marginal at design indices {bad[:10].tolist()}")
    value = terms.mean(axis=1)
    se = terms.std(axis=1, ddof=1) / np.sqrt(n_outer) if n_outer > 1 else np.zeros(len(value))
    return EigEstimate(value, se, n_outer, n_inner)


def eig_linear_gaussian(state: ConjugateState, xi) -> np.ndarray:
    """Closed form ``0.5 * log(1 + phi' Sigma phi / sigma^2)`` for each design."""
    phi = np.atleast_2d(state.features(xi))
    quad = np.einsum("ij,jk,ik->i", phi, state.cov, phi)
    return 0.5 * np.log1p(quad / state.noise_var)


def eig_closed_form_cov(cov, phi, noise_var: float) -> np.ndarray:
    """Same closed form for an explicit covariance (allows a zero matrix)."""
    phi = np.atleast_2d(phi)
    quad = np.einsum("ij,jk,ik->i", phi, np.asarray(cov, dtype=np.float64), phi)
    return 0.5 * np.log1p(quad / noise_var)
