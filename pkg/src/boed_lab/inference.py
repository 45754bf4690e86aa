"""Posterior states over model parameters and the posterior-predictive mean.

Two representations are supported:

* :class:`ConjugateState`: exact Gaussian posterior for linear-Gaussian models,
  kept in information form so batches of updates commute.
* :class:`ParticleState`: weighted prior particles, reweighted by the
  likelihood and systematically resampled when the effective sample size
  drops below half the particle count.

Both are immutable; updates return new states.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .numerics import NumericalError, cholesky, solve_spd

DEFAULT_PARTICLES = 2000


class DegeneratePosteriorError(NumericalError):
    """Every particle has zero likelihood; the weighted posterior is undefined."""


@dataclass(frozen=True, eq=False)
class ConjugateState:
    precision: np.ndarray
    shift: np.ndarray  # precision @ mean
    noise_var: float
    features: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    n_obs: int = 0

    @classmethod
    def from_prior(cls, mean, cov, noise_var: float, features) -> "ConjugateState":
        if noise_var <= 0:
            raise ValueError("noise variance must be positive")
        cov = np.asarray(cov, dtype=np.float64)
        precision = np.linalg.inv(cov)
        precision = 0.5 * (precision + precision.T)
        return cls(precision, precision @ np.asarray(mean, dtype=np.float64),
                   float(noise_var), features)

    @property
    def mean(self) -> np.ndarray:
        return solve_spd(self.precision, self.shift)

    @property
    def cov(self) -> np.ndarray:
        cov = solve_spd(self.precision, np.eye(len(self.shift)))
        return 0.5 * (cov + cov.T)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        L = cholesky(self.cov)
        return self.mean + rng.standard_normal((n, len(self.shift))) @ L.T

    def predict_params(self, theta, xi) -> np.ndarray:
        return np.atleast_2d(theta) @ self.features(xi).T

    def obs_var(self, mean):
        return np.full(np.shape(mean), self.noise_var)

    def summary(self) -> dict:
        return {"kind": "conjugate", "mean": self.mean.tolist(), "n_obs": self.n_obs}


def conjugate_update(state: ConjugateState, xi, y) -> ConjugateState:
    """Condition on one or more observations ``y`` at designs ``xi``."""
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if y.size == 0:
        return state
    phi = np.atleast_2d(state.features(xi))
    if len(phi) != len(y):
        raise ValueError(f"{len(phi)} designs but {len(y)} observations")
    precision = state.precision + phi.T @ phi / state.noise_var
    precision = 0.5 * (precision + precision.T)
    shift = state.shift + phi.T @ y / state.noise_var
    cholesky(precision)  # raises NumericalError if the update broke positive definiteness
    return replace(state, precision=precision, shift=shift, n_obs=state.n_obs + len(y))


@dataclass(frozen=True, eq=False)
class ParticleState:
    particles: np.ndarray
    logw: np.ndarray
    model: object = field(repr=False)
    n_resamples: int = 0

    @classmethod
    def from_prior(cls, model, n: int, rng: np.random.Generator) -> "ParticleState":
        particles = model.prior_sample(n, rng)
        return cls(particles, np.full(n, -np.log(n)), model)

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.logw - logsumexp(self.logw))

    @property
    def ess(self) -> float:
        w = self.weights
        return float(1.0 / np.sum(w**2))

    @property
    def mean(self) -> np.ndarray:
        return self.weights @ self.particles

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        idx = rng.choice(len(self.particles), size=n, p=self.weights)
        return self.particles[idx]

    def predict_params(self, theta, xi) -> np.ndarray:
        return self.model.predict(theta, xi)

    def obs_var(self, mean):
        return self.model.noise_var(mean)

    def summary(self) -> dict:
        return {"kind": "particles", "mean": self.mean.tolist(), "ess": self.ess,
                "n_resamples": self.n_resamples}


def systematic_resample(weights, rng: np.random.Generator) -> np.ndarray:
    """Indices drawn by systematic resampling (one uniform offset, evenly spaced)."""
    n = len(weights)
    positions = (rng.uniform() + np.arange(n)) / n
    cdf = np.cumsum(weights)
    cdf[-1] = 1.0
    return np.minimum(np.searchsorted(cdf, positions, side="right"), n - 1)


def particle_update(state: ParticleState, xi, y, loglik=None,
                    rng: np.random.Generator | None = None,
                    ess_fraction: float = 0.5) -> ParticleState:
    """Reweight particles by the likelihood of ``y`` at ``xi``.

    ``loglik(particles, xi, y)`` defaults to the model's own likelihood.
    Resampling happens when ESS < ``ess_fraction`` * M and requires ``rng``.
    """
    loglik = loglik if loglik is not None else state.model.loglik
    ll = np.asarray(loglik(state.particles, xi, y), dtype=np.float64)
    ll = np.where(np.isnan(ll), -np.inf, ll)
    if not np.any(np.isfinite(ll)):
        raise DegeneratePosteriorError(
            f"all {len(ll)} particles have zero likelihood for y={y!r} at xi={np.ravel(xi)!r}"
        )
    logw = state.logw + ll
    total = logsumexp(logw)
    if not np.isfinite(total):
        raise DegeneratePosteriorError("posterior weights vanished after reweighting")
    new = replace(state, logw=logw - total)
    m = len(new.particles)
    if new.ess < ess_fraction * m:
        if rng is None:
            raise ValueError("resampling was triggered but no rng was supplied")
        idx = systematic_resample(new.weights, rng)
        new = replace(new, particles=new.particles[idx], logw=np.full(m, -np.log(m)),
                      n_resamples=new.n_resamples + 1)
    return new


def predictive_mean(state, xi) -> np.ndarray:
    """Posterior-predictive mean of the assumed model at each design in ``xi``."""
    if isinstance(state, ConjugateState):
        return state.features(xi) @ state.mean
    return state.weights @ state.predict_params(state.particles, xi)


def update(state, xi, y, rng: np.random.Generator | None = None):
    if isinstance(state, ConjugateState):
        return conjugate_update(state, xi, y)
    return particle_update(state, xi, y, rng=rng)


def initial_state(testbed, rng: np.random.Generator, n_particles: int = DEFAULT_PARTICLES):
    """Prior state for a testbed: conjugate when the model is linear-Gaussian, particles otherwise."""
    if testbed.is_linear_gaussian:
        return ConjugateState.from_prior(testbed.prior_mean(), testbed.prior_cov(),
                                         testbed.cfg.noise_var, testbed.features)
    return ParticleState.from_prior(testbed, n_particles, rng)
