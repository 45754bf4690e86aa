"""Experiment environments: polynomial regression, acoustic source location, pharmacokinetics.

Each testbed bundles a data-generating process (DGP) with an assumed model.
Designs are always handled as ``(n, d)`` arrays.  Observations live in the
space the assumed model is Gaussian in: raw ``y`` for the polynomial and PK
testbeds, ``log y`` for the source testbed.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import as_points

SPEC_VARIANTS = ("well", "mis")

_LOG_2PI = math.log(2.0 * math.pi)


def gaussian_logpdf(y, mean, var):
    return -0.5 * (_LOG_2PI + np.log(var) + (y - mean) ** 2 / var)


def polynomial_features(x, degree: int) -> np.ndarray:
    """[1, x, x^2, ..., x^degree] for scalar designs; returns shape (n, degree + 1)."""
    x = as_points(x)[:, 0]
    return np.vander(x, degree + 1, increasing=True)


class Testbed:
    """Common machinery; subclasses supply the DGP and the assumed model."""

    name: str
    variant: str
    low: tuple[float, ...]
    high: tuple[float, ...]

    @property
    def dim(self) -> int:
        return len(self.low)

    @property
    def is_linear_gaussian(self) -> bool:
        return False

    def grid(self, size: int) -> np.ndarray:
        """Uniform grid with ``size`` points per dimension."""
        if size < 1:
            raise ValueError("grid size must be >= 1")
        axes = [np.linspace(lo, hi, size) for lo, hi in zip(self.low, self.high)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def sample_test(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """``n`` draws from the test distribution, uniform over the design box."""
        return rng.uniform(self.low, self.high, size=(n, self.dim))

    def contains(self, xi) -> np.ndarray:
        xi = as_points(xi, self.dim)
        return np.all((xi >= np.asarray(self.low)) & (xi <= np.asarray(self.high)), axis=1)

    # assumed model -------------------------------------------------------

    def loglik(self, theta, xi, y) -> np.ndarray:
        """Log-likelihood of one observation ``y`` at design ``xi`` for each parameter row."""
        mean = self.predict(theta, as_points(xi, self.dim)[:1])[:, 0]
        return gaussian_logpdf(y, mean, self.noise_var(mean))

    def proxy_features(self, xi, degree: int) -> np.ndarray:
        """Polynomial basis in the design rescaled to [-1, 1]; used for the proxy function."""
        xi = as_points(xi, self.dim)
        lo, hi = np.asarray(self.low), np.asarray(self.high)
        u = (2.0 * xi - (lo + hi)) / (hi - lo)
        cols = [np.ones(len(u))]
        for k in range(1, degree + 1):
            for j in range(self.dim):
                cols.append(u[:, j] ** k)
        return np.stack(cols, axis=1)

    def default_proxy_degree(self) -> int:
        return 3

    # the following are provided by subclasses
    def dgp_mean(self, xi) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def dgp_noise_var(self, xi) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def dgp_sample(self, xi, rng: np.random.Generator) -> np.ndarray:
        xi = as_points(xi, self.dim)
        mean = self.dgp_mean(xi)
        return mean + np.sqrt(self.dgp_noise_var(xi)) * rng.standard_normal(len(xi))

    def prior_sample(self, n: int, rng: np.random.Generator) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError

    def predict(self, theta, xi) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def noise_var(self, mean):  # pragma: no cover - abstract
        raise NotImplementedError


# --------------------------------------------------------------------------
# polynomial regression


@dataclass(frozen=True)
class PolyConfig:
    intercept: float = 1.0
    linear: float = 2.0
    quadratic: float = -0.5
    cubic: float = 0.0
    noise_var: float = 0.1
    model_degree: int = 1
    prior_var: float = 1.0
    low: float = -4.0
    high: float = 4.0

    def __post_init__(self):
        if self.noise_var <= 0:
            raise ValueError("noise variance must be positive")
        if self.prior_var <= 0:
            raise ValueError("prior variance must be positive")
        if self.model_degree < 0:
            raise ValueError("model degree must be >= 0")


def poly_dgp_mean(x, cfg: PolyConfig = PolyConfig()):
    x = np.asarray(x, dtype=np.float64)
    return cfg.intercept + cfg.linear * x + cfg.quadratic * x**2 + cfg.cubic * x**3


@dataclass(frozen=True)
class PolyTestbed(Testbed):
    cfg: PolyConfig = PolyConfig()
    variant: str = "mis"
    name: str = "poly"

    @property
    def low(self):
        return (self.cfg.low,)

    @property
    def high(self):
        return (self.cfg.high,)

    @property
    def is_linear_gaussian(self) -> bool:
        return True

    @property
    def param_dim(self) -> int:
        return self.cfg.model_degree + 1

    def features(self, xi) -> np.ndarray:
        return polynomial_features(xi, self.cfg.model_degree)

    def prior_mean(self) -> np.ndarray:
        return np.zeros(self.param_dim)

    def prior_cov(self) -> np.ndarray:
        return self.cfg.prior_var * np.eye(self.param_dim)

    def dgp_mean(self, xi):
        return poly_dgp_mean(as_points(xi, 1)[:, 0], self.cfg)

    def dgp_noise_var(self, xi):
        return np.full(len(as_points(xi, 1)), self.cfg.noise_var)

    def prior_sample(self, n, rng):
        return rng.normal(0.0, math.sqrt(self.cfg.prior_var), size=(n, self.param_dim))

    def predict(self, theta, xi):
        theta = np.atleast_2d(theta)
        return theta @ self.features(xi).T

    def noise_var(self, mean):
        return np.full(np.shape(mean), self.cfg.noise_var)

    def proxy_features(self, xi, degree):
        return polynomial_features(np.asarray(xi) / max(abs(self.cfg.low), abs(self.cfg.high)), degree)

    def default_proxy_degree(self) -> int:
        return self.cfg.model_degree


# --------------------------------------------------------------------------
# acoustic source location


@dataclass(frozen=True)
class SourceConfig:
    n_sources: int = 2
    dim: int = 1
    base: float = 0.1
    max_signal: float = 1e-4
    amplitude: float = 1.0
    noise_sd: float = 0.1
    low: float = -4.0
    high: float = 4.0

    def __post_init__(self):
        for name in ("base", "max_signal", "amplitude", "noise_sd"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.n_sources < 1 or self.dim < 1:
            raise ValueError("need at least one source and one dimension")

    def amplitudes(self) -> np.ndarray:
        return np.full(self.n_sources, self.amplitude)


SOURCE_MISSPECIFIED_DGP = dict(base=0.4, max_signal=4e-4, amplitude=0.4)


def acoustic_intensity(theta, xi, cfg: SourceConfig) -> np.ndarray:
    """Total intensity ``b + sum_k alpha_k / (m + ||theta_k - xi||^2)``.

    ``theta`` is ``(K, d)`` for one configuration or ``(n, K*d)`` for a batch;
    ``xi`` is ``(C, d)``.  Returns ``(C,)`` or ``(n, C)`` respectively.
    """
    theta = np.asarray(theta, dtype=np.float64)
    if theta.ndim == 2 and theta.shape == (cfg.n_sources, cfg.dim):
        return _intensity_batch(theta.reshape(1, -1), xi, cfg)[0]
    return _intensity_batch(theta, xi, cfg)


def _intensity_batch(theta, xi, cfg: SourceConfig) -> np.ndarray:
    xi = as_points(xi, cfg.dim)
    locs = np.asarray(theta, dtype=np.float64).reshape(-1, cfg.n_sources, cfg.dim)
    d2 = ((locs[:, :, None, :] - xi[None, None, :, :]) ** 2).sum(axis=-1)
    return cfg.base + (cfg.amplitudes()[None, :, None] / (cfg.max_signal + d2)).sum(axis=1)


def source_observe(theta, xi, cfg: SourceConfig, rng: np.random.Generator) -> np.ndarray:
    """Positive observation with ``log y ~ N(log mu, noise_sd^2)``."""
    mu = acoustic_intensity(theta, xi, cfg)
    return np.exp(np.log(mu) + cfg.noise_sd * rng.standard_normal(np.shape(mu)))


@dataclass(frozen=True, eq=False)
class SourceTestbed(Testbed):
    model_cfg: SourceConfig = SourceConfig()
    dgp_cfg: SourceConfig = SourceConfig()
    theta_true: np.ndarray = field(default_factory=lambda: np.zeros((2, 1)))
    variant: str = "mis"
    name: str = "source"

    @property
    def low(self):
        return (self.model_cfg.low,) * self.model_cfg.dim

    @property
    def high(self):
        return (self.model_cfg.high,) * self.model_cfg.dim

    @property
    def param_dim(self) -> int:
        return self.model_cfg.n_sources * self.model_cfg.dim

    def dgp_mean(self, xi):
        return np.log(acoustic_intensity(self.theta_true, xi, self.dgp_cfg))

    def dgp_noise_var(self, xi):
        return np.full(len(as_points(xi, self.dim)), self.dgp_cfg.noise_sd**2)

    def prior_sample(self, n, rng):
        return rng.standard_normal((n, self.param_dim))

    def predict(self, theta, xi):
        return np.log(_intensity_batch(np.atleast_2d(theta), xi, self.model_cfg))

    def noise_var(self, mean):
        return np.full(np.shape(mean), self.model_cfg.noise_sd**2)


# --------------------------------------------------------------------------
# pharmacokinetics


@dataclass(frozen=True)
class PkConfig:
    theta_real: tuple[float, float, float] = (1.5, 0.15, 15.0)
    dose: float = 400.0
    well_noise: tuple[float, float] = (0.01, 0.1)
    mis_noise: tuple[float, float] = (0.02, 0.2)
    rho: float = 0.25
    fast_fraction: float = 0.6
    prior_log_mean: tuple[float, float, float] = (0.0, math.log(0.1), math.log(20.0))
    prior_log_var: float = 0.05
    # +1 reproduces the printed dual-absorption formula, -1 the conventional difference form
    dual_sign: int = 1
    low: float = 0.0
    high: float = 24.0

    def __post_init__(self):
        ka, ke, v = self.theta_real
        if min(ka, ke, v) <= 0:
            raise ValueError("rates and volume must be positive")
        if ka == ke:
            raise ValueError("absorption and elimination rates must differ")
        if not (0 < self.rho < 1 and 0 < self.fast_fraction < 1):
            raise ValueError("rho and fast_fraction must lie in (0, 1)")
        if self.dual_sign not in (1, -1):
            raise ValueError("dual_sign must be +1 or -1")


def _split_theta(theta):
    theta = np.asarray(theta, dtype=np.float64)
    if theta.ndim == 1:
        return theta[0], theta[1], theta[2]
    return theta[:, 0:1], theta[:, 1:2], theta[:, 2:3]


def pk_concentration(xi, theta, dose: float = 400.0) -> np.ndarray:
    """One-compartment oral dosing curve ``D/V * ka/(ka-ke) * (exp(-ke t) - exp(-ka t))``.

    ``theta`` is ``(3,)`` or ``(n, 3)``; ``xi`` is hours since dose.
    """
    ka, ke, v = _split_theta(theta)
    if np.any(ka == ke):
        raise ValueError("absorption and elimination rates coincide; the curve is undefined")
    t = np.asarray(xi, dtype=np.float64)
    return dose / v * ka / (ka - ke) * (np.exp(-ke * t) - np.exp(-ka * t))


def pk_dual_absorption(xi, theta, rho: float, fast_fraction: float,
                       dose: float = 400.0, sign: int = 1) -> np.ndarray:
    """Two parallel absorption pathways with rates ``ka`` and ``rho * ka``.

    With ``sign=+1`` each pathway carries ``exp(-ke t) + exp(-ka t)``;
    ``sign=-1`` gives the usual difference of exponentials.
    """
    ka1, ke, v = _split_theta(theta)
    ka2 = rho * ka1
    if np.any(ka1 == ke) or np.any(ka2 == ke):
        raise ValueError("an absorption rate coincides with the elimination rate")
    t = np.asarray(xi, dtype=np.float64)
    fast = ka1 / (ka1 - ke) * (np.exp(-ke * t) + sign * np.exp(-ka1 * t))
    slow = ka2 / (ka2 - ke) * (np.exp(-ke * t) + sign * np.exp(-ka2 * t))
    return dose / v * (fast_fraction * fast + (1.0 - fast_fraction) * slow)


def pk_noise_var(z, noise: tuple[float, float]):
    return noise[0] * np.asarray(z) ** 2 + noise[1]


def pk_observe(xi, theta, variant: str, rng: np.random.Generator,
               cfg: PkConfig = PkConfig()) -> np.ndarray:
    """Gaussian draw around the well-specified (``z``) or dual-absorption mean."""
    if variant == "well":
        z, noise = pk_concentration(xi, theta, cfg.dose), cfg.well_noise
    elif variant == "mis":
        z = pk_dual_absorption(xi, theta, cfg.rho, cfg.fast_fraction, cfg.dose, cfg.dual_sign)
        noise = cfg.mis_noise
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return z + np.sqrt(pk_noise_var(z, noise)) * rng.standard_normal(np.shape(z))


@dataclass(frozen=True)
class PkTestbed(Testbed):
    cfg: PkConfig = PkConfig()
    variant: str = "mis"
    name: str = "pk"

    @property
    def low(self):
        return (self.cfg.low,)

    @property
    def high(self):
        return (self.cfg.high,)

    @property
    def param_dim(self) -> int:
        return 3

    def dgp_mean(self, xi):
        return pk_concentration(as_points(xi, 1)[:, 0], np.asarray(self.cfg.theta_real), self.cfg.dose)

    def dgp_noise_var(self, xi):
        return pk_noise_var(self.dgp_mean(xi), self.cfg.well_noise)

    def prior_sample(self, n, rng):
        mean = np.asarray(self.cfg.prior_log_mean)
        return np.exp(mean + math.sqrt(self.cfg.prior_log_var) * rng.standard_normal((n, 3)))

    def predict(self, theta, xi):
        t = as_points(xi, 1)[:, 0][None, :]
        theta = np.atleast_2d(theta)
        if self.variant == "well":
            return pk_concentration(t, theta, self.cfg.dose)
        return pk_dual_absorption(t, theta, self.cfg.rho, self.cfg.fast_fraction,
                                  self.cfg.dose, self.cfg.dual_sign)

    def noise_var(self, mean):
        noise = self.cfg.well_noise if self.variant == "well" else self.cfg.mis_noise
        return pk_noise_var(mean, noise)


# --------------------------------------------------------------------------
# construction from flat config overrides

TESTBEDS = ("poly", "source", "pk")


def _coerce(cfg_cls, overrides: dict) -> dict:
    fields = {f.name: f for f in dataclasses.fields(cfg_cls)}
    out = {}
    for key, raw in overrides.items():
        if key not in fields:
            raise KeyError(f"unknown {cfg_cls.__name__} field {key!r}")
        default = getattr(cfg_cls(), key)
        if isinstance(default, tuple):
            value = tuple(float(v) for v in str(raw).split(",")) if isinstance(raw, str) else tuple(raw)
        elif isinstance(default, bool):
            value = str(raw).lower() in ("1", "true", "yes")
        elif isinstance(default, int):
            value = int(raw)
        else:
            value = float(raw)
        out[key] = value
    return out


def build_testbed(name: str, variant: str = "mis", overrides: dict | None = None,
                  rng: np.random.Generator | None = None) -> Testbed:
    """Build a testbed by name.

    ``overrides`` maps config field names to values (strings are parsed).  For
    the source testbed, keys prefixed with ``dgp_`` override the DGP constants
    and the true source locations are drawn from the prior with ``rng``.
    """
    overrides = dict(overrides or {})
    if variant not in SPEC_VARIANTS:
        raise ValueError(f"variant must be one of {SPEC_VARIANTS}, got {variant!r}")
    if name == "poly":
        base = {"model_degree": 1 if variant == "mis" else 2}
        base.update(_coerce(PolyConfig, overrides))
        return PolyTestbed(cfg=PolyConfig(**base), variant=variant)
    if name == "source":
        dgp_over = {k[4:]: v for k, v in overrides.items() if k.startswith("dgp_")}
        model_over = {k: v for k, v in overrides.items() if not k.startswith("dgp_")}
        model_cfg = SourceConfig(**_coerce(SourceConfig, model_over))
        dgp_base = dataclasses.asdict(model_cfg)
        if variant == "mis":
            dgp_base.update(SOURCE_MISSPECIFIED_DGP)
        dgp_base.update(_coerce(SourceConfig, dgp_over))
        dgp_cfg = SourceConfig(**dgp_base)
        if dgp_cfg.dim != model_cfg.dim or dgp_cfg.n_sources != model_cfg.n_sources:
            raise ValueError("DGP and model must agree on source count and dimension")
        rng = rng if rng is not None else np.random.default_rng(0)
        theta_true = rng.standard_normal((model_cfg.n_sources, model_cfg.dim))
        return SourceTestbed(model_cfg=model_cfg, dgp_cfg=dgp_cfg,
                             theta_true=theta_true, variant=variant)
    if name == "pk":
        return PkTestbed(cfg=PkConfig(**_coerce(PkConfig, overrides)), variant=variant)
    raise ValueError(f"unknown testbed {name!r}; choose from {TESTBEDS}")
