"""Experiment configuration: flat ``dotted.key=value`` files with CLI overrides."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .acquisition import METHODS
from .testbeds import SPEC_VARIANTS, TESTBEDS


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    testbed: str = "poly"
    spec: str = "mis"
    methods: tuple[str, ...] = ("random", "bad", "ri", "ridea")
    lam: float = 1.0
    tau: float = 0.5
    kappa: float = 1.0
    steps: int = 10
    seeds: tuple[int, ...] = tuple(range(20))
    root_seed: int = 0
    grid_size: int = 201
    eig_outer: int = 500
    eig_inner: int = 500
    test_size: int = 200
    mse_reps: int = 10
    particles: int = 2000
    proxy_steps: int = 2000
    proxy_lr: float = 0.1
    proxy_enriched: bool = False
    bandwidth: float = 1.0
    oracle_diagnostics: bool = False
    out: str | None = None
    testbed_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.testbed not in TESTBEDS:
            raise ConfigError(f"testbed must be one of {TESTBEDS}, got {self.testbed!r}")
        if self.spec not in SPEC_VARIANTS:
            raise ConfigError(f"spec must be one of {SPEC_VARIANTS}, got {self.spec!r}")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ConfigError(f"unknown or empty methods {bad}; choose from {METHODS}")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.test_size < 2:
            raise ConfigError("test sample size must be >= 2")
        if self.kappa <= 0 or self.lam < 0 or self.tau < 0:
            raise ConfigError("need kappa > 0, lambda >= 0, tau >= 0")
        for name in ("grid_size", "eig_outer", "eig_inner", "mse_reps", "particles", "proxy_steps"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["methods"] = list(self.methods)
        d["seeds"] = list(self.seeds)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        d["methods"] = tuple(d.get("methods", cls.methods))
        d["seeds"] = tuple(int(s) for s in d.get("seeds", cls.seeds))
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields {sorted(unknown)}")
        return cls(**d)


# dotted key -> (field, parser)
def _bool(v) -> bool:
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {v!r}")


def _seeds(v) -> tuple[int, ...]:
    s = str(v).strip()
    if "," in s or s.startswith("["):
        return tuple(int(x) for x in s.strip("[]").split(",") if x.strip())
    return tuple(range(int(s)))


def _methods(v) -> tuple[str, ...]:
    return tuple(m.strip() for m in str(v).split(",") if m.strip())


KEYS = {
    "testbed": ("testbed", str),
    "spec": ("spec", str),
    "methods": ("methods", _methods),
    "acquisition.lambda": ("lam", float),
    "acquisition.tau": ("tau", float),
    "acquisition.kappa": ("kappa", float),
    "steps": ("steps", int),
    "seeds": ("seeds", _seeds),
    "root_seed": ("root_seed", int),
    "grid.size": ("grid_size", int),
    "eig.outer": ("eig_outer", int),
    "eig.inner": ("eig_inner", int),
    "test.size": ("test_size", int),
    "mse.reps": ("mse_reps", int),
    "inference.particles": ("particles", int),
    "proxy.steps": ("proxy_steps", int),
    "proxy.lr": ("proxy_lr", float),
    "proxy.enriched": ("proxy_enriched", _bool),
    "kernel.bandwidth": ("bandwidth", float),
    "oracle_diagnostics": ("oracle_diagnostics", _bool),
    "out": ("out", str),
}


def parse_config_text(text: str) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def build_config(pairs: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Apply dotted ``pairs`` on top of ``base``.

    Keys of the form ``<testbed>.<field>`` (e.g. ``poly.cubic``) become testbed
    overrides for the named testbed.
    """
    base = base or ExperimentConfig()
    kwargs = base.to_dict()
    overrides = dict(kwargs.pop("testbed_overrides"))
    for key, value in pairs.items():
        if key in KEYS:
            name, parser = KEYS[key]
            try:
                kwargs[name] = parser(value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {value!r}") from exc
        elif key.split(".", 1)[0] in TESTBEDS and "." in key:
            overrides[key] = value
        else:
            raise ConfigError(f"unknown config key {key!r}")
    kwargs["testbed_overrides"] = overrides
    return ExperimentConfig.from_dict(kwargs)


def load_config(path: str | Path, cli_pairs: dict | None = None) -> ExperimentConfig:
    pairs = parse_config_text(Path(path).read_text())
    pairs.update(cli_pairs or {})
    return build_config(pairs)


def testbed_overrides_for(cfg: ExperimentConfig) -> dict:
    prefix = cfg.testbed + "."
    return {k[len(prefix):]: v for k, v in cfg.testbed_overrides.items() if k.startswith(prefix)}
