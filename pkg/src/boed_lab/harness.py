"""Sequential design loop, metrics, sweeps and result files."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import time
from dataclasses import dataclass
from enum import IntEnum
from functools import partial
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from . import __version__, kernels
from .acquisition import (AcquisitionSpec, select_bad, select_random, select_ri,
                          select_ridea, train_proxy)
from .config import ExperimentConfig, testbed_overrides_for
from .diagnostics import amplification_term, best_in_class_testbed, decompose
from .inference import initial_state, predictive_mean, update
from .numerics import RngStream, mmd_squared
from .testbeds import build_testbed

log = logging.getLogger(__name__)

CSV_FIELDS = ("seed", "step", "method", "mse", "mmd2", "design", "score", "B", "C", "A", "Ahat")
PLOT_METRICS = ("mse", "mmd2")


class Purpose(IntEnum):
    """Stream ids.  Everything except EIG noise and resampling is independent of the method."""

    TRUTH = 1
    TEST = 2
    PRIOR = 3
    DGP = 4
    MSE = 5
    RANDOM = 6
    EIG = 7
    RESAMPLE = 8
    ORACLE = 9


def stream(cfg: ExperimentConfig, seed: int, purpose: Purpose, step: int = 0) -> np.random.Generator:
    return RngStream(cfg.root_seed, (int(seed), int(purpose), int(step))).generator()


@dataclass
class MetricsRow:
    seed: int
    step: int
    method: str
    mse: float
    mmd2: float
    design: np.ndarray
    score: float | None
    B: float | None = None
    C: float | None = None
    A: float | None = None
    Ahat: float | None = None

    def as_csv(self) -> list[str]:
        def num(v):
            return "" if v is None else repr(float(v))

        design = ";".join(repr(float(v)) for v in np.ravel(self.design))
        return [str(self.seed), str(self.step), self.method, num(self.mse), num(self.mmd2),
                design, num(self.score), num(self.B), num(self.C), num(self.A), num(self.Ahat)]


def compute_mse(fhat, test_sample, testbed, reps: int, rng: np.random.Generator) -> float:
    """Average squared error of ``fhat`` against ``reps`` fresh DGP draws per test design."""
    if reps < 1 or len(test_sample) < 1:
        raise ValueError("need at least one test design and one repetition")
    pred = np.asarray(fhat(test_sample), dtype=np.float64)
    mean = testbed.dgp_mean(test_sample)
    sd = np.sqrt(testbed.dgp_noise_var(test_sample))
    y = mean[:, None] + sd[:, None] * rng.standard_normal((len(mean), reps))
    return float(np.mean((pred[:, None] - y) ** 2))


def dense_grid(testbed, per_dim: int | None = None) -> np.ndarray:
    per_dim = per_dim or (2001 if testbed.dim == 1 else 101)
    return testbed.grid(per_dim)


def acquisition_spec(cfg: ExperimentConfig, method: str) -> AcquisitionSpec:
    return AcquisitionSpec(method=method, lam=cfg.lam, tau=cfg.tau, kappa=cfg.kappa,
                           n_outer=cfg.eig_outer, n_inner=cfg.eig_inner, bandwidth=cfg.bandwidth,
                           proxy_steps=cfg.proxy_steps, proxy_lr=cfg.proxy_lr,
                           proxy_enriched=cfg.proxy_enriched)


def run_cell(cfg: ExperimentConfig, seed: int, method: str, info: dict | None = None
             ) -> Iterator[MetricsRow]:
    """Run one (seed, method) design loop, yielding a row after every step."""
    testbed = build_testbed(cfg.testbed, cfg.spec, testbed_overrides_for(cfg),
                            rng=stream(cfg, seed, Purpose.TRUTH))
    spec = acquisition_spec(cfg, method)
    test = testbed.sample_test(cfg.test_size, stream(cfg, seed, Purpose.TEST))
    candidates = testbed.grid(cfg.grid_size)
    state = initial_state(testbed, stream(cfg, seed, Purpose.PRIOR), cfg.particles)

    fbar = None
    if method == "ridea-oracle" or cfg.oracle_diagnostics:
        fbar = best_in_class_testbed(testbed, dense_grid(testbed),
                                     rng=stream(cfg, seed, Purpose.ORACLE))
    degree = testbed.default_proxy_degree() + (1 if cfg.proxy_enriched else 0)
    basis = partial(testbed.proxy_features, degree=degree)

    history = np.empty((0, testbed.dim))
    ys: list[float] = []
    proxy = None
    for t in range(1, cfg.steps + 1):
        eig_rng = stream(cfg, seed, Purpose.EIG, t)
        fhat = partial(predictive_mean, state)
        if method == "random":
            sel = select_random(candidates, stream(cfg, seed, Purpose.RANDOM, t))
        elif method == "bad":
            sel = select_bad(state, candidates, spec, eig_rng)
        elif method == "ri":
            sel = select_ri(state, history, candidates, test, spec, eig_rng)
        elif method == "ridea":
            sel = select_ridea(state, history, candidates, test, spec, eig_rng,
                               fhat=fhat, reference=proxy)
        else:
            sel = select_ridea(state, history, candidates, test, spec, eig_rng,
                               fhat=fhat, reference=fbar)

        xi = sel.design[None, :]
        y = float(testbed.dgp_sample(xi, stream(cfg, seed, Purpose.DGP, t))[0])
        state = update(state, xi, y, rng=stream(cfg, seed, Purpose.RESAMPLE, t))
        history = np.vstack([history, xi])
        ys.append(y)
        fhat = partial(predictive_mean, state)
        if method == "ridea":
            proxy = train_proxy(history, ys, fhat(history), cfg.tau, basis,
                                steps=cfg.proxy_steps, lr=cfg.proxy_lr)

        mse = compute_mse(fhat, test, testbed, cfg.mse_reps, stream(cfg, seed, Purpose.MSE, t))
        # random selection has no acquisition score; leave the cell empty
        score = None if method == "random" else sel.score
        row = MetricsRow(seed, t, method, mse, mmd_squared(history, test, cfg.bandwidth),
                         sel.design, score)
        if cfg.oracle_diagnostics:
            rep = decompose(fhat, fbar, testbed.dgp_mean, test)
            row.B, row.C, row.A = rep.misspecification, rep.estimation, rep.amplification
            row.Ahat = amplification_term(fhat, fbar, testbed.dgp_mean, history)
        if info is not None:
            info["posterior"] = state.summary()
        yield row


def _cells(cfg: ExperimentConfig):
    for seed in cfg.seeds:
        for method in cfg.methods:
            yield seed, method


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None
                   ) -> tuple[list[MetricsRow], dict]:
    """Run every (seed, method) cell.

    When ``out_dir`` is given, ``metrics.csv`` is written row by row and
    ``manifest.json`` plus the ``plot_*.csv`` summaries at the end.  A cell
    that raises is recorded as failed; the remaining cells still run.
    """
    out_dir = Path(out_dir) if out_dir is not None else (Path(cfg.out) if cfg.out else None)
    rows: list[MetricsRow] = []
    cells = []
    started = time.time()
    fh = writer = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        fh = open(out_dir / "metrics.csv", "w", newline="")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        fh.flush()
    try:
        for seed, method in _cells(cfg):
            info: dict = {}
            cell = {"seed": seed, "method": method, "status": "ok", "steps": 0}
            t0 = time.time()
            try:
                for row in run_cell(cfg, seed, method, info):
                    rows.append(row)
                    cell["steps"] = row.step
                    if writer is not None:
                        writer.writerow(row.as_csv())
                        fh.flush()
            except Exception as exc:  # recorded per cell, never aborts the run
                log.warning("cell seed=%s method=%s failed: %s", seed, method, exc)
                cell["status"] = "failed"
                cell["error"] = f"{type(exc).__name__}: {exc}"
            cell["seconds"] = round(time.time() - t0, 3)
            cell["posterior"] = info.get("posterior")
            cells.append(cell)
            log.info("seed=%s method=%s status=%s (%.1fs)", seed, method, cell["status"],
                     cell["seconds"])
    finally:
        if fh is not None:
            fh.close()

    manifest = {
        "tool": "boed-lab",
        "version": __version__,
        "kernel_backend": kernels.BACKEND,
        "config": cfg.to_dict(),
        "rng": {
            "generator": "Philox",
            "root_seed": cfg.root_seed,
            "stream_key": "(seed, purpose, step)",
            "purposes": {p.name.lower(): int(p) for p in Purpose},
            "seeds": list(cfg.seeds),
        },
        "wall_clock_seconds": round(time.time() - started, 3),
        "cells": cells,
        "status": "complete" if all(c["status"] == "ok" for c in cells) else "partial",
    }
    if out_dir is not None:
        (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
        if rows:
            emit_plotdata(rows, out_dir, methods=cfg.methods)
    return rows, manifest


def config_from_manifest(path: str | Path) -> ExperimentConfig:
    data = json.loads(Path(path).read_text())
    return ExperimentConfig.from_dict(data["config"])


def sweep(cfg: ExperimentConfig, parameter: str, values: Iterable[float],
          out_dir: str | Path | None = None) -> dict[float, tuple[list[MetricsRow], dict]]:
    """Re-run the experiment for each value of ``lambda`` or ``tau``; seeds are shared."""
    field = {"lambda": "lam", "lam": "lam", "tau": "tau"}.get(parameter)
    if field is None:
        raise ValueError(f"can only sweep lambda or tau, not {parameter!r}")
    results = {}
    for v in values:
        sub = dataclasses.replace(cfg, **{field: float(v)})
        sub_dir = None if out_dir is None else Path(out_dir) / f"{parameter}={float(v)!r}"
        results[float(v)] = run_experiment(sub, sub_dir)
    return results


def summarize(rows: list[MetricsRow], metric: str, methods: Iterable[str] | None = None
              ) -> list[dict]:
    """Per (method, step) mean and standard error across seeds."""
    methods = list(methods) if methods is not None else list(dict.fromkeys(r.method for r in rows))
    out = []
    for method in methods:
        steps = sorted({r.step for r in rows if r.method == method})
        for t in steps:
            vals = np.array([getattr(r, metric) for r in rows if r.method == method and r.step == t],
                            dtype=np.float64)
            n = len(vals)
            se = float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
            out.append({"method": method, "step": t, "mean": float(np.mean(vals)), "se": se, "n": n})
    return out


def emit_plotdata(rows: list[MetricsRow], out_dir: str | Path,
                  methods: Iterable[str] | None = None,
                  metrics: Iterable[str] = PLOT_METRICS) -> list[Path]:
    if not rows:
        raise ValueError("no rows to summarize")
    out_dir = Path(out_dir)
    paths = []
    for metric in metrics:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "step", "mean", "se", "n"])
        for rec in summarize(rows, metric, methods):
            w.writerow([rec["method"], rec["step"], repr(rec["mean"]), repr(rec["se"]), rec["n"]])
        path = out_dir / f"plot_{metric}.csv"
        path.write_text(buf.getvalue())
        paths.append(path)
    return paths


def read_metrics(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def final_values(rows: list[MetricsRow], metric: str) -> dict[str, np.ndarray]:
    """Per-method arrays of ``metric`` at the last step, ordered by seed."""
    last = max(r.step for r in rows)
    out: dict[str, list] = {}
    for r in sorted(rows, key=lambda r: (r.method, r.seed)):
        if r.step == last:
            out.setdefault(r.method, []).append(getattr(r, metric))
    return {k: np.asarray(v) for k, v in out.items()}


__all__ = [
    "CSV_FIELDS", "MetricsRow", "Purpose", "compute_mse", "config_from_manifest", "emit_plotdata",
    "final_values", "read_metrics", "run_cell", "run_experiment", "summarize", "sweep",
]
