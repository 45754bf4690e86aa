"""Shared numerical kernels: RBF kernel, squared MMD, sigmoid, SPD solves, seeded streams."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import expit

from . import kernels

DEFAULT_BANDWIDTH = 1.0


class NumericalError(ArithmeticError):
    """A numerical routine met an input it cannot handle (non-SPD matrix, non-finite values)."""


def as_points(points, dim: int | None = None) -> np.ndarray:
    """Coerce scalars, 1-D arrays or lists of vectors to a (n, d) float array."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1) if dim in (None, 1) else arr.reshape(-1, dim)
    if dim is not None and arr.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got {arr.shape[1]}")
    return arr


def rbf_kernel(p, q, bandwidth: float = DEFAULT_BANDWIDTH) -> float:
    """exp(-||p - q||^2 / (2 bandwidth^2))."""
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    p = np.atleast_1d(np.asarray(p, dtype=np.float64))
    q = np.atleast_1d(np.asarray(q, dtype=np.float64))
    if p.shape != q.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {q.shape}")
    return float(np.exp(-np.sum((p - q) ** 2) / (2.0 * bandwidth**2)))


def mmd_squared(P, Q, bandwidth: float = DEFAULT_BANDWIDTH) -> float:
    """Squared MMD between two empirical samples with an RBF kernel.

    All pairs are summed, including the diagonal self-kernel terms, so this is
    the biased V-statistic.  It is exactly symmetric in ``P`` and ``Q`` because
    the cross term is evaluated in a fixed order.

    Raises
    ------
    ValueError
        If either sample is empty, the dimensions differ or ``bandwidth <= 0``.
    """
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    P, Q = as_points(P), as_points(Q)
    if len(P) == 0 or len(Q) == 0:
        raise ValueError("mmd_squared needs two non-empty samples")
    if P.shape[1] != Q.shape[1]:
        raise ValueError(f"dimension mismatch: {P.shape[1]} vs {Q.shape[1]}")
    m, n = len(P), len(Q)
    spp = kernels.gram_sum(P, P, bandwidth)
    sqq = kernels.gram_sum(Q, Q, bandwidth)
    # Order the cross term by a canonical choice so swapping P and Q is bit-identical.
    if _canonical_first(P, Q):
        spq = kernels.gram_sum(P, Q, bandwidth)
    else:
        spq = kernels.gram_sum(Q, P, bandwidth)
    return spp / m**2 + sqq / n**2 - 2.0 * spq / (m * n)


def _canonical_first(P: np.ndarray, Q: np.ndarray) -> bool:
    if P.shape != Q.shape:
        return P.shape < Q.shape
    return P.tobytes() <= Q.tobytes()


def mmd(P, Q, bandwidth: float = DEFAULT_BANDWIDTH) -> float:
    """Square root of :func:`mmd_squared`, with float round-off negatives clipped to 0."""
    return float(np.sqrt(max(mmd_squared(P, Q, bandwidth), 0.0)))


def sigmoid(x):
    return expit(x)


def solve_spd(A, b) -> np.ndarray:
    """Solve ``A x = b`` for symmetric positive definite ``A`` via Cholesky."""
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"A must be square, got shape {A.shape}")
    if not np.allclose(A, A.T, rtol=1e-10, atol=1e-12):
        raise NumericalError("matrix is not symmetric")
    try:
        factor = scipy.linalg.cho_factor(A, lower=True)
    except np.linalg.LinAlgError as exc:
        eig_min = float(np.linalg.eigvalsh(A).min())
        raise NumericalError(
            f"matrix is not positive definite (smallest eigenvalue {eig_min:.3e})"
        ) from exc
    return scipy.linalg.cho_solve(factor, b)


def cholesky(A) -> np.ndarray:
    """Lower Cholesky factor; raises :class:`NumericalError` when ``A`` is not SPD."""
    try:
        return np.linalg.cholesky(np.asarray(A, dtype=np.float64))
    except np.linalg.LinAlgError as exc:
        raise NumericalError("matrix is not positive definite") from exc


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(seed, stream)``.

    Streams are built on a Philox counter-based bit generator keyed through
    ``SeedSequence.spawn_key``, so distinct stream ids never overlap and the
    same pair always replays the same draws.
    """

    seed: int
    stream: tuple[int, ...] | int = ()

    def generator(self) -> np.random.Generator:
        key = self.stream if isinstance(self.stream, tuple) else (self.stream,)
        ss = np.random.SeedSequence(entropy=int(self.seed) & (2**64 - 1), spawn_key=key)
        return np.random.Generator(np.random.Philox(ss))

    def child(self, *key: int) -> "RngStream":
        base = self.stream if isinstance(self.stream, tuple) else (self.stream,)
        return RngStream(self.seed, tuple(base) + tuple(int(k) for k in key))


def rng_for(seed: int, *key: int) -> np.random.Generator:
    """Shorthand for ``RngStream(seed, key).generator()``."""
    return RngStream(seed, tuple(int(k) for k in key)).generator()
