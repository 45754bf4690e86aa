import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from boed_lab import kernels
from boed_lab.numerics import (NumericalError, RngStream, as_points, cholesky, mmd,
                               mmd_squared, rbf_kernel, rng_for, sigmoid, solve_spd)

from oracles import MMD2_SINGLETON, RBF_0_1, mmd2_loops

samples = arrays(np.float64, st.tuples(st.integers(1, 8), st.just(2)),
                 elements=st.floats(-5, 5, allow_nan=False))


def test_rbf_values():
    assert rbf_kernel(0.0, 1.0) == pytest.approx(RBF_0_1, abs=1e-15)
    assert rbf_kernel([0, 0], [3, 4]) == pytest.approx(math.exp(-12.5), rel=1e-14)
    assert rbf_kernel([1.5, -2.0], [1.5, -2.0]) == 1.0


def test_rbf_errors():
    with pytest.raises(ValueError):
        rbf_kernel(0.0, 1.0, bandwidth=0.0)
    with pytest.raises(ValueError):
        rbf_kernel([0, 0], [0, 0, 0])


def test_mmd_singleton():
    assert mmd_squared([0.0], [1.0]) == pytest.approx(MMD2_SINGLETON, abs=1e-12)


def test_mmd_matches_loop_oracle(rng):
    P = rng.normal(size=(7, 2))
    Q = rng.normal(loc=0.5, size=(5, 2))
    assert mmd_squared(P, Q, 0.7) == pytest.approx(mmd2_loops(P, Q, 0.7), abs=1e-13)


def test_mmd_errors():
    with pytest.raises(ValueError):
        mmd_squared(np.empty((0, 1)), [1.0])
    with pytest.raises(ValueError):
        mmd_squared([[0.0, 1.0]], [[0.0, 1.0, 2.0]])
    with pytest.raises(ValueError):
        mmd_squared([0.0], [1.0], bandwidth=-1)


def test_mmd_shift_invariance(rng):
    P, Q = rng.normal(size=(6, 2)), rng.normal(size=(4, 2))
    shift = np.array([3.0, -7.0])
    assert mmd_squared(P + shift, Q + shift) == pytest.approx(mmd_squared(P, Q), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(samples, samples)
def test_mmd_properties(P, Q):
    assert abs(mmd_squared(P, P)) <= 1e-12
    assert mmd_squared(P, Q) == mmd_squared(Q, P)
    assert mmd_squared(P, Q) >= -1e-12
    assert mmd(P, Q) >= 0.0


def test_sigmoid():
    assert sigmoid(0.0) == 0.5
    assert sigmoid(math.log(3)) == pytest.approx(0.75, abs=1e-15)
    assert sigmoid(-800.0) == 0.0 and sigmoid(800.0) == 1.0


def test_solve_spd_residual(rng):
    B = rng.normal(size=(3, 3))
    A = B @ B.T + 3 * np.eye(3)
    b = rng.normal(size=3)
    x = solve_spd(A, b)
    assert np.max(np.abs(A @ x - b)) < 1e-12


def test_solve_spd_rejects_indefinite():
    with pytest.raises(NumericalError, match="smallest eigenvalue"):
        solve_spd(np.diag([1.0, -1.0]), np.ones(2))
    with pytest.raises(NumericalError):
        solve_spd(np.array([[1.0, 2.0], [0.0, 1.0]]), np.ones(2))
    with pytest.raises(NumericalError):
        cholesky(np.diag([1.0, 0.0, -2.0]))


def test_as_points():
    assert as_points(3.0).shape == (1, 1)
    assert as_points([1, 2, 3]).shape == (3, 1)
    assert as_points([1, 2, 3, 4], 2).shape == (2, 2)
    with pytest.raises(ValueError):
        as_points(np.zeros((3, 2)), 3)


def test_rng_streams():
    a = RngStream(7, (1, 2)).generator().standard_normal(5)
    b = rng_for(7, 1, 2).standard_normal(5)
    c = rng_for(7, 1, 3).standard_normal(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert RngStream(7, (1,)).child(2) == RngStream(7, (1, 2))


# ---- both kernel backends agree with the loop oracle and with each other


def test_backend_gram_and_mmd(backend, rng):
    P, Q = rng.normal(size=(6, 2)), rng.normal(size=(9, 2))
    assert backend.mmd2(P, Q, 1.3) == pytest.approx(mmd2_loops(P, Q, 1.3), abs=1e-13)
    assert backend.gram_sum(P, P, 1.0) == pytest.approx(
        sum(math.exp(-np.sum((a - b) ** 2) / 2) for a in P for b in P), abs=1e-12)


@pytest.mark.parametrize("n_hist", [0, 1, 5])
def test_backend_mmd_augmented(backend, rng, n_hist):
    hist = rng.uniform(-4, 4, (n_hist, 1))
    cand = np.linspace(-4, 4, 11)[:, None]
    test = rng.uniform(-4, 4, (30, 1))
    got = backend.mmd2_augmented(hist, cand, test, 1.0)
    want = [mmd2_loops(np.vstack([hist, c[None]]), test) for c in cand]
    np.testing.assert_allclose(got, want, atol=1e-13)


def test_backend_nmc_terms(backend, rng):
    C, N, M = 3, 4, 6
    mu_out, mu_in = rng.normal(size=(C, N)), rng.normal(size=(C, M))
    var_out, var_in = rng.uniform(0.1, 1, (C, N)), rng.uniform(0.1, 1, (C, M))
    y = mu_out + rng.normal(size=(C, N))
    got = backend.nmc_terms(y, mu_out, var_out, mu_in, var_in)
    for c in range(C):
        for n in range(N):
            def lp(mu, var):
                return -0.5 * (math.log(var) + (y[c, n] - mu) ** 2 / var)
            own = lp(mu_out[c, n], var_out[c, n])
            terms = [own] + [lp(mu_in[c, m], var_in[c, m]) for m in range(M)]
            mx = max(terms)
            marg = mx + math.log(sum(math.exp(t - mx) for t in terms) / (M + 1))
            assert got[c, n] == pytest.approx(own - marg, abs=1e-12)


def test_selected_backend_is_reported():
    assert kernels.BACKEND in ("cython", "python")
