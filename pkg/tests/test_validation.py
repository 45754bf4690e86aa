import numpy as np

from boed_lab.validation import (decomposition_study, linear_class, proxy_subset_study,
                                 shifted_train_designs)


def test_linear_class_shape():
    F = linear_class()
    assert F.shape == (41, 2)
    np.testing.assert_allclose(F[:, 0], 1 - 0.5 * 16 / 3)
    assert F[0, 1] == 0.0 and F[-1, 1] == 4.0


def test_shifted_designs_cover_domain():
    x = shifted_train_designs(5000, np.random.default_rng(0))
    assert x.min() >= -4 and x.max() <= 4
    assert 0.65 < np.mean(x < 0) < 0.75


def test_decomposition_study_passes():
    r = decomposition_study(trials=20)
    assert r.passed and r.details["max_residual"] < 1e-10


def test_proxy_study_is_not_vacuous():
    r = proxy_subset_study(trials=10)
    assert r.passed
    assert r.details["nonempty"] > 0
