import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from xeqkit.construct import (
    KAISER,
    SCREE_ELBOW,
    CfaModel,
    cfa_fit,
    correlation_matrix,
    covariance_matrix,
    discrepancy_and_gradient,
    efa_eigenvalues,
    ml_discrepancy,
    one_factor_loadings,
    suggest_factor_count,
)
from xeqkit.errors import (
    ConstantColumn,
    NonConvergence,
    NonSymmetric,
    UnidentifiedModel,
    ValidationError,
)
from xeqkit.simulation import GeneratorSpec, generate_factor_data


def _pop(lam, phi=None):
    lam = np.atleast_2d(lam)
    phi = np.eye(lam.shape[1]) if phi is None else phi
    c = lam @ phi @ lam.T
    return c + np.diag(1 - np.diag(c))


def test_correlation_matrix_and_constant_column():
    x = np.array([[1, 2, 3], [2, 1, 3], [3, 3, 3], [4, 5, 3]])
    with pytest.raises(ConstantColumn):
        correlation_matrix(x)
    c = correlation_matrix(x[:, :2])
    assert_allclose(c, np.corrcoef(x[:, :2].T.astype(float)))
    assert_allclose(covariance_matrix(x), np.cov(x.T.astype(float)))


def test_efa_sorted_and_sum_to_m(scale):
    m = generate_factor_data(GeneratorSpec.for_scale(scale, 0.7, 0.3, n=400, seed=2), scale)
    efa = efa_eigenvalues(correlation_matrix(m))
    assert np.all(np.diff(efa.eigenvalues) <= 0)
    assert efa.eigenvalues.sum() == pytest.approx(18, abs=1e-10)
    assert_allclose(efa.variance_proportion.sum(), 1.0)
    assert efa.scree_points()[0][0] == 1


def test_efa_rejects_asymmetric():
    with pytest.raises(NonSymmetric):
        efa_eigenvalues(np.array([[1.0, 0.2], [0.3, 1.0]]))


@pytest.mark.parametrize("ev,rule,k", [
    ([3.0, 1.2, 1.0, 0.5], KAISER, 2),          # exactly 1 is not counted
    ([0.9, 0.8], KAISER, 0),
    ([6.0, 1.5, 1.2, 0.8], SCREE_ELBOW, 1),
    ([3.0, 2.8, 0.4, 0.3], SCREE_ELBOW, 2),
])
def test_factor_count_rules(ev, rule, k):
    assert suggest_factor_count(ev, rule) == k


def test_unknown_rule():
    with pytest.raises(ValidationError):
        suggest_factor_count([2.0, 1.0], "Parallel")


def test_one_factor_recovery_and_sign():
    lam = np.array([0.8, 0.7, 0.6, 0.5])
    fit = one_factor_loadings(_pop(lam[:, None]))
    assert fit.converged
    assert_allclose(fit.loading_vector(), lam, atol=1e-6)
    assert fit.discrepancy < 1e-10
    assert fit.weak_items == []


def test_negative_loading_keeps_first_item_positive():
    lam = np.array([0.7, -0.6, 0.8, 0.5])
    fit = one_factor_loadings(_pop(lam[:, None]))
    assert_allclose(fit.loading_vector(), lam, atol=1e-6)
    assert 2 in fit.weak_items


def test_identity_covariance_gives_zero_loadings():
    fit = one_factor_loadings(np.eye(5))
    assert_allclose(fit.loading_vector(), 0.0, atol=1e-3)
    assert fit.discrepancy < 1e-8


def test_covariance_scale_loadings():
    # loadings are on the covariance scale; standardized ones divide by the item sd
    lam = np.array([0.8, 0.7, 0.6, 0.5])
    d = np.diag([2.0, 1.0, 0.5, 3.0])
    fit = one_factor_loadings(d @ _pop(lam[:, None]) @ d)
    assert_allclose(fit.loading_vector(), np.diag(d) * lam, atol=1e-5)
    assert_allclose([fit.standardized_loadings[i] for i in fit.item_ids], lam, atol=1e-6)


def test_identification_rules():
    with pytest.raises(UnidentifiedModel):
        CfaModel({1: "A", 2: "A", 3: "B"}).check_identified()
    with pytest.raises(UnidentifiedModel):
        CfaModel.one_factor([1, 2]).check_identified()     # 3 covariances, 4 parameters
    CfaModel.one_factor([1, 2, 3]).check_identified()


def test_two_indicator_factors_in_correlated_model():
    lam = np.zeros((6, 3))
    lam[[0, 1], 0] = [0.8, 0.7]
    lam[[2, 3], 1] = [0.6, 0.75]
    lam[[4, 5], 2] = [0.7, 0.65]
    phi = np.array([[1, 0.4, 0.3], [0.4, 1, 0.5], [0.3, 0.5, 1]])
    model = CfaModel({1: "A", 2: "A", 3: "B", 4: "B", 5: "C", 6: "C"})
    fit = cfa_fit(_pop(lam, phi), model)
    assert_allclose(fit.loading_vector(), lam.sum(axis=1), atol=1e-5)
    assert_allclose(fit.factor_correlations, phi, atol=1e-5)


def test_near_singular_covariance_is_ridged():
    s = _pop(np.full((4, 1), 0.8))
    s = np.block([[s, s[:, :1]], [s[:1, :], s[:1, :1]]])   # duplicated item
    fit = one_factor_loadings(s)
    assert fit.ridge > 0


def test_nonconvergence_strict_and_lenient():
    s = _pop(np.array([0.8, 0.7, 0.6, 0.5])[:, None])
    lenient = one_factor_loadings(s, max_iter=1)
    assert not lenient.converged
    with pytest.raises(NonConvergence) as info:
        one_factor_loadings(s, max_iter=1, strict=True)
    assert info.value.result is not None


def test_shape_mismatch():
    with pytest.raises(ValidationError):
        cfa_fit(np.eye(3), CfaModel.one_factor([1, 2, 3, 4]))


@given(st.lists(st.floats(0.3, 0.9), min_size=3, max_size=8), st.integers(0, 2**31))
@settings(max_examples=25, deadline=None)
def test_gradient_matches_central_differences(loadings, seed):
    lam = np.array(loadings)
    s = _pop(lam[:, None]) + np.diag(np.random.default_rng(seed).uniform(0, 0.2, lam.size))
    model = CfaModel.one_factor(list(range(1, lam.size + 1)))
    theta = np.concatenate([lam * 0.9, np.log(np.full(lam.size, 0.5))])
    _, g = discrepancy_and_gradient(s, model, theta)
    h = 1e-6
    fd = np.array([
        (discrepancy_and_gradient(s, model, theta + h * e)[0]
         - discrepancy_and_gradient(s, model, theta - h * e)[0]) / (2 * h)
        for e in np.eye(theta.size)
    ])
    assert np.linalg.norm(g - fd) <= 1e-6 * np.linalg.norm(g)


def test_ml_discrepancy_zero_at_truth_and_positive_elsewhere():
    s = _pop(np.array([0.8, 0.7, 0.6])[:, None])
    assert ml_discrepancy(s, s) == pytest.approx(0.0, abs=1e-12)
    assert ml_discrepancy(s, np.eye(3)) > 0
    assert ml_discrepancy(s, -np.eye(3)) == np.inf


def test_fit_is_deterministic(scale):
    m = generate_factor_data(GeneratorSpec.for_scale(scale, 0.7, 0.4, n=300, seed=9), scale)
    s = covariance_matrix(m)
    model = CfaModel.from_scale(scale)
    assert cfa_fit(s, model).to_dict() == cfa_fit(s, model).to_dict()
