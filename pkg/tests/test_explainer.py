import numpy as np
import pytest

from groupshap.coalitions import validate_partition
from groupshap.contributions import ContributionCache, MonteCarloEstimator
from groupshap.errors import EnumerationRefused
from groupshap.experiments import simulation_partition
from groupshap.explainer import feature_shapley, group_shapley, post_grouped_shapley
from groupshap.gaussian import GaussianModel
from groupshap.models import ModelSpec, simulation_model, predict_one

from conftest import brute_force_shapley


def test_feature_values_match_permutation_oracle(small_model, small_gaussian):
    x = np.array([0.4, -0.9, 1.1, 0.2])
    cache = ContributionCache(small_model, small_gaussian, x)
    e = feature_shapley(small_model, small_gaussian, x, cache=cache)
    oracle = brute_force_shapley(cache.value, [1, 2, 4, 8])
    np.testing.assert_allclose(e.phi, oracle, atol=1e-12)
    assert e.metadata["coalitions_evaluated"] == 16


def test_group_values_match_hand_enumeration(small_model, small_gaussian):
    # three groups: the 8 group coalitions written out by hand
    part = validate_partition([[0, 3], [1], [2]], 4, labels=["a", "b", "c"])
    x = np.array([0.4, -0.9, 1.1, 0.2])
    cache = ContributionCache(small_model, small_gaussian, x)
    v = cache.value
    A, B, C = 0b1001, 0b0010, 0b0100
    phi_a = (
        (v(A) - v(0)) / 3
        + (v(A | B) - v(B)) / 6
        + (v(A | C) - v(C)) / 6
        + (v(A | B | C) - v(B | C)) / 3
    )
    e = group_shapley(small_model, small_gaussian, x, part, cache=cache)
    assert e["a"] == pytest.approx(phi_a, abs=1e-12)
    assert e.efficiency_residual == pytest.approx(0.0, abs=1e-12)
    assert e.as_dict().keys() == {"a", "b", "c"}


def test_single_group_gets_everything(small_model, small_gaussian):
    part = validate_partition([[0, 1, 2, 3]], 4)
    x = np.array([1.0, 2.0, -1.0, 0.0])
    e = group_shapley(small_model, small_gaussian, x, part)
    assert e.phi[0] == pytest.approx(e.predicted - e.base_value, abs=1e-12)


def test_singleton_groups_equal_feature_values(small_model, small_gaussian):
    part = validate_partition([[j] for j in range(4)], 4)
    x = np.array([0.2, 0.3, 0.4, 0.5])
    g = group_shapley(small_model, small_gaussian, x, part)
    f = feature_shapley(small_model, small_gaussian, x)
    np.testing.assert_allclose(g.phi, f.phi, atol=1e-12)


def test_null_player_and_symmetry():
    # x2 never enters the model and is independent; x0 and x1 are exchangeable
    dist = GaussianModel(np.zeros(3), np.array([[1, 0.3, 0.0], [0.3, 1, 0.0], [0.0, 0.0, 1.0]]))
    m = ModelSpec(3, 0.1, linear_terms=((0, 1.0), (1, 1.0)), product_terms=((0, 1, 0.5),))
    e = feature_shapley(m, dist, np.array([0.7, 0.7, -2.0]))
    assert abs(e.phi[2]) < 1e-9
    assert e.phi[0] == pytest.approx(e.phi[1], abs=1e-9)


def test_post_grouped_sums_features(small_model, small_gaussian):
    part = validate_partition([[0, 3], [1, 2]], 4)
    x = np.array([0.4, -0.9, 1.1, 0.2])
    f = feature_shapley(small_model, small_gaussian, x)
    p = post_grouped_shapley(small_model, small_gaussian, x, part, features=f)
    np.testing.assert_allclose(p.phi, [f.phi[0] + f.phi[3], f.phi[1] + f.phi[2]])
    assert p.metadata["method"] == "post"
    assert p.efficiency_residual == pytest.approx(0.0, abs=1e-12)


def test_group_equals_post_for_separable_independent_case():
    dist = GaussianModel(np.zeros(10), np.eye(10))
    model = simulation_model("lm1")
    part = simulation_partition("A")
    x = np.linspace(-1, 1, 10)
    g = group_shapley(model, dist, x, part)
    p = post_grouped_shapley(model, dist, x, part)
    np.testing.assert_allclose(g.phi, p.phi, atol=1e-12)


def test_group_differs_from_post_under_correlation():
    cov = np.full((10, 10), 0.7) + 0.3 * np.eye(10)
    dist = GaussianModel(np.zeros(10), cov)
    model = simulation_model("lm1")
    part = simulation_partition("A")
    x = np.linspace(-1, 1, 10)
    g = group_shapley(model, dist, x, part)
    p = post_grouped_shapley(model, dist, x, part)
    assert np.max(np.abs(g.phi - p.phi)) > 1e-3


def test_mc_efficiency_and_error_bounds(small_model, small_gaussian):
    part = validate_partition([[0, 3], [1], [2]], 4)
    x = np.array([0.4, -0.9, 1.1, 0.2])
    est = MonteCarloEstimator(1000, seed=5)
    mc = group_shapley(small_model, small_gaussian, x, part, est)
    exact = group_shapley(small_model, small_gaussian, x, part)
    assert np.all(np.abs(mc.phi - exact.phi) <= 4 * mc.phi_se)
    # efficiency holds exactly against the estimated base value
    assert abs(mc.efficiency_residual) < 1e-9
    assert mc.predicted == exact.predicted
    cache = ContributionCache(small_model, small_gaussian, x, est)
    group_shapley(small_model, small_gaussian, x, part, cache=cache)
    assert cache.model_evaluations == (2 ** 3 - 1) * 1000 + 1


def test_group_and_post_share_one_table(small_model, small_gaussian):
    part = validate_partition([[0, 1], [2, 3]], 4)
    x = np.zeros(4)
    cache = ContributionCache(small_model, small_gaussian, x, MonteCarloEstimator(30))
    group_shapley(small_model, small_gaussian, x, part, cache=cache)
    n = len(cache)
    post_grouped_shapley(small_model, small_gaussian, x, part, cache=cache)
    assert len(cache) == 16 and n == 4


def test_enumeration_cap():
    dist = GaussianModel(np.zeros(30), np.eye(30))
    with pytest.raises(EnumerationRefused):
        feature_shapley(ModelSpec(30), dist, np.zeros(30))


def test_predicted_is_model_output(small_model, small_gaussian):
    x = np.array([0.5, 0.5, 0.5, 0.5])
    e = feature_shapley(small_model, small_gaussian, x)
    assert e.predicted == predict_one(small_model, x)
