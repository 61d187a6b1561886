import numpy as np
import pytest

from groupshap import rng as rngmod
from groupshap.errors import DegenerateModelError, ValidationError
from groupshap.experiments import simulation_partition
from groupshap.gaussian import GaussianModel
from groupshap.models import (
    BETA,
    ModelSpec,
    NotSeparable,
    SimulationModelId,
    decompose_by_groups,
    evaluate,
    model_from_json,
    simulation_model,
    predict_one,
    restrict,
    scaled,
    standardize,
)


def by_hand(x):
    # same terms as the small_model fixture
    a, b = x[1], x[2]
    return (
        0.7 + 1.2 * x[0] - 0.5 * x[2] + 0.8 * np.cos(x[1]) - 1.1 * np.cos(x[3])
        + 0.6 * x[0] * x[3] + a * b + a * b ** 2 + b * a ** 2
    )


def test_evaluate_matches_hand_formula(small_model):
    X = np.random.default_rng(0).normal(size=(7, 4))
    np.testing.assert_allclose(evaluate(small_model, X), [by_hand(x) for x in X], rtol=1e-13)
    assert predict_one(small_model, X[0]) == pytest.approx(by_hand(X[0]))


def test_evaluate_fortran_and_c_order_agree(small_model):
    X = np.random.default_rng(1).normal(size=(50, 4))
    np.testing.assert_array_equal(evaluate(small_model, X), evaluate(small_model, np.asfortranarray(X)))


def test_scale_and_shift(small_model):
    m = ModelSpec(2, 1.0, linear_terms=((0, 2.0),), scale=4.0, shift=1.0)
    assert predict_one(m, [3.0, 0.0]) == pytest.approx((1 + 6 - 1) / 4)
    s = scaled(m, 2.0)
    assert predict_one(s, [3.0, 0.0]) == pytest.approx(2 * predict_one(m, [3.0, 0.0]))
    with pytest.raises(ValueError):
        scaled(small_model, 2.0)


@pytest.mark.parametrize(
    "kwargs,match",
    [
        (dict(linear_terms=((4, 1.0),)), "outside"),
        (dict(product_terms=((1, 1, 1.0),)), "twice"),
        (dict(scale=0.0), "scale"),
    ],
)
def test_spec_validation(kwargs, match):
    with pytest.raises(ValidationError, match=match):
        ModelSpec(4, **kwargs)


def test_wrong_width_rejected(small_model):
    with pytest.raises(ValidationError):
        evaluate(small_model, np.zeros((2, 3)))


def test_simulation_model_structure():
    lm1 = simulation_model("lm1")
    assert lm1.intercept == BETA[0]
    assert [c for _, c in lm1.linear_terms] == list(BETA[1:])
    lm2 = simulation_model(SimulationModelId.LM2)
    assert [(i, j) for i, j, _ in lm2.product_terms] == [(0, 1), (2, 3), (4, 5), (6, 7), (8, 9)]
    lm3 = simulation_model("LM3")
    assert len(lm3.product_terms) == 7
    assert (8, 4) not in [(i, j) for i, j, _ in lm3.product_terms]
    assert (4, 8) in [(i, j) for i, j, _ in lm3.product_terms]
    gam1 = simulation_model("gam1")
    assert len(gam1.cosine_terms) == 10 and not gam1.linear_terms
    assert len(simulation_model("gam2").hfun_terms) == 5
    assert len(simulation_model("gam3").hfun_terms) == 7


@pytest.mark.parametrize(
    "name,grouping,separable",
    [
        ("lm1", "A", True), ("lm1", "B", True),
        ("lm2", "A", True), ("lm2", "B", True),
        ("lm3", "A", False), ("lm3", "B", False),
        ("gam1", "A", True), ("gam2", "B", True), ("gam3", "B", False),
    ],
)
def test_separability_of_simulation_models(name, grouping, separable):
    parts = decompose_by_groups(simulation_model(name), simulation_partition(grouping))
    assert bool(parts) is separable
    if not separable:
        assert isinstance(parts, NotSeparable) and parts.offending


def test_decomposition_sums_to_model():
    model = simulation_model("gam2")
    parts = decompose_by_groups(model, simulation_partition("A"))
    X = np.random.default_rng(3).normal(size=(20, 10))
    total = sum(evaluate(p, X) for p in parts)
    np.testing.assert_allclose(total, evaluate(model, X), atol=1e-12)


def test_restrict():
    m = ModelSpec(5, 0.5, linear_terms=((2, 1.0),), product_terms=((2, 4, 3.0),))
    r = restrict(m, [2, 4])
    assert r.n_features == 2
    assert predict_one(r, [1.0, 2.0]) == pytest.approx(predict_one(m, [0, 0, 1.0, 0, 2.0]))
    with pytest.raises(ValueError):
        restrict(m, [2])


def test_standardize_gives_unit_sd():
    dist = GaussianModel(np.zeros(10), np.eye(10))
    m = standardize(simulation_model("lm2"), dist, rngmod.stream(1, 2), 100_000)
    X = GaussianModel(np.zeros(10), np.eye(10))
    from groupshap.gaussian import sample

    y = evaluate(m, sample(X, 100_000, np.random.default_rng(9)))
    assert np.std(y) == pytest.approx(1.0, rel=0.03)
    # idempotent up to Monte Carlo error: re-standardizing barely moves the scale
    again = standardize(m, dist, rngmod.stream(2, 2), 100_000)
    assert again.scale / m.scale == pytest.approx(1.0, rel=0.03)


def test_standardize_guards():
    dist = GaussianModel(np.zeros(2), np.eye(2))
    with pytest.raises(DegenerateModelError):
        standardize(ModelSpec(2, 1.0), dist, np.random.default_rng(0), 10_000)
    with pytest.raises(ValueError):
        standardize(ModelSpec(2, 1.0, linear_terms=((0, 1.0),)), dist, np.random.default_rng(0), 100)


def test_model_json_round_trip(small_model):
    assert model_from_json(small_model.to_json()) == small_model
    assert model_from_json({"simulation_model": "gam3"}) == simulation_model("gam3")
    with pytest.raises(ValidationError, match="unknown simulation_model"):
        model_from_json({"simulation_model": "lm9"})
    assert model_from_json({"linear": [[3, 1.0]]}).n_features == 4
