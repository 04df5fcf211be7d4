import numpy as np
import pandas as pd
import pytest

from av_cokriging.doe import (
    CandidateSet,
    CostModel,
    DesignChoice,
    augment_dataset,
    best_row,
    information_gain,
    score_candidates,
    select_next,
    y_quantiles,
)
from av_cokriging.errors import DuplicatePointError, InvalidArgumentError, NestingViolationError
from av_cokriging.rare_event import EventSpec, event_terms
from av_cokriging.scenarios import environment_1d, g, h1, h2

N_MC = 2_000
N_Y = 16
SPEC = EventSpec(0.8)


def _candidates(levels=(1, 2, 3)):
    return CandidateSet(np.array([-4.25, -1.25, -0.75, 0.3, 0.9, 2.75]).reshape(-1, 1), levels)


def test_y_quantiles_symmetric():
    z = y_quantiles(8)
    assert len(z) == 8
    assert np.allclose(z, -z[::-1])
    assert z[0] == pytest.approx(-1.5341205443525463)
    with pytest.raises(InvalidArgumentError):
        y_quantiles(0)


def test_gain_zero_at_observed_points(model_1d):
    env = environment_1d()
    # -2 is observed at every level; 0.5 only at level 1
    for t in (1, 2, 3):
        assert information_gain(model_1d, env, SPEC, [-2.0], t, N_Y, N_MC, seed=0) <= 1e-10
    assert information_gain(model_1d, env, SPEC, [0.5], 1, N_Y, N_MC, seed=0) <= 1e-10


def test_gain_positive_near_event_boundary(model_1d):
    env = environment_1d()
    assert information_gain(model_1d, env, SPEC, [0.9], 3, N_Y, N_MC, seed=0) > 0.0


def test_gain_matches_full_conditioning(model_1d):
    """Rank-one IG equals re-estimating p after conditioning layer t on each hypothetical y."""
    env = environment_1d()
    x = np.array([0.9])
    t = 3
    samples = env.sample(N_MC, 0, label="ig")
    mean, var = model_1d.predict(samples)
    p_n = np.mean(event_terms(mean, var, SPEC))

    _, v_t = model_1d.predict(x.reshape(1, 1), t)
    layer = model_1d.layers[t - 1]
    mu_layer, _ = layer.predict(x.reshape(1, 1))
    sq = []
    for z in y_quantiles(N_Y):
        # y_t(x) and the layer-t observation share the same innovation
        d_obs = mu_layer[0] + np.sqrt(v_t[0]) * z
        updated = model_1d.replace_layer(t, layer.condition_on(x, d_obs))
        m2, v2 = updated.predict(samples)
        sq.append((p_n - np.mean(event_terms(m2, v2, SPEC))) ** 2)
    brute = float(np.mean(sq))
    ig = information_gain(model_1d, env, SPEC, x, t, N_Y, N_MC, seed=0)
    assert ig == pytest.approx(brute, rel=1e-6, abs=1e-14)


def test_select_next_agrees_with_brute_force(model_1d):
    env = environment_1d()
    cands = _candidates()
    cost = CostModel.default(3)
    choice, table = select_next(model_1d, env, SPEC, cands, cost, N_Y, N_MC, seed=0)
    assert len(table) == 6 * 3
    assert list(table.columns) == ["x1", "t", "ig", "cost", "score"]

    best = None
    for t in cands.levels:
        for x in cands.points:
            ig = information_gain(model_1d, env, SPEC, x, t, N_Y, N_MC, seed=0)
            score = ig / cost.cost(x, t)
            key = (-score, t, float(x[0]))
            if best is None or key < best[0]:
                best = (key, float(x[0]), t, ig)
    _, bx, bt, big = best
    assert choice.x == (bx,)
    assert choice.t == bt
    assert choice.ig == pytest.approx(big, rel=1e-12, abs=1e-18)
    assert choice.score == pytest.approx(big / cost.cost(np.array([bx]), bt), rel=1e-12, abs=1e-18)


def test_argmax_invariant_to_cost_scaling(model_1d):
    env = environment_1d()
    cost = CostModel([1.0, 4.0, 20.0])
    a, _ = select_next(model_1d, env, SPEC, _candidates(), cost, N_Y, N_MC, seed=0)
    b, _ = select_next(model_1d, env, SPEC, _candidates(), cost.scaled(2.0), N_Y, N_MC, seed=0)
    assert (a.x, a.t) == (b.x, b.t)
    assert b.score == pytest.approx(a.score / 2.0)


def test_single_candidate_is_chosen(model_1d):
    env = environment_1d()
    cands = CandidateSet(np.array([[1.7]]), (2,))
    choice, table = select_next(model_1d, env, SPEC, cands, CostModel.default(3), N_Y, N_MC, seed=0)
    assert choice.x == (1.7,) and choice.t == 2
    assert len(table) == 1


def test_ties_prefer_lowest_level_then_first_point():
    table = pd.DataFrame(
        [
            {"x1": 0.5, "t": 2, "ig": 1.0, "cost": 1.0, "score": 1.0},
            {"x1": 0.2, "t": 2, "ig": 1.0, "cost": 1.0, "score": 1.0},
            {"x1": 0.9, "t": 1, "ig": 1.0, "cost": 1.0, "score": 1.0},
            {"x1": 0.1, "t": 1, "ig": 0.5, "cost": 1.0, "score": 0.5},
        ]
    )
    choice = best_row(table, 1)
    assert (choice.x, choice.t) == ((0.9,), 1)


def test_candidate_validation(model_1d):
    env = environment_1d()
    with pytest.raises(InvalidArgumentError):
        information_gain(model_1d, env, SPEC, [6.0], 1, N_Y, N_MC, seed=0)
    with pytest.raises(InvalidArgumentError):
        information_gain(model_1d, env, SPEC, [0.0], 4, N_Y, N_MC, seed=0)
    with pytest.raises(InvalidArgumentError):
        CandidateSet(np.empty((0, 1)), (1,))
    with pytest.raises(InvalidArgumentError):
        score_candidates(model_1d, env, SPEC, _candidates((1, 5)), CostModel.default(3), N_Y, N_MC, seed=0)


def test_cost_model():
    cost = CostModel.default(3)
    assert cost.table == (1.0, 10.0, 100.0)
    assert cost.cost(np.array([0.0]), 3) == 100.0
    with pytest.raises(InvalidArgumentError):
        cost.cost(np.array([0.0]), 4)
    with pytest.raises(InvalidArgumentError):
        CostModel([1.0, 0.0])
    with pytest.raises(InvalidArgumentError):
        CostModel([])
    fn = CostModel([1.0], fn=lambda x, t: 1.0 + abs(float(x[0])))
    assert fn.cost(np.array([-2.0]), 1) == 3.0
    assert fn.scaled(3.0).cost(np.array([-2.0]), 1) == 9.0


def test_augment_dataset(data_1d):
    choice = DesignChoice((0.25,), 2, 0.1, 10.0, 0.01)
    out = augment_dataset(data_1d, choice, {1: float(h1(0.25)), 2: float(h2(0.25))})
    assert out.dataset(1).n == 22
    assert out.dataset(2).n == 8
    assert out.dataset(3).n == 4
    assert data_1d.dataset(1).n == 21

    same = augment_dataset(data_1d, choice, [float(h1(0.25)), float(h2(0.25))])
    assert np.array_equal(same.dataset(2).y, out.dataset(2).y)


def test_augment_dataset_errors(data_1d):
    choice = DesignChoice((0.25,), 3, 0.1, 100.0, 0.001)
    with pytest.raises(NestingViolationError):
        augment_dataset(data_1d, choice, {3: float(g(0.25))})
    with pytest.raises(InvalidArgumentError):
        augment_dataset(data_1d, DesignChoice((0.25,), 1, 0.1, 1.0, 0.1), {1: 0.0, 2: 0.0})
    with pytest.raises(DuplicatePointError):
        augment_dataset(data_1d, DesignChoice((-2.0,), 1, 0.0, 1.0, 0.0), {1: 0.0})
    with pytest.raises(InvalidArgumentError):
        augment_dataset(data_1d, DesignChoice((0.25,), 4, 0.0, 1.0, 0.0), {})


def test_gain_converges_in_quadrature_size(model_1d):
    env = environment_1d()
    grid = CandidateSet(np.linspace(-5.0, 5.0, 21).reshape(-1, 1), (3,))
    table = score_candidates(model_1d, env, SPEC, grid, CostModel.default(3), 64, N_MC, seed=0)
    best = table.loc[table["ig"].idxmax()]
    assert best["ig"] > 0.0
    ref = information_gain(model_1d, env, SPEC, [best["x1"]], 3, 4096, N_MC, seed=0)
    assert abs(best["ig"] - ref) <= 0.2 * ref
