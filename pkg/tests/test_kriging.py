import math

import numpy as np
import pytest

from av_cokriging.config import FitConfig
from av_cokriging.dataset import Bounds, Dataset
from av_cokriging.errors import FittingFailureError, InvalidArgumentError, NumericalSingularityError
from av_cokriging.kriging import (
    KernelParams,
    KrigingModel,
    correlation_matrix,
    fit_mle,
    kernel_eval,
    log_likelihood,
    log_theta_upper,
    posterior_mean,
    posterior_var,
    profile_log_likelihood,
    stable_cholesky,
)


def _random_instance(rng, n, d):
    X = rng.uniform(0.0, 1.0, size=(n, d))
    y = rng.normal(size=n)
    params = KernelParams(rng.uniform(2.0, 10.0, size=d), float(rng.uniform(0.5, 2.0)), 1e-3)
    return Dataset(X, y), params


def _dense_oracle(data, params, beta, S):
    """Posterior mean, variance and log likelihood from explicit inverse and determinant."""
    n = data.n
    R = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            R[i, j] = math.exp(-np.sum(params.theta * (data.X[i] - data.X[j]) ** 2))
    R += params.nugget * np.eye(n)
    Ri = np.linalg.inv(R)
    r = np.exp(-(((S[:, None, :] - data.X[None, :, :]) ** 2) * params.theta).sum(axis=2))
    resid = data.y - beta
    mean = beta + r @ Ri @ resid
    var = params.tau2 * (1.0 - np.einsum("ij,jk,ik->i", r, Ri, r))
    Sigma = params.tau2 * R
    ll = -0.5 * (n * math.log(2 * math.pi) + math.log(np.linalg.det(Sigma)) + resid @ np.linalg.inv(Sigma) @ resid)
    return mean, np.maximum(var, 0.0), ll


@pytest.mark.parametrize("trial", range(10))
def test_matches_dense_oracle(trial):
    rng = np.random.default_rng(100 + trial)
    n = int(rng.integers(2, 9))
    d = int(rng.integers(1, 4))
    data, params = _random_instance(rng, n, d)
    unit = Bounds(np.zeros(d), np.ones(d))
    beta = float(rng.normal())
    model = KrigingModel.from_params(data, params, beta=beta, bounds=unit)
    S = rng.uniform(0.0, 1.0, size=(7, d))

    mean, var = model.predict(S)
    o_mean, o_var, o_ll = _dense_oracle(data, params, beta, S)
    assert np.allclose(mean, o_mean, atol=1e-8, rtol=0)
    assert np.allclose(var, o_var, atol=1e-8, rtol=0)
    assert log_likelihood(params, beta, data, unit) == pytest.approx(o_ll, abs=1e-8)


def test_kernel_eval_and_matrix():
    params = KernelParams(np.array([2.0, 0.5]), 1.0, 0.1)
    assert kernel_eval([0.0, 0.0], [0.0, 0.0], params) == 1.0
    assert kernel_eval([1.0, 0.0], [0.0, 2.0], params) == pytest.approx(math.exp(-4.0))
    R = correlation_matrix([[0.0, 0.0], [1.0, 0.0]], params)
    assert np.allclose(np.diag(R), 1.1)
    assert R[0, 1] == pytest.approx(math.exp(-2.0))
    with pytest.raises(InvalidArgumentError):
        kernel_eval([0.0], [0.0, 0.0], params)


@pytest.mark.parametrize(
    "theta,tau2,nugget",
    [([0.0], 1.0, 0.0), ([-1.0], 1.0, 0.0), ([1.0], 0.0, 0.0), ([1.0], 1.0, -1e-9), ([np.inf], 1.0, 0.0)],
)
def test_kernel_params_validation(theta, tau2, nugget):
    with pytest.raises(InvalidArgumentError):
        KernelParams(np.array(theta), tau2, nugget)


def test_stable_cholesky_escalates_and_fails():
    R = np.ones((3, 3))
    L, nug = stable_cholesky(R, 0.0, 1e-4)
    assert 0.0 < nug <= 1e-4
    assert np.allclose(L @ L.T, R + nug * np.eye(3))
    with pytest.raises(NumericalSingularityError):
        stable_cholesky(R, 0.0, 0.0)


def test_interpolates_training_points():
    x = np.linspace(0.0, 1.0, 8).reshape(-1, 1)
    y = np.sin(6.0 * x[:, 0])
    model = fit_mle(Dataset(x, y), FitConfig(nugget=0.0))
    mean, var = model.predict(x)
    assert np.allclose(mean, y, atol=1e-6)
    assert np.all(var <= 1e-6 * model.params.tau2)
    assert posterior_mean(model, x[3]) == pytest.approx(y[3], abs=1e-6)
    assert posterior_var(model, 0.55) > 0.0


def test_exact_fit_never_adds_nugget():
    x = np.linspace(-5.0, 5.0, 21)
    data = Dataset(x.reshape(-1, 1), np.exp(-x ** 2 / 2.0) + 0.05 * x)
    model = fit_mle(data, FitConfig(nugget=0.0))
    assert model.params.nugget == 0.0
    mean, _ = model.predict(data.X)
    assert np.max(np.abs(mean - data.y)) <= 1e-6
    for entry in model.fit_info["starts"]:
        if "error" in entry:
            assert "nugget" in entry["error"]


def test_exact_fit_rejects_singular_theta():
    x = np.linspace(0.0, 1.0, 21)
    data = Dataset(x.reshape(-1, 1), x ** 2)
    with pytest.raises(NumericalSingularityError):
        profile_log_likelihood([1e-3], data, FitConfig(nugget=0.0))
    ll, _ = profile_log_likelihood([1e-3], data, FitConfig())
    assert math.isfinite(ll)


def test_theta_search_capped_by_design_spacing():
    x = np.linspace(0.0, 1.0, 11)
    data = Dataset(x.reshape(-1, 1), np.cos(8.0 * x))
    unit = Bounds(np.zeros(1), np.ones(1))
    cap = math.log(math.log(100.0) / 0.01)
    assert log_theta_upper(data, unit, FitConfig()) == pytest.approx([cap])
    assert log_theta_upper(data, unit, FitConfig(theta_cap_corr=0.0)) == pytest.approx([math.log(1e4)])
    model = fit_mle(data, FitConfig(), bounds=unit)
    assert model.params.theta[0] <= math.exp(cap) * (1 + 1e-9)
    assert model.fit_info["log_theta_upper"] == pytest.approx([cap])


def test_theta_cap_skips_constant_coordinate():
    X = np.column_stack([np.linspace(0.0, 1.0, 5), np.full(5, 0.5)])
    data = Dataset(X, np.arange(5.0))
    upper = log_theta_upper(data, Bounds(np.zeros(2), np.ones(2)), FitConfig())
    assert upper[0] == pytest.approx(math.log(math.log(100.0) / 0.0625))
    assert upper[1] == pytest.approx(math.log(1e4))
    with pytest.raises(InvalidArgumentError):
        FitConfig(theta_cap_corr=1.0)


def test_prediction_invariant_to_training_order(rng):
    data, params = _random_instance(rng, 6, 2)
    perm = rng.permutation(6)
    unit = Bounds(np.zeros(2), np.ones(2))
    a = KrigingModel.from_params(data, params, beta=0.3, bounds=unit)
    b = KrigingModel.from_params(data.subset(perm), params, beta=0.3, bounds=unit)
    S = rng.uniform(size=(5, 2))
    ma, va = a.predict(S)
    mb, vb = b.predict(S)
    assert np.allclose(ma, mb, atol=1e-10)
    assert np.allclose(va, vb, atol=1e-10)


def test_mle_never_worse_than_its_starts():
    x = np.linspace(-2.0, 3.0, 9)
    data = Dataset(x.reshape(-1, 1), np.cos(x) + 0.1 * x)
    model = fit_mle(data, FitConfig(n_starts=5))
    info = model.fit_info
    assert len(info["starts"]) == 5
    for entry in (e for e in info["starts"] if "error" not in e):
        assert info["log_likelihood"] >= entry["start_log_likelihood"] - 1e-12
        assert entry["log_likelihood"] >= entry["start_log_likelihood"] - 1e-12
    assert model.beta == pytest.approx(np.mean(data.y))


def test_mle_deterministic_under_seed():
    x = np.linspace(0.0, 1.0, 7)
    data = Dataset(x.reshape(-1, 1), x ** 2)
    a = fit_mle(data, FitConfig(seed=4))
    b = fit_mle(data, FitConfig(seed=4))
    assert np.array_equal(a.params.theta, b.params.theta)
    assert a.params.tau2 == b.params.tau2


def test_profile_matches_full_likelihood():
    x = np.linspace(0.0, 1.0, 6)
    data = Dataset(x.reshape(-1, 1), np.exp(x))
    cfg = FitConfig()
    theta = np.array([3.0])
    ll, tau2 = profile_log_likelihood(theta, data, cfg)
    full = log_likelihood(KernelParams(theta, tau2, cfg.nugget), float(np.mean(data.y)), data)
    assert ll == pytest.approx(full, rel=1e-9)
    # tau2-hat maximizes the likelihood along tau2
    for f in (0.5, 2.0):
        other = log_likelihood(KernelParams(theta, f * tau2, cfg.nugget), float(np.mean(data.y)), data)
        assert other < ll


def test_gls_beta():
    x = np.linspace(0.0, 1.0, 5)
    data = Dataset(x.reshape(-1, 1), 2.0 + x)
    model = fit_mle(data, FitConfig(beta_method="gls", n_starts=3))
    assert model.fit_info["beta_method"] == "gls"
    assert np.isfinite(model.beta)


def test_noise_fit_smooths():
    rng = np.random.default_rng(0)
    x = np.linspace(0.0, 1.0, 30)
    y = np.sin(4.0 * x) + rng.uniform(-0.3, 0.3, size=30)
    model = fit_mle(Dataset(x.reshape(-1, 1), y), FitConfig(noise=True, n_starts=4, max_nugget=1.0))
    assert model.fit_info["noise"] is True
    assert model.params.nugget > 1e-6
    mean, _ = model.predict(x.reshape(-1, 1))
    assert not np.allclose(mean, y, atol=1e-6)


def test_all_starts_failing_raises(monkeypatch):
    import av_cokriging.kriging as kriging

    def boom(*args, **kwargs):
        raise NumericalSingularityError("forced")

    monkeypatch.setattr(kriging, "stable_cholesky", boom)
    data = Dataset([[0.0], [1.0]], [0.0, 1.0])
    with pytest.raises(FittingFailureError) as exc:
        fit_mle(data, FitConfig(n_starts=2))
    assert len(exc.value.diagnostics) == 2
    assert all("error" in d for d in exc.value.diagnostics)


def test_serialization_round_trip(rng):
    x = np.linspace(-1.0, 2.0, 8)
    model = fit_mle(Dataset(x.reshape(-1, 1), np.tanh(x)), FitConfig(n_starts=3))
    back = KrigingModel.from_dict(model.to_dict())
    S = rng.uniform(-1.0, 2.0, size=(20, 1))
    m0, v0 = model.predict(S)
    m1, v1 = back.predict(S)
    assert np.allclose(m0, m1, atol=1e-12, rtol=0)
    assert np.allclose(v0, v1, atol=1e-12, rtol=0)
    assert back.log_likelihood() == pytest.approx(model.log_likelihood())

    doc = model.to_dict()
    doc["format_version"] = 99
    with pytest.raises(InvalidArgumentError):
        KrigingModel.from_dict(doc)


def test_condition_on_matches_rank_one_update(rng):
    data, params = _random_instance(rng, 5, 2)
    model = KrigingModel.from_params(data, params, beta=0.1, bounds=Bounds(np.zeros(2), np.ones(2)))
    x = np.array([0.37, 0.81])
    y_new = 0.42
    S = rng.uniform(size=(12, 2))

    mean, var = model.predict(S)
    mx, _ = model.predict(x.reshape(1, -1))
    c_sx, c_xx = model.posterior_cov(S, x)
    updated = model.condition_on(x, y_new)
    m_up, v_up = updated.predict(S)
    assert np.allclose(m_up, mean + c_sx / c_xx * (y_new - mx[0]), atol=1e-8)
    assert np.allclose(v_up, np.maximum(var - c_sx ** 2 / c_xx, 0.0), atol=1e-8)
    assert updated.contains_point(x)
    assert not model.contains_point(x)
