import json

import numpy as np
import pytest
from scipy import stats

from bretp import (CtmcInput, DonsoffParams, GammaFilterParams, HawkesParams,
                   RandomTelegraphParams, build_model, dark_current_model, donsoff_model,
                   exponential_renewal, gamma_filter_model, hawkes_model, load_model,
                   random_telegraph_model, renewal_model, snyder_model, tabulated_renewal)
from bretp.errors import AllStatesZero, InvalidParameters, Nonstationary
from bretp.models import donsoff_equilibrium, gamma_filter_equilibrium, gamma_filter_jump

from oracles import hawkes_moments, telegraph_roots


@pytest.mark.parametrize("k1,k2,c,l0", [(0.1, 0.1, 1.0, 0.0), (0.3, 2.0, 0.5, 0.2),
                                        (5.0, 0.01, 3.0, 1.0)])
def test_telegraph_roots_match_quadratic(k1, k2, c, l0):
    p = RandomTelegraphParams(k1, k2, c, l0)
    assert np.allclose(p.roots, telegraph_roots(k1, k2, c, l0), rtol=1e-12)


def test_dark_current_landmarks():
    p = RandomTelegraphParams(0.1, 0.1, 1.0, 0.1)
    assert p.roots[0] == pytest.approx(0.190, abs=5e-4)
    assert p.f_inf == pytest.approx(0.621, abs=5e-4)
    y = np.linspace(p.f_inf, p.lambda1, 7)
    assert np.allclose(p.jump_map(p.jump_map_inv(y)), y)


def test_jump_map_without_dark_current_returns_on_level():
    p = RandomTelegraphParams(0.2, 0.3, 2.0, 0.0)
    assert np.allclose(p.jump_map(np.array([0.1, 1.0, 1.9])), 2.0)


def test_invalid_parameters_rejected():
    with pytest.raises(InvalidParameters):
        RandomTelegraphParams(-0.1, 0.1)
    with pytest.raises(InvalidParameters):
        RandomTelegraphParams(0.1, 0.1, 1.0, -0.5)
    with pytest.raises(InvalidParameters):
        DonsoffParams(0.0, 1.0, 1.0)
    with pytest.raises(Nonstationary):
        HawkesParams(1.0, 2.0, 1.5)
    with pytest.raises(InvalidParameters):
        dark_current_model(RandomTelegraphParams(0.1, 0.1))


def test_hawkes_moments_match_generator_oracle():
    p = HawkesParams(0.7, 0.5, 1.3)
    m, v = hawkes_moments(p.mu0, p.beta, p.alpha)
    assert p.mean == pytest.approx(m)
    assert p.variance == pytest.approx(v)


@pytest.mark.parametrize("alpha", [0.3, 1.0, 3.0])
def test_hawkes_from_moments_round_trip(alpha):
    p = HawkesParams.from_moments(alpha, 2.0, 1.0)
    assert p.mean == pytest.approx(2.0)
    assert p.variance == pytest.approx(1.0)


def test_hawkes_from_input_links_decay_and_mean():
    mu, s2, g, c = 2.0, 4.0, 0.65, 1.0
    p = HawkesParams.from_input(mu, s2, g, c)
    assert p.alpha - p.beta == pytest.approx(g)
    assert p.mean == pytest.approx(c * mu)
    # variance decomposition of the linear filter: c mu beta + Var = c^2 sigma^2
    assert c * mu * p.beta + p.variance == pytest.approx(c * c * s2)


def test_hawkes_model_truncation_default():
    m = hawkes_model(HawkesParams.from_moments(1.0, 2.0, 1.0))
    lo, hi = m.support[0]
    assert lo == pytest.approx(m.params["mu0"] + m.params["beta"])
    assert m.truncated
    q = stats.gamma(a=4.0, scale=0.5).ppf(0.999)
    assert hi == pytest.approx(lo + q)


def test_donsoff_equilibrium_is_rest_point():
    p = DonsoffParams(0.04, 1.6, 1.6)
    eq = donsoff_equilibrium(p)
    m = donsoff_model(p)
    assert np.allclose(m.flow(eq), 0.0, atol=1e-12)
    assert 0 < eq[1] < 1
    assert m.mean_intensity == pytest.approx(p.p_on)


def test_donsoff_on_fraction():
    p = DonsoffParams(0.04, 1.6, 1.6)
    t_off, t_on = 1 / 0.04, 2 / 1.6
    assert p.p_on == pytest.approx(t_on / (t_off + t_on))


def test_gamma_filter_rest_point_and_jump():
    p = GammaFilterParams(2.0, 4.0, 0.65, 1.0)
    eq = gamma_filter_equilibrium(p)
    m = gamma_filter_model(p)
    assert np.allclose(m.flow(eq), 0.0, atol=1e-10)
    # Gamma posterior after an event: shape + 1, rate unchanged
    M, S = 1.5, 0.9
    k, b = M * M / S, M / S
    Mj, Sj = gamma_filter_jump(np.array([M, S]))
    assert Mj == pytest.approx((k + 1) / b)
    assert Sj == pytest.approx((k + 1) / b ** 2)


def test_ctmc_validation_and_stationary_law():
    with pytest.raises(InvalidParameters):
        CtmcInput(("a", "b"), [[-1, 1], [1, -2]], [0.0, 1.0])
    with pytest.raises(InvalidParameters):
        CtmcInput(("a", "b"), [[-1, 1], [0, 0]], [0.0, 1.0])
    inp = CtmcInput(("a", "b", "c"), [[-0.2, 0.2, 0], [0, -0.5, 0.5], [0.3, 0, -0.3]],
                    [0.2, 1.0, 2.0])
    pi = inp.stationary()
    assert np.allclose(pi @ inp.generator, 0.0, atol=1e-14)
    assert pi.sum() == pytest.approx(1.0)
    with pytest.raises(AllStatesZero):
        snyder_model(CtmcInput(("a", "b"), [[-1, 1], [1, -1]], [0.0, 0.0]))


def test_snyder_telegraph_equals_closed_form_model():
    p = RandomTelegraphParams(0.1, 0.1, 1.0, 0.1)
    sm = snyder_model(CtmcInput.telegraph(p))
    assert sm.mean_intensity == pytest.approx(p.mean_intensity)


def test_renewal_models():
    r = exponential_renewal(1.5)
    assert r.mean_intensity == pytest.approx(1.5)
    assert r.point_mass
    tau = np.linspace(0, 10, 201)
    t = tabulated_renewal(tau, np.exp(-tau ** 2 / 4))
    assert t.mean_intensity == pytest.approx(1 / np.sqrt(np.pi), rel=1e-3)
    with pytest.raises(InvalidParameters):
        renewal_model(lambda x: 0.5)
    with pytest.raises(InvalidParameters):
        renewal_model(lambda x: 1.0 if x < 1 else 0.2, tau_max=5)


def test_build_model_types(tmp_path):
    specs = [
        {"type": "random_telegraph", "params": {"k1": 0.1, "k2": 0.1}},
        {"type": "dark_current", "params": {"k1": 0.1, "k2": 0.1, "c": 1.0, "lambda0": 0.1}},
        {"type": "donsoff", "params": {"alpha01": 0.04, "alpha11": 1.6, "alpha10": 1.6}},
        {"type": "hawkes", "params": {"alpha": 1.0, "mean": 2.0, "variance": 1.0}},
        {"type": "hawkes", "params": {"mu": 2.0, "sigma2": 4.0, "gamma": 0.65}},
        {"type": "renewal", "params": {"rate": 2.0}},
        {"type": "ctmc", "params": {"states": ["a", "b"], "generator": [[-1, 1], [1, -1]],
                                    "lambda_map": [0.5, 2.0]}},
    ]
    kinds = [build_model(s).kind for s in specs]
    assert kinds[0] == "random_telegraph" and kinds[1] == "dark_current"
    f = tmp_path / "m.json"
    f.write_text(json.dumps(specs[3]))
    assert load_model(f).mean_intensity == pytest.approx(2.0)
    with pytest.raises(InvalidParameters):
        build_model({"type": "nope"})
    with pytest.raises(InvalidParameters):
        build_model({"type": "random_telegraph", "params": {"k1": 0.1}})
    with pytest.raises(FileNotFoundError):
        load_model(tmp_path / "missing.json")


def test_random_telegraph_model_is_stateless_between_events():
    m = random_telegraph_model(RandomTelegraphParams(0.1, 0.1))
    assert m.n == 0
    assert m.m_floor == pytest.approx(RandomTelegraphParams(0.1, 0.1).roots[0])
