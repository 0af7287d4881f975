import numpy as np
import pytest
from scipy import stats

from bretp import (CtmcInput, HawkesParams, RandomTelegraphParams, acid, dark_current_model,
                   exponential_renewal, hawkes_model, rt_closed_form_rate, wasserstein1)
from bretp.errors import FilterBlowup, InvalidParameters, UnsupportedModel
from bretp.mc import (BirthDeathInput, EventPath, empirical_acid, ks_window_test,
                      marginal_simulate, mc_mi_rate, moment_checks, path_metric, replay,
                      simulate_mmpp, snyder_replay)

from oracles import poisson_anchor

DARK = RandomTelegraphParams(0.1, 0.1, 1.0, 0.1)


def test_seeded_paths_are_reproducible():
    m = hawkes_model(HawkesParams.from_moments(1.0, 2.0, 1.0))
    a = marginal_simulate(m, 50.0, seed=3)
    b = marginal_simulate(m, 50.0, seed=3)
    c = marginal_simulate(m, 50.0, seed=4)
    assert np.array_equal(a.jump_times, b.jump_times)
    assert not np.array_equal(a.jump_times, c.jump_times)
    inp = CtmcInput.telegraph(DARK)
    assert np.array_equal(simulate_mmpp(inp, 50.0, 1).jump_times,
                          simulate_mmpp(inp, 50.0, 1).jump_times)


def test_event_path_validation():
    with pytest.raises(InvalidParameters):
        EventPath(np.array([1.0, 0.5]), 2.0)
    with pytest.raises(InvalidParameters):
        EventPath(np.array([0.5, 3.0]), 2.0)
    p = EventPath(np.array([0.5, 1.5, 2.5, 3.5]), 4.0)
    assert list(p.counts(1.0)) == [1, 1, 1, 1]
    assert list(p.counts(1.0, gap=1.0)) == [1, 1]


def test_mmpp_event_rate_matches_mean_intensity():
    inp = CtmcInput.telegraph(DARK)
    path = simulate_mmpp(inp, 20000.0, seed=2)
    n = path.jump_times.size
    # Fano factor of a telegraph-driven stream is 1 + 2 c^2 var / (mean (k1 + k2))
    fano = 1 + 2 * 0.25 / (0.6 * 0.2)
    sd = np.sqrt(fano * 0.6 * 20000.0)
    assert abs(n - 0.6 * 20000.0) < 4 * sd


def test_marginal_and_exact_streams_agree():
    m = dark_current_model(DARK)
    a = marginal_simulate(m, 20000.0, seed=8)
    b = simulate_mmpp(CtmcInput.telegraph(DARK), 20000.0, seed=9)
    assert ks_window_test(a, b).pvalue > 0.01


def test_exponential_renewal_gaps_are_exponential():
    path = marginal_simulate(exponential_renewal(2.0), 5000.0, seed=1)
    gaps = np.diff(path.jump_times)
    assert stats.kstest(gaps, stats.expon(scale=0.5).cdf).pvalue > 0.01


def test_birth_death_anchor_matches_series():
    for mu, c in [(2.0, 1.0), (0.5, 2.0), (10.0, 0.3)]:
        assert BirthDeathInput(mu, 1.0, c).anchor() == pytest.approx(poisson_anchor(mu, c),
                                                                    abs=1e-12)


def test_empirical_acid_of_hawkes():
    m = hawkes_model(HawkesParams.from_moments(1.0, 2.0, 1.0))
    edges = np.linspace(0, 10, 501)
    emp = empirical_acid(m, 20000.0, burn_in=50.0, sample_dt=0.5, seed=5, edges=edges)
    assert emp.mean == pytest.approx(2.0, abs=0.05)
    assert emp.variance == pytest.approx(1.0, abs=0.1)
    num, _, _ = acid(m, cells=200, reps=3, edges=edges)
    assert wasserstein1(emp, num) < 0.05


def test_snyder_replay_matches_closed_form_filter():
    m = dark_current_model(DARK)
    path = simulate_mmpp(CtmcInput.telegraph(DARK), 200.0, seed=6)
    pi_on = DARK.p_on
    a = snyder_replay(path, CtmcInput.telegraph(DARK), dt=0.1)
    b = replay(path, m, dt=0.1, x0=[DARK.lambda0 + DARK.c * pi_on])
    # grids differ inside intervals but share every event time and both ends
    assert a.times.shape == b.times.shape
    same = np.isclose(a.times, b.times, rtol=0, atol=1e-12)
    assert same.sum() >= 2 * path.jump_times.size
    assert np.abs(a.values[same] - b.values[same]).max() < 1e-6
    assert path_metric(path, m, m, x0_a=[0.6], x0_b=[0.6]) == 0.0


def test_filter_blowup_on_impossible_event():
    inp = CtmcInput(("off", "on"), [[-1.0, 1.0], [1.0, -1.0]], [0.0, 1.0])
    with pytest.raises(FilterBlowup):
        snyder_replay(EventPath(np.array([0.0]), 1.0), inp, pi0=[1.0, 0.0])


def test_mc_rate_brackets_closed_form():
    p = RandomTelegraphParams(0.1, 0.1)
    inp = CtmcInput.telegraph(p)
    s = mc_mi_rate(inp, T=200.0, replicates=400, seed=1)
    assert s.brackets("rate", rt_closed_form_rate(p).rate, k=4)
    assert s.brackets("liptser", rt_closed_form_rate(p).rate, k=4)
    again = mc_mi_rate(inp, T=200.0, replicates=400, seed=1)
    assert again.estimates == s.estimates
    with pytest.raises(InvalidParameters):
        mc_mi_rate(BirthDeathInput(2.0, 0.65), replicates=2)
    with pytest.raises(UnsupportedModel):
        mc_mi_rate(object(), replicates=2)


def test_moment_checks_point_mass():
    s = moment_checks(exponential_renewal(3.0), T=50.0, replicates=400, seed=2, burn_in=0.0)
    assert s.brackets("mean_slope", 3.0, k=4)
    assert s.brackets("variance_slope", 3.0, k=4)
