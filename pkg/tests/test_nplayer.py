import math

import numpy as np
import pytest
from scipy import stats

from mfcontract import nplayer
from mfcontract.closed_form import principal_value
from mfcontract.model import MeanFieldModel, TimeGrid, UnsupportedModelError


@pytest.fixture
def np_model():
    return MeanFieldModel(alpha=0.25, beta1=0.1)


def test_unsupported(baseline):
    with pytest.raises(UnsupportedModelError):
        nplayer.nplayer_policy(baseline)
    with pytest.raises(UnsupportedModelError):
        nplayer.nplayer_policy(MeanFieldModel(n=3.0))


def test_interaction_matrix(np_model):
    B = nplayer.interaction_matrix(3, np_model)
    assert np.allclose(B, 0.25 * np.eye(3) + 0.1 / 3)


def test_effort_equals_mean_field(np_model):
    assert nplayer.effort_match(np_model)


def test_average_mean_formula(np_model):
    m, T, k, c = np_model, np_model.T, np_model.kappa, np_model.c
    cfg = nplayer.NPlayerConfig(8, 20_000, 3, TimeGrid(T, 20), tracked=2)
    p = nplayer.simulate_nplayer(m, cfg)
    t = cfg.grid.points
    exact = m.m0 * np.exp(k * t) + (np.exp(k * (T + t)) - np.exp(k * (T - t))) / (2 * k * c)
    se = p.average.std(axis=0, ddof=1) / math.sqrt(cfg.games)
    assert np.all(np.abs(p.average.mean(axis=0) - exact) <= 4 * se + 1e-12)


def test_exact_matches_euler_in_law(np_model):
    grid = TimeGrid(np_model.T, 400)
    ex = nplayer.simulate_nplayer(np_model, nplayer.NPlayerConfig(4, 5000, 1, grid))
    eu = nplayer.simulate_nplayer(np_model, nplayer.NPlayerConfig(4, 5000, 2, grid), mode="euler")
    assert stats.ks_2samp(ex.x[:, 0, -1], eu.x[:, 0, -1]).pvalue > 1e-3
    assert stats.ks_2samp(ex.average[:, -1], eu.average[:, -1]).pvalue > 1e-3


def test_players_exchangeable(np_model):
    p = nplayer.simulate_nplayer(np_model, nplayer.NPlayerConfig(5, 5000, 9, TimeGrid(1.0, 20)))
    assert stats.ks_2samp(p.x[:, 0, -1], p.x[:, 3, -1]).pvalue > 1e-3


def test_vanishing_noise_is_symmetric():
    m = MeanFieldModel(alpha=0.25, beta1=0.1, sigma=1e-12, v0=0.0)
    p = nplayer.simulate_nplayer(m, nplayer.NPlayerConfig(6, 3, 0, TimeGrid(1.0, 10)))
    assert np.ptp(p.x[:, :, -1]) < 1e-9


def test_zero_horizon_contract():
    m = MeanFieldModel(alpha=0.25, beta1=0.1, T=0.0)
    p = nplayer.simulate_nplayer(m, nplayer.NPlayerConfig(3, 5, 0, TimeGrid(0.0, 1)))
    assert np.all(nplayer.nplayer_contract(p, m) == m.R0)


def test_contract_law_equals_mean_field(np_model):
    law = nplayer.mean_field_law(np_model)
    p = nplayer.simulate_nplayer(np_model, nplayer.NPlayerConfig(16, 20_000, 5, TimeGrid(1.0, 200), tracked=1))
    xi = nplayer.nplayer_contract(p, np_model)[:, 0]
    se = xi.std(ddof=1) / math.sqrt(xi.size)
    assert abs(xi.mean() - law.mean) <= 4 * se
    assert abs(xi.var(ddof=1) - law.variance) <= 4 * law.variance * math.sqrt(2 / xi.size)


def test_value_and_pde(np_model):
    v = nplayer.nplayer_value(0.0, np.ones(2), np.zeros(2), np_model)
    assert v == pytest.approx(2.1431766253578832, abs=1e-12)
    assert v == pytest.approx(principal_value(0.0, 1.0, 0.0, 0.0, np_model), abs=1e-10)
    assert nplayer.nplayer_pde_residual(np_model, 3, [0.0, 0.5, 1.0], [-1.0, 0.0, 2.0]) <= 1e-6


def test_trend_verdict():
    rows = [nplayer.ConvergenceRow(N, 10, w, 0.0) for N, w in ((4, 0.4), (16, 0.2), (64, 0.1))]
    v = nplayer.trend_verdict(rows)
    assert v["strictly_decreasing"] and v["slope"] == pytest.approx(-0.5) and v["passed"]
