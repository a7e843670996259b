import math

import numpy as np
import pytest

from conftest import separated_matrices
from skewstream.config import DetectorConfig
from skewstream.exceptions import InvalidParameterError
from skewstream.mdl import (LOG_STAR_C0, Case, CostBreakdown, data_cost_bits, delta_model_cost,
                            log_star, model_cost_regime, model_cost_switch, select_regime)
from skewstream.sifi import carry_priors, decompose, log_likelihood, refit_time_mixture
from skewstream.synthgen import sample_window
from skewstream.types import CompactDescription, ComponentMatrices, Regime, SwitchRecord

CFG = DetectorConfig(n_components=3, tau=60.0)
BASE = math.log2(2.865064)


def _log_star_oracle(n):
    # iterate log2 while the result stays positive
    total, x = math.log2(2.865064), float(n)
    while True:
        x = math.log2(x)
        if x <= 0:
            return total
        total += x


class TestLogStar:
    def test_one(self):
        assert log_star(1) == pytest.approx(BASE, abs=1e-12)
        assert log_star(1) == pytest.approx(1.5186, abs=1e-4)

    def test_two(self):
        assert log_star(2) == pytest.approx(BASE + 1.0, abs=1e-12)
        assert log_star(2) == pytest.approx(2.5186, abs=1e-4)

    @pytest.mark.parametrize("n", [3, 4, 16, 17, 65536, 10**9])
    def test_oracle(self, n):
        assert log_star(n) == pytest.approx(_log_star_oracle(n), abs=1e-12)

    def test_sixteen_by_hand(self):
        # log2 16 = 4, log2 4 = 2, log2 2 = 1
        assert log_star(16) == pytest.approx(BASE + 4 + 2 + 1, abs=1e-12)

    def test_monotone(self):
        vals = [log_star(n) for n in range(1, 10_001)]
        assert all(b >= a for a, b in zip(vals, vals[1:]))

    @pytest.mark.parametrize("bad", [0, -3, 2.5])
    def test_rejects(self, bad):
        with pytest.raises(InvalidParameterError):
            log_star(bad)

    def test_constant(self):
        assert LOG_STAR_C0 == 2.865064


def _matrices(K, U, M2, T):
    return ComponentMatrices([np.full((K, U), 1.0 / U)], [np.ones((K, 2))] * M2,
                             np.full((T, K), 1.0 / K))


class TestModelCost:
    def test_no_free_parameters(self):
        assert model_cost_regime(_matrices(1, 1, 0, 1)) == pytest.approx(2 * BASE)
        assert model_cost_regime(_matrices(1, 1, 0, 1)) == pytest.approx(3.037, abs=1e-3)

    def test_continuous_attribute_adds_64_bits(self):
        diff = model_cost_regime(_matrices(1, 1, 1, 1)) - model_cost_regime(_matrices(1, 1, 0, 1))
        assert diff == pytest.approx(64.0)

    def test_full_expansion(self):
        K, U, M2, T = 3, 20, 2, 60
        expected = log_star(K) + log_star(U) + 32 * (K * (U - 1) + 2 * K * M2 + T * (K - 1))
        assert model_cost_regime(_matrices(K, U, M2, T)) == pytest.approx(expected)

    def test_increases_with_k(self):
        costs = [model_cost_regime(_matrices(K, 5, 2, 10)) for K in range(1, 20)]
        assert all(b > a for a, b in zip(costs, costs[1:]))

    def test_float_bits(self):
        a = model_cost_regime(_matrices(2, 3, 1, 4), float_bits=16)
        b = model_cost_regime(_matrices(2, 3, 1, 4), float_bits=32)
        assert b - a == pytest.approx(16 * (2 * 2 + 2 * 2 + 4))


class TestSwitchCost:
    def test_examples(self):
        assert model_cost_switch(1, 1) == pytest.approx(1.5186, abs=1e-4)
        assert model_cost_switch(1, 2) == pytest.approx(2.5186, abs=1e-4)

    def test_nondecreasing(self):
        for t in range(1, 50):
            for r in range(1, 10):
                assert model_cost_switch(t + 1, r) >= model_cost_switch(t, r)
                assert model_cost_switch(t, r + 1) >= model_cost_switch(t, r)


def _description(G, R):
    regimes = [Regime(i, _matrices(2, 3, 1, 4), 1) for i in range(R)]
    switches = [SwitchRecord(i, i % R) for i in range(G)]
    return CompactDescription(regimes, switches, R)


class TestDeltaModelCost:
    def test_same_regime_is_zero(self):
        c = _description(3, 2)
        assert delta_model_cost(Case.SAME_REGIME, c.regimes[0], c, 9) == 0.0

    def test_switch_existing_expansion(self):
        c = _description(1, 2)
        expected = (log_star(2) - log_star(1)) + log_star(5) + 1.0
        assert delta_model_cost(Case.SWITCH_EXISTING, c.regimes[1], c, 5) == pytest.approx(
            expected, abs=1e-12)

    def test_new_regime_expansion(self):
        c = _description(2, 2)
        cand = Regime(2, _matrices(2, 3, 1, 4))
        expected = (log_star(3) - log_star(2)) + model_cost_regime(cand.matrices) + \
                   (log_star(3) - log_star(2)) + log_star(7) + math.log2(3)
        assert delta_model_cost(Case.NEW_REGIME, cand, c, 7) == pytest.approx(expected, abs=1e-9)

    def test_first_regime(self):
        c = CompactDescription()
        cand = Regime(0, _matrices(1, 1, 0, 1))
        expected = log_star(1) + model_cost_regime(cand.matrices) + log_star(1) + \
            model_cost_switch(1, 1)
        assert delta_model_cost(Case.NEW_REGIME, cand, c, 1) == pytest.approx(expected)

    def test_new_at_least_switch(self):
        for G in range(1, 6):
            c = _description(G, 2)
            for t in range(G, G + 10):
                assert delta_model_cost(Case.NEW_REGIME, Regime(9, _matrices(1, 1, 0, 1)), c, t) \
                    >= delta_model_cost(Case.SWITCH_EXISTING, c.regimes[0], c, t)


def test_cost_breakdown_total():
    b = CostBreakdown(Case.SWITCH_EXISTING, 1, 3.25, 10.5)
    assert b.total == 13.75


def _stream_state(m):
    """One-regime description whose only regime is ``m``."""
    m = m.copy()
    m.support = np.full(m.K, 2000.0 / m.K)
    return CompactDescription([Regime(0, m, 5)], [SwitchRecord(0, 0)], 5)


def _candidate(window, c, rng):
    priors = carry_priors(c.active_regime.matrices, CFG.beta, n_ticks=window.n_ticks)
    return Regime(1, decompose(window, priors, CFG, rng))


class TestSelectRegime:
    def test_same_regime_for_own_data(self, rng):
        m = separated_matrices(seed=1)
        c = _stream_state(m)
        w, _ = sample_window(m, 30, rng, window_index=5, duration=60.0)
        chosen, costs = select_regime(w, _candidate(w, c, rng), c, CFG, rng)
        assert costs[0].case is Case.SAME_REGIME and chosen is c.regimes[0]

    def test_new_regime_for_distant_data(self, rng):
        m = separated_matrices(seed=1)
        far = separated_matrices(seed=99, rates=((30.0, 0.05, 2.0), (0.02, 9.0, 40.0)))
        far.cat_dists[0] = np.roll(far.cat_dists[0], 10, axis=1)
        c = _stream_state(m)
        w, _ = sample_window(far, 60, rng, window_index=5, duration=60.0)
        chosen, costs = select_regime(w, _candidate(w, c, rng), c, CFG, rng)
        assert costs[0].case is Case.NEW_REGIME and chosen.id == 1

    def test_single_event_stays(self, rng):
        m = separated_matrices(seed=1)
        far = separated_matrices(seed=99)
        c = _stream_state(m)
        w, _ = sample_window(far, np.r_[1, np.zeros(59, dtype=int)], rng, window_index=5,
                             duration=60.0)
        assert len(w) == 1
        _, costs = select_regime(w, _candidate(w, c, rng), c, CFG, rng)
        assert costs[0].case is Case.SAME_REGIME

    def test_minimiser_and_costs(self, rng):
        m = separated_matrices(seed=2)
        c = _stream_state(m)
        c.regimes.append(Regime(1, separated_matrices(seed=3), 2))
        c.switches.append(SwitchRecord(5, 1))
        c.n_windows = 7
        w, _ = sample_window(m, 20, rng, window_index=7, duration=60.0)
        cand = _candidate(w, c, rng)
        chosen, costs = select_regime(w, cand, c, CFG, rng)
        totals = [b.total for b in costs]
        assert totals[0] == min(totals)
        same = next(b for b in costs if b.case is Case.SAME_REGIME)
        assert costs[0].total <= same.total
        assert same.regime_id == 1 and same.delta_model_cost == 0.0
        new = next(b for b in costs if b.case is Case.NEW_REGIME)
        assert new.data_cost == pytest.approx(-log_likelihood(w, cand.matrices) / math.log(2))
        assert {b.case for b in costs} == set(Case)

    def test_duplicate_regime_tie_breaks_to_lowest_id(self, rng):
        m = separated_matrices(seed=1)
        c = _stream_state(m)
        # two identical stored regimes, neither active
        other = separated_matrices(seed=8)
        c.regimes = [Regime(0, other, 3), Regime(1, m.copy(), 1), Regime(2, m.copy(), 1)]
        c.regimes[1].matrices.support = np.full(3, 600.0)
        c.regimes[2].matrices.support = np.full(3, 600.0)
        c.switches = [SwitchRecord(0, 0)]
        c.n_windows = 5
        w, _ = sample_window(m, 30, rng, window_index=5, duration=60.0)
        chosen, costs = select_regime(w, _candidate(w, c, rng), c, CFG, rng)
        dup = [b for b in costs if b.regime_id in (1, 2)]
        assert dup[0].total == dup[1].total
        if costs[0].case is Case.SWITCH_EXISTING:
            assert chosen.id == 1

    def test_empty_window(self, rng):
        m = separated_matrices(seed=1)
        c = _stream_state(m)
        w, _ = sample_window(m, 0, rng, window_index=5, duration=60.0)
        chosen, costs = select_regime(w, None, c, CFG, rng)
        assert chosen is c.regimes[0]
        assert costs == [CostBreakdown(Case.SAME_REGIME, 0, 0.0, 0.0)]


def test_data_cost_is_bits_of_refit(rng):
    m = separated_matrices(seed=1)
    w, _ = sample_window(m, 10, rng, duration=60.0)
    r = Regime(0, m, 1)
    a = data_cost_bits(w, r, CFG, np.random.default_rng(3))
    adapted, _ = refit_time_mixture(w, r, CFG, np.random.default_rng(3))
    assert a == pytest.approx(-log_likelihood(w, adapted) / math.log(2), rel=1e-12)
    empty, _ = sample_window(m, 0, rng, duration=60.0)
    assert data_cost_bits(empty, r, CFG, rng) == 0.0
