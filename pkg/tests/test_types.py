import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skewstream.engine import description_from_dict, description_to_dict
from skewstream.types import (AttributeSchema, CompactDescription, ComponentMatrices,
                              CurrentTensor, Event, Regime, SwitchRecord, check_matrices,
                              check_row_stochastic, validate_description)


def _matrices(K=2, U=3, M2=1, T=1):
    return ComponentMatrices([np.full((K, U), 1.0 / U)], [np.ones((K, 2))] * M2,
                             np.full((T, K), 1.0 / K))


def _regime(rid, length=1):
    return Regime(rid, _matrices(), length)


class TestSchema:
    def test_counts(self):
        s = AttributeSchema(["port"], ["dur", "bytes"])
        assert (s.n_categorical, s.n_continuous) == (1, 2)
        assert s.vocab_sizes == [0]

    def test_needs_an_attribute(self):
        with pytest.raises(ValueError):
            AttributeSchema([], [])

    def test_vocab_length_checked(self):
        with pytest.raises(ValueError):
            AttributeSchema(["a"], [], [1, 2])


class TestCurrentTensor:
    def test_ticks_and_counts(self):
        w = CurrentTensor(0, 10.0, 4.0, [10.0, 10.5, 12.2, 13.99], [[0], [1], [0], [2]],
                          [[1.0], [2.0], [3.0], [4.0]])
        assert w.n_ticks == 4
        assert w.ticks.tolist() == [0, 0, 2, 3]
        assert w.per_tick_counts.tolist() == [2, 0, 1, 1]
        assert w.per_tick_counts.sum() == len(w)
        assert w.vocab_sizes == [3]

    def test_fractional_duration_rounds_up(self):
        w = CurrentTensor(0, 0.0, 2.5, [], np.zeros((0, 1)), np.zeros((0, 0)))
        assert w.n_ticks == 3

    def test_events_round_trip(self):
        evs = [Event(0.5, (1,), (2.0,)), Event(1.5, (0,), (0.25,))]
        w = CurrentTensor.from_events(0, 0.0, 2.0, evs, 1, 1)
        assert w.events == evs


class TestChecks:
    def test_row_stochastic(self):
        check_row_stochastic(np.array([[0.2, 0.8], [1.0, 0.0]]))
        with pytest.raises(ValueError):
            check_row_stochastic(np.array([[0.2, 0.7]]))
        with pytest.raises(ValueError):
            check_row_stochastic(np.array([[1.2, -0.2]]))

    def test_matrices(self):
        check_matrices(_matrices())
        bad = _matrices()
        bad.gamma_params[0] = np.array([[1.0, 0.0], [1.0, 1.0]])
        with pytest.raises(ValueError):
            check_matrices(bad)


class TestValidateDescription:
    def test_minimal_valid(self):
        c = CompactDescription([_regime(0)], [SwitchRecord(0, 0)], 1)
        assert validate_description(c) == []

    def test_dangling_id(self):
        c = CompactDescription([_regime(0), _regime(1)],
                               [SwitchRecord(0, 0), SwitchRecord(1, 7)], 2)
        assert validate_description(c) == ["dangling regime id"]

    def test_redundant_switch(self):
        c = CompactDescription([_regime(0, 2)], [SwitchRecord(0, 0), SwitchRecord(1, 0)], 2)
        assert validate_description(c) == ["redundant switch"]

    def test_unordered_switches(self):
        c = CompactDescription([_regime(0), _regime(1)],
                               [SwitchRecord(3, 0), SwitchRecord(1, 1)], 2)
        assert "switch times not increasing" in validate_description(c)

    def test_segment_sum(self):
        c = CompactDescription([_regime(0, 3)], [SwitchRecord(0, 0)], 2)
        assert validate_description(c) == ["segment lengths sum to 3, expected 2"]

    def test_unused_regime(self):
        c = CompactDescription([_regime(0, 1), _regime(1, 0)], [SwitchRecord(0, 0)], 1)
        assert validate_description(c) == ["regime 1 has no assigned windows"]

    def test_active_regime(self):
        c = CompactDescription([_regime(0), _regime(1)], [SwitchRecord(0, 0), SwitchRecord(4, 1)], 2)
        assert c.active_regime.id == 1
        assert CompactDescription().active_regime is None


@st.composite
def descriptions(draw):
    R = draw(st.integers(1, 4))
    K = draw(st.integers(1, 3))
    regimes = []
    for rid in range(R):
        U = draw(st.integers(1, 5))
        T = draw(st.integers(1, 4))
        seed = draw(st.integers(0, 2**32 - 1))
        g = np.random.default_rng(seed)
        m = ComponentMatrices([g.dirichlet(np.ones(U), size=K)],
                              [g.uniform(0.1, 5.0, size=(K, 2))],
                              g.dirichlet(np.ones(K), size=T), g.uniform(0, 100, size=K))
        regimes.append(Regime(rid, m, draw(st.integers(1, 50))))
    order = draw(st.permutations(list(range(R))))
    switches = [SwitchRecord(i * 3, r) for i, r in enumerate(order)]
    return CompactDescription(regimes, switches, sum(r.total_segment_length for r in regimes))


@settings(max_examples=50, deadline=None)
@given(descriptions())
def test_description_round_trip(c):
    back = description_from_dict(description_to_dict(c))
    assert back.switches == c.switches
    assert back.n_windows == c.n_windows
    for a, b in zip(c.regimes, back.regimes):
        assert (a.id, a.total_segment_length) == (b.id, b.total_segment_length)
        for x, y in zip(a.matrices.cat_dists + a.matrices.gamma_params,
                        b.matrices.cat_dists + b.matrices.gamma_params):
            np.testing.assert_array_equal(x, y)
        np.testing.assert_array_equal(a.matrices.time_mix, b.matrices.time_mix)
        np.testing.assert_array_equal(a.matrices.support, b.matrices.support)
    assert validate_description(back) == validate_description(c)
