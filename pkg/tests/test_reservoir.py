import numpy as np
import pytest

from pdfa_bench.machine import even_process, period_two, sample_sequence
from pdfa_bench.predictors.base import PredictorSpec, build_predictor, evaluate_stream
from pdfa_bench.predictors.reservoir import (
    ReservoirPredictor,
    reservoir_init,
    reservoir_states,
)


class TestReservoirInit:
    @pytest.mark.parametrize("n", [1, 2, 10, 40])
    def test_spectral_radius_hits_target(self, n):
        params = reservoir_init(n, seed=0, spectral_radius_target=0.95)
        radius = float(np.max(np.abs(np.linalg.eigvals(params.W))))
        assert radius == pytest.approx(0.95, abs=1e-9)

    def test_custom_target(self):
        params = reservoir_init(8, seed=1, spectral_radius_target=0.5)
        radius = float(np.max(np.abs(np.linalg.eigvals(params.W))))
        assert radius == pytest.approx(0.5, abs=1e-9)

    def test_deterministic_per_seed(self):
        a = reservoir_init(6, seed=9)
        b = reservoir_init(6, seed=9)
        np.testing.assert_array_equal(a.W, b.W)
        np.testing.assert_array_equal(a.v, b.v)
        np.testing.assert_array_equal(a.b, b.b)

    def test_seeds_differ(self):
        a = reservoir_init(6, seed=9)
        b = reservoir_init(6, seed=10)
        assert not np.array_equal(a.W, b.W)


class TestReservoirStates:
    def test_row_zero_is_initial_state(self):
        params = reservoir_init(4, seed=0)
        H = reservoir_states(params, np.array([1, 0, 1]))
        np.testing.assert_array_equal(H[0], np.zeros(4))
        h0 = np.full(4, 0.3)
        H2 = reservoir_states(params, np.array([1, 0, 1]), h0=h0)
        np.testing.assert_array_equal(H2[0], h0)

    def test_recurrence_matches_definition(self):
        params = reservoir_init(5, seed=2)
        symbols = np.array([1, 1, 0, 1, 0, 0])
        H = reservoir_states(params, symbols)
        for t in range(len(symbols) - 1):
            expected = np.tanh(params.W @ H[t] + params.v * symbols[t] + params.b)
            np.testing.assert_allclose(H[t + 1], expected, atol=1e-15)

    def test_states_bounded_by_tanh(self):
        params = reservoir_init(10, seed=3)
        H = reservoir_states(params, np.ones(200, dtype=int))
        assert np.all(np.abs(H) <= 1.0)

    def test_echo_state_washout(self):
        # with spectral radius below 1 the state forgets its initialization
        params = reservoir_init(20, seed=4, spectral_radius_target=0.95)
        symbols = sample_sequence(even_process(0.5), 500, seed=5).symbols
        h_a = reservoir_states(params, symbols)[-1]
        h_b = reservoir_states(params, symbols, h0=np.full(20, 0.9))[-1]
        assert np.max(np.abs(h_a - h_b)) < 1e-6


class TestReservoirPredictor:
    def test_period_two_learned(self):
        symbols = sample_sequence(period_two(), 600, seed=0).symbols
        model = ReservoirPredictor(n_nodes=6, seed=1)
        model.fit(symbols[:300])
        outcome = evaluate_stream(model, symbols, 300)
        assert outcome.accuracy == 1.0

    def test_build_predictor_dispatch(self):
        model = build_predictor(PredictorSpec(family="reservoir", size=4, seed=3))
        assert isinstance(model, ReservoirPredictor)
        assert model.params.v.shape == (4,)

    def test_deterministic_given_seed(self):
        symbols = sample_sequence(even_process(0.4), 800, seed=6).symbols
        outs = []
        for _ in range(2):
            model = ReservoirPredictor(n_nodes=8, seed=7)
            model.fit(symbols[:400])
            outs.append(model.step_probabilities(symbols))
        np.testing.assert_array_equal(outs[0], outs[1])

    def test_beats_chance_on_even_process(self):
        symbols = sample_sequence(even_process(0.4), 3000, seed=8).symbols
        model = ReservoirPredictor(n_nodes=16, seed=9)
        model.fit(symbols[:1500])
        outcome = evaluate_stream(model, symbols, 1500)
        base = max(np.mean(symbols[1500:]), 1 - np.mean(symbols[1500:]))
        assert outcome.accuracy > base
