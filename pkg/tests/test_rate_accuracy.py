import csv
import math

import numpy as np
import pytest

from pdfa_bench.machine import (
    Pdfa,
    biased_coin,
    even_process,
    golden_mean,
    optimal_predictor_point,
    stationary_distribution,
)
from pdfa_bench.rate_accuracy import (
    BaPoint,
    ExcludedMachineError,
    RateAccuracyCurve,
    accuracy_matrix,
    ba_solve,
    normalized_distance,
    normalized_distortion,
    trace_curve,
    write_curve_csv,
)

EVEN_HALF_R_OPT = 0.6365141682948129
EVEN_04_R_OPT = 0.5982695885852549


def noisy_period_two():
    return Pdfa(
        states=("A", "B"),
        transitions={
            ("A", 0): ("A", 0.2), ("A", 1): ("B", 0.8),
            ("B", 0): ("A", 0.7), ("B", 1): ("B", 0.3),
        },
        machine_id="noisy-p2",
    )


def grid_frontier_rate(pi, a, accuracies, n=2000):
    """Brute-force frontier for two-state machines.

    Scans an n-by-n grid of binary channels (p(0|A), p(0|B)), computes the
    (accuracy, rate) cloud in closed form, and reduces it to the lower
    envelope: minimum achievable rate at each accuracy level.
    """
    g = np.linspace(0.0, 1.0, n)
    pA0, pB0 = np.meshgrid(g, g, indexing="ij")
    acc = (pi[0] * (pA0 * a[0, 0] + (1 - pA0) * a[0, 1])
           + pi[1] * (pB0 * a[1, 0] + (1 - pB0) * a[1, 1]))
    q0 = pi[0] * pA0 + pi[1] * pB0

    def term(p, q):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0) / q), 0.0)

    rate = (pi[0] * (term(pA0, q0) + term(1 - pA0, 1 - q0))
            + pi[1] * (term(pB0, q0) + term(1 - pB0, 1 - q0)))
    accf, ratef = acc.ravel(), rate.ravel()
    order = np.lexsort((ratef, accf))
    accf, ratef = accf[order], ratef[order]
    uacc, idx = np.unique(accf, return_index=True)
    urate = ratef[idx]
    urate = np.minimum.accumulate(urate[::-1])[::-1]
    return np.interp(accuracies, uacc, urate)


class TestBaSolve:
    def test_beta_zero_is_rate_free(self):
        m = even_process(0.4)
        pt = ba_solve(stationary_distribution(m), accuracy_matrix(m), 0.0)
        assert pt.converged
        assert pt.rate_nats == 0.0
        assert pt.accuracy == pytest.approx(0.5, abs=1e-12)

    def test_large_beta_approaches_optimal_point(self):
        m = even_process(0.4)
        pi = stationary_distribution(m)
        pt = ba_solve(pi, accuracy_matrix(m), 1e3)
        r_opt, a_opt = optimal_predictor_point(m, pi)
        assert pt.accuracy == pytest.approx(a_opt, abs=1e-3)
        assert pt.rate_nats == pytest.approx(r_opt, abs=5e-3)

    def test_channel_rows_normalized(self):
        m = golden_mean(0.5)
        pt = ba_solve(stationary_distribution(m), accuracy_matrix(m), 5.0)
        np.testing.assert_allclose(pt.channel.sum(axis=1), 1.0, atol=1e-12)

    def test_rate_nonnegative_across_betas(self):
        m = noisy_period_two()
        pi = stationary_distribution(m)
        a = accuracy_matrix(m)
        for beta in [0.0, 0.01, 0.3, 1.0, 7.0, 50.0, 1e3]:
            assert ba_solve(pi, a, beta).rate_nats >= 0.0


class TestTraceCurve:
    @pytest.mark.parametrize("machine", [
        even_process(0.5), even_process(0.4), golden_mean(0.5), noisy_period_two(),
    ])
    def test_matches_bruteforce_frontier(self, machine):
        pi = stationary_distribution(machine)
        curve = trace_curve(machine, pi)
        accs = np.array([p.accuracy for p in curve.points])
        rates = np.array([p.rate_nats for p in curve.points])
        expected = grid_frontier_rate(pi, accuracy_matrix(machine), accs)
        assert np.max(np.abs(rates - expected)) < 2e-3

    def test_points_sorted_and_monotone(self):
        m = even_process(0.4)
        curve = trace_curve(m, stationary_distribution(m))
        accs = [p.accuracy for p in curve.points]
        rates = [p.rate_nats for p in curve.points]
        assert accs == sorted(accs)
        assert rates == sorted(rates)

    def test_augmented_point_is_exact_optimum(self):
        m = even_process(0.4)
        pi = stationary_distribution(m)
        curve = trace_curve(m, pi)
        assert curve.augmented_point == optimal_predictor_point(m, pi)

    def test_accuracy_never_exceeds_optimum(self):
        m = golden_mean(0.3)
        pi = stationary_distribution(m)
        curve = trace_curve(m, pi)
        _, a_opt = optimal_predictor_point(m, pi)
        assert max(p.accuracy for p in curve.points) <= a_opt + 1e-9

    def test_flat_curve_for_symmetric_optimum(self):
        # when each state's best symbol is equally likely, accuracy is
        # achievable at zero rate and the traced frontier stays at rate 0
        m = even_process(0.5)
        curve = trace_curve(m, stationary_distribution(m))
        assert max(p.rate_nats for p in curve.points) < 1e-9
        assert curve.augmented_point[0] == pytest.approx(EVEN_HALF_R_OPT, abs=1e-12)

    def test_polyline_includes_augmented_point(self):
        m = even_process(0.4)
        pi = stationary_distribution(m)
        curve = trace_curve(m, pi)
        verts = curve.polyline()
        r_opt, a_opt = curve.augmented_point
        assert verts.shape[1] == 2
        assert np.all(np.diff(verts[:, 0]) >= 0)
        assert any(np.allclose(v, [a_opt, r_opt]) for v in verts)

    def test_custom_beta_grid_respected(self):
        m = even_process(0.4)
        pi = stationary_distribution(m)
        curve = trace_curve(m, pi, beta_grid=np.array([0.0]))
        assert len(curve.points) == 1
        assert curve.points[0].beta == 0.0


class TestNormalizedDistance:
    @staticmethod
    def toy_curve():
        pt = BaPoint(beta=0.0, rate_nats=0.0, accuracy=0.5,
                     channel=np.full((2, 2), 0.5), converged=True)
        return RateAccuracyCurve(points=(pt,), augmented_point=(1.0, 1.0))

    def test_point_on_vertex_is_zero(self):
        curve = self.toy_curve()
        assert normalized_distance((1.0, 1.0), curve, (1.0, 1.0)) == pytest.approx(0.0)

    def test_hand_computed_offset(self):
        # normalized vertices (0.5, 0) and (1, 1); query (acc 1, rate 0)
        # projects onto the segment at t = 0.2, distance sqrt(0.2)
        curve = self.toy_curve()
        d = normalized_distance((0.0, 1.0), curve, (1.0, 1.0))
        assert d == pytest.approx(math.sqrt(0.2), abs=1e-12)

    def test_normalization_uses_opt_point(self):
        curve = self.toy_curve()
        # same geometry after doubling both scales and the query point
        d1 = normalized_distance((0.0, 1.0), curve, (1.0, 1.0))
        pt = BaPoint(beta=0.0, rate_nats=0.0, accuracy=1.0,
                     channel=np.full((2, 2), 0.5), converged=True)
        doubled = RateAccuracyCurve(points=(pt,), augmented_point=(2.0, 2.0))
        d2 = normalized_distance((0.0, 2.0), doubled, (2.0, 2.0))
        assert d2 == pytest.approx(d1)

    def test_zero_rate_machine_excluded(self):
        m = biased_coin(0.7)
        pi = stationary_distribution(m)
        curve = trace_curve(m, pi)
        with pytest.raises(ExcludedMachineError):
            normalized_distance((0.0, 0.7), curve, optimal_predictor_point(m, pi))

    def test_traced_curve_points_are_near_zero(self):
        m = even_process(0.4)
        pi = stationary_distribution(m)
        curve = trace_curve(m, pi)
        opt = optimal_predictor_point(m, pi)
        for p in curve.points[::10]:
            d = normalized_distance((p.rate_nats, p.accuracy), curve, opt)
            assert d < 1e-9


class TestNormalizedDistortion:
    def test_at_optimum_is_zero(self):
        assert normalized_distortion(0.75, 0.75) == 0.0

    def test_twenty_percent_shortfall(self):
        assert normalized_distortion(0.6, 0.75) == pytest.approx(20.0)

    def test_above_optimum_goes_negative(self):
        assert normalized_distortion(0.8, 0.75) < 0.0

    def test_floor_at_minus_hundred(self):
        assert normalized_distortion(100.0, 1e-6) == -100.0


def test_write_curve_csv(tmp_path):
    m = even_process(0.4)
    pi = stationary_distribution(m)
    curve = trace_curve(m, pi)
    path = tmp_path / "curve.csv"
    write_curve_csv(curve, path)
    with path.open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["beta", "rate_nats", "accuracy", "kind"]
    assert rows[-1][3] == "optimal"
    assert float(rows[-1][1]) == curve.augmented_point[0]
    assert float(rows[-1][2]) == curve.augmented_point[1]
    assert len(rows) == len(curve.points) + 2
    for row in rows[1:-1]:
        assert row[3] == "ba"
        assert float(row[1]) >= 0.0


def test_even_04_optimal_rate_frozen_value():
    m = even_process(0.4)
    r_opt, a_opt = optimal_predictor_point(m, stationary_distribution(m))
    assert r_opt == pytest.approx(EVEN_04_R_OPT, abs=1e-13)
    assert a_opt == pytest.approx(5 / 7, abs=1e-13)
