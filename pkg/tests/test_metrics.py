import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fedkf.config import load_preset
from fedkf.metrics import MetricShapeError, report, rmse, rssi_accuracy, rssi_accuracy_raw
from fedkf.simnet import LinkRecord, RoundTrace, run_experiment

finite = st.floats(-1e3, 1e3)
paired = st.lists(st.tuples(finite, finite), min_size=1, max_size=40)


class TestRmse:
    def test_identical(self):
        assert rmse([1.0, -2.0, 3.5], [1.0, -2.0, 3.5]) == 0.0

    def test_hand_value(self):
        assert rmse([1, 2], [0, 0]) == pytest.approx(math.sqrt(5 / 2))
        assert rmse([1, 2], [0, 0]) == pytest.approx(1.5811, abs=1e-4)

    def test_single(self):
        assert rmse([3], [0]) == 3.0

    @pytest.mark.parametrize("p,o", [([], []), ([1, 2], [1])])
    def test_shape(self, p, o):
        with pytest.raises(MetricShapeError):
            rmse(p, o)

    @given(paired, st.randoms())
    def test_symmetries(self, pairs, rnd):
        p, o = map(list, zip(*pairs))
        base = rmse(p, o)
        assert rmse(o, p) == pytest.approx(base)
        assert rmse([-v for v in p], [-v for v in o]) == pytest.approx(base)
        idx = list(range(len(p)))
        rnd.shuffle(idx)
        assert rmse([p[i] for i in idx], [o[i] for i in idx]) == pytest.approx(base)


class TestAccuracy:
    def test_exact(self):
        assert rssi_accuracy(-60.0, -60.0) == 100.0

    def test_hand_value(self):
        assert rssi_accuracy(-60.0, -57.0) == pytest.approx(95.0)

    def test_clamped(self):
        assert rssi_accuracy_raw(-57.0, -114.0) == pytest.approx(0.0)
        assert rssi_accuracy(-57.0, -114.0) == 0.0
        assert rssi_accuracy_raw(-57.0, -200.0) < 0
        assert rssi_accuracy(-57.0, -200.0) == 0.0

    def test_domain(self):
        with pytest.raises(ZeroDivisionError):
            rssi_accuracy(0.0, -50.0)

    @given(st.floats(-120, -1), st.floats(-120, -1), st.floats(0.01, 100))
    def test_scale_invariant(self, t, m, c):
        assert rssi_accuracy_raw(c * t, c * m) == pytest.approx(rssi_accuracy_raw(t, m), abs=1e-9)

    @given(st.floats(-120, -1))
    def test_self_is_100(self, t):
        assert rssi_accuracy(t, t) == 100.0


def _trace(k, est, true):
    link = LinkRecord("fog-1", "edge-1", -57.0, -57.0, est, true, -57.0)
    return RoundTrace(k, "fkf", links=[link])


class TestReport:
    def test_single_round_exact(self):
        rep = report([_trace(0, 1.0, 1.0)])
        assert rep.mean_rmse == 0.0 and rep.samples == 1 and rep.mean_accuracy == 100.0

    def test_burn_in_skipped(self):
        rep = report([_trace(0, 5.0, 1.0), _trace(1, 1.0, 1.0)], burn_in=1)
        assert rep.mean_rmse == 0.0 and rep.samples == 1

    def test_empty(self):
        with pytest.raises(MetricShapeError):
            report([])

    def test_noiseless_run(self):
        cfg = load_preset().replace(
            fogs=[
                {"id": "fog-1", "x": 1.0, "y": 0.0},
                {"id": "fog-2", "x": 0.0, "y": 10 ** 0.05},
                {"id": "fog-3", "x": -(10 ** 0.1), "y": 0.0},
                {"id": "fog-4", "x": 0.0, "y": -(10 ** 0.15)},
            ],
            channel={"n": 2.0, "A": 57.0, "sigma": 0.0, "spike_prob": 0.0, "spike_mag": 8.0},
            rounds=120,
        )
        for mode in ("fkf", "skf"):
            rep = report(run_experiment(cfg, mode), cfg.burn_in)
            assert rep.mean_rmse <= 0.01
            assert rep.mean_accuracy >= 99.9
            assert len(rep.per_distance_rmse) == 4

    def test_rows_layout(self):
        rep = report([_trace(0, 1.1, 1.0)])
        rows = rep.rows()
        assert rows[-1][1] == "all" and rows[0][:2] == ("fkf", 1.0)
        assert len(rep.per_round_rmse) == 1
