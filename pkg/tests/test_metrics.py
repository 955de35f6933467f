"""Metric series: bucketing semantics, serialization round trips, and
input validation."""

import pytest

from scoutsim import metrics


def _row(t, v):
    return (t,) + (v,) * (len(metrics.COLUMNS) - 1)


class TestBucketing:
    def test_two_samples_one_bin_keeps_last(self):
        out = metrics.bucket_metrics([_row(0.3, 1.0), _row(1.9, 2.0)], 2.0)
        assert out == [_row(0.0, 2.0)]

    def test_gap_forward_fills(self):
        out = metrics.bucket_metrics([_row(0.5, 1.0), _row(6.5, 9.0)], 2.0)
        assert [r[0] for r in out] == [0.0, 2.0, 4.0, 6.0]
        assert [r[1] for r in out] == [1.0, 1.0, 1.0, 9.0]

    def test_empty_is_empty(self):
        assert metrics.bucket_metrics([], 2.0) == []

    def test_bin_edges(self):
        # a sample exactly on a bin edge belongs to that bin
        out = metrics.bucket_metrics([_row(0.0, 1.0), _row(2.0, 5.0)], 2.0)
        assert out == [_row(0.0, 1.0), _row(2.0, 5.0)]

    def test_nonmonotonic_raises(self):
        with pytest.raises(ValueError):
            metrics.bucket_metrics([_row(2.0, 1.0), _row(1.0, 2.0)], 2.0)


class TestTrialMetrics:
    def test_add_sample_and_final(self):
        tm = metrics.TrialMetrics("w", "A", 3)
        tm.add_sample(*_row(0.0, 1.0))
        tm.add_sample(*_row(0.5, 2.0))
        f = tm.final()
        assert f["world"] == "w" and f["method"] == "A" and f["seed"] == 3
        assert f["t"] == 0.5
        assert f["status"] == metrics.STATUS_OK

    def test_nondecreasing_enforced(self):
        tm = metrics.TrialMetrics("w", "A", 3)
        tm.add_sample(*_row(1.0, 1.0))
        with pytest.raises(ValueError):
            tm.add_sample(*_row(0.5, 1.0))

    def test_series(self):
        tm = metrics.TrialMetrics("w", "A", 3)
        tm.add_sample(*_row(0.0, 1.0))
        tm.add_sample(*_row(0.5, 2.0))
        assert tm.series("t") == [0.0, 0.5]
        assert tm.series("coverage") == [1.0, 2.0]


class TestSerialization:
    def test_csv_round_trip(self, tmp_path):
        rows = [_row(0.0, 1.25), _row(2.0, 3.5)]
        p = tmp_path / "m.csv"
        metrics.write_csv(p, rows)
        header, back = metrics.read_csv(p)
        assert tuple(header) == metrics.COLUMNS
        assert back == rows

    def test_summary_round_trip(self, tmp_path):
        s = {"world": "apartment", "method": "A", "seed": 7, "status": "ok",
             "coverage": 0.851234, "loop_closures": 12.0}
        p = tmp_path / "summary.txt"
        metrics.write_summary(p, s)
        back = metrics.read_summary(p)
        assert back["world"] == "apartment"
        assert back["seed"] == 7
        assert back["coverage"] == pytest.approx(0.851234)
        assert back["loop_closures"] == pytest.approx(12.0)

    def test_summary_float_precision(self, tmp_path):
        p = tmp_path / "s.txt"
        metrics.write_summary(p, {"x": 1.23456789})
        assert "1.234568" in p.read_text()
