import numpy as np
import pytest

from antiphon.dataset import (
    DT_CAP,
    DT_MIN,
    Dataset,
    RawLog,
    compute_deltas,
    load_dataset,
    make_windows,
    read_log_csv,
    synthetic_sine_dataset,
)
from antiphon.errors import DataError


def raw(times, values):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[0] != len(times):
        values = values.T
    return RawLog(timestamps=np.asarray(times, dtype=float), values=values)


class TestComputeDeltas:
    def test_plain_subtraction_drops_first_row(self):
        session = compute_deltas(raw([0.0, 0.5, 1.2], [[0.1], [0.2], [0.3]]))
        assert session.shape == (2, 2)
        assert np.allclose(session[:, 0], [0.5, 0.7])
        assert np.allclose(session[:, 1], [0.2, 0.3])

    def test_long_gap_capped(self):
        session = compute_deltas(raw([0.0, 60.0], [[0.1], [0.2]]))
        assert session[0, 0] == DT_CAP

    def test_zero_gap_floored(self):
        session = compute_deltas(raw([1.0, 1.0], [[0.1], [0.2]]))
        assert session[0, 0] == pytest.approx(DT_MIN)

    def test_out_of_range_value_clamped_with_warning(self, caplog):
        with caplog.at_level("WARNING"):
            session = compute_deltas(raw([0.0, 0.1], [[0.5], [1.2]]))
        assert session[0, 1] == 1.0
        assert any("clamped" in r.message for r in caplog.records)

    def test_too_few_rows(self):
        with pytest.raises(DataError, match="2 rows"):
            compute_deltas(raw([0.0], [[0.1]]))

    def test_non_monotonic_names_row(self):
        with pytest.raises(DataError, match="row 2"):
            compute_deltas(raw([0.0, 1.0, 0.5], [[0.1], [0.2], [0.3]]))


class TestWindows:
    def session_of(self, length, dim=2, fill=0.5):
        s = np.full((length, dim), fill, dtype=np.float32)
        s[:, 0] = 0.05
        return s

    def test_window_count_formula(self):
        ds = Dataset(sessions=[self.session_of(52)])
        x, y = make_windows(ds, seq_len=50)
        assert len(x) == 2

    def test_exact_seq_len_session_yields_nothing(self):
        ds = Dataset(sessions=[self.session_of(50)])
        x, _ = make_windows(ds, seq_len=50)
        assert len(x) == 0

    def test_windows_never_span_sessions(self):
        ds = Dataset(sessions=[self.session_of(60, fill=0.1), self.session_of(60, fill=0.9)])
        x, y = make_windows(ds, seq_len=50)
        assert len(x) == 20
        # each window is pure: values all 0.1 or all 0.9
        for w in x:
            vals = np.unique(w[:, 1])
            assert len(vals) == 1

    def test_targets_are_inputs_shifted_by_one(self):
        session = np.column_stack(
            [np.full(8, 0.05), np.linspace(0, 1, 8)]
        ).astype(np.float32)
        ds = Dataset(sessions=[session])
        x, y = make_windows(ds, seq_len=3)
        assert len(x) == 5
        assert np.array_equal(x[0], session[0:3])
        assert np.array_equal(y[0], session[1:4])

    def test_exhaustive_count_invariant(self):
        rng = np.random.default_rng(0)
        lengths = [3, 50, 51, 77, 120]
        ds = Dataset(sessions=[self.session_of(n) for n in lengths])
        seq_len = int(rng.integers(1, 60))
        x, _ = make_windows(ds, seq_len)
        assert len(x) == sum(max(0, n - seq_len) for n in lengths)


class TestCsvIo:
    def test_round_trip(self, tmp_path):
        p = tmp_path / "session.csv"
        p.write_text("time,x1,x2\n0.000000,0.100000,0.900000\n0.500000,0.200000,0.800000\n")
        log = read_log_csv(p)
        assert np.allclose(log.timestamps, [0.0, 0.5])
        assert log.values.shape == (2, 2)

    def test_bad_header(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("when,x1\n0,0.5\n")
        with pytest.raises(DataError, match="header"):
            read_log_csv(p)

    def test_wrong_arity_row(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("time,x1\n0,0.5\n1,0.5,0.7\n")
        with pytest.raises(DataError, match="columns"):
            read_log_csv(p)

    def test_load_dataset_skips_prediction_logs(self, tmp_path):
        (tmp_path / "a.csv").write_text("time,x1\n0,0.1\n0.5,0.2\n1.0,0.3\n")
        (tmp_path / "a-predictions.csv").write_text("time,x1\n0,0.9\n0.5,0.9\n1.0,0.9\n")
        ds = load_dataset(tmp_path, dimension=2)
        assert len(ds.sessions) == 1
        assert not np.any(ds.sessions[0][:, 1] == np.float32(0.9))

    def test_load_dataset_empty_dir(self, tmp_path):
        with pytest.raises(DataError, match="no usable"):
            load_dataset(tmp_path, dimension=2)


class TestSynthetic:
    def test_shape_and_ranges(self):
        ds = synthetic_sine_dataset(500, dt=0.05)
        session = ds.sessions[0]
        assert session.shape == (500, 2)
        assert np.all(session[:, 0] == np.float32(0.05))
        assert session[:, 1].min() >= 0 and session[:, 1].max() <= 1
