import numpy as np
import pytest

from cospike import (
    DEFAULT_FRAME_LENGTH,
    DEFAULT_PRE_PEAK,
    Dataset,
    ParseError,
    ShapeError,
    SpikeFrame,
    detect_spikes,
    load_dataset,
    save_dataset,
    synthesize_dataset,
    synthesize_trace,
)


class TestSynthesizeDataset:
    def test_shape_and_labels(self):
        ds = synthesize_dataset(units=3, frames_per_unit=7, n=96, seed=1)
        assert len(ds) == 21
        assert ds.frame_length == 96
        assert ds.labeled
        labels = ds.labels()
        values, counts = np.unique(labels, return_counts=True)
        assert values.tolist() == [0, 1, 2]
        assert counts.tolist() == [7, 7, 7]

    def test_prefix_is_class_balanced(self):
        # round-robin interleave: any prefix of length 3k holds k per unit
        ds = synthesize_dataset(units=3, frames_per_unit=10, n=64, seed=2)
        head = ds.labels()[:9]
        assert np.bincount(head, minlength=3).tolist() == [3, 3, 3]

    def test_deterministic_per_seed(self):
        a = synthesize_dataset(units=3, frames_per_unit=4, n=64, seed=9)
        b = synthesize_dataset(units=3, frames_per_unit=4, n=64, seed=9)
        c = synthesize_dataset(units=3, frames_per_unit=4, n=64, seed=10)
        assert np.array_equal(a.to_matrix(), b.to_matrix())
        assert not np.array_equal(a.to_matrix(), c.to_matrix())

    def test_peak_near_pre_peak_with_jitter(self):
        ds = synthesize_dataset(units=3, frames_per_unit=20, n=128, seed=3,
                                jitter=2)
        peaks = np.argmax(np.abs(ds.to_matrix()), axis=1)
        assert np.all(np.abs(peaks - DEFAULT_PRE_PEAK) <= 2)

    def test_no_jitter_pins_peak(self):
        ds = synthesize_dataset(units=3, frames_per_unit=5, n=128, seed=4,
                                jitter=0, scale_jitter=0.0, noise_sigma=0.0)
        peaks = np.argmax(np.abs(ds.to_matrix()), axis=1)
        assert np.all(peaks == DEFAULT_PRE_PEAK)

    def test_scale_jitter_bounds_amplitude_spread(self):
        ds = synthesize_dataset(units=1, frames_per_unit=50, n=128, seed=5,
                                jitter=0, scale_jitter=0.1)
        amps = np.abs(ds.to_matrix()).max(axis=1)
        assert amps.max() <= 1.1 + 1e-9
        assert amps.min() >= 0.9 - 1e-9
        assert amps.std() > 0

    def test_noise_level(self):
        quiet = synthesize_dataset(units=1, frames_per_unit=10, n=128, seed=6)
        noisy = synthesize_dataset(units=1, frames_per_unit=10, n=128, seed=6,
                                   noise_sigma=0.05)
        tail_q = quiet.to_matrix()[:, :10]
        tail_n = noisy.to_matrix()[:, :10]
        assert np.abs(tail_q).max() < 1e-12  # pre-onset is silent
        assert 0.02 < np.std(tail_n) < 0.10

    def test_rejects_zero_units(self):
        with pytest.raises(ValueError):
            synthesize_dataset(units=0)


class TestDataset:
    def test_split(self):
        ds = synthesize_dataset(units=2, frames_per_unit=5, n=64, seed=0)
        head, tail = ds.split(4)
        assert len(head) == 4 and len(tail) == 6
        assert np.array_equal(head.to_matrix(), ds.to_matrix()[:4])

    def test_mixed_lengths_rejected(self):
        with pytest.raises(ShapeError):
            Dataset(frames=(SpikeFrame(samples=np.zeros(8)),
                            SpikeFrame(samples=np.zeros(9))))

    def test_labels_require_all_labeled(self):
        ds = Dataset(frames=(SpikeFrame(samples=np.zeros(4), label=0),
                             SpikeFrame(samples=np.zeros(4))))
        assert not ds.labeled
        with pytest.raises(ValueError):
            ds.labels()


class TestDetection:
    def test_recovers_planted_spikes(self):
        trace, positions = synthesize_trace(num_spikes=40, duration_s=20.0,
                                            noise_sigma=0.05, seed=7)
        # 5 sigma: expected false-alarm count over 480k samples is ~0.1
        frames = detect_spikes(trace, threshold_multiple=5.0)
        detected = np.array([f.source_index for f in frames])
        # every detection is near a planted position
        matched = 0
        for d in detected:
            if np.min(np.abs(positions - d)) <= 3:
                matched += 1
        assert matched / len(positions) > 0.9
        assert len(detected) <= len(positions) + 2

    def test_frames_are_peak_aligned(self):
        trace, _ = synthesize_trace(num_spikes=30, duration_s=15.0,
                                    noise_sigma=0.03, seed=8)
        frames = detect_spikes(trace)
        assert frames, "no spikes detected"
        for f in frames:
            assert len(f) == DEFAULT_FRAME_LENGTH
            assert int(np.argmax(np.abs(f.samples))) == DEFAULT_PRE_PEAK

    def test_empty_trace_rejected(self):
        from cospike import RawTrace
        with pytest.raises(ShapeError):
            detect_spikes(RawTrace(samples=np.array([])))


class TestFileFormats:
    def test_csv_round_trip_bit_exact(self, tmp_path, small_dataset):
        path = tmp_path / "ds.csv"
        save_dataset(small_dataset, path)
        back = load_dataset(path)
        assert np.array_equal(back.to_matrix(), small_dataset.to_matrix())
        assert np.array_equal(back.labels(), small_dataset.labels())
        header = path.read_text().splitlines()[0]
        assert header == "# n=64 labeled=1"

    def test_csv_unlabeled(self, tmp_path):
        frames = tuple(SpikeFrame(samples=np.arange(4, dtype=float) + i)
                       for i in range(3))
        ds = Dataset(frames=frames)
        path = tmp_path / "plain.csv"
        save_dataset(ds, path)
        back = load_dataset(path)
        assert not back.labeled
        assert np.array_equal(back.to_matrix(), ds.to_matrix())

    def test_binary_round_trip_float32(self, tmp_path, small_dataset):
        path = tmp_path / "ds.bin"
        save_dataset(small_dataset, path, fmt="raw-binary")
        back = load_dataset(path, fmt="raw-binary")
        expected = small_dataset.to_matrix().astype(np.float32).astype(float)
        assert np.array_equal(back.to_matrix(), expected)
        assert not back.labeled  # binary format carries no labels
        with path.open("rb") as fh:
            assert fh.read(8) == b"NSPK0001"

    def test_csv_malformed_row_reports_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("# n=3 labeled=0\n1.0,2.0,3.0\n1.0,oops,3.0\n")
        # message carries the offending file line (1-based, counting header)
        with pytest.raises(ParseError, match=":3:"):
            load_dataset(path)

    def test_csv_wrong_width_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("# n=3 labeled=0\n1.0,2.0,3.0\n1.0,2.0\n")
        with pytest.raises(ParseError):
            load_dataset(path)

    def test_unknown_format_rejected(self, tmp_path, small_dataset):
        with pytest.raises(ValueError):
            save_dataset(small_dataset, tmp_path / "x", fmt="hdf5")
