import numpy as np
import pytest

from agents.dataset_agent import CountMatrix, DatasetAgent
from agents.mapping_agent import AssignedEvent
from errors import DatasetError

HOUR = 3600


def assigned(pairs):
    return [AssignedEvent(event_id=i, region_id=r, timestamp=t) for i, (r, t) in enumerate(pairs)]


def matrix(n_regions, n_bins, seed=0, rate=0.4):
    rng = np.random.default_rng(seed)
    return CountMatrix(counts=rng.poisson(rate, size=(n_regions, n_bins)), bin_width=HOUR, t0=0)


class TestBinEvents:
    def test_hourly_bins(self):
        cm = DatasetAgent().bin_events(assigned([(0, 0), (0, 1800), (0, 3600)]), n_regions=1, bin_width=HOUR)
        np.testing.assert_array_equal(cm.counts, [[2, 1]])
        assert cm.n_bins == 2

    def test_single_event(self):
        cm = DatasetAgent().bin_events(assigned([(0, 12345)]), n_regions=1, bin_width=HOUR)
        np.testing.assert_array_equal(cm.counts, [[1]])

    def test_only_unassigned_events(self):
        with pytest.raises(DatasetError, match="bbox"):
            DatasetAgent().bin_events(assigned([(None, 0), (None, 10)]), n_regions=2)

    def test_start_aligned_to_bin_width(self):
        cm = DatasetAgent().bin_events(assigned([(1, 5 * HOUR + 17), (0, 7 * HOUR)]), n_regions=2, bin_width=HOUR)
        assert cm.t0 == 5 * HOUR
        assert cm.bin_start(2) == 7 * HOUR
        np.testing.assert_array_equal(cm.counts, [[0, 0, 1], [1, 0, 0]])

    def test_outside_events_excluded_and_total_conserved(self):
        rng = np.random.default_rng(51)
        regions = rng.integers(-1, 6, size=2000)
        stamps = rng.integers(0, 30 * 86400, size=2000)
        events = assigned([(None if r < 0 else int(r), int(t)) for r, t in zip(regions, stamps)])
        cm = DatasetAgent().bin_events(events, n_regions=6)
        assert cm.counts.sum() == np.count_nonzero(regions >= 0)
        np.testing.assert_array_equal(cm.totals(), np.bincount(regions[regions >= 0], minlength=6))

    def test_halving_bin_width(self):
        rng = np.random.default_rng(52)
        agent = DatasetAgent()
        for _ in range(20):
            stamps = np.append(rng.integers(0, 50 * 86400, size=300), 0)
            events = assigned([(int(r), int(t)) for r, t in zip(rng.integers(0, 4, size=301), stamps)])
            coarse = agent.bin_events(events, 4, bin_width=86400)
            fine = agent.bin_events(events, 4, bin_width=43200)
            assert abs(fine.n_bins - 2 * coarse.n_bins) <= 1
            assert fine.counts.sum() == coarse.counts.sum()

    def test_invalid_matrix(self):
        with pytest.raises(DatasetError):
            CountMatrix(counts=np.zeros((2, 0)), bin_width=HOUR, t0=0)
        with pytest.raises(DatasetError):
            CountMatrix(counts=[[1, -1]], bin_width=HOUR, t0=0)

    def test_csv_and_sidecar_restore_matrix(self):
        cm = matrix(5, 12, seed=3)
        cm.t0 = 1577836800
        restored = CountMatrix.from_files(cm.to_csv(), '{"t0": 1577836800, "bin_width": 3600, "n_regions": 5, "T": 12}')
        np.testing.assert_array_equal(restored.counts, cm.counts)
        assert restored.sidecar() == cm.sidecar()

    def test_sidecar_mismatch(self):
        cm = matrix(2, 4)
        with pytest.raises(DatasetError):
            CountMatrix.from_files(cm.to_csv(), '{"t0": 0, "bin_width": 3600, "n_regions": 3, "T": 4}')


class TestMakeWindows:
    def test_sample_count(self):
        samples = DatasetAgent().make_windows(matrix(3, 10), window=3)
        assert len(samples) == 7
        assert samples[0].input.shape == (3, 3)

    def test_two_bins(self):
        cm = CountMatrix(counts=[[1, 0], [0, 4]], bin_width=HOUR, t0=0)
        samples = DatasetAgent().make_windows(cm, window=1)
        assert len(samples) == 1
        np.testing.assert_array_equal(samples[0].target, [0, 1])

    def test_target_is_occurrence(self):
        cm = CountMatrix(counts=[[0, 5]], bin_width=HOUR, t0=0)
        sample = DatasetAgent().make_windows(cm, window=1)[0]
        np.testing.assert_array_equal(sample.target, [1])
        np.testing.assert_array_equal(sample.input, [[0]])
        assert sample.last_bin == 1

    def test_window_too_long(self):
        with pytest.raises(DatasetError, match="smaller"):
            DatasetAgent().make_windows(matrix(2, 5), window=5)

    def test_inputs_are_raw_counts(self):
        cm = matrix(4, 20, seed=5, rate=2.0)
        for s in DatasetAgent().make_windows(cm, window=4):
            np.testing.assert_array_equal(s.input, cm.counts[:, s.t:s.t + 4])
            np.testing.assert_array_equal(s.target, cm.counts[:, s.t + 4] > 0)


class TestChronologicalSplit:
    def test_hundred_bins(self):
        agent = DatasetAgent(window=3)
        cm = matrix(2, 100)
        ds = agent.chronological_split(agent.make_windows(cm), n_bins=cm.n_bins)
        assert ds.boundaries == (70, 85)
        assert [s.t for s in ds.train] == list(range(0, 67))
        assert [s.t for s in ds.val] == list(range(70, 82))
        assert [s.t for s in ds.test] == list(range(85, 97))
        assert ds.dropped == 97 - 67 - 12 - 12

    def test_twenty_bins(self):
        agent = DatasetAgent(window=1)
        cm = matrix(2, 20)
        ds = agent.chronological_split(agent.make_windows(cm), n_bins=20)
        assert ds.boundaries == (14, 17)

    def test_all_train_fractions_rejected(self):
        agent = DatasetAgent(window=3)
        samples = agent.make_windows(matrix(2, 100))
        with pytest.raises(DatasetError, match="empty"):
            agent.chronological_split(samples, fractions=(1.0, 0.0, 0.0))

    def test_bad_fractions(self):
        agent = DatasetAgent(window=3)
        with pytest.raises(DatasetError):
            agent.chronological_split(agent.make_windows(matrix(2, 100)), fractions=(0.5, 0.5, 0.5))

    def test_too_short_series(self):
        agent = DatasetAgent(window=3)
        with pytest.raises(DatasetError, match="smaller window"):
            agent.chronological_split(agent.make_windows(matrix(2, 8)), n_bins=8)

    def test_no_leakage(self):
        rng = np.random.default_rng(53)
        for _ in range(50):
            T = int(rng.integers(80, 300))
            W = int(rng.integers(1, 8))
            agent = DatasetAgent(window=W)
            ds = agent.chronological_split(agent.make_windows(matrix(2, T)), n_bins=T)
            max_train = max(s.last_bin for s in ds.train)
            min_val = min(s.t for s in ds.val)
            max_val = max(s.last_bin for s in ds.val)
            min_test = min(s.t for s in ds.test)
            assert max_train < min_val
            assert max_val < min_test
            assert len(ds.train) + len(ds.val) + len(ds.test) + ds.dropped == T - W

    def test_split_lookup(self):
        agent = DatasetAgent(window=3)
        ds = agent.chronological_split(agent.make_windows(matrix(2, 100)))
        assert ds.split('val') is ds.val
        with pytest.raises(DatasetError):
            ds.split('holdout')

    def test_describe(self):
        agent = DatasetAgent(window=3)
        ds = agent.chronological_split(agent.make_windows(matrix(4, 100, rate=0.5)))
        report = agent.describe(ds)
        assert report['boundaries'] == [70, 85]
        assert report['train']['samples'] == 67
        labels = np.concatenate([s.target for s in ds.test])
        assert report['test']['positive_rate'] == pytest.approx(labels.mean(), abs=1e-6)
