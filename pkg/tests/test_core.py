import json

import numpy as np
import pytest

from confsel.core import (DataError, Dataset, LabeledSample, SelectionReport, SelectionTask,
                          ThresholdSpec, load_dataset, split_roles, write_dataset)


def _task(**kw):
    calib = Dataset(np.arange(6.0).reshape(3, 2), [1.0, 2.0, 3.0])
    test = Dataset(np.ones((2, 2)))
    base = dict(calibration=calib, test=test, thresholds=ThresholdSpec.constant(0.0))
    base.update(kw)
    return SelectionTask(**base)


class TestDataset:
    def test_shapes_and_readonly(self):
        d = Dataset([[1, 2], [3, 4]], [0.5, 1.5])
        assert d.n == 2 and d.dim == 2 and d.has_outcomes
        with pytest.raises(ValueError):
            d.X[0, 0] = 9.0

    def test_vector_covariates_become_column(self):
        assert Dataset([1.0, 2.0, 3.0]).X.shape == (3, 1)

    def test_length_mismatch(self):
        with pytest.raises(DataError, match="y has 1 entries"):
            Dataset([[1.0], [2.0]], [1.0])

    def test_nonfinite_rejected(self):
        with pytest.raises(DataError):
            Dataset([[np.nan]], [1.0])
        with pytest.raises(DataError):
            Dataset([[1.0]], [np.inf])

    def test_without_outcomes_keeps_hidden(self):
        d = Dataset([[1.0], [2.0]], [3.0, 4.0]).without_outcomes()
        assert d.y is None
        np.testing.assert_array_equal(d.hidden, [3.0, 4.0])

    def test_samples_roundtrip(self):
        d = Dataset([[1.0, 2.0], [3.0, 4.0]], [5.0, 6.0])
        back = Dataset.from_samples(d.samples)
        np.testing.assert_array_equal(back.X, d.X)
        np.testing.assert_array_equal(back.y, d.y)

    def test_from_samples_mixed_outcomes(self):
        with pytest.raises(DataError):
            Dataset.from_samples([LabeledSample(np.array([1.0]), 1.0), LabeledSample(np.array([2.0]))])


class TestThresholdSpec:
    def test_constant_expands(self):
        np.testing.assert_array_equal(ThresholdSpec.constant(2.0).expand(3), [2.0, 2.0, 2.0])

    def test_per_unit_length_checked(self):
        with pytest.raises(ValueError, match="2 thresholds for 3"):
            ThresholdSpec.per_unit([1.0, 2.0]).expand(3)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            ThresholdSpec(np.array([1.0]), "weird")


class TestSelectionTask:
    def test_defaults(self):
        t = _task()
        assert t.m == 2 and t.delta == 0.5

    @pytest.mark.parametrize("a", [0.0, 1.0, 1.5, -0.1])
    def test_target_range(self, a):
        with pytest.raises(ValueError, match="target_fdr"):
            _task(target_fdr=a)

    def test_negative_delta(self):
        with pytest.raises(ValueError, match="delta"):
            _task(delta=-1)

    def test_visible_test_outcomes_rejected(self):
        with pytest.raises(ValueError, match="test outcomes"):
            _task(test=Dataset(np.ones((2, 2)), [1.0, 2.0]))

    def test_weights_validated(self):
        with pytest.raises(ValueError, match="weights"):
            _task(weights=[1.0, 0.0, 1.0])
        with pytest.raises(ValueError, match="3 entries"):
            _task(test_weights=[1.0, 1.0, 1.0])

    def test_threshold_count(self):
        with pytest.raises(ValueError):
            _task(thresholds=ThresholdSpec.per_unit([1.0, 2.0, 3.0]))


class TestReport:
    def test_json_roundtrip(self):
        r = SelectionReport([2, 0], [0.5, 0.5, 0.5], [0.1, 0.9, 0.2], "np",
                            diagnostics={"k": np.int64(3), "f": np.array([1.0, 2.0])})
        d = json.loads(r.to_json())
        back = SelectionReport.from_dict(d)
        np.testing.assert_array_equal(back.selected, [0, 2])
        assert back.method_tag == "np" and back.diagnostics == {"k": 3, "f": [1.0, 2.0]}
        np.testing.assert_array_equal(back.mask, [True, False, True])


class TestCsv:
    def test_roundtrip_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        d = Dataset(rng.normal(size=(5, 2)), rng.normal(size=5))
        p = tmp_path / "d.csv"
        write_dataset(d, p, ["a", "b"], "out")
        back = load_dataset(p, ["a", "b"], "out")
        np.testing.assert_array_equal(back.X, d.X)
        np.testing.assert_array_equal(back.y, d.y)

    def test_default_covariates_exclude_outcome(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("x1,y,x2\n1,2,3\n4,5,6\n")
        d = load_dataset(p, outcome="y")
        np.testing.assert_array_equal(d.X, [[1, 3], [4, 6]])
        np.testing.assert_array_equal(d.y, [2, 5])

    def test_errors_name_row_and_column(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("x1,y\n1,2\n3,abc\n")
        with pytest.raises(DataError, match="row 2, column y"):
            load_dataset(p, outcome="y")

    def test_ragged_row(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("x1,y\n1,2\n3\n")
        with pytest.raises(DataError, match="row 2"):
            load_dataset(p, outcome="y")

    def test_missing_column(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("x1,y\n1,2\n")
        with pytest.raises(DataError, match="zz"):
            load_dataset(p, ["zz"], "y")

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="no such file"):
            load_dataset(tmp_path / "nope.csv")

    def test_nan_cell(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("x1\nnan\n")
        with pytest.raises(DataError, match="non-finite"):
            load_dataset(p)


class TestSplit:
    def test_sizes_and_disjoint(self):
        d = Dataset(np.arange(100.0)[:, None], np.arange(100.0))
        tr, ca, te = split_roles(d, (0.5, 0.3, 0.2), seed=1)
        assert (tr.n, ca.n, te.n) == (50, 30, 20)
        assert te.y is None
        ids = np.concatenate([tr.X[:, 0], ca.X[:, 0], te.X[:, 0]])
        assert np.unique(ids).size == 100
        np.testing.assert_array_equal(te.hidden, te.X[:, 0])

    def test_deterministic(self):
        d = Dataset(np.arange(20.0)[:, None], np.arange(20.0))
        a = split_roles(d, (0.4, 0.4, 0.2), 3)
        b = split_roles(d, (0.4, 0.4, 0.2), 3)
        for u, v in zip(a, b):
            np.testing.assert_array_equal(u.X, v.X)

    def test_bad_fractions(self):
        d = Dataset(np.arange(10.0)[:, None], np.arange(10.0))
        with pytest.raises(ValueError, match="sum"):
            split_roles(d, (0.6, 0.3, 0.2), 0)
        with pytest.raises(ValueError, match="empty"):
            split_roles(d, (0.5, 0.45, 0.05), 0)
