import json
from pathlib import Path

import numpy as np
import pytest

from solsa.data import (DataError, Dataset, LabeledSequence, SyntheticTask, encode_input_frame,
                        generate_synthetic, load_dataset, save_dataset)

DATA_ROOT = Path(__file__).resolve().parents[1] / "data"


def write_layout(root, train_rows, test_rows=("0,1.0",), dim=1, classes=2, meta=None):
    root.mkdir(parents=True, exist_ok=True)
    meta = meta or {"dim": dim, "classes": classes, "format": "current",
                    "class_names": ["a", "b"][:classes]}
    (root / "meta.json").write_text(json.dumps(meta))
    (root / "train.csv").write_text("\n".join(train_rows) + "\n")
    (root / "test.csv").write_text("\n".join(test_rows) + "\n")
    return root


class TestLoad:
    def test_variable_length_rows(self, tmp_path):
        ds = load_dataset(write_layout(tmp_path / "d", ["0,0.1,0.2", "1,0.3"]))
        assert [s.length for s in ds.train] == [2, 1]
        np.testing.assert_array_equal(ds.train[0].frames, [[0.1], [0.2]])
        assert [s.label for s in ds.train] == [0, 1]
        assert ds.max_length == 2

    def test_time_major_layout(self, tmp_path):
        ds = load_dataset(write_layout(tmp_path / "d", ["1,1,2,3,4,5,6"], ["0,0,0"], dim=2))
        np.testing.assert_array_equal(ds.train[0].frames, [[1, 2], [3, 4], [5, 6]])

    def test_row_not_divisible(self, tmp_path):
        with pytest.raises(DataError, match="row 2"):
            load_dataset(write_layout(tmp_path / "d", ["0,1,2", "1,1,2,3"], dim=2))

    def test_label_out_of_range(self, tmp_path):
        with pytest.raises(DataError, match="row 1.*label 2"):
            load_dataset(write_layout(tmp_path / "d", ["2,0.5"]))

    def test_malformed_float(self, tmp_path):
        with pytest.raises(DataError, match="train.csv row 3"):
            load_dataset(write_layout(tmp_path / "d", ["0,1", "1,2", "0,x"]))

    @pytest.mark.parametrize("missing", ["meta.json", "train.csv", "test.csv"])
    def test_missing_file(self, tmp_path, missing):
        root = write_layout(tmp_path / "d", ["0,1"])
        (root / missing).unlink()
        with pytest.raises(DataError, match=missing):
            load_dataset(root)

    def test_bad_meta(self, tmp_path):
        root = write_layout(tmp_path / "d", ["0,1"], meta={"classes": 2})
        with pytest.raises(DataError, match="metadata"):
            load_dataset(root)

    def test_round_trip(self, tmp_path):
        ds = generate_synthetic(SyntheticTask("order", dim=3, length=20, n_train=6, n_test=4), 3)
        back = load_dataset(save_dataset(ds, tmp_path / "rt"))
        assert (back.dim, back.classes, back.format, back.class_names) == \
            (ds.dim, ds.classes, ds.format, ds.class_names)
        for a, b in zip(ds.train + ds.test, back.train + back.test):
            assert a.label == b.label
            np.testing.assert_array_equal(a.frames, b.frames)

    @pytest.mark.parametrize("name, dim, classes", [("BasicMotions", 6, 4),
                                                     ("JapaneseVowels", 12, 9)])
    def test_fixtures(self, name, dim, classes):
        if not (DATA_ROOT / name).is_dir():
            pytest.skip(f"{name} fixture not present")
        ds = load_dataset(DATA_ROOT / name)
        assert (ds.dim, ds.classes) == (dim, classes)
        assert ds.train and ds.test
        assert set(s.label for s in ds.train) == set(range(classes))


class TestEncode:
    def test_identity(self):
        np.testing.assert_array_equal(encode_input_frame([0.5, -2.0], "current", 1.0), [0.5, -2.0])

    def test_scale_from_train_only(self):
        train = [LabeledSequence(np.array([[1.0], [-4.0]]), 0)]
        test = [LabeledSequence(np.array([[100.0]]), 1)]
        ds = Dataset(train, test, 1, 2)
        assert ds.input_scale() == 0.25

    def test_spikes_passthrough_and_error(self):
        np.testing.assert_array_equal(encode_input_frame([0, 1, 1], "spikes"), [0, 1, 1])
        with pytest.raises(DataError):
            encode_input_frame([0, 0.5], "spikes")

    def test_unknown_format(self):
        with pytest.raises(DataError):
            encode_input_frame([0.0], "analog")


class TestSynthetic:
    def test_same_seed_byte_identical(self, tmp_path):
        task = SyntheticTask("late-cue", length=40, n_train=10, n_test=6)
        a = save_dataset(generate_synthetic(task, 7), tmp_path / "a")
        b = save_dataset(generate_synthetic(task, 7), tmp_path / "b")
        for name in ("meta.json", "train.csv", "test.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()
        c = save_dataset(generate_synthetic(task, 8), tmp_path / "c")
        assert (a / "train.csv").read_bytes() != (c / "train.csv").read_bytes()

    @pytest.mark.parametrize("task, classes", [("early-cue", 3), ("late-cue", 4), ("order", 2)])
    def test_balanced(self, task, classes):
        ds = generate_synthetic(SyntheticTask(task, dim=4, classes=classes, n_train=40,
                                              n_test=12), 0)
        for split in (ds.train, ds.test):
            counts = np.bincount([s.label for s in split], minlength=classes)
            assert counts.max() - counts.min() <= 1

    def test_early_cue_separable_by_counts(self):
        task = SyntheticTask("early-cue", dim=4, classes=4, length=100, noise=0.0,
                             n_train=40, n_test=40)
        ds = generate_synthetic(task, 1)
        window = task.length // 5
        for seq in ds.train + ds.test:
            counts = (seq.frames[:window] > 0.5).sum(axis=0)
            assert np.argmax(counts) == seq.label
            assert not seq.frames[window:].any()

    def test_late_cue_confined_to_last_fifth(self):
        task = SyntheticTask("late-cue", dim=2, length=200, noise=0.0, n_train=20, n_test=2)
        for seq in generate_synthetic(task, 2).train:
            active = np.nonzero(seq.frames.any(axis=1))[0]
            assert active.min() >= 160
            assert np.all(seq.frames[:, seq.label][active] == 1.0)

    def test_order_bursts(self):
        task = SyntheticTask("order", dim=4, length=100, noise=0.0, n_train=20, n_test=2)
        for seq in generate_synthetic(task, 3).train:
            first = [np.nonzero(seq.frames[:, c])[0].min() for c in (0, 1)]
            assert (first[0] < first[1]) == (seq.label == 0)

    @pytest.mark.parametrize("kw", [dict(task="spiral"), dict(length=5), dict(classes=1),
                                    dict(task="order", classes=3), dict(task="early-cue", dim=2,
                                                                        classes=3),
                                    dict(noise=-1.0), dict(n_test=0)])
    def test_invalid_spec(self, kw):
        with pytest.raises(DataError):
            generate_synthetic(SyntheticTask(**kw), 0)
