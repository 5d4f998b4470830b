"""Labelled multivariate sequences: on-disk layout, synthetic tasks, input framing.

On-disk layout (one directory per dataset)::

    meta.json   {"dim": D, "classes": K, "format": "current"|"spikes",
                 "class_names": [...]}
    train.csv   label,v(0,0),...,v(0,D-1),v(1,0),...   (time-major, one row per sequence)
    test.csv    same

Rows may have different lengths as long as the value count divides by ``D``.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FORMATS = ("current", "spikes")
TASKS = ("early-cue", "late-cue", "order")


class DataError(ValueError):
    """Malformed dataset files or synthetic-task specifications."""


@dataclass
class LabeledSequence:
    frames: np.ndarray
    label: int
    id: str = ""

    @property
    def length(self) -> int:
        return len(self.frames)


@dataclass
class Dataset:
    train: list[LabeledSequence]
    test: list[LabeledSequence]
    dim: int
    classes: int
    format: str = "current"
    class_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.format not in FORMATS:
            raise DataError(f"unknown input format {self.format!r}")
        if not self.class_names:
            self.class_names = [str(k) for k in range(self.classes)]
        for split in (self.train, self.test):
            for seq in split:
                if seq.frames.ndim != 2 or seq.frames.shape[1] != self.dim:
                    raise DataError(f"sequence {seq.id!r} is not T x {self.dim}")
                if not 0 <= seq.label < self.classes:
                    raise DataError(f"sequence {seq.id!r} has label {seq.label} >= {self.classes}")

    @property
    def max_length(self) -> int:
        return max((s.length for s in self.train + self.test), default=0)

    def input_scale(self) -> float:
        """Default current scaling ``1 / max |v|`` computed on the train split only."""
        if self.format == "spikes":
            return 1.0
        peak = max((float(np.abs(s.frames).max()) for s in self.train if s.length), default=0.0)
        return 1.0 / peak if peak > 0 else 1.0


def encode_input_frame(raw, format: str = "current", scale: float = 1.0) -> np.ndarray:
    """Map a raw input frame to the vector fed to the first layer."""
    raw = np.asarray(raw, dtype=float)
    if format == "current":
        return raw * scale
    if format == "spikes":
        if not np.all((raw == 0) | (raw == 1)):
            raise DataError("spike-format input must be binary {0, 1}")
        return raw
    raise DataError(f"unknown input format {format!r}")


# -- files -------------------------------------------------------------------

def _read_split(path: Path, dim: int, classes: int) -> list[LabeledSequence]:
    if not path.is_file():
        raise DataError(f"missing file {path}")
    out = []
    with path.open(newline="", encoding="utf-8") as fh:
        for rowno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                label = int(row[0])
                values = np.array([float(v) for v in row[1:]])
            except ValueError as exc:
                raise DataError(f"{path.name} row {rowno}: {exc}") from None
            if not 0 <= label < classes:
                raise DataError(f"{path.name} row {rowno}: label {label} not in [0, {classes})")
            if values.size % dim:
                raise DataError(
                    f"{path.name} row {rowno}: {values.size} values not divisible by dim {dim}"
                )
            out.append(LabeledSequence(values.reshape(-1, dim), label,
                                       f"{path.stem}-{rowno - 1}"))
    return out


def load_dataset(path) -> Dataset:
    root = Path(path)
    meta_path = root / "meta.json"
    if not meta_path.is_file():
        raise DataError(f"missing file {meta_path}")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        dim, classes = int(meta["dim"]), int(meta["classes"])
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"{meta_path}: bad metadata ({exc})") from None
    return Dataset(
        train=_read_split(root / "train.csv", dim, classes),
        test=_read_split(root / "test.csv", dim, classes),
        dim=dim,
        classes=classes,
        format=meta.get("format", "current"),
        class_names=list(meta.get("class_names", [])),
    )


def save_dataset(dataset: Dataset, path) -> Path:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    meta = {"dim": dataset.dim, "classes": dataset.classes, "format": dataset.format,
            "class_names": dataset.class_names}
    (root / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    for name, split in (("train", dataset.train), ("test", dataset.test)):
        with (root / f"{name}.csv").open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            for seq in split:
                writer.writerow([seq.label] + [repr(float(v)) for v in seq.frames.ravel()])
    return root


# -- synthetic tasks ---------------------------------------------------------

@dataclass
class SyntheticTask:
    """Desk-scale classification task.

    ``early-cue``/``late-cue``: class ``k`` is a pulse burst on channel
    ``k`` inside the first / last 20% of the sequence; everything else is
    Gaussian noise.  ``order``: channels 0 and 1 each carry one burst and
    the class is which one came first (two classes).
    """

    task: str = "order"
    dim: int = 4
    length: int = 100
    classes: int = 2
    n_train: int = 200
    n_test: int = 100
    noise: float = 0.1
    amplitude: float = 1.0
    burst: int = 0  # burst length in steps, 0 -> length // 20 (at least 2)

    def validate(self) -> None:
        if self.task not in TASKS:
            raise DataError(f"unknown synthetic task {self.task!r}; choose from {TASKS}")
        if self.length < 10 or self.dim < 1 or self.classes < 2:
            raise DataError("synthetic task needs length >= 10, dim >= 1, classes >= 2")
        if self.n_train < 1 or self.n_test < 1:
            raise DataError("synthetic task needs non-empty train and test splits")
        if self.noise < 0:
            raise DataError("noise must be non-negative")
        if self.task == "order" and (self.classes != 2 or self.dim < 2):
            raise DataError("order task needs exactly 2 classes and dim >= 2")
        if self.task != "order" and self.classes > self.dim:
            raise DataError("cue tasks need one input channel per class (classes <= dim)")

    @property
    def burst_length(self) -> int:
        return self.burst or max(2, self.length // 20)


def _make_sequence(task: SyntheticTask, label: int, rng: np.random.Generator) -> np.ndarray:
    T, b = task.length, task.burst_length
    x = task.noise * rng.standard_normal((T, task.dim))
    window = max(b, T // 5)
    if task.task == "early-cue":
        start = int(rng.integers(0, window - b + 1))
        x[start:start + b, label] += task.amplitude
    elif task.task == "late-cue":
        start = int(rng.integers(T - window, T - b + 1))
        x[start:start + b, label] += task.amplitude
    else:
        first, second = (0, 1) if label == 0 else (1, 0)
        gap = int(rng.integers(0, b + 1))
        start = int(rng.integers(T // 10, T // 2 + 1))
        x[start:start + b, first] += task.amplitude
        s2 = start + b + gap
        x[s2:s2 + b, second] += task.amplitude
    return x


def generate_synthetic(task: SyntheticTask, seed: int) -> Dataset:
    """Deterministic, class-balanced synthetic dataset (PCG64 seeded with ``seed``)."""
    task.validate()
    rng = np.random.Generator(np.random.PCG64(seed))
    splits = []
    for name, n in (("train", task.n_train), ("test", task.n_test)):
        labels = np.arange(n) % task.classes
        rng.shuffle(labels)
        splits.append([LabeledSequence(_make_sequence(task, int(k), rng), int(k), f"{name}-{i}")
                       for i, k in enumerate(labels)])
    return Dataset(splits[0], splits[1], task.dim, task.classes, "current",
                   [f"class{k}" for k in range(task.classes)])
