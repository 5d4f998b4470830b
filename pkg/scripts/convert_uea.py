#!/usr/bin/env python3
"""Convert a UEA/UCR multivariate ``.ts`` pair into the package's CSV+JSON layout.

Usage::

    python scripts/convert_uea.py path/to/BasicMotions_TRAIN.ts path/to/BasicMotions_TEST.ts data/BasicMotions

Only the plain ``@data`` body (``ch1:ch2:...:label`` rows, no timestamps,
no missing values) is understood; that covers BasicMotions and
JapaneseVowels.
"""
import argparse
from pathlib import Path

import numpy as np

from solsa.data import Dataset, LabeledSequence, save_dataset


def read_ts(path):
    header, rows = {}, []
    in_data = False
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if not in_data:
            if line.lower() == "@data":
                in_data = True
            elif line.startswith("@"):
                key, _, value = line[1:].partition(" ")
                header[key.lower()] = value
            continue
        *channels, label = line.split(":")
        series = [np.array([float(v) for v in ch.split(",")]) for ch in channels]
        rows.append((np.stack(series, axis=1), label.strip()))
    return header, rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("train_ts")
    ap.add_argument("test_ts")
    ap.add_argument("out")
    args = ap.parse_args()

    header, train_rows = read_ts(args.train_ts)
    _, test_rows = read_ts(args.test_ts)
    names = header["classlabel"].split()[1:]
    index = {name: k for k, name in enumerate(names)}
    dim = train_rows[0][0].shape[1]

    def seqs(rows, split):
        return [LabeledSequence(x, index[y], f"{split}-{i}") for i, (x, y) in enumerate(rows)]

    ds = Dataset(seqs(train_rows, "train"), seqs(test_rows, "test"), dim, len(names),
                 "current", names)
    save_dataset(ds, args.out)
    print(f"{args.out}: dim={dim} classes={len(names)} train={len(ds.train)} "
          f"test={len(ds.test)} T_max={ds.max_length}")


if __name__ == "__main__":
    main()
