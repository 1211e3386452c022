"""Delimited dataset ingestion and emission.

The on-disk format is plain CSV with a header row.  One named column holds
the class label; every other column is parsed as a float feature, in header
order.  Label values are mapped to class ids in order of first appearance,
and the mapping is returned so runs can persist it alongside their other
artifacts.  Row numbers in error messages are 1-based file lines (the
header is line 1).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class LoadedDataset:
    x: np.ndarray  # N x d, float64
    labels: np.ndarray  # N, int64 class ids
    feature_names: list[str]
    label_names: list[str]  # index = class id, value = original label


def load_csv(path: str | Path, label_column: str) -> LoadedDataset:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: file is empty, expected a header row") from None
        if label_column not in header:
            raise ValueError(f"{path}: label column {label_column!r} not found in header {header}")
        label_idx = header.index(label_column)
        feature_names = [name for i, name in enumerate(header) if i != label_idx]
        if not feature_names:
            raise ValueError(f"{path}: no feature columns besides the label")

        rows: list[list[float]] = []
        label_values: list[str] = []
        label_ids: dict[str, int] = {}
        raw_labels: list[int] = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(
                    f"{path}: row {line_no} has {len(row)} cells, header has {len(header)}"
                )
            features = []
            for i, cell in enumerate(row):
                if i == label_idx:
                    continue
                try:
                    features.append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"{path}: row {line_no}, column {header[i]!r}: "
                        f"cannot parse {cell!r} as a number"
                    ) from None
            label = row[label_idx]
            if label not in label_ids:
                label_ids[label] = len(label_values)
                label_values.append(label)
            raw_labels.append(label_ids[label])
            rows.append(features)

    if not rows:
        raise ValueError(f"{path}: no data rows after the header")
    return LoadedDataset(
        x=np.array(rows, dtype=np.float64),
        labels=np.array(raw_labels, dtype=np.int64),
        feature_names=feature_names,
        label_names=label_values,
    )


def save_csv(path: str | Path, x: np.ndarray, labels: np.ndarray, label_column: str = "label") -> None:
    """Write a dataset in the format load_csv reads back."""
    path = Path(path)
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{i}" for i in range(x.shape[1])] + [label_column])
        for row, label in zip(x, labels):
            writer.writerow([repr(float(v)) for v in row] + [label])
