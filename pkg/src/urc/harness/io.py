"""File formats.

Prediction CSV::

    sample_id,group_id,c_1,...,c_n[,label]

``group_id`` may be empty (ungrouped); ``label`` is 1-based like the
probability columns. Floats are written with ``repr`` so they round-trip
exactly. Every writer goes through :func:`atomic_write`.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import fields, is_dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..core import ConfusionMatrix, LabeledPredictionSet, Partition, UnlabeledPredictionSet
from ..errors import InputError
from ..recalibrate import DevSummary

SUMMARY_FORMAT = "urc-dev-summary/1"


class FormatError(InputError):
    pass


def atomic_write(path, text: str) -> None:
    """Write ``text`` to a temporary file next to ``path`` and rename it over
    ``path``, so readers never observe a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return "" if x is None else str(x)


def rows_to_csv(rows: Sequence, header: Optional[Sequence[str]] = None) -> str:
    """Serialize dataclass rows (or plain sequences with ``header``)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if rows and is_dataclass(rows[0]):
        header = [f.name for f in fields(rows[0])]
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(getattr(r, h)) for h in header])
    else:
        if header is not None:
            w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])
    return buf.getvalue()


# --- predictions -----------------------------------------------------------


def read_predictions(path, require_labels: Optional[bool] = None):
    """Read a prediction CSV; returns a :class:`LabeledPredictionSet` when a
    ``label`` column is present, else an :class:`UnlabeledPredictionSet`."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        body = [row for row in reader if row]
    header = [h.strip() for h in header]
    if header[:2] != ["sample_id", "group_id"]:
        raise FormatError(f"{path}: header must start with sample_id,group_id")
    has_label = header[-1] == "label"
    prob_cols = header[2:-1] if has_label else header[2:]
    if prob_cols != [f"c_{i + 1}" for i in range(len(prob_cols))] or len(prob_cols) < 2:
        raise FormatError(f"{path}: expected probability columns c_1..c_n, got {prob_cols}")
    if require_labels and not has_label:
        raise FormatError(f"{path}: a label column is required")
    width = len(header)
    ids, groups, probs, labels = [], [], [], []
    for lineno, row in enumerate(body, start=2):
        if len(row) != width:
            raise FormatError(f"{path}:{lineno}: expected {width} fields, got {len(row)}")
        ids.append(row[0])
        groups.append(row[1] or None)
        try:
            probs.append([float(v) for v in row[2:2 + len(prob_cols)]])
            if has_label:
                labels.append(int(row[-1]) - 1)
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from None
    P = np.array(probs, dtype=float).reshape(len(body), len(prob_cols))
    if has_label and require_labels is not False:
        return LabeledPredictionSet(P, tuple(ids), tuple(groups), labels=np.array(labels, dtype=int))
    return UnlabeledPredictionSet(P, tuple(ids), tuple(groups))


def predictions_to_csv(pset: UnlabeledPredictionSet, labels=None) -> str:
    if labels is None and isinstance(pset, LabeledPredictionSet):
        labels = pset.labels
    n = pset.n_classes
    header = ["sample_id", "group_id"] + [f"c_{i + 1}" for i in range(n)]
    if labels is not None:
        header.append("label")
    rows = []
    for i in range(len(pset)):
        row = [pset.sample_ids[i], pset.group_ids[i] or ""] + [float(v) for v in pset.predictions[i]]
        if labels is not None:
            row.append(int(labels[i]) + 1)
        rows.append(row)
    return rows_to_csv(rows, header)


def write_predictions(path, pset: UnlabeledPredictionSet, labels=None) -> None:
    atomic_write(path, predictions_to_csv(pset, labels))


# --- dev summary -----------------------------------------------------------


def summary_to_dict(summary: DevSummary) -> dict:
    return {
        "format": SUMMARY_FORMAT,
        "cutpoints": [float(c) for c in summary.partition.cutpoints],
        "confusion_matrix": summary.m_a.entries.tolist(),
        "class_counts": None if summary.m_a.class_counts is None else summary.m_a.class_counts.tolist(),
        "dev_prior": summary.dev_prior.tolist(),
        "smoothing": float(summary.smoothing),
        "n_samples": summary.n_samples,
    }


def summary_from_dict(d: dict) -> DevSummary:
    if d.get("format") != SUMMARY_FORMAT:
        raise FormatError(f"unknown summary format {d.get('format')!r}")
    try:
        m_a = ConfusionMatrix(np.array(d["confusion_matrix"], dtype=float), d.get("class_counts"))
        return DevSummary(Partition(tuple(d["cutpoints"])), m_a, np.array(d["dev_prior"], dtype=float),
                          float(d["smoothing"]), d.get("n_samples"))
    except KeyError as exc:
        raise FormatError(f"summary is missing field {exc}") from None


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_summary(path, summary: DevSummary) -> None:
    atomic_write(path, dumps(summary_to_dict(summary)))


def read_summary(path) -> DevSummary:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: {exc}") from None
    return summary_from_dict(data)


def estimate_to_dict(estimate) -> dict:
    return {
        "method": estimate.method.value,
        "p": [float(x) for x in estimate.p],
        "final_loss": estimate.final_loss,
        "iterations_used": estimate.iterations_used,
        "converged": estimate.converged,
    }
