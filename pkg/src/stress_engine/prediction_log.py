"""Per-sample classifier outputs: the bridge from the classifier to the
fusion network and the evaluation metrics.

Labels are strings so one log type serves both affect classification
(labels = class names) and subject identification (labels = subject ids).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .signals import AffectClass, FOUR_CLASS, THREE_CLASS

_AFFECT_LABELS = {c.label for c in AffectClass}


@dataclass
class LogEntry:
    sample_id: str
    subject_id: str
    modality: str
    true_label: str
    predicted_label: str
    confidence: np.ndarray

    def to_json(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "subject_id": self.subject_id,
            "modality": self.modality,
            "true_label": self.true_label,
            "predicted_label": self.predicted_label,
            "confidence": [float(p) for p in self.confidence],
        }


@dataclass
class PredictionLog:
    """Entries plus the ordered class labels the confidence vectors index."""

    class_labels: list[str]
    entries: list[LogEntry]

    def __post_init__(self):
        self.validate()

    def validate(self):
        C = len(self.class_labels)
        for e in self.entries:
            e.confidence = np.asarray(e.confidence, dtype=np.float64)
            if e.confidence.shape != (C,):
                raise ValueError(
                    f"entry {e.sample_id}: confidence length {e.confidence.shape} "
                    f"does not match {C} classes")
            if abs(float(e.confidence.sum()) - 1.0) > 1e-9:
                raise ValueError(f"entry {e.sample_id}: confidence does not sum to 1")
            if e.predicted_label != self.class_labels[int(np.argmax(e.confidence))]:
                raise ValueError(
                    f"entry {e.sample_id}: predicted_label is not the argmax class")

    def __len__(self) -> int:
        return len(self.entries)

    def class_index(self, label: str) -> int:
        return self.class_labels.index(label)

    def predicted_histogram(self) -> np.ndarray:
        """Fraction of entries predicted as each class, in class order."""
        counts = np.zeros(len(self.class_labels), dtype=np.int64)
        for e in self.entries:
            counts[self.class_index(e.predicted_label)] += 1
        return counts / len(self.entries)


def align_logs(logs: dict[str, "PredictionLog"]) -> list[str]:
    """Common sorted sample ids across per-sensor logs.

    Raises MisalignedLogs when the logs cover different samples, contain
    duplicates, or disagree on a sample's true label.
    """
    from .errors import MisalignedLogs

    ids_per_sensor = {}
    for sensor, log in logs.items():
        ids = sorted(e.sample_id for e in log.entries)
        if len(set(ids)) != len(ids):
            raise MisalignedLogs(f"log for {sensor!r} has duplicate sample ids")
        ids_per_sensor[sensor] = ids
    first_sensor = next(iter(ids_per_sensor))
    reference = ids_per_sensor[first_sensor]
    for sensor, ids in ids_per_sensor.items():
        if ids != reference:
            raise MisalignedLogs(
                f"log for {sensor!r} covers different samples than {first_sensor!r}")
    truth: dict[str, str] = {}
    for sensor, log in logs.items():
        for e in log.entries:
            if truth.setdefault(e.sample_id, e.true_label) != e.true_label:
                raise MisalignedLogs(
                    f"sample {e.sample_id!r} has conflicting true labels")
    return reference


def save_log(log: PredictionLog, path) -> None:
    with open(path, "w") as fh:
        for e in log.entries:
            fh.write(json.dumps(e.to_json(), sort_keys=True) + "\n")


def _infer_class_labels(entries: list[LogEntry]) -> list[str]:
    seen = {e.true_label for e in entries} | {e.predicted_label for e in entries}
    C = len(entries[0].confidence)
    if seen <= _AFFECT_LABELS:
        scheme = THREE_CLASS if C == 3 else FOUR_CLASS
        if C in (3, 4):
            return scheme.labels
    labels = sorted(seen)
    if len(labels) != C:
        raise ValueError(
            f"cannot infer class labels: {len(labels)} distinct labels for "
            f"confidence vectors of length {C}")
    return labels


def load_log(path) -> PredictionLog:
    entries = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            entries.append(LogEntry(
                obj["sample_id"], obj["subject_id"], obj["modality"],
                obj["true_label"], obj["predicted_label"],
                np.array(obj["confidence"], dtype=np.float64)))
    if not entries:
        raise ValueError(f"{path}: empty prediction log")
    return PredictionLog(_infer_class_labels(entries), entries)
