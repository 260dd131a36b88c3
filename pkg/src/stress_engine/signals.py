"""Signal ingestion, windowing, and normalization.

Recordings are per-modality multichannel streams with labeled condition
intervals. They are segmented into fixed-length windows (one label per
window, boundary-straddling windows discarded) that feed the classifier.
A seeded synthetic generator provides a desk-scale corpus with learnable
class and subject signatures.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, replace
from enum import Enum, IntEnum
from pathlib import Path

import numpy as np

from .errors import (
    ChannelMismatch,
    IntervalOutOfBounds,
    MalformedManifest,
    WindowTooLong,
)

DATASET_FORMAT = "stress-engine-dataset"
DATASET_VERSION = 1


class Location(str, Enum):
    CHEST = "chest"
    WRIST = "wrist"


class SensorKind(str, Enum):
    ACC = "acc"
    ECG = "ecg"
    EDA = "eda"
    EMG = "emg"
    RESP = "resp"
    TEMP = "temp"
    BVP = "bvp"


# The 10 valid modality streams: 6 chest + 4 wrist.
VALID_MODALITIES: frozenset[tuple[Location, SensorKind]] = frozenset(
    [(Location.CHEST, k) for k in (SensorKind.ACC, SensorKind.ECG, SensorKind.EDA,
                                   SensorKind.EMG, SensorKind.RESP, SensorKind.TEMP)]
    + [(Location.WRIST, k) for k in (SensorKind.ACC, SensorKind.BVP,
                                     SensorKind.EDA, SensorKind.TEMP)]
)


@dataclass(frozen=True)
class SensorModality:
    """A (location, kind) sensor stream; only the 10 valid pairs exist."""

    location: Location
    kind: SensorKind

    def __post_init__(self):
        if (self.location, self.kind) not in VALID_MODALITIES:
            raise ValueError(
                f"invalid modality {self.location.value}/{self.kind.value}"
            )

    @property
    def channels(self) -> int:
        return 3 if self.kind is SensorKind.ACC else 1

    @property
    def label(self) -> str:
        return f"{self.location.value}_{self.kind.value}"

    @classmethod
    def parse(cls, location: str, kind: str) -> "SensorModality":
        try:
            loc = Location(location.lower())
        except ValueError:
            raise ValueError(f"unknown location {location!r}") from None
        try:
            knd = SensorKind(kind.lower())
        except ValueError:
            raise ValueError(f"unknown kind {kind!r}") from None
        return cls(loc, knd)


def all_modalities() -> list[SensorModality]:
    order = [
        ("chest", "acc"), ("chest", "ecg"), ("chest", "eda"),
        ("chest", "emg"), ("chest", "resp"), ("chest", "temp"),
        ("wrist", "acc"), ("wrist", "bvp"), ("wrist", "eda"), ("wrist", "temp"),
    ]
    return [SensorModality.parse(a, b) for a, b in order]


class AffectClass(IntEnum):
    """Affect conditions with stable serialization codes 0..3."""

    BASELINE = 0
    STRESS = 1
    AMUSEMENT = 2
    MEDITATION = 3

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "AffectClass":
        try:
            return cls[label.upper()]
        except KeyError:
            raise ValueError(f"unknown affect class {label!r}") from None


@dataclass(frozen=True)
class ClassScheme:
    """An ordered subset of affect classes used as classifier targets."""

    classes: tuple[AffectClass, ...]

    @property
    def size(self) -> int:
        return len(self.classes)

    @property
    def labels(self) -> list[str]:
        return [c.label for c in self.classes]

    def index(self, cls: AffectClass) -> int:
        return self.classes.index(cls)

    def __contains__(self, cls: AffectClass) -> bool:
        return cls in self.classes


THREE_CLASS = ClassScheme((AffectClass.BASELINE, AffectClass.STRESS, AffectClass.AMUSEMENT))
FOUR_CLASS = ClassScheme(THREE_CLASS.classes + (AffectClass.MEDITATION,))


@dataclass
class Recording:
    """One modality stream for one subject, with labeled intervals.

    samples has shape (channels, time); condition_intervals are half-open
    [start, end) sample ranges, sorted and non-overlapping.
    """

    subject_id: str
    modality: SensorModality
    sampling_rate_hz: float
    samples: np.ndarray
    condition_intervals: list[tuple[int, int, AffectClass]]

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim == 1:
            self.samples = self.samples[np.newaxis, :]
        if self.sampling_rate_hz <= 0:
            raise ValueError("sampling_rate_hz must be positive")
        if self.samples.shape[0] != self.modality.channels:
            raise ChannelMismatch(
                f"modality {self.modality.label} requires "
                f"{self.modality.channels} channels, got {self.samples.shape[0]}"
            )
        n = self.samples.shape[1]
        prev_end = 0
        for start, end, _ in self.condition_intervals:
            if start < 0 or end > n or start >= end:
                raise IntervalOutOfBounds(
                    f"interval ({start}, {end}) does not fit in {n} samples"
                )
            if start < prev_end:
                raise MalformedManifest("intervals: overlapping or unsorted")
            prev_end = end

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]


@dataclass
class Window:
    """A fixed-length labeled slice of one recording."""

    subject_id: str
    modality: SensorModality
    data: np.ndarray  # (channels, window_len)
    label: AffectClass
    source_offset: int


@dataclass
class NormStats:
    """Per-channel normalization statistics computed from a training split."""

    scheme: str  # "zscore" | "minmax"
    lo: np.ndarray  # mean (zscore) or min (minmax), per channel
    hi: np.ndarray  # std (zscore) or max (minmax), per channel

    def to_json(self) -> dict:
        return {"scheme": self.scheme,
                "lo": [float(v) for v in self.lo],
                "hi": [float(v) for v in self.hi]}

    @classmethod
    def from_json(cls, obj: dict) -> "NormStats":
        return cls(obj["scheme"], np.array(obj["lo"], dtype=np.float64),
                   np.array(obj["hi"], dtype=np.float64))

    def apply(self, data: np.ndarray) -> np.ndarray:
        """Apply to an array whose first axis (or second, for stacks) is channels."""
        lo = self.lo.reshape((-1, 1) if data.ndim == 2 else (1, -1, 1))
        hi = self.hi.reshape((-1, 1) if data.ndim == 2 else (1, -1, 1))
        if self.scheme == "zscore":
            return (data - lo) / np.maximum(hi, 1e-8)
        rng = hi - lo
        out = np.where(rng > 0, (data - lo) / np.where(rng > 0, rng, 1.0), 0.0)
        return out


@dataclass
class WindowedDataset:
    """All windows of one modality at one window length."""

    windows: list[Window]
    class_scheme: ClassScheme
    window_len: int
    sampling_rate_hz: float
    normalization: NormStats | None = None
    norm_scheme: str | None = None  # preferred scheme, applied at train time

    def __post_init__(self):
        if not self.windows:
            raise ValueError("dataset must contain at least one window")
        first = self.windows[0].modality
        for w in self.windows:
            if w.data.shape[1] != self.window_len:
                raise ValueError("all windows must share one window_len")
            if w.modality != first:
                raise ValueError("all windows must share one modality")

    @property
    def modality(self) -> SensorModality:
        return self.windows[0].modality

    @property
    def channels(self) -> int:
        return self.windows[0].data.shape[0]

    @property
    def subjects(self) -> list[str]:
        return sorted({w.subject_id for w in self.windows})

    def __len__(self) -> int:
        return len(self.windows)

    def stacked(self) -> tuple[np.ndarray, np.ndarray, list[str]]:
        """Return (data (n, ch, len), label codes, subject ids)."""
        data = np.stack([w.data for w in self.windows])
        labels = np.array([int(w.label) for w in self.windows], dtype=np.int64)
        subjects = [w.subject_id for w in self.windows]
        return data, labels, subjects

    def label_indices(self) -> np.ndarray:
        """Class-scheme indices (0..C-1) of each window's label."""
        return np.array([self.class_scheme.index(w.label) for w in self.windows],
                        dtype=np.int64)

    def subset(self, indices) -> "WindowedDataset":
        return WindowedDataset(
            [self.windows[i] for i in indices], self.class_scheme,
            self.window_len, self.sampling_rate_hz, self.normalization,
            self.norm_scheme,
        )


# ---------------------------------------------------------------------------
# Manifest + CSV ingestion
# ---------------------------------------------------------------------------

_MANIFEST_FIELDS = {"subject", "location", "kind", "sampling_rate_hz",
                    "channels", "intervals"}


def _parse_manifest(obj: dict) -> dict:
    if not isinstance(obj, dict):
        raise MalformedManifest("manifest root must be a JSON object")
    missing = _MANIFEST_FIELDS - set(obj)
    if missing:
        raise MalformedManifest(f"missing field(s): {', '.join(sorted(missing))}")
    unknown = set(obj) - _MANIFEST_FIELDS
    if unknown:
        raise MalformedManifest(f"unknown field(s): {', '.join(sorted(unknown))}")
    if not isinstance(obj["subject"], str) or not obj["subject"]:
        raise MalformedManifest("subject: must be a non-empty string")
    try:
        modality = SensorModality.parse(obj["location"], obj["kind"])
    except ValueError as exc:
        raise MalformedManifest(f"location/kind: {exc}") from None
    rate = obj["sampling_rate_hz"]
    if not isinstance(rate, (int, float)) or rate <= 0:
        raise MalformedManifest("sampling_rate_hz: must be a positive number")
    channels = obj["channels"]
    if not isinstance(channels, int) or channels < 1:
        raise MalformedManifest("channels: must be a positive integer")
    if channels != modality.channels:
        raise ChannelMismatch(
            f"channels: modality {modality.label} requires "
            f"{modality.channels} channels, manifest declares {channels}"
        )
    intervals = []
    if not isinstance(obj["intervals"], list) or not obj["intervals"]:
        raise MalformedManifest("intervals: must be a non-empty list")
    for i, item in enumerate(obj["intervals"]):
        if (not isinstance(item, list) or len(item) != 3
                or not isinstance(item[0], int) or not isinstance(item[1], int)
                or not isinstance(item[2], str)):
            raise MalformedManifest(f"intervals[{i}]: expected [start, end, label]")
        try:
            label = AffectClass.from_label(item[2])
        except ValueError as exc:
            raise MalformedManifest(f"intervals[{i}]: {exc}") from None
        intervals.append((item[0], item[1], label))
    return {"subject": obj["subject"], "modality": modality,
            "sampling_rate_hz": float(rate), "channels": channels,
            "intervals": intervals}


def load_recording(manifest_path, data_path) -> Recording:
    """Load a recording from a JSON manifest plus headerless CSV data file."""
    try:
        with open(manifest_path) as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedManifest(f"cannot parse manifest {manifest_path}: {exc}") from None
    meta = _parse_manifest(obj)
    data = np.loadtxt(data_path, delimiter=",", dtype=np.float64, ndmin=2)
    if data.shape[1] != meta["channels"]:
        raise ChannelMismatch(
            f"data file has {data.shape[1]} columns, manifest declares "
            f"{meta['channels']} channels"
        )
    return Recording(
        subject_id=meta["subject"],
        modality=meta["modality"],
        sampling_rate_hz=meta["sampling_rate_hz"],
        samples=data.T,
        condition_intervals=meta["intervals"],
    )


def write_recording(rec: Recording, manifest_path, data_path) -> None:
    """Write a recording back to manifest + CSV form (inverse of load_recording)."""
    manifest = {
        "subject": rec.subject_id,
        "location": rec.modality.location.value,
        "kind": rec.modality.kind.value,
        "sampling_rate_hz": rec.sampling_rate_hz,
        "channels": rec.modality.channels,
        "intervals": [[s, e, c.label] for s, e, c in rec.condition_intervals],
    }
    Path(manifest_path).write_text(json.dumps(manifest, indent=2, sort_keys=True))
    np.savetxt(data_path, rec.samples.T, delimiter=",", fmt="%.17g")


# ---------------------------------------------------------------------------
# Windowing
# ---------------------------------------------------------------------------

def infer_scheme(labels) -> ClassScheme:
    """3-class unless meditation appears."""
    return FOUR_CLASS if AffectClass.MEDITATION in set(labels) else THREE_CLASS


def enumerate_offsets(intervals, window_len: int, stride: int):
    """Brute-force-equivalent offset enumeration: per interval, offsets
    aligned to the interval start whose window fits inside it."""
    for start, end, label in intervals:
        o = start
        while o + window_len <= end:
            yield o, label
            o += stride


def segment_windows(rec: Recording, window_len: int, stride: int,
                    scheme: ClassScheme | None = None) -> WindowedDataset:
    """Segment one recording into labeled windows.

    Windows start at interval_start + k*stride and must fit entirely inside
    a single condition interval; straddling offsets are never emitted.
    """
    if window_len < 1 or stride < 1:
        raise ValueError("window_len and stride must be >= 1")
    longest = max(e - s for s, e, _ in rec.condition_intervals)
    if window_len > longest:
        raise WindowTooLong(
            f"window_len {window_len} exceeds longest condition interval {longest}"
        )
    windows = [
        Window(rec.subject_id, rec.modality, rec.samples[:, o:o + window_len].copy(),
               label, o)
        for o, label in enumerate_offsets(rec.condition_intervals, window_len, stride)
    ]
    if scheme is None:
        scheme = infer_scheme(w.label for w in windows)
    return WindowedDataset(windows, scheme, window_len, rec.sampling_rate_hz)


def segment_many(recordings, window_len: int, stride: int,
                 scheme: ClassScheme | None = None) -> WindowedDataset:
    """Segment multiple recordings of one modality into one dataset.

    Output order is deterministic: sorted by subject id, then offset.
    """
    if not recordings:
        raise ValueError("no recordings given")
    modality = recordings[0].modality
    rate = recordings[0].sampling_rate_hz
    for rec in recordings:
        if rec.modality != modality:
            raise ValueError("all recordings must share one modality")
        if rec.sampling_rate_hz != rate:
            raise ValueError("mixed sampling rates; resample first")
    windows: list[Window] = []
    for rec in sorted(recordings, key=lambda r: r.subject_id):
        ds = segment_windows(rec, window_len, stride, scheme=FOUR_CLASS)
        windows.extend(sorted(ds.windows, key=lambda w: w.source_offset))
    if scheme is None:
        scheme = infer_scheme(w.label for w in windows)
    return WindowedDataset(windows, scheme, window_len, rate)


def resample_linear(rec: Recording, new_rate_hz: float) -> Recording:
    """Linear-interpolation resampler for rate harmonization (opt-in)."""
    if new_rate_hz <= 0:
        raise ValueError("new_rate_hz must be positive")
    n = rec.n_samples
    ratio = new_rate_hz / rec.sampling_rate_hz
    m = int(np.floor((n - 1) * ratio)) + 1
    t_new = np.arange(m) / ratio
    t_old = np.arange(n, dtype=np.float64)
    samples = np.stack([np.interp(t_new, t_old, ch) for ch in rec.samples])
    intervals = []
    for s, e, label in rec.condition_intervals:
        s2 = int(np.ceil(s * ratio))
        e2 = min(int(np.floor(e * ratio)), m)
        if s2 < e2:
            intervals.append((s2, e2, label))
    return Recording(rec.subject_id, rec.modality, new_rate_hz, samples, intervals)


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------

def compute_stats(ds: WindowedDataset, scheme: str,
                  stats_indices=None) -> NormStats:
    """Per-channel stats over the designated split (default: all windows)."""
    if scheme not in ("zscore", "minmax"):
        raise ValueError(f"unknown normalization scheme {scheme!r}")
    idx = range(len(ds)) if stats_indices is None else stats_indices
    stacked = np.concatenate([ds.windows[i].data for i in idx], axis=1)
    if scheme == "zscore":
        return NormStats("zscore", stacked.mean(axis=1), stacked.std(axis=1))
    return NormStats("minmax", stacked.min(axis=1), stacked.max(axis=1))


def normalize(ds: WindowedDataset, scheme: str,
              stats_indices=None) -> WindowedDataset:
    """Return a normalized copy; stats come only from stats_indices windows.

    zscore: x -> (x - mean) / max(std, 1e-8); minmax: maps to [0, 1] with
    constant channels mapping to 0.
    """
    stats = compute_stats(ds, scheme, stats_indices)
    windows = [replace(w, data=stats.apply(w.data)) for w in ds.windows]
    return WindowedDataset(windows, ds.class_scheme, ds.window_len,
                           ds.sampling_rate_hz, stats, ds.norm_scheme)


# ---------------------------------------------------------------------------
# Dataset persistence (deterministic single-file JSON container)
# ---------------------------------------------------------------------------

def _b64(arr: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(arr, dtype="<f8").tobytes()).decode()


def _unb64(text: str, shape) -> np.ndarray:
    raw = base64.b64decode(text.encode())
    return np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)


def save_dataset(ds: WindowedDataset, path) -> None:
    data, _, _ = ds.stacked()
    obj = {
        "format": DATASET_FORMAT,
        "version": DATASET_VERSION,
        "modality": {"location": ds.modality.location.value,
                     "kind": ds.modality.kind.value},
        "sampling_rate_hz": ds.sampling_rate_hz,
        "window_len": ds.window_len,
        "class_scheme": ds.class_scheme.labels,
        "norm_scheme": ds.norm_scheme,
        "normalization": ds.normalization.to_json() if ds.normalization else None,
        "windows": [{"subject": w.subject_id, "offset": w.source_offset,
                     "label": w.label.label} for w in ds.windows],
        "shape": list(data.shape),
        "data": _b64(data),
    }
    Path(path).write_text(json.dumps(obj, sort_keys=True))


def load_dataset(path) -> WindowedDataset:
    obj = json.loads(Path(path).read_text())
    if obj.get("format") != DATASET_FORMAT:
        raise ValueError(f"{path} is not a stress-engine dataset file")
    modality = SensorModality.parse(obj["modality"]["location"],
                                    obj["modality"]["kind"])
    scheme = ClassScheme(tuple(AffectClass.from_label(s) for s in obj["class_scheme"]))
    data = _unb64(obj["data"], tuple(obj["shape"]))
    windows = [
        Window(meta["subject"], modality, data[i],
               AffectClass.from_label(meta["label"]), meta["offset"])
        for i, meta in enumerate(obj["windows"])
    ]
    norm = NormStats.from_json(obj["normalization"]) if obj["normalization"] else None
    return WindowedDataset(windows, scheme, obj["window_len"],
                           obj["sampling_rate_hz"], norm, obj.get("norm_scheme"))


# ---------------------------------------------------------------------------
# Synthetic corpus
# ---------------------------------------------------------------------------

# Dominant class frequencies (Hz); integer cycles per 1 s window at 32 Hz.
CLASS_FREQ_HZ = {
    AffectClass.BASELINE: 2.0,
    AffectClass.STRESS: 4.0,
    AffectClass.AMUSEMENT: 6.0,
    AffectClass.MEDITATION: 8.0,
}
# Subject identity code: each subject activates a distinct pair of carrier
# bins (class-independent), plus a distinct DC offset.
_CARRIER_BINS_HZ = (9.0, 10.0, 11.0, 12.0, 13.0, 14.0, 15.0)
_CARRIER_AMP = 0.6


def _carrier_pairs():
    bins = _CARRIER_BINS_HZ
    return [(bins[i], bins[j]) for i in range(len(bins))
            for j in range(i + 1, len(bins))]
# Per-modality signal scale: strong sensors separate well, weak ones do not.
MODALITY_SCALE = {
    SensorKind.RESP: 1.0,
    SensorKind.BVP: 0.95,
    SensorKind.ECG: 0.9,
    SensorKind.ACC: 0.8,
    SensorKind.EDA: 0.45,
    SensorKind.EMG: 0.35,
    SensorKind.TEMP: 0.3,
}
SYNTH_RATE_HZ = 32.0
SYNTH_NOISE_STD = 0.05


def synth_subject_ids(n_subjects: int) -> list[str]:
    return [f"S{i + 1:02d}" for i in range(n_subjects)]


def synth_generate(n_subjects: int, classes: ClassScheme = THREE_CLASS,
                   seed: int = 0, modalities=None,
                   samples_per_class: int = 224) -> list[Recording]:
    """Generate a deterministic synthetic corpus.

    Each class carries a distinct dominant frequency; each subject a distinct
    DC offset plus a two-tone amplitude code, so both emotion classification
    and subject identification are learnable from the windows.
    """
    if n_subjects < 2:
        raise ValueError("n_subjects must be >= 2")
    pairs = _carrier_pairs()
    if n_subjects > len(pairs):
        raise ValueError(f"at most {len(pairs)} synthetic subjects supported")
    if modalities is None:
        modalities = all_modalities()
    rng = np.random.default_rng(seed)
    n_classes = classes.size
    total = samples_per_class * n_classes
    t = np.arange(total, dtype=np.float64) / SYNTH_RATE_HZ
    recordings: list[Recording] = []
    for s, subject in enumerate(synth_subject_ids(n_subjects)):
        dc = -1.0 + 2.0 * s / (n_subjects - 1)
        carrier_a, carrier_b = pairs[s]
        phase_s = 2.0 * np.pi * s / n_subjects
        for m, modality in enumerate(modalities):
            scale = MODALITY_SCALE[modality.kind]
            phase_m = 2.0 * np.pi * m / 10.0
            chans = []
            for ch in range(modality.channels):
                phase_c = 2.0 * np.pi * ch / 9.0
                clean = np.empty(total)
                for ci, cls in enumerate(classes.classes):
                    sl = slice(ci * samples_per_class, (ci + 1) * samples_per_class)
                    freq = CLASS_FREQ_HZ[cls]
                    clean[sl] = np.sin(
                        2.0 * np.pi * freq * t[sl] + phase_s + phase_m + phase_c
                    )
                clean += _CARRIER_AMP * np.sin(2.0 * np.pi * carrier_a * t + phase_m)
                clean += _CARRIER_AMP * np.sin(2.0 * np.pi * carrier_b * t + phase_m)
                clean += dc
                chans.append(scale * clean)
            samples = np.stack(chans)
            samples += rng.normal(0.0, SYNTH_NOISE_STD, size=samples.shape)
            intervals = [
                (ci * samples_per_class, (ci + 1) * samples_per_class, cls)
                for ci, cls in enumerate(classes.classes)
            ]
            recordings.append(Recording(subject, modality, SYNTH_RATE_HZ,
                                        samples, intervals))
    return recordings


# ---------------------------------------------------------------------------
# WESAD converter (optional; used only when the public dataset is on disk)
# ---------------------------------------------------------------------------

_WESAD_LABELS = {1: AffectClass.BASELINE, 2: AffectClass.STRESS,
                 3: AffectClass.AMUSEMENT, 4: AffectClass.MEDITATION}
_WESAD_RATES = {
    (Location.CHEST, SensorKind.ACC): 700.0, (Location.CHEST, SensorKind.ECG): 700.0,
    (Location.CHEST, SensorKind.EDA): 700.0, (Location.CHEST, SensorKind.EMG): 700.0,
    (Location.CHEST, SensorKind.RESP): 700.0, (Location.CHEST, SensorKind.TEMP): 700.0,
    (Location.WRIST, SensorKind.ACC): 32.0, (Location.WRIST, SensorKind.BVP): 64.0,
    (Location.WRIST, SensorKind.EDA): 4.0, (Location.WRIST, SensorKind.TEMP): 4.0,
}
_WESAD_KEYS = {SensorKind.ACC: "ACC", SensorKind.ECG: "ECG", SensorKind.EDA: "EDA",
               SensorKind.EMG: "EMG", SensorKind.RESP: "Resp",
               SensorKind.TEMP: "Temp", SensorKind.BVP: "BVP"}


def load_wesad_subject(pkl_path, modality: SensorModality) -> Recording:
    """Convert one WESAD subject pickle into a Recording for one modality.

    Labels are sampled at 700 Hz; condition runs are rescaled into the
    modality's own sample index space.
    """
    import pickle

    with open(pkl_path, "rb") as fh:
        blob = pickle.load(fh, encoding="latin1")
    raw = blob["signal"][modality.location.value][_WESAD_KEYS[modality.kind]]
    raw = np.asarray(raw, dtype=np.float64)
    samples = raw.T if raw.ndim == 2 else raw[np.newaxis, :]
    labels = np.asarray(blob["label"]).astype(np.int64)
    rate = _WESAD_RATES[(modality.location, modality.kind)]
    ratio = rate / 700.0
    n = samples.shape[1]
    intervals = []
    run_start = 0
    for i in range(1, len(labels) + 1):
        if i == len(labels) or labels[i] != labels[run_start]:
            code = int(labels[run_start])
            if code in _WESAD_LABELS:
                s = int(np.ceil(run_start * ratio))
                e = min(int(np.floor(i * ratio)), n)
                if s < e:
                    intervals.append((s, e, _WESAD_LABELS[code]))
            run_start = i
    subject = str(blob.get("subject", Path(pkl_path).stem))
    return Recording(subject, modality, rate, samples, intervals)
