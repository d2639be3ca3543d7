"""Epoch archives: loading, trial epoching and resting-block segmentation.

An archive is a directory holding ``manifest.json`` and one raw payload of
little-endian float32 samples in channel-major order (all of channel 0,
then channel 1, ...).  Signals are kept in microvolts throughout.
"""
import json
import shutil
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

DEFAULT_CHANNELS = ("FC3", "FC4", "C5", "C3", "C1", "Cz", "C2", "C4", "C6", "CP3", "CP4")

# 22-electrode 10-20 montage of the motor-imagery recordings
IV2A_MONTAGE = (
    "Fz", "FC3", "FC1", "FCz", "FC2", "FC4", "C5", "C3", "C1", "Cz", "C2",
    "C4", "C6", "CP3", "CP1", "CPz", "CP2", "CP4", "P1", "Pz", "P2", "POz",
)

CLASSES = ("left", "right")
LEFT, RIGHT = 0, 1
CUE_CODES = {"cue_left": LEFT, "cue_right": RIGHT}
REST_CODES = ("rest_eo_start", "rest_ec_start", "rest_em_start", "rest_end")
EVENT_CODES = frozenset(CUE_CODES) | frozenset(REST_CODES)

EYE_MODES = ("open", "closed", "movement")
NOMINAL_REST_S = {"open": 120.0, "closed": 120.0, "movement": 60.0}
REST_SLACK_S = 2.0

MANIFEST_NAME = "manifest.json"
PAYLOAD_NAME = "signal.f32"
PAYLOAD_DTYPE = "<f4"


class ArchiveError(ValueError):
    pass


class NoRestingBlockError(ArchiveError):
    """The recording carries no usable session-start resting block."""


@dataclass(frozen=True)
class ChannelLayout:
    names: tuple
    selected: tuple = DEFAULT_CHANNELS

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "selected", tuple(self.selected))
        if len(set(self.names)) != len(self.names):
            raise ArchiveError("duplicate channel names")
        if len(set(self.selected)) != len(self.selected):
            raise ArchiveError("duplicate channels in selection")
        missing = [c for c in self.selected if c not in self.names]
        if missing:
            raise ArchiveError(f"unknown channel label(s) in selection: {missing}")

    @property
    def selected_index(self):
        return [self.names.index(c) for c in self.selected]


@dataclass(frozen=True)
class ContinuousRecording:
    samples: np.ndarray  # (channels, n_samples)
    sample_rate: float
    channels: ChannelLayout
    events: tuple = ()  # ((sample_index, code), ...)
    subject_id: str = ""
    resting_offsets: dict = None  # code -> sample index, used when events lack them

    def __post_init__(self):
        if self.samples.ndim != 2:
            raise ArchiveError("samples must be (channels, n_samples)")
        if self.samples.shape[0] != len(self.channels.names):
            raise ArchiveError("channel count does not match layout")
        if self.sample_rate <= 0:
            raise ArchiveError("sample rate must be positive")
        n = self.n_samples
        for idx, code in self.events:
            # rest_end may sit exactly at the end of the signal
            upper = n if code == "rest_end" else n - 1
            if not 0 <= idx <= upper:
                raise ArchiveError(f"event {code} at {idx} outside signal of length {n}")

    @property
    def n_samples(self):
        return self.samples.shape[1]

    @property
    def duration_s(self):
        return self.n_samples / self.sample_rate

    def select(self, names=None):
        """Recording restricted to ``names`` (default: the layout selection)."""
        names = tuple(self.channels.selected if names is None else names)
        layout = ChannelLayout(self.channels.names, names)
        return replace(self, samples=self.samples[layout.selected_index],
                       channels=ChannelLayout(names, names))

    def slice(self, start, stop):
        events = tuple((i - start, c) for i, c in self.events if start <= i < stop)
        return replace(self, samples=self.samples[:, start:stop], events=events,
                       resting_offsets=None)


@dataclass(frozen=True)
class TrialEpochSet:
    data: np.ndarray  # (trials, channels, samples)
    labels: np.ndarray  # int, LEFT / RIGHT
    window: tuple
    sample_rate: float
    channels: tuple
    subject_id: str = ""

    def __len__(self):
        return self.data.shape[0]


@dataclass(frozen=True)
class RestingSegments:
    eyes_open: ContinuousRecording
    eyes_closed: ContinuousRecording
    eye_movement: ContinuousRecording
    durations: dict = field(default_factory=dict)

    def get(self, mode):
        return {"open": self.eyes_open, "closed": self.eyes_closed,
                "movement": self.eye_movement}[mode]


# ---------------------------------------------------------------------------
# archive IO
# ---------------------------------------------------------------------------

def write_recording(rec, path):
    """Write ``rec`` as an epoch archive directory at ``path``."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    payload = np.ascontiguousarray(rec.samples, dtype=PAYLOAD_DTYPE)
    payload.tofile(path / PAYLOAD_NAME)
    manifest = {
        "subject_id": rec.subject_id,
        "sample_rate_hz": rec.sample_rate,
        "channels": list(rec.channels.names),
        "n_samples": rec.n_samples,
        "events": [[int(i), c] for i, c in rec.events],
        "resting_offsets": ({k: int(v) for k, v in rec.resting_offsets.items()}
                            if rec.resting_offsets else None),
        "payload": {"file": PAYLOAD_NAME, "dtype": "float32-le", "layout": "channel-major"},
    }
    (path / MANIFEST_NAME).write_text(json.dumps(manifest, indent=1))
    return path


def read_manifest(path):
    mpath = Path(path) / MANIFEST_NAME
    if not mpath.is_file():
        raise ArchiveError(f"missing manifest: {mpath}")
    manifest = json.loads(mpath.read_text())
    for key in ("sample_rate_hz", "channels", "n_samples", "events", "payload"):
        if key not in manifest:
            raise ArchiveError(f"manifest lacks {key!r}")
    if manifest["payload"].get("dtype") != "float32-le":
        raise ArchiveError(f"unsupported payload dtype {manifest['payload'].get('dtype')!r}")
    if manifest["payload"].get("layout", "channel-major") != "channel-major":
        raise ArchiveError("only channel-major payloads are supported")
    unknown = {c for _, c in manifest["events"]} - EVENT_CODES
    if unknown:
        raise ArchiveError(f"unknown event codes {sorted(unknown)}")
    return manifest


def load_recording(archive_path, selected=DEFAULT_CHANNELS):
    path = Path(archive_path)
    manifest = read_manifest(path)
    n_ch = len(manifest["channels"])
    n = int(manifest["n_samples"])
    ppath = path / manifest["payload"]["file"]
    if not ppath.is_file():
        raise ArchiveError(f"missing payload: {ppath}")
    raw = np.fromfile(ppath, dtype=PAYLOAD_DTYPE)
    if raw.size != n_ch * n:
        raise ArchiveError(
            f"payload shape mismatch: {raw.size} values for declared {n_ch} x {n}")
    layout = ChannelLayout(manifest["channels"], selected)
    return ContinuousRecording(
        samples=raw.reshape(n_ch, n),
        sample_rate=float(manifest["sample_rate_hz"]),
        channels=layout,
        events=tuple((int(i), str(c)) for i, c in manifest["events"]),
        subject_id=str(manifest.get("subject_id", "")),
        resting_offsets=manifest.get("resting_offsets"),
    )


def convert_tree(src, dst):
    """Validate an already-converted archive tree and copy it to ``dst``.

    ``src`` is either one archive or a directory of archives (one per
    subject).  Raw GDF/EDF parsing is not supported.
    """
    src, dst = Path(src), Path(dst)
    archives = [src] if (src / MANIFEST_NAME).is_file() else sorted(
        p for p in src.iterdir() if (p / MANIFEST_NAME).is_file())
    if not archives:
        raise ArchiveError(f"no archives found under {src}")
    for a in archives:
        load_recording(a, selected=())
    if archives == [src]:
        shutil.copytree(src, dst, dirs_exist_ok=True)
    else:
        for a in archives:
            shutil.copytree(a, dst / a.name, dirs_exist_ok=True)
        ds = src / "dataset.json"
        if ds.is_file():
            shutil.copy2(ds, dst / "dataset.json")
    return [a.name for a in archives]


# ---------------------------------------------------------------------------
# epoching and resting segmentation
# ---------------------------------------------------------------------------

def extract_epochs(rec, window=(0.0, 4.0), class_filter=CLASSES):
    """Cut one epoch per admitted cue, over the layout's selected channels."""
    unknown = set(class_filter) - set(CLASSES)
    if unknown:
        raise ValueError(f"classes outside {CLASSES}: {sorted(unknown)}")
    admitted = {CLASSES.index(c) for c in class_filter}
    fs = rec.sample_rate
    off0 = int(round(window[0] * fs))
    off1 = int(round(window[1] * fs))
    if off1 <= off0:
        raise ValueError(f"empty epoch window {window}")
    cues = [(i, CUE_CODES[c]) for i, c in rec.events
            if c in CUE_CODES and CUE_CODES[c] in admitted]
    if not cues:
        raise ArchiveError("no cue events of the requested classes")
    starts = np.array([i + off0 for i, _ in cues])
    if starts.min() < 0 or starts.max() + (off1 - off0) > rec.n_samples:
        raise ArchiveError(f"epoch window {window} exceeds recording bounds")
    ch = rec.channels.selected_index
    idx = starts[:, None] + np.arange(off1 - off0)[None, :]
    data = rec.samples[ch][:, idx].transpose(1, 0, 2)
    labels = np.array([lab for _, lab in cues], dtype=np.int64)
    return TrialEpochSet(data=data, labels=labels, window=tuple(window), sample_rate=fs,
                         channels=rec.channels.selected, subject_id=rec.subject_id)


def _resting_bounds(rec):
    marks = {c: i for i, c in rec.events if c in REST_CODES}
    if not all(c in marks for c in REST_CODES) and rec.resting_offsets:
        marks = {c: int(rec.resting_offsets[c]) for c in REST_CODES
                 if rec.resting_offsets.get(c) is not None}
    if not all(c in marks for c in REST_CODES):
        raise NoRestingBlockError(f"no resting block in recording {rec.subject_id or '?'}")
    bounds = [marks[c] for c in REST_CODES]
    if any(b1 <= b0 for b0, b1 in zip(bounds, bounds[1:])) or bounds[-1] > rec.n_samples:
        raise NoRestingBlockError(f"malformed resting block boundaries {bounds}")
    return bounds


def segment_resting(rec):
    """Split the session-start resting block into its three parts."""
    bounds = _resting_bounds(rec)
    fs = rec.sample_rate
    parts, durations = [], {}
    for mode, (b0, b1) in zip(EYE_MODES, zip(bounds, bounds[1:])):
        dur = (b1 - b0) / fs
        if abs(dur - NOMINAL_REST_S[mode]) > REST_SLACK_S + 1e-9:
            raise NoRestingBlockError(
                f"{mode} segment lasts {dur:.2f} s, nominal {NOMINAL_REST_S[mode]:.0f} s")
        parts.append(rec.slice(b0, b1))
        durations[mode] = dur
    return RestingSegments(*parts, durations=durations)


def truncate_segment(seg, duration_s):
    """First ``duration_s`` seconds of ``seg``."""
    if duration_s <= 0:
        raise ValueError("duration must be positive")
    n = int(round(duration_s * seg.sample_rate))
    if n > seg.n_samples:
        raise ValueError(
            f"requested {duration_s} s but segment holds {seg.duration_s:.2f} s")
    return seg.slice(0, n)
