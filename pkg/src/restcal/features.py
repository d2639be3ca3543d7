"""Temporal features, resting-state calibration and z-score normalization.

Five features per channel, channel-major: ``[psd, rms, mean, std, logvar]``
where psd is the 8-30 Hz Welch band power, std is the population standard
deviation and logvar is ``ln(var + eps_var)``.
"""
from dataclasses import dataclass

import numpy as np

from . import dsp

FEATURE_KINDS = ("psd", "rms", "mean", "std", "logvar")
HOMOGENEOUS_KINDS = ("psd", "rms", "mean", "std")

EPS_VAR = 1e-20
EPS_DIV = 1e-12
STD_FLOOR = 1e-12


@dataclass(frozen=True)
class FeatureParams:
    psd_band: tuple = (8.0, 30.0)
    segment_len: int = 250
    overlap: float = 0.5
    window: str = "hann"
    eps_var: float = EPS_VAR


def feature_names(channels):
    return [f"{ch}_{kind}" for ch in channels for kind in FEATURE_KINDS]


def kind_mask(n_channels, kinds):
    """Boolean mask over a channel-major feature vector selecting ``kinds``."""
    per = np.array([k in kinds for k in FEATURE_KINDS])
    return np.tile(per, n_channels)


def channel_features(x, fs, params=FeatureParams()):
    """Features of the last axis of ``x``; returns shape ``x.shape[:-1] + (5,)``."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] < 2:
        raise ValueError("need at least 2 samples per channel")
    seg = min(params.segment_len, x.shape[-1])
    spec = dsp.welch_psd(x, fs, segment_len=seg, overlap=params.overlap, window=params.window)
    psd = dsp.band_power(spec, *params.psd_band)
    mean = x.mean(axis=-1)
    var = x.var(axis=-1)
    rms = np.sqrt(np.mean(x * x, axis=-1))
    return np.stack([psd, rms, mean, np.sqrt(var), np.log(var + params.eps_var)], axis=-1)


def trial_features(epoch, fs, n_channels=None, params=FeatureParams()):
    """55-vector (for 11 channels) of one epoch, or (trials, 55) for a stack."""
    epoch = np.asarray(epoch, dtype=float)
    if n_channels is not None and epoch.shape[-2] != n_channels:
        raise ValueError(f"expected {n_channels} channels, got {epoch.shape[-2]}")
    f = channel_features(epoch, fs, params)
    return f.reshape(f.shape[:-2] + (-1,))


@dataclass(frozen=True)
class CalibrationVector:
    values: np.ndarray
    eye_mode: str
    duration_s: float
    names: tuple = ()


def resting_features(segment, fs, eye_mode="open", duration_s=None, names=(),
                     params=FeatureParams(), min_duration_s=2.0):
    """Calibration vector from one whole (band-passed, re-referenced) segment."""
    segment = np.asarray(segment, dtype=float)
    dur = segment.shape[-1] / fs
    if dur < min_duration_s:
        raise ValueError(f"resting segment of {dur:.2f} s is shorter than {min_duration_s} s")
    return CalibrationVector(values=trial_features(segment, fs, params=params),
                             eye_mode=eye_mode,
                             duration_s=dur if duration_s is None else duration_s,
                             names=tuple(names))


def guarded(rest, eps=EPS_DIV):
    return np.abs(np.asarray(rest, dtype=float)) < eps


def calibrate(task, rest, eps=EPS_DIV):
    """Element-wise ``task / rest`` with ``|rest| < eps`` replaced by ``+-eps``.

    ``task`` may be one vector or a (trials, features) matrix; ``rest`` is
    broadcast over rows.
    """
    task = np.asarray(task, dtype=float)
    rest = np.asarray(getattr(rest, "values", rest), dtype=float)
    if task.shape[-1] != rest.shape[-1]:
        raise ValueError(f"layout mismatch: {task.shape[-1]} task vs {rest.shape[-1]} rest features")
    sign = np.where(rest < 0, -1.0, 1.0)
    denom = np.where(guarded(rest, eps), sign * eps, rest)
    return task / denom


@dataclass
class FeatureMatrix:
    values: np.ndarray  # (rows, features)
    labels: np.ndarray
    columns: list
    subject_ids: np.ndarray = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.labels = np.asarray(self.labels)
        self.columns = list(self.columns)
        if self.values.ndim != 2:
            raise ValueError("feature matrix must be 2-D")
        if len(self.labels) != self.values.shape[0]:
            raise ValueError("label count does not match row count")
        if len(self.columns) != self.values.shape[1]:
            raise ValueError("column names do not match feature count")
        if len(set(self.columns)) != len(self.columns):
            raise ValueError("column names must be unique")
        if self.subject_ids is None:
            self.subject_ids = np.full(len(self.labels), "", dtype=object)
        self.subject_ids = np.asarray(self.subject_ids, dtype=object)

    @property
    def n_rows(self):
        return self.values.shape[0]

    def rows(self, mask):
        return FeatureMatrix(self.values[mask], self.labels[mask], self.columns,
                             self.subject_ids[mask])

    def with_values(self, values, columns=None):
        return FeatureMatrix(values, self.labels, self.columns if columns is None else columns,
                             self.subject_ids)

    @classmethod
    def concat(cls, parts):
        parts = list(parts)
        return cls(np.vstack([p.values for p in parts]),
                   np.concatenate([p.labels for p in parts]),
                   parts[0].columns,
                   np.concatenate([p.subject_ids for p in parts]))


@dataclass(frozen=True)
class NormalizationStats:
    mean: np.ndarray
    std: np.ndarray
    floored: np.ndarray


def fit_normalizer(train, floor=STD_FLOOR):
    x = getattr(train, "values", train)
    if x.shape[0] < 2:
        raise ValueError("normalizer needs at least 2 training rows")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    floored = std < floor
    return NormalizationStats(mean=mean, std=np.where(floored, floor, std), floored=floored)


def apply_normalizer(stats, m):
    """z-score with training statistics; floored (constant) columns map to 0."""
    x = getattr(m, "values", m)
    z = (x - stats.mean) / stats.std
    z[:, stats.floored] = 0.0
    return m.with_values(z) if isinstance(m, FeatureMatrix) else z


def invert_normalizer(stats, z):
    zv = getattr(z, "values", z)
    x = zv * stats.std + stats.mean
    return z.with_values(x) if isinstance(z, FeatureMatrix) else x
