"""Seeded synthetic motor-imagery recordings.

Each channel is an AR(2) low-pass background plus a narrow AR(2) resonator
in the mu band.  During imagery the mu amplitude on the hemisphere
contralateral to the imagined hand drops by the ERD contrast (full on
C3/C4, half on the other same-side channels).  Every channel is finally
multiplied by a per-subject electrode gain drawn log-uniformly from
``gain_range``; the resting block shares those gains, which is what the
resting-state division is meant to cancel.
"""
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .dataio import DEFAULT_CHANNELS, ChannelLayout, ContinuousRecording, write_recording

LEFT_HEMI = ("FC3", "C5", "C3", "C1", "CP3")
RIGHT_HEMI = ("FC4", "C6", "C4", "C2", "CP4")
CORE = ("C3", "C4")


def default_subject_ids(n):
    ids = [f"S{k}" for k in range(1, n + 2) if k != 4]
    return ids[:n]


@dataclass
class SynthSpec:
    n_subjects: int = 8
    trials_per_class: int = 72
    fs: float = 250.0
    channels: tuple = DEFAULT_CHANNELS
    # background: x[t] = a1 x[t-1] + a2 x[t-2] + e[t]  (poles 0.95 and 0.5)
    ar_coeffs: tuple = (1.45, -0.475)
    noise_std: float = 1.0
    common_mode: float = 0.3
    # mu rhythm: resonator of radius mu_radius at a per-subject frequency
    mu_freq_range: tuple = (10.0, 12.0)
    mu_radius: float = 0.98
    mu_amplitude: float = 4.0
    mu_channel_spread: float = 0.3
    erd_contrast: float = 0.5
    erd_jitter: float = 0.3
    gain_range: tuple = (0.25, 4.0)
    rest_durations: tuple = (120.0, 120.0, 60.0)
    eyes_closed_mu_factor: float = 1.5
    eye_movement_drift: float = 40.0
    trial_s: float = 7.5
    trial_jitter_s: float = 1.0
    seed: int = 0
    subject_ids: list = None
    omit_resting: list = field(default_factory=list)

    def __post_init__(self):
        self.channels = tuple(self.channels)
        self.ar_coeffs = tuple(self.ar_coeffs)
        self.mu_freq_range = tuple(self.mu_freq_range)
        self.gain_range = tuple(self.gain_range)
        self.rest_durations = tuple(self.rest_durations)
        self.omit_resting = list(self.omit_resting)
        if self.subject_ids is None:
            self.subject_ids = default_subject_ids(self.n_subjects)
        self.subject_ids = list(self.subject_ids)
        self.validate()

    def validate(self):
        if self.n_subjects < 1 or len(self.subject_ids) != self.n_subjects:
            raise ValueError("n_subjects must be >= 1 and match subject_ids")
        if self.trials_per_class < 1:
            raise ValueError("trials_per_class must be >= 1")
        g0, g1 = self.gain_range
        if not 0 < g0 <= g1:
            raise ValueError(f"invalid gain range {self.gain_range}")
        if not 0 <= self.erd_contrast < 1:
            raise ValueError("ERD contrast must lie in [0, 1)")
        if self.fs <= 0:
            raise ValueError("sample rate must be positive")
        if self.trial_s < 6.0:
            raise ValueError("trials must last at least 6 s (cue at 2 s, imagery to 6 s)")
        a1, a2 = self.ar_coeffs
        if not _ar2_stable(a1, a2):
            raise ValueError(f"AR(2) coefficients {self.ar_coeffs} are not stable")
        if not 0 < self.mu_radius < 1:
            raise ValueError("mu resonator radius must lie in (0, 1)")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class SubjectGroundTruth:
    subject_id: str
    gains: list  # per channel
    mu_freq: float
    mu_levels: list  # per-channel baseline mu amplitude (pre-gain)
    # expected 8-30 Hz power (uV^2) per channel during imagery, by class
    band_power: dict
    rest_band_power: dict
    cue_onsets: list = field(default_factory=list)


def _ar2_stable(a1, a2):
    return abs(a2) < 1 and abs(a1) < 1 - a2


def ar2_variance(a1, a2, sigma):
    return (1 - a2) * sigma ** 2 / ((1 + a2) * ((1 - a2) ** 2 - a1 ** 2))


def ar2_band_power(a1, a2, sigma, fs, low, high, n_grid=20001):
    """Integral of the one-sided AR(2) spectral density over [low, high] Hz."""
    f = np.linspace(low, high, n_grid)
    z = np.exp(-2j * np.pi * f / fs)
    dens = 2.0 * sigma ** 2 / fs / np.abs(1 - a1 * z - a2 * z * z) ** 2
    return float(np.sum(0.5 * (dens[1:] + dens[:-1]) * np.diff(f)))


def _mu_coeffs(freq, radius, fs):
    return 2 * radius * np.cos(2 * np.pi * freq / fs), -radius ** 2


def _erd_weights(channels, cls):
    """Per-channel attenuation weight for class 0 (left) or 1 (right)."""
    side = RIGHT_HEMI if cls == 0 else LEFT_HEMI
    return np.array([(1.0 if ch in CORE else 0.5) if ch in side else 0.0 for ch in channels])


def _subject_rng(spec, index):
    return np.random.default_rng(np.random.SeedSequence([int(spec.seed), int(index)]))


def generate_subject(spec, index):
    """Continuous recording and ground truth for subject ``index``."""
    rng = _subject_rng(spec, index)
    sid = spec.subject_ids[index]
    fs = spec.fs
    chans = spec.channels
    n_ch = len(chans)
    a1, a2 = spec.ar_coeffs

    lg0, lg1 = np.log(spec.gain_range[0]), np.log(spec.gain_range[1])
    gains = np.exp(rng.uniform(lg0, lg1, size=n_ch))
    mu_freq = rng.uniform(*spec.mu_freq_range)
    mu_levels = spec.mu_amplitude * np.exp(
        rng.uniform(-spec.mu_channel_spread, spec.mu_channel_spread, size=n_ch))

    with_rest = sid not in spec.omit_resting
    rest_n = [int(round(d * fs)) for d in spec.rest_durations] if with_rest else [0, 0, 0]
    n_rest = sum(rest_n)

    labels = np.repeat([0, 1], spec.trials_per_class)
    rng.shuffle(labels)
    trial_lens = np.round((spec.trial_s + rng.uniform(0, spec.trial_jitter_s, labels.size)) * fs)
    trial_lens = trial_lens.astype(np.int64)
    trial_starts = n_rest + np.concatenate([[0], np.cumsum(trial_lens)[:-1]])
    n_total = int(n_rest + trial_lens.sum())
    cue_off = int(round(2.0 * fs))
    imag_n = int(round(4.0 * fs))
    cues = trial_starts + cue_off

    burn = int(5 * fs)
    innov = rng.standard_normal((n_ch + 1, n_total + burn)) * spec.noise_std
    bg = _kernels.ar2(a1, a2, innov)[:, burn:]
    # shared component across electrodes, removed again by re-referencing
    bg = bg[:n_ch] + spec.common_mode * bg[n_ch:]

    m1, m2 = _mu_coeffs(mu_freq, spec.mu_radius, fs)
    mu_sigma = 1.0 / np.sqrt(ar2_variance(m1, m2, 1.0))
    mu = _kernels.ar2(m1, m2, rng.standard_normal((n_ch, n_total + burn)) * mu_sigma)[:, burn:]

    env = np.ones((n_ch, n_total))
    if with_rest:
        e0 = rest_n[0]
        env[:, e0:e0 + rest_n[1]] = spec.eyes_closed_mu_factor
    depth = spec.erd_contrast * np.clip(
        1 + rng.uniform(-spec.erd_jitter, spec.erd_jitter, labels.size), 0, None)
    depth = np.minimum(depth, 0.99)
    for cue, lab, dep in zip(cues, labels, depth):
        w = _erd_weights(chans, lab)
        env[:, cue:cue + imag_n] = (1 - dep * w)[:, None]

    x = bg + mu_levels[:, None] * env * mu
    if with_rest and spec.eye_movement_drift > 0:
        s0, s1 = rest_n[0] + rest_n[1], n_rest
        t = np.arange(s1 - s0) / fs
        frontal = np.array([1.0 if ch.startswith("F") else 0.3 for ch in chans])
        drift = spec.eye_movement_drift * np.sin(2 * np.pi * 0.4 * t + rng.uniform(0, 2 * np.pi))
        x[:, s0:s1] += frontal[:, None] * drift[None, :]
    x *= gains[:, None]

    events = []
    if with_rest:
        marks = np.cumsum([0] + rest_n)
        events += [(int(m), c) for m, c in zip(
            marks, ("rest_eo_start", "rest_ec_start", "rest_em_start", "rest_end"))]
    events += [(int(c), "cue_left" if lab == 0 else "cue_right") for c, lab in zip(cues, labels)]

    rec = ContinuousRecording(
        samples=x.astype(np.float32), sample_rate=fs,
        channels=ChannelLayout(chans, chans), events=tuple(events), subject_id=sid)

    truth = _ground_truth(spec, sid, gains, mu_freq, mu_levels, cues)
    return rec, truth


def _ground_truth(spec, sid, gains, mu_freq, mu_levels, cues, band=(8.0, 30.0)):
    a1, a2 = spec.ar_coeffs
    fs = spec.fs
    bg_sigma = spec.noise_std * np.sqrt(1 + spec.common_mode ** 2)
    bg_bp = ar2_band_power(a1, a2, bg_sigma, fs, *band)
    m1, m2 = _mu_coeffs(mu_freq, spec.mu_radius, fs)
    mu_bp = ar2_band_power(m1, m2, 1.0 / np.sqrt(ar2_variance(m1, m2, 1.0)), fs, *band)
    out = {}
    for cls, name in ((0, "left"), (1, "right")):
        w = _erd_weights(spec.channels, cls)
        # E[(1 - d w)^2] with depth d uniform on c * (1 +- jitter)
        att_sq = (1 - spec.erd_contrast * w) ** 2 + w ** 2 * (spec.erd_contrast * spec.erd_jitter) ** 2 / 3
        out[name] = (gains ** 2 * (bg_bp + mu_levels ** 2 * att_sq * mu_bp)).tolist()
    rest = {
        "open": (gains ** 2 * (bg_bp + mu_levels ** 2 * mu_bp)).tolist(),
        "closed": (gains ** 2 * (bg_bp + (spec.eyes_closed_mu_factor * mu_levels) ** 2 * mu_bp)).tolist(),
    }
    return SubjectGroundTruth(subject_id=sid, gains=gains.tolist(), mu_freq=float(mu_freq),
                              mu_levels=mu_levels.tolist(), band_power=out,
                              rest_band_power=rest, cue_onsets=[int(c) for c in cues])


def generate_dataset(spec, out=None):
    """``{subject_id: (recording, truth)}``; also written to ``out`` if given."""
    data = {}
    for k, sid in enumerate(spec.subject_ids):
        data[sid] = generate_subject(spec, k)
    if out is not None:
        write_dataset(spec, data, out)
    return data


def write_dataset(spec, data, out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for sid, (rec, truth) in data.items():
        write_recording(rec, out / sid)
        (out / sid / "ground_truth.json").write_text(json.dumps(asdict(truth), indent=1))
    (out / "dataset.json").write_text(json.dumps(
        {"subjects": list(data), "synth_spec": spec.to_dict()}, indent=1))
    return out
