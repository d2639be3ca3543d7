"""Preprocessing kernels: common average reference, Butterworth band-pass,
FFT-mask band-pass and Welch power spectral density.

All functions are pure.  Multichannel blocks are arrays whose last axis is
time; leading axes (trials, channels) are carried through unchanged.
"""
from dataclasses import dataclass, field

import numpy as np

from . import _kernels


@dataclass(frozen=True)
class BandpassSpec:
    low_hz: float = 8.0
    high_hz: float = 30.0
    order: int = 3
    sample_rate_hz: float = 250.0

    def __post_init__(self):
        nyq = self.sample_rate_hz / 2.0
        if self.sample_rate_hz <= 0:
            raise ValueError("sample rate must be positive")
        if not 0 < self.low_hz < self.high_hz:
            raise ValueError(f"invalid band edges ({self.low_hz}, {self.high_hz})")
        if self.high_hz >= nyq:
            raise ValueError(f"band edge {self.high_hz} Hz is at/above Nyquist ({nyq} Hz)")
        if int(self.order) != self.order or self.order < 1:
            raise ValueError("filter order must be a positive integer")


@dataclass(frozen=True)
class FilterRealization:
    """Cascade of second-order sections, rows ``[b0, b1, b2, 1, a1, a2]``."""

    sos: np.ndarray
    spec: BandpassSpec

    def poles(self):
        return np.concatenate([np.roots(sec[3:]) for sec in self.sos])

    def is_stable(self):
        return bool(np.all(np.abs(self.poles()) < 1.0))

    def frequency_response(self, freqs_hz):
        """Complex response H(e^{jw}) at the given frequencies."""
        z = np.exp(-2j * np.pi * np.asarray(freqs_hz, dtype=float) / self.spec.sample_rate_hz)
        h = np.ones_like(z)
        for b0, b1, b2, a0, a1, a2 in self.sos:
            h *= (b0 + b1 * z + b2 * z * z) / (a0 + a1 * z + a2 * z * z)
        return h


@dataclass(frozen=True)
class SpectrumEstimate:
    freqs: np.ndarray
    density: np.ndarray  # (..., n_freqs), units^2 / Hz
    window: str = "hann"
    segment_len: int = 0
    overlap: float = 0.0
    n_segments: int = 0
    resolution: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "resolution", float(self.freqs[1] - self.freqs[0]))


def car_filter(signal):
    """Subtract the instantaneous cross-channel mean.

    ``signal`` has shape (..., channels, samples).
    """
    x = np.asarray(signal, dtype=float)
    if x.ndim < 2 or x.shape[-2] < 2:
        raise ValueError("common average reference needs at least 2 channels")
    return x - x.mean(axis=-2, keepdims=True)


def _lowpass_prototype_poles(order):
    k = np.arange(1, order + 1)
    return np.exp(1j * np.pi * (2 * k + order - 1) / (2 * order))


def design_butterworth_bandpass(spec=BandpassSpec()):
    """Digital Butterworth band-pass as a cascade of ``spec.order`` biquads.

    Analog prototype -> low-pass to band-pass substitution at pre-warped edges
    -> bilinear transform.  Each section gets one zero at z = 1 and one at
    z = -1; the overall gain is folded into the first section.
    """
    fs = float(spec.sample_rate_hz)
    order = int(spec.order)
    fs2 = 2.0 * fs
    w1 = fs2 * np.tan(np.pi * spec.low_hz / fs)
    w2 = fs2 * np.tan(np.pi * spec.high_hz / fs)
    bw = w2 - w1
    w0sq = w1 * w2

    # s^2 - p*bw*s + w0^2 = 0 for each prototype pole p
    p_lp = _lowpass_prototype_poles(order)
    half = p_lp * bw / 2.0
    disc = np.sqrt(half * half - w0sq + 0j)
    p_bp = np.concatenate([half + disc, half - disc])

    p_z = (fs2 + p_bp) / (fs2 - p_bp)
    # analog gain bw^N; zeros: N at s = 0 (-> z = 1), N at infinity (-> z = -1)
    gain = bw ** order * fs2 ** order / np.prod(fs2 - p_bp)
    gain = float(np.real(gain))

    sections = _pair_poles(p_z)
    sos = np.zeros((order, 6))
    for s, (pa, pb) in enumerate(sections):
        sos[s, :3] = [1.0, 0.0, -1.0]
        sos[s, 3:] = [1.0, -np.real(pa + pb), np.real(pa * pb)]
    sos[0, :3] *= gain
    return FilterRealization(sos=sos, spec=spec)


def _pair_poles(poles, tol=1e-9):
    """Group poles into conjugate (or real) pairs."""
    upper = sorted((p for p in poles if p.imag > tol), key=lambda p: abs(p))
    real = sorted((p.real for p in poles if abs(p.imag) <= tol))
    pairs = [(p, np.conj(p)) for p in upper]
    if len(real) % 2:
        raise ValueError("odd number of real poles cannot be paired")
    pairs += [(complex(real[i]), complex(real[i + 1])) for i in range(0, len(real), 2)]
    return pairs


def apply_iir(filt, signal, zero_phase=False):
    """Causal DF-II-transposed cascade along the last axis.

    With ``zero_phase`` the cascade is run forward then backward.
    """
    x = np.asarray(signal, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("signal contains non-finite values")
    shape = x.shape
    flat = x.reshape(-1, shape[-1])
    y = _kernels.sosfilt(filt.sos, flat)
    if zero_phase:
        y = _kernels.sosfilt(filt.sos, y[:, ::-1])[:, ::-1]
    return y.reshape(shape)


def fft_bandpass(signal, low_hz, high_hz, sample_rate_hz):
    """Zero every rFFT bin whose centre frequency lies outside [low, high]."""
    x = np.asarray(signal, dtype=float)
    n = x.shape[-1]
    if n < 2:
        raise ValueError("fft band-pass needs at least 2 samples")
    spec = np.fft.rfft(x, axis=-1)
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate_hz)
    keep = (freqs >= low_hz) & (freqs <= high_hz)
    spec[..., ~keep] = 0.0
    return np.fft.irfft(spec, n=n, axis=-1)


def _taper(name, n):
    if name == "hann":
        # periodic Hann, as used for spectral analysis
        return 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)
    if name in ("boxcar", "rect"):
        return np.ones(n)
    if name == "hamming":
        return 0.54 - 0.46 * np.cos(2 * np.pi * np.arange(n) / n)
    raise ValueError(f"unknown taper {name!r}")


def welch_psd(signal, sample_rate_hz, segment_len=250, overlap=0.5, window="hann"):
    """One-sided Welch density estimate along the last axis.

    Each segment is mean-removed and tapered; periodograms are averaged and
    scaled by 1 / (fs * sum(w^2)), doubling all bins except DC and Nyquist.
    """
    x = np.asarray(signal, dtype=float)
    n = x.shape[-1]
    segment_len = int(segment_len)
    if segment_len < 2:
        raise ValueError("segment length must be at least 2")
    if segment_len > n:
        raise ValueError(f"segment length {segment_len} exceeds signal length {n}")
    if not 0 <= overlap < 1:
        raise ValueError("overlap must be in [0, 1)")
    step = segment_len - int(np.floor(segment_len * overlap))
    step = max(step, 1)
    n_seg = 1 + (n - segment_len) // step
    w = _taper(window, segment_len)
    idx = np.arange(segment_len)[None, :] + step * np.arange(n_seg)[:, None]
    segs = x[..., idx]  # (..., n_seg, segment_len)
    segs = segs - segs.mean(axis=-1, keepdims=True)
    spec = np.fft.rfft(segs * w, axis=-1)
    power = (spec.real ** 2 + spec.imag ** 2).mean(axis=-2)
    power /= sample_rate_hz * np.sum(w * w)
    if segment_len % 2:
        power[..., 1:] *= 2.0
    else:
        power[..., 1:-1] *= 2.0
    freqs = np.fft.rfftfreq(segment_len, d=1.0 / sample_rate_hz)
    return SpectrumEstimate(freqs=freqs, density=power, window=window,
                            segment_len=segment_len, overlap=float(overlap), n_segments=int(n_seg))


def band_power(spectrum, low_hz, high_hz):
    """Trapezoidal integral of the density over bins with low <= f <= high."""
    f = spectrum.freqs
    sel = (f >= low_hz) & (f <= high_hz)
    if not sel.any():
        raise ValueError(f"no spectral bins in [{low_hz}, {high_hz}] Hz")
    if low_hz < f[0] or high_hz > f[-1] + 1e-9:
        raise ValueError("band exceeds spectrum range")
    p = spectrum.density[..., sel]
    if p.shape[-1] == 1:
        return np.zeros(p.shape[:-1])
    df = np.diff(f[sel])
    return np.sum(0.5 * (p[..., 1:] + p[..., :-1]) * df, axis=-1)
