import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import signal

from restcal import dsp

FS = 250.0


@pytest.fixture(scope="module")
def filt():
    return dsp.design_butterworth_bandpass(dsp.BandpassSpec(8, 30, 3, FS))


def _direct_response(sos, f, fs):
    """|H| by multiplying out the full rational transfer function."""
    b, a = np.array([1.0]), np.array([1.0])
    for sec in sos:
        b = np.polymul(b, sec[:3])
        a = np.polymul(a, sec[3:])
    z = np.exp(2j * np.pi * np.asarray(f) / fs)
    return np.abs(np.polyval(b, z) / np.polyval(a, z))


# --- CAR --------------------------------------------------------------------

def test_car_identical_channels_gives_zero():
    x = np.tile(np.sin(np.arange(50.0)), (4, 1))
    np.testing.assert_array_equal(dsp.car_filter(x), np.zeros_like(x))


def test_car_zero_mean_pair_unchanged():
    x = np.vstack([np.ones(20), -np.ones(20)])
    np.testing.assert_array_equal(dsp.car_filter(x), x)


def test_car_random_block_has_zero_channel_mean():
    x = np.random.default_rng(0).normal(size=(11, 1000)) * 30
    y = dsp.car_filter(x)
    # direct recomputation of the per-sample cross-channel mean
    means = np.array([sum(y[c, t] for c in range(11)) / 11 for t in range(0, 1000, 37)])
    assert np.max(np.abs(means)) <= 1e-9 * np.max(np.abs(x))


def test_car_idempotent_and_batched():
    x = np.random.default_rng(1).normal(size=(3, 11, 200))
    y = dsp.car_filter(x)
    np.testing.assert_allclose(dsp.car_filter(y), y, atol=1e-12)
    np.testing.assert_allclose(y[1], dsp.car_filter(x[1]))


def test_car_rejects_single_channel():
    with pytest.raises(ValueError):
        dsp.car_filter(np.ones((1, 10)))


# --- Butterworth design ---------------------------------------------------

def test_band_centre_gain(filt):
    assert abs(_direct_response(filt.sos, [np.sqrt(8 * 30)], FS)[0] - 1.0) < 0.05


@pytest.mark.parametrize("f", [8.0, 30.0])
def test_edge_gain_is_minus_3db(filt, f):
    g = _direct_response(filt.sos, [f], FS)[0]
    assert 0.6 <= g <= 0.8
    assert g == pytest.approx(1 / np.sqrt(2), abs=1e-6)


@pytest.mark.parametrize("f", [2.0, 60.0])
def test_stopband_gain(filt, f):
    assert _direct_response(filt.sos, [f], FS)[0] < 0.05


def test_design_matches_scipy(filt):
    ref = signal.butter(3, [8, 30], btype="bandpass", fs=FS, output="sos")
    f = np.linspace(0.5, 124.5, 400)
    _, h = signal.sosfreqz(ref, worN=f, fs=FS)
    np.testing.assert_allclose(np.abs(filt.frequency_response(f)), np.abs(h), atol=1e-10)


def test_design_is_stable(filt):
    assert filt.is_stable()
    assert filt.sos.shape == (3, 6)


@settings(max_examples=60, deadline=None)
@given(low=st.floats(0.5, 50), width=st.floats(1.0, 60), order=st.integers(1, 6),
       fs=st.sampled_from([128.0, 250.0, 500.0]))
def test_random_valid_specs_are_stable(low, width, order, fs):
    high = low + width
    if high >= 0.49 * fs:
        return
    f = dsp.design_butterworth_bandpass(dsp.BandpassSpec(low, high, order, fs))
    assert np.all(np.abs(f.poles()) < 1.0)


@pytest.mark.parametrize("low,high", [(8, 125), (8, 130), (30, 8), (0, 30)])
def test_invalid_band_edges(low, high):
    with pytest.raises(ValueError):
        dsp.BandpassSpec(low, high, 3, FS)


# --- IIR application --------------------------------------------------------

def test_iir_zero_in_zero_out(filt):
    np.testing.assert_array_equal(dsp.apply_iir(filt, np.zeros((2, 100))), 0.0)


def test_iir_matches_scipy_sosfilt(filt):
    x = np.random.default_rng(2).normal(size=(4, 3, 500))
    np.testing.assert_allclose(dsp.apply_iir(filt, x), signal.sosfilt(filt.sos, x, axis=-1),
                               rtol=1e-10, atol=1e-12)


def test_iir_zero_phase_matches_forward_backward(filt):
    x = np.random.default_rng(3).normal(size=(2, 400))
    fwd = signal.sosfilt(filt.sos, x, axis=-1)
    ref = signal.sosfilt(filt.sos, fwd[:, ::-1], axis=-1)[:, ::-1]
    np.testing.assert_allclose(dsp.apply_iir(filt, x, zero_phase=True), ref, rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("f,lo,hi", [(15.0, 0.9, 1.1), (2.0, 0.0, 0.05)])
def test_iir_steady_state_sine(filt, f, lo, hi):
    t = np.arange(int(20 * FS)) / FS
    y = dsp.apply_iir(filt, np.sin(2 * np.pi * f * t)[None])[0]
    amp = np.max(np.abs(y[int(10 * FS):]))
    assert lo <= amp <= hi
    # the steady-state gain is |H(f)|
    assert amp == pytest.approx(_direct_response(filt.sos, [f], FS)[0], rel=1e-2, abs=1e-3)


def test_iir_linearity(filt):
    rng = np.random.default_rng(4)
    x, y = rng.normal(size=(2, 3, 300))
    lhs = dsp.apply_iir(filt, 2.5 * x - 0.7 * y)
    rhs = 2.5 * dsp.apply_iir(filt, x) - 0.7 * dsp.apply_iir(filt, y)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-9, atol=1e-9 * np.abs(rhs).max())


def test_iir_rejects_non_finite(filt):
    x = np.zeros((1, 10))
    x[0, 3] = np.nan
    with pytest.raises(ValueError):
        dsp.apply_iir(filt, x)


# --- FFT band-pass ------------------------------------------------------------

def _sine(f, seconds=4.0):
    t = np.arange(int(seconds * FS)) / FS
    return np.sin(2 * np.pi * f * t)


def test_fft_bandpass_passes_in_band_sine():
    x = _sine(20.0)
    assert np.max(np.abs(dsp.fft_bandpass(x, 8, 30, FS) - x)) < 1e-6


def test_fft_bandpass_removes_out_of_band_sine():
    assert np.max(np.abs(dsp.fft_bandpass(_sine(5.0), 8, 30, FS))) < 1e-6


def test_fft_bandpass_dc_removed():
    np.testing.assert_allclose(dsp.fft_bandpass(np.full(500, 7.0), 8, 30, FS), 0.0, atol=1e-12)


def test_fft_bandpass_edges_inclusive():
    # at 4 s the bins sit on a 0.25 Hz grid, so 8 and 30 Hz are bin centres
    for f in (8.0, 30.0):
        x = _sine(f)
        assert np.max(np.abs(dsp.fft_bandpass(x, 8, 30, FS) - x)) < 1e-9


def test_fft_bandpass_projection_and_homogeneity():
    x = np.random.default_rng(5).normal(size=(3, 999))
    y = dsp.fft_bandpass(x, 8, 30, FS)
    np.testing.assert_allclose(dsp.fft_bandpass(y, 8, 30, FS), y, atol=1e-9 * np.abs(y).max())
    np.testing.assert_allclose(dsp.fft_bandpass(3.0 * x, 8, 30, FS), 3.0 * y, rtol=1e-12, atol=1e-12)


def test_fft_bandpass_degenerate_length():
    with pytest.raises(ValueError):
        dsp.fft_bandpass(np.ones(1), 8, 30, FS)


# --- Welch / band power ----------------------------------------------------

def test_welch_zero_signal():
    s = dsp.welch_psd(np.zeros(1000), FS)
    np.testing.assert_array_equal(s.density, 0.0)
    assert s.freqs[0] == 0 and s.freqs[-1] == FS / 2
    assert s.resolution == 1.0 and s.n_segments == 7


def test_welch_matches_scipy():
    x = np.random.default_rng(6).normal(size=(2, 1000))
    f, p = signal.welch(x, fs=FS, window="hann", nperseg=250, noverlap=125, axis=-1)
    s = dsp.welch_psd(x, FS)
    np.testing.assert_allclose(s.freqs, f)
    np.testing.assert_allclose(s.density, p, rtol=1e-10, atol=1e-15)


def test_welch_unit_sine_parseval():
    x = _sine(20.0, 10.0)
    s = dsp.welch_psd(x, FS)
    total = dsp.band_power(s, 0, FS / 2)
    assert total == pytest.approx(np.var(x), rel=0.10)
    assert total == pytest.approx(0.5, rel=0.10)


def test_welch_white_noise_band_fraction():
    x = np.random.default_rng(7).normal(size=50_000)
    s = dsp.welch_psd(x, FS)
    assert dsp.band_power(s, 8, 30) == pytest.approx(22 / 125 * np.var(x), rel=0.15)
    assert dsp.band_power(s, 0, FS / 2) == pytest.approx(np.var(x), rel=0.10)


def test_welch_homogeneous_degree_two():
    x = np.random.default_rng(8).normal(size=1000)
    a = dsp.welch_psd(x, FS).density
    b = dsp.welch_psd(3.7 * x, FS).density
    np.testing.assert_allclose(b, 3.7 ** 2 * a, rtol=1e-12)


def test_welch_segment_longer_than_signal():
    with pytest.raises(ValueError):
        dsp.welch_psd(np.ones(100), FS, segment_len=250)


def test_band_power_scaling_and_errors():
    x = np.random.default_rng(9).normal(size=1000)
    p1 = dsp.band_power(dsp.welch_psd(x, FS), 8, 30)
    p2 = dsp.band_power(dsp.welch_psd(-4.0 * x, FS), 8, 30)
    assert p2 == pytest.approx(16.0 * p1, rel=1e-12)
    assert p1 >= 0
    with pytest.raises(ValueError):
        dsp.band_power(dsp.welch_psd(x, FS), 10.2, 10.7)
