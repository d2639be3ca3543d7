import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from restcal import dataio
from restcal.dataio import (DEFAULT_CHANNELS, ArchiveError, ChannelLayout, ContinuousRecording,
                            NoRestingBlockError)

FS = 250.0


def make_recording(n_ch=None, n_samples=None, events=(), names=None, rng=None, fs=FS,
                   offsets=None):
    names = tuple(names or DEFAULT_CHANNELS[:n_ch])
    rng = rng or np.random.default_rng(0)
    x = rng.normal(size=(len(names), n_samples)).astype(np.float32)
    return ContinuousRecording(samples=x, sample_rate=fs,
                               channels=ChannelLayout(names, names), events=tuple(events),
                               subject_id="T1", resting_offsets=offsets)


def rest_events(b=(0, 120, 240, 300)):
    return [(int(s * FS), c) for s, c in zip(b, dataio.REST_CODES)]


def test_default_layout():
    assert DEFAULT_CHANNELS == ("FC3", "FC4", "C5", "C3", "C1", "Cz", "C2", "C4", "C6", "CP3", "CP4")
    assert len(set(DEFAULT_CHANNELS)) == 11
    lay = ChannelLayout(dataio.IV2A_MONTAGE)
    assert [lay.names[i] for i in lay.selected_index] == list(DEFAULT_CHANNELS)


def test_layout_rejects_unknown_selection():
    with pytest.raises(ArchiveError, match="unknown channel"):
        ChannelLayout(("C3", "C4"), ("C3", "Cz"))


def test_zero_payload_roundtrip(tmp_path):
    rec = ContinuousRecording(np.zeros((2, 10), np.float32), FS,
                              ChannelLayout(("C3", "C4"), ("C3", "C4")))
    dataio.write_recording(rec, tmp_path / "a")
    back = dataio.load_recording(tmp_path / "a", selected=("C3", "C4"))
    assert back.samples.shape == (2, 10)
    assert not back.samples.any()


def test_payload_shape_mismatch(tmp_path):
    rec = make_recording(names=dataio.IV2A_MONTAGE, n_samples=50)
    dataio.write_recording(rec, tmp_path / "a")
    raw = np.fromfile(tmp_path / "a" / dataio.PAYLOAD_NAME, dtype="<f4")
    raw[:21 * 50].tofile(tmp_path / "a" / dataio.PAYLOAD_NAME)
    with pytest.raises(ArchiveError, match="payload shape mismatch"):
        dataio.load_recording(tmp_path / "a")


def test_missing_manifest(tmp_path):
    with pytest.raises(ArchiveError, match="missing manifest"):
        dataio.load_recording(tmp_path)


def test_unknown_selected_channel(tmp_path):
    dataio.write_recording(make_recording(names=("C3", "C4"), n_samples=5), tmp_path / "a")
    with pytest.raises(ArchiveError, match="unknown channel"):
        dataio.load_recording(tmp_path / "a")


def test_manifest_layout(tmp_path):
    rec = make_recording(n_ch=11, n_samples=100, events=[(10, "cue_left")])
    dataio.write_recording(rec, tmp_path / "a")
    m = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert m["payload"] == {"file": "signal.f32", "dtype": "float32-le", "layout": "channel-major"}
    # channel-major: first n_samples values are channel 0
    raw = np.fromfile(tmp_path / "a" / "signal.f32", dtype="<f4")
    np.testing.assert_array_equal(raw[:100], rec.samples[0])
    np.testing.assert_array_equal(raw[100:200], rec.samples[1])


@settings(max_examples=25, deadline=None)
@given(hnp.arrays(np.float32, hnp.array_shapes(min_dims=2, max_dims=2, min_side=2, max_side=40),
                  elements=st.floats(-1e6, 1e6, width=32)))
def test_roundtrip_bit_exact(tmp_path_factory, arr):
    path = tmp_path_factory.mktemp("rt")
    names = [f"E{i}" for i in range(arr.shape[0])]
    rec = ContinuousRecording(arr, FS, ChannelLayout(names, names))
    dataio.write_recording(rec, path)
    back = dataio.load_recording(path, selected=names)
    assert back.samples.tobytes() == arr.tobytes()


def test_seeded_roundtrip(tmp_path):
    rec = make_recording(n_ch=11, n_samples=2000, rng=np.random.default_rng(42),
                         events=[(500, "cue_left"), (900, "cue_right")])
    dataio.write_recording(rec, tmp_path / "a")
    back = dataio.load_recording(tmp_path / "a")
    np.testing.assert_array_equal(back.samples, rec.samples)
    assert back.events == rec.events
    assert back.sample_rate == FS


def _trials_recording(n_per_class=72, n_ch=11, trial_s=8.0, lead_s=300.0):
    labels = np.repeat(["cue_left", "cue_right"], n_per_class)
    np.random.default_rng(3).shuffle(labels)
    cues = [int((lead_s + 2.0 + k * trial_s) * FS) for k in range(len(labels))]
    n = int((lead_s + trial_s * len(labels)) * FS)
    events = rest_events() + list(zip(cues, labels))
    return make_recording(names=dataio.IV2A_MONTAGE, n_samples=n, events=events).select(
        DEFAULT_CHANNELS[:n_ch]) if n_ch != 11 else make_recording(
        names=dataio.IV2A_MONTAGE, n_samples=n, events=events)


@pytest.fixture(scope="module")
def trials_rec():
    rec = _trials_recording()
    return ContinuousRecording(rec.samples, rec.sample_rate,
                               ChannelLayout(rec.channels.names, DEFAULT_CHANNELS),
                               rec.events, rec.subject_id)


def test_extract_144_epochs(trials_rec):
    ep = dataio.extract_epochs(trials_rec, (0.0, 4.0))
    assert ep.data.shape == (144, 11, 1000)
    assert np.sum(ep.labels == dataio.LEFT) == 72
    assert ep.channels == DEFAULT_CHANNELS


def test_extract_left_only(trials_rec):
    ep = dataio.extract_epochs(trials_rec, (0.0, 4.0), {"left"})
    assert ep.data.shape[0] == 72
    assert np.all(ep.labels == dataio.LEFT)


def test_extract_one_sample_window(trials_rec):
    assert dataio.extract_epochs(trials_rec, (0.0, 0.004)).data.shape[-1] == 1


def test_epoch_sample_positions(trials_rec):
    ep = dataio.extract_epochs(trials_rec, (0.5, 1.5))
    cue, _ = next(e for e in trials_rec.events if e[1].startswith("cue"))
    ch = trials_rec.channels.selected_index
    np.testing.assert_array_equal(ep.data[0], trials_rec.samples[ch, cue + 125:cue + 375])


def test_epochs_do_not_touch_resting_block(trials_rec):
    ep = dataio.extract_epochs(trials_rec, (0.0, 4.0))
    rest_end = dict((c, i) for i, c in trials_rec.events)["rest_end"]
    cues = [i for i, c in trials_rec.events if c.startswith("cue")]
    assert min(cues) >= rest_end
    assert len(ep) == len(cues)


def test_select_then_epoch_commutes(trials_rec):
    a = dataio.extract_epochs(trials_rec.select(), (0.0, 4.0)).data
    b = dataio.extract_epochs(trials_rec, (0.0, 4.0)).data
    np.testing.assert_array_equal(a, b)


def test_epoch_window_out_of_bounds(trials_rec):
    with pytest.raises(ArchiveError, match="exceeds"):
        dataio.extract_epochs(trials_rec, (0.0, 40.0))


def test_no_matching_events():
    rec = make_recording(n_ch=11, n_samples=1000)
    with pytest.raises(ArchiveError, match="no cue"):
        dataio.extract_epochs(rec)


def test_segment_resting_nominal():
    rec = make_recording(n_ch=11, n_samples=int(310 * FS), events=rest_events())
    segs = dataio.segment_resting(rec)
    assert segs.durations == {"open": 120.0, "closed": 120.0, "movement": 60.0}
    assert segs.eyes_open.n_samples == 30000
    np.testing.assert_array_equal(segs.eye_movement.samples, rec.samples[:, 60000:75000])


def test_segment_resting_slack():
    rec = make_recording(n_ch=11, n_samples=int(300 * FS), events=rest_events((0, 119, 239, 300)))
    segs = dataio.segment_resting(rec)
    assert segs.durations == {"open": 119.0, "closed": 120.0, "movement": 61.0}


def test_segment_resting_outside_slack():
    rec = make_recording(n_ch=11, n_samples=int(300 * FS), events=rest_events((0, 110, 240, 300)))
    with pytest.raises(NoRestingBlockError):
        dataio.segment_resting(rec)


def test_no_resting_block():
    rec = make_recording(n_ch=11, n_samples=5000, events=[(100, "cue_left")])
    with pytest.raises(NoRestingBlockError, match="no resting block"):
        dataio.segment_resting(rec)


def test_resting_offsets_fallback():
    offsets = {c: int(s * FS) for s, c in zip((0, 120, 240, 300), dataio.REST_CODES)}
    rec = make_recording(n_ch=11, n_samples=int(300 * FS), offsets=offsets)
    assert dataio.segment_resting(rec).durations["movement"] == 60.0


def test_truncate_prefix():
    rec = make_recording(n_ch=11, n_samples=int(300 * FS), events=rest_events())
    eo = dataio.segment_resting(rec).eyes_open
    t30 = dataio.truncate_segment(eo, 30)
    assert t30.n_samples == 7500
    np.testing.assert_array_equal(t30.samples, eo.samples[:, :7500])
    np.testing.assert_array_equal(dataio.truncate_segment(eo, 120).samples, eo.samples)
    with pytest.raises(ValueError):
        dataio.truncate_segment(eo, 121)
    with pytest.raises(ValueError):
        dataio.truncate_segment(eo, 0)


@settings(max_examples=30, deadline=None)
@given(d1=st.floats(0.01, 120), d2=st.floats(0.01, 120))
def test_truncate_prefix_property(d1, d2):
    d1, d2 = sorted((d1, d2))
    rec = make_recording(n_ch=2, n_samples=int(120 * FS))
    a = dataio.truncate_segment(rec, d1).samples
    b = dataio.truncate_segment(rec, d2).samples
    np.testing.assert_array_equal(b[:, :a.shape[1]], a)


def test_event_outside_signal_rejected():
    with pytest.raises(ArchiveError):
        make_recording(n_ch=2, n_samples=10, events=[(10, "cue_left")])


def test_convert_tree_validates(tmp_path):
    dataio.write_recording(make_recording(n_ch=11, n_samples=20), tmp_path / "src" / "S1")
    assert dataio.convert_tree(tmp_path / "src", tmp_path / "dst") == ["S1"]
    assert (tmp_path / "dst" / "S1" / "manifest.json").is_file()
    (tmp_path / "bad").mkdir()
    with pytest.raises(ArchiveError):
        dataio.convert_tree(tmp_path / "bad", tmp_path / "dst2")
