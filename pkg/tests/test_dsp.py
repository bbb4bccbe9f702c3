import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.io import wavfile

from maxplp.dsp import (Frame, PreemphasisSpec, SampleBuffer, analysis_filter, frame_signal, hanning,
                        inverse_filter, overlap_add, preemphasize, read_wav, resample, synthesis_array,
                        synthesis_filter, time_reverse, write_wav)
from maxplp.errors import DegenerateInputError
from maxplp.lp import LpModel

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_buffer_is_read_only_and_finite():
    buf = SampleBuffer(np.arange(4.0), 8000)
    with pytest.raises(ValueError):
        buf.samples[0] = 1.0
    with pytest.raises(ValueError):
        SampleBuffer([0.0, np.nan], 8000)
    with pytest.raises(ValueError):
        SampleBuffer([0.0], 0)
    assert buf.duration == pytest.approx(4 / 8000)
    assert np.array_equal((-buf).samples, -np.arange(4.0))


def test_hanning_has_no_zero_endpoints_and_is_symmetric():
    w = hanning(200)
    n = np.arange(1, 201)
    assert np.allclose(w, 0.5 * (1 - np.cos(2 * np.pi * n / 201)))
    assert w[0] > 0 and np.allclose(w, w[::-1])


def test_frame_count_and_hop():
    buf = SampleBuffer(np.ones(8000), 8000)
    framed = frame_signal(buf)
    assert framed.frame_length == 200 and framed.hop == 40
    assert len(framed) == (8000 - 200) // 40 + 1
    assert framed[1].start_index == 40
    assert np.allclose(framed[0].samples, hanning(200))


def test_short_buffer_gives_no_frames():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        framed = frame_signal(SampleBuffer(np.ones(100), 8000))
    assert framed.too_short and len(framed) == 0
    assert caught


def test_preemphasis_definition():
    x = np.array([1.0, 2.0, 4.0])
    y = preemphasize(SampleBuffer(x, 8000), PreemphasisSpec(-0.7)).samples
    assert np.allclose(y, [1.0, 2.0 - 0.7, 4.0 - 1.4])
    with pytest.raises(ValueError):
        PreemphasisSpec(0.5)


@settings(max_examples=50, deadline=None)
@given(st.lists(finite, min_size=5, max_size=60),
       st.lists(st.floats(-0.45, 0.45), min_size=1, max_size=4))
def test_analysis_then_synthesis_is_identity(x, a):
    x = np.array(x)
    # small coefficients keep the synthesis filter stable
    y = synthesis_array(analysis_filter(x, a), a)
    assert np.allclose(y, x, atol=1e-9 * (1 + np.abs(x).max()))


def test_buffer_wrappers_and_overflow_guard():
    model = LpModel([0.5])
    buf = SampleBuffer(np.r_[1.0, np.zeros(9)], 8000)
    y = synthesis_filter(buf, model)
    assert np.allclose(y.samples, 0.5 ** np.arange(10))
    assert np.allclose(inverse_filter(y, model).samples, buf.samples)
    with pytest.raises(OverflowError):
        synthesis_array(np.r_[1.0, np.zeros(400)], [1.5])


@given(st.lists(finite, min_size=1, max_size=50))
def test_time_reverse_is_an_involution(x):
    buf = SampleBuffer(x, 8000)
    assert np.array_equal(time_reverse(time_reverse(buf)).samples, buf.samples)


def test_overlap_add_truncates_at_the_end():
    out = overlap_add([np.ones(4), np.ones(4)], [0, 8], 10)
    assert np.array_equal(out, [1, 1, 1, 1, 0, 0, 0, 0, 1, 1])


def test_resample_keeps_a_tone():
    t = np.arange(16000) / 16000.0
    buf = SampleBuffer(np.sin(2 * np.pi * 1000 * t), 16000)
    out = resample(buf, 8000)
    assert out.rate == 8000 and len(out) == 8000
    mid = out.samples[1000:7000]
    ref = np.sin(2 * np.pi * 1000 * np.arange(1000, 7000) / 8000.0)
    assert np.max(np.abs(mid - ref)) < 1e-3
    assert resample(buf, 16000) is buf


def test_resample_removes_content_above_new_nyquist():
    t = np.arange(16000) / 16000.0
    out = resample(SampleBuffer(np.sin(2 * np.pi * 5000 * t), 16000), 8000)
    assert np.max(np.abs(out.samples[500:-500])) < 1e-3


def test_wav_round_trip(tmp_path):
    x = 0.5 * np.sin(np.arange(800) / 7.0)
    buf = SampleBuffer(x, 8000)
    write_wav(tmp_path / "f.wav", buf)
    back = read_wav(tmp_path / "f.wav")
    assert back.rate == 8000 and np.allclose(back.samples, x, atol=1e-7)
    write_wav(tmp_path / "i.wav", buf, subtype="pcm16")
    assert np.allclose(read_wav(tmp_path / "i.wav").samples, x, atol=1 / 32768)


def test_stereo_keeps_first_channel(tmp_path):
    data = np.stack([np.full(100, 1000, np.int16), np.full(100, -1000, np.int16)], axis=1)
    wavfile.write(tmp_path / "s.wav", 8000, data)
    with pytest.warns(UserWarning):
        buf = read_wav(tmp_path / "s.wav")
    assert np.allclose(buf.samples, 1000 / 32768)


def test_frame_validation():
    with pytest.raises(ValueError):
        Frame(np.ones(4), -1)
    assert len(Frame(np.ones(4), 0)) == 4
    with pytest.raises(DegenerateInputError):
        from maxplp.dsp import require_energy
        require_energy(np.zeros(3))
