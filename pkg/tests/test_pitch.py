import numpy as np
import pytest

from maxplp.dsp import SampleBuffer
from maxplp.errors import GciFileError
from maxplp.pitch import (EXTERNAL, F0Track, GciTrack, detect_gci, estimate_f0, read_gci_file,
                          write_gci_file)
from maxplp.synth import SynthSpec, synthesize


def interior(track):
    return track.f0[2:-2]


def test_impulse_train_f0():
    x = np.zeros(8000)
    x[::80] = 1.0
    track = estimate_f0(SampleBuffer(x, 8000))
    assert np.all(np.abs(interior(track) - 100.0) <= 1.0)


def test_sine_f0_and_scale_invariance():
    t = np.arange(8000) / 8000.0
    buf = SampleBuffer(np.sin(2 * np.pi * 200 * t), 8000)
    track = estimate_f0(buf)
    assert np.all(np.abs(interior(track) - 200.0) <= 1.0)
    assert np.allclose(estimate_f0(SampleBuffer(7 * buf.samples, 8000)).f0, track.f0, rtol=1e-9)


def test_silence_is_unvoiced():
    track = estimate_f0(SampleBuffer(np.zeros(4000), 8000))
    assert len(track.f0) > 0 and np.all(track.f0 == 0)
    assert len(detect_gci(SampleBuffer(np.zeros(4000), 8000), track)) == 0
    with pytest.raises(ValueError):
        estimate_f0(SampleBuffer(np.zeros(4000), 4000))


@pytest.fixture(scope="module")
def voiced():
    return synthesize(SynthSpec(f0=120.0, glottal_pole=(0.8, 240.0), noise_db=50.0, seed=2))


def test_detected_gcis_match_truth(voiced):
    f0 = estimate_f0(voiced.signal)
    found = detect_gci(voiced.signal, f0)
    truth = voiced.gcis.instants
    inner = truth[(truth > 0.05) & (truth < voiced.signal.duration - 0.05)]
    nearest = np.array([found.instants[np.argmin(np.abs(found.instants - t))] for t in inner])
    assert np.all(np.abs(nearest - inner) <= 0.25e-3 + 1e-9)
    spacing = np.diff(found.instants)
    assert np.all(np.abs(spacing * 120.0 - 1.0) < 0.2)


def test_gci_times_are_scale_invariant(voiced):
    f0 = estimate_f0(voiced.signal)
    a = detect_gci(voiced.signal, f0)
    b = detect_gci(SampleBuffer(2 * voiced.signal.samples, 8000), f0)
    assert np.array_equal(a.instants, b.instants)


def test_gci_file_format(tmp_path):
    path = tmp_path / "g.gci"
    path.write_text("0.012500\n\n0.022500\n")
    track = read_gci_file(path)
    assert np.allclose(track.instants, [0.0125, 0.0225]) and track.source == EXTERNAL
    write_gci_file(GciTrack([0.1234567, 0.5]), path)
    assert path.read_text() == "0.123457\n0.500000\n"
    assert np.allclose(read_gci_file(path).instants, [0.1234567, 0.5], atol=1e-6)


@pytest.mark.parametrize("text, line", [("0.1\n0.05\n", 2), ("0.1\nabc\n", 2), ("-0.1\n", 1)])
def test_bad_gci_files_report_the_line(tmp_path, text, line):
    path = tmp_path / "bad.gci"
    path.write_text(text)
    with pytest.raises(GciFileError) as info:
        read_gci_file(path)
    assert str(line) in str(info.value)


def test_track_invariants(tmp_path):
    with pytest.raises(ValueError):
        GciTrack([0.2, 0.1])
    with pytest.raises(ValueError):
        F0Track([0.0, 0.01], [100.0], 0.01)
    track = F0Track([0.0, 0.01], [0.0, 110.0], 0.01)
    assert track.at(0.012) == 110.0
    track.to_csv(tmp_path / "f0.csv")
    assert (tmp_path / "f0.csv").read_text().splitlines()[0] == "time,f0"
