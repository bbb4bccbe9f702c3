import numpy as np
import pytest

from maxplp.apps import (detect_polarity, extract_residual_frames, glottal_approximation, pca,
                         pulse_concentration)
from maxplp.dsp import SampleBuffer
from maxplp.errors import InsufficientDataError, UnanalyzableFrameError
from maxplp.pitch import GciTrack
from maxplp.synth import SynthSpec, synthesize


def test_lowpass_attenuates_white_noise():
    x = np.random.default_rng(0).standard_normal(2 ** 16)
    y = glottal_approximation(SampleBuffer(x, 8000)).samples
    f = np.fft.rfftfreq(x.size, 1 / 8000)
    X, Y = np.abs(np.fft.rfft(x)) ** 2, np.abs(np.fft.rfft(y)) ** 2
    band = f > 1500
    assert 10 * np.log10(Y[band].mean() / X[band].mean()) < -20


def test_lowpass_is_odd_and_kills_dc():
    x = np.random.default_rng(1).standard_normal(500)
    a = glottal_approximation(SampleBuffer(x, 8000)).samples
    b = glottal_approximation(SampleBuffer(-x, 8000)).samples
    assert np.allclose(b, -a)
    assert np.allclose(glottal_approximation(SampleBuffer(np.full(500, 3.0), 8000)).samples, 0.0)


@pytest.fixture(scope="module")
def utterance():
    return synthesize(SynthSpec(duration=1.0, f0=130.0, glottal_pole=(0.8, 200.0), noise_db=50.0, seed=3))


def test_polarity_is_antisymmetric(utterance):
    a = detect_polarity(utterance.signal, method="lp2")
    b = detect_polarity(-utterance.signal, method="lp2")
    assert b.polarity == -a.polarity
    assert b.differenced_skewness == pytest.approx(-a.differenced_skewness, abs=1e-9)
    assert set(a.to_dict()) >= {"polarity", "differenced_skewness", "skew_residual", "skew_glottal"}


def test_short_voicing_is_low_confidence(utterance):
    short = SampleBuffer(utterance.signal.samples[:3000], 8000)
    assert detect_polarity(short, method="lp2").low_confidence


def test_silence_is_unanalyzable():
    with pytest.raises(UnanalyzableFrameError):
        detect_polarity(SampleBuffer(np.zeros(8000), 8000))


def impulse_train(n=4000, period=80):
    x = np.zeros(n)
    x[period // 2::period] = 1.0
    gcis = GciTrack(np.arange(period // 2, n, period) / 8000.0, "external")
    return SampleBuffer(x, 8000), gcis


def test_frames_of_an_ideal_train_are_identical():
    buf, gcis = impulse_train()
    F = extract_residual_frames(buf, gcis)
    assert F.shape[1] == 64 and F.shape[0] == len(gcis) - 2  # both edge GCIs skipped
    assert np.allclose(np.linalg.norm(F, axis=1), 1.0, atol=1e-9)
    assert np.allclose(F, F[0], atol=1e-6)
    assert np.argmax(F[0]) == 32


def test_too_few_gcis_give_an_empty_matrix():
    buf, _ = impulse_train()
    with pytest.warns(UserWarning):
        F = extract_residual_frames(buf, GciTrack([0.001, 0.011]))
    assert F.shape == (0, 64)
    with pytest.raises(ValueError):
        extract_residual_frames(buf, GciTrack([0.1, 0.2]), norm_length=33)


def test_pca_rank_one():
    v = np.random.default_rng(2).standard_normal(16)
    v /= np.linalg.norm(v)
    model = pca(np.tile(v, (5, 1)))
    assert model.eigenvalues[0] == pytest.approx(1.0)
    assert np.allclose(model.eigenvalues[1:], 0.0, atol=1e-12)
    assert np.allclose(np.abs(model.eigenvectors[0]), np.abs(v))
    assert model.eigenvectors[0][np.argmax(np.abs(v))] > 0
    assert model.components_for(0.9) == 1


def test_pca_trace_orthonormality_and_reconstruction():
    F = np.random.default_rng(3).standard_normal((100, 64))
    F /= np.linalg.norm(F, axis=1, keepdims=True)
    model = pca(F)
    assert model.eigenvalues.sum() == pytest.approx(1.0, abs=1e-9)
    V = model.eigenvectors
    assert np.allclose(V @ V.T, np.eye(64), atol=1e-8)
    assert np.all(np.diff(model.eigenvalues) <= 0)
    assert np.all(np.diff(model.cumulative_variance) >= 0) and model.cumulative_variance[-1] == pytest.approx(1.0)
    assert np.allclose(V.T @ np.diag(model.eigenvalues) @ V * 100, F.T @ F, atol=1e-8)
    with pytest.raises(InsufficientDataError):
        pca(F[:1])


def test_pulse_concentration_examples():
    d = np.zeros(64)
    d[32] = 1.0
    assert pulse_concentration(d) == 1.0
    # halfwidth 4 samples: 9 of 90 bins
    assert pulse_concentration(np.ones(90)) == pytest.approx(0.1)
    assert pulse_concentration(np.zeros(8)) == 0.0
    with pytest.raises(ValueError):
        pulse_concentration([])


def test_eigenmodel_exports(tmp_path):
    buf, gcis = impulse_train()
    model = pca(extract_residual_frames(buf, gcis))
    model.write_csv(tmp_path / "e.csv")
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert len(lines) == 65 and lines[0].startswith("index,v0,")
    assert model.to_dict()["components_for_90pct"] == 1
