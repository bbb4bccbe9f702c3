import csv
import json

import numpy as np
import pytest

from maxplp import cli
from maxplp.dsp import SampleBuffer, read_wav, write_wav


@pytest.fixture(scope="module")
def utt(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    code = cli.main(["synth", "--out-dir", str(out), "--name", "a", "--duration", "1.0", "--f0", "120",
                     "--glottal", "0.8", "200", "--noise-db", "50", "--seed", "3"])
    assert code == 0
    return out


def test_synth_writes_truth_and_manifest(utt):
    for name in ("a.wav", "a.gci", "a.json", "a.manifest.json"):
        assert (utt / name).exists()
    manifest = json.loads((utt / "a.manifest.json").read_text())
    assert manifest["utterances"][0]["wav"] == "a.wav"


def test_synth_is_deterministic(tmp_path):
    for d in ("x", "y"):
        assert cli.main(["synth", "--out-dir", str(tmp_path / d), "--duration", "0.2", "--noise-db", "30"]) == 0
    assert (tmp_path / "x" / "synth.wav").read_bytes() == (tmp_path / "y" / "synth.wav").read_bytes()


def test_bad_synth_spec_exits_2(tmp_path, capsys):
    assert cli.main(["synth", "--out-dir", str(tmp_path), "--glottal", "0.9", "900"]) == 2
    assert "error" in capsys.readouterr().err


def test_synth_corpus_manifest(tmp_path):
    assert cli.main(["synth", "--out-dir", str(tmp_path), "--corpus", "3", "--duration", "0.2"]) == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert len(manifest["utterances"]) == 3 and manifest["corpus_hash"]


def test_residual_outputs_are_deterministic(utt, tmp_path):
    a, b = tmp_path / "r1", tmp_path / "r2"
    for stem in (a, b):
        assert cli.main(["residual", str(utt / "a.wav"), "--out", str(stem), "--jobs", "1"]) == 0
    ja = (tmp_path / "r1.maxp_lp2.json").read_bytes()
    assert ja == (tmp_path / "r2.maxp_lp2.json").read_bytes()
    frames = json.loads(ja)["frames"]
    assert frames and {f["alpha_chosen"] for f in frames} <= {-1.0, -0.7}
    assert len(read_wav(tmp_path / "r1.maxp_lp2.wav")) == len(read_wav(utt / "a.wav"))


def test_residual_plot(utt, tmp_path):
    stem = tmp_path / "p"
    assert cli.main(["residual", str(utt / "a.wav"), "--method", "lp2", "--out", str(stem), "--plot"]) == 0
    assert (tmp_path / "p.lp2.png").stat().st_size > 0


def test_missing_file_exits_2(tmp_path, capsys):
    assert cli.main(["residual", str(tmp_path / "nope.wav")]) == 2
    assert "error" in capsys.readouterr().err


def test_metrics_csv(utt, capsys):
    assert cli.main(["metrics", str(utt / "a.wav"), "--method", "lp2", "--format", "csv"]) == 0
    rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
    assert [r["signal"] for r in rows] == ["speech", "lp2", "improvement_pct"]


def test_polarity_exit_codes(utt, tmp_path, capsys):
    assert cli.main(["polarity", str(utt / "a.wav")]) == 0
    pos = json.loads(capsys.readouterr().out)
    buf = read_wav(utt / "a.wav")
    write_wav(tmp_path / "neg.wav", -buf)
    assert cli.main(["polarity", str(tmp_path / "neg.wav")]) == 1
    neg = json.loads(capsys.readouterr().out)
    assert pos["polarity"] == 1 and neg["polarity"] == -1
    write_wav(tmp_path / "silence.wav", SampleBuffer(np.zeros(8000), 8000))
    assert cli.main(["polarity", str(tmp_path / "silence.wav")]) == 2


def test_dsm_outputs(utt, tmp_path, capsys):
    prefix = tmp_path / "d"
    code = cli.main(["dsm", str(utt / "a.wav"), "--gci-file", str(utt / "a.gci"), "--out-prefix", str(prefix)])
    assert code == 0
    conc = float(capsys.readouterr().out.split()[-1])
    assert 0.0 <= conc <= 1.0
    lines = (tmp_path / "d.eigenvectors.csv").read_text().splitlines()
    assert len(lines) - 1 == 64
    assert (tmp_path / "d.dsm.png").exists()
    assert json.loads((tmp_path / "d.dsm.json").read_text())["method"] == "maxp_wlp2"


def test_dsm_needs_gcis(utt, tmp_path, capsys):
    empty = tmp_path / "empty.gci"
    empty.write_text("")
    assert cli.main(["dsm", str(utt / "a.wav"), "--gci-file", str(empty)]) == 2
    assert "GCI" in capsys.readouterr().err


def test_empty_bench_manifest_exits_2(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"utterances": []}))
    assert cli.main(["bench", str(path), "--out-dir", str(tmp_path / "b")]) == 2


def test_jobs_environment_override(monkeypatch):
    monkeypatch.setenv(cli.JOBS_ENV, "3")
    assert cli._jobs(None) == 3
    monkeypatch.delenv(cli.JOBS_ENV)
    assert cli._jobs(2) == 2
    assert cli._jobs(None) >= 1


def test_run_config_defaults():
    cfg = cli.RunConfig()
    assert (cfg.K, cfg.Ka, cfg.alphas, cfg.frame_ms, cfg.hop_ms, cfg.target_rate) == (13, 2, [-1.0, -0.7], 25.0,
                                                                                       5.0, 8000.0)
    assert cfg.maxp_config().causal_order == 11
