"""Command-line front end.

Subcommands: synth | residual | metrics | polarity | dsm | bench.  Audio is
resampled to the analysis rate (8 kHz by default) on input.  JSON output is
written with sorted keys and CSV with a header row, so repeated runs are
byte-identical except for the timing columns of ``bench``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import apps, plotting
from .dsp import SampleBuffer, frame_signal, read_wav, resample, write_wav
from .errors import MaxPError, UndefinedMetricError
from .maxp import (DEFAULT_ALPHAS, DEFAULT_ANTICAUSAL_ORDER, DEFAULT_ORDER, MAXP_WLP2,
                   METHODS, WLP2, MaxPConfig, analyze_buffer, analyze_frame, method_config)
from .metrics import METRICS, metric
from .pitch import GciTrack, detect_gci, estimate_f0, read_gci_file, write_gci_file
from .synth import CorpusRanges, SynthSpec, corpus_hash, corpus_specs, synthesize

log = logging.getLogger("maxplp")

EXIT_OK = 0
EXIT_ERROR = 2
EXIT_NEGATIVE = 1
JOBS_ENV = "MAXP_JOBS"


@dataclass
class RunConfig:
    method: str = "maxp_lp2"
    K: int = DEFAULT_ORDER
    Ka: int = DEFAULT_ANTICAUSAL_ORDER
    alphas: list = field(default_factory=lambda: list(DEFAULT_ALPHAS))
    frame_ms: float = 25.0
    hop_ms: float = 5.0
    target_rate: float = 8000.0
    gci_source: str = "auto"
    format: str = "json"
    seed: int = 0

    def maxp_config(self) -> MaxPConfig:
        return MaxPConfig(total_order=self.K, anticausal_order=self.Ka,
                          alpha_candidates=tuple(self.alphas),
                          base_method=self.method.replace("maxp_", ""))


def _jobs(value) -> int:
    env = os.environ.get(JOBS_ENV)
    if env:
        value = int(env)
    if value is None or value < 1:
        value = os.cpu_count() or 1
    return int(value)


def _dump_json(obj, path=None):
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")
    return text


def _config(args) -> RunConfig:
    return RunConfig(method=getattr(args, "method", "maxp_lp2"), K=args.order, Ka=args.anticausal_order,
                     alphas=list(args.alpha), frame_ms=args.frame_ms, hop_ms=args.hop_ms,
                     target_rate=args.target_rate,
                     gci_source="file" if getattr(args, "gci_file", None) else "auto",
                     format=getattr(args, "format", "json"), seed=getattr(args, "seed", 0))


def _load(path, rate) -> SampleBuffer:
    if not Path(path).is_file():
        raise FileNotFoundError(f"no such file: {path}")
    return resample(read_wav(path), rate)


def _gcis(buffer, gci_file, f0=None) -> GciTrack:
    if gci_file:
        return read_gci_file(gci_file)
    return detect_gci(buffer, f0 if f0 is not None else estimate_f0(buffer))


def _voiced(buffer, cfg: RunConfig, f0=None):
    f0 = f0 if f0 is not None else estimate_f0(buffer)
    length = int(round(cfg.frame_ms * buffer.rate / 1000.0))
    return lambda frame: f0.at((frame.start_index + length / 2) / buffer.rate) > 0


# -- synth -------------------------------------------------------------------

def _write_truth(truth, out_dir: Path, name: str) -> dict:
    wav = out_dir / f"{name}.wav"
    gci = out_dir / f"{name}.gci"
    meta = out_dir / f"{name}.json"
    write_wav(wav, truth.signal)
    write_gci_file(truth.gcis, gci)
    _dump_json(truth.to_dict(), meta)
    return {"name": name, "wav": wav.name, "gci": gci.name, "truth": meta.name,
            "spec": truth.spec.to_dict()}


def cmd_synth(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.corpus:
        ranges = CorpusRanges(duration=args.duration, rate=args.rate,
                              noise_db=None if args.noiseless else CorpusRanges().noise_db)
        truths = [synthesize(s) for s in corpus_specs(args.corpus, ranges, args.seed)]
        entries = [_write_truth(t, out_dir, f"utt{i:03d}") for i, t in enumerate(truths)]
        manifest = {"seed": args.seed, "rate": args.rate, "corpus_hash": corpus_hash(truths),
                    "utterances": entries}
        _dump_json(manifest, out_dir / "manifest.json")
        print(out_dir / "manifest.json")
        return EXIT_OK
    f0 = args.f0[0] if len(args.f0) == 1 else tuple(args.f0)
    glottal = None if args.no_glottal else tuple(args.glottal)
    tract = tuple(tuple(p) for p in args.tract) if args.tract else SynthSpec().tract_poles
    spec = SynthSpec(rate=args.rate, duration=args.duration, f0=f0, glottal_pole=glottal,
                     tract_poles=tract, polarity=args.polarity, noise_db=args.noise_db, seed=args.seed)
    entry = _write_truth(synthesize(spec), out_dir, args.name)
    _dump_json({"seed": args.seed, "rate": args.rate, "utterances": [entry]}, out_dir / f"{args.name}.manifest.json")
    print(out_dir / entry["wav"])
    return EXIT_OK


# -- residual / metrics ----------------------------------------------------------

def cmd_residual(args) -> int:
    cfg = _config(args)
    buffer = _load(args.input, cfg.target_rate)
    gcis = None
    if cfg.method in (WLP2, MAXP_WLP2) or args.gci_file:
        gcis = _gcis(buffer, args.gci_file)
    res = analyze_buffer(buffer, cfg.method, cfg.K, gcis, method_config(cfg.method, cfg.K, cfg.maxp_config()),
                         cfg.frame_ms, cfg.hop_ms, jobs=_jobs(args.jobs))
    stem = Path(args.out) if args.out else Path(args.input).with_suffix("")
    stem = str(stem.with_name(stem.name + f".{cfg.method}"))
    wav, meta, fig = Path(stem + ".wav"), Path(stem + ".json"), Path(stem + ".png")
    write_wav(wav, res.residual)
    report = {"config": asdict(cfg), "input": Path(args.input).name, "rate": buffer.rate,
              "skipped": res.skipped, "frames": res.frame_records()}
    _dump_json(report, meta)
    if args.plot:
        plotting.plot_residuals(buffer.samples, {cfg.method: res.residual.samples}, buffer.rate,
                                fig,
                                gcis=None if gcis is None else gcis.indices(buffer.rate),
                                span=(0, min(len(buffer), int(0.1 * buffer.rate))))
    print(wav)
    return EXIT_OK


def _frame_metrics(x):
    return {name: metric(name)(x) for name in METRICS}


def cmd_metrics(args) -> int:
    cfg = _config(args)
    buffer = _load(args.input, cfg.target_rate)
    f0 = estimate_f0(buffer)
    gcis = _gcis(buffer, args.gci_file, f0) if cfg.method in (WLP2, MAXP_WLP2) else None
    select = _voiced(buffer, cfg, f0)
    mcfg = method_config(cfg.method, cfg.K, cfg.maxp_config())
    speech, resid = [], []
    for frame in frame_signal(buffer, cfg.frame_ms, cfg.hop_ms):
        if not select(frame):
            continue
        try:
            s = _frame_metrics(frame.samples)
            r = _frame_metrics(analyze_frame(frame, cfg.method, cfg.K, gcis, mcfg).residual)
        except (UndefinedMetricError, MaxPError):
            continue
        speech.append(s)
        resid.append(r)
    if not speech:
        raise MaxPError("no voiced frames to measure")
    rows = []
    for label, table in (("speech", speech), (cfg.method, resid)):
        rows.append({"signal": label, "n_frames": len(table),
                     **{m: float(np.mean([t[m] for t in table])) for m in METRICS}})
    imp = {m: float(100.0 * np.mean([(r[m] - s[m]) / s[m] for s, r in zip(speech, resid)]))
           for m in METRICS}
    rows.append({"signal": "improvement_pct", "n_frames": len(speech), **imp})
    if cfg.format == "json":
        _dump_json({"method": cfg.method, "rows": rows})
    else:
        writer = csv.DictWriter(sys.stdout, ["signal", "n_frames", *METRICS], lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return EXIT_OK


# -- polarity / dsm -----------------------------------------------------------------

def cmd_polarity(args) -> int:
    cfg = _config(args)
    buffer = _load(args.input, cfg.target_rate)
    gcis = read_gci_file(args.gci_file) if args.gci_file else None
    verdict = apps.detect_polarity(buffer, cfg.method, cfg.K, gcis=gcis,
                                   win_ms=cfg.frame_ms, hop_ms=cfg.hop_ms)
    out = verdict.to_dict()
    out["method"] = cfg.method
    _dump_json(out, args.out)
    if args.out:
        print(json.dumps(out, sort_keys=True))
    return EXIT_OK if verdict.polarity == 1 else EXIT_NEGATIVE


def cmd_dsm(args) -> int:
    cfg = _config(args)
    buffer = _load(args.input, cfg.target_rate)
    f0 = estimate_f0(buffer)
    gcis = _gcis(buffer, args.gci_file, f0)
    if len(gcis) < 2:
        raise MaxPError(f"need at least 2 GCIs, found {len(gcis)}")
    res = analyze_buffer(buffer, cfg.method, cfg.K, gcis, method_config(cfg.method, cfg.K, cfg.maxp_config()),
                         cfg.frame_ms, cfg.hop_ms, jobs=_jobs(args.jobs))
    frames = apps.extract_residual_frames(res.residual, gcis, f0, args.norm_length)
    if frames.shape[0] < 2:
        raise MaxPError("fewer than 2 usable GCI-synchronous frames")
    model = apps.pca(frames)
    conc = apps.pulse_concentration(model.eigenvectors[0], args.halfwidth_ms, buffer.rate)
    prefix = Path(args.out_prefix) if args.out_prefix else Path(args.input).with_suffix("")
    model.write_csv(prefix.with_name(prefix.name + ".eigenvectors.csv"))
    meta = model.to_dict()
    meta.update({"method": cfg.method, "concentration": conc, "halfwidth_ms": args.halfwidth_ms,
                 "gci_source": cfg.gci_source})
    _dump_json(meta, prefix.with_name(prefix.name + ".dsm.json"))
    plotting.plot_eigenvectors(model, prefix.with_name(prefix.name + ".dsm.png"))
    print(f"concentration {conc:.6f}")
    return EXIT_OK


# -- bench ----------------------------------------------------------------------

def _bench_utterance(path, gci_path, methods, cfg: RunConfig):
    buffer = _load(path, cfg.target_rate)
    f0 = estimate_f0(buffer)
    t0 = time.perf_counter()
    detected = detect_gci(buffer, f0)
    gci_time = time.perf_counter() - t0
    gcis = read_gci_file(gci_path) if gci_path else detected
    select = _voiced(buffer, cfg, f0)
    frames = []
    speech = []
    for frame in frame_signal(buffer, cfg.frame_ms, cfg.hop_ms):
        if not select(frame):
            continue
        try:
            speech.append(_frame_metrics(frame.samples))
        except UndefinedMetricError:
            continue
        frames.append(frame)
    out = {"duration": buffer.duration, "gci_time": gci_time, "speech": speech, "methods": {}}
    base_cfg = cfg.maxp_config()
    for method in methods:
        mcfg = method_config(method, cfg.K, base_cfg)
        values = []
        t0 = time.perf_counter()
        residuals = []
        for frame in frames:
            try:
                residuals.append(analyze_frame(frame, method, cfg.K, gcis, mcfg).residual)
            except MaxPError:
                residuals.append(None)
        elapsed = time.perf_counter() - t0
        for r in residuals:
            try:
                values.append(None if r is None else _frame_metrics(r))
            except UndefinedMetricError:
                values.append(None)
        out["methods"][method] = {"time": elapsed, "values": values}
    return out


def bench_report(utterances, methods, metrics):
    """Aggregate per-utterance bench results into report rows and RCTs."""
    duration = sum(u["duration"] for u in utterances)
    rct = {m: 100.0 * sum(u["methods"][m]["time"] for u in utterances) / duration for m in methods}
    improvements = {}
    for m in methods:
        for name in metrics:
            imp = []
            for u in utterances:
                for s, r in zip(u["speech"], u["methods"][m]["values"]):
                    imp.append(np.nan if r is None else (r[name] - s[name]) / s[name])
            improvements[m, name] = np.array(imp)
    rows = []
    for name in metrics:
        for m in methods:
            imp = improvements[m, name]
            ok = np.isfinite(imp)
            base = m.replace("maxp_", "")
            if m != base and base in methods:
                ref = improvements[base, name]
                both = ok & np.isfinite(ref)
                paired_with = base
                p = stats.ttest_rel(imp[both], ref[both]).pvalue if both.sum() > 1 else np.nan
            else:
                paired_with = "speech"
                p = stats.ttest_1samp(imp[ok], 0.0).pvalue if ok.sum() > 1 else np.nan
            rows.append({"metric": name, "method": m,
                         "improvement_pct": float(100.0 * np.mean(imp[ok])) if ok.any() else np.nan,
                         "std_pct": float(100.0 * np.std(imp[ok])) if ok.any() else np.nan,
                         "n_frames": int(ok.sum()), "paired_with": paired_with, "p_value": float(p),
                         "rct_pct": rct[m]})
    gci_rct = 100.0 * sum(u["gci_time"] for u in utterances) / duration
    return rows, rct, gci_rct


BENCH_COLUMNS = ["metric", "method", "improvement_pct", "std_pct", "n_frames", "paired_with",
                 "p_value", "rct_pct"]


def cmd_bench(args) -> int:
    cfg = _config(args)
    manifest_path = Path(args.manifest)
    if not manifest_path.is_file():
        raise FileNotFoundError(f"no such file: {manifest_path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    entries = manifest.get("utterances", [])
    if not entries:
        raise MaxPError("manifest lists no utterances")
    methods = args.methods
    for m in methods:
        if m not in METHODS:
            raise MaxPError(f"unknown method {m!r}")
    root = manifest_path.parent
    work = [(str(root / e["wav"]), str(root / e["gci"]) if e.get("gci") and args.use_manifest_gcis else None)
            for e in entries]
    jobs = _jobs(args.jobs)
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(work))) as pool:
            results = list(pool.map(_bench_utterance, *zip(*work), [methods] * len(work), [cfg] * len(work)))
    else:
        results = [_bench_utterance(w, g, methods, cfg) for w, g in work]
    rows, rct, gci_rct = bench_report(results, methods, args.metrics)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "report.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, BENCH_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    factors = {m: rct[m] / rct[m.replace("maxp_", "")] for m in methods
               if m.startswith("maxp_") and m.replace("maxp_", "") in methods}
    _dump_json({"config": asdict(cfg), "methods": methods, "metrics": args.metrics,
                "n_utterances": len(entries), "rows": rows,
                "timing": {"rct_pct": rct, "maxp_factor": factors, "gci_rct_pct": gci_rct}},
               out_dir / "report.json")
    plotting.plot_improvements(rows, out_dir / "improvement.png")
    plotting.plot_rct(rct, out_dir / "rct.png")
    print(out_dir / "report.csv")
    return EXIT_OK


# -- parser ----------------------------------------------------------------------

def _analysis_flags(p, method_default="maxp_lp2"):
    p.add_argument("--method", choices=METHODS, default=method_default)
    p.add_argument("--order", "-K", type=int, default=DEFAULT_ORDER)
    p.add_argument("--anticausal-order", "--Ka", type=int, default=DEFAULT_ANTICAUSAL_ORDER)
    p.add_argument("--alpha", type=float, nargs="+", default=list(DEFAULT_ALPHAS))
    p.add_argument("--frame-ms", type=float, default=25.0)
    p.add_argument("--hop-ms", type=float, default=5.0)
    p.add_argument("--target-rate", type=float, default=8000.0)
    p.add_argument("--jobs", type=int, default=None,
                   help=f"worker processes (default: all cores; {JOBS_ENV} overrides)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maxplp", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthetic mixed-phase speech with ground truth")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--name", default="synth")
    p.add_argument("--rate", type=float, default=8000.0)
    p.add_argument("--duration", type=float, default=1.0)
    p.add_argument("--f0", type=float, nargs="+", default=[120.0], help="constant or start end")
    p.add_argument("--glottal", type=float, nargs=2, metavar=("RADIUS", "HZ"), default=[0.94, 200.0])
    p.add_argument("--no-glottal", action="store_true")
    p.add_argument("--tract", type=float, nargs=2, action="append", metavar=("RADIUS", "HZ"))
    p.add_argument("--polarity", type=int, choices=(1, -1), default=1)
    p.add_argument("--noise-db", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--corpus", type=int, default=0, help="write a random corpus of N utterances")
    p.add_argument("--noiseless", action="store_true", help="corpus without additive noise")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("residual", help="residual WAV plus per-frame JSON")
    p.add_argument("input")
    _analysis_flags(p)
    p.add_argument("--gci-file")
    p.add_argument("--out", help="output path stem")
    p.add_argument("--plot", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_residual)

    p = sub.add_parser("metrics", help="sparsity of speech and residual frames")
    p.add_argument("input")
    _analysis_flags(p)
    p.add_argument("--gci-file")
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("polarity", help="speech polarity; exit 0 = positive, 1 = negative")
    p.add_argument("input")
    _analysis_flags(p)
    p.add_argument("--gci-file")
    p.add_argument("--out")
    p.set_defaults(func=cmd_polarity)

    p = sub.add_parser("dsm", help="eigen-analysis of GCI-synchronous residual frames")
    p.add_argument("input")
    _analysis_flags(p, MAXP_WLP2)
    p.add_argument("--gci-file")
    p.add_argument("--norm-length", type=int, default=apps.NORM_LENGTH)
    p.add_argument("--halfwidth-ms", type=float, default=apps.CONCENTRATION_HALFWIDTH_MS)
    p.add_argument("--out-prefix")
    p.set_defaults(func=cmd_dsm)

    p = sub.add_parser("bench", help="sparsity and timing report over a corpus manifest")
    p.add_argument("manifest")
    _analysis_flags(p)
    p.add_argument("--methods", nargs="+", default=list(METHODS), choices=METHODS)
    p.add_argument("--metrics", nargs="+", default=list(METRICS), choices=METRICS)
    p.add_argument("--use-manifest-gcis", action="store_true",
                   help="take GCIs from the manifest's files instead of detecting them")
    p.add_argument("--out-dir", default="bench")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (MaxPError, FileNotFoundError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
