"""Command-line entry point: ``shiptrack <command> [options]``.

Commands:

``track``         run a tracker over a MOT17 detection file
``eval``          score a result file against ground truth
``synth``         generate a synthetic scenario (gt.txt, det.txt)
``ablate``        sweep pipelines x metrics x seeds on synthetic scenarios
``metric-table``  compare IoU, GIoU, DIoU and TIoU on box pairs
``rerun``         replay a run from its manifest and check the outputs

Exit codes are 0 on success, 2 for usage errors, 3 for unreadable input files
and 4 when inputs parse but do not fit together (frame misalignment, manifest
digest mismatch).

Set ``SHIPTRACK_LOG_LEVEL`` (e.g. ``DEBUG``) for more log output on stderr.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from . import __version__
from .association import SimilarityMetricKind
from .evaluation import FrameMisalignmentError, MetricsReport, evaluate
from .geometry import METRICS, BBox
from .mot_io import (
    MotParseError, MotRecord, RecordKind, detections_from_records, gt_from_records,
    parse_file, results_from_records, write_records, write_results,
)
from .motion import SHAKE_NOISE, NoiseConfig
from .synth import RNG_ALGORITHM, ScenarioConfig, generate, high_jitter_config, regime_stats
from .tracker import Pipeline, TrackerConfig, run

log = logging.getLogger("shiptrack")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_MISMATCH = 4

LOG_ENV = "SHIPTRACK_LOG_LEVEL"
NOISE_PRESETS = {"default": NoiseConfig(), "shake": SHAKE_NOISE}
SCENARIO_PRESETS = {"high-jitter": high_jitter_config, "noise-free": lambda seed=0: ScenarioConfig(seed=seed)}
ABLATION_FIELDS = ["pipeline", "metric", "seed", "MOTA", "IDF1", "IDS", "FP", "FN", "Recall", "MOTP", "zero_iou_fraction"]
REPORT_FIELDS = ["MOTA", "MOTP", "IDF1", "Recall", "FP", "FN", "IDS", "FM", "MT", "ML", "GT_count"]


class UsageError(Exception):
    """Bad command-line values that argparse cannot catch on its own."""


class MismatchError(Exception):
    """Inputs are readable but inconsistent with each other."""


# ----------------------------------------------------------------------
# manifests

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    """Everything needed to reproduce one run and check its outputs."""

    command: str
    argv: List[str]
    cwd: str
    tool_version: str = __version__
    config: Dict[str, dict] = field(default_factory=dict)
    inputs: Dict[str, str] = field(default_factory=dict)  # path -> sha256
    outputs: Dict[str, str] = field(default_factory=dict)  # path -> sha256
    seed: Optional[object] = None
    rng_algorithm: Optional[str] = None

    def add_inputs(self, *paths) -> None:
        for p in paths:
            self.inputs[str(p)] = sha256_file(p)

    def add_outputs(self, *paths) -> None:
        for p in paths:
            self.outputs[str(p)] = sha256_file(p)

    def write(self, path) -> None:
        # outputs are listed before the manifest itself exists, so it never digests itself
        text = json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"
        Path(path).write_text(text, encoding="utf-8")

    @classmethod
    def read(cls, path) -> "RunManifest":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(**data)


def _manifest_path(out: Path, explicit: Optional[str]) -> Path:
    return Path(explicit) if explicit else out.with_name(out.name + ".manifest.json")


# ----------------------------------------------------------------------
# argument helpers

def _csv_list(text: str) -> List[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _seed_list(text: str) -> List[int]:
    """``"0,1,2"`` or ``"0-4"`` (inclusive) or a mix of both."""
    seeds = []
    for part in _csv_list(text):
        try:
            if "-" in part[1:]:
                lo, hi = part.split("-", 1)
                seeds.extend(range(int(lo), int(hi) + 1))
            else:
                seeds.append(int(part))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None
    if not seeds:
        raise argparse.ArgumentTypeError("empty seed list")
    return seeds


def _add_tracker_flags(p: argparse.ArgumentParser, with_metric: bool = True) -> None:
    g = p.add_argument_group("tracker")
    g.add_argument("--tracker-config", help="JSON file with TrackerConfig fields; flags below override it")
    if with_metric:
        g.add_argument("--pipeline", choices=[v.value for v in Pipeline])
        g.add_argument("--metric", choices=[v.value for v in SimilarityMetricKind])
    g.add_argument("--gate", type=float)
    g.add_argument("--gate-stage2", type=float)
    g.add_argument("--high-conf", type=float)
    g.add_argument("--low-conf", type=float)
    g.add_argument("--max-age", type=int)
    g.add_argument("--min-hits", type=int)
    g.add_argument("--solver", choices=["hungarian", "greedy"])
    g.add_argument("--mask-before-solve", action="store_true", default=None)
    g.add_argument("--per-class", action="store_true", default=None)
    g.add_argument("--noise-preset", choices=sorted(NOISE_PRESETS))
    g.add_argument("--noise-position", type=float)
    g.add_argument("--noise-velocity", type=float)
    g.add_argument("--noise-measurement", type=float)


def _tracker_config(args, **fixed) -> TrackerConfig:
    base: dict = {}
    if args.tracker_config:
        try:
            base = json.loads(Path(args.tracker_config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read tracker config {args.tracker_config}: {exc}") from None
    flag_map = {
        "pipeline": "pipeline", "metric": "metric", "gate": "gate", "gate_stage2": "gate_stage2",
        "high_conf": "high_conf_threshold", "low_conf": "low_conf_floor", "max_age": "max_age",
        "min_hits": "min_hits", "solver": "solver", "mask_before_solve": "mask_before_solve",
        "per_class": "per_class",
    }
    for flag, key in flag_map.items():
        value = getattr(args, flag, None)
        if value is not None:
            base[key] = value
    noise = dict(base.get("noise") or {})
    if isinstance(noise, NoiseConfig):
        noise = asdict(noise)
    if args.noise_preset:
        noise = asdict(NOISE_PRESETS[args.noise_preset])
    for flag, key in (("noise_position", "std_weight_position"), ("noise_velocity", "std_weight_velocity"),
                      ("noise_measurement", "std_weight_measurement")):
        value = getattr(args, flag)
        if value is not None:
            noise[key] = value
    if noise:
        base["noise"] = noise
    base.update(fixed)
    try:
        return TrackerConfig.from_dict(base)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid tracker configuration: {exc}") from None


# ----------------------------------------------------------------------
# track

def cmd_track(args) -> int:
    cfg = _tracker_config(args)
    records = parse_file(args.detections, RecordKind.DETECTIONS)
    frames = detections_from_records(records, args.num_frames)
    results = run(cfg, frames)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_results(((r.frame_index, o.track_id, o.bbox, o.confidence) for r in results for o in r.outputs), out)

    manifest = RunManifest("track", args.argv, args.cwd, config={"tracker": cfg.to_dict()})
    manifest.add_inputs(args.detections)
    manifest.add_outputs(out)
    manifest.write(_manifest_path(out, args.manifest))
    n_ids = len({o.track_id for r in results for o in r.outputs})
    log.info("tracked %d frames, %d identities -> %s", len(frames), n_ids, out)
    return EXIT_OK


# ----------------------------------------------------------------------
# eval

def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "nan"
    if isinstance(v, float):
        return f"{v:.3f}"
    return str(v)


def format_report(report: MetricsReport, fmt: str) -> str:
    d = report.to_dict()
    if fmt == "json":
        return json.dumps(d, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(d), lineterminator="\n")
        w.writeheader()
        w.writerow({k: ("" if v is None else v) for k, v in d.items()})
        return buf.getvalue()
    cells = [(k, _fmt(d[k])) for k in REPORT_FIELDS]
    widths = [max(len(k), len(v)) for k, v in cells]
    head = "  ".join(k.rjust(w) for (k, _), w in zip(cells, widths))
    row = "  ".join(v.rjust(w) for (_, v), w in zip(cells, widths))
    return head + "\n" + row + "\n"


def cmd_eval(args) -> int:
    if not 0.0 < args.iou_threshold <= 1.0:
        raise UsageError("--iou-threshold must lie in (0, 1]")
    gt = gt_from_records(parse_file(args.gt, RecordKind.GROUND_TRUTH))
    results = results_from_records(parse_file(args.results, RecordKind.RESULTS))
    try:
        report = evaluate(gt, results, args.iou_threshold, num_frames=args.num_frames)
    except FrameMisalignmentError as exc:
        raise MismatchError(str(exc)) from None
    except ValueError as exc:
        raise MismatchError(f"inconsistent input: {exc}") from None
    text = format_report(report, args.format)
    if args.out:
        out = Path(args.out)
        out.write_text(text, encoding="utf-8")
        manifest = RunManifest("eval", args.argv, args.cwd,
                               config={"eval": {"iou_threshold": args.iou_threshold, "format": args.format}})
        manifest.add_inputs(args.gt, args.results)
        manifest.add_outputs(out)
        manifest.write(_manifest_path(out, args.manifest))
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ----------------------------------------------------------------------
# synth

_SCENARIO_FLAGS = {
    "n_ships": int, "n_frames": int, "fps_subsample": int, "jitter_std": float,
    "detection_noise_std": float, "miss_prob": float, "clutter_rate": float,
    "heading_noise_std": float, "seed": int,
}
_SCENARIO_PAIRS = {"image_size": ("width", "height"), "size_range": ("size_min", "size_max"),
                   "speed_range": ("speed_min", "speed_max"), "aspect_range": ("aspect_min", "aspect_max")}


def _add_scenario_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("scenario")
    g.add_argument("--preset", choices=sorted(SCENARIO_PRESETS), help="start from a named scenario")
    g.add_argument("--scenario-config", help="JSON file with ScenarioConfig fields")
    for name, typ in _SCENARIO_FLAGS.items():
        g.add_argument("--" + name.replace("_", "-"), type=typ)
    for lo, hi in _SCENARIO_PAIRS.values():
        g.add_argument("--" + lo.replace("_", "-"), type=float)
        g.add_argument("--" + hi.replace("_", "-"), type=float)


def _load_scenario_source(source: str) -> dict:
    """A preset name (``preset:high-jitter``), a ScenarioConfig JSON, or a manifest holding one."""
    if source.startswith("preset:"):
        name = source.split(":", 1)[1]
        if name not in SCENARIO_PRESETS:
            raise UsageError(f"unknown preset {name!r}; choose from {sorted(SCENARIO_PRESETS)}")
        return SCENARIO_PRESETS[name]().to_dict()
    try:
        data = json.loads(Path(source).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read scenario {source}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"scenario {source} is not valid JSON: {exc}") from None
    if isinstance(data, dict) and "config" in data and "scenario" in data.get("config", {}):
        return data["config"]["scenario"]
    if not isinstance(data, dict):
        raise UsageError(f"scenario {source} must hold a JSON object")
    return data


def _scenario_config(args) -> ScenarioConfig:
    base: dict = {}
    if args.preset:
        base = SCENARIO_PRESETS[args.preset]().to_dict()
    if args.scenario_config:
        base.update(_load_scenario_source(args.scenario_config))
    for name in _SCENARIO_FLAGS:
        value = getattr(args, name)
        if value is not None:
            base[name] = value
    defaults = ScenarioConfig()
    for key, (lo, hi) in _SCENARIO_PAIRS.items():
        current = list(base.get(key, getattr(defaults, key)))
        if getattr(args, lo) is not None:
            current[0] = getattr(args, lo)
        if getattr(args, hi) is not None:
            current[1] = getattr(args, hi)
        base[key] = current
    try:
        return ScenarioConfig.from_dict(base)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid scenario: {exc}") from None


def cmd_synth(args) -> int:
    cfg = _scenario_config(args)
    scenario = generate(cfg)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    gt_path, det_path = out_dir / "gt.txt", out_dir / "det.txt"

    gt_records = [MotRecord(g.frame, g.object_id, g.bbox.x, g.bbox.y, g.bbox.w, g.bbox.h, 1.0, g.class_id, g.visibility)
                  for g in scenario.gt]
    det_records = [MotRecord(f, -1, d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h, d.confidence, d.class_id, 1.0)
                   for f, dets in scenario.frames() for d in dets]
    write_records(gt_records, gt_path, RecordKind.GROUND_TRUTH)
    write_records(det_records, det_path, RecordKind.DETECTIONS)

    manifest = RunManifest("synth", args.argv, args.cwd, config={"scenario": cfg.to_dict()},
                           seed=cfg.seed, rng_algorithm=RNG_ALGORITHM)
    manifest.add_outputs(gt_path, det_path)
    manifest.write(out_dir / "manifest.json")
    stats = regime_stats(scenario) if len(scenario.gt) else None
    if stats is not None:
        log.info("%d frames, median consecutive IoU %.3f, zero-IoU fraction %.3f",
                 scenario.num_frames, stats.median_iou, stats.zero_iou_fraction)
    return EXIT_OK


# ----------------------------------------------------------------------
# ablate

def ablation_cell(scenario: dict, tracker: dict, seed: int) -> dict:
    """Generate one seeded scenario, track it and score it. Pure; safe to run in a worker process."""
    cfg = ScenarioConfig.from_dict({**scenario, "seed": seed})
    tcfg = TrackerConfig.from_dict(tracker)
    sc = generate(cfg)
    results = run(tcfg, list(sc.frames()))
    report = evaluate(sc.gt, results, num_frames=sc.num_frames)
    zero = regime_stats(sc).zero_iou_fraction if len(sc.gt) else math.nan
    return {
        "pipeline": tcfg.pipeline.value, "metric": tcfg.metric.value, "seed": seed,
        "MOTA": report.MOTA, "IDF1": report.IDF1, "IDS": report.IDS, "FP": report.FP,
        "FN": report.FN, "Recall": report.Recall, "MOTP": report.MOTP, "zero_iou_fraction": zero,
    }


def run_ablation(scenario: ScenarioConfig, base: TrackerConfig, pipelines: Sequence[str],
                 metrics: Sequence[str], seeds: Sequence[int], jobs: int = 1) -> List[dict]:
    """One row per (pipeline, metric, seed), ordered in that nesting."""
    scen = scenario.to_dict()
    base_dict = base.to_dict()
    cells = []
    for p in pipelines:
        for m in metrics:
            tracker = {**base_dict, "pipeline": p, "metric": m}
            for s in seeds:
                cells.append((scen, tracker, s))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(ablation_cell, *c) for c in cells]
            return [f.result() for f in futures]
    return [ablation_cell(*c) for c in cells]


def ablation_summary(rows: Sequence[dict], treatment: str = "tiou", baseline: str = "iou") -> dict:
    """Per-seed ``treatment - baseline`` deltas and per-cell medians, grouped by pipeline."""
    by_key = {(r["pipeline"], r["metric"], r["seed"]): r for r in rows}
    summary: dict = {"treatment": treatment, "baseline": baseline, "pipelines": {}}
    for p in dict.fromkeys(r["pipeline"] for r in rows):
        entry: dict = {"medians": {}, "deltas": []}
        for m in dict.fromkeys(r["metric"] for r in rows if r["pipeline"] == p):
            cell = [r for r in rows if r["pipeline"] == p and r["metric"] == m]
            entry["medians"][m] = {k: statistics.median(r[k] for r in cell) for k in ("MOTA", "IDF1", "IDS")}
        for seed in dict.fromkeys(r["seed"] for r in rows if r["pipeline"] == p):
            t, b = by_key.get((p, treatment, seed)), by_key.get((p, baseline, seed))
            if t and b:
                entry["deltas"].append({"seed": seed, **{k: t[k] - b[k] for k in ("MOTA", "IDF1", "IDS")}})
        summary["pipelines"][p] = entry
    return summary


def _write_rows_csv(rows: Sequence[dict], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=ABLATION_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def cmd_ablate(args) -> int:
    scenario = ScenarioConfig.from_dict(_load_scenario_source(args.scenario)) if args.scenario else high_jitter_config()
    try:
        pipelines = [Pipeline(p).value for p in args.pipelines]
        metrics = [SimilarityMetricKind.parse(m).value for m in args.metrics]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    base = _tracker_config(args)
    rows = run_ablation(scenario, base, pipelines, metrics, args.seeds, args.jobs)
    summary = ablation_summary(rows)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_rows_csv(rows, out)
    summary_path = out.with_name(out.stem + ".summary.json")
    summary_path.write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")

    manifest = RunManifest("ablate", args.argv, args.cwd,
                           config={"scenario": scenario.to_dict(), "tracker": base.to_dict()},
                           seed=list(args.seeds), rng_algorithm=RNG_ALGORITHM)
    if args.scenario and not args.scenario.startswith("preset:"):
        manifest.add_inputs(args.scenario)
    manifest.add_outputs(out, summary_path)
    manifest.write(_manifest_path(out, args.manifest))

    for p, entry in summary["pipelines"].items():
        for m, med in entry["medians"].items():
            print(f"{p:5s} {m:5s} median MOTA {med['MOTA']:.3f}  IDF1 {med['IDF1']:.3f}  IDS {med['IDS']:g}")
        for d in entry["deltas"]:
            print(f"{p:5s} seed {d['seed']}: dMOTA {d['MOTA']:+.3f}  dIDF1 {d['IDF1']:+.3f}  dIDS {d['IDS']:+d}")
    return EXIT_OK


# ----------------------------------------------------------------------
# metric table

DEMO_PAIRS: List[Tuple[str, BBox, BBox]] = [
    ("identical", BBox(0, 0, 10, 10), BBox(0, 0, 10, 10)),
    ("shifted-1px", BBox(0, 0, 10, 10), BBox(1, 0, 10, 10)),
    ("half-shift", BBox(0, 0, 10, 10), BBox(3, 3, 10, 10)),
    ("square-offset", BBox(0, 0, 2, 2), BBox(1, 1, 2, 2)),
    ("long-offset", BBox(0, 0, 2, 2), BBox(1, 1, 4, 1)),
    ("adjacent", BBox(0, 0, 10, 10), BBox(12, 0, 10, 10)),
    ("far", BBox(0, 0, 10, 10), BBox(40, 30, 10, 10)),
]
METRIC_ORDER = ("iou", "giou", "diou", "tiou")


def overlap_regime(iou_value: float) -> str:
    if iou_value >= 0.5:
        return "large"
    if iou_value > 0.0:
        return "small"
    return "none"


def read_pairs(path) -> List[Tuple[str, BBox, BBox]]:
    """Lines of ``[label,]x1,y1,w1,h1,x2,y2,w2,h2``; ``#`` starts a comment."""
    pairs = []
    raw = Path(path).read_bytes()
    for line_no, raw_line in enumerate(raw.split(b"\n"), start=1):
        try:
            line = raw_line.decode("utf-8").split("#", 1)[0].strip()
        except UnicodeDecodeError:
            raise MotParseError(line_no, raw_line.decode("utf-8", "replace"), "not valid UTF-8") from None
        if not line:
            continue
        toks = [t.strip() for t in line.split(",")]
        if len(toks) == 9:
            label, toks = toks[0], toks[1:]
        elif len(toks) == 8:
            label = f"pair{len(pairs) + 1}"
        else:
            raise MotParseError(line_no, line, f"expected 8 numbers (optionally after a label), got {len(toks)} fields")
        try:
            v = [float(t) for t in toks]
            pairs.append((label, BBox(*v[:4]), BBox(*v[4:])))
        except ValueError as exc:
            raise MotParseError(line_no, line, str(exc)) from None
    return pairs


def metric_rows(pairs: Sequence[Tuple[str, BBox, BBox]]) -> List[dict]:
    rows = []
    for label, a, b in pairs:
        row = {"label": label, **{m: METRICS[m](a, b) for m in METRIC_ORDER}}
        row["regime"] = overlap_regime(row["iou"])
        rows.append(row)
    order = {"large": 0, "small": 1, "none": 2}
    return sorted(rows, key=lambda r: order[r["regime"]])  # stable within a regime


def cmd_metric_table(args) -> int:
    pairs = read_pairs(args.pairs) if args.pairs else DEMO_PAIRS
    rows = metric_rows(pairs)
    if args.format == "json":
        text = json.dumps(rows, indent=2) + "\n"
    elif args.format == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=["regime", "label", *METRIC_ORDER], lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.4f}" if isinstance(v, float) else v) for k, v in r.items()})
        text = buf.getvalue()
    else:
        width = max([len(r["label"]) for r in rows] + [5])
        lines = [f"{'regime':7s} {'label':{width}s} " + " ".join(f"{m:>8s}" for m in METRIC_ORDER)]
        for r in rows:
            lines.append(f"{r['regime']:7s} {r['label']:{width}s} " + " ".join(f"{r[m]:8.4f}" for m in METRIC_ORDER))
        text = "\n".join(lines) + "\n"
    if args.out:
        out = Path(args.out)
        out.write_text(text, encoding="utf-8")
        manifest = RunManifest("metric-table", args.argv, args.cwd, config={"metric_table": {"format": args.format}})
        if args.pairs:
            manifest.add_inputs(args.pairs)
        manifest.add_outputs(out)
        manifest.write(_manifest_path(out, args.manifest))
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ----------------------------------------------------------------------
# rerun

def cmd_rerun(args) -> int:
    try:
        manifest = RunManifest.read(args.manifest)
    except (OSError, json.JSONDecodeError, TypeError) as exc:
        raise UsageError(f"cannot read manifest {args.manifest}: {exc}") from None
    previous = os.getcwd()
    os.chdir(manifest.cwd)
    try:
        for path, digest in manifest.inputs.items():
            if not Path(path).exists() or sha256_file(path) != digest:
                raise MismatchError(f"input {path} changed since the recorded run")
        status = main(manifest.argv)
        if status != EXIT_OK:
            return status
        changed = [p for p, d in manifest.outputs.items() if not Path(p).exists() or sha256_file(p) != d]
    finally:
        os.chdir(previous)
    if changed:
        raise MismatchError(f"outputs differ from the recorded run: {', '.join(changed)}")
    print(f"reproduced {len(manifest.outputs)} output file(s) byte for byte")
    return EXIT_OK


# ----------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shiptrack", description="Ship tracking with TIoU association.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("track", help="run a tracker over a detection file")
    p.add_argument("--detections", required=True, help="MOT17 detection file")
    p.add_argument("--out", required=True, help="result file to write")
    p.add_argument("--num-frames", type=int, help="sequence length when the last frames have no detections")
    p.add_argument("--manifest", help="manifest path (default: <out>.manifest.json)")
    _add_tracker_flags(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="score tracker results against ground truth")
    p.add_argument("--gt", required=True)
    p.add_argument("--results", required=True)
    p.add_argument("--iou-threshold", type=float, default=0.5)
    p.add_argument("--num-frames", type=int, help="sequence length when it exceeds the last gt frame")
    p.add_argument("--format", choices=["table", "json", "csv"], default="table")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--manifest", help="manifest path when --out is given")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic scenario")
    p.add_argument("--out-dir", required=True)
    _add_scenario_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ablate", help="compare metrics and pipelines over seeded scenarios")
    p.add_argument("--scenario", help="ScenarioConfig JSON, synth manifest, or preset:<name> (default preset:high-jitter)")
    p.add_argument("--pipelines", type=_csv_list, default=["sort", "byte"])
    p.add_argument("--metrics", type=_csv_list, default=["iou", "tiou"])
    p.add_argument("--seeds", type=_seed_list, default=list(range(5)))
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--out", required=True, help="CSV path; a .summary.json is written beside it")
    p.add_argument("--manifest")
    _add_tracker_flags(p, with_metric=False)
    p.set_defaults(func=cmd_ablate, noise_preset="shake")

    p = sub.add_parser("metric-table", help="compare similarity metrics on box pairs")
    p.add_argument("--pairs", help="file of box pairs; built-in demo pairs when omitted")
    p.add_argument("--format", choices=["table", "json", "csv"], default="table")
    p.add_argument("--out")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_metric_table)

    p = sub.add_parser("rerun", help="replay a run from its manifest and verify outputs")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_rerun)
    return parser


def _configure_logging() -> None:
    level_name = os.environ.get(LOG_ENV, "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    root = logging.getLogger("shiptrack")
    if not root.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        root.addHandler(handler)
    root.setLevel(level)


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.argv = argv
    args.cwd = os.getcwd()
    if getattr(args, "jobs", 1) < 1:
        parser.print_usage(sys.stderr)
        print("shiptrack: error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"shiptrack: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MotParseError as exc:
        print(f"shiptrack: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except MismatchError as exc:
        print(f"shiptrack: mismatch: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except FileNotFoundError as exc:
        print(f"shiptrack: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
