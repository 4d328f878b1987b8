"""``spiketrack`` command line.

Exit status: 0 on success, 2 for usage errors (bad flags, missing inputs,
wrong model kind), 1 for malformed files or failed validation.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import modelio
from .ann import AnnModel, record_lambdas
from .config import RunConfig, load_config
from .conversion import SnnModel, as_rectified_ann, convert
from .energy import estimate, report, report_json
from .engine import layer_label, run_network
from .errors import ModelFormatError, UsageError
from .schedules import SCHEDULE_NAMES
from .tracking import crop, generate_sequence, response_agreement, suite_params, track
from .zoo import calibration_crops, toy_branch

SWEEP_T = (5, 10, 20, 50, 100)
PLATEAU_TOLERANCE = 0.02

# Config keys exposed as flags; dest names match RunConfig fields.
_FLAG_KEYS = (
    ("--T", "T", int),
    ("--tau", "tau", int),
    ("--schedule", "schedule", str),
    ("--K", "K", int),
    ("--p", "p", int),
    ("--alpha", "alpha", float),
    ("--beta", "beta", float),
    ("--potentiation-first", "potentiation_first", str),
    ("--burst-base", "burst_base", float),
    ("--burst-floor", "burst_floor", float),
    ("--mode", "mode", str),
    ("--temporal-weight", "temporal_weight", str),
    ("--bias", "bias", float),
    ("--percentile", "percentile", float),
    ("--final-layer-lambda", "final_layer_lambda", str),
    ("--seed", "seed", int),
    ("--exemplar-size", "exemplar_size", int),
    ("--search-size", "search_size", int),
    ("--count-correlation", "count_correlation", str),
)


def _add_config_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("run configuration (override --config)")
    g.add_argument("--config", type=Path, help="key = value file")
    for flag, dest, kind in _FLAG_KEYS:
        g.add_argument(flag, dest=dest, type=kind, default=None)


def _run_config(args) -> RunConfig:
    overrides = {dest: getattr(args, dest, None) for _, dest, _ in _FLAG_KEYS}
    return load_config(getattr(args, "config", None), overrides)


def _dump_json(doc, path: Path | None):
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _load(path, kind):
    model = modelio.load_model(path)
    if kind is not None and not isinstance(model, kind):
        want = "an ANN" if kind is AnnModel else "a converted SNN"
        raise UsageError(f"{path}: expected {want} model, got {type(model).__name__}")
    return model


def _require_dir(path, what):
    if not Path(path).is_dir():
        raise UsageError(f"{what} directory not found: {path}")


# ---------------------------------------------------------------- commands


def cmd_init_toy(args) -> int:
    cfg = _run_config(args)
    modelio.save_model(toy_branch(cfg.seed, input_hw=(cfg.exemplar_size, cfg.exemplar_size)), args.out)
    if args.calibration:
        d = Path(args.calibration)
        d.mkdir(parents=True, exist_ok=True)
        for k, x in enumerate(calibration_crops(args.n, cfg.search_size, cfg.seed), start=1):
            modelio.save_tensor(x, d / f"{k:04d}.csv")
    return 0


def cmd_gen_sequence(args) -> int:
    cfg = _run_config(args)
    overrides = {"n_frames": args.frames} if args.frames else {}
    modelio.save_sequence(generate_sequence(suite_params(cfg.seed, **overrides)), args.out)
    return 0


def cmd_convert(args) -> int:
    cfg = _run_config(args)
    ann = _load(args.ann, AnnModel)
    _require_dir(args.calibration, "calibration")
    calib = modelio.load_tensor_dir(args.calibration)
    if not calib:
        raise UsageError(f"no calibration tensors (*.csv) in {args.calibration}")
    stats = record_lambdas(ann, calib, cfg.percentile, cfg.final_layer_lambda)
    snn = convert(ann, stats)
    modelio.save_model(snn, args.out)
    print(f"{'layer':<8} {'lambda':>14}   (percentile {stats.percentile:g})")
    for label, lam in zip(stats.labels, stats.lambda_per_layer):
        print(f"{label:<8} {lam:>14.8g}")
    return 0


def _tracking_inputs(args):
    if bool(args.snn) == bool(args.ann):
        raise UsageError("give exactly one of --snn or --ann")
    _require_dir(args.sequence, "sequence")
    seq = modelio.load_sequence(args.sequence)
    if args.snn:
        return "snn", _load(args.snn, SnnModel), seq
    return "ann", _load(args.ann, AnnModel), seq


def _energy_for(result, cfg: RunConfig):
    # One frame of tracking = one search-branch simulation plus correlation.
    per_frame = int(round(float(np.mean(result.ops_per_frame)))) if result.ops_per_frame else result.exemplar_ops
    return estimate(per_frame, cfg.T)


def cmd_track(args) -> int:
    cfg = _run_config(args)
    backend, model, seq = _tracking_inputs(args)
    tcfg = cfg.tracker(backend)
    result = track(seq, model, tcfg)
    doc = {"backend": backend, "config": _config_doc(cfg), **result.to_dict()}
    if backend == "snn":
        doc["energy"] = _energy_for(result, cfg).to_dict()
    _dump_json(doc, args.metrics)
    if args.dump_response:
        d = Path(args.dump_response)
        d.mkdir(parents=True, exist_ok=True)
        for k, values in enumerate(result.responses, start=2):
            modelio.write_response(values, d / f"{k:04d}.csv")
    if args.dump_spikes:
        if backend != "snn":
            raise UsageError("--dump-spikes needs the snn backend")
        _dump_track_spikes(model, seq, result, tcfg, args.dump_spikes)
    if args.energy_report:
        if backend != "snn":
            raise UsageError("--energy-report needs the snn backend")
        energy = _energy_for(result, cfg)
        Path(args.energy_report).write_text(report(energy))
    return 0


def _dump_track_spikes(model, seq, result, tcfg, path):
    """Exemplar train (frame 1) then each search window's output train."""
    with open(path, "w") as fh:
        fh.write("# frame,t,layer,channel,y,x,magnitude\n")
        patches = [crop(seq.frames[0], result.centers[0], tcfg.exemplar_size)[0]]
        patches += [crop(f, c, tcfg.search_size)[0] for f, c in zip(seq.frames[1:], result.search_centers)]
        last = len(model.layers) - 1
        for k, patch in enumerate(patches, start=1):
            trains = run_network(model, patch, tcfg.sim).trains
            for line in modelio.spike_records(trains, layers={last}):
                fh.write(f"{k},{line}\n")


def _config_doc(cfg: RunConfig) -> dict:
    doc = dict(cfg.__dict__)
    doc["alpha"] = "inf" if doc["alpha"] == float("inf") else doc["alpha"]
    return doc


def latency_to_plateau(curve: dict, tolerance: float = PLATEAU_TOLERANCE):
    """Smallest T from which agreement stays within ``tolerance`` of its best value."""
    ts = sorted(curve)
    best = max(curve.values())
    for i, t in enumerate(ts):
        if all(curve[u] >= best - tolerance for u in ts[i:]):
            return t
    return ts[-1]


def cmd_compare_coding(args) -> int:
    cfg = _run_config(args)
    names = args.schedules
    unknown = [n for n in names if n not in SCHEDULE_NAMES]
    if unknown:
        raise UsageError(f"unknown schedule(s) {unknown}; valid names: {', '.join(SCHEDULE_NAMES)}")
    if len(names) < 2:
        raise UsageError("compare-coding needs at least two schedules")
    snn = _load(args.snn, SnnModel)
    ann = _load(args.ann, AnnModel) if args.ann else as_rectified_ann(snn)
    seqs = []
    for d in args.sequence:
        _require_dir(d, "sequence")
        seqs.append(modelio.load_sequence(d))
    references = [track(s, ann, cfg.tracker("ann")) for s in seqs]
    rows = []
    for name in names:
        results = [track(s, snn, cfg.tracker("snn", schedule=name)) for s in seqs]
        agreement = [response_agreement(s, r, snn, cfg.tracker("snn", schedule=name)) for s, r in zip(seqs, references)]
        curve = {}
        for T in SWEEP_T:
            tc = cfg.tracker("snn", schedule=name, T=T)
            curve[T] = float(np.mean([response_agreement(s, r, snn, tc)["agreement_rate"] for s, r in zip(seqs, references)]))
        rows.append({
            "schedule": name,
            "mean_iou": float(np.mean([r.metrics.mean_iou for r in results])),
            "mean_center_error": float(np.mean([r.metrics.mean_center_error for r in results])),
            "agreement": float(np.mean([a["agreement_rate"] for a in agreement])),
            "agreement_by_T": {str(t): v for t, v in curve.items()},
            "latency_to_plateau": latency_to_plateau(curve),
        })
    header = f"{'schedule':<12} {'mean IoU':>9} {'ctr err':>8} {'agree':>6} {'plateau T':>10}"
    print(header)
    print("-" * len(header))
    for r in rows:
        print(f"{r['schedule']:<12} {r['mean_iou']:>9.4f} {r['mean_center_error']:>8.3f} {r['agreement']:>6.3f} {r['latency_to_plateau']:>10d}")
    if args.out:
        _dump_json({"config": _config_doc(cfg), "rows": rows, "sweep_T": list(SWEEP_T)}, args.out)
    return 0


def cmd_bench_energy(args) -> int:
    cfg = _run_config(args)
    if args.ops is not None:
        steps = args.steps if args.steps is not None else cfg.T
        energy = estimate(args.ops, steps)
    elif args.snn and args.sequence:
        backend, model, seq = _tracking_inputs(argparse.Namespace(snn=args.snn, ann=None, sequence=args.sequence))
        energy = _energy_for(track(seq, model, cfg.tracker(backend)), cfg)
    else:
        raise UsageError("give --ops (and optionally --steps), or --snn with --sequence")
    sys.stdout.write(report(energy))
    if args.json:
        Path(args.json).write_text(report_json(energy))
    return 0


def cmd_dump_spikes(args) -> int:
    cfg = _run_config(args)
    snn = _load(args.snn, SnnModel)
    x = modelio.load_tensor(args.input)
    sim = run_network(snn, x, cfg.sim())
    layers = set(args.layers) if args.layers else None
    modelio.write_spikes(sim.trains, args.out, layers)
    for i, (layer, train) in enumerate(zip(snn.layers, sim.trains)):
        print(f"{layer_label(i, layer):<16} spikes={train.n_spikes()}")
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spiketrack", description="Spiking Siamese tracking toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init-toy", help="write the seeded toy ANN branch and calibration crops")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--calibration", type=Path, help="directory for calibration tensors")
    p.add_argument("--n", type=int, default=8, help="number of calibration crops")
    _add_config_flags(p)
    p.set_defaults(func=cmd_init_toy)

    p = sub.add_parser("gen-sequence", help="write a seeded synthetic sequence directory")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--frames", type=int)
    _add_config_flags(p)
    p.set_defaults(func=cmd_gen_sequence)

    p = sub.add_parser("convert", help="calibrate and convert an ANN model")
    p.add_argument("--ann", required=True, type=Path)
    p.add_argument("--calibration", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    _add_config_flags(p)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("track", help="track a sequence with either backend")
    p.add_argument("--snn", type=Path)
    p.add_argument("--ann", type=Path)
    p.add_argument("--sequence", required=True, type=Path)
    p.add_argument("--metrics", type=Path, help="metrics JSON path (default stdout)")
    p.add_argument("--dump-spikes", type=Path)
    p.add_argument("--dump-response", type=Path, help="directory; one CSV per tracked frame")
    p.add_argument("--energy-report", type=Path)
    _add_config_flags(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("compare-coding", help="compare threshold schedules on the same sequences")
    p.add_argument("--snn", required=True, type=Path)
    p.add_argument("--ann", type=Path, help="reference ANN (default: rectified normalized SNN weights)")
    p.add_argument("--sequence", required=True, type=Path, action="append")
    p.add_argument("--schedules", required=True, nargs="+")
    p.add_argument("--out", type=Path, help="JSON table path")
    _add_config_flags(p)
    p.set_defaults(func=cmd_compare_coding)

    p = sub.add_parser("bench-energy", help="energy estimate next to the static baselines")
    p.add_argument("--ops", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--snn", type=Path)
    p.add_argument("--sequence", type=Path)
    p.add_argument("--json", type=Path)
    _add_config_flags(p)
    p.set_defaults(func=cmd_bench_energy)

    p = sub.add_parser("dump-spikes", help="simulate one input tensor and write its spike trains")
    p.add_argument("--snn", required=True, type=Path)
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--layers", type=int, nargs="*")
    _add_config_flags(p)
    p.set_defaults(func=cmd_dump_spikes)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"spiketrack {args.command}: usage error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"spiketrack {args.command}: usage error: {exc.filename}: file not found", file=sys.stderr)
        return 2
    except (ModelFormatError, ValueError) as exc:
        print(f"spiketrack {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
