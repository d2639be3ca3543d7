"""Command-line entry point: ``restcal <command>``."""
import argparse
import json
import logging
import sys
from pathlib import Path

from . import dataio, harness, synth



def _cmd_convert(args):
    names = dataio.convert_tree(args.input, args.out)
    print(f"validated {len(names)} archive(s) -> {args.out}")


def _cmd_inspect(args):
    rec = dataio.load_recording(args.archive, selected=())
    codes = {}
    for _, c in rec.events:
        codes[c] = codes.get(c, 0) + 1
    info = {
        "subject_id": rec.subject_id,
        "sample_rate_hz": rec.sample_rate,
        "n_channels": len(rec.channels.names),
        "channels": list(rec.channels.names),
        "duration_s": round(rec.duration_s, 3),
        "events": codes,
    }
    try:
        segs = dataio.segment_resting(rec)
        info["resting_s"] = {k: round(v, 3) for k, v in segs.durations.items()}
    except dataio.NoRestingBlockError as exc:
        info["resting_s"] = None
        info["resting_error"] = str(exc)
    print(json.dumps(info, indent=1))


def _cmd_features(args):
    cfg = harness.ExperimentConfig.from_json(args.config) if args.config \
        else harness.ExperimentConfig()
    rec = dataio.load_recording(args.archive, selected=())
    cond = harness.Condition("none") if args.eye_mode == "none" else harness.Condition(
        args.eye_mode, args.rest_duration)
    m, n_guard = harness.subject_features(rec, [cond], cfg)[cond.key]
    harness.write_features_csv(m, args.out)
    print(f"{m.n_rows} trials x {len(m.columns)} features -> {args.out}"
          + (f" ({n_guard} guarded divisions)" if n_guard else ""))


def _load_config(args):
    cfg = harness.ExperimentConfig.from_json(args.config)
    if getattr(args, "data", None):
        cfg.dataset_root = args.data
    if cfg.dataset_root is None:
        raise SystemExit("config has no dataset_root (or pass --data)")
    return cfg


def _write_table(table, out, stem):
    out = Path(out)
    harness.emit_results(table, "json", out / f"{stem}.json")
    harness.emit_results(table, "csv", out / f"{stem}.csv")
    print(table.to_csv(), end="")


def _cmd_loso(args):
    cfg = _load_config(args)
    exp = harness.Experiment(cfg)
    table = exp.run_conditions(cfg.all_conditions(), "loso")
    _write_table(table, args.out, "loso")


def _cmd_sweep(args):
    cfg = _load_config(args)
    exp = harness.Experiment(cfg)
    table = exp.eye_mode_sweep() if args.mode == "eye" else exp.duration_sweep()
    _write_table(table, args.out, f"sweep_{args.mode}")


def _cmd_synth(args):
    spec = synth.SynthSpec.from_dict(json.loads(Path(args.spec).read_text())) if args.spec \
        else synth.SynthSpec()
    synth.generate_dataset(spec, args.out)
    print(f"wrote {spec.n_subjects} synthetic subject archive(s) -> {args.out}")


def build_parser():
    p = argparse.ArgumentParser(prog="restcal", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("convert", help="validate an already-converted archive tree and copy it")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_convert)

    s = sub.add_parser("inspect", help="summarize one archive")
    s.add_argument("archive")
    s.set_defaults(func=_cmd_inspect)

    s = sub.add_parser("features", help="write the per-trial feature CSV of one archive")
    s.add_argument("--archive", required=True)
    s.add_argument("--eye-mode", choices=("none",) + dataio.EYE_MODES, default="none")
    s.add_argument("--rest-duration", type=float, choices=(30.0, 60.0, 120.0), default=None)
    s.add_argument("--config", help="experiment config JSON for processing constants")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_features)

    s = sub.add_parser("loso", help="leave-one-subject-out over the configured conditions")
    s.add_argument("--config", required=True)
    s.add_argument("--data", help="override dataset_root")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_loso)

    s = sub.add_parser("sweep", help="eye-mode or resting-duration sweep")
    s.add_argument("--mode", choices=("eye", "duration"), required=True)
    s.add_argument("--config", required=True)
    s.add_argument("--data", help="override dataset_root")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_sweep)

    s = sub.add_parser("synth", help="generate a synthetic multi-subject dataset")
    s.add_argument("--spec", help="SynthSpec JSON (defaults if omitted)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_synth)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (harness.FoldError, dataio.ArchiveError, ValueError, OSError) as exc:
        print(f"restcal: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
