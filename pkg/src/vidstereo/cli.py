"""Command-line interface: ``vidstereo {gen,run,eval,bench,ablate}``.

Exit codes: 0 success, 1 usage error, 2 file or I/O error, 3 invalid data
(malformed files, bad configuration values, missing poses in full mode).
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import EngineConfig, load_config
from .dataio import FormatError, read_manifest, standard_sequence, write_dataset, write_pfm
from .engine import StereoEngine
from .harness.ablate import KINDS, ablate
from .harness.bench import bench, load_config_set, write_bench
from .harness.report import eval_sequence, prediction_name, write_csv, write_report

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_DATA = 0, 1, 2, 3
TIMING_COLUMNS = ("frame", "features_ms", "warp_ms", "per_iteration_ms", "upsample_ms", "total_ms")

log = logging.getLogger("vidstereo")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _global_flags(parser, suppress: bool):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=argparse.SUPPRESS if suppress else 0,
                        help="random seed for generation and corruption (default 0)")
    parser.add_argument("--config", default=default, help="engine config file (key=value lines)")
    parser.add_argument("--out", default=default, help="output directory or file")
    parser.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS if suppress else False,
                        help="only report errors")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vidstereo", description="Temporal stereo engine with pose-driven warm starts.")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        _global_flags(p, suppress=True)
        return p

    p = add("gen", "render a synthetic stereo sequence and write its manifest")
    p.add_argument("--frames", type=int, default=30)
    p.add_argument("--width", type=int, default=320)
    p.add_argument("--height", type=int, default=240)
    p.add_argument("--image-format", choices=("pgm", "png"), default="pgm")

    p = add("run", "run the engine over a manifest and write PFM predictions")
    p.add_argument("manifest")
    p.add_argument("--mode", choices=("full", "fast", "cold"))
    p.add_argument("--iters", type=int)

    p = add("eval", "score predictions against ground truth")
    p.add_argument("predictions")
    p.add_argument("manifest")
    p.add_argument("--split-occlusion", action="store_true", help="also report occluded/non-occluded subsets")
    p.add_argument("--bad-mode", choices=("mean", "value"), default="mean",
                   help="bad-p%%: mean of the worst p%% (default) or the percentile value")

    p = add("bench", "time configurations listed in --config ([label] sections)")
    p.add_argument("manifest")
    p.add_argument("--warmup", type=int, default=2)
    p.add_argument("--repeats", type=int, default=3)

    p = add("ablate", "run an ablation sweep")
    p.add_argument("kind", choices=KINDS)
    p.add_argument("manifest", nargs="?", help="defaults to the standard generated sequence")
    p.add_argument("--sweep", help="comma-separated sweep values (levels or skip factors)")
    p.add_argument("--frames", type=int, default=120, help="length of the generated sequence")
    return parser


def _engine_config(args) -> EngineConfig:
    cfg = load_config(args.config) if args.config else EngineConfig()
    changes = {}
    if getattr(args, "mode", None):
        changes["mode"] = args.mode
    if getattr(args, "iters", None) is not None:
        changes["iters"] = args.iters
    return cfg.replace(**changes) if changes else cfg


def _out(args, default) -> Path:
    return Path(args.out) if args.out else Path(default)


def cmd_gen(args):
    seq = standard_sequence(args.seed, args.frames, args.width, args.height)
    path = write_dataset(seq, _out(args, "dataset"), "." + args.image_format)
    log.info("wrote %d frames, manifest %s", len(seq), path)


def cmd_run(args):
    cfg = _engine_config(args)
    manifest = read_manifest(args.manifest)
    out = _out(args, "predictions")
    out.mkdir(parents=True, exist_ok=True)
    engine = StereoEngine(manifest.rig, cfg)
    rows = []
    for i, res in enumerate(engine.run(manifest)):
        write_pfm(out / prediction_name(i), res.disparity.values)
        t = res.timing
        rows.append({"frame": i, "features_ms": 1e3 * t["features"], "warp_ms": 1e3 * t["warp"],
                     "per_iteration_ms": 1e3 * t["per_iteration"], "upsample_ms": 1e3 * t["upsample"],
                     "total_ms": 1e3 * t["total"]})
        log.info("frame %d: %.1f ms", i, 1e3 * t["total"])
    write_csv(out / "timing.csv", TIMING_COLUMNS, rows, comments=[f"config {cfg.label}"])


def cmd_eval(args):
    manifest = read_manifest(args.manifest)
    report = eval_sequence(args.predictions, manifest, args.split_occlusion, args.bad_mode)
    path = Path(args.out) if args.out else Path(args.predictions) / "metrics.csv"
    if path.suffix != ".csv":
        path = path / "metrics.csv"
    write_report(path, report)
    log.info("EPE %.4f px, D1 %.2f%% over %d pixels -> %s", report.epe, report.d1, report.n, path)


def cmd_bench(args):
    if not args.config:
        raise UsageError("bench needs --config with one or more configurations")
    manifest = read_manifest(args.manifest)
    rows = bench(manifest, load_config_set(args.config), args.warmup, args.repeats)
    path = _out(args, "bench.csv")
    if path.suffix != ".csv":
        path = path / "bench.csv"
    write_bench(path, rows)
    for r in rows:
        log.info("%s: %.2f ms (%.1f fps), EPE %.4f", r.label, r.latency_ms, r.fps, r.epe)


def cmd_ablate(args):
    cfg = _engine_config(args)
    if args.manifest:
        manifest = read_manifest(args.manifest)
    else:
        manifest = standard_sequence(args.seed, args.frames)
    sweep = None
    if args.sweep:
        try:
            sweep = [int(v) for v in args.sweep.split(",") if v.strip()]
        except ValueError as exc:
            raise UsageError(f"bad --sweep value {args.sweep!r}") from exc
    columns, rows = ablate(args.kind, manifest, cfg, sweep, args.seed)
    path = _out(args, f"ablate_{args.kind}.csv")
    if path.suffix != ".csv":
        path = path / f"ablate_{args.kind}.csv"
    write_csv(path, columns, rows)
    log.info("wrote %d rows to %s", len(rows), path)


COMMANDS = {"gen": cmd_gen, "run": cmd_run, "eval": cmd_eval, "bench": cmd_bench, "ablate": cmd_ablate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr, force=True)
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"vidstereo: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, ValueError) as exc:
        print(f"vidstereo: invalid data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"vidstereo: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
