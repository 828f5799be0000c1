"""Command line entry points: run, check-holonomy, serve."""

from __future__ import annotations

import argparse
import json
import sys

from .errors import MetricQuadError, StageFailure
from .pipeline import STAGES, PipelineConfig, check_holonomy, run_pipeline


def _load_config(args) -> PipelineConfig:
    cfg = PipelineConfig.from_file(args.config)
    if getattr(args, "stage", None):
        cfg.stage = args.stage
    if getattr(args, "out", None):
        cfg.out = args.out
    return cfg


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    try:
        arts = run_pipeline(cfg)
    except StageFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MetricQuadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for stage, rec in arts.stages.items():
        tag = "cached" if rec.cached else f"{rec.ms:8.1f} ms"
        print(f"{stage:>13}  {tag:>12}  {', '.join(rec.files)}")
    print(f"artifacts in {arts.out_dir}")
    if args.report:
        report = arts.timings()
        quality = arts.path("quality.json")
        try:
            with open(quality) as fh:
                report["quality"] = json.load(fh)
        except OSError:
            pass
        print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def _cmd_check_holonomy(args) -> int:
    cfg = _load_config(args)
    try:
        sig = check_holonomy(cfg)
    except (StageFailure, MetricQuadError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    verdict = "ok" if sig["ok"] else "violated"
    print(f"holonomy {verdict}: max residual {sig['maxResidual']:.3e} "
          f"(tol {sig['tol']:g})")
    for e in sig["entries"]:
        if abs(e["residual"]) > sig["tol"]:
            print(f"  {e['kind']} {e['id']}: angle {e['angle']:+.6f} rad, "
                  f"residual {e['residual']:+.3e}")
    return 0 if sig["ok"] else 1


def _cmd_serve(args) -> int:
    from .server import serve
    serve(args.bind)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="metricquad",
        description="Quad meshing through flat cone metrics")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the pipeline from a JSON config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--stage", choices=STAGES,
                       help="run only through this stage")
    p_run.add_argument("--out", help="output directory (overrides config)")
    p_run.add_argument("--report", action="store_true",
                       help="print timing and quality summary")
    p_run.set_defaults(fn=_cmd_run)

    p_chk = sub.add_parser("check-holonomy",
                           help="report the quarter-rotation signature")
    p_chk.add_argument("--config", required=True)
    p_chk.set_defaults(fn=_cmd_check_holonomy)

    p_srv = sub.add_parser("serve", help="start the session HTTP service")
    p_srv.add_argument("--bind", default="127.0.0.1:8008",
                       help="addr:port to listen on")
    p_srv.set_defaults(fn=_cmd_serve)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
