"""Command-line entry point: ``rankmatch {gen,select,assign,train,run,sweep,eval}``.

Exit codes: 0 success, 1 input error, 2 internal invariant violation.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness
from .evaluation import evaluate
from .filtermodel import load_checkpoint, save_checkpoint, train_filter
from .synth import gen_dataset, with_detections

log = logging.getLogger("rankmatch")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise harness.InputError(f"{self.prog}: {message}")


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _path(arg, fallback, what):
    path = arg if arg is not None else fallback
    if path is None:
        raise harness.InputError(f"no {what} path given (flag or config)")
    return path


def cmd_gen(args, cfg):
    scenes = gen_dataset(cfg.synth, args.n_scenes)
    harness.write_scenes(scenes, _path(args.out, cfg.scenes_path, "output scene"))
    log.info("wrote %d scenes", len(scenes))


def cmd_select(args, cfg):
    scenes = harness.read_scenes(_path(args.scenes, cfg.scenes_path, "scene"))
    pools = [harness.select_pool(s, cfg.selector)[1] for s in scenes]
    harness.write_scenes(pools, _path(args.out, cfg.output_path, "output"))


def cmd_assign(args, cfg):
    scenes = harness.read_scenes(_path(args.scenes, cfg.scenes_path, "scene"))
    lines = []
    for scene in scenes:
        pool_idx, pool = harness.select_pool(scene, cfg.selector)
        labels = harness.label_pool(pool, cfg.greedy)
        lines.append(json.dumps(harness.labels_to_json(scene.scene_id, pool_idx, labels)) + "\n")
    _emit("".join(lines), args.out if args.out is not None else cfg.output_path)


def cmd_train(args, cfg):
    scenes = harness.read_scenes(_path(args.scenes, cfg.scenes_path, "scene"))
    result = train_filter(harness.training_set(scenes, cfg), cfg.filter)
    save_checkpoint(result.params, _path(args.checkpoint, cfg.checkpoint_path, "checkpoint"), cfg.filter)
    if args.trace is not None:
        rows = [{"epoch": i, "loss": v} for i, v in enumerate(result.loss_trace)]
        Path(args.trace).write_text(harness.format_csv(rows, ("epoch", "loss")))
    if result.loss_trace:
        log.info("final mean loss %.6g", result.loss_trace[-1])


def cmd_run(args, cfg):
    scenes = harness.read_scenes(_path(args.scenes, cfg.scenes_path, "scene"))
    params = load_checkpoint(_path(args.checkpoint, cfg.checkpoint_path, "checkpoint"))
    result = harness.run_pipeline(scenes, params, cfg)
    _emit(harness.format_csv(harness.run_rows(result), harness.RUN_COLUMNS),
          args.out if args.out is not None else cfg.output_path)
    if args.detections is not None:
        finals = [with_detections(s, d) for s, d in zip(scenes, result.detections)]
        harness.write_scenes(finals, args.detections)


def cmd_sweep(args, cfg):
    values = []
    for token in args.values.split(","):
        try:
            values.append(json.loads(token))
        except json.JSONDecodeError as exc:
            raise harness.InputError(f"sweep value {token!r} is not a number") from exc
    scenes = harness.read_scenes(args.scenes) if args.scenes is not None else None
    rows = harness.sweep(args.axis, values, cfg, n_scenes=args.n_scenes, scenes=scenes)
    _emit(harness.format_csv(rows, harness.SWEEP_COLUMNS), args.out if args.out is not None else cfg.output_path)


def cmd_eval(args, cfg):
    scenes = harness.read_scenes(args.detections)
    if args.ground_truth is not None:
        by_id = {s.scene_id: s.ground_truths for s in harness.read_scenes(args.ground_truth)}
        missing = [s.scene_id for s in scenes if s.scene_id not in by_id]
        if missing:
            raise harness.InputError(f"no ground truth for scene(s) {missing[:3]}")
        gts = [by_id[s.scene_id] for s in scenes]
    else:
        gts = [s.ground_truths for s in scenes]
    rows = []
    if scenes:
        m = evaluate([s.detections for s in scenes], gts)
        rows = [{"scene_count": len(scenes), "ap": m.ap, "ap50": m.ap50, "ap75": m.ap75,
                 "recall": m.recall, "ideal_recall": m.ideal_recall}]
    _emit(harness.format_csv(rows, harness.RUN_COLUMNS), args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rankmatch", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_text, scenes=True):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="pipeline config JSON")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config field, e.g. greedy.theta=10")
        if scenes:
            p.add_argument("--scenes", help="scene JSON-lines file")
        p.set_defaults(func=func)
        return p

    p = add("gen", cmd_gen, "generate a synthetic scene dataset", scenes=False)
    p.add_argument("--n-scenes", type=int, default=100)
    p.add_argument("--out")

    p = add("select", cmd_select, "write the sparse query pool of each scene")
    p.add_argument("--out")

    p = add("assign", cmd_assign, "emit greedy-matching labels per scene")
    p.add_argument("--out")

    p = add("train", cmd_train, "fit the query filter and write a checkpoint")
    p.add_argument("--checkpoint")
    p.add_argument("--trace", help="optional CSV of per-epoch mean loss")

    p = add("run", cmd_run, "full pipeline plus metrics CSV")
    p.add_argument("--checkpoint")
    p.add_argument("--out")
    p.add_argument("--detections", help="optional scene file of final detections")

    p = add("sweep", cmd_sweep, "ablation table over one axis")
    p.add_argument("--axis", required=True)
    p.add_argument("--values", required=True, help="comma-separated axis values")
    p.add_argument("--n-scenes", type=int, default=50)
    p.add_argument("--out")

    p = add("eval", cmd_eval, "metrics of a detection file", scenes=False)
    p.add_argument("--detections", required=True, help="scene file whose detections are scored")
    p.add_argument("--ground-truth", help="scene file supplying ground truths by scene_id")
    p.add_argument("--out")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = harness.load_config(args.config, args.set)
        args.func(args, cfg)
    except (ValueError, OSError) as exc:
        # InputError, SceneGenerationError and checkpoint format errors are ValueErrors
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except harness.InvariantViolation as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - any other failure is a bug, not bad input
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
