"""
This module provides the `pr` command line:
run, train, eval, recover-metric, synth and serve.

Exit codes: 0 on success, 1 on configuration or validation errors,
2 on runtime failures.
"""

# --------------------------------------------------------------------------------
# Imports
# --------------------------------------------------------------------------------

import argparse
import logging
import os
import sys

import numpy as np

from pathlib import Path
from typing import Dict, List, Optional

from unfoldpr import __version__, config_env_var, default_config_path
from unfoldpr.core.metric_recovery import reference_curves, sample_metric_curve
from unfoldpr.core.training import train
from unfoldpr.core.unfolded import UnfoldedModel
from unfoldpr.harness.audio import load_wav, write_wav
from unfoldpr.harness.corpus import load_examples, prepare_example, write_synthetic_corpus
from unfoldpr.harness.experiment import reconstruct, run_experiment
from unfoldpr.harness.report import emit_report, write_curves_csv, write_trace_csv
from unfoldpr.utils.config import ExperimentConfig, check_paths, load_config
from unfoldpr.utils.exceptions import PhaseRetrievalError, ValidationError
from unfoldpr.utils.storage import ModelStorage


# --------------------------------------------------------------------------------
# Globals
# --------------------------------------------------------------------------------

logger = logging.getLogger("unfoldpr.cli")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


class _Parser(argparse.ArgumentParser):
  def error(self, message: str) -> None:
    self.print_usage(sys.stderr)
    self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------------

def cmd_run(args: argparse.Namespace) -> int:
  cfg = load_config(args.config)
  signal = load_wav(args.input, expected_rate=cfg.data.sample_rate)
  example = prepare_example(Path(args.input).name, signal, cfg.stft, cfg.seed)

  model = None
  iters = args.iters
  if args.method == "uadmm":
    if not args.model:
      raise ValidationError("--model is required for --method uadmm")
    model, _, _ = ModelStorage(args.model).load()
  elif iters is None:
    iters = cfg.solvers.gla_iters if args.method == "gla" else max(cfg.solvers.admm_budgets, default=0)

  samples, trace = reconstruct(example, args.method, iters, cfg.solvers.rho, model)
  write_wav(args.output, signal.with_samples(samples))
  if args.trace and trace is not None:
    write_trace_csv(trace, Path(args.trace))

  logger.info("%s reconstruction written to %s", args.method, args.output)
  return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
  cfg = load_config(args.config)
  check_paths(cfg, "train", "val")

  def split(directory: str, limit: Optional[int]):
    return load_examples(directory, limit, cfg.stft, cfg.seed, cfg.data.crop_seconds, cfg.data.sample_rate)

  train_set = split(cfg.data.train_dir, cfg.data.max_train)
  val_set = split(cfg.data.val_dir, cfg.data.max_val)

  model = UnfoldedModel.quadratic(
    T=cfg.model.layers,
    C=cfg.model.segments,
    tied=args.tied,
    rho=cfg.solvers.rho,
    slope=cfg.model.apl_slope_init)
  trained, history = train(model, train_set, val_set, cfg.train)

  metadata = {
    "seed": cfg.seed,
    "train_signals": len(train_set),
    "val_signals": len(val_set),
    "window_length": cfg.stft.window_length,
    "sample_rate": cfg.data.sample_rate,
    "apl_slope_init": cfg.model.apl_slope_init,
    "train": cfg.train.model_dump(),
  }
  ModelStorage(args.out).save(trained, metadata, history)
  logger.info("checkpoint written to %s (best epoch %d)", args.out, history.best_epoch)
  return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
  cfg = load_config(args.config)
  check_paths(cfg, "test")

  models: Dict[str, UnfoldedModel] = {}
  histories = {}
  for path in args.models:
    name = Path(path).stem
    models[name], _, histories[name] = ModelStorage(path).load()

  report = run_experiment(cfg, models)

  mc = cfg.metric_curve
  grid = np.linspace(mc.ymin, mc.ymax, mc.points)
  curves = {name: sample_metric_curve(model, mc.r, grid) for name, model in models.items()}
  curves["reference"] = reference_curves(mc.r, grid, cfg.solvers.rho)

  emit_report(report, Path(args.report), curves, histories)
  return EXIT_OK


def cmd_recover_metric(args: argparse.Namespace) -> int:
  model, _, _ = ModelStorage(args.model).load()
  if args.points < 2 or not args.ymax > args.ymin:
    raise ValidationError(f"need points >= 2 and ymax > ymin, got {args.points} points on [{args.ymin}, {args.ymax}]")

  grid = np.linspace(args.ymin, args.ymax, args.points)
  curves = sample_metric_curve(model, args.r, grid)
  if args.with_reference:
    curves += reference_curves(args.r, grid, model.rho)

  for curve in curves:
    if curve.missing.size:
      logger.warning("layer %s: %d grid point(s) outside the invertible range were omitted", curve.layer_index, curve.missing.size)
  write_curves_csv(curves, Path(args.out))
  return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
  counts = {"train": args.train, "val": args.val, "test": args.test}
  write_synthetic_corpus(args.root, counts, args.seconds, args.sample_rate, args.seed)
  return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
  import uvicorn

  os.environ[config_env_var] = args.config
  uvicorn.run("unfoldpr.main:app", host=args.host, port=args.port)
  return EXIT_OK


# --------------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
  parser = _Parser(prog="pr", description="Phase retrieval with Griffin-Lim, ADMM and unfolded ADMM networks.")
  parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
  parser.add_argument("-v", "--verbose", action="store_true", help="log at DEBUG level")
  sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

  run = sub.add_parser("run", help="reconstruct one WAV file from its STFT magnitudes")
  run.add_argument("--config", default=default_config_path)
  run.add_argument("--method", choices=["gla", "admm", "uadmm"], required=True)
  run.add_argument("--iters", type=int)
  run.add_argument("--model", help="checkpoint for --method uadmm")
  run.add_argument("--in", dest="input", required=True)
  run.add_argument("--out", dest="output", required=True)
  run.add_argument("--trace", help="optional CSV of per-iteration solver records")
  run.set_defaults(handler=cmd_run)

  tr = sub.add_parser("train", help="train an unfolded ADMM network")
  tr.add_argument("--config", default=default_config_path)
  tying = tr.add_mutually_exclusive_group(required=True)
  tying.add_argument("--tied", dest="tied", action="store_true")
  tying.add_argument("--untied", dest="tied", action="store_false")
  tr.add_argument("--out", required=True)
  tr.set_defaults(handler=cmd_train)

  ev = sub.add_parser("eval", help="evaluate baselines and trained models on the test set")
  ev.add_argument("--config", default=default_config_path)
  ev.add_argument("--models", nargs="*", default=[])
  ev.add_argument("--report", required=True)
  ev.set_defaults(handler=cmd_eval)

  rm = sub.add_parser("recover-metric", help="sample the learned metric of a trained model")
  rm.add_argument("--model", required=True)
  rm.add_argument("--r", type=float, required=True)
  rm.add_argument("--ymin", type=float, required=True)
  rm.add_argument("--ymax", type=float, required=True)
  rm.add_argument("--points", type=int, required=True)
  rm.add_argument("--out", required=True)
  rm.add_argument("--with-reference", action="store_true", help="also emit quadratic and KL reference curves")
  rm.set_defaults(handler=cmd_recover_metric)

  sy = sub.add_parser("synth", help="write a synthetic speech-like corpus")
  sy.add_argument("--root", default="data")
  sy.add_argument("--train", type=int, default=40)
  sy.add_argument("--val", type=int, default=4)
  sy.add_argument("--test", type=int, default=10)
  sy.add_argument("--seconds", type=float, default=2.0)
  sy.add_argument("--sample-rate", type=int, default=16000)
  sy.add_argument("--seed", type=int, default=0)
  sy.set_defaults(handler=cmd_synth)

  sv = sub.add_parser("serve", help="start the HTTP service")
  sv.add_argument("--config", default=default_config_path)
  sv.add_argument("--host", default="127.0.0.1")
  sv.add_argument("--port", type=int, default=8000)
  sv.set_defaults(handler=cmd_serve)

  return parser


# --------------------------------------------------------------------------------
# Main
# --------------------------------------------------------------------------------

def main(argv: Optional[List[str]] = None) -> int:
  args = build_parser().parse_args(argv)
  logging.basicConfig(
    level=logging.DEBUG if args.verbose else logging.INFO,
    format="%(asctime)s %(levelname)s %(name)s: %(message)s")

  try:
    return args.handler(args)
  except ValidationError as exc:
    logger.error("%s", exc)
    return EXIT_VALIDATION
  except (PhaseRetrievalError, OSError) as exc:
    logger.error("%s", exc)
    return EXIT_RUNTIME


if __name__ == "__main__":
  sys.exit(main())
