"""Command line entry point: ``capnet <command> [options]``.

Exit status is 0 on success, 1 when a solve or training run diverges and 2 on
configuration errors.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import dataset as dsmod
from .experiments import ConfigError, Experiment, ExperimentConfig, export_heatmap, run_table1, run_table2
from .models import (
    TrainingDivergenceError,
    boundary_forward,
    save_models,
    train_boundary_decoder,
    train_encdec,
    train_joint,
    train_nn_fixed,
    train_pinn,
)
from .solver import Field, solve_sor

log = logging.getLogger("capnet")

METHODS = ("enc-dec", "bou-dec", "joint", "nn", "pinn")


def _global_flags(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="key=value experiment config file")
    parser.add_argument("--seed", type=int, default=default, help="single seed overriding the config's seed list")
    parser.add_argument("--out-dir", default=default, help="output directory (default: current directory)")
    parser.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS if suppress else False)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="capnet", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="solve one field by SOR")
    p.add_argument("--d", type=float, required=True)

    sub.add_parser("gen-data", parents=[common], help="generate and save the training corpus")

    p = sub.add_parser("train", parents=[common], help="train one model and write checkpoints")
    p.add_argument("--method", choices=METHODS, required=True)

    sub.add_parser("table1", parents=[common], help="inverse-prediction error table")
    sub.add_parser("table2", parents=[common], help="fixed-boundary NN/PINN comparison")

    p = sub.add_parser("heatmap", parents=[common], help="export a field as PGM or CSV")
    p.add_argument("--d", type=float, required=True)
    p.add_argument("--format", choices=("pgm", "csv"), default="pgm")
    p.add_argument("--source", choices=("sor", "joint"), default="sor")
    return parser


def _config(args) -> ExperimentConfig:
    overrides = {}
    if args.seed is not None:
        overrides["seeds"] = [args.seed]
    overrides["out_dir"] = args.out_dir or "."
    if args.config:
        try:
            return ExperimentConfig.load(args.config, **overrides)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
    return ExperimentConfig.from_text("", **overrides)


def _print_reports(reports):
    for rep in reports.values():
        cells = " ".join(f"d={d:g}:{v:.4g}" for d, v in zip(rep.d_values, rep.per_d))
        print(f"{rep.method:>16}  mean={rep.mean:.4g}  {cells}")


def _train(cfg: ExperimentConfig, method: str, out: Path):
    seed = cfg.seeds[0]
    tcfg = cfg.train_config(seed)
    if method in ("nn", "pinn"):
        fit = train_nn_fixed if method == "nn" else train_pinn
        model, history = fit(cfg.spec, cfg.grid, cfg.d_fixed, tcfg, cfg.solver)
        roles = {"coord": model.net}
    else:
        ds = Experiment(cfg).dataset(seed)
        if method == "enc-dec":
            model, history = train_encdec(ds, tcfg)
            roles = {"encoder": model.encoder, "decoder": model.decoder}
        else:
            fit = train_joint if method == "joint" else train_boundary_decoder
            model, bnet, history = fit(ds, tcfg)
            roles = {"encoder": model.encoder, "decoder": model.decoder, "boundary": bnet.net}
    manifest = save_models(out / method, **roles)
    print(f"{method}: final loss {history[-1]:.6g} after {len(history)} epochs -> {manifest}")


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg = _config(args)
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "solve":
            field, report = solve_sor(cfg.spec.with_d(args.d), cfg.grid, cfg.solver)
            path = export_heatmap(field, out / f"field_d{args.d:g}.csv", "csv")
            print(f"{report} -> {path}")
            if not report.converged:
                return 1
        elif args.command == "gen-data":
            ds = Experiment(cfg).dataset(cfg.seeds[0])
            dsmod.save(ds, out / "dataset.capd")
            print(f"{ds.m} samples ({int(ds.supervised_mask.sum())} supervised) -> {out / 'dataset.capd'}")
        elif args.command == "train":
            _train(cfg, args.method, out)
        elif args.command == "table1":
            _print_reports(run_table1(cfg))
        elif args.command == "table2":
            _print_reports(run_table2(cfg))
        elif args.command == "heatmap":
            if args.source == "sor":
                field, _ = solve_sor(cfg.spec.with_d(args.d), cfg.grid, cfg.solver)
            else:
                field = Field(cfg.grid, Experiment(cfg).joint_predict(cfg.seeds[0], args.d))
            path = export_heatmap(field, out / f"{args.source}_d{args.d:g}.{args.format}", args.format)
            print(path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (TrainingDivergenceError, dsmod.SolverDivergenceError) as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())
