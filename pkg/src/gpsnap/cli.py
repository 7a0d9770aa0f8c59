"""Command-line entry point: ``gpsnap {train,fit,evaluate,bode,plan}``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace

from . import experiment, gp
from .config import ExperimentConfig, load_config
from .errors import GpSnapError


def get_parser():
    parser = argparse.ArgumentParser(prog="gpsnap", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="experiment config file (SI units)")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--mm", action="store_true", help="--positions are given in millimetres")
        return p

    p = common(sub.add_parser("train", help="run ILC at the training positions"))
    p.add_argument("--positions", type=float, nargs="+", help="training positions")
    p.add_argument("--trials", type=int, help="ILC trials per position")
    p.add_argument("--w-f-rel", type=float, help="relative feedforward weight")

    p = common(sub.add_parser("fit", help="fit the GP to the learned snap parameters"))
    p.add_argument("--seed", type=int, help="seed of the multistart hyperparameter search")

    p = common(sub.add_parser("evaluate", help="compare GP, position-independent and acceleration feedforward"))
    p.add_argument("--positions", type=float, nargs="+", help="test positions")

    p = common(sub.add_parser("bode", help="frozen-plant frequency responses"))
    p.add_argument("--positions", type=float, nargs="+", help="sensor positions")

    common(sub.add_parser("plan", help="export the reference trajectory"))
    return parser


def _positions(args):
    if getattr(args, "positions", None) is None:
        return None
    scale = 1e-3 if args.mm else 1.0
    return tuple(p * scale for p in args.positions)


def _config(args):
    cfg = load_config(args.config) if args.config else ExperimentConfig().validate()
    if args.out:
        cfg = replace(cfg, output_dir=args.out)
    pos = _positions(args)
    if args.command == "train":
        if pos is not None:
            cfg = replace(cfg, training_positions=pos)
        ilc_kw = {}
        if args.trials is not None:
            ilc_kw["trials"] = args.trials
        if args.w_f_rel is not None:
            ilc_kw["w_f_rel"] = args.w_f_rel
        if ilc_kw:
            cfg = replace(cfg, ilc=replace(cfg.ilc, **ilc_kw))
    elif args.command == "evaluate" and pos is not None:
        cfg = replace(cfg, test_positions=pos)
    elif args.command == "bode" and pos is not None:
        cfg = replace(cfg, bode_positions=pos)
    elif args.command == "fit" and args.seed is not None:
        cfg = replace(cfg, gp=replace(cfg.gp, seed=args.seed))
    return cfg.validate()


def run(args):
    cfg = _config(args)
    out = cfg.output_dir
    if args.command == "train":
        setup = experiment.build_setup(cfg)
        res = experiment.cmd_train(setup, out)
        for rho, d, m in zip(res.positions, res.delta, res.mass):
            print(f"rho={rho:.4f} m  delta={d:.6e} kg s^2  mass={m:.6f} kg")
    elif args.command == "fit":
        training = experiment.read_training(out)
        model = experiment.cmd_fit(training, cfg.gp, cfg.beam.length, cfg.grid_points, out)
        h = model.hyp
        print(f"sigma_f2={h.sigma_f2:.6e} length_scale={h.length_scale:.6e} sigma_n2={h.sigma_n2:.6e}")
    elif args.command == "evaluate":
        setup = experiment.build_setup(cfg)
        model = gp.load(os.path.join(out, experiment.MODEL_FILE))
        nominal = experiment.read_training(out).nominal
        report = experiment.cmd_evaluate(setup, model, nominal, out)
        for r in report.rows:
            print(f"rho={r['rho']:.4f} m  gp={r['norm_gp']:.4e}  independent={r['norm_independent']:.4e}"
                  f"  acc={r['norm_acc']:.4e}  [{r['status']}]")
    elif args.command == "bode":
        from .modal import build_free_free_beam
        experiment.cmd_bode(build_free_free_beam(cfg.beam), cfg.bode_positions, out_dir=out)
    elif args.command == "plan":
        traj = experiment.cmd_plan(cfg, out)
        print(f"N={traj.n} duration={traj.duration:.6f} s")
    return 0


def main(argv=None):
    args = get_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except (GpSnapError, OSError) as exc:
        line = {"error": type(exc).__name__, "message": str(exc)}
        if getattr(exc, "trial", None) is not None:
            line["trial"] = exc.trial
        print("error: " + json.dumps(line, sort_keys=True), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
