#!/usr/bin/env python3
"""Run the full benchmark (plan, bode, train, fit, evaluate) and print a summary.

    python scripts/run_benchmark.py --config scripts/default.ini --out out/benchmark
"""
import argparse
import logging
import os
import time

from gpsnap import experiment
from gpsnap.config import ExperimentConfig, load_config


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--config", help="experiment config file")
    parser.add_argument("--out", default="out/benchmark", help="output directory")
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")

    cfg = load_config(args.config) if args.config else ExperimentConfig().validate()
    out = args.out
    os.makedirs(out, exist_ok=True)
    t0 = time.perf_counter()

    setup = experiment.build_setup(cfg)
    experiment.cmd_plan(cfg, out)
    experiment.cmd_bode(setup.plant, cfg.bode_positions, out_dir=out)
    training = experiment.cmd_train(setup, out)
    model = experiment.cmd_fit(training, cfg.gp, cfg.beam.length, cfg.grid_points, out)
    report = experiment.cmd_evaluate(setup, model, training.nominal, out)

    both = training.sessions[list(cfg.training_positions).index(cfg.ilc.nominal_position)] \
        if cfg.ilc.nominal_position in cfg.training_positions else None
    print(f"reference: N={setup.traj.n} samples, {setup.traj.duration:.3f} s")
    if both is not None:
        print("ILC |e| per trial at the nominal position")
        print("  acc+snap:", " ".join(f"{r.norm_e:.3e}" for r in both.history))
        print("  acc only:", " ".join(f"{r.norm_e:.3e}" for r in training.accel_only.history))
    print("learned snap parameters [kg s^2]")
    for rho, d in zip(training.positions, training.delta):
        print(f"  rho={rho:.3f} m  delta={d:+.4e}")
    h = model.hyp
    print(f"GP: sigma_f2={h.sigma_f2:.3e}  length_scale={h.length_scale:.3f} m  sigma_n2={h.sigma_n2:.3e}")
    print(f"{'rho':>7} {'|e| gp':>11} {'|e| indep':>11} {'|e| acc':>11} {'ratio':>7}")
    for r in report.rows:
        print(f"{r['rho']:7.3f} {r['norm_gp']:11.4e} {r['norm_independent']:11.4e} "
              f"{r['norm_acc']:11.4e} {r['norm_independent'] / r['norm_gp']:7.2f}")
    print(f"done in {time.perf_counter() - t0:.1f} s; CSV files in {out}")


if __name__ == "__main__":
    main()
