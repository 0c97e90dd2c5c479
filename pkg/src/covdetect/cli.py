"""Experiment harness: canned Monte Carlo studies, full or desk scale.

Subcommands: simulate, detect, phase-sweep, fronthaul, describe. Every run
is deterministic under a fixed seed; per-trial RNG streams are derived from
(seed, axis, trial) so adding trials never perturbs earlier ones. Results
are emitted as plot-ready CSV, one metric per row.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import detect, fronthaul, phase
from .model import (SystemConfig, build_network, generate_signatures, sample_activity,
                    simulate_received, sample_covariance_set, ideal_covariance_set,
                    export_network_csv, export_signatures_csv)

EXPERIMENTS = ("phase_single", "phase_multi", "error_vs_M",
               "multicell_benchmarks", "fronthaul_bits")

# Full-scale defaults per experiment; desk-scale runs override via --config
# or flags (documented side by side in the README).
FULL_SCALE_DEFAULTS = {
    "phase_single": dict(B=1, N=1000),
    "phase_multi": dict(B=7, N=200),
    "error_vs_M": dict(B=1, N=1000, K=30, L=25),
    "multicell_benchmarks": dict(B=7, N=200, K=20, L=20),
    "fronthaul_bits": dict(B=7, N=200, K=20, L=20),
}

CSV_HEADERS = {
    "phase_single": "L,K,L2_over_N,K_over_N,freq,n_trials,all_hold,none_hold",
    "phase_multi": "L,K,L2_over_N,K_over_N,freq,n_trials,all_hold,none_hold",
    "error_vs_M": "M,metric,value,trials,stderr",
    "multicell_benchmarks": "M,method,metric,value,trials,stderr",
    "fronthaul_bits": "scheme,R,metric,value,trials,stderr",
}


@dataclass
class ExperimentSpec:
    experiment: str
    cfg: SystemConfig
    M_list: list = field(default_factory=list)
    L_list: list = field(default_factory=list)
    K_list: list = field(default_factory=list)
    R_list: list = field(default_factory=list)
    trials: int = 10
    seed: int = 0
    workers: int = 1
    ideal_cov: bool = False
    fix_positions: bool = False
    regime: str = "single_known"
    out: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.trials < 1:
            raise ValueError("trials >= 1")


@dataclass
class ResultTable:
    experiment: str
    rows: list

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="\n") as f:
            f.write(CSV_HEADERS[self.experiment] + "\n")
            for row in self.rows:
                f.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _trial_rng(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def _draw_instance(cfg: SystemConfig, rng, ideal_cov: bool, fixed_net=None):
    net = fixed_net if fixed_net is not None else build_network(cfg, rng)
    sigs = generate_signatures(cfg, rng)
    act = sample_activity(cfg, rng)
    noise_var = cfg.noise_variance
    if ideal_cov:
        covs = ideal_covariance_set(net, sigs, act, noise_var)
    else:
        ys = simulate_received(net, sigs, act, cfg, rng, noise_var)
        covs = sample_covariance_set(ys, noise_var)
    return net, sigs, act, covs


def _pe_trial_single(args):
    cfg_dict, seed, axis, trial, ideal_cov, regime = args
    cfg = SystemConfig(**cfg_dict)
    rng = _trial_rng(seed, axis, trial)
    net, sigs, act, covs = _draw_instance(cfg, rng, ideal_cov)
    opts = detect.SolverOptions(seed=trial)
    if cfg.B == 1:
        if regime == "single_unknown":
            sol = detect.solve_single_cell(covs.matrices[0], sigs, covs.noise_var,
                                           regime=detect.UNKNOWN_LSF, opts=opts)
        else:
            sol = detect.solve_single_cell(covs.matrices[0], sigs, covs.noise_var,
                                           gains=net.gains[0, 0], opts=opts)
        scores = sol.values
    else:
        sol = detect.solve_multicell_coop(covs, sigs, net, opts)
        scores = sol.values
    return detect.equal_error_threshold(scores, act.flat).pe


def _benchmark_trial(args):
    cfg_dict, seed, axis, trial, ideal_cov = args
    cfg = SystemConfig(**cfg_dict)
    rng = _trial_rng(seed, axis, trial)
    net, sigs, act, covs = _draw_instance(cfg, rng, ideal_cov)
    opts = detect.SolverOptions(seed=trial)
    out = {}
    coop = detect.solve_multicell_coop(covs, sigs, net, opts)
    out["cooperative"] = detect.equal_error_threshold(coop.values, act.flat).pe
    best = detect.baseline_best_bs(covs, sigs, net, opts)
    out["best_bs"] = detect.equal_error_threshold(best.values, act.flat).pe
    tin = detect.baseline_tin(covs, sigs, net, cfg.K, opts)
    out["tin"] = detect.equal_error_threshold(tin.values, act.flat).pe
    return out


def _fronthaul_trial(args):
    cfg_dict, seed, axis, trial, scheme, R = args
    cfg = SystemConfig(**cfg_dict)
    rng = _trial_rng(seed, axis, trial)
    net, sigs, act, covs = _draw_instance(cfg, rng, ideal_cov=False)
    opts = detect.SolverOptions(seed=trial)
    if scheme == "none":
        sol = detect.solve_multicell_coop(covs, sigs, net, opts)
        report = detect.equal_error_threshold(sol.values, act.flat)
        bits = {"raw_bits": 0, "coded_bits": 0, "table_bits": 0}
    else:
        report, bits = fronthaul.detect_with_fronthaul(scheme, R, covs, sigs, net,
                                                       act.flat, opts)
    return report.pe, bits


def _map_trials(fn, arglist, workers):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, arglist))
    return [fn(a) for a in arglist]


def run(spec: ExperimentSpec) -> ResultTable:
    """Dispatch an experiment, print one summary line per sweep point, and
    write the CSV if spec.out is set."""
    rows = []
    cfg_dict = dict(spec.cfg.__dict__)
    if spec.experiment in ("phase_single", "phase_multi"):
        regime = spec.regime
        if spec.experiment == "phase_multi" and regime == "single_known":
            regime = phase.REGIME_MULTICELL
        cells = phase.phase_sweep(spec.cfg, spec.L_list, spec.K_list, spec.trials,
                                  regime, seed=spec.seed,
                                  fixed_positions=spec.fix_positions)
        for c in cells:
            rows.append((c.L, c.K, c.l2_over_n, c.k_over_n, c.freq, c.n_trials,
                         int(c.all_hold), int(c.none_hold)))
            print(f"L={c.L} K={c.K} freq={c.freq:.3f}")
    elif spec.experiment == "error_vs_M":
        for axis, M in enumerate(spec.M_list):
            cfg_m = {**cfg_dict, "M": int(M)}
            args = [(cfg_m, spec.seed, axis, t, spec.ideal_cov, spec.regime)
                    for t in range(spec.trials)]
            pes = np.array(_map_trials(_pe_trial_single, args, spec.workers))
            stderr = float(pes.std(ddof=1) / np.sqrt(len(pes))) if len(pes) > 1 else 0.0
            rows.append((int(M), "pe", float(pes.mean()), spec.trials, stderr))
            print(f"M={M} pe={pes.mean():.4g} +/- {stderr:.2g}")
    elif spec.experiment == "multicell_benchmarks":
        for axis, M in enumerate(spec.M_list):
            cfg_m = {**cfg_dict, "M": int(M)}
            args = [(cfg_m, spec.seed, axis, t, spec.ideal_cov)
                    for t in range(spec.trials)]
            results = _map_trials(_benchmark_trial, args, spec.workers)
            for method in ("cooperative", "best_bs", "tin"):
                pes = np.array([r[method] for r in results])
                stderr = float(pes.std(ddof=1) / np.sqrt(len(pes))) if len(pes) > 1 else 0.0
                rows.append((int(M), method, "pe", float(pes.mean()),
                             spec.trials, stderr))
                print(f"M={M} {method} pe={pes.mean():.4g} +/- {stderr:.2g}")
    elif spec.experiment == "fronthaul_bits":
        points = [("none", 0)]
        points += [("covariance", int(R)) for R in spec.R_list]
        points += [("indicators", int(R)) for R in spec.R_list]
        for axis, (scheme, R) in enumerate(points):
            args = [(cfg_dict, spec.seed, axis, t, scheme, R)
                    for t in range(spec.trials)]
            results = _map_trials(_fronthaul_trial, args, spec.workers)
            pes = np.array([r[0] for r in results])
            stderr = float(pes.std(ddof=1) / np.sqrt(len(pes))) if len(pes) > 1 else 0.0
            rows.append((scheme, R, "pe", float(pes.mean()), spec.trials, stderr))
            for key in ("raw_bits", "coded_bits", "table_bits"):
                vals = np.array([r[1][key] for r in results], dtype=float)
                rows.append((scheme, R, key, float(vals.mean()), spec.trials, 0.0))
            print(f"scheme={scheme} R={R} pe={pes.mean():.4g} +/- {stderr:.2g}")
    table = ResultTable(experiment=spec.experiment, rows=rows)
    if spec.out:
        table.to_csv(spec.out)
    return table


def describe(spec: ExperimentSpec) -> str:
    """Resolved plan (configuration, trial counts, work units) without running."""
    cfg = spec.cfg
    lines = [f"experiment: {spec.experiment}"]
    for key, val in cfg.__dict__.items():
        lines.append(f"  {key} = {val}")
    axes = {"M_list": spec.M_list, "L_list": spec.L_list,
            "K_list": spec.K_list, "R_list": spec.R_list}
    points = 1
    for name, vals in axes.items():
        if vals:
            lines.append(f"  {name} = {list(vals)}")
    if spec.experiment in ("phase_single", "phase_multi"):
        points = max(len(spec.L_list), 1) * max(len(spec.K_list), 1)
    elif spec.experiment == "error_vs_M":
        points = max(len(spec.M_list), 1)
    elif spec.experiment == "multicell_benchmarks":
        points = max(len(spec.M_list), 1) * 3
    elif spec.experiment == "fronthaul_bits":
        points = 1 + 2 * max(len(spec.R_list), 1)
    lines.append(f"  trials = {spec.trials}")
    lines.append(f"  sweep points = {points}")
    lines.append(f"  total work units = {points * spec.trials}")
    return "\n".join(lines)


def _parse_int_list(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _add_common(parser):
    parser.add_argument("--config", help="key=value system config file")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--trials", type=int, default=10)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out", help="output CSV path")
    parser.add_argument("--ideal-cov", action="store_true",
                        help="substitute the model covariance for the sample one")
    parser.add_argument("--fix-positions", action="store_true",
                        help="reuse one device layout across trials")
    parser.add_argument("--M-list", type=_parse_int_list, default=[])
    parser.add_argument("--L-list", type=_parse_int_list, default=[])
    parser.add_argument("--K-list", type=_parse_int_list, default=[])
    parser.add_argument("--R-list", type=_parse_int_list, default=[])
    parser.add_argument("--regime", default="single_known",
                        choices=["single_known", "single_unknown", "multicell"])


def _build_spec(args, experiment) -> ExperimentSpec:
    base = dict(FULL_SCALE_DEFAULTS.get(experiment, {}))
    if args.config:
        cfg = SystemConfig.from_file(args.config)
    else:
        cfg = SystemConfig(**base)
    return ExperimentSpec(experiment=experiment, cfg=cfg,
                          M_list=args.M_list, L_list=args.L_list,
                          K_list=args.K_list, R_list=args.R_list,
                          trials=args.trials, seed=args.seed, workers=args.workers,
                          ideal_cov=args.ideal_cov, fix_positions=args.fix_positions,
                          regime=args.regime, out=args.out)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="covdetect",
                                     description="Multi-cell covariance-based "
                                                 "activity detection experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate one instance and export CSVs")
    _add_common(p_sim)

    p_det = sub.add_parser("detect", help="detection-error sweeps over M")
    _add_common(p_det)
    p_det.add_argument("--experiment", default="error_vs_M",
                       choices=["error_vs_M", "multicell_benchmarks"])

    p_phase = sub.add_parser("phase-sweep", help="phase-transition grid sweep")
    _add_common(p_phase)
    p_phase.add_argument("--experiment", default="phase_single",
                         choices=["phase_single", "phase_multi"])

    p_fh = sub.add_parser("fronthaul", help="fronthaul quantization sweep")
    _add_common(p_fh)

    p_desc = sub.add_parser("describe", help="print the resolved plan")
    _add_common(p_desc)
    p_desc.add_argument("--experiment", default="phase_single", choices=EXPERIMENTS)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        if args.command == "simulate":
            cfg = SystemConfig.from_file(args.config) if args.config else SystemConfig()
            rng = np.random.default_rng(args.seed)
            net = build_network(cfg, rng)
            sigs = generate_signatures(cfg, rng)
            prefix = args.out or "instance"
            export_network_csv(net, f"{prefix}_network.csv")
            export_signatures_csv(sigs, f"{prefix}_signatures.csv")
            print(f"wrote {prefix}_network.csv and {prefix}_signatures.csv")
            return 0
        if args.command == "describe":
            spec = _build_spec(args, args.experiment)
            print(describe(spec))
            return 0
        experiment = {"detect": getattr(args, "experiment", "error_vs_M"),
                      "phase-sweep": getattr(args, "experiment", "phase_single"),
                      "fronthaul": "fronthaul_bits"}[args.command]
        spec = _build_spec(args, experiment)
        _validate_spec(spec)
        run(spec)
        return 0
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _validate_spec(spec: ExperimentSpec) -> None:
    if spec.experiment in ("phase_single", "phase_multi"):
        if not spec.L_list or not spec.K_list:
            raise ValueError("phase sweeps need --L-list and --K-list")
    elif spec.experiment in ("error_vs_M", "multicell_benchmarks"):
        if not spec.M_list:
            raise ValueError(f"{spec.experiment} needs --M-list")
    elif spec.experiment == "fronthaul_bits":
        if not spec.R_list:
            raise ValueError("fronthaul needs --R-list")


if __name__ == "__main__":
    raise SystemExit(main())
