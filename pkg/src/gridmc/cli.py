"""Experiment runner: feeder generation, model building, estimation runs,
sweeps, certification, and singular-value spectra, with machine-readable
outputs (results.json, trace.csv, spectrum.csv)."""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import certificate as ce
from . import completion as cp
from . import datamatrix as dm
from . import gridmodel as gm
from . import linflow as lf
from . import metrics as mt
from .simnet import comm_count


class CliError(Exception):
    pass


@dataclass
class ExperimentConfig:
    feeder: str = "feeder33"  # feeder33 | random
    n_buses: int = 33
    time_steps: int = 5
    areas: int = 1
    policy: str = "scada"
    fraction: float = 0.5
    noise_pct: float = 1.0
    runs: int = 1
    seed: int = 0
    admm: cp.AdmmConfig = field(default_factory=cp.AdmmConfig)

    def to_dict(self) -> dict:
        d = {k: v for k, v in vars(self).items() if k != "admm"}
        d["admm"] = {k: v for k, v in vars(self.admm).items()}
        return d


def _build_instance(config: ExperimentConfig, seed: int):
    """Ground truth, measurement matrix, partition, and area maps."""
    if config.feeder == "feeder33":
        net, scen, part = gm.feeder33_analog(
            seed=seed, n_steps=config.time_steps, n_areas=config.areas
        )
    elif config.feeder == "random":
        net, scen = gm.generate_radial_feeder(
            config.n_buses, seed=seed, n_steps=config.time_steps
        )
        part = gm.AreaPartition.contiguous(net.n_phases, config.areas)
    else:
        raise CliError(f"unknown feeder kind: {config.feeder!r}")
    v_true = gm.solve_exact_flow(net, scen.s)
    mat = dm.build_matrix(v_true, scen.s)
    model = lf.build_linear_model(net, n_steps=config.time_steps)
    maps = lf.build_area_maps(lf.truncate_model(model, part))
    return net, scen, part, v_true, mat, model, maps


def _single_run(config: ExperimentConfig, seed: int, order=None):
    net, scen, part, v_true, mat, model, maps = _build_instance(config, config.seed)
    data = dm.add_noise(mat, config.noise_pct, seed=seed)
    mask = dm.sample_mask(
        *mat.shape, config.fraction, policy=config.policy, seed=seed
    )
    admm = cp.AdmmConfig(**{**vars(config.admm), "seed": seed})
    if config.areas == 1:
        result = cp.run_centralized(data.data, mask, maps, admm, reference=mat.data)
    else:
        result = cp.run_decentralized(
            data.data, mask, maps, part, admm, reference=mat.data, order=order
        )
    report = mt.evaluate_estimate(mt.voltage_from_matrix(result.x), v_true)
    return result, report, mask, mat, maps, part


def _comm_summary(result, maps, config: ExperimentConfig) -> list[dict]:
    if result.bus is None:
        return []
    ledger = result.bus.ledger
    part = result.partition
    m = maps.m
    r = config.admm.resolve_rank(m)
    out = []
    for pair in sorted(ledger.pairs(), key=sorted):
        a, b = sorted(pair)
        n_l, n_j = part.phases_in(a).size, part.phases_in(b).size
        cmp_ = comm_count(ledger, pair, rounds=[0, 1], n_l=n_l, n_j=n_j, m=m, r=r)
        out.append({
            "pair": [int(a), int(b)],
            "per_iteration_measured": cmp_.measured,
            "paper_formula": cmp_.paper_formula,
            "protocol_formula": cmp_.protocol_formula,
            "full_exchange": cmp_.full_exchange,
        })
    return out


def write_trace_csv(trace: cp.ConvergenceTrace, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "rmse", "consensus", "objective", "max_area_ms"])
        for k in range(trace.iterations):
            rmse = trace.rmse[k] if k < len(trace.rmse) else ""
            writer.writerow([
                k, rmse, trace.consensus[k], trace.objective[k],
                1000.0 * trace.max_area_seconds[k],
            ])


def write_spectrum_csv(x: np.ndarray, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "sigma"])
        for i, s in enumerate(dm.sv_spectrum(x)):
            writer.writerow([i, s])


def run_experiment(config: ExperimentConfig, out_dir: Path, order=None) -> dict:
    """Full pipeline for one configuration; writes results.json, trace.csv,
    and spectrum.csv into out_dir.  Removes partial outputs on error."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        reports = []
        last = None
        for k in range(config.runs):
            seed = config.seed + k
            result, report, mask, mat, maps, part = _single_run(config, seed, order)
            reports.append(report)
            last = (result, mask, mat, maps, part)
        result, mask, mat, maps, part = last
        aggregate = mt.aggregate_reports(reports)

        fp = result.factors()
        op = ce.build_B_d(mask, mat.data, maps, config.admm.mu, config.admm.nu)
        cert = ce.full_report(fp.u, fp.v, op, config.admm.mu)

        payload = {
            "version": __version__,
            "config": config.to_dict(),
            "estimate": aggregate.to_dict(),
            "per_run": [r.to_dict() for r in reports],
            "certificate": cert.to_dict(),
            "communication": _comm_summary(result, maps, config),
            "iterations": result.trace.iterations,
            "final_consensus": result.trace.consensus[-1],
            "final_objective": result.trace.objective[-1],
            "low_observability": dm.is_low_observability(mask),
        }
        results_path = out_dir / "results.json"
        written.append(results_path)
        with open(results_path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        meta_path = out_dir / "metadata.json"
        written.append(meta_path)
        with open(meta_path, "w") as fh:
            json.dump({"completed_at": time.strftime("%Y-%m-%dT%H:%M:%S")}, fh)
            fh.write("\n")
        trace_path = out_dir / "trace.csv"
        written.append(trace_path)
        write_trace_csv(result.trace, trace_path)
        spectrum_path = out_dir / "spectrum.csv"
        written.append(spectrum_path)
        write_spectrum_csv(result.x, spectrum_path)
        return payload
    except Exception:
        for path in written:
            path.unlink(missing_ok=True)
        raise


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--feeder", default="feeder33", choices=["feeder33", "random"])
    parser.add_argument("--buses", type=int, default=33)
    parser.add_argument("--time-steps", type=int, default=5)
    parser.add_argument("--areas", type=int, default=1)
    parser.add_argument("--policy", default="scada", choices=["scada", "uniform"])
    parser.add_argument("--fraction", type=float, default=0.5)
    parser.add_argument("--noise-pct", type=float, default=1.0)
    parser.add_argument("--rank", type=int, default=None)
    parser.add_argument("--mu", type=float, default=1e4)
    parser.add_argument("--nu", type=float, default=1e4)
    parser.add_argument("--gamma", type=float, default=1e3)
    parser.add_argument("--lambda", dest="lam", type=float, default=1e3)
    parser.add_argument("--prox-c", type=float, default=0.1)
    parser.add_argument("--max-iters", type=int, default=500)
    parser.add_argument("--tol", type=float, default=1e-6)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--runs", type=int, default=1)
    parser.add_argument("--out", type=Path, default=Path("results"))


def _config_from_args(args) -> ExperimentConfig:
    admm = cp.AdmmConfig(
        mu=args.mu, nu=args.nu, gamma=args.gamma, lam=args.lam,
        prox_c=args.prox_c, rank=args.rank, max_iters=args.max_iters,
        tol=args.tol, seed=args.seed,
    )
    return ExperimentConfig(
        feeder=args.feeder, n_buses=args.buses, time_steps=args.time_steps,
        areas=args.areas, policy=args.policy, fraction=args.fraction,
        noise_pct=args.noise_pct, runs=args.runs, seed=args.seed, admm=admm,
    )


def cmd_gen_feeder(args) -> int:
    if args.feeder == "feeder33":
        net, scen, part = gm.feeder33_analog(
            seed=args.seed, n_steps=args.time_steps, n_areas=args.areas
        )
    else:
        net, scen = gm.generate_radial_feeder(
            args.buses, seed=args.seed, n_steps=args.time_steps
        )
        part = gm.AreaPartition.contiguous(net.n_phases, args.areas)
    v = gm.solve_exact_flow(net, scen.s)
    mat = dm.build_matrix(v, scen.s)
    args.out.mkdir(parents=True, exist_ok=True)
    dm.export_matrix_csv(mat, args.out / "matrix.csv")
    np.savetxt(args.out / "assignment.csv", part.assignment, fmt="%d")
    print(f"wrote {args.out}/matrix.csv ({mat.shape[0]}x{mat.shape[1]}) "
          f"and assignment.csv ({part.n_areas} areas)")
    return 0


def cmd_build_model(args) -> int:
    config = _config_from_args(args)
    net, scen, part, v_true, mat, model, maps = _build_instance(config, args.seed)
    trunc = lf.truncate_model(model, part)
    err = lf.truncation_error(model, trunc)
    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "model.json", "w") as fh:
        json.dump({
            "version": __version__,
            "n_phases": model.n_phases,
            "time_steps": model.n_steps,
            "areas": part.n_areas,
            "truncation_error": err,
        }, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"truncation error {err:.6f}; wrote {args.out}/model.json")
    return 0


def cmd_run(args) -> int:
    payload = run_experiment(_config_from_args(args), args.out)
    est = payload["estimate"]
    print(f"MAPE {est['mape_magnitude_pct']:.4f}% | angle MAE "
          f"{est['mae_angle_deg']:.4f} deg | rmse {est['rmse']:.6f} | "
          f"iterations {payload['iterations']}")
    print(f"wrote {args.out}/results.json, trace.csv, spectrum.csv")
    return 0


def cmd_sweep(args) -> int:
    values = [float(v) for v in args.values.split(",")]
    rows = []
    for value in values:
        config = _config_from_args(args)
        if args.param == "fraction":
            config.fraction = value
        elif args.param == "time-steps":
            config.time_steps = int(value)
        elif args.param == "areas":
            config.areas = int(value)
        else:
            raise CliError(f"unknown sweep parameter: {args.param!r}")
        sub = args.out / f"{args.param.replace('-', '_')}_{value:g}"
        payload = run_experiment(config, sub)
        est = payload["estimate"]
        rows.append([value, est["mape_magnitude_pct"], est["mae_angle_deg"],
                     est["rmse"]])
        print(f"{args.param}={value:g}: MAPE {est['mape_magnitude_pct']:.4f}% "
              f"MAE {est['mae_angle_deg']:.4f} deg")
    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([args.param, "mape_pct", "mae_deg", "rmse"])
        writer.writerows(rows)
    print(f"wrote {args.out}/sweep.csv")
    return 0


def cmd_certify(args) -> int:
    """Run, then shrink the penalty weights until the spectral condition
    certifies global optimality."""
    config = _config_from_args(args)
    mu = config.admm.mu
    nu = config.admm.nu
    for attempt in range(args.max_shrinks + 1):
        config.admm = cp.AdmmConfig(**{**vars(config.admm), "mu": mu, "nu": nu})
        payload = run_experiment(config, args.out)
        cert = payload["certificate"]
        print(f"mu={mu:g}: spectral norm {cert['spectral_norm']:.6f} "
              f"pass={cert['theorem1_pass']}")
        if cert["theorem1_pass"]:
            return 0
        mu *= args.shrink
        nu *= args.shrink
    print("certificate did not pass within the shrink budget", file=sys.stderr)
    return 1


def cmd_spectrum(args) -> int:
    config = _config_from_args(args)
    net, scen, part, v_true, mat, model, maps = _build_instance(config, args.seed)
    mask = dm.sample_mask(*mat.shape, config.fraction, policy=config.policy,
                          seed=args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    write_spectrum_csv(mat.data, args.out / "spectrum.csv")
    write_spectrum_csv(dm.apply_mask(mat.data, mask),
                       args.out / "spectrum_observed.csv")
    print(f"wrote {args.out}/spectrum.csv and spectrum_observed.csv")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridmc",
        description="Decentralized matrix-completion state estimation experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-feeder", help="generate a synthetic feeder dataset")
    _add_common(p)
    p.set_defaults(fn=cmd_gen_feeder)

    p = sub.add_parser("build-model", help="build and summarize the linear model")
    _add_common(p)
    p.set_defaults(fn=cmd_build_model)

    p = sub.add_parser("run", help="run one estimation experiment")
    _add_common(p)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("sweep", help="sweep one parameter over a value list")
    _add_common(p)
    p.add_argument("--param", required=True,
                   choices=["fraction", "time-steps", "areas"])
    p.add_argument("--values", required=True,
                   help="comma-separated list of values")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("certify", help="run and certify global optimality")
    _add_common(p)
    p.add_argument("--shrink", type=float, default=0.3)
    p.add_argument("--max-shrinks", type=int, default=8)
    p.set_defaults(fn=cmd_certify)

    p = sub.add_parser("spectrum", help="singular-value spectra of the data")
    _add_common(p)
    p.set_defaults(fn=cmd_spectrum)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (CliError, gm.GridModelError, dm.DataMatrixError, lf.LinFlowError,
            cp.CompletionError, ce.CertificateError, mt.MetricsError,
            FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
