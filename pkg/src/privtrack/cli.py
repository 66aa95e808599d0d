"""Command-line entry point.

Subcommands: run, sweep, compare, check, compressor-test, graph-info.
Exit codes: 0 success, 2 malformed config or arguments, 3 divergence.
Every artifact embeds the fully resolved config and seeds.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .algorithm import DivergenceError
from .analysis import (
    SystemParams,
    build_system,
    default_zetas,
    lemma2_zeta_check,
    privacy_epsilon,
    spectral_radius,
    theorem1_bounds,
)
from .compressors import declared_contraction, estimate_contraction, parse_compressor
from .config import (
    ConfigError,
    PAPER_SCALE_OVERRIDES,
    apply_overrides,
    build_experiment,
    build_graph,
    build_schedule,
    load_config,
    validate_config,
)
from .harness import (
    accuracy_sweep,
    check_config_bounds,
    compare_presets,
    run_trials,
    table1_presets,
)
from .records import jsonable, write_json, write_trace_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="privtrack",
        description=(
            "Simulate compressed, differentially private decentralized gradient "
            "tracking and evaluate its convergence certificates and privacy budgets."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, default=None, help="JSON config file")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="dotted-path config override, e.g. noise.q=0.95 (repeatable, last wins)",
        )
        p.add_argument("--output-dir", type=Path, default=None, help="directory for artifacts")
        p.add_argument("--seed", type=int, default=None, help="master seed shorthand")
        p.add_argument("--trials", type=int, default=None, help="trial count shorthand")
        p.add_argument("--horizon", type=int, default=None, help="iteration count shorthand")
        p.add_argument(
            "--paper-scale",
            action="store_true",
            help="untruncated noise, 1000 trials, long horizon",
        )

    p_run = sub.add_parser("run", help="Monte-Carlo residual run for one config")
    common(p_run)

    p_sweep = sub.add_parser("sweep", help="fixed-point accuracy across noise decay rates")
    common(p_sweep)

    p_cmp = sub.add_parser("compare", help="coupled-noise comparison of built-in presets")
    common(p_cmp)
    p_cmp.add_argument(
        "--preset",
        default="paper-table1",
        choices=["paper-table1"],
        help="preset collection to compare",
    )

    p_check = sub.add_parser("check", help="convergence certificate and privacy report")
    common(p_check)

    p_comp = sub.add_parser("compressor-test", help="empirical contraction estimate")
    common(p_comp)
    p_comp.add_argument("--samples", type=int, default=2000, help="draws per probe direction")
    p_comp.add_argument("--directions", type=int, default=32, help="probe directions")

    p_graph = sub.add_parser("graph-info", help="mixing-matrix spectral summary")
    common(p_graph)
    return parser


def _resolve_config(args) -> dict:
    cfg = load_config(args.config)
    if args.paper_scale:
        apply_overrides(cfg, [f"{k}={json.dumps(v)}" for k, v in PAPER_SCALE_OVERRIDES.items()])
    apply_overrides(cfg, args.overrides)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.trials is not None:
        cfg["trials"] = args.trials
    if args.horizon is not None:
        cfg["horizon"] = args.horizon
    return validate_config(cfg)


def _out_dir(args) -> Path:
    out = args.output_dir if args.output_dir is not None else Path("out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(payload: dict, out_dir: Path | None, filename: str) -> None:
    text = json.dumps(jsonable(payload), indent=2)
    print(text)
    if out_dir is not None:
        (out_dir / filename).write_text(text + "\n")


def _cmd_run(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(args)
    instance, mixing, run_cfg = build_experiment(cfg)
    bound_warnings = check_config_bounds(instance, mixing, run_cfg, m=cfg["m"])
    result = run_trials(instance, mixing, run_cfg, cfg["trials"], config_echo=cfg)

    comp = parse_compressor(cfg["compressor"]).label()
    files = []
    for trace in result.traces:
        name = f"trace_{comp.replace(':', '_')}_seed{cfg['seed']}_trial{trace.trial_index}.csv"
        write_trace_csv(out / name, trace.records())
        files.append(name)
    mean_name = f"trace_{comp.replace(':', '_')}_seed{cfg['seed']}_mean.csv"
    write_trace_csv(out / mean_name, result.mean_records())
    files.append(mean_name)

    report = {
        "command": "run",
        "config": cfg,
        "warnings": bound_warnings,
        "trials": cfg["trials"],
        "final_mean_residual": float(result.mean_residual[-1]) if result.mean_residual.size else None,
        "slope": result.slope,
        "r_squared": result.r_squared,
        "fit_points": result.fit_points,
        "conservation_max": max(t.conservation_max for t in result.traces),
        "x_inf_uncertainty": max(t.x_inf_uncertainty for t in result.traces),
        "noise_checksums": [t.noise_checksum for t in result.traces],
        "files": files,
    }
    write_json(out / f"run_report_seed{cfg['seed']}.json", report)
    print(
        f"run: {cfg['trials']} trials, final mean residual "
        f"{report['final_mean_residual']:.3e}, slope {result.slope:.4f}, "
        f"R^2 {result.r_squared:.4f} -> {out}"
    )
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(args)
    instance, mixing, run_cfg = build_experiment(cfg)
    sweep_cfg = cfg["sweep"]
    schedule = build_schedule(cfg)
    base = run_cfg
    d_eta = float(sweep_cfg.get("d_eta", 5.0))
    from dataclasses import replace

    base = replace(base, schedule=replace(schedule, d_eta_x=d_eta, d_eta_y=d_eta))
    report = accuracy_sweep(
        instance,
        mixing,
        base,
        sweep_cfg["q_values"],
        trials=sweep_cfg.get("trials", 100),
        config_echo=cfg,
    )
    payload = {
        "command": "sweep",
        "config": cfg,
        "axis": report.axis,
        "rows": report.rows,
    }
    write_json(out / f"sweep_report_seed{cfg['seed']}.json", payload)
    print(
        f"sweep: {len(report.rows)} q values x {sweep_cfg.get('trials', 100)} trials -> "
        f"{out / f'sweep_report_seed{cfg['seed']}.json'}"
    )
    return EXIT_OK


def _cmd_compare(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(args)
    instance, mixing, _ = build_experiment(cfg)
    schedule = build_schedule(cfg)
    presets = table1_presets(schedule=schedule, horizon=cfg["horizon"], seed=cfg["seed"])
    report = compare_presets(instance, mixing, presets, config_echo=cfg)

    files = []
    rows = []
    for res in report.results:
        name = f"trace_{res.name}_seed{cfg['seed']}.csv"
        write_trace_csv(out / name, res.trace.records())
        files.append(name)
        rows.append(
            {
                "preset": res.name,
                "final_residual": res.trace.final_residual(),
                "accuracy": res.accuracy,
                "slope": res.slope,
                "r_squared": res.r_squared,
                "conservation_max": res.trace.conservation_max,
            }
        )
    payload = {
        "command": "compare",
        "config": cfg,
        "presets": rows,
        "x_inf_spread": report.x_inf_spread,
        "noise_checksum": report.noise_checksums[0],
        "files": files,
    }
    write_json(out / f"compare_report_seed{cfg['seed']}.json", payload)
    print(
        f"compare: {len(rows)} presets, x_inf spread {report.x_inf_spread:.3e} -> {out}"
    )
    return EXIT_OK


def _cmd_check(args) -> int:
    cfg = _resolve_config(args)
    out = args.output_dir
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    instance, mixing, run_cfg = build_experiment(cfg)
    spec = parse_compressor(cfg["compressor"])
    phi = declared_contraction(spec, instance.d)
    if phi is None:
        rng = np.random.default_rng(cfg["seed"])
        phi = estimate_contraction(spec, instance.d, samples=2000, rng=rng)
        phi_source = "estimated"
    else:
        phi_source = "declared"

    params = SystemParams(
        alpha=cfg["alpha"],
        gamma=cfg["gamma"],
        mu=instance.mu,
        L=instance.L,
        phi=phi,
        rho_w=mixing.rho_w,
        lambda_wi=mixing.lambda_wi,
        q_bar=run_cfg.schedule.q_bar(),
        d_eta_bar=run_cfg.schedule.d_eta_bar(),
        n=instance.n,
    )
    m = cfg["m"]
    gamma_max, _ = theorem1_bounds(params, m)
    _, alpha_max = theorem1_bounds(params, m, gamma=cfg["gamma"])

    system = None
    system_error = None
    try:
        system = build_system(params)
    except ValueError as exc:
        system_error = str(exc)

    zetas = default_zetas(params, m)
    payload: dict = {
        "command": "check",
        "config": cfg,
        "params": {
            "alpha": params.alpha,
            "gamma": params.gamma,
            "mu": params.mu,
            "L": params.L,
            "phi": phi,
            "phi_source": phi_source,
            "rho_w": params.rho_w,
            "lambda_wi": params.lambda_wi,
            "q_bar": params.q_bar,
            "d_eta_bar": params.d_eta_bar,
            "n": params.n,
            "m": m,
        },
        "bounds": {
            "gamma_max": gamma_max,
            "alpha_max": alpha_max,
            "gamma_within": cfg["gamma"] <= gamma_max,
            "alpha_within": cfg["alpha"] <= alpha_max,
        },
        "zeta": list(zetas),
    }
    if system is not None:
        check = lemma2_zeta_check(system, m, zetas)
        payload["system"] = {
            "lambda_hat": system.lambda_hat,
            "G": system.G,
            "vartheta": system.vartheta,
            "rho_G": spectral_radius(system.G),
            "rate_certificate": check.rate,
            "zeta_check_passed": check.passed,
            "zeta_slack": check.slack,
        }
    else:
        payload["system"] = {"error": system_error}

    try:
        budget = privacy_epsilon(
            alpha=cfg["alpha"],
            L=instance.L,
            q=cfg["noise"]["q"],
            delta=cfg["delta"],
            d_eta_x=cfg["noise"]["d_eta_x"],
            d_eta_y=cfg["noise"]["d_eta_y"],
        )
        payload["privacy"] = {
            "admissible": True,
            "epsilon": budget.epsilon,
            "tau": budget.tau,
            "q_floor": budget.q_floor,
            "delta": budget.delta,
        }
    except ValueError as exc:
        al = cfg["alpha"] * instance.L
        payload["privacy"] = {
            "admissible": False,
            "epsilon": None,
            "violated": str(exc),
            "q_floor": (al + (al * al + 4 * al) ** 0.5) / 2.0,
            "delta": cfg["delta"],
        }
    _emit(payload, out, f"check_report_seed{cfg['seed']}.json")
    return EXIT_OK


def _cmd_compressor_test(args) -> int:
    cfg = _resolve_config(args)
    out = args.output_dir
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    spec = parse_compressor(cfg["compressor"])
    d = cfg["problem"]["d"]
    rng = np.random.default_rng(cfg["seed"])
    phi_hat = estimate_contraction(spec, d, samples=args.samples, rng=rng, directions=args.directions)
    declared = declared_contraction(spec, d)
    payload = {
        "command": "compressor-test",
        "config": cfg,
        "compressor": spec.label(),
        "d": d,
        "samples": args.samples,
        "directions": args.directions,
        "phi_hat": phi_hat,
        "phi_declared": declared,
    }
    _emit(payload, out, f"compressor_report_seed{cfg['seed']}.json")
    return EXIT_OK


def _cmd_graph_info(args) -> int:
    cfg = _resolve_config(args)
    out = args.output_dir
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    mixing = build_graph(cfg)
    w = mixing.weights
    payload = {
        "command": "graph-info",
        "config": cfg,
        "n": mixing.n,
        "rule": mixing.rule,
        "edges": [list(e) for e in mixing.edges],
        "rho_w": mixing.rho_w,
        "lambda_wi": mixing.lambda_wi,
        "row_sum_max_dev": float(np.max(np.abs(w.sum(axis=1) - 1.0))),
        "symmetric": bool(np.array_equal(w, w.T)),
        "weights": w,
    }
    _emit(payload, out, "graph_info.json")
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "compare": _cmd_compare,
    "check": _cmd_check,
    "compressor-test": _cmd_compressor_test,
    "graph-info": _cmd_graph_info,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return _COMMANDS[args.command](args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
