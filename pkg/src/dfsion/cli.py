"""``dfsion`` command line.

Exit codes: 0 success, 1 check or acceptance failure, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import pauli
from .compiler import PROFILES
from .config import ConfigError, ScenarioConfig, load_config
from .noise import DephasingModel
from . import runs

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _common(p: argparse.ArgumentParser, config: bool = True) -> None:
    if config:
        p.add_argument("--config", type=Path, help="scenario YAML file")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--seed", type=int, help="random seed for noise sampling")
    p.add_argument("--profile", choices=sorted(PROFILES), help="hardware profile")
    p.add_argument("--wrappers", choices=("ideal", "physical"), help="logical pi/2 pulses around the phase gate")
    p.add_argument("--fock-dim", type=int, help="phonon truncation")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="dfsion", description="Pair-encoded trapped-ion logical gates: checks and simulations.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    va = sub.add_parser("verify-algebra", help="run the operator-algebra checks")
    va.add_argument("--trials", type=int, default=100)
    va.add_argument("--seed", type=int, default=0)
    va.add_argument("--mutate", choices=("rho", "theta", "vartheta", "zeta", "kappa", "lam", "varsigma", "xi"),
                    help="flip the sign of one null-operator term (the null check must then fail)")

    sim = sub.add_parser("simulate", help="simulate a scenario and write populations CSV and final-state JSON")
    _common(sim)
    sim.add_argument("--scenario", choices=runs_scenarios(), help="built-in scenario")
    sim.add_argument("--input", help="initial qubit label, e.g. 0101")
    sim.add_argument("--model", choices=("full", "effective"))

    ct = sub.add_parser("cnot-table", help="truth-table fidelities of the logical CNOT")
    _common(ct)
    ct.add_argument("--addressing-error", type=float, default=None)
    ct.add_argument("--model", choices=("full", "effective"), default="full")
    ct.add_argument("--min-fidelity", type=float, default=0.90, help="threshold for exit status 1")

    dm = sub.add_parser("dfs-memory", help="encoded vs bare survival under collective dephasing")
    _common(dm)
    dm.add_argument("--distribution", choices=("fixed", "uniform", "gaussian"))
    dm.add_argument("--width", type=float, help="phase value, half-width or standard deviation (rad)")
    dm.add_argument("--scope", choices=("all", "pair"))
    dm.add_argument("--samples", type=int)

    sw = sub.add_parser("sweep", help="one simulation per parameter value")
    _common(sw)
    sw.add_argument("--axis", choices=runs.SWEEP_AXES)
    sw.add_argument("--values", type=float, nargs="*")
    sw.add_argument("--scenario", choices=runs_scenarios())
    sw.add_argument("--workers", type=int)
    return ap


def runs_scenarios() -> tuple[str, ...]:
    return ("cnot-demo", "hot-exchange", "exchange", "empty")


def _load(args) -> ScenarioConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else ScenarioConfig()
    if getattr(args, "profile", None):
        cfg.profile = replace(PROFILES[args.profile], fock_dim=cfg.profile.fock_dim)
    if getattr(args, "fock_dim", None) is not None:
        if args.fock_dim < 1:
            raise ConfigError("--fock-dim must be >= 1", "<command line>")
        cfg.profile = cfg.profile.with_(fock_dim=args.fock_dim)
    if getattr(args, "wrappers", None):
        cfg.wrappers = args.wrappers
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "out", None):
        cfg.out_dir = args.out
    return cfg


def cmd_verify_algebra(args) -> int:
    reports = [
        pauli.check_su2(trials=args.trials, seed=args.seed),
        pauli.check_null(trials=args.trials, seed=args.seed + 1, sign_flip=args.mutate),
        pauli.check_orthonormality(seed=args.seed + 2),
        pauli.uniqueness_table(),
        pauli.verify_recoupling_identity(),
    ]
    for r in reports:
        print(r.summary())
    weights = reports[3].details["max_weight"]
    print("uniqueness (max physical weight of sigma^a_L x sigma^b_L over the parameter grid):")
    for a in range(4):
        print("  " + "  ".join(f"{a}{b}:{weights[(a, b)]}" for b in range(4)))
    ok = all(r.passed for r in reports)
    print("ALL PASS" if ok else "FAILURES PRESENT")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_simulate(args) -> int:
    cfg = _load(args)
    if args.scenario:
        cfg.scenario = args.scenario
        if args.scenario in ("hot-exchange", "exchange") and not args.config:
            cfg.initial = replace(cfg.initial, amplitudes={"10": 1.0})
    if args.input:
        cfg.initial = replace(cfg.initial, amplitudes={args.input: 1.0})
    if args.model:
        cfg.model = args.model
    if cfg.scenario == "dfs-memory":
        return cmd_dfs_memory(args, cfg)
    out = runs.simulate(cfg)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    prefix = cfg.prefix or cfg.scenario
    csv_path = cfg.out_dir / f"{prefix}_populations.csv"
    json_path = cfg.out_dir / f"{prefix}_final.json"
    runs.write_populations_csv(csv_path, out)
    runs.write_json(json_path, out.summary)
    print(f"fidelity {out.fidelity:.6f}  duration {out.summary['duration_s'] * 1e3:.3f} ms  "
          f"two-body area {out.summary['pulse_area_two_body_pi']:.4f} pi")
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK


def cmd_cnot_table(args) -> int:
    cfg = _load(args)
    err = cfg.addressing_error if args.addressing_error is None else args.addressing_error
    if not 0 <= err <= 0.2:
        raise ConfigError("addressing error must lie in [0, 0.2]", "<command line>")
    table = runs.cnot_table(cfg.profile, cfg.wrappers, err, args.model, runs.options(cfg),
                            addressing_mode=cfg.addressing_mode)
    for r in table["rows"]:
        print(f"{r['input']} -> {r['expected']}  fidelity {r['fidelity']:.6f}")
    print(f"min fidelity {table['min_fidelity']:.6f}  duration {table['duration_s'] * 1e3:.3f} ms  "
          f"two-body area {table['pulse_area_two_body_pi']:.4f} pi  "
          f"(recoupling {table['pulse_area_recoupling_pi']:.4f} pi)")
    if args.out or args.config:
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        runs.write_json(cfg.out_dir / "cnot_table.json", table)
    return EXIT_OK if table["min_fidelity"] >= args.min_fidelity else EXIT_FAIL


def cmd_dfs_memory(args, cfg: ScenarioConfig | None = None) -> int:
    cfg = cfg or _load(args)
    dp = dict(cfg.dephasing or {"distribution": "uniform", "width": math.pi, "scope": "all"})
    for k in ("distribution", "width", "scope"):
        if getattr(args, k, None) is not None:
            dp[k] = getattr(args, k)
    samples = getattr(args, "samples", None) or cfg.samples
    seed = cfg.seed if cfg.seed is not None else 0
    res = runs.dfs_memory(DephasingModel(**dp), samples, seed)
    print(f"encoded survival {res['encoded']:.6f}")
    print(f"bare    survival {res['bare']:.6f}")
    if getattr(args, "out", None) or getattr(args, "config", None):
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        runs.write_json(cfg.out_dir / "dfs_memory.json", res)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    if args.scenario:
        cfg.scenario = args.scenario
    if args.config is None and cfg.scenario == "cnot-demo" and not args.scenario:
        cfg.scenario = "exchange"
        cfg.initial = replace(cfg.initial, amplitudes={"10": 1.0})
    elif cfg.scenario in ("hot-exchange", "exchange") and args.config is None:
        cfg.initial = replace(cfg.initial, amplitudes={"10": 1.0})
    axis = args.axis or cfg.sweep_axis
    values = args.values if args.values is not None else cfg.sweep_values
    if axis is None and cfg.scenario == "hot-exchange":
        axis, values = "fock", values or [0, 1, 2, 3]
    if axis is None:
        raise ConfigError("no sweep axis given (use --axis or sweep.axis)", "<command line>")
    rows = runs.sweep(cfg, axis, values, args.workers or cfg.workers)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.out_dir / f"sweep_{axis}.csv"
    runs.write_sweep_csv(path, axis, rows)
    for r in rows:
        print(f"{axis}={r['value']:g}  fidelity {r['fidelity']:.6f}  duration {r['duration_s'] * 1e3:.3f} ms")
    print(f"wrote {path}")
    return EXIT_OK


COMMANDS = {"verify-algebra": cmd_verify_algebra, "simulate": cmd_simulate, "cnot-table": cmd_cnot_table,
            "dfs-memory": cmd_dfs_memory, "sweep": cmd_sweep}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
