"""Command-line entry point: ``sybilshard <subcommand> [flags]``.

Exit codes: 0 success, 1 alignment check failed, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import experiments as ex
from .analytics import MCConfig, attack_probability
from .pow_identity import (
    M_MAPPINGS,
    PowParams,
    difficulty,
    id_probability,
    is_strictly_sybil_resistant,
    solve_pow_demo,
    sybil_yield,
)
from .protocol import ParamError, ProtocolParams, ThresholdSpec, parse_fraction, resolve_threshold
from .rng import DEFAULT_SEED
from .sim import run_trials


class ConfigError(Exception):
    pass


def _add_protocol(p: argparse.ArgumentParser, required: bool = True):
    p.add_argument("--N", type=int, required=required, help="number of nodes")
    p.add_argument("--s", type=int, required=required, help="shard-count exponent (2**s shards)")
    p.add_argument("--c", type=int, required=required, help="shard capacity")
    tau = p.add_mutually_exclusive_group()
    tau.add_argument("--tau-frac", dest="tau_frac", help="threshold as a fraction of c, e.g. 2/3 or 0.667")
    tau.add_argument("--tau-count", dest="tau_count", type=int, help="threshold as a count of IDs")
    p.add_argument("--tau-rule", dest="tau_rule", default="ceil", choices=["ceil", "floor_plus_one"])


def _add_adversary(p: argparse.ArgumentParser):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--M", type=int, help="explicit Sybil ID count")
    g.add_argument("--rho", type=float, help="adversary share of network hash-power, in [0, 1)")
    p.add_argument("--mapping", default="total", choices=sorted(M_MAPPINGS))


def _add_run(p: argparse.ArgumentParser, trials: int):
    p.add_argument("--trials", type=int, default=trials)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--workers", type=int, default=1)


def _add_output(p: argparse.ArgumentParser):
    p.add_argument("--out", help="output file (analytic/simulate/table2) or directory (sweep)")
    p.add_argument("--format", choices=["csv", "json"], default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sybilshard", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="flat JSON record of flag values (flag names with underscores)")
    sub = parser.add_subparsers(dest="cmd", required=True)

    a = sub.add_parser("analytic", help="analytic BCP/GFT success probability")
    a.add_argument("--attack", choices=["bcp", "gft"], required=True)
    _add_protocol(a)
    _add_adversary(a)
    a.add_argument("--seed", type=int, default=DEFAULT_SEED)
    a.add_argument("--mc-trials", dest="mc_trials", type=int, help="fixed trials per conditional estimate")
    a.add_argument("--mc-halfwidth", dest="mc_halfwidth", type=float, default=0.005)
    a.add_argument("--workers", type=int, default=1)
    a.add_argument("--out")

    s = sub.add_parser("simulate", help="Monte Carlo epochs")
    _add_protocol(s)
    _add_adversary(s)
    _add_run(s, 100_000)
    s.add_argument("--out")

    w = sub.add_parser("sweep", help="hash-fraction sweep, analytic and simulated")
    w.add_argument("--fig", choices=ex.FIGURES, help="named figure preset")
    w.add_argument("--attack", choices=["bcp", "gft", "both"])
    _add_protocol(w, required=False)
    w.add_argument("--vary", choices=ex.VARIABLES)
    w.add_argument("--values", help="comma separated values for --vary")
    w.add_argument("--rho-min", dest="rho_min", type=float, default=0.0)
    w.add_argument("--rho-max", dest="rho_max", type=float, default=0.9)
    w.add_argument("--rho-step", dest="rho_step", type=float, default=0.01)
    w.add_argument("--mapping", default="total", choices=sorted(M_MAPPINGS))
    w.add_argument("--name")
    _add_run(w, 100_000)
    _add_output(w)

    v = sub.add_parser("validate", help="check analytic-vs-simulated alignment of a sweep file")
    v.add_argument("--in", dest="inp", required=True)
    v.add_argument("--slack", type=float, default=0.02)

    t = sub.add_parser("table2", help="evaluate the design-table regimes")
    _add_run(t, 100_000)
    t.add_argument("--out")

    pw = sub.add_parser("pow", help="PoW difficulty, ID probability and Sybil yield")
    pw.add_argument("--L", type=int, default=256)
    pw.add_argument("--L-t1", dest="L_t1", type=int, default=224)
    pw.add_argument("--L-ti", dest="L_ti", type=int, default=224)
    pw.add_argument("--h", type=float, required=True, help="adversary hash-power (hashes/s)")
    pw.add_argument("--T-I", dest="T_I", type=float, required=True, help="initialization time (s)")
    pw.add_argument("--stochastic", action="store_true", help="draw M from a binomial instead of flooring")
    pw.add_argument("--seed", type=int, default=DEFAULT_SEED)

    d = sub.add_parser("pow-demo", help="solve one SHA-256 identity puzzle")
    d.add_argument("--epoch-randomness", dest="epoch_randomness", default="00", help="hex")
    d.add_argument("--identity", default="127.0.0.1|pk", help="IP||PK material (utf-8)")
    d.add_argument("--L-ti", dest="L_ti", type=int, required=True)
    d.add_argument("--max-attempts", dest="max_attempts", type=int, default=1_000_000)
    return parser


def _tau_spec(args) -> ThresholdSpec:
    if getattr(args, "tau_count", None) is not None:
        return ThresholdSpec(count=args.tau_count)
    if getattr(args, "tau_frac", None) is not None:
        return ThresholdSpec(fraction=parse_fraction(str(args.tau_frac)))
    return ThresholdSpec(fraction=parse_fraction("2/3"))


def _params(args) -> ProtocolParams:
    tau = resolve_threshold(_tau_spec(args), args.c, args.tau_rule)
    return ProtocolParams(N=args.N, s=args.s, c=args.c, tau=tau)


def _sybils(args, N: int) -> int:
    if args.M is not None:
        return args.M
    if args.rho is not None:
        return M_MAPPINGS[args.mapping](args.rho, N)
    raise ConfigError("give --M or --rho")


def _emit(doc: dict, out: Optional[str]):
    text = json.dumps(doc, indent=2) + "\n"
    if out:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    sys.stdout.write(text)


def cmd_analytic(args) -> int:
    p = _params(args)
    M = _sybils(args, p.N)
    mc = MCConfig(seed=args.seed, trials=args.mc_trials, target_halfwidth=args.mc_halfwidth)
    res = attack_probability(args.attack, M, p, mc, args.workers)
    doc = res.to_dict()
    if args.rho is not None:
        doc["rho"] = args.rho
    _emit(doc, args.out)
    return 0


def cmd_simulate(args) -> int:
    p = _params(args)
    M = _sybils(args, p.N)
    rep = run_trials(p, M, args.trials, args.seed, args.workers)
    doc = rep.to_dict()
    if args.rho is not None:
        doc["rho"] = args.rho
    _emit(doc, args.out)
    return 0


def _sweep_spec(args) -> ex.SweepSpec:
    rhos = ex.rho_grid(args.rho_max, args.rho_step, args.rho_min)
    values = [v.strip() for v in args.values.split(",")] if args.values else None
    common = dict(rhos=rhos, trials=args.trials, seed=args.seed, tau_rule=args.tau_rule,
                  mapping=args.mapping, workers=args.workers)
    tau = None
    if args.tau_frac is not None or args.tau_count is not None:
        tau = _tau_spec(args)
    if args.fig:
        return ex.figure_spec(args.fig, attack=args.attack, N=args.N, s=args.s, c=args.c, tau=tau,
                              vary=args.vary, values=values, **common)
    missing = [k for k in ("attack", "N", "s", "c") if getattr(args, k) is None]
    if missing:
        raise ConfigError(f"sweep without --fig needs {', '.join('--' + m for m in missing)}")
    if args.vary and not values:
        raise ConfigError("--vary needs --values")
    return ex.SweepSpec(name=args.name or "sweep", attack=args.attack, N=args.N, s=args.s, c=args.c,
                        tau=tau or ThresholdSpec(fraction=parse_fraction("2/3")), vary=args.vary,
                        values=values or (), **common)


def cmd_sweep(args) -> int:
    spec = _sweep_spec(args)
    result = ex.run_sweep(spec)
    out = Path(args.out or ".")
    header = spec.header()
    if args.format == "csv":
        path = ex.write_csv(result.rows, out / f"{spec.name}.csv")
        meta = out / f"{spec.name}.meta.json"
        meta.write_text(json.dumps({"header": header, "skipped": result.skipped}, indent=2) + "\n")
    else:
        path = ex.write_json(result.rows, out / f"{spec.name}.json", header, result.skipped)
    print(json.dumps({"wrote": str(path), "rows": len(result.rows), "skipped": len(result.skipped),
                      "header": header}))
    return 0


def cmd_validate(args) -> int:
    rows = ex.read_rows(args.inp)
    rep = ex.validate_alignment(rows, args.slack)
    print(json.dumps(rep.to_dict(), indent=2))
    return 0 if rep.passed else 1


def cmd_table2(args) -> int:
    report = ex.table2_report(args.trials, args.seed, args.workers)
    _emit(report, args.out)
    return 0


def cmd_pow(args) -> int:
    try:
        p = PowParams(L=args.L, L_t1=args.L_t1, L_ti=args.L_ti, T_I=args.T_I, h=args.h)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rng = np.random.default_rng(args.seed) if args.stochastic else None
    y = sybil_yield(p, args.h, rng)
    _emit({
        "difficulty": difficulty(p),
        "id_probability": id_probability(p),
        "expected_yield": y.expected,
        "M": y.M,
        "strictly_sybil_resistant": is_strictly_sybil_resistant(p, args.h),
    }, None)
    return 0


def cmd_pow_demo(args) -> int:
    try:
        randomness = bytes.fromhex(args.epoch_randomness)
    except ValueError as exc:
        raise ConfigError(f"--epoch-randomness must be hex: {exc}") from exc
    nonce = solve_pow_demo(randomness, args.identity.encode(), args.L_ti, args.max_attempts)
    _emit({"nonce": nonce, "found": nonce is not None, "L_ti": args.L_ti}, None)
    return 0


COMMANDS = {
    "analytic": cmd_analytic,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
    "table2": cmd_table2,
    "pow": cmd_pow,
    "pow-demo": cmd_pow_demo,
}


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if known.config:
        try:
            cfg = json.loads(Path(known.config).read_text())
        except (OSError, ValueError) as exc:
            parser.error(f"cannot read config {known.config}: {exc}")
        if not isinstance(cfg, dict):
            parser.error("config must be a flat JSON object")
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        cmd = next((a for a in rest if not a.startswith("-")), None)
        sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
        if cmd in sub.choices:
            # flags given on the command line win over the config file
            sub.choices[cmd].set_defaults(**cfg)
            for action in sub.choices[cmd]._actions:
                if action.dest in cfg:
                    action.required = False
    return parser.parse_args(argv)


def main(argv: Optional[List[str]] = None) -> int:
    args = parse_args(argv)
    try:
        return COMMANDS[args.cmd](args)
    except ParamError as exc:
        print(f"error [{exc.invariant}]: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, KeyError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
