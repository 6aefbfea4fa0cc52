"""Parameter sweeps, analytic-vs-simulated alignment, and the design table."""
from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

from .analytics import MCConfig, attack_probability
from .pow_identity import M_MAPPINGS
from .protocol import ParamError, ProtocolParams, ThresholdSpec, resolve_threshold, validate_params
from .rng import DEFAULT_SEED
from .sim import run_trials

CSV_FIELDS = (
    "rho", "M", "N", "s", "c", "tau", "attack", "p_analytic", "p_analytic_raw",
    "p_sim", "ci_lo", "ci_hi", "trials", "seed", "method",
)

VARIABLES = ("s", "c", "N", "tau")


def rho_grid(stop: float = 0.9, step: float = 0.01, start: float = 0.0) -> List[float]:
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 10) for i in range(count)]


@dataclass
class SweepSpec:
    """A hash-fraction sweep over one protocol setup, optionally varying one parameter."""

    name: str
    attack: str
    N: int
    s: int
    c: int
    tau: ThresholdSpec = ThresholdSpec(fraction=Fraction(2, 3))
    rhos: Sequence[float] = field(default_factory=rho_grid)
    vary: Optional[str] = None
    values: Sequence = ()
    trials: int = 100_000
    seed: int = DEFAULT_SEED
    mc: Optional[MCConfig] = None
    tau_rule: str = "ceil"
    mapping: str = "total"
    workers: int = 1

    def __post_init__(self):
        self.tau = ThresholdSpec.of(self.tau)
        if self.attack not in ("bcp", "gft", "both"):
            raise ValueError(f"attack must be bcp, gft or both, got {self.attack!r}")
        if self.vary is not None and self.vary not in VARIABLES:
            raise ValueError(f"vary must be one of {VARIABLES}, got {self.vary!r}")

    @property
    def attacks(self) -> tuple:
        return ("bcp", "gft") if self.attack == "both" else (self.attack,)

    def setups(self) -> List[dict]:
        base = {"N": self.N, "s": self.s, "c": self.c, "tau": self.tau}
        if self.vary is None:
            return [base]
        out = []
        for v in self.values:
            setup = dict(base)
            setup[self.vary] = ThresholdSpec.of(v) if self.vary == "tau" else int(v)
            out.append(setup)
        return out

    def header(self) -> dict:
        return {
            "name": self.name, "attack": self.attack, "N": self.N, "s": self.s, "c": self.c,
            "tau": self.tau.describe(), "vary": self.vary, "values": [str(v) for v in self.values],
            "rho_min": min(self.rhos) if self.rhos else None, "rho_max": max(self.rhos) if self.rhos else None,
            "rho_points": len(self.rhos), "trials": self.trials, "seed": self.seed,
            "tau_rule": self.tau_rule, "mapping": self.mapping,
        }


@dataclass
class SweepRow:
    rho: float
    M: int
    N: int
    s: int
    c: int
    tau: int
    attack: str
    p_analytic: float
    p_analytic_raw: float
    p_sim: float
    ci_lo: float
    ci_hi: float
    trials: int
    seed: int
    method: str

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class SweepResult:
    rows: List[SweepRow]
    skipped: List[dict]

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)


def run_sweep(spec: SweepSpec) -> SweepResult:
    """Analytic and simulated probabilities at every (setup, rho, attack); rows in grid order."""
    mc = spec.mc or MCConfig(seed=spec.seed)
    to_m = M_MAPPINGS[spec.mapping]
    rows, skipped = [], []
    for setup in spec.setups():
        for rho in spec.rhos:
            try:
                tau = resolve_threshold(setup["tau"], setup["c"], spec.tau_rule)
                p = ProtocolParams(N=setup["N"], s=setup["s"], c=setup["c"], tau=tau)
                M = to_m(rho, p.N)
                validate_params(p, M)
            except (ParamError, ValueError) as exc:
                skipped.append({"rho": rho, **{k: str(v) for k, v in setup.items()}, "reason": str(exc)})
                continue
            report = run_trials(p, M, spec.trials, spec.seed, spec.workers)
            for attack in spec.attacks:
                ap = attack_probability(attack, M, p, mc, spec.workers)
                p_sim, (lo, hi) = report.estimate(attack)
                rows.append(
                    SweepRow(
                        rho=rho, M=M, N=p.N, s=p.s, c=p.c, tau=p.tau, attack=attack,
                        p_analytic=ap.value, p_analytic_raw=ap.raw_value, p_sim=p_sim,
                        ci_lo=lo, ci_hi=hi, trials=spec.trials, seed=spec.seed, method=ap.method,
                    )
                )
    return SweepResult(rows, skipped)


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def write_csv(rows: Iterable[SweepRow], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in rows:
            d = r.as_dict()
            w.writerow([_fmt(d[k]) for k in CSV_FIELDS])
    return path


def write_json(rows: Iterable[SweepRow], path, header: Optional[dict] = None, skipped=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"header": header or {}, "rows": [r.as_dict() for r in rows], "skipped": list(skipped or [])}
    path.write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")
    return path


_INT_FIELDS = {"M", "N", "s", "c", "tau", "trials", "seed"}
_STR_FIELDS = {"attack", "method"}


def read_rows(path) -> List[SweepRow]:
    """Load rows back from a CSV or JSON sweep file."""
    path = Path(path)
    if path.suffix == ".json":
        return [SweepRow(**d) for d in json.loads(path.read_text())["rows"]]
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_FIELDS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for d in reader:
            rows.append(
                SweepRow(**{
                    k: (int(v) if k in _INT_FIELDS else v if k in _STR_FIELDS else float(v))
                    for k, v in d.items()
                })
            )
    return rows


@dataclass
class AlignmentReport:
    max_gap: float
    passed: bool
    slack: float
    n_rows: int
    failures: List[SweepRow]

    def to_dict(self) -> dict:
        return {
            "max_gap": self.max_gap, "passed": self.passed, "slack": self.slack,
            "n_rows": self.n_rows, "failures": [r.as_dict() for r in self.failures],
        }


def validate_alignment(rows: Sequence[SweepRow], slack: float = 0.02) -> AlignmentReport:
    """Max |analytic - simulated|; pass iff each analytic value sits in the simulated CI widened by ``slack``."""
    rows = list(rows)
    gaps = [abs(r.p_analytic - r.p_sim) for r in rows]
    failures = [r for r in rows if not (r.ci_lo - slack <= r.p_analytic <= r.ci_hi + slack)]
    return AlignmentReport(max(gaps, default=0.0), not failures, slack, len(rows), failures)


# ------------------------------------------------------------- figure presets

_FIG_BASE = {
    "2a": dict(attack="bcp", N=14, s=2, c=3),
    "2b": dict(attack="bcp", N=200, s=2, c=50),
    "2c": dict(attack="gft", N=20, s=2, c=4),
}
_FIG3_VARY = {
    "a": dict(N=2000, s=2, c=100, vary="s", values=[2, 3, 4]),
    "b": dict(N=3000, s=2, c=100, vary="c", values=[100, 200, 400, 600]),
    "c": dict(N=2000, s=4, c=100, vary="N", values=[1700, 2000, 2500, 3000]),
    "d": dict(N=2000, s=4, c=100, vary="tau", values=["13/25", "3/5", "2/3", "3/4"]),
}
for _k, _v in _FIG3_VARY.items():
    _FIG_BASE["3" + _k] = dict(attack="bcp", **_v)
    _FIG_BASE["4" + _k] = dict(attack="gft", **_v)

FIGURES = tuple(sorted(_FIG_BASE))


def figure_spec(fig: str, **overrides) -> SweepSpec:
    """Sweep preset for a figure panel (``2a``..``2c``, ``3a``..``3d``, ``4a``..``4d``)."""
    if fig not in _FIG_BASE:
        raise KeyError(f"unknown figure {fig!r}; choose from {', '.join(FIGURES)}")
    kw = dict(_FIG_BASE[fig])
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return SweepSpec(name=f"fig{fig}", **kw)


# ------------------------------------------------------------------ design table

TABLE2_S = (2, 3, 4)
TABLE2_C = (100, 200, 400, 600)


def table2_params(s: int, c: int, tau=Fraction(2, 3), rule: str = "ceil") -> ProtocolParams:
    """Grid cell for the design table; the network has twice the IDs an epoch consumes."""
    n_star = (1 << s) * c
    return ProtocolParams(N=2 * n_star, s=s, c=c, tau=resolve_threshold(ThresholdSpec.of(tau), c, rule))


@dataclass
class CellResult:
    s: int
    c: int
    N: int
    tau: int
    rho: float
    M: int
    p_bcp: float
    p_gft: float
    p_bcp_ci: Optional[tuple]
    p_gft_ci: Optional[tuple]
    sim_bcp: float
    sim_gft: float
    sim_gft_successes: int
    trials: int


def evaluate_cell(s: int, c: int, rho: float, trials: int, seed: int = DEFAULT_SEED,
                  workers: int = 1, mc: Optional[MCConfig] = None) -> CellResult:
    p = table2_params(s, c)
    M = M_MAPPINGS["total"](rho, p.N)
    mc = mc or MCConfig(seed=seed)
    b = attack_probability("bcp", M, p, mc, workers)
    g = attack_probability("gft", M, p, mc, workers)
    rep = run_trials(p, M, trials, seed, workers)
    return CellResult(s, c, p.N, p.tau, rho, M, b.value, g.value, b.ci, g.ci,
                      rep.p_bcp_hat, rep.p_gft_hat, rep.gft_successes, trials)


@dataclass
class Table2Row:
    label: str
    rhos: tuple
    cells: tuple
    bcp_bound: str
    gft_bound: str
    quantifier: str


TABLE2_ROWS = (
    Table2Row("25%", (0.25,), tuple((s, 600) for s in TABLE2_S), "<=1e-4", "==0", "all"),
    Table2Row("[33%, 53%]", (0.33, 0.43, 0.53), tuple((s, c) for s in TABLE2_S for c in TABLE2_C),
              ">=0.8", "<=0.005", "all"),
    Table2Row("56%", (0.56,), tuple((s, 600) for s in TABLE2_S), "==1", "<=0.001", "all"),
    Table2Row("above 66%", (0.67,), tuple((s, c) for s in TABLE2_S for c in TABLE2_C), "==1", ">=0.75", "any"),
)


# a tabulated 0 is read as "below this" analytically, plus no simulated successes
ZERO_RESOLUTION = 1e-12


def _meets(value: float, bound: str) -> bool:
    op, lim = bound[:2], float(bound[2:])
    if op == "<=":
        return value <= lim
    if op == ">=":
        return value >= lim
    if op == "==":
        return abs(value - lim) <= 1e-3 if lim else value <= ZERO_RESOLUTION
    raise ValueError(bound)


def table2_report(trials: int = 100_000, seed: int = DEFAULT_SEED, workers: int = 1,
                  rows: Sequence[Table2Row] = TABLE2_ROWS) -> dict:
    """Evaluate the four design-table regimes on the (s, c) grid and check each bound."""
    cache: Dict[tuple, CellResult] = {}

    def cell(s, c, rho):
        key = (s, c, rho)
        if key not in cache:
            cache[key] = evaluate_cell(s, c, rho, trials, seed, workers)
        return cache[key]

    out_rows = []
    for row in rows:
        results = []
        for rho in row.rhos:
            for s, c in row.cells:
                r = cell(s, c, rho)
                ok_b = _meets(r.p_bcp, row.bcp_bound)
                ok_g = _meets(r.p_gft, row.gft_bound)
                if row.gft_bound == "==0":
                    ok_g = ok_g and r.sim_gft_successes == 0
                results.append({**dataclasses.asdict(r), "bcp_ok": ok_b, "gft_ok": ok_g})
        if row.quantifier == "all":
            passed = all(x["bcp_ok"] and x["gft_ok"] for x in results)
        else:
            passed = all(x["bcp_ok"] for x in results) and any(x["gft_ok"] for x in results)
        out_rows.append({
            "label": row.label, "P_B": row.bcp_bound, "P_G": row.gft_bound,
            "quantifier": row.quantifier, "passed": passed, "cells": results,
        })
    # adversaries at or under 45% should never reach the GFT level of the last row
    low = [cell(s, c, 0.45) for s in TABLE2_S for c in TABLE2_C]
    # 25% cells over the whole grid, to locate a P_B near 0.2
    quarter = [cell(s, c, 0.25) for s in TABLE2_S for c in TABLE2_C]
    near = min(quarter, key=lambda r: abs(r.p_bcp - 0.2))
    return {
        "trials": trials,
        "seed": seed,
        "grid": {"s": list(TABLE2_S), "c": list(TABLE2_C), "N": "2 * N*"},
        "rows": out_rows,
        "low_power_gft_max": max(r.p_gft for r in low),
        "low_power_gft_ok": all(r.p_gft < 0.75 for r in low),
        "quarter_power_bcp": [{"s": r.s, "c": r.c, "p_bcp": r.p_bcp} for r in quarter],
        "closest_to_0_2": {"s": near.s, "c": near.c, "p_bcp": near.p_bcp},
    }
