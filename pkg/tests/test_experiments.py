import csv
import json
from fractions import Fraction

import pytest

from sybilshard import experiments as ex


def small_spec(**kw):
    base = dict(name="t", attack="bcp", N=14, s=2, c=3, rhos=[0.0, 0.3, 0.6], trials=5000, seed=3)
    base.update(kw)
    return ex.SweepSpec(**base)


def test_empty_grid_gives_no_rows():
    assert len(ex.run_sweep(small_spec(rhos=[]))) == 0


def test_rows_cover_grid_in_order():
    res = ex.run_sweep(small_spec(attack="both", N=20, vary="c", values=[3, 4]))
    keys = [(r.c, r.rho, r.attack) for r in res.rows]
    assert keys == [(c, rho, a) for c in (3, 4) for rho in (0.0, 0.3, 0.6) for a in ("bcp", "gft")]
    for r in res.rows:
        assert 0 <= r.p_analytic <= 1 and 0 <= r.p_sim <= 1
        assert r.ci_lo <= r.p_sim <= r.ci_hi


def test_invalid_combinations_are_skipped():
    # N = 200 with N* = 200 leaves the pool one ID short when M = 0
    res = ex.run_sweep(small_spec(N=200, c=50, rhos=[0.0, 0.2], trials=1000))
    assert len(res.rows) == 1 and res.rows[0].rho == 0.2
    assert len(res.skipped) == 1 and "pool" in res.skipped[0]["reason"]


def test_rho_grid():
    g = ex.rho_grid(0.9, 0.05)
    assert len(g) == 19 and g[0] == 0.0 and g[-1] == 0.9 and g[3] == 0.15
    assert len(ex.rho_grid()) == 91


def test_csv_header_and_round_trip(tmp_path):
    rows = ex.run_sweep(small_spec()).rows
    path = ex.write_csv(rows, tmp_path / "a.csv")
    with open(path) as fh:
        header = next(csv.reader(fh))
    assert ",".join(header) == "rho,M,N,s,c,tau,attack,p_analytic,p_analytic_raw,p_sim,ci_lo,ci_hi,trials,seed,method"
    assert ex.read_rows(path) == rows
    jpath = ex.write_json(rows, tmp_path / "a.json", {"name": "t"})
    assert ex.read_rows(jpath) == rows
    doc = json.loads(jpath.read_text())
    assert list(doc["rows"][0]) == list(ex.CSV_FIELDS)


def test_sweep_csv_is_byte_identical(tmp_path):
    a = ex.write_csv(ex.run_sweep(small_spec()).rows, tmp_path / "a.csv").read_bytes()
    b = ex.write_csv(ex.run_sweep(small_spec(workers=2)).rows, tmp_path / "b.csv").read_bytes()
    assert a == b


def row(a, p, lo, hi):
    return ex.SweepRow(0.1, 1, 14, 2, 3, 2, "bcp", a, a, p, lo, hi, 100, 1, "closed-form")


def test_alignment_examples():
    rep = ex.validate_alignment([row(0.3, 0.3, 0.29, 0.31)])
    assert rep.max_gap == 0 and rep.passed
    rep = ex.validate_alignment([row(0.5, 0.5, 0.49, 0.51)])
    assert rep.passed
    rep = ex.validate_alignment([row(0.6, 0.5, 0.49, 0.51)], slack=0.02)
    assert not rep.passed and rep.max_gap == pytest.approx(0.1)
    assert ex.validate_alignment([]).passed


def test_figure_presets():
    assert set(ex.FIGURES) == {"2a", "2b", "2c", "3a", "3b", "3c", "3d", "4a", "4b", "4c", "4d"}
    s = ex.figure_spec("2b")
    assert (s.N, s.s, s.c, s.attack) == (200, 2, 50, "bcp")
    s = ex.figure_spec("4d", trials=10)
    assert s.attack == "gft" and s.vary == "tau" and s.trials == 10
    assert [t.fraction for t in (ex.ThresholdSpec.of(v) for v in s.values)] == [
        Fraction(13, 25), Fraction(3, 5), Fraction(2, 3), Fraction(3, 4)]
    with pytest.raises(KeyError):
        ex.figure_spec("9z")


def _analytic_curve(vary, values, attack, rho, **base):
    spec = ex.SweepSpec(name="m", attack=attack, rhos=[rho], vary=vary, values=values, trials=20_000,
                        seed=4, **base)
    return ex.run_sweep(spec).rows


@pytest.mark.parametrize("attack,rho", [("bcp", 0.25), ("bcp", 0.3), ("gft", 0.6)])
def test_probability_falls_with_capacity(attack, rho):
    rows = _analytic_curve("c", [50, 100, 200], attack, rho, N=1000, s=2, c=50)
    vals = [r.p_analytic for r in rows]
    for a, b in zip(vals, vals[1:]):
        assert b <= a + 0.01


@pytest.mark.parametrize("attack,rho", [("bcp", 0.25), ("gft", 0.6)])
def test_probability_rises_with_shards(attack, rho):
    rows = _analytic_curve("s", [1, 2, 3], attack, rho, N=1000, s=1, c=50)
    vals = [r.p_analytic for r in rows]
    for a, b in zip(vals, vals[1:]):
        assert b >= a - 0.01


def test_table2_params():
    p = ex.table2_params(4, 600)
    assert (p.n_star, p.N, p.tau) == (9600, 19200, 400)


def test_table2_report_small_grid():
    rows = (ex.Table2Row("25%", (0.25,), ((2, 100),), "<=1", "==0", "all"),)
    rep = ex.table2_report(trials=2000, seed=1, rows=rows)
    assert rep["rows"][0]["label"] == "25%"
    assert len(rep["quarter_power_bcp"]) == len(ex.TABLE2_S) * len(ex.TABLE2_C)
    assert "closest_to_0_2" in rep and isinstance(rep["low_power_gft_ok"], bool)


def test_table_bounds():
    assert ex._meets(2e-150, "==0") and not ex._meets(1e-6, "==0")
    assert ex._meets(0.9995, "==1") and not ex._meets(0.99, "==1")
    assert ex._meets(0.8, ">=0.8") and ex._meets(1e-4, "<=1e-4") and not ex._meets(0.006, "<=0.005")
    with pytest.raises(ValueError):
        ex._meets(0.1, "~0.1")
