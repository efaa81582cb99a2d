"""Acceptance criteria at full scale.

Each test runs one criterion at its stated size and tolerance and records a
one-line verdict; the verdicts are printed together at the end of the pytest
session (and directly when this file is run as a script).
"""

import time
from fractions import Fraction

import pytest

from renyichain import chainrule, suites

VERDICTS: dict[str, str] = {}
SEED = 20240601


def record(key: str, ok: bool, detail: str) -> None:
    VERDICTS[key] = f"[{'PASS' if ok else 'FAIL'}] {key}: {detail}"


class _Timed:
    def __init__(self, fn, **kwargs):
        start = time.perf_counter()
        self.result = fn(**kwargs)
        self.seconds = time.perf_counter() - start


_cache: dict[str, _Timed] = {}


def run_once(name: str, fn, **kwargs) -> _Timed:
    if name not in _cache:
        _cache[name] = _Timed(fn, **kwargs)
    return _cache[name]


def duality():
    return run_once("duality", suites.duality, trials=200, seed=SEED)


def four_party():
    return run_once("lemma4", suites.four_party_expressions, trials=100, seed=SEED)


def variational():
    return run_once("lemma6", suites.variational, trials=100, seed=SEED)


def chain_sweep():
    return run_once(
        "sweep", chainrule.sweep,
        triples=chainrule.default_grid(), ensemble=chainrule.EnsembleSpec("ginibre"),
        trials=300, seed=SEED, config=suites.SUITE_CONFIG, pins=chainrule.PINS,
    )


def _worst(report, key):
    return report.summary()["worst_residual"][key]


def test_c1_duality():
    run = duality()
    rep = run.result
    worst = _worst(rep, "duality")
    ok = rep.violations == 0 and len(rep.records) == 1000 and worst <= 1e-5 and run.seconds < 60
    record("C1 duality", ok, f"{len(rep.records)} checks, worst |H+H^| = {worst:.2e} (tol 1e-5), {run.seconds:.1f}s")
    assert ok


def test_c2_four_party_expressions():
    run = four_party()
    rep = run.result
    w = rep.summary()["worst_residual"]
    ok = (rep.violations == 0 and len(rep.records) == 400 and w["expr4"] <= 1e-8
          and w["expr3"] <= 1e-6 and w["expr5"] <= 1e-6 and run.seconds < 120)
    record("C2 four-party expressions", ok,
           f"worst expr3 {w['expr3']:.2e}, expr4 {w['expr4']:.2e}, expr5 {w['expr5']:.2e}, {run.seconds:.1f}s")
    assert ok


def test_c3_variational_norm():
    rep = variational().result
    worst = _worst(rep, "relative")
    ok = rep.violations == 0 and len(rep.records) == 300 and worst <= 1e-6
    record("C3 variational norm", ok, f"{len(rep.records)} checks, worst relative {worst:.2e} (tol 1e-6)")
    assert ok


def test_c4_chain_rule_sweep():
    run = chain_sweep()
    res = run.result
    min_margin = min(s.min_margin for s in res.summaries)
    corner_names = {r.state.get("name") for r in res.reports if r.state.get("ensemble") == "corners"}
    pins = {r.sigma_pinned for r in res.reports}
    ok = (res.ok and len(res.summaries) == 10 and min_margin >= -1e-8 and run.seconds < 600
          and {"pure_product", "maximally_entangled", "classical_diagonal", "rank_deficient"} <= corner_names
          and pins == {None, *chainrule.PINS})
    record("C4 chain-rule sweep", ok,
           f"{len(res.reports)} trials over 10 triples, violations {res.violations}, "
           f"min margin {min_margin:.2e} bits, {run.seconds:.0f}s")
    assert ok


def test_c5_interpolation():
    rep = suites.interpolation(trials=100, seed=SEED)
    branches = {r["branch"] for r in rep.records}
    worst_id = _worst(rep, "identity")
    ok = (rep.violations == 0 and len(rep.records) == 300 and worst_id <= 1e-12
          and branches == {"prop5", "prop6_beta_pos", "prop6_gamma_pos"}
          and all(abs(r["p_theta"] - 2) <= 1e-12 for r in rep.records if r["branch"] == "prop5"))
    record("C5 interpolation", ok,
           f"{len(rep.records)} instances, bound violations {rep.violations}, identity residual {worst_id:.1e}")
    assert ok


def test_c6_limit():
    rep = suites.limit(trials=50, seed=SEED)
    w = rep.summary()["worst_residual"]
    ok = rep.violations == 0 and len(rep.records) == 50
    record("C6 alpha->1 limit", ok, f"bracket excess {w['bracket']:.1e}, distance {w['distance']:.1e} (tol 1e-3)")
    assert ok


def test_c7_classical():
    rep = suites.classical(trials=50, seed=SEED)
    worst = _worst(rep, "absolute")
    ok = rep.violations == 0 and len(rep.records) == 50
    record("C7 classical reduction", ok, f"worst |quantum - scalar| {worst:.1e} (tol 1e-10)")
    assert ok


def test_c8_optimizer_certification():
    nonconverged = {
        "duality": duality().result.nonconverged,
        "lemma4": four_party().result.nonconverged,
        "lemma6": variational().result.nonconverged,
        "sweep": sum(s.nonconverged for s in chain_sweep().result.summaries),
    }
    oracle = suites.oracle(trials=20, seed=SEED)
    worst = _worst(oracle, "absolute")
    ok = not any(nonconverged.values()) and oracle.violations == 0 and len(oracle.records) == 20
    record("C8 optimizer certification", ok,
           f"restart disagreements {nonconverged}, oracle worst {worst:.1e} (tol 1e-4)")
    assert ok


def test_c9_product_condition_audit():
    res = chain_sweep().result
    target = chainrule.make_triple(Fraction(4, 3), 2, 2)
    summary = next(s for s in res.summaries if s.triple.label() == target.label())
    rows = [r for r in res.reports if r.triple.label() == target.label()]
    doc = summary.as_json()
    ok = (summary.triple.order_product == Fraction(1, 3)
          and summary.triple.predicted_direction == chainrule.GEQ
          and doc["product_rule_agrees"] is False
          and doc["triple"]["product_gt_1"] is False
          and summary.violations == 0 and len(rows) == summary.trials > 0
          and all(r.as_json()["triple"]["theorem1_product"] == "1/3" for r in rows))
    record("C9 product-condition audit", ok,
           f"(4/3,2,2) product 1/3 < 1 yet GEQ holds: {summary.trials} margins, min {summary.min_margin:.2e}, "
           f"violations {summary.violations}")
    assert ok


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_c"):
            try:
                fn()
            except AssertionError:
                pass
    print("\n".join(VERDICTS[k] for k in sorted(VERDICTS)))
