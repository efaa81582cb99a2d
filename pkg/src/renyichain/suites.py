"""Seeded verification suites.

Each suite draws its instances from a forked :class:`SeededSampler`, records
one residual per check and counts violations of its tolerance.  The CLI
``verify`` command and the acceptance tests both run these.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import chainrule, entropy, linalg, optimizer, states
from .entropy import OpMatrix, RenyiOrder
from .linalg import TensorFactorization
from .optimizer import OptimizerConfig
from .states import SeededSampler

SUITE_CONFIG = OptimizerConfig(restarts=3)

TRIPARTITE = TensorFactorization(("A", "B", "C"), (2, 2, 2))
FOUR_PARTY = TensorFactorization(("A", "B", "C", "D"), (2, 2, 2, 2))


@dataclass
class SuiteReport:
    name: str
    tolerance: dict
    records: list[dict] = field(default_factory=list)
    violations: int = 0
    nonconverged: int = 0
    worst: dict = field(default_factory=dict)

    def add(self, record: dict, residuals: dict, converged: bool = True) -> None:
        """Record one instance; ``residuals`` maps check name to its residual."""
        bad = False
        for key, val in residuals.items():
            self.worst[key] = max(self.worst.get(key, 0.0), float(val))
            bad |= not bool(val <= self.tolerance[key])
        self.violations += bad
        self.nonconverged += not converged
        self.records.append({**record, "residuals": residuals, "converged": converged, "violation": bad})

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def summary(self) -> dict:
        return {
            "suite": self.name,
            "instances": len(self.records),
            "violations": self.violations,
            "nonconverged": self.nonconverged,
            "worst_residual": self.worst,
            "tolerance": self.tolerance,
            "ok": self.ok,
        }

    def jsonl(self, manifest: dict | None = None) -> str:
        lines = []
        if manifest is not None:
            lines.append(json.dumps({"kind": "manifest", **manifest}, sort_keys=True))
        lines += [json.dumps({"kind": "instance", **r}, sort_keys=True) for r in self.records]
        lines.append(json.dumps({"kind": "summary", **self.summary()}, sort_keys=True))
        return "\n".join(lines) + "\n"


def duality(trials: int = 200, seed: int = 0, alphas: Sequence[float] = (0.6, 0.75, 1.5, 2, 3),
            config: OptimizerConfig = SUITE_CONFIG) -> SuiteReport:
    """``H_alpha(A|B) + H_alpha^(A|C)`` on Haar-random pure ``ABC`` states."""
    report = SuiteReport("duality", {"duality": 1e-5})
    master = SeededSampler(seed)
    for j in range(trials):
        s = master.fork(j)
        rho = states.random_pure(s, TRIPARTITE).density()
        for a in alphas:
            order = RenyiOrder(a)
            h_ab = entropy.cond_entropy(rho, order, "B", target="A", config=config, sampler=s.fork(1))
            h_ac = entropy.cond_entropy(rho, order.hat, "C", target="A", config=config, sampler=s.fork(2))
            report.add(
                {"trial": j, "alpha": a, "seed": s.seed, "H_AB": h_ab.value, "H_AC_dual": h_ac.value},
                {"duality": abs(h_ab.value + h_ac.value)},
                h_ab.converged and h_ac.converged,
            )
    return report


def four_party_expressions(trials: int = 100, seed: int = 0, alphas: Sequence[float] = (0.75, 1.5, 2, 3),
           config: OptimizerConfig = SUITE_CONFIG) -> SuiteReport:
    """The three ``Op(psi)`` expressions against the divergence route."""
    report = SuiteReport("lemma4", {"expr3": 1e-6, "expr4": 1e-8, "expr5": 1e-6})
    master = SeededSampler(seed)
    for j in range(trials):
        s = master.fork(j)
        psi = states.random_pure(s, FOUR_PARTY)
        sigma = states.random_density(s, 2).matrix
        x = OpMatrix.from_state(psi, "AD", "BC")
        rho = psi.reduce("ABC")
        for a in alphas:
            order = RenyiOrder(a)
            e3 = entropy.h_expr_3(x, sigma, order, config, s.fork(1))
            e4 = entropy.h_expr_4(x, sigma, order)
            e5 = entropy.h_expr_5(x, order, config, s.fork(2))
            d3 = entropy.cond_entropy_pinned(rho, sigma, order, "C")
            d4 = entropy.cond_entropy_pinned(rho, sigma, order, "C", target="B")
            d5 = entropy.cond_entropy(rho, order, "BC", target="A", config=config, sampler=s.fork(3))
            report.add(
                {"trial": j, "alpha": a, "seed": s.seed,
                 "expr3": e3.value, "expr4": e4.value, "expr5": e5.value,
                 "direct3": d3.value, "direct4": d4.value, "direct5": d5.value},
                {"expr3": abs(e3.value - d3.value), "expr4": abs(e4.value - d4.value),
                 "expr5": abs(e5.value - d5.value)},
                e3.converged and e5.converged and d5.converged,
            )
    return report


def variational(trials: int = 100, seed: int = 0, dims: Sequence[int] = (2, 3, 4),
           alphas: Sequence[float] = (0.8, 2, 3), config: OptimizerConfig = SUITE_CONFIG) -> SuiteReport:
    """Variational Schatten norm against the singular-value formula (relative residual)."""
    report = SuiteReport("lemma6", {"relative": 1e-6})
    master = SeededSampler(seed)
    for j in range(trials):
        s = master.fork(j)
        d = dims[j % len(dims)]
        g = s.generator()
        z = g.standard_normal((d, d)) + 1j * g.standard_normal((d, d))
        x = z @ z.conj().T
        for a in alphas:
            var = entropy.variational_norm(x, a, config, s.fork(1))
            direct = linalg.schatten(x, a)
            report.add(
                {"trial": j, "dim": d, "alpha": a, "seed": s.seed, "variational": var.value, "schatten": direct},
                {"relative": abs(var.value - direct) / direct},
                var.converged,
            )
    return report


INTERPOLATION_TRIPLES = {
    "prop5": [chainrule.make_triple(*t) for t in chainrule.PROP5_GRID],
    "prop6_beta_pos": [chainrule.make_triple(2, chainrule.Fraction(4, 3), chainrule.Fraction(2, 3))],
    "prop6_gamma_pos": [chainrule.make_triple(2, chainrule.Fraction(2, 3), chainrule.Fraction(4, 3))],
}


def interpolation(trials: int = 100, seed: int = 0) -> SuiteReport:
    """Three-line bound at the evaluated endpoints, ``trials`` instances per proof branch."""
    report = SuiteReport("interpolation", {"slack": 0.0, "identity": 1e-12})
    master = SeededSampler(seed)
    for b, (branch, triples) in enumerate(INTERPOLATION_TRIPLES.items()):
        for j in range(trials):
            s = master.fork(b).fork(j)
            t = triples[j % len(triples)]
            psi = states.random_pure(s, FOUR_PARTY)
            x = OpMatrix.from_state(psi, "AD", "BC")
            sigma = states.random_density(s, 2).matrix
            tau = states.random_density(s, 2).matrix
            inst = chainrule.interpolation_family(x, sigma, tau, t).instance()
            # slack residual is positive only when lhs exceeds rhs * (1 + 1e-9)
            excess = max(0.0, inst.lhs / inst.rhs - (1 + chainrule.INTERP_RTOL))
            report.add(
                {"branch": branch, "trial": j, "triple": t.label(), "seed": s.seed, **inst.as_json()},
                {"slack": excess, "identity": inst.identity_residual},
            )
    return report


def limit(trials: int = 50, seed: int = 0, delta: float = 1e-4,
          config: OptimizerConfig = SUITE_CONFIG) -> SuiteReport:
    """Rényi values at ``1 -+ delta`` bracket the von Neumann conditional entropy."""
    report = SuiteReport("limit", {"bracket": 1e-3, "distance": 1e-3})
    master = SeededSampler(seed)
    f = TensorFactorization(("A", "B"), (2, 2))
    for j in range(trials):
        s = master.fork(j)
        rho = states.random_density(s, f)
        vn = entropy.von_neumann_cond(rho, "B")
        lo = entropy.cond_entropy(rho, 1 + delta, "B", config=config, sampler=s.fork(1))
        hi = entropy.cond_entropy(rho, 1 - delta, "B", config=config, sampler=s.fork(2))
        bracket = max(0.0, lo.value - vn, vn - hi.value)
        report.add(
            {"trial": j, "seed": s.seed, "von_neumann": vn, "above": lo.value, "below": hi.value},
            {"bracket": bracket, "distance": max(abs(lo.value - vn), abs(hi.value - vn))},
            lo.converged and hi.converged,
        )
    return report


def classical_renyi(p: np.ndarray, q: np.ndarray, alpha: float) -> float:
    return math.log2(float(np.sum(p**alpha * q ** (1 - alpha)))) / (alpha - 1)


def classical(trials: int = 50, seed: int = 0) -> SuiteReport:
    """Divergence of commuting (diagonal) pairs against the scalar Rényi formula."""
    report = SuiteReport("classical", {"absolute": 1e-10})
    master = SeededSampler(seed)
    for j in range(trials):
        g = master.fork(j).generator()
        d = int(g.integers(2, 9))
        p, q = g.dirichlet(np.ones(d)), g.dirichlet(np.ones(d))
        a = float(g.choice([0.55, 0.6, 0.75, 0.9, 1.5, 2.0, 3.0, 5.0]))
        quantum = entropy.divergence(np.diag(p), np.diag(q), a)
        scalar = classical_renyi(p, q, a)
        report.add({"trial": j, "dim": d, "alpha": a, "quantum": quantum, "scalar": scalar},
                   {"absolute": abs(quantum - scalar)})
    return report


def oracle(trials: int = 20, seed: int = 0, config: OptimizerConfig = SUITE_CONFIG) -> SuiteReport:
    """Brute-force grid oracle against the descent optimizer on conditional entropies."""
    report = SuiteReport("oracle", {"absolute": 1e-4})
    master = SeededSampler(seed)
    alphas = (0.6, 0.75, 1.5, 2.0, 3.0)
    for j in range(trials):
        s = master.fork(j)
        db = 2 if j % 2 == 0 else 3
        f = TensorFactorization(("A", "B"), (2, db))
        rho = states.random_density(s, f)
        a = alphas[j % len(alphas)]
        order = RenyiOrder(a)
        root = linalg.mat_pow_support(rho.matrix, 0.5)
        obj = entropy.PowerTraceObjective(root, f, "B", -float(order.prime), a, 1 / (a - 1))
        main = entropy.cond_entropy(rho, order, "B", config=config, sampler=s.fork(1))
        brute = optimizer.brute_force_oracle(obj, db, resolution=12 if db == 2 else 6, sampler=s.fork(2))
        report.add(
            {"trial": j, "dim_B": db, "alpha": a, "seed": s.seed, "optimizer": main.value, "oracle": -brute.value},
            {"absolute": abs(main.value + brute.value)},
            main.converged,
        )
    return report


VERIFY_SUITES = {
    "duality": duality,
    "lemma4": four_party_expressions,
    "lemma6": variational,
    "interpolation": interpolation,
}
