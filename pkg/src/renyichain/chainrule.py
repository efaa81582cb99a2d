"""Chain-rule triples, direction classification and Monte-Carlo verification.

A triple ``(alpha, beta, gamma)`` is admissible when all three orders lie in
``(1/2, 1) U (1, inf)`` and ``1/alpha' = 1/beta' + 1/gamma'``.  The predicted
inequality between ``H_alpha(AB|C)`` and ``H_beta(A|BC) + H_gamma(B|C)`` is
decided by which of the two proven cases applies, directly for ``alpha > 1``
and through duality for ``alpha < 1``.  The sign test on
``(alpha-1)(beta-1)(gamma-1)`` against 1 is recorded alongside but never used
to classify.

Parameters are held as :class:`fractions.Fraction` so that completion and
dualization are exact.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from . import entropy, linalg, states
from .entropy import OpMatrix, RenyiOrder
from .errors import ClassificationMismatch, OutOfRange
from .optimizer import OptimizerConfig
from .states import DensityOperator, SeededSampler

GEQ, LEQ, UNKNOWN = "GEQ", "LEQ", "UNKNOWN"
MARGIN_TOL = 1e-8
INTERP_RTOL = 1e-9
CONSTRAINT_TOL = 1e-12

_FLIP = {GEQ: LEQ, LEQ: GEQ, UNKNOWN: UNKNOWN}
_DUAL_PROVENANCE = {
    "prop5": "dual_of_prop5",
    "prop6_beta_pos": "dual_of_prop6",
    "prop6_gamma_pos": "dual_of_prop6",
}


def _frac(x) -> Fraction:
    if isinstance(x, RenyiOrder):
        x = x.alpha
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**12)
    return Fraction(x)


def _prime(a: Fraction) -> Fraction:
    return (a - 1) / a


def _hat(a: Fraction) -> Fraction:
    return 1 / (2 - 1 / a)


def _admissible(a: Fraction) -> bool:
    return a > Fraction(1, 2) and a != 1


@dataclass(frozen=True)
class ChainTriple:
    alpha: Fraction
    beta: Fraction
    gamma: Fraction
    predicted_direction: str = UNKNOWN
    provenance: str = "unclassified"

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            val = _frac(getattr(self, name))
            if not _admissible(val):
                raise OutOfRange(f"{name} = {val} is outside (1/2, 1) U (1, inf)")
            object.__setattr__(self, name, val)
        if self.constraint_residual() > CONSTRAINT_TOL:
            raise OutOfRange(
                f"({self.label()}) violates 1/alpha' = 1/beta' + 1/gamma' "
                f"(residual {self.constraint_residual():.3e})"
            )

    @property
    def orders(self) -> tuple[RenyiOrder, RenyiOrder, RenyiOrder]:
        return RenyiOrder(self.alpha), RenyiOrder(self.beta), RenyiOrder(self.gamma)

    @property
    def primes(self) -> tuple[Fraction, Fraction, Fraction]:
        return _prime(self.alpha), _prime(self.beta), _prime(self.gamma)

    def constraint_residual(self) -> float:
        ap, bp, gp = self.primes
        return abs(float(1 / ap) - float(1 / bp) - float(1 / gp))

    @property
    def order_product(self) -> Fraction:
        return (self.alpha - 1) * (self.beta - 1) * (self.gamma - 1)

    @property
    def product_rule_direction(self) -> str:
        p = self.order_product
        return GEQ if p > 1 else LEQ if p < 1 else UNKNOWN

    def label(self) -> str:
        return f"{self.alpha},{self.beta},{self.gamma}"

    def as_json(self) -> dict:
        return {
            "alpha": str(self.alpha),
            "beta": str(self.beta),
            "gamma": str(self.gamma),
            "direction": self.predicted_direction,
            "provenance": self.provenance,
            "theorem1_product": str(self.order_product),
            "product_gt_1": self.order_product > 1,
            "product_gt_0": self.order_product > 0,
            "product_rule_direction": self.product_rule_direction,
        }


def _classify_raw(alpha: Fraction, beta: Fraction, gamma: Fraction) -> tuple[str, str]:
    if alpha > 1:
        if beta > 1 and gamma > 1:
            return GEQ, "prop5"
        if (beta - 1) * (gamma - 1) < 0:
            return LEQ, "prop6_beta_pos" if beta > 1 else "prop6_gamma_pos"
        return UNKNOWN, "unclassified"
    # alpha < 1: the hatted triple (alpha^, gamma^, beta^) has alpha^ > 1
    direction, prov = _classify_raw(_hat(alpha), _hat(gamma), _hat(beta))
    return _FLIP[direction], _DUAL_PROVENANCE.get(prov, "unclassified")


def classify_direction(t: ChainTriple) -> ChainTriple:
    direction, prov = _classify_raw(t.alpha, t.beta, t.gamma)
    return replace(t, predicted_direction=direction, provenance=prov)


def make_triple(alpha, beta, gamma) -> ChainTriple:
    return classify_direction(ChainTriple(_frac(alpha), _frac(beta), _frac(gamma)))


def complete_triple(beta, gamma) -> ChainTriple:
    """Solve the constraint for ``alpha`` given ``beta`` and ``gamma``."""
    beta, gamma = _frac(beta), _frac(gamma)
    for name, val in (("beta", beta), ("gamma", gamma)):
        if not _admissible(val):
            raise OutOfRange(f"{name} = {val} is outside (1/2, 1) U (1, inf)")
    total = 1 / _prime(beta) + 1 / _prime(gamma)
    if total == 0:
        raise OutOfRange(f"1/beta' + 1/gamma' = 0 for beta={beta}, gamma={gamma}")
    ap = 1 / total
    if not (-1 < ap < 0 or 0 < ap < 1) or ap == Fraction(-1):
        raise OutOfRange(f"alpha' = {ap} leaves (-1, 0) U (0, 1)")
    alpha = 1 / (1 - ap)
    if not _admissible(alpha):
        raise OutOfRange(f"alpha = {alpha} is outside (1/2, 1) U (1, inf)")
    return make_triple(alpha, beta, gamma)


def dualize_triple(t: ChainTriple) -> ChainTriple:
    """Apply duality to every term: ``(alpha, beta, gamma) -> (alpha^, gamma^, beta^)``.

    On a purification with reference ``D`` the three entropies become
    ``-H(AB|D)``, ``-H(A|D)`` and ``-H(B|AD)``; swapping the roles of ``A`` and
    ``B`` restores the ``AB|C, A|BC, B|C`` pattern with the second and third
    orders exchanged and the inequality reversed.
    """
    dual = classify_direction(ChainTriple(_hat(t.alpha), _hat(t.gamma), _hat(t.beta)))
    if t.predicted_direction != UNKNOWN and dual.predicted_direction != _FLIP[t.predicted_direction]:
        raise ClassificationMismatch(f"dual of ({t.label()}) did not reverse the direction")
    return dual


PROP5_GRID = [(Fraction(3, 2), 3, 3), (Fraction(4, 3), 2, 2), (Fraction(9, 7), 3, Fraction(3, 2))]
PROP6_GRID = [(2, Fraction(2, 3), Fraction(4, 3)), (2, Fraction(4, 3), Fraction(2, 3))]


def default_grid() -> list[ChainTriple]:
    """The proven-case triples followed by their duals."""
    base = [make_triple(*abc) for abc in PROP5_GRID + PROP6_GRID]
    return base + [dualize_triple(t) for t in base]


def parse_triple(text: str) -> ChainTriple:
    """Parse ``"3/2,3,3"``; an empty or ``?`` first entry is completed from the other two."""
    parts = [p.strip() for p in text.replace(";", ",").split(",")]
    if len(parts) != 3:
        raise OutOfRange(f"expected three comma-separated orders, got {text!r}")
    try:
        if parts[0] in ("", "?"):
            return complete_triple(Fraction(parts[1]), Fraction(parts[2]))
        return make_triple(*(Fraction(p) for p in parts))
    except (ValueError, ZeroDivisionError) as exc:
        raise OutOfRange(f"cannot parse triple {text!r}: {exc}") from None


# -- verification -----------------------------------------------------------


@dataclass
class TrialReport:
    triple: ChainTriple
    state: dict
    lhs_bits: float
    rhs_bits: float
    margin_bits: float
    sigma_pinned: str | None = None
    terms: dict = field(default_factory=dict)
    converged: bool = True

    @property
    def violation(self) -> bool:
        return self.triple.predicted_direction != UNKNOWN and not self.margin_bits >= -MARGIN_TOL

    def as_json(self) -> dict:
        return {
            "triple": self.triple.as_json(),
            "state": self.state,
            "sigma_pinned": self.sigma_pinned,
            "lhs_bits": self.lhs_bits,
            "rhs_bits": self.rhs_bits,
            "margin_bits": self.margin_bits,
            "terms_bits": self.terms,
            "converged": self.converged,
            "violation": self.violation,
        }


def oriented_margin(lhs: float, rhs: float, direction: str) -> float:
    return rhs - lhs if direction == LEQ else lhs - rhs


def verify_chain_rule(
    t: ChainTriple,
    rho: DensityOperator,
    sigma_c=None,
    config: OptimizerConfig | None = None,
    sampler: SeededSampler | None = None,
    labels: Sequence[str] = ("A", "B", "C"),
    state_info: dict | None = None,
    sigma_name: str | None = None,
    h_beta: entropy.EntropyResult | None = None,
) -> TrialReport:
    """Evaluate both sides of the chain rule on ``rho_ABC``.

    With ``sigma_c`` the ``alpha`` and ``gamma`` terms are pinned at it and only
    ``H_beta(A|BC)`` is optimized.  ``h_beta`` may carry a precomputed value of
    that term.
    """
    a, b, c = labels
    alpha, beta, gamma = t.orders
    sampler = sampler or SeededSampler(0)
    if h_beta is None:
        h_beta = entropy.cond_entropy(rho, beta, (b, c), target=(a,), config=config, sampler=sampler.fork(1))
    if sigma_c is None:
        h_alpha = entropy.cond_entropy(rho, alpha, (c,), target=(a, b), config=config, sampler=sampler.fork(0))
        h_gamma = entropy.cond_entropy(rho, gamma, (c,), target=(b,), config=config, sampler=sampler.fork(2))
    else:
        h_alpha = entropy.cond_entropy_pinned(rho, sigma_c, alpha, (c,), target=(a, b))
        h_gamma = entropy.cond_entropy_pinned(rho, sigma_c, gamma, (c,), target=(b,))
    lhs = h_alpha.value
    rhs = h_beta.value + h_gamma.value
    return TrialReport(
        triple=t,
        state=dict(state_info or {}),
        lhs_bits=lhs,
        rhs_bits=rhs,
        margin_bits=oriented_margin(lhs, rhs, t.predicted_direction),
        sigma_pinned=sigma_name if sigma_c is not None else None,
        terms={"alpha": h_alpha.value, "beta": h_beta.value, "gamma": h_gamma.value},
        converged=h_alpha.converged and h_beta.converged and h_gamma.converged,
    )


# -- interpolation instances --------------------------------------------------


def complex_power(m: np.ndarray, z: complex) -> np.ndarray:
    """``M**z`` for a full-support PSD ``M`` and complex exponent ``z``."""
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    w = np.clip(w, 1e-300, None)
    return (v * np.exp(z * np.log(w))) @ v.conj().T


@dataclass(frozen=True)
class InterpolationInstance:
    branch: str
    theta: float
    p0: float
    p1: float
    p_theta: float
    p_theta_expected: float
    one_minus_theta_expected: float
    m0: float
    m1: float
    lhs: float

    @property
    def rhs(self) -> float:
        return self.m0 ** (1 - self.theta) * self.m1**self.theta

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs * (1 + INTERP_RTOL)

    @property
    def relative_slack(self) -> float:
        return (self.rhs - self.lhs) / self.rhs if self.rhs > 0 else 0.0

    @property
    def identity_residual(self) -> float:
        return max(
            abs(self.p_theta - self.p_theta_expected),
            abs((1 - self.theta) - self.one_minus_theta_expected),
        )

    def as_json(self) -> dict:
        return {
            "branch": self.branch,
            "theta": self.theta,
            "p0": self.p0,
            "p1": self.p1,
            "p_theta": self.p_theta,
            "M0": self.m0,
            "M1": self.m1,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "holds": bool(self.holds),
            "identity_residual": float(self.identity_residual),
        }


@dataclass(frozen=True)
class InterpolationFamily:
    """``F(z) = sigma^(a + b z) X tau^(c + d z)`` with its Hölder data."""

    branch: str
    x: OpMatrix
    sigma: np.ndarray
    tau: np.ndarray
    sigma_exp: tuple[float, float]
    tau_exp: tuple[float, float]
    theta: float
    p0: float
    p1: float
    p_theta_expected: float
    one_minus_theta_expected: float
    cond: tuple[str, ...]
    free: tuple[str, ...]

    def __call__(self, z: complex) -> np.ndarray:
        s = complex_power(self.sigma, self.sigma_exp[0] + self.sigma_exp[1] * z)
        t = complex_power(self.tau, self.tau_exp[0] + self.tau_exp[1] * z)
        left = linalg.embed(s, self.x.outputs, self.cond)
        right = linalg.embed(t, self.x.inputs, self.free)
        return left @ self.x.matrix @ right

    @property
    def p_theta(self) -> float:
        return 1 / ((1 - self.theta) / self.p0 + self.theta / self.p1)

    def boundary_norm(self, k: int, t: float = 0.0) -> float:
        return linalg.schatten(self(k + 1j * t), self.p0 if k == 0 else self.p1)

    def instance(self) -> InterpolationInstance:
        return InterpolationInstance(
            branch=self.branch,
            theta=self.theta,
            p0=self.p0,
            p1=self.p1,
            p_theta=self.p_theta,
            p_theta_expected=self.p_theta_expected,
            one_minus_theta_expected=self.one_minus_theta_expected,
            m0=self.boundary_norm(0),
            m1=self.boundary_norm(1),
            lhs=linalg.schatten(self(self.theta), self.p_theta),
        )


def interpolation_family(
    x: OpMatrix, sigma_c, tau_d, t: ChainTriple, cond="C", free="D"
) -> InterpolationFamily:
    """Build the holomorphic family used for the proven case of ``t`` (``alpha > 1``)."""
    ap, bp, gp = (float(p) for p in t.primes)
    bh = float(_hat(t.beta))
    g = float(t.gamma)
    sigma, tau = entropy._matrix(sigma_c), entropy._matrix(tau_d)
    common = dict(x=x, sigma=sigma, tau=tau, cond=entropy._labels(cond), free=entropy._labels(free))
    if t.provenance == "prop5":
        return InterpolationFamily(
            branch="prop5",
            sigma_exp=(0.0, -gp / 2),
            tau_exp=(bp / 2, -bp / 2),
            theta=ap / gp,
            p0=2 * bh,
            p1=2 * g,
            p_theta_expected=2.0,
            one_minus_theta_expected=ap / bp,
            **common,
        )
    if t.provenance == "prop6_beta_pos":
        return InterpolationFamily(
            branch="prop6_beta_pos",
            sigma_exp=(-ap / 2, -ap * gp / (2 * bp)),
            tau_exp=(ap / 2, -ap / 2),
            theta=-bp / gp,
            p0=2.0,
            p1=2 * g,
            p_theta_expected=2 * bh,
            one_minus_theta_expected=bp / ap,
            **common,
        )
    if t.provenance == "prop6_gamma_pos":
        return InterpolationFamily(
            branch="prop6_gamma_pos",
            sigma_exp=(-ap / 2, ap / 2),
            tau_exp=(ap / 2, ap * bp / (2 * gp)),
            theta=-gp / bp,
            p0=2.0,
            p1=2 * bh,
            p_theta_expected=2 * g,
            one_minus_theta_expected=gp / ap,
            **common,
        )
    raise ClassificationMismatch(f"triple ({t.label()}) has provenance {t.provenance!r}")


def interpolation_check_prop5(x: OpMatrix, sigma_c, tau_d, t: ChainTriple, cond="C", free="D"):
    """``||s^-a' X t^a'||_2 <= ||X t^b'||_{2 b^}^(a'/b') ||s^-g' X||_{2g}^(a'/g')`` (halved powers)."""
    if t.provenance != "prop5":
        raise ClassificationMismatch(f"triple ({t.label()}) is not a prop5 triple")
    return interpolation_family(x, sigma_c, tau_d, t, cond, free).instance()


def interpolation_check_prop6(x: OpMatrix, sigma_c, tau_d, t: ChainTriple, cond="C", free="D"):
    """Branch chosen by the sign of ``beta'``; see :func:`interpolation_family`."""
    if t.provenance not in ("prop6_beta_pos", "prop6_gamma_pos"):
        raise ClassificationMismatch(f"triple ({t.label()}) is not a prop6 triple")
    return interpolation_family(x, sigma_c, tau_d, t, cond, free).instance()


# -- sweeps -------------------------------------------------------------------

ENSEMBLES = ("ginibre", "haar", "corners")
PINS = ("rho_C", "maximally_mixed", "random")


@dataclass(frozen=True)
class EnsembleSpec:
    name: str = "ginibre"
    dims: tuple[int, int, int] = (2, 2, 2)
    rank: int | None = None

    @property
    def factorization(self) -> linalg.TensorFactorization:
        return linalg.TensorFactorization(("A", "B", "C"), self.dims)


def sample_states(spec: EnsembleSpec, trials: int, sampler: SeededSampler):
    """Yield ``(descriptor, state)``: ``trials`` random draws, then the corner states."""
    f = spec.factorization
    if spec.name not in ENSEMBLES:
        raise OutOfRange(f"unknown ensemble {spec.name!r}; choose from {ENSEMBLES}")
    if spec.name != "corners":
        for j in range(trials):
            s = sampler.fork(j)
            desc = {"ensemble": spec.name, "trial": j, "dims": list(spec.dims), **s.state()}
            if spec.name == "ginibre":
                rho = states.random_density(s, f, spec.rank)
                desc["rank"] = spec.rank or f.dim
            else:
                rho = states.random_pure(s, f).density()
                desc["rank"] = 1
            yield desc, rho
    corner_sampler = sampler.fork(10**6)
    for name, rho in states.corner_states(f, corner_sampler):
        yield {"ensemble": "corners", "name": name, "dims": list(spec.dims), **corner_sampler.state()}, rho


def _pins(rho: DensityOperator, pins: Sequence[str], sampler: SeededSampler):
    rho_c = rho.reduce(["C"]).matrix
    d = rho_c.shape[0]
    out = []
    for name in pins:
        if name == "rho_C":
            out.append((name, rho_c))
        elif name == "maximally_mixed":
            out.append((name, np.eye(d) / d))
        elif name == "random":
            out.append((name, states.random_density(sampler, d).matrix))
        else:
            raise OutOfRange(f"unknown pin {name!r}; choose from {PINS}")
    return out


@dataclass
class TripleSummary:
    triple: ChainTriple
    trials: int = 0
    violations: int = 0
    min_margin: float = math.inf
    mean_margin: float = 0.0
    nonconverged: int = 0
    consistency_violations: int = 0

    def as_json(self) -> dict:
        return {
            "triple": self.triple.as_json(),
            "trials": self.trials,
            "violations": self.violations,
            "min_margin_bits": self.min_margin,
            "mean_margin_bits": self.mean_margin,
            "nonconverged": self.nonconverged,
            "pinned_above_optimized": self.consistency_violations,
            "product_rule_agrees": self.triple.product_rule_direction
            == self.triple.predicted_direction,
        }


@dataclass
class SweepResult:
    reports: list[TrialReport]
    summaries: list[TripleSummary]

    @property
    def violations(self) -> int:
        return sum(s.violations + s.consistency_violations for s in self.summaries)

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def summary_json(self) -> dict:
        return {
            "kind": "summary",
            "triples": [s.as_json() for s in self.summaries],
            "total_trials": sum(s.trials for s in self.summaries),
            "total_violations": self.violations,
            "ok": self.ok,
        }

    def jsonl(self, manifest: dict | None = None) -> str:
        lines = []
        if manifest is not None:
            lines.append(json.dumps({"kind": "manifest", **manifest}, sort_keys=True))
        lines += [json.dumps({"kind": "trial", **r.as_json()}, sort_keys=True) for r in self.reports]
        lines.append(json.dumps(self.summary_json(), sort_keys=True))
        return "\n".join(lines) + "\n"

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(
            ["triple", "seed", "lhs_bits", "rhs_bits", "margin_bits", "direction", "provenance",
             "theorem1_product", "state", "sigma_pinned"]
        )
        for r in self.reports:
            w.writerow(
                [r.triple.label(), r.state.get("seed"), repr(r.lhs_bits), repr(r.rhs_bits),
                 repr(r.margin_bits), r.triple.predicted_direction, r.triple.provenance,
                 str(r.triple.order_product), r.state.get("name", r.state.get("trial")),
                 r.sigma_pinned or "optimized"]
            )
        return buf.getvalue()


def _sweep_triple(args) -> tuple[list[TrialReport], TripleSummary]:
    i, t, spec, trials, seed, config, pins, optimized = args
    master = SeededSampler(seed)
    reports: list[TrialReport] = []
    summary = TripleSummary(t)
    for idx, (desc, rho) in enumerate(sample_states(spec, trials, master)):
        opt_sampler = master.fork(idx).fork(1000 + i)
        beta = t.orders[1]
        h_beta = entropy.cond_entropy(rho, beta, ("B", "C"), target=("A",), config=config, sampler=opt_sampler.fork(1))
        trial_reports = []
        optimized_lhs = None
        if optimized:
            rep = verify_chain_rule(t, rho, None, config, opt_sampler, state_info=desc, h_beta=h_beta)
            trial_reports.append(rep)
            optimized_lhs = rep.lhs_bits
        for name, sigma in _pins(rho, pins, opt_sampler.fork(3)):
            rep = verify_chain_rule(
                t, rho, sigma, config, opt_sampler, state_info=desc, sigma_name=name, h_beta=h_beta
            )
            trial_reports.append(rep)
            if optimized_lhs is not None and rep.lhs_bits > optimized_lhs + MARGIN_TOL:
                summary.consistency_violations += 1
        for rep in trial_reports:
            summary.trials += 1
            summary.violations += rep.violation
            summary.nonconverged += not rep.converged
            summary.min_margin = min(summary.min_margin, rep.margin_bits)
            summary.mean_margin += rep.margin_bits
        reports.extend(trial_reports)
    if summary.trials:
        summary.mean_margin /= summary.trials
    return reports, summary


def sweep(
    triples: Iterable[ChainTriple],
    ensemble: EnsembleSpec | None = None,
    trials: int = 300,
    seed: int = 0,
    config: OptimizerConfig | None = None,
    pins: Sequence[str] = PINS,
    optimized: bool = True,
    threads: int = 1,
    progress: Callable[[TripleSummary], None] | None = None,
) -> SweepResult:
    """Run the chain-rule check on every triple and sampled state.

    Deterministic given ``seed``: every (triple, state) pair draws from its
    own forked stream and results are merged in (triple, trial) order.
    """
    ensemble = ensemble or EnsembleSpec()
    triples = list(triples)
    triples = [classify_direction(t) if t.provenance == "unclassified" else t for t in triples]
    jobs = [(i, t, ensemble, trials, seed, config, tuple(pins), optimized) for i, t in enumerate(triples)]
    if threads > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_sweep_triple, jobs))
    else:
        results = []
        for job in jobs:
            results.append(_sweep_triple(job))
            if progress:
                progress(results[-1][1])
    reports = [r for rs, _ in results for r in rs]
    return SweepResult(reports, [s for _, s in results])
