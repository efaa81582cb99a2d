"""Sandwiched Rényi divergence and conditional entropies, in bits.

Conditional entropies are computed along several independent routes:

* directly from the divergence (``cond_entropy_pinned`` / ``cond_entropy``),
* from a purification via the Schatten-norm form (``cond_entropy_via_purification``),
* from the operator ``X = Op_{AD->BC}(psi)`` of a four-party pure state
  (``h_expr_3``, ``h_expr_4``, ``h_expr_5``).

Routes that need an inf or sup over density operators delegate it to
:func:`renyichain.optimizer.optimize_density`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import linalg
from .errors import DimensionMismatch, OutOfRange, RenyiError, ZeroState
from .linalg import TensorFactorization
from .optimizer import OptimizationOutcome, OptimizerConfig, optimize_density
from .states import DensityOperator, PureState, SeededSampler, purify

VON_NEUMANN_BAND = 1e-6
SUPPORT_LEAK_TOL = 1e-9

LN2 = math.log(2)


@dataclass(frozen=True)
class RenyiOrder:
    """A Rényi order with its primed and dual (hatted) companions.

    ``prime = (alpha - 1) / alpha`` and the dual satisfies
    ``1/alpha + 1/hat = 2``, equivalently ``hat.prime == -prime``.
    """

    alpha: float | Fraction

    def __post_init__(self):
        a = self.alpha
        if isinstance(a, int):
            a = Fraction(a)
        if not isinstance(a, Fraction):
            a = float(a)
        if not (a >= 0.5) or (isinstance(a, float) and math.isnan(a)):
            raise OutOfRange(f"Rényi order must lie in [1/2, inf], got {a}")
        object.__setattr__(self, "alpha", a)

    @classmethod
    def from_prime(cls, prime: float | Fraction) -> "RenyiOrder":
        if not -1 <= prime <= 1:
            raise OutOfRange(f"alpha' = {prime} is outside [-1, 1]")
        if prime == 1:
            return cls(math.inf)
        return cls(1 / (1 - prime))

    @property
    def value(self) -> float:
        return float(self.alpha)

    @property
    def prime(self):
        if self.alpha == math.inf:
            return 1.0
        return (self.alpha - 1) / self.alpha

    @property
    def hat(self) -> "RenyiOrder":
        if self.alpha == math.inf:
            return RenyiOrder(Fraction(1, 2))
        if self.alpha == Fraction(1, 2) or self.alpha == 0.5:
            return RenyiOrder(math.inf)
        return RenyiOrder(1 / (2 - 1 / self.alpha))

    @property
    def is_von_neumann(self) -> bool:
        return abs(self.value - 1) < VON_NEUMANN_BAND

    def __float__(self) -> float:
        return self.value

    def __str__(self) -> str:
        return str(self.alpha)


def as_order(order) -> RenyiOrder:
    return order if isinstance(order, RenyiOrder) else RenyiOrder(order)


@dataclass
class EntropyResult:
    value: float
    method: str
    optimizer_state: np.ndarray | None = None
    iterations: int = 0
    residual: float = 0.0
    converged: bool = True
    restart_values: list[float] = field(default_factory=list)

    @classmethod
    def from_outcome(cls, value: float, method: str, outcome: OptimizationOutcome) -> "EntropyResult":
        return cls(
            value=value,
            method=method,
            optimizer_state=outcome.argopt,
            iterations=outcome.iterations,
            residual=outcome.residual,
            converged=outcome.converged,
            restart_values=list(outcome.restart_values),
        )

    def __float__(self) -> float:
        return self.value

    def optimizer_json(self) -> dict | None:
        if self.optimizer_state is None:
            return None
        return {
            "iterations": self.iterations,
            "residual": self.residual,
            "converged": self.converged,
            "sigma_star": linalg.matrix_to_json(self.optimizer_state),
        }


# -- matrix helpers ---------------------------------------------------------


def _matrix(x) -> np.ndarray:
    if isinstance(x, DensityOperator):
        return x.matrix
    return linalg.hermitian_part(np.asarray(x, dtype=complex))


def _eigh_psd(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    spec = linalg.eig_hermitian(m)
    linalg._check_psd(spec.eigenvalues, linalg.EIG_TOL)
    return spec.eigenvalues, spec.eigenvectors


def _support_eigenvalues(m: np.ndarray) -> np.ndarray:
    w = np.linalg.eigvalsh(m)
    lmax = max(float(w.max(initial=0.0)), 0.0)
    return w[w > linalg.SUPPORT_CUTOFF * lmax] if lmax > 0 else w[:0]


def _trace_power(m: np.ndarray, q: float) -> float:
    """``tr[M**q]`` over the support of a PSD matrix."""
    return float(np.sum(_support_eigenvalues(m) ** q))


def _log2_trace_power(m: np.ndarray, q: float) -> float:
    """``log2 tr[M**q]`` on the support, scaled by the top eigenvalue so large ``q`` stays finite."""
    w = _support_eigenvalues(m)
    if w.size == 0:
        return -math.inf
    top = float(w.max())
    return q * math.log2(top) + math.log2(float(np.sum((w / top) ** q)))


def _full_power(sigma: np.ndarray, p: float) -> np.ndarray:
    """Power of a full-support density operator (no support truncation)."""
    w, v = np.linalg.eigh(sigma)
    w = np.clip(w, 1e-300, None)
    return (v * w**p) @ v.conj().T


# -- divergence -------------------------------------------------------------


def _relative_entropy(rho: np.ndarray, sigma: np.ndarray) -> float:
    tr_rho = float(np.trace(rho).real)
    proj = linalg.support_projector(sigma)
    leak = rho - proj @ rho @ proj
    if np.linalg.norm(leak) > SUPPORT_LEAK_TOL * np.linalg.norm(rho):
        return math.inf
    wr, vr = _eigh_psd(rho)
    ws, vs = _eigh_psd(sigma)
    keep_r = wr > linalg.SUPPORT_CUTOFF * wr[0]
    keep_s = ws > linalg.SUPPORT_CUTOFF * ws[0]
    log_rho = (vr[:, keep_r] * np.log2(wr[keep_r])) @ vr[:, keep_r].conj().T
    log_sigma = (vs[:, keep_s] * np.log2(ws[keep_s])) @ vs[:, keep_s].conj().T
    return float(np.trace(rho @ (log_rho - log_sigma)).real) / tr_rho


def divergence(rho, sigma, order) -> float:
    """Sandwiched Rényi divergence ``D_alpha(rho || sigma)`` in bits.

    Powers of ``sigma`` are taken on its support.  Returns ``inf`` when
    ``alpha > 1`` and the support of ``rho`` is not contained in that of
    ``sigma``.  Orders within ``1e-6`` of 1 give the Umegaki relative entropy.
    """
    order = as_order(order)
    rho, sigma = _matrix(rho), _matrix(sigma)
    if rho.shape != sigma.shape:
        raise DimensionMismatch(f"rho has shape {rho.shape}, sigma has {sigma.shape}")
    _eigh_psd(sigma)
    w_rho, _ = _eigh_psd(rho)
    tr_rho = float(np.trace(rho).real)
    if w_rho[0] <= 0 or tr_rho <= 0:
        raise ZeroState("rho must be nonzero")
    if order.alpha == math.inf:
        raise OutOfRange("alpha = inf is not supported; use a large finite order")
    if order.is_von_neumann:
        return _relative_entropy(rho, sigma)

    a, ap = order.value, float(order.prime)
    if a > 1:
        proj = linalg.support_projector(sigma)
        leak = rho - proj @ rho @ proj
        if np.linalg.norm(leak) > SUPPORT_LEAK_TOL * np.linalg.norm(rho):
            return math.inf
    s = linalg.mat_pow_support(sigma, -ap / 2)
    log_q = _log2_trace_power(s @ rho @ s, a)
    if log_q == -math.inf:
        return math.inf
    return (log_q - math.log2(tr_rho)) / (a - 1)


# -- the shared optimization objective ---------------------------------------


class PowerTraceObjective:
    """``sigma -> scale * log2 tr[(X (id (x) sigma**p) X^dagger)**q]``.

    ``X`` maps the space described by ``f_in`` to some output space, and
    ``sigma`` acts on the systems ``labels`` of ``f_in``.  Provides the
    analytic gradient needed by the descent optimizer.  ``sigma`` must have
    full support.
    """

    def __init__(self, x: np.ndarray, f_in: TensorFactorization, labels: Sequence[str], p, q, scale):
        self.x = np.asarray(x, dtype=complex)
        self.f_in = f_in
        self.labels = f_in.ordered(labels)
        self.p, self.q, self.scale = float(p), float(q), float(scale)
        f_in.check_dim(self.x.shape[1])
        self._rest = f_in.complement(self.labels)
        self._tail = self.labels == f_in.labels[len(self._rest):]
        self._d_rest = f_in.dim_of(self._rest)

    def _embed(self, op: np.ndarray) -> np.ndarray:
        if self._tail:
            return np.kron(np.eye(self._d_rest), op)
        return linalg.embed(op, self.f_in, self.labels)

    def _inner(self, sigma: np.ndarray):
        w, v = np.linalg.eigh((sigma + sigma.conj().T) / 2)
        w = np.clip(w, 1e-300, None)
        e = self._embed((v * w**self.p) @ v.conj().T)
        m = self.x @ e @ self.x.conj().T
        return w, v, (m + m.conj().T) / 2

    def __call__(self, sigma: np.ndarray) -> float:
        _, _, m = self._inner(np.asarray(sigma, dtype=complex))
        t = _trace_power(m, self.q)
        if t <= 0:
            return math.inf if self.scale > 0 else -math.inf
        return self.scale * math.log2(t)

    def value_and_grad(self, sigma: np.ndarray) -> tuple[float, np.ndarray]:
        w, v, m = self._inner(sigma)
        wm, vm = np.linalg.eigh(m)
        lmax = max(float(wm.max(initial=0.0)), 0.0)
        keep = wm > linalg.SUPPORT_CUTOFF * lmax
        t = float(np.sum(wm[keep] ** self.q))
        if t <= 0 or not math.isfinite(t):
            return math.inf, np.zeros_like(sigma)
        # d tr[M^q] = q tr[M^(q-1) X dE X^dagger]
        mq1 = (vm[:, keep] * wm[keep] ** (self.q - 1)) @ vm[:, keep].conj().T
        g_full = self.q * self.x.conj().T @ mq1 @ self.x
        g = linalg.partial_trace(g_full, self.f_in, self.labels)
        g = (g + g.conj().T) / 2
        grad = linalg.power_frechet_adjoint(w, v, self.p, g)
        return self.scale * math.log2(t), self.scale / (t * LN2) * grad


# -- conditional entropies ----------------------------------------------------


def _split(rho: DensityOperator, given, target) -> tuple[DensityOperator, tuple[str, ...]]:
    f = rho.factorization
    given = f.ordered(given)
    if target is not None:
        target = f.ordered(target)
        if set(target) & set(given):
            raise RenyiError(f"target {target} and conditioning {given} overlap")
        rho = rho.reduce(target + given)
    return rho, given


def _conditioning_operator(rho: DensityOperator, given, sigma) -> np.ndarray:
    f = rho.factorization
    sigma = _matrix(sigma)
    if sigma.shape != (f.dim_of(given),) * 2:
        raise DimensionMismatch(
            f"sigma has shape {sigma.shape}, conditioning systems {given} have dimension {f.dim_of(given)}"
        )
    return linalg.embed(sigma, f, given)


def cond_entropy_pinned(rho: DensityOperator, sigma, order, given, target=None) -> EntropyResult:
    """``H_alpha(target|given)_{rho|sigma} = -D_alpha(rho || id (x) sigma)``."""
    order = as_order(order)
    rho, given = _split(rho, given, target)
    if order.is_von_neumann:
        return EntropyResult(von_neumann_cond(rho, given, sigma=sigma), "von_neumann")
    d = divergence(rho.matrix, _conditioning_operator(rho, given, sigma), order)
    return EntropyResult(-d, "direct")


def _default_config(config: OptimizerConfig | None, mode: str) -> OptimizerConfig:
    return (config or OptimizerConfig()).with_mode(mode)


def cond_entropy(
    rho: DensityOperator,
    order,
    given,
    target=None,
    config: OptimizerConfig | None = None,
    sampler: SeededSampler | None = None,
) -> EntropyResult:
    """``H_alpha(target|given)_rho``, optimized over the conditioning state."""
    order = as_order(order)
    rho, given = _split(rho, given, target)
    if order.is_von_neumann:
        return EntropyResult(von_neumann_cond(rho, given), "von_neumann")
    f = rho.factorization
    a, ap = order.value, float(order.prime)
    root = linalg.mat_pow_support(rho.matrix, 0.5)
    objective = PowerTraceObjective(root, f, given, -ap, a, 1 / (a - 1))
    outcome = optimize_density(objective, f.dim_of(given), _default_config(config, "inf"), sampler)
    value = -divergence(rho.matrix, linalg.embed(outcome.argopt, f, given), order)
    return EntropyResult.from_outcome(value, "direct", outcome)


def _purifier_label(f: TensorFactorization) -> str:
    for cand in ("R", "P", "Q", "E", "D"):
        if cand not in f.labels:
            return cand
    return "_purifier"


def cond_entropy_via_purification(
    rho: DensityOperator,
    order,
    given,
    target=None,
    config: OptimizerConfig | None = None,
    sampler: SeededSampler | None = None,
) -> EntropyResult:
    """Conditional entropy through ``inf_sigma ||X sigma^(-alpha'/2)||_{2 alpha}``.

    ``X = Op(psi)`` maps the state's systems onto the purifying system.
    """
    order = as_order(order)
    rho, given = _split(rho, given, target)
    if order.is_von_neumann:
        return EntropyResult(von_neumann_cond(rho, given), "von_neumann")
    f = rho.factorization
    psi = purify(rho, _purifier_label(f))
    x = psi.op(f.labels, psi.factorization.labels[-1:])
    a, ap = order.value, float(order.prime)
    objective = PowerTraceObjective(x, f, given, -ap, a, 1 / (a - 1))
    outcome = optimize_density(objective, f.dim_of(given), _default_config(config, "inf"), sampler)
    side = linalg.embed(_full_power(outcome.argopt, -ap / 2), f, given)
    norm = linalg.schatten(x @ side, 2 * a)
    value = -(2 / ap) * math.log2(norm)
    return EntropyResult.from_outcome(value, "lemma5", outcome)


def von_neumann_cond(rho: DensityOperator, given, sigma=None, target=None) -> float:
    """``-D(rho || id (x) sigma)``; with ``sigma`` omitted, the optimum ``sigma = rho_given``."""
    rho, given = _split(rho, given, target)
    if sigma is None:
        sigma = rho.reduce(given).matrix
    return -_relative_entropy(rho.matrix, _conditioning_operator(rho, given, sigma))


# -- four-party expressions ---------------------------------------------------


@dataclass(frozen=True)
class OpMatrix:
    """``X = Op_{in->out}(psi)`` together with the factorizations of both sides."""

    matrix: np.ndarray
    inputs: TensorFactorization
    outputs: TensorFactorization

    @classmethod
    def from_state(cls, psi: PureState, input: Iterable[str], output: Iterable[str]) -> "OpMatrix":
        f = psi.factorization
        input, output = f.ordered(input), f.ordered(output)
        x = linalg.op_vec(psi.vector, f, input, output)
        return cls(x, f.subset(input), f.subset(output))


def _pinned_left(x: OpMatrix, sigma, cond: Sequence[str], power: float) -> np.ndarray:
    sigma = _matrix(sigma)
    if sigma.shape != (x.outputs.dim_of(cond),) * 2:
        raise DimensionMismatch(f"sigma has shape {sigma.shape}, expected system(s) {tuple(cond)}")
    return linalg.embed(linalg.mat_pow_support(sigma, power), x.outputs, cond) @ x.matrix


def _labels(spec) -> tuple[str, ...]:
    return (spec,) if isinstance(spec, str) else tuple(spec)


def h_expr_3(
    x: OpMatrix,
    sigma,
    order,
    config: OptimizerConfig | None = None,
    sampler: SeededSampler | None = None,
    cond="C",
    free="D",
) -> EntropyResult:
    """``-log sup_tau ||sigma^(-alpha'/2) X tau^(alpha'/2)||_2^(2/alpha')``.

    The optimization runs over ``tau`` itself rather than its transpose; the
    set of density operators is closed under transposition, so the
    supremum is the same.
    """
    order = as_order(order)
    cond, free = _labels(cond), _labels(free)
    ap = float(order.prime)
    left = _pinned_left(x, sigma, cond, -ap / 2)
    objective = PowerTraceObjective(left, x.inputs, free, ap, 1.0, 1 / ap)
    outcome = optimize_density(objective, x.inputs.dim_of(free), _default_config(config, "sup"), sampler)
    right = linalg.embed(_full_power(outcome.argopt, ap / 2), x.inputs, free)
    value = -(2 / ap) * math.log2(linalg.schatten(left @ right, 2))
    return EntropyResult.from_outcome(value, "opvec3", outcome)


def h_expr_4(x: OpMatrix, sigma, order, cond="C") -> EntropyResult:
    """``-log ||sigma^(-alpha'/2) X||_{2 alpha}^(2/alpha')``; closed form."""
    order = as_order(order)
    ap = float(order.prime)
    left = _pinned_left(x, sigma, _labels(cond), -ap / 2)
    value = -(2 / ap) * math.log2(linalg.schatten(left, 2 * order.value))
    return EntropyResult(value, "opvec4")


def h_expr_5(
    x: OpMatrix,
    order,
    config: OptimizerConfig | None = None,
    sampler: SeededSampler | None = None,
    free="D",
) -> EntropyResult:
    """``-log sup_tau ||X tau^(alpha'/2)||_{2 alpha_hat}^(2/alpha')``."""
    order = as_order(order)
    free = _labels(free)
    ap, ah = float(order.prime), order.hat.value
    objective = PowerTraceObjective(x.matrix, x.inputs, free, ap, ah, 1 / (ap * ah))
    outcome = optimize_density(objective, x.inputs.dim_of(free), _default_config(config, "sup"), sampler)
    right = linalg.embed(_full_power(outcome.argopt, ap / 2), x.inputs, free)
    value = -(2 / ap) * math.log2(linalg.schatten(x.matrix @ right, 2 * ah))
    return EntropyResult.from_outcome(value, "opvec5", outcome)


# -- variational norm -------------------------------------------------------


def variational_norm(
    x,
    order,
    config: OptimizerConfig | None = None,
    sampler: SeededSampler | None = None,
) -> EntropyResult:
    """``||X||_alpha`` as the sup (alpha > 1) or inf (alpha < 1) of ``tr[Y^alpha' X]``."""
    order = as_order(order)
    x = _matrix(x)
    _eigh_psd(x)
    ap = float(order.prime)
    root = linalg.mat_pow_support(x, 0.5)
    f = TensorFactorization(("Y",), (x.shape[0],))
    objective = PowerTraceObjective(root, f, ("Y",), ap, 1.0, 1.0)
    mode = "sup" if order.value > 1 else "inf"
    outcome = optimize_density(objective, x.shape[0], _default_config(config, mode), sampler)
    value = float(np.trace(_full_power(outcome.argopt, ap) @ x).real)
    return EntropyResult.from_outcome(value, "variational", outcome)


def collision_entropy_pinned(rho: DensityOperator, sigma, given, target=None) -> float:
    """Pinned entropy at ``alpha = 2`` written out by hand: ``-log tr[(s rho s)^2]``, ``s = sigma^(-1/4)``."""
    rho, given = _split(rho, given, target)
    s = linalg.mat_pow_support(_conditioning_operator(rho, given, sigma), -0.25)
    core = s @ rho.matrix @ s
    return -math.log2(float(np.vdot(core, core).real))
