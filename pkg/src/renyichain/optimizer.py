"""Optimization of scalar functions over density operators.

Iterates are parametrized as ``sigma = (1 - eta) L L^dagger / tr[L L^dagger] + eta id/d``
with an unconstrained complex ``L``, so every iterate is a full-support
density operator.  The small floor ``eta`` keeps negative matrix powers
finite; boundary optima are reached by a final eigenvalue-truncation polish.

An objective is any callable ``sigma -> float``.  If it also provides
``value_and_grad(sigma) -> (value, G)`` with ``d value = Re tr[G d sigma]``,
gradient-based descent uses it; otherwise gradients are taken by central
differences.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize as _opt

from .errors import DimTooLarge, RenyiError
from .states import SeededSampler, random_unitary

FLOOR = 1e-12
TRUNCATE_BELOW = 1e-3
RESTART_RTOL = 1e-6
TIE_TOL = 1e-12

METHODS = ("parametrized_descent", "local_search", "grid_plus_local")


@dataclass(frozen=True)
class OptimizerConfig:
    mode: str = "inf"
    restarts: int = 8
    max_iters: int = 2000
    rel_tol: float = 1e-10
    method: str = "parametrized_descent"

    def __post_init__(self):
        if self.mode not in ("inf", "sup"):
            raise RenyiError(f"mode must be 'inf' or 'sup', got {self.mode!r}")
        if self.method not in METHODS:
            raise RenyiError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.restarts < 1 or self.max_iters < 1 or not self.rel_tol > 0:
            raise RenyiError("restarts, max_iters and rel_tol must be positive")

    def with_mode(self, mode: str) -> "OptimizerConfig":
        return OptimizerConfig(mode, self.restarts, self.max_iters, self.rel_tol, self.method)

    @classmethod
    def from_dict(cls, d: dict) -> "OptimizerConfig":
        known = {"mode", "restarts", "max_iters", "rel_tol", "method"}
        unknown = set(d) - known
        if unknown:
            raise RenyiError(f"unknown optimizer keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class OptimizationOutcome:
    argopt: np.ndarray
    value: float
    iterations: int
    residual: float
    restart_values: list[float] = field(default_factory=list)
    converged: bool = True

    @property
    def convergence_failure(self) -> bool:
        return not self.converged


# -- parametrization -------------------------------------------------------


def _params_to_factor(x: np.ndarray, n: int) -> np.ndarray:
    return (x[: n * n] + 1j * x[n * n :]).reshape(n, n)


def _factor_to_params(factor: np.ndarray) -> np.ndarray:
    return np.concatenate([factor.real.ravel(), factor.imag.ravel()])


def _density(factor: np.ndarray, eta: float = FLOOR) -> tuple[np.ndarray, np.ndarray, float]:
    n = factor.shape[0]
    s = factor @ factor.conj().T
    t = float(np.trace(s).real)
    sigma = (1 - eta) * s / t + eta * np.eye(n) / n
    return (sigma + sigma.conj().T) / 2, s, t


def _factor_of(sigma: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((sigma + sigma.conj().T) / 2)
    return v * np.sqrt(np.clip(w, 0, None))


def _pullback(g: np.ndarray, factor: np.ndarray, s: np.ndarray, t: float, eta: float = FLOOR):
    """Chain rule from ``d value = Re tr[G d sigma]`` to the parameters of ``L``."""
    n = factor.shape[0]
    h = (1 - eta) / t * (g - np.trace(g @ s).real / t * np.eye(n))
    hl = 2 * h @ factor
    return np.concatenate([hl.real.ravel(), hl.imag.ravel()])


def _value_and_grad_fn(objective, n: int, sign: float):
    has_grad = hasattr(objective, "value_and_grad")

    def fn(x):
        factor = _params_to_factor(x, n)
        sigma, s, t = _density(factor)
        if has_grad:
            val, g = objective.value_and_grad(sigma)
            if not math.isfinite(val):
                return np.inf, np.zeros_like(x)
            return sign * val, sign * _pullback(g, factor, s, t)
        val = objective(sigma)
        grad = np.empty_like(x)
        h = 1e-6 * max(1.0, float(np.max(np.abs(x))))
        for i in range(x.size):
            e = np.zeros_like(x)
            e[i] = h
            fp = objective(_density(_params_to_factor(x + e, n))[0])
            fm = objective(_density(_params_to_factor(x - e, n))[0])
            grad[i] = (fp - fm) / (2 * h)
        return sign * val, sign * grad

    return fn


def _evaluate(objective, sigma: np.ndarray) -> float:
    try:
        val = float(objective(sigma))
    except RenyiError:
        return math.inf
    return val if not math.isnan(val) else math.inf


# -- local searches --------------------------------------------------------


def _descent(objective, x0: np.ndarray, n: int, sign: float, config: OptimizerConfig):
    fn = _value_and_grad_fn(objective, n, sign)
    res = _opt.minimize(
        fn,
        x0,
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": config.max_iters, "ftol": config.rel_tol * 1e-5, "gtol": 1e-13, "maxcor": 30},
    )
    return res.x, int(res.nit), float(np.max(np.abs(res.jac))) if res.jac is not None else math.nan


def _simplex(objective, x0: np.ndarray, n: int, sign: float, config: OptimizerConfig):
    def fn(x):
        sigma = _density(_params_to_factor(x, n))[0]
        return sign * _evaluate(objective, sigma)

    res = _opt.minimize(
        fn,
        x0,
        method="Nelder-Mead",
        options={
            "maxiter": config.max_iters * x0.size,
            "maxfev": config.max_iters * x0.size * 2,
            "xatol": 1e-10,
            "fatol": config.rel_tol * 1e-2,
            "adaptive": True,
        },
    )
    return res.x, int(res.nit), float(abs(res.final_simplex[1][-1] - res.final_simplex[1][0]))


def _truncation_polish(objective, sigma: np.ndarray, sign: float) -> np.ndarray:
    """Try dropping small eigenvalues; keeps whichever of the candidates scores best."""
    best, best_val = sigma, sign * _evaluate(objective, sigma)
    w, v = np.linalg.eigh(sigma)
    n = len(w)
    for m in range(1, n):
        if w[m - 1] > TRUNCATE_BELOW * w[-1]:
            break
        ww = w.copy()
        ww[:m] = 0
        ww /= ww.sum()
        cand = (v * ww) @ v.conj().T
        cand = (1 - FLOOR) * cand + FLOOR * np.eye(n) / n
        val = sign * _evaluate(objective, cand)
        if val < best_val:
            best, best_val = cand, val
    return best


def _initial_factors(n: int, restarts: int, sampler: SeededSampler) -> list[np.ndarray]:
    out = [np.eye(n, dtype=complex)]
    for r in range(1, restarts):
        rng = sampler.fork(r).generator()
        out.append(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    return out


def _pick_best(candidates: list[tuple[float, int, int, np.ndarray, float]]):
    # candidates: (signed value, iterations, restart index, sigma, residual)
    best_val = min(c[0] for c in candidates)
    ties = [c for c in candidates if c[0] <= best_val + TIE_TOL * max(1.0, abs(best_val))]
    return min(ties, key=lambda c: (c[1], c[2]))


def optimize_density(
    objective: Callable[[np.ndarray], float],
    dim: int,
    config: OptimizerConfig | None = None,
    sampler: SeededSampler | None = None,
) -> OptimizationOutcome:
    """Find the inf (or sup) of ``objective`` over ``dim x dim`` density operators."""
    config = config or OptimizerConfig()
    sampler = sampler or SeededSampler(0)
    sign = 1.0 if config.mode == "inf" else -1.0
    if dim == 1:
        sigma = np.ones((1, 1), dtype=complex)
        val = _evaluate(objective, sigma)
        return OptimizationOutcome(sigma, val, 0, 0.0, [val])
    if config.method == "grid_plus_local":
        return brute_force_oracle(objective, dim, sampler=sampler, mode=config.mode)

    local = _descent if config.method == "parametrized_descent" else _simplex
    candidates = []
    for r, factor in enumerate(_initial_factors(dim, config.restarts, sampler)):
        x, nit, resid = local(objective, _factor_to_params(factor), dim, sign, config)
        sigma = _density(_params_to_factor(x, dim))[0]
        polished = _truncation_polish(objective, sigma, sign)
        if polished is not sigma:
            x, more, resid = local(objective, _factor_to_params(_factor_of(polished)), dim, sign, config)
            nit += more
            sigma = _truncation_polish(objective, _density(_params_to_factor(x, dim))[0], sign)
        candidates.append((sign * _evaluate(objective, sigma), nit, r, sigma, resid))

    signed, nit, _, sigma, resid = _pick_best(candidates)
    values = sorted(c[0] for c in candidates)
    converged = math.isfinite(signed)
    if len(values) > 1 and math.isfinite(values[1]):
        converged = converged and abs(values[1] - values[0]) <= RESTART_RTOL * max(1.0, abs(values[0]))
    return OptimizationOutcome(
        argopt=sigma,
        value=sign * signed,
        iterations=nit,
        residual=resid,
        restart_values=[sign * c[0] for c in candidates],
        converged=converged,
    )


# -- brute force -----------------------------------------------------------


def _simplex_grid(n: int, resolution: int):
    for parts in itertools.product(range(resolution + 1), repeat=n - 1):
        if sum(parts) <= resolution:
            yield np.array(list(parts) + [resolution - sum(parts)], dtype=float) / resolution


def _qubit_frames(count: int) -> list[np.ndarray]:
    """Unitaries whose first column sweeps a Fibonacci net on the Bloch sphere."""
    frames = []
    golden = math.pi * (3 - math.sqrt(5))
    for i in range(count):
        z = 1 - 2 * (i + 0.5) / count
        theta, phi = math.acos(z), golden * i
        c, s = math.cos(theta / 2), math.sin(theta / 2)
        u = np.array([[c, -np.exp(-1j * phi) * s], [np.exp(1j * phi) * s, c]], dtype=complex)
        frames.append(u)
    return frames


def brute_force_oracle(
    objective: Callable[[np.ndarray], float],
    dim: int,
    resolution: int = 12,
    sampler: SeededSampler | None = None,
    mode: str = "inf",
    polish: int = 2,
) -> OptimizationOutcome:
    """Exhaustive grid over spectra and a net of frames, then simplex polish.

    Shares nothing with the gradient path beyond the parametrization; meant
    as a test oracle for ``dim <= 3``.
    """
    if dim > 3:
        raise DimTooLarge(f"brute force supports dim <= 3, got {dim}")
    sampler = sampler or SeededSampler(0)
    sign = 1.0 if mode == "inf" else -1.0
    if dim == 1:
        return optimize_density(objective, 1)
    if dim == 2:
        frames = _qubit_frames(4 * resolution * resolution)
    else:
        frames = [np.eye(dim, dtype=complex)] + [
            random_unitary(sampler, dim) for _ in range(6 * resolution * resolution)
        ]
    floor = np.eye(dim) / dim
    scored = []
    for spectrum in _simplex_grid(dim, resolution):
        for u in frames:
            sigma = (u * spectrum) @ u.conj().T
            sigma = (1 - 1e-9) * sigma + 1e-9 * floor
            scored.append((sign * _evaluate(objective, sigma), len(scored), sigma))
    scored.sort(key=lambda c: (c[0], c[1]))

    config = OptimizerConfig(mode=mode, max_iters=400, rel_tol=1e-11, method="local_search")
    candidates = []
    for r, (_, _, sigma) in enumerate(scored[:polish]):
        x, nit, resid = _simplex(objective, _factor_to_params(_factor_of(sigma)), dim, sign, config)
        # restart the simplex once at its own optimum to escape premature collapse
        x, more, resid = _simplex(objective, x, dim, sign, config)
        best = _truncation_polish(objective, _density(_params_to_factor(x, dim))[0], sign)
        candidates.append((sign * _evaluate(objective, best), nit + more, r, best, resid))
    signed, nit, _, sigma, resid = _pick_best(candidates)
    return OptimizationOutcome(
        argopt=sigma,
        value=sign * signed,
        iterations=nit,
        residual=resid,
        restart_values=[sign * c[0] for c in candidates],
    )
