"""Quantum states: validation, purification and seeded sampling.

Randomness comes from numpy's counter-based Philox generator.  Draw ``k``
of a :class:`SeededSampler` with seed ``s`` uses the 128-bit Philox key
``s + 2**64 * k``, so any single draw can be reproduced from ``(seed, counter)``
alone without replaying earlier ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import linalg
from .errors import DimensionMismatch, NotPSD, RankInvalid, RenyiError
from .linalg import TensorFactorization

TRACE_TOL = 1e-10
NORM_TOL = 1e-10

_MASK64 = (1 << 64) - 1


@dataclass
class SeededSampler:
    """Reproducible source of random draws.

    Not safe to share between concurrent tasks; use :meth:`fork` to hand each
    task its own stream.
    """

    seed: int
    counter: int = 0

    def __post_init__(self):
        self.seed = int(self.seed) & _MASK64

    def generator(self) -> np.random.Generator:
        """Return the generator for the current counter and advance it."""
        key = self.seed | (self.counter << 64)
        self.counter += 1
        return np.random.Generator(np.random.Philox(key=key))

    def fork(self, branch: int) -> "SeededSampler":
        seq = np.random.SeedSequence(self.seed, spawn_key=(int(branch),))
        return SeededSampler(int(seq.generate_state(1, np.uint64)[0]))

    def state(self) -> dict:
        return {"seed": self.seed, "counter": self.counter}


def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def _as_factorization(f) -> TensorFactorization:
    if isinstance(f, TensorFactorization):
        return f
    return TensorFactorization(("A",), (int(f),))


@dataclass(frozen=True)
class DensityOperator:
    """PSD operator with unit trace, or trace in (0, 1] when ``subnormalized``."""

    matrix: np.ndarray
    factorization: TensorFactorization
    subnormalized: bool = False
    trace: float = field(init=False)

    def __post_init__(self):
        m = linalg.hermitian_part(self.matrix)
        self.factorization.check_dim(m.shape[0])
        w = np.linalg.eigvalsh(m)
        lmax = max(float(np.max(np.abs(w))), 1e-300)
        if w.min() < -linalg.EIG_TOL * lmax:
            raise NotPSD(f"density operator has eigenvalue {w.min():.3e}")
        tr = float(np.trace(m).real)
        if self.subnormalized:
            if not 0 < tr <= 1 + TRACE_TOL:
                raise RenyiError(f"subnormalized trace must lie in (0, 1], got {tr}")
        elif abs(tr - 1) > TRACE_TOL:
            raise RenyiError(f"trace is {tr!r}, expected 1 within {TRACE_TOL:.0e}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "trace", tr)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def reduce(self, keep: Iterable[str]) -> "DensityOperator":
        keep = self.factorization.ordered(keep)
        m = linalg.partial_trace(self.matrix, self.factorization, keep)
        return DensityOperator(m, self.factorization.subset(keep), self.subnormalized)

    def purity(self) -> float:
        return float(np.vdot(self.matrix, self.matrix).real)


@dataclass(frozen=True)
class PureState:
    vector: np.ndarray
    factorization: TensorFactorization

    def __post_init__(self):
        v = np.array(self.vector, dtype=complex).reshape(-1)
        self.factorization.check_dim(v.size)
        norm = np.linalg.norm(v)
        if abs(norm - 1) > NORM_TOL:
            raise RenyiError(f"state vector has norm {norm!r}, expected 1")
        v.setflags(write=False)
        object.__setattr__(self, "vector", v)

    def density(self) -> DensityOperator:
        v = self.vector
        return DensityOperator(np.outer(v, v.conj()), self.factorization)

    def reduce(self, keep: Iterable[str]) -> DensityOperator:
        # build the reduced state directly from the vector: tr_rest |v><v| = X X^dagger
        f = self.factorization
        keep = f.ordered(keep)
        x = linalg.op_vec(self.vector, f, f.complement(keep), keep)
        return DensityOperator(x @ x.conj().T, f.subset(keep))

    def op(self, input, output) -> np.ndarray:
        return linalg.op_vec(self.vector, self.factorization, input, output)


def product_factorization(**dims: int) -> TensorFactorization:
    return TensorFactorization(tuple(dims), tuple(dims.values()))


def purify(rho: DensityOperator, purifier_label: str = "R") -> PureState:
    """Minimal purification: the purifying system has dimension ``rank(rho)``.

    The purifier is appended as the last tensor factor.
    """
    f = rho.factorization
    if purifier_label in f.labels:
        raise RenyiError(f"purifier label {purifier_label!r} already in use")
    spec = linalg.eig_hermitian(rho.matrix)
    w, v = spec.eigenvalues, spec.eigenvectors
    keep = w > linalg.SUPPORT_CUTOFF * w[0]
    w, v = w[keep], v[:, keep]
    vec = (v * np.sqrt(w / w.sum())).reshape(-1)
    g = TensorFactorization(f.labels + (purifier_label,), f.dims + (len(w),))
    return PureState(vec, g)


def random_pure(sampler: SeededSampler, f) -> PureState:
    f = _as_factorization(f)
    g = _complex_normal(sampler.generator(), f.dim)
    return PureState(g / np.linalg.norm(g), f)


def random_density(sampler: SeededSampler, f, rank: int | None = None) -> DensityOperator:
    """Induced (Ginibre) measure: ``G G^dagger / tr`` with ``G`` of shape ``dim x rank``.

    ``rank == dim`` (the default) gives the Hilbert-Schmidt measure.
    """
    f = _as_factorization(f)
    rank = f.dim if rank is None else int(rank)
    if not 1 <= rank <= f.dim:
        raise RankInvalid(f"rank must lie in [1, {f.dim}], got {rank}")
    g = _complex_normal(sampler.generator(), (f.dim, rank))
    m = g @ g.conj().T
    return DensityOperator(m / np.trace(m).real, f)


def random_unitary(sampler: SeededSampler, dim: int) -> np.ndarray:
    """Haar unitary via QR of a Ginibre matrix with phase correction."""
    z = _complex_normal(sampler.generator(), (dim, dim))
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def maximally_mixed(f) -> DensityOperator:
    f = _as_factorization(f)
    return DensityOperator(np.eye(f.dim) / f.dim, f)


def maximally_entangled(f: TensorFactorization, first: str, second: str) -> PureState:
    """``sum_i |ii>/sqrt(d)`` on two equal-dimensional systems, ``|0>`` elsewhere."""
    da, db = f.dim_of([first]), f.dim_of([second])
    if da != db:
        raise DimensionMismatch(f"systems {first} and {second} differ in dimension")
    t = np.zeros(f.dims, dtype=complex)
    ia, ib = f.index(first), f.index(second)
    for i in range(da):
        idx = [0] * len(f.dims)
        idx[ia] = idx[ib] = i
        t[tuple(idx)] = 1 / np.sqrt(da)
    return PureState(t.reshape(-1), f)


def basis_state(f: TensorFactorization, index: int = 0) -> PureState:
    v = np.zeros(f.dim, dtype=complex)
    v[index] = 1
    return PureState(v, f)


def ghz(f: TensorFactorization) -> PureState:
    d = min(f.dims)
    t = np.zeros(f.dims, dtype=complex)
    for i in range(d):
        t[(i,) * len(f.dims)] = 1 / np.sqrt(d)
    return PureState(t.reshape(-1), f)


def corner_states(f: TensorFactorization, sampler: SeededSampler) -> list[tuple[str, DensityOperator]]:
    """Extremal test states: product, entangled, mixed, classical and low-rank."""
    labels = f.labels
    corners = [
        ("pure_product", basis_state(f).density()),
        ("maximally_mixed", maximally_mixed(f)),
        ("ghz", ghz(f).density()),
    ]
    if len(labels) >= 2 and f.dims[0] == f.dims[1]:
        corners.append(("maximally_entangled", maximally_entangled(f, labels[0], labels[1]).density()))
    if len(labels) >= 2 and f.dims[-1] == f.dims[-2]:
        corners.append(
            ("maximally_entangled_last", maximally_entangled(f, labels[-2], labels[-1]).density())
        )
    p = sampler.generator().dirichlet(np.ones(f.dim))
    corners.append(("classical_diagonal", DensityOperator(np.diag(p).astype(complex), f)))
    corners.append(("rank_deficient", random_density(sampler, f, rank=min(2, f.dim))))
    return corners
