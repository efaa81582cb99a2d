"""Dense complex linear algebra on small tensor-product spaces.

Matrices are plain ``numpy`` arrays.  Tensor structure is carried alongside
them by a :class:`TensorFactorization`, and the computational basis of a
composite space is ordered row-major over the factorization's labels, so the
first label is the most significant digit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    LabelPartitionInvalid,
    MalformedInput,
    NotHermitian,
    NotPSD,
    ComputeOverflow,
    UnknownLabel,
)

HERMITIAN_TOL = 1e-10
EIG_TOL = 1e-10
SUPPORT_CUTOFF = 1e-12


@dataclass(frozen=True)
class TensorFactorization:
    """Ordered system labels with their local dimensions."""

    labels: tuple[str, ...]
    dims: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if len(self.labels) != len(self.dims):
            raise DimensionMismatch("labels and dims differ in length")
        if len(set(self.labels)) != len(self.labels):
            raise LabelPartitionInvalid(f"duplicate labels in {self.labels}")
        if any(d < 1 for d in self.dims):
            raise DimensionMismatch(f"dimensions must be positive, got {self.dims}")

    @classmethod
    def from_dict(cls, dims: dict[str, int]) -> "TensorFactorization":
        return cls(tuple(dims), tuple(dims.values()))

    def as_dict(self) -> dict[str, int]:
        return dict(zip(self.labels, self.dims))

    @property
    def dim(self) -> int:
        return math.prod(self.dims)

    def dim_of(self, labels: Iterable[str]) -> int:
        lookup = self.as_dict()
        return math.prod(lookup[lab] for lab in self.ordered(labels))

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise UnknownLabel(f"unknown system {label!r}; known: {self.labels}") from None

    def ordered(self, labels: Iterable[str]) -> tuple[str, ...]:
        """Return ``labels`` sorted into factorization order, validating each."""
        labels = list(labels)
        idx = sorted(self.index(lab) for lab in labels)
        if len(set(idx)) != len(idx):
            raise LabelPartitionInvalid(f"repeated label in {labels}")
        return tuple(self.labels[i] for i in idx)

    def subset(self, labels: Iterable[str]) -> "TensorFactorization":
        keep = self.ordered(labels)
        return TensorFactorization(keep, tuple(self.dims[self.index(lab)] for lab in keep))

    def complement(self, labels: Iterable[str]) -> tuple[str, ...]:
        drop = set(self.ordered(labels))
        return tuple(lab for lab in self.labels if lab not in drop)

    def check_dim(self, n: int) -> None:
        if n != self.dim:
            raise DimensionMismatch(
                f"factorization {self.as_dict()} has dimension {self.dim}, object has {n}"
            )


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues in descending order with eigenvectors as columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def hermitian_part(m: np.ndarray, htol: float = HERMITIAN_TOL) -> np.ndarray:
    """Symmetrize ``m`` after checking it is Hermitian to within ``htol``."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ComputeOverflow("matrix has non-finite entries")
    dev = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
    if dev > htol:
        raise NotHermitian(f"max |M - M^dagger| = {dev:.3e} exceeds {htol:.0e}")
    return (m + m.conj().T) / 2


def eig_hermitian(m: np.ndarray, htol: float = HERMITIAN_TOL) -> Spectrum:
    w, v = np.linalg.eigh(hermitian_part(m, htol))
    return Spectrum(w[::-1].copy(), v[:, ::-1].copy())


def _check_psd(w: np.ndarray, eigtol: float) -> float:
    lmax = float(np.max(np.abs(w))) if w.size else 0.0
    if w.size and w.min() < -eigtol * max(lmax, 1e-300):
        raise NotPSD(f"eigenvalue {w.min():.3e} below -{eigtol:.0e} * {lmax:.3e}")
    return lmax


def mat_pow_support(
    m: np.ndarray,
    p: float,
    cutoff: float = SUPPORT_CUTOFF,
    eigtol: float = EIG_TOL,
) -> np.ndarray:
    """Power of a PSD matrix taken on its support.

    Eigenvalues at or below ``cutoff * lambda_max`` are mapped to zero, so
    negative ``p`` yields the pseudo-inverse power.
    """
    if not np.isfinite(p):
        raise ValueError("power must be finite")
    spec = eig_hermitian(m)
    w, v = spec.eigenvalues, spec.eigenvectors
    lmax = _check_psd(w, eigtol)
    keep = w > cutoff * lmax
    if lmax == 0 or not keep.any():
        return np.zeros_like(v)
    f = np.zeros_like(w)
    f[keep] = w[keep] ** p
    return (v * f) @ v.conj().T


def support_projector(m: np.ndarray, cutoff: float = SUPPORT_CUTOFF) -> np.ndarray:
    return mat_pow_support(m, 0.0, cutoff=cutoff)


def schatten(x: np.ndarray, p: float) -> float:
    """Schatten ``p``-norm (a quasi-norm for ``p < 1``) from the singular values."""
    if not p > 0:
        raise ValueError(f"Schatten index must be positive, got {p}")
    s = np.linalg.svd(np.asarray(x, dtype=complex), compute_uv=False)
    if np.isinf(p):
        return float(s.max(initial=0.0))
    smax = s.max(initial=0.0)
    if smax == 0:
        return 0.0
    # scale out the largest singular value to keep s**p in range
    val = smax * float(np.sum((s / smax) ** p)) ** (1.0 / p)
    if not math.isfinite(val):
        raise ComputeOverflow(f"Schatten norm overflowed for p={p}")
    return val


def _split_axes(f: TensorFactorization, m: np.ndarray) -> np.ndarray:
    f.check_dim(m.shape[0])
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    return m.reshape(f.dims + f.dims)


def partial_trace(m: np.ndarray, f: TensorFactorization, keep: Iterable[str]) -> np.ndarray:
    """Trace out every system not in ``keep``; kept systems stay in ``f`` order."""
    keep = f.ordered(keep)
    n = len(f.labels)
    t = _split_axes(f, np.asarray(m))
    # einsum subscripts: traced systems share an index between row and column
    rows = list(range(n))
    cols = [i if f.labels[i] not in keep else n + i for i in range(n)]
    out = [i for i in range(n) if f.labels[i] in keep] + [
        n + i for i in range(n) if f.labels[i] in keep
    ]
    d = f.dim_of(keep)
    return np.einsum(t, rows + cols, out).reshape(d, d)


def permute_systems(
    m: np.ndarray, f: TensorFactorization, order: Sequence[str]
) -> tuple[np.ndarray, TensorFactorization]:
    """Reorder the tensor factors of an operator."""
    if sorted(order) != sorted(f.labels):
        raise LabelPartitionInvalid(f"{order} is not a permutation of {f.labels}")
    perm = [f.index(lab) for lab in order]
    n = len(perm)
    t = _split_axes(f, np.asarray(m)).transpose(perm + [n + i for i in perm])
    g = TensorFactorization(tuple(order), tuple(f.dims[i] for i in perm))
    return t.reshape(g.dim, g.dim), g


def embed(op: np.ndarray, f: TensorFactorization, labels: Iterable[str]) -> np.ndarray:
    """Return ``op`` acting on ``labels`` tensored with the identity elsewhere."""
    labels = f.ordered(labels)
    rest = f.complement(labels)
    d_rest = f.dim_of(rest)
    op = np.asarray(op, dtype=complex)
    if op.shape != (f.dim_of(labels),) * 2:
        raise DimensionMismatch(
            f"operator of shape {op.shape} does not act on {labels} of dimension {f.dim_of(labels)}"
        )
    full = np.kron(op, np.eye(d_rest))
    g = TensorFactorization(labels + rest, tuple(f.as_dict()[lab] for lab in labels + rest))
    return permute_systems(full, g, f.labels)[0]


def _check_partition(f: TensorFactorization, input, output) -> tuple[tuple[str, ...], tuple[str, ...]]:
    input, output = tuple(input), tuple(output)
    for lab in input + output:
        if lab not in f.labels:
            raise LabelPartitionInvalid(f"unknown system {lab!r}; known: {f.labels}")
    if set(input) & set(output) or set(input) | set(output) != set(f.labels):
        raise LabelPartitionInvalid(
            f"input {input} and output {output} must partition {f.labels}"
        )
    return f.ordered(input), f.ordered(output)


def op_vec(v: np.ndarray, f: TensorFactorization, input, output) -> np.ndarray:
    """Operator-vector correspondence ``|i>_in |j>_out -> |j><i|``.

    Within each group the systems keep their factorization order.
    """
    input, output = _check_partition(f, input, output)
    v = np.asarray(v, dtype=complex).reshape(-1)
    f.check_dim(v.size)
    perm = [f.index(lab) for lab in output + input]
    return v.reshape(f.dims).transpose(perm).reshape(f.dim_of(output), f.dim_of(input))


def vec_op(x: np.ndarray, f: TensorFactorization, input, output) -> np.ndarray:
    """Inverse of :func:`op_vec`."""
    input, output = _check_partition(f, input, output)
    x = np.asarray(x, dtype=complex)
    if x.shape != (f.dim_of(output), f.dim_of(input)):
        raise DimensionMismatch(f"matrix shape {x.shape} does not match {output} <- {input}")
    perm = [f.index(lab) for lab in output + input]
    t = x.reshape([f.dims[i] for i in perm])
    return t.transpose(np.argsort(perm)).reshape(-1)


def op_vec_sandwich(
    v: np.ndarray,
    f: TensorFactorization,
    x_in: np.ndarray,
    y_out: np.ndarray,
    input,
    output,
) -> np.ndarray:
    """Evaluate ``Y Op(v) X^T``, which equals ``Op((X (x) Y) v)``."""
    input, output = _check_partition(f, input, output)
    d_in, d_out = f.dim_of(input), f.dim_of(output)
    x_in, y_out = np.asarray(x_in, dtype=complex), np.asarray(y_out, dtype=complex)
    if x_in.shape != (d_in, d_in) or y_out.shape != (d_out, d_out):
        raise DimensionMismatch(
            f"expected X of shape {(d_in, d_in)} and Y of shape {(d_out, d_out)}, "
            f"got {x_in.shape} and {y_out.shape}"
        )
    return y_out @ op_vec(v, f, input, output) @ x_in.T


def power_frechet_adjoint(w: np.ndarray, v: np.ndarray, p: float, g: np.ndarray) -> np.ndarray:
    """Gradient of ``M -> Re tr[G M**p]`` at ``M = V diag(w) V^dagger``.

    Uses first divided differences of ``t -> t**p`` (Daleckii-Krein).  All
    eigenvalues must be strictly positive.
    """
    wp = w**p
    dw = w[:, None] - w[None, :]
    close = np.abs(dw) <= 1e-10 * np.maximum(np.abs(w[:, None]), np.abs(w[None, :]))
    safe = np.where(close, 1.0, dw)
    mean = (w[:, None] + w[None, :]) / 2
    dd = np.where(close, p * mean ** (p - 1), (wp[:, None] - wp[None, :]) / safe)
    gt = v.conj().T @ g @ v
    out = v @ (dd * gt) @ v.conj().T
    return (out + out.conj().T) / 2


def matrix_to_json(m: np.ndarray, f: TensorFactorization | None = None) -> dict:
    """Encode a matrix in the row-major ``re``/``im`` exchange format."""
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    flat = m.reshape(-1)
    out = {
        "rows": int(m.shape[0]),
        "cols": int(m.shape[1]),
        "re": [float(x) for x in flat.real],
        "im": [float(x) for x in flat.imag],
    }
    if f is not None:
        out["dims"] = f.as_dict()
    return out


def matrix_from_json(obj: dict) -> tuple[np.ndarray, TensorFactorization]:
    """Decode the exchange format.  A missing ``dims`` means a single system ``A``."""
    try:
        rows, cols = int(obj["rows"]), int(obj["cols"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", [0.0] * (rows * cols)), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedInput(f"bad matrix object: {exc}") from None
    if rows < 1 or cols < 1 or re.size != rows * cols or im.size != rows * cols:
        raise MalformedInput(f"entries must have length rows*cols = {rows * cols}")
    m = (re + 1j * im).reshape(rows, cols)
    if not np.all(np.isfinite(m)):
        raise MalformedInput("matrix entries must be finite")
    dims = obj.get("dims")
    if dims is None:
        f = TensorFactorization(("A",), (rows,))
    elif isinstance(dims, dict):
        f = TensorFactorization.from_dict(dims)
    else:
        raise MalformedInput("dims must be an object mapping labels to dimensions")
    return m, f
