"""Sparse Quantum Hamiltonian (SQH) operators.

An operator is stored as an energy shift plus a list of real-weighted Pauli
products.  Qubit ``i`` (1-based) is bit ``i - 1`` of a basis index, so
``z = sum_i z_i 2**(i-1)``.  Applying an operator to a state never builds the
``2**n x 2**n`` matrix; each term maps a basis index to exactly one other
basis index times a phase from ``{+1, +i, -1, -i}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .errors import ContractViolation, ValidationError

MAX_QUBITS = 63
DECOMPOSE_MAX_QUBITS = 6

_PHASES = (1 + 0j, 1j, -1 + 0j, -1j)


class PauliAxis(str, Enum):
    X = "x"
    Y = "y"
    Z = "z"


def _coerce_factor(factor) -> tuple[int, PauliAxis]:
    qubit, axis = factor
    if isinstance(qubit, bool) or not isinstance(qubit, (int, np.integer)):
        raise ValidationError(f"qubit index must be an integer, got {qubit!r}")
    try:
        axis = PauliAxis(axis.lower() if isinstance(axis, str) else axis)
    except ValueError:
        raise ValidationError(f"unknown Pauli axis {axis!r}") from None
    return int(qubit), axis


def _coerce_weight(weight) -> float:
    if isinstance(weight, (complex, np.complexfloating)):
        raise ValidationError(f"term weights must be real, got {weight!r}")
    w = float(weight)
    if not math.isfinite(w):
        raise ValidationError(f"term weight must be finite, got {weight!r}")
    return w


@dataclass(frozen=True)
class SqhTerm:
    """A real weight times a product of single-qubit Pauli matrices."""

    weight: float
    factors: tuple[tuple[int, PauliAxis], ...]

    def __post_init__(self):
        factors = tuple(_coerce_factor(f) for f in self.factors)
        if not factors:
            raise ValidationError("a term needs at least one Pauli factor; put identity in the shift")
        qubits = [q for q, _ in factors]
        if qubits[0] < 1 or any(b <= a for a, b in zip(qubits, qubits[1:])):
            raise ValidationError(f"qubit indices must be >= 1 and strictly increasing, got {qubits}")
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "weight", _coerce_weight(self.weight))

    @property
    def key(self) -> tuple[tuple[int, str], ...]:
        return tuple((q, a.value) for q, a in self.factors)

    @property
    def max_qubit(self) -> int:
        return self.factors[-1][0]

    @property
    def flip_mask(self) -> int:
        return sum(1 << (q - 1) for q, a in self.factors if a is not PauliAxis.Z)

    @property
    def sign_mask(self) -> int:
        return sum(1 << (q - 1) for q, a in self.factors if a is not PauliAxis.X)

    @property
    def n_y(self) -> int:
        return sum(1 for _, a in self.factors if a is PauliAxis.Y)


def term(weight: float, spec: str | Sequence) -> SqhTerm:
    """Build a term from ``"x1 z3"``-style text or a sequence of (qubit, axis) pairs."""
    if isinstance(spec, str):
        factors = []
        for tok in spec.split():
            factors.append((int(tok[1:]), tok[0]))
        spec = factors
    return SqhTerm(weight, tuple(sorted(spec, key=lambda f: f[0])))


def apply_term(t: SqhTerm, z: int, n: int) -> tuple[int, complex]:
    """Return ``(z', phase)`` with ``(prod sigma)|z> = phase |z'>``."""
    if not 0 <= z < (1 << n):
        raise ContractViolation(f"basis index {z} out of range for {n} qubits")
    if t.max_qubit > n:
        raise ContractViolation(f"term acts on qubit {t.max_qubit} but n = {n}")
    # sigma^y|b> = i (-1)^b |1-b>, sigma^z|b> = (-1)^b |b>
    k = t.n_y + 2 * (bin(z & t.sign_mask).count("1") & 1)
    return z ^ t.flip_mask, _PHASES[k % 4]


class SqhOperator:
    """Immutable Hermitian operator ``shift * 1 + sum_j weight_j * P_j``.

    Terms with identical factor lists are merged on construction and exact
    zeros are dropped.  Terms are kept sorted by factor list.
    """

    def __init__(self, n_qubits: int, shift: float = 0.0, terms: Iterable = ()):
        if not 1 <= int(n_qubits) <= MAX_QUBITS:
            raise ContractViolation(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
        self._n = int(n_qubits)
        self._shift = _coerce_weight(shift)
        merged: dict = {}
        for t in terms:
            if not isinstance(t, SqhTerm):
                t = SqhTerm(*t)
            if t.max_qubit > self._n:
                raise ContractViolation(f"term acts on qubit {t.max_qubit} but n_qubits = {self._n}")
            if t.key in merged:
                merged[t.key] = SqhTerm(merged[t.key].weight + t.weight, t.factors)
            else:
                merged[t.key] = t
        self._terms = tuple(merged[k] for k in sorted(merged) if merged[k].weight != 0.0)

    @property
    def n_qubits(self) -> int:
        return self._n

    @property
    def shift(self) -> float:
        return self._shift

    @property
    def terms(self) -> tuple[SqhTerm, ...]:
        return self._terms

    @property
    def dim(self) -> int:
        return 1 << self._n

    def __len__(self):
        return len(self._terms)

    def __eq__(self, other):
        if not isinstance(other, SqhOperator):
            return NotImplemented
        return self._n == other._n and self._shift == other._shift and self._terms == other._terms

    def __hash__(self):
        return hash((self._n, self._shift, self._terms))

    def __repr__(self):
        return f"SqhOperator(n_qubits={self._n}, shift={self._shift!r}, n_terms={len(self._terms)})"

    def __mul__(self, c):
        return linear_combine([(c, self)])

    __rmul__ = __mul__

    def __add__(self, other):
        return linear_combine([(1.0, self), (1.0, other)])

    def __sub__(self, other):
        return linear_combine([(1.0, self), (-1.0, other)])

    @cached_property
    def compiled(self) -> "CompiledTerms":
        return CompiledTerms.from_terms(self._terms)

    def weight_bound(self) -> float:
        """Cheap upper bound on the spectral radius: ``|shift| + sum |w|``."""
        return abs(self._shift) + sum(abs(t.weight) for t in self._terms)

    def is_diagonal(self) -> bool:
        return all(a is PauliAxis.Z for t in self._terms for _, a in t.factors)

    def apply(self, vec: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        """Raw-array matvec ``H @ vec`` over the full ``2**n`` space."""
        vec = np.ascontiguousarray(vec, dtype=np.complex128)
        if vec.shape != (self.dim,):
            raise ContractViolation(f"vector has shape {vec.shape}, expected ({self.dim},)")
        if out is None:
            out = np.empty_like(vec)
        c = self.compiled
        _kernels.apply_terms(c.flip, c.mask, c.coef, self._shift, vec, out)
        return out

    def diagonal(self) -> np.ndarray:
        """Diagonal of the represented matrix (real)."""
        z = np.arange(self.dim, dtype=np.uint64)
        d = np.full(self.dim, self._shift)
        for t in self._terms:
            if t.flip_mask == 0:
                parity = np.bitwise_count(z & np.uint64(t.sign_mask)) & 1
                d += t.weight * (1.0 - 2.0 * parity)
        return d


@dataclass(frozen=True)
class CompiledTerms:
    """Flat arrays consumed by the kernels."""

    flip: np.ndarray  # uint64, bits flipped by X and Y factors
    mask: np.ndarray  # uint64, bits read for the (-1)^b sign by Y and Z factors
    unit: np.ndarray  # complex128, i**n_y
    weights: np.ndarray  # float64

    @classmethod
    def from_terms(cls, terms: Sequence[SqhTerm]) -> "CompiledTerms":
        return cls(
            flip=np.array([t.flip_mask for t in terms], dtype=np.uint64),
            mask=np.array([t.sign_mask for t in terms], dtype=np.uint64),
            unit=np.array([_PHASES[t.n_y % 4] for t in terms], dtype=np.complex128),
            weights=np.array([t.weight for t in terms], dtype=np.float64),
        )

    @cached_property
    def coef(self) -> np.ndarray:
        return self.weights * self.unit


def matvec(op: SqhOperator, psi):
    """Return ``H psi``.  Accepts a StateVector-like object or a raw array."""
    amps = getattr(psi, "amplitudes", None)
    if amps is None:
        return op.apply(psi)
    if psi.n_qubits != op.n_qubits:
        raise ContractViolation(f"state has {psi.n_qubits} qubits, operator has {op.n_qubits}")
    return type(psi)(op.n_qubits, op.apply(amps))


def linear_combine(parts: Iterable[tuple[float, SqhOperator]], drop_below: float = 1e-15) -> SqhOperator:
    """``sum_k c_k H_k`` with like terms merged and tiny weights dropped."""
    parts = list(parts)
    if not parts:
        raise ContractViolation("linear_combine needs at least one operator")
    n = parts[0][1].n_qubits
    shift = 0.0
    acc: dict = {}
    for c, op in parts:
        if op.n_qubits != n:
            raise ContractViolation(f"cannot combine operators on {n} and {op.n_qubits} qubits")
        c = _coerce_weight(c)
        if c == 0.0:
            continue
        shift += c * op.shift
        for t in op.terms:
            if t.key in acc:
                acc[t.key][0] += c * t.weight
            else:
                acc[t.key] = [c * t.weight, t.factors]
    terms = [SqhTerm(w, f) for w, f in acc.values() if abs(w) >= drop_below]
    if abs(shift) < drop_below:
        shift = 0.0
    return SqhOperator(n, shift, terms)


def to_dense(op: SqhOperator) -> np.ndarray:
    """Materialize the full matrix.  Intended for small ``n`` only."""
    if op.n_qubits > 14:
        raise ContractViolation("to_dense is limited to 14 qubits")
    dim = op.dim
    z = np.arange(dim, dtype=np.uint64)
    m = np.zeros((dim, dim), dtype=np.complex128)
    m[np.arange(dim), np.arange(dim)] = op.shift
    for t in op.terms:
        parity = np.bitwise_count(z & np.uint64(t.sign_mask)) & 1
        vals = t.weight * _PHASES[t.n_y % 4] * (1.0 - 2.0 * parity)
        rows = (z ^ np.uint64(t.flip_mask)).astype(np.intp)
        m[rows, z.astype(np.intp)] += vals
    return m


def decompose_dense(h: np.ndarray, tol: float = 1e-10, drop_below: float = 1e-12) -> SqhOperator:
    """Expand a Hermitian matrix in generalized Pauli matrices.

    Coefficients are ``m_i = Tr(H S_i) / N``; all ``4**n`` strings are visited,
    so this is capped at 6 qubits.
    """
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {h.shape}")
    dim = h.shape[0]
    n = dim.bit_length() - 1
    if dim < 2 or (1 << n) != dim:
        raise ValidationError(f"dimension {dim} is not a power of two")
    if n > DECOMPOSE_MAX_QUBITS:
        raise ContractViolation(f"decompose_dense is capped at {DECOMPOSE_MAX_QUBITS} qubits")
    if not np.allclose(h, h.conj().T, atol=tol, rtol=0.0):
        raise ValidationError("matrix is not Hermitian within tolerance")

    z = np.arange(dim, dtype=np.uint64)
    zi = z.astype(np.intp)
    shift = float(np.trace(h).real) / dim
    terms = []
    axes = (None, PauliAxis.X, PauliAxis.Y, PauliAxis.Z)
    for code in range(1, 4**n):
        factors = []
        c = code
        for q in range(1, n + 1):
            a = axes[c & 3]
            c >>= 2
            if a is not None:
                factors.append((q, a))
        t = SqhTerm(1.0, tuple(factors))
        # Tr(H P) = sum_z H[z, z^f] <z^f|P|z> with P|z> = phase(z)|z^f>
        y = z ^ np.uint64(t.flip_mask)
        parity = np.bitwise_count(z & np.uint64(t.sign_mask)) & 1
        phase = _PHASES[t.n_y % 4] * (1.0 - 2.0 * parity)
        tr = np.sum(h[zi, y.astype(np.intp)] * phase)
        coef = tr.real / dim
        if abs(coef) >= drop_below:
            terms.append(SqhTerm(coef, t.factors))
    if abs(shift) < drop_below:
        shift = 0.0
    return SqhOperator(n, shift, terms)


def hamming_weight_operator(n: int) -> SqhOperator:
    """``Sigma^z = sum_i (1 - sigma^z_i) / 2``; eigenvalue is the popcount."""
    return SqhOperator(n, n / 2, [SqhTerm(-0.5, ((i, PauliAxis.Z),)) for i in range(1, n + 1)])


def format_operator(op: SqhOperator) -> str:
    """Text dump: ``shift <v>`` then ``<w> <q>:<axis> ...`` per term."""
    lines = [f"shift {op.shift!r}"]
    for t in op.terms:
        lines.append(" ".join([repr(t.weight)] + [f"{q}:{a.value}" for q, a in t.factors]))
    return "\n".join(lines) + "\n"


def parse_operator(text: str, n_qubits: int | None = None) -> SqhOperator:
    """Inverse of :func:`format_operator`.

    ``n_qubits`` defaults to the largest qubit index that appears (at least 1).
    """
    shift = None
    terms = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        tokens = line.split()
        if shift is None:
            if tokens[0] != "shift" or len(tokens) != 2:
                raise ValidationError(f"line {lineno}: expected 'shift <value>'")
            shift = float(tokens[1])
            continue
        try:
            weight = float(tokens[0])
            factors = []
            for tok in tokens[1:]:
                q, a = tok.split(":")
                factors.append((int(q), a))
            terms.append(SqhTerm(weight, tuple(factors)))
        except (ValueError, ValidationError) as exc:
            raise ValidationError(f"line {lineno}: {exc}") from None
    if shift is None:
        raise ValidationError("missing 'shift' line")
    if n_qubits is None:
        n_qubits = max([t.max_qubit for t in terms], default=1)
    return SqhOperator(n_qubits, shift, terms)
