"""State vectors over the computational basis and Hamming-weight sectors."""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np

from .errors import ContractViolation, NumericalError, ResourceLimitError, ValidationError
from .sqh import SqhOperator

DEFAULT_QUBIT_CAP = 26
NORM_TOLERANCE = 1e-9

_MAGIC = b"SQHSTATE"
_HEADER = struct.Struct("<8sII")


@dataclass
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (1 << self.n_qubits,):
            raise ContractViolation(f"expected {1 << self.n_qubits} amplitudes, got shape {amps.shape}")
        self.amplitudes = amps

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes.copy())

    def normalized(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes / math.sqrt(self.norm_squared()))

    def check_normalized(self, tol: float = NORM_TOLERANCE):
        drift = abs(1.0 - self.norm_squared())
        if not drift <= tol:
            raise ContractViolation(f"state is not normalized: |1 - <psi|psi>| = {drift:.3e}")


def _check_cap(n: int, cap: int):
    if n < 1:
        raise ContractViolation(f"need at least one qubit, got {n}")
    if n > cap:
        raise ResourceLimitError(f"{n} qubits exceeds the cap of {cap} (2**{n} amplitudes)")


def basis_state(n: int, z: int, cap: int = DEFAULT_QUBIT_CAP) -> StateVector:
    _check_cap(n, cap)
    if not 0 <= z < (1 << n):
        raise ContractViolation(f"basis index {z} out of range for {n} qubits")
    amps = np.zeros(1 << n, dtype=np.complex128)
    amps[z] = 1.0
    return StateVector(n, amps)


def uniform_superposition(n: int, cap: int = DEFAULT_QUBIT_CAP) -> StateVector:
    """``|S> = 2**(-n/2) sum_z |z>``, the ground state of the X driver."""
    _check_cap(n, cap)
    return StateVector(n, np.full(1 << n, 2.0 ** (-n / 2), dtype=np.complex128))


def dicke_state(n: int, weight: int, cap: int = DEFAULT_QUBIT_CAP) -> StateVector:
    """Equal superposition of all basis states with ``weight`` bits set."""
    _check_cap(n, cap)
    if not 0 <= weight <= n:
        raise ValidationError(f"Hamming weight {weight} outside [0, {n}]")
    amps = np.zeros(1 << n, dtype=np.complex128)
    amps[sector_map(n, weight).indices.astype(np.intp)] = 1.0 / math.sqrt(math.comb(n, weight))
    return StateVector(n, amps)


def energy_expectation(psi: StateVector, op: SqhOperator, norm_tol: float = NORM_TOLERANCE) -> float:
    """``Re <psi|H|psi>``; the imaginary residual must be below 1e-9."""
    if psi.n_qubits != op.n_qubits:
        raise ContractViolation(f"state has {psi.n_qubits} qubits, operator has {op.n_qubits}")
    psi.check_normalized(norm_tol)
    val = np.vdot(psi.amplitudes, op.apply(psi.amplitudes))
    if abs(val.imag) >= 1e-9:
        raise NumericalError(f"<psi|H|psi> has imaginary part {val.imag:.3e}; operator not Hermitian?")
    return float(val.real)


def solution_overlap(psi: StateVector, w: int) -> float:
    """``|<w|psi>|**2``."""
    if not 0 <= w < psi.dim:
        raise ContractViolation(f"basis index {w} out of range for {psi.n_qubits} qubits")
    return float(abs(psi.amplitudes[w]) ** 2)


def _popcounts(n: int) -> np.ndarray:
    return np.bitwise_count(np.arange(1 << n, dtype=np.uint64))


def sector_probabilities(psi: StateVector) -> np.ndarray:
    """Probability mass per Hamming weight ``0..n``."""
    return np.bincount(_popcounts(psi.n_qubits), weights=np.abs(psi.amplitudes) ** 2, minlength=psi.n_qubits + 1)


def sector_leakage(psi: StateVector, weight: int) -> float:
    """Probability outside the Hamming-weight-``weight`` sector."""
    if not 0 <= weight <= psi.n_qubits:
        raise ContractViolation(f"Hamming weight {weight} outside [0, {psi.n_qubits}]")
    probs = np.abs(psi.amplitudes) ** 2
    return float(np.sum(probs[_popcounts(psi.n_qubits) != weight]))


@dataclass(frozen=True)
class SectorMap:
    """Sorted basis indices of fixed Hamming weight."""

    n_qubits: int
    weight: int
    indices: np.ndarray  # uint64, strictly increasing

    def __len__(self):
        return len(self.indices)

    def position(self, z: int) -> int:
        pos = int(np.searchsorted(self.indices, np.uint64(z)))
        if pos == len(self.indices) or int(self.indices[pos]) != z:
            raise ContractViolation(f"index {z} is not in the weight-{self.weight} sector")
        return pos

    def restrict(self, psi: StateVector) -> np.ndarray:
        return psi.amplitudes[self.indices.astype(np.intp)].copy()

    def embed(self, vec: np.ndarray) -> StateVector:
        amps = np.zeros(1 << self.n_qubits, dtype=np.complex128)
        amps[self.indices.astype(np.intp)] = vec
        return StateVector(self.n_qubits, amps)


def sector_map(n: int, weight: int) -> SectorMap:
    if not 0 <= weight <= n:
        raise ContractViolation(f"Hamming weight {weight} outside [0, {n}]")
    if n > 63:
        raise ContractViolation("at most 63 qubits")
    count = math.comb(n, weight)
    gen = (sum(1 << b for b in bits) for bits in combinations(range(n), weight))
    idx = np.fromiter(gen, dtype=np.uint64, count=count)
    idx.sort()
    return SectorMap(n, weight, idx)


def write_state(path, psi: StateVector):
    """Little-endian dump: 16-byte header then interleaved re/im doubles."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, psi.n_qubits, 0))
        fh.write(psi.amplitudes.astype("<c16").tobytes())


def read_state(path) -> StateVector:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValidationError(f"{path}: truncated header")
    magic, n, _ = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise ValidationError(f"{path}: bad magic {magic!r}")
    expected = _HEADER.size + 16 * (1 << n)
    if len(data) != expected:
        raise ValidationError(f"{path}: expected {expected} bytes for {n} qubits, got {len(data)}")
    amps = np.frombuffer(data, dtype="<c16", offset=_HEADER.size).astype(np.complex128)
    return StateVector(n, amps)
