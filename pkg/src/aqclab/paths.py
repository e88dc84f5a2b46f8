"""Initial Hamiltonians and interpolation paths ``H(s)``, ``s in [0, 1]``."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .ec3 import Clause, Ec3Instance, final_hamiltonian, instance_stats, removable_clauses
from .errors import ContractViolation, ValidationError
from .integrator import TimeDependentHamiltonian
from .sqh import PauliAxis, SqhOperator, SqhTerm, linear_combine

X, Y, Z = PauliAxis.X, PauliAxis.Y, PauliAxis.Z


@dataclass(frozen=True)
class Envelope:
    """Scalar schedule ``f(s)``.

    kinds: ``constant`` (c), ``one_minus_s``, ``s``, ``bump`` (alpha * s (1 - s)),
    ``clause_ramp`` (k, m, rising).  A clause ramp is active on the half-open
    segment ``[(k-1)/m, k/m)`` (the last one closed at s = 1) and there takes
    the value ``s_k = m s - k + 1`` (rising) or ``1 - s_k`` (falling); it is 0
    elsewhere.
    """

    kind: str
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in ("constant", "one_minus_s", "s", "bump", "clause_ramp"):
            raise ValidationError(f"unknown envelope kind {self.kind!r}")
        if self.kind == "clause_ramp":
            k, m, _ = self.params
            if not 1 <= k <= m:
                raise ValidationError(f"clause_ramp needs 1 <= k <= m, got k={k}, m={m}")

    def active(self, s: float) -> bool:
        if self.kind != "clause_ramp":
            return True
        k, m, _ = self.params
        return (k - 1) / m <= s < k / m or (k == m and s == 1.0)

    def __call__(self, s: float) -> float:
        kind = self.kind
        if kind == "one_minus_s":
            return 1.0 - s
        if kind == "s":
            return s
        if kind == "constant":
            return float(self.params[0])
        if kind == "bump":
            return self.params[0] * s * (1.0 - s)
        k, m, rising = self.params
        if not self.active(s):
            return 0.0
        sk = m * s - k + 1
        return sk if rising else 1.0 - sk

    @property
    def breakpoints(self) -> tuple[float, ...]:
        if self.kind != "clause_ramp":
            return ()
        k, m, _ = self.params
        return tuple(b for b in ((k - 1) / m, k / m) if 0.0 < b < 1.0)


@dataclass(frozen=True)
class Path:
    parts: tuple  # of (Envelope, SqhOperator)
    label: str
    initial: SqhOperator
    final: SqhOperator
    conserved_sector: Optional[int] = None
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def n_qubits(self) -> int:
        return self.initial.n_qubits

    def time_dependent(self, total_time: float) -> TimeDependentHamiltonian:
        return TimeDependentHamiltonian(self.parts, total_time)


def hamiltonian_at(path: Path, s: float) -> SqhOperator:
    if not 0.0 <= s <= 1.0:
        raise ContractViolation(f"s = {s} outside [0, 1]")
    return linear_combine([(env(s), op) for env, op in path.parts])


def h_x_initial(inst: Ec3Instance, omega: float = 1.0) -> SqhOperator:
    """``Omega sum_i n_i/2 (1 - X_i)``; ground state |S> with energy 0."""
    st = instance_stats(inst)
    terms = [SqhTerm(-omega * st.n_i[i] / 2, ((i, X),)) for i in range(1, inst.n + 1) if st.n_i[i]]
    return SqhOperator(inst.n, omega * float(st.n_i.sum()) / 2, terms)


def _pair_terms(i, j, w, axes):
    return [SqhTerm(w, ((i, a), (j, a))) for a in axes]


def h_xyz_initial(inst: Ec3Instance, omega: float = 1.0) -> SqhOperator:
    """Heisenberg ferromagnet ``Omega sum_{i<j} n_ij/2 (1 - sigma_i . sigma_j)``."""
    st = instance_stats(inst)
    terms, shift = [], 0.0
    for (i, j), c in st.n_ij.items():
        shift += omega * c / 2
        terms += _pair_terms(i, j, -omega * c / 2, (X, Y, Z))
    return SqhOperator(inst.n, shift, terms)


def h_xy_initial(inst: Ec3Instance, omega: float = 1.0) -> SqhOperator:
    """XY ferromagnet ``3 m Omega - Omega sum_{i<j} n_ij/2 (X_i X_j + Y_i Y_j)``."""
    st = instance_stats(inst)
    terms = []
    for (i, j), c in st.n_ij.items():
        terms += _pair_terms(i, j, -omega * c / 2, (X, Y))
    return SqhOperator(inst.n, 3.0 * inst.m * omega, terms)


def ising_path(n: int, omega: float = 1.0) -> Path:
    """Transverse-field Ising ring: ``-(1-s) Omega sum X_i - s Omega sum Z_i Z_{i+1}``."""
    if n < 3:
        raise ContractViolation(f"Ising ring needs n >= 3, got {n}")
    hx = SqhOperator(n, 0.0, [SqhTerm(-omega, ((i, X),)) for i in range(1, n + 1)])
    bonds = [tuple(sorted((i, i % n + 1))) for i in range(1, n + 1)]
    hzz = SqhOperator(n, 0.0, [SqhTerm(-omega, ((i, Z), (j, Z))) for i, j in bonds])
    parts = ((Envelope("one_minus_s"), hx), (Envelope("s"), hzz))
    return Path(parts, "ising", hx, hzz, meta={"n": n, "omega": omega})


def straight_line_path(hi: SqhOperator, hf: SqhOperator, label: str = "straight", conserved_sector=None) -> Path:
    if hi.n_qubits != hf.n_qubits:
        raise ContractViolation("initial and final Hamiltonians act on different qubit counts")
    parts = ((Envelope("one_minus_s"), hi), (Envelope("s"), hf))
    return Path(parts, label, hi, hf, conserved_sector)


def nonlinear_smooth_path(
    hi: SqhOperator,
    hf: SqhOperator,
    reduced: SqhOperator,
    alpha: float,
    label: str = "nonlinear",
    conserved_sector=None,
) -> Path:
    """Straight line plus ``alpha s (1 - s) H_{m-1}``."""
    if not hi.n_qubits == hf.n_qubits == reduced.n_qubits:
        raise ContractViolation("operators act on different qubit counts")
    parts = ((Envelope("one_minus_s"), hi), (Envelope("s"), hf), (Envelope("bump", (float(alpha),)), reduced))
    return Path(parts, label, hi, hf, conserved_sector, meta={"alpha": float(alpha)})


def nonlinear_path_for(
    hi: SqhOperator,
    inst: Ec3Instance,
    alpha: float,
    removed: Clause | None = None,
    omega: float = 1.0,
    label: str = "nonlinear",
    conserved_sector=None,
) -> Path:
    """Nonlinear path whose bump is the instance minus one removable clause.

    Defaults to the first removable clause.
    """
    allowed = removable_clauses(inst)
    if removed is None:
        if not allowed:
            raise ValidationError("instance has no clause that can be removed without disconnecting it")
        removed = allowed[0]
    elif not isinstance(removed, Clause):
        removed = Clause.of(removed)
    if removed not in allowed:
        raise ValidationError(f"clause {removed.bits} is not removable (allowed: {[c.bits for c in allowed]})")
    reduced = final_hamiltonian(inst.without(removed), omega)
    path = nonlinear_smooth_path(hi, final_hamiltonian(inst, omega), reduced, alpha, label, conserved_sector)
    path.meta["removed_clause"] = list(removed.bits)
    return path


def clause_by_clause_path(
    hi: SqhOperator,
    inst: Ec3Instance,
    omega: float = 1.0,
    order: Sequence[int] | None = None,
    label: str = "clause_by_clause",
    conserved_sector=None,
) -> Path:
    """Straight line plus ``H_d(s)`` switching clause penalties on one segment at a time.

    On segment ``k`` (``s_k = m s - k + 1`` in ``[0, 1)``)
    ``H_d = (1 - s_k) H_{k-1} + s_k H_k`` where ``H_j`` holds the first ``j``
    clauses of ``order`` (0-based positions into ``inst.clauses``) and
    ``H_0 = H_m = 0``.
    """
    m = inst.m
    if order is None:
        order = list(range(m))
    order = [int(i) for i in order]
    if sorted(order) != list(range(m)):
        raise ValidationError(f"clause order must be a permutation of 0..{m - 1}, got {order}")
    hf = final_hamiltonian(inst, omega)
    partial = [None]  # partial[j] = H_j for 1 <= j <= m-1
    for j in range(1, m):
        sub = Ec3Instance(inst.n, tuple(inst.clauses[i] for i in order[:j]))
        partial.append(final_hamiltonian(sub, omega))
    parts = [(Envelope("one_minus_s"), hi), (Envelope("s"), hf)]
    for k in range(1, m + 1):
        if 1 <= k - 1 <= m - 1:
            parts.append((Envelope("clause_ramp", (k, m, False)), partial[k - 1]))
        if k <= m - 1:
            parts.append((Envelope("clause_ramp", (k, m, True)), partial[k]))
    path = Path(tuple(parts), label, hi, hf, conserved_sector, meta={"clause_order": order})
    return path


def initial_hamiltonian(algorithm: str, inst: Ec3Instance, omega: float = 1.0) -> SqhOperator:
    builders = {"x": h_x_initial, "xyz": h_xyz_initial, "xy": h_xy_initial}
    try:
        return builders[algorithm](inst, omega)
    except KeyError:
        raise ValidationError(f"unknown algorithm {algorithm!r}; expected one of {sorted(builders)}") from None


def build_path(
    algorithm: str,
    kind: str,
    inst: Ec3Instance | None = None,
    omega: float = 1.0,
    alpha: float = 8.0,
    removed_clause=None,
    clause_order=None,
    n: int | None = None,
) -> Path:
    """Construct a path from a run-config style descriptor."""
    if algorithm == "ising":
        if kind != "straight":
            raise ValidationError("the Ising benchmark only has a straight-line path")
        if n is None:
            raise ContractViolation("Ising path needs n")
        return ising_path(n, omega)
    if inst is None:
        raise ContractViolation(f"algorithm {algorithm!r} needs an EC3 instance")
    hi = initial_hamiltonian(algorithm, inst, omega)
    sector = None
    if algorithm in ("xy", "xyz"):
        sector = bin(inst.solution()).count("1")
    label = f"{algorithm}-{kind}"
    if kind == "straight":
        return straight_line_path(hi, final_hamiltonian(inst, omega), label, sector)
    if kind == "nonlinear":
        return nonlinear_path_for(hi, inst, alpha, removed_clause, omega, label, sector)
    if kind == "clause_by_clause":
        return clause_by_clause_path(hi, inst, omega, clause_order, label, sector)
    raise ValidationError(f"unknown path kind {kind!r}")

