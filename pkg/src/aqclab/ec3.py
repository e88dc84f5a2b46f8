"""3-bit exact cover (EC3) instances.

A clause ``(i, j, k)`` is satisfied by ``z`` iff exactly one of bits ``i, j, k``
is set.  Unsatisfied clauses contribute ``Omega * (1 - z_i - z_j - z_k)**2`` to
the diagonal problem Hamiltonian.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ContractViolation, GenerationError, ResourceLimitError, ValidationError
from .sqh import PauliAxis, SqhOperator, SqhTerm

EXHAUSTIVE_LIMIT = 30
_CHUNK = 1 << 20


@dataclass(frozen=True, order=True)
class Clause:
    """Three distinct 1-based bit indices, stored ascending."""

    bits: tuple[int, int, int]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if len(bits) != 3 or len(set(bits)) != 3:
            raise ValidationError(f"a clause needs three distinct bits, got {self.bits}")
        if min(bits) < 1:
            raise ValidationError(f"bit indices are 1-based, got {self.bits}")
        object.__setattr__(self, "bits", tuple(sorted(bits)))

    @classmethod
    def of(cls, *bits) -> "Clause":
        if len(bits) == 1:
            bits = tuple(bits[0])
        return cls(tuple(bits))

    def __iter__(self):
        return iter(self.bits)

    @property
    def mask(self) -> int:
        return sum(1 << (b - 1) for b in self.bits)

    @property
    def edges(self) -> tuple[tuple[int, int], ...]:
        return tuple(combinations(self.bits, 2))


def clause_satisfied(c: Clause, z: int, n: int | None = None) -> bool:
    if z < 0 or (n is not None and (z >= 1 << n or c.bits[-1] > n)):
        raise ContractViolation(f"clause {c.bits} or index {z} out of range")
    return sum((z >> (b - 1)) & 1 for b in c.bits) == 1


@dataclass(frozen=True)
class Ec3Instance:
    n: int
    clauses: tuple[Clause, ...]
    known_solution: Optional[int] = None

    def __post_init__(self):
        clauses = tuple(c if isinstance(c, Clause) else Clause.of(c) for c in self.clauses)
        if self.n < 3:
            raise ValidationError(f"need at least 3 bits, got n = {self.n}")
        if len(set(clauses)) != len(clauses):
            raise ValidationError("duplicate clauses")
        for c in clauses:
            if c.bits[-1] > self.n:
                raise ValidationError(f"clause {c.bits} refers to a bit beyond n = {self.n}")
        if self.known_solution is not None and not 0 <= self.known_solution < (1 << self.n):
            raise ValidationError(f"solution {self.known_solution} out of range")
        object.__setattr__(self, "clauses", clauses)

    @property
    def m(self) -> int:
        return len(self.clauses)

    def without(self, clause: Clause) -> "Ec3Instance":
        return Ec3Instance(self.n, tuple(c for c in self.clauses if c != clause), self.known_solution)

    def solution(self) -> int:
        """The known solution, or the brute-force one if it is unique."""
        if self.known_solution is not None:
            return self.known_solution
        sols = solutions(self)
        if len(sols) != 1:
            raise ValidationError(f"instance has {len(sols)} solutions; no unique solution to report")
        return int(sols[0])


@dataclass
class InstanceStats:
    n_i: np.ndarray  # length n + 1, index 0 unused
    n_ij: dict = field(default_factory=dict)  # (i, j) with i < j -> count
    m: int = 0


def instance_stats(inst: Ec3Instance) -> InstanceStats:
    n_i = np.zeros(inst.n + 1, dtype=np.int64)
    n_ij: dict = {}
    for c in inst.clauses:
        for b in c.bits:
            n_i[b] += 1
        for e in c.edges:
            n_ij[e] = n_ij.get(e, 0) + 1
    return InstanceStats(n_i, dict(sorted(n_ij.items())), inst.m)


def _satisfied_mask(clauses: Sequence[Clause], z: np.ndarray) -> np.ndarray:
    ok = np.ones(z.shape, dtype=bool)
    for c in clauses:
        ok &= np.bitwise_count(z & np.uint64(c.mask)) == 1
    return ok


def solutions(inst: Ec3Instance) -> np.ndarray:
    """All satisfying assignments in increasing order (exhaustive)."""
    if inst.n > EXHAUSTIVE_LIMIT:
        raise ResourceLimitError(f"exhaustive enumeration is limited to {EXHAUSTIVE_LIMIT} bits")
    found = []
    for lo in range(0, 1 << inst.n, _CHUNK):
        z = np.arange(lo, min(lo + _CHUNK, 1 << inst.n), dtype=np.uint64)
        found.append(z[_satisfied_mask(inst.clauses, z)])
    return np.concatenate(found)


def count_solutions(inst: Ec3Instance, cap: int | None = None) -> int:
    """Number of satisfying assignments; with ``cap`` the result is ``min(count, cap)``."""
    if inst.n > EXHAUSTIVE_LIMIT and cap is None:
        raise ResourceLimitError(f"exhaustive counting is limited to {EXHAUSTIVE_LIMIT} bits; pass a cap")
    total = 0
    for lo in range(0, 1 << inst.n, _CHUNK):
        z = np.arange(lo, min(lo + _CHUNK, 1 << inst.n), dtype=np.uint64)
        total += int(np.count_nonzero(_satisfied_mask(inst.clauses, z)))
        if cap is not None and total >= cap:
            return cap
    return total


def clause_penalties(inst: Ec3Instance) -> np.ndarray:
    """Integer penalty ``sum_c (1 - bits in c)**2`` for every basis index."""
    z = np.arange(1 << inst.n, dtype=np.uint64)
    pen = np.zeros(1 << inst.n, dtype=np.int64)
    for c in inst.clauses:
        k = np.bitwise_count(z & np.uint64(c.mask)).astype(np.int64)
        pen += (1 - k) ** 2
    return pen


def final_hamiltonian(inst: Ec3Instance, omega: float = 1.0) -> SqhOperator:
    """``Omega m - Omega sum n_i/2 Z_i + Omega sum_{i<j} n_ij/2 Z_i Z_j``."""
    st = instance_stats(inst)
    terms = [SqhTerm(-omega * st.n_i[i] / 2, ((i, PauliAxis.Z),)) for i in range(1, inst.n + 1) if st.n_i[i]]
    terms += [SqhTerm(omega * c / 2, ((i, PauliAxis.Z), (j, PauliAxis.Z))) for (i, j), c in st.n_ij.items()]
    return SqhOperator(inst.n, omega * inst.m, terms)


def _connected_cover(n: int, clauses: Iterable[Clause]) -> bool:
    parent = list(range(n + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    covered = set()
    for c in clauses:
        a, b, d = c.bits
        covered.update(c.bits)
        ra = find(a)
        for x in (b, d):
            rx = find(x)
            if rx != ra:
                parent[rx] = ra
    if len(covered) != n:
        return False
    return len({find(i) for i in range(1, n + 1)}) == 1


def is_connected(inst: Ec3Instance) -> bool:
    """Every bit appears in some clause and the clause hypergraph is connected."""
    return _connected_cover(inst.n, inst.clauses)


def removable_clauses(inst: Ec3Instance) -> list[Clause]:
    """Clauses whose removal keeps all bits covered and the hypergraph connected."""
    if inst.m < 2:
        return []
    return [c for c in inst.clauses if _connected_cover(inst.n, (d for d in inst.clauses if d != c))]


def clause_budget(n: int) -> int:
    """Largest clause count the generator accepts before restarting."""
    return min(math.ceil(2 * n / 3) + 2, math.floor(0.9 * n))


def generate_hard_instance(
    n: int, seed: int, max_restarts: int = 10_000, max_clauses: int | None = None
) -> Ec3Instance:
    """Random connected EC3 instance with a unique satisfying assignment.

    Clauses are drawn from a shrinking pool.  A candidate must share at least
    one bit with the current graph and no pair of bits with an accepted clause.
    Once every bit is covered, a clause that leaves no solution is discarded;
    generation stops at exactly one solution and restarts if the pool runs dry
    or the clause budget is used up.  Randomness comes from numpy's PCG64.
    """
    if n < 4:
        raise ContractViolation(f"generator needs n >= 4, got {n}")
    if n > EXHAUSTIVE_LIMIT:
        raise ResourceLimitError(f"solution counting is exhaustive; n <= {EXHAUSTIVE_LIMIT}")
    budget = clause_budget(n) if max_clauses is None else max_clauses
    rng = np.random.Generator(np.random.PCG64(seed))
    all_clauses = [Clause(b) for b in combinations(range(1, n + 1), 3)]
    z = np.arange(1 << n, dtype=np.uint64)

    for attempt in range(1, max_restarts + 1):
        pool = list(all_clauses)
        first = pool.pop(int(rng.integers(len(pool))))
        chosen = [first]
        vertices = set(first.bits)
        used_edges = set(first.edges)
        alive = None  # boolean mask of assignments satisfying `chosen`, once all bits are covered
        while True:
            pool = [c for c in pool if not used_edges.intersection(c.edges)]
            eligible = [i for i, c in enumerate(pool) if vertices.intersection(c.bits)]
            if not eligible:
                break
            cand = pool.pop(eligible[int(rng.integers(len(eligible)))])
            if len(vertices | set(cand.bits)) == n:
                ok = _satisfied_mask([cand], z)
                if alive is None:
                    ok &= _satisfied_mask(chosen, z)
                else:
                    ok &= alive
                count = int(np.count_nonzero(ok))
                if count == 0:
                    continue
                alive = ok
            chosen.append(cand)
            vertices.update(cand.bits)
            used_edges.update(cand.edges)
            if alive is not None and count == 1:
                sol = int(np.flatnonzero(alive)[0])
                return Ec3Instance(n, tuple(chosen), known_solution=sol)
            if len(chosen) >= budget:
                break
    raise GenerationError(f"no unique-solution instance for n = {n} after {max_restarts} attempts", attempts=max_restarts)


def format_instance(inst: Ec3Instance) -> str:
    lines = [f"ec3 {inst.n} {inst.m}"]
    if inst.known_solution is not None:
        lines.append(f"solution {inst.known_solution}")
    lines += [" ".join(str(b) for b in c.bits) for c in inst.clauses]
    return "\n".join(lines) + "\n"


def parse_instance(text: str) -> Ec3Instance:
    lines = [(i, ln.split()) for i, ln in enumerate(text.splitlines(), start=1) if ln.strip()]
    if not lines:
        raise ValidationError("empty instance file")
    lineno, head = lines[0]
    if len(head) != 3 or head[0] != "ec3":
        raise ValidationError(f"line {lineno}: expected 'ec3 <n> <m>'")
    try:
        n, m = int(head[1]), int(head[2])
    except ValueError:
        raise ValidationError(f"line {lineno}: n and m must be integers") from None
    body = lines[1:]
    solution = None
    if body and body[0][1][0] == "solution":
        lineno, toks = body[0]
        if len(toks) != 2:
            raise ValidationError(f"line {lineno}: expected 'solution <z>'")
        solution = int(toks[1])
        if not 0 <= solution < (1 << n):
            raise ValidationError(f"line {lineno}: solution {solution} out of range for n = {n}")
        body = body[1:]
    if len(body) != m:
        raise ValidationError(f"header announces {m} clauses, found {len(body)}")
    clauses = []
    seen = {}
    for lineno, toks in body:
        if len(toks) != 3:
            raise ValidationError(f"line {lineno}: a clause has exactly three indices")
        try:
            bits = tuple(int(t) for t in toks)
        except ValueError:
            raise ValidationError(f"line {lineno}: non-integer index") from None
        if any(not 1 <= b <= n for b in bits):
            raise ValidationError(f"line {lineno}: index out of range [1, {n}]")
        if list(bits) != sorted(bits):
            raise ValidationError(f"line {lineno}: indices must be ascending")
        try:
            c = Clause(bits)
        except ValidationError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from None
        if c in seen:
            raise ValidationError(f"line {lineno}: duplicate of clause on line {seen[c]}")
        seen[c] = lineno
        clauses.append(c)
    if solution is not None:
        bad = [c.bits for c in clauses if not clause_satisfied(c, solution)]
        if bad:
            raise ValidationError(f"stated solution {solution} violates clauses {bad}")
    return Ec3Instance(n, tuple(clauses), known_solution=solution)


def read_instance(path) -> Ec3Instance:
    return parse_instance(Path(path).read_text())


def write_instance(path, inst: Ec3Instance):
    Path(path).write_text(format_instance(inst))
