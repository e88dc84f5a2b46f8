"""Lowest eigenvalues of SQH operators and gap curves along a path.

Iterative solves use Lanczos with full reorthogonalization.  Eigenpairs are
found one at a time; each run is confined to the orthogonal complement of the
pairs already locked, which keeps degenerate levels from being missed (plain
single-vector Lanczos sees only one copy of a degenerate eigenvalue).

Two symmetry reductions are supported:

* ``sector=Delta`` restricts to basis states of Hamming weight ``Delta``; the
  operator must commute with ``Sigma^z``.  The restricted matvec works on the
  ``binomial(n, Delta)`` sector amplitudes directly.
* ``parity=+1/-1`` restricts to the even/odd eigenspace of the global spin
  flip ``prod_i X_i`` (used for the transverse-field Ising benchmark).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from . import _kernels
from .errors import ContractViolation, SolverError, ValidationError
from .sqh import _PHASES, SqhOperator, hamming_weight_operator, to_dense
from .state import SectorMap, StateVector, sector_map

DENSE_THRESHOLD = 512
MAX_KRYLOV = 300


@dataclass
class EigenResult:
    eigenvalues: np.ndarray
    residuals: np.ndarray
    iterations: int
    method: str
    dim: int
    vectors: Optional[np.ndarray] = field(default=None, repr=False)  # columns, in the reduced space


class _Space:
    """Linear map on the (possibly reduced) space plus the matching projection."""

    def __init__(self, op: SqhOperator, sector: int | None, parity: int | None):
        self.op = op
        self.smap: SectorMap | None = None
        self.parity = parity
        n = op.n_qubits
        if sector is not None and parity is not None:
            raise ContractViolation("choose either a Hamming sector or a parity sector, not both")
        if sector is not None:
            self.smap = sector_map(n, sector)
            self.dim = len(self.smap)
            self.native = self.dim
        elif parity is not None:
            if parity not in (1, -1):
                raise ContractViolation(f"parity must be +1 or -1, got {parity}")
            self.dim = 1 << (n - 1)
            self.native = 1 << n
        else:
            self.dim = self.native = 1 << n

    def apply(self, v: np.ndarray) -> np.ndarray:
        out = np.empty_like(v)
        if self.smap is not None:
            c = self.op.compiled
            _kernels.apply_terms_sector(self.smap.indices, c.flip, c.mask, c.coef, self.op.shift, v, out)
            return out
        return self.op.apply(v, out)

    def project(self, v: np.ndarray) -> np.ndarray:
        if self.parity is None:
            return v
        # prod X maps |z> to |~z>, i.e. reverses the amplitude array
        return 0.5 * (v + self.parity * v[::-1])

    def dense(self) -> tuple[np.ndarray, Optional[np.ndarray]]:
        """Dense matrix on the reduced space and, for parity, the basis (columns in full space)."""
        if self.smap is None:
            full = to_dense(self.op)
            if self.parity is None:
                return full, None
            half = 1 << (self.op.n_qubits - 1)
            basis = np.zeros((self.native, half))
            z = np.arange(half)
            basis[z, z] = np.sqrt(0.5)
            basis[self.native - 1 - z, z] = self.parity * np.sqrt(0.5)
            # B^T H B with H[~a, ~b] == H[a, b]
            reduced = full[:half, :half] + self.parity * full[:half, ::-1][:, :half]
            return reduced, basis
        # one vectorized gather per term; images leaving the sector are dropped
        idx = self.smap.indices
        cols = np.arange(self.dim)
        mat = np.zeros((self.dim, self.dim), dtype=np.complex128)
        mat[cols, cols] = self.op.shift
        for t in self.op.terms:
            img = idx ^ np.uint64(t.flip_mask)
            rows = np.searchsorted(idx, img)
            ok = (rows < self.dim) & (idx[np.minimum(rows, self.dim - 1)] == img)
            parity = np.bitwise_count(idx & np.uint64(t.sign_mask)) & 1
            vals = t.weight * _PHASES[t.n_y % 4] * (1.0 - 2.0 * parity)
            np.add.at(mat, (rows[ok], cols[ok]), vals[ok])
        return mat, None

    def to_full(self, v: np.ndarray) -> StateVector:
        if self.smap is not None:
            return self.smap.embed(v)
        return StateVector(self.op.n_qubits, v)


def _check_sector_symmetry(op: SqhOperator, sector: int | None, parity: int | None):
    if op.n_qubits > 6:
        return
    h = to_dense(op)
    if sector is not None:
        s = to_dense(hamming_weight_operator(op.n_qubits))
        if np.abs(h @ s - s @ h).max() > 1e-10:
            raise ValidationError("operator does not commute with Sigma^z; Hamming sector is not invariant")
    if parity is not None:
        if np.abs(h - h[::-1, ::-1]).max() > 1e-10:
            raise ValidationError("operator does not commute with the global spin flip")


def _orthogonalize(w: np.ndarray, basis: list[np.ndarray]) -> np.ndarray:
    if basis:
        B = np.array(basis)
        for _ in range(2):
            w = w - B.T @ (B.conj() @ w)
    return w


def _lanczos_lowest(space: _Space, locked: list[np.ndarray], rng, tol: float, max_krylov: int, max_restarts: int):
    avail = space.dim - len(locked)
    krylov = max(1, min(max_krylov, avail))
    v = rng.standard_normal(space.native) + 1j * rng.standard_normal(space.native)
    best = np.inf
    iterations = 0
    for _ in range(max_restarts):
        v = _orthogonalize(space.project(v), locked)
        v /= np.linalg.norm(v)
        Q = [v]
        alphas, betas = [], []
        while True:
            w = space.apply(Q[-1])
            iterations += 1
            a = float(np.vdot(Q[-1], w).real)
            alphas.append(a)
            w = _orthogonalize(space.project(w), Q + locked)
            b = float(np.linalg.norm(w))
            j = len(alphas)
            done = j >= krylov or b < 1e-13
            if not done and j % 5 == 0:
                theta, S = scipy.linalg.eigh_tridiagonal(np.array(alphas), np.array(betas), select="i", select_range=(0, 0))
                done = b * abs(S[-1, 0]) < 0.1 * tol
            if done:
                break
            betas.append(b)
            Q.append(w / b)
        if len(alphas) == 1:
            theta, S = np.array([alphas[0]]), np.ones((1, 1))
        else:
            theta, S = scipy.linalg.eigh_tridiagonal(np.array(alphas), np.array(betas), select="i", select_range=(0, 0))
        x = np.array(Q).T @ S[:, 0]
        x = _orthogonalize(space.project(x), locked)
        x /= np.linalg.norm(x)
        hx = space.apply(x)
        lam = float(np.vdot(x, hx).real)
        res = float(np.linalg.norm(hx - lam * x))
        best = min(best, res)
        if res < tol:
            return lam, x, res, iterations
        v = x
    raise SolverError(f"Lanczos did not reach residual {tol:.1e} (best {best:.3e})", best_residual=best)


def lowest_eigs(
    op: SqhOperator,
    k: int = 1,
    sector: int | None = None,
    tol: float = 1e-10,
    *,
    parity: int | None = None,
    seed: int = 0,
    return_vectors: bool = False,
    dense_threshold: int = DENSE_THRESHOLD,
    max_krylov: int = MAX_KRYLOV,
    max_restarts: int = 60,
) -> EigenResult:
    """The ``k`` smallest eigenvalues of ``op``, optionally within a symmetry sector."""
    if k < 1:
        raise ContractViolation(f"k must be >= 1, got {k}")
    space = _Space(op, sector, parity)
    _check_sector_symmetry(op, sector, parity)
    if space.dim < k:
        raise ValidationError(f"sector dimension {space.dim} is smaller than k = {k}")

    if space.dim <= dense_threshold:
        mat, basis = space.dense()
        if np.abs(mat.imag).max(initial=0.0) == 0.0:
            mat = mat.real
        vals, vecs = scipy.linalg.eigh(mat, subset_by_index=[0, k - 1])
        vecs = vecs.astype(np.complex128)
        if basis is not None:
            vecs = basis @ vecs
        res = np.array([np.linalg.norm(space.apply(np.ascontiguousarray(vecs[:, i])) - vals[i] * vecs[:, i]) for i in range(k)])
        return EigenResult(vals, res, 0, "dense", space.dim, vecs if return_vectors else None)

    rng = np.random.Generator(np.random.PCG64(seed))
    locked: list[np.ndarray] = []
    vals, res = [], []
    its = 0
    for _ in range(k):
        lam, x, r, it = _lanczos_lowest(space, locked, rng, tol, max_krylov, max_restarts)
        locked.append(x)
        vals.append(lam)
        res.append(r)
        its += it
    order = np.argsort(vals, kind="stable")
    vecs = np.column_stack(locked)[:, order] if return_vectors else None
    return EigenResult(np.array(vals)[order], np.array(res)[order], its, "lanczos", space.dim, vecs)


def ground_state(op: SqhOperator, sector: int | None = None, tol: float = 1e-10, seed: int = 0) -> tuple[float, StateVector]:
    """Lowest eigenpair, with the vector embedded in the full ``2**n`` space."""
    res = lowest_eigs(op, 1, sector, tol, seed=seed, return_vectors=True)
    space = _Space(op, sector, None)
    psi = space.to_full(res.vectors[:, 0])
    return float(res.eigenvalues[0]), psi.normalized()


@dataclass
class GapCurve:
    s_grid: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    residuals: np.ndarray  # shape (len(s_grid), 2)
    sector: Optional[int] = None
    parity: Optional[int] = None
    label: str = ""

    @property
    def gap(self) -> np.ndarray:
        return self.e2 - self.e1

    @property
    def min_gap(self) -> tuple[float, float]:
        return min_gap(self)


def gap_curve(
    path,
    s_grid: Sequence[float],
    sector: int | None = None,
    tol: float = 1e-9,
    *,
    parity: int | None = None,
    seed: int = 0,
) -> GapCurve:
    """Lowest two eigenvalues of ``H(s)`` on every grid point."""
    from .paths import hamiltonian_at

    grid = np.asarray(s_grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2:
        raise ContractViolation("a gap curve needs at least two grid points")
    if np.any(np.diff(grid) <= 0) or grid[0] < 0 or grid[-1] > 1:
        raise ContractViolation("grid must be strictly ascending within [0, 1]")
    e1, e2, res = [], [], []
    for s in grid:
        try:
            r = lowest_eigs(hamiltonian_at(path, float(s)), 2, sector, tol, parity=parity, seed=seed)
        except SolverError as exc:
            raise SolverError(f"at s = {s!r}: {exc}", best_residual=exc.best_residual) from exc
        e1.append(r.eigenvalues[0])
        e2.append(r.eigenvalues[1])
        res.append(r.residuals)
    return GapCurve(grid, np.array(e1), np.array(e2), np.array(res), sector, parity, getattr(path, "label", ""))


def min_gap(curve: GapCurve) -> tuple[float, float]:
    """Grid argmin of the gap; ties go to the smaller ``s``."""
    gap = curve.gap
    i = int(np.argmin(gap))
    return float(curve.s_grid[i]), float(gap[i])
