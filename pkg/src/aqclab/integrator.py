"""Fixed-step fourth-order integration of ``i d/dt psi = H(t/T) psi`` (hbar = 1).

The scheme is Adams-Bashforth (4 step) predictor plus Adams-Moulton (3 step)
corrector, with the derivative at the predicted point reused as history for
the next step, so each step costs one application of ``H``.  Three classical
RK4 steps supply the starting history, and the integrator restarts at every
envelope breakpoint because the multistep history is not valid across a kink.

The scalar part ``c(t) I`` of ``H`` is integrated analytically: the state is
propagated under ``H - c(t)`` and multiplied by ``exp(-i int c dt)`` whenever
it is handed out.  This changes only a global phase but removes the shift from
the stiffness bound, which matters for shifted operators such as ``3 m Omega``.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.integrate

from . import _kernels
from .errors import ContractViolation, DivergenceError, NumericalError
from .sqh import CompiledTerms, SqhOperator, SqhTerm, linear_combine
from .state import StateVector, read_state, write_state

Envelope = Callable[[float], float]

_AB = np.array([55.0, -59.0, 37.0, -9.0]) / 24.0
_AM = np.array([9.0, 19.0, -5.0, 1.0]) / 24.0


class FusedOperator:
    """All parts of a time-dependent Hamiltonian merged onto one term list.

    ``coeffs @ table`` gives the per-term weights at a given set of envelope
    values, so one kernel call applies the off-diagonal part of ``H(s)``.
    Diagonal (Z-only) terms are tabulated as one diagonal per part when that
    fits in ``DIAGONAL_TABLE_LIMIT`` entries, otherwise they stay in the kernel.
    """

    DIAGONAL_TABLE_LIMIT = 1 << 24

    def __init__(self, ops: Sequence[SqhOperator]):
        self.n_qubits = ops[0].n_qubits
        dim = 1 << self.n_qubits
        tabulate = len(ops) * dim <= self.DIAGONAL_TABLE_LIMIT
        keys: dict = {}
        for op in ops:
            for t in op.terms:
                if not (tabulate and t.flip_mask == 0):
                    keys.setdefault(t.key, t.factors)
        order = sorted(keys)
        col = {k: j for j, k in enumerate(order)}
        self.table = np.zeros((len(ops), len(order)))
        self.shifts = np.array([op.shift for op in ops], dtype=np.float64)
        self.diagonals = np.zeros((len(ops), dim)) if tabulate else None
        z = np.arange(dim, dtype=np.uint64) if tabulate else None
        for i, op in enumerate(ops):
            for t in op.terms:
                if tabulate and t.flip_mask == 0:
                    parity = np.bitwise_count(z & np.uint64(t.sign_mask)) & 1
                    self.diagonals[i] += t.weight * (1.0 - 2.0 * parity)
                else:
                    self.table[i, col[t.key]] = t.weight
        self.compiled = CompiledTerms.from_terms([SqhTerm(1.0, keys[k]) for k in order])

    def shift(self, coeffs: np.ndarray) -> float:
        return float(coeffs @ self.shifts)

    def apply(self, coeffs: np.ndarray, vec: np.ndarray, out: np.ndarray, include_shift: bool = True) -> np.ndarray:
        c = self.compiled
        shift = self.shift(coeffs) if include_shift else 0.0
        if len(c.flip):
            _kernels.apply_terms(c.flip, c.mask, (coeffs @ self.table) * c.unit, shift, vec, out)
        else:
            np.multiply(vec, shift, out=out)
        if self.diagonals is not None:
            out += (coeffs @ self.diagonals) * vec
        return out


@dataclass(frozen=True)
class TimeDependentHamiltonian:
    """``H(t) = sum_k envelope_k(t / T) * op_k`` for ``0 <= t <= T``.

    Envelopes may carry a ``breakpoints`` attribute listing interior values of
    ``s`` where they are not smooth; the integrator restarts there.
    """

    parts: tuple
    total_time: float

    def __post_init__(self):
        parts = tuple((env, op) for env, op in self.parts)
        if not parts:
            raise ContractViolation("a Hamiltonian needs at least one part")
        n = parts[0][1].n_qubits
        if any(op.n_qubits != n for _, op in parts):
            raise ContractViolation("all parts must act on the same number of qubits")
        if not (self.total_time >= 0 and math.isfinite(self.total_time)):
            raise ContractViolation(f"total time must be finite and >= 0, got {self.total_time}")
        object.__setattr__(self, "parts", parts)

    @property
    def n_qubits(self) -> int:
        return self.parts[0][1].n_qubits

    @cached_property
    def fused(self) -> FusedOperator:
        return FusedOperator([op for _, op in self.parts])

    @cached_property
    def breakpoints(self) -> tuple[float, ...]:
        pts = set()
        for env, _ in self.parts:
            pts.update(float(b) for b in getattr(env, "breakpoints", ()) if 0.0 < b < 1.0)
        return tuple(sorted(pts))

    def envelope_values(self, s: float) -> np.ndarray:
        vals = np.array([env(s) for env, _ in self.parts], dtype=np.float64)
        if not np.all(np.isfinite(vals)):
            raise NumericalError(f"non-finite envelope value at s = {s!r} (t = {s * self.total_time!r})")
        return vals

    def at(self, s: float) -> SqhOperator:
        vals = self.envelope_values(s)
        return linear_combine([(float(v), op) for v, (_, op) in zip(vals, self.parts)])


@dataclass
class EvolutionSpec:
    dt: Optional[float] = None
    norm_tolerance: float = 1e-6
    renormalize: bool = False
    checkpoint_every: Optional[int] = None
    checkpoint_dir: Optional[str] = None


@dataclass
class EvolutionDiagnostics:
    steps: int = 0
    rhs_evaluations: int = 0
    bootstrap_steps: int = 0
    segments: int = 0
    dt: float = 0.0
    norm_drift: float = 0.0
    max_norm_drift: float = 0.0
    wall_time: float = 0.0
    checkpoints: list = field(default_factory=list)


def default_dt(H: TimeDependentHamiltonian) -> float:
    """``min(1e-2, 0.05 / E_max)`` with ``E_max`` the weight bound ``|shift| + sum |w|``
    maximized over s = 0, 1/2, 1."""
    e_max = max(H.at(s).weight_bound() for s in (0.0, 0.5, 1.0))
    if e_max == 0.0:
        return 1e-2
    return min(1e-2, 0.05 / e_max)


def rhs(H: TimeDependentHamiltonian, psi: StateVector, t: float) -> StateVector:
    """``-i H(t) psi``."""
    T = H.total_time
    if not -1e-12 * max(T, 1.0) <= t <= T * (1 + 1e-12) + 1e-300:
        raise ContractViolation(f"t = {t} outside [0, {T}]")
    if psi.n_qubits != H.n_qubits:
        raise ContractViolation(f"state has {psi.n_qubits} qubits, Hamiltonian has {H.n_qubits}")
    s = min(max(t / T, 0.0), 1.0) if T > 0 else 0.0
    out = np.empty_like(psi.amplitudes)
    H.fused.apply(H.envelope_values(s), psi.amplitudes, out)
    out *= -1j
    return StateVector(psi.n_qubits, out)


class _Stepper:
    def __init__(self, H: TimeDependentHamiltonian, diag: EvolutionDiagnostics):
        self.H = H
        self.T = H.total_time
        self.fused = H.fused
        self.diag = diag

    def f(self, t: float, y: np.ndarray) -> np.ndarray:
        self.diag.rhs_evaluations += 1
        s = min(max(t / self.T, 0.0), 1.0)
        out = np.empty_like(y)
        self.fused.apply(self.H.envelope_values(s), y, out, include_shift=False)
        out *= -1j
        return out

    def rk4(self, t, y, k1, h):
        k2 = self.f(t + 0.5 * h, y + (0.5 * h) * k1)
        k3 = self.f(t + 0.5 * h, y + (0.5 * h) * k2)
        k4 = self.f(t + h, y + h * k3)
        return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def abm(self, t, y, hist, h):
        # hist[0] = f_n, hist[1] = f_{n-1}, ...
        pred = y + h * (_AB[0] * hist[0] + _AB[1] * hist[1] + _AB[2] * hist[2] + _AB[3] * hist[3])
        fp = self.f(t + h, pred)
        y_new = y + h * (_AM[0] * fp + _AM[1] * hist[0] + _AM[2] * hist[1] + _AM[3] * hist[2])
        return y_new, fp


def _segments(H: TimeDependentHamiltonian) -> list[tuple[float, float]]:
    T = H.total_time
    edges = [0.0] + [b * T for b in H.breakpoints] + [T]
    return [(a, b) for a, b in zip(edges, edges[1:]) if b > a]


def shift_integral(H: TimeDependentHamiltonian, t_end: float) -> float:
    """``int_0^t_end c(t) dt`` for the scalar part ``c`` of ``H``, segment by segment."""
    fused = H.fused
    if not np.any(fused.shifts) or t_end <= 0.0:
        return 0.0
    T = H.total_time

    def c(t):
        return fused.shift(H.envelope_values(min(max(t / T, 0.0), 1.0)))

    total = 0.0
    for a, b in _segments(H):
        if a >= t_end:
            break
        total += scipy.integrate.quad(c, a, min(b, t_end), epsabs=1e-13, epsrel=1e-13, limit=200)[0]
    return total


def evolve(
    psi0: StateVector,
    H: TimeDependentHamiltonian,
    spec: EvolutionSpec | None = None,
    observer: Callable[[float, StateVector], None] | None = None,
    observe_every: int | None = None,
    resume_from: str | Path | None = None,
) -> tuple[StateVector, EvolutionDiagnostics]:
    """Integrate from ``t = 0`` to ``t = T`` and return ``(psi(T), diagnostics)``.

    ``observer(t, psi)`` is called at ``t = 0``, every ``observe_every`` steps and
    at ``t = T``; it must not modify ``psi``.
    """
    spec = spec or EvolutionSpec()
    if psi0.n_qubits != H.n_qubits:
        raise ContractViolation(f"state has {psi0.n_qubits} qubits, Hamiltonian has {H.n_qubits}")
    psi0.check_normalized()
    T = H.total_time
    diag = EvolutionDiagnostics()
    start = time.perf_counter()
    if T == 0.0:
        if observer is not None:
            observer(0.0, psi0)
        diag.wall_time = time.perf_counter() - start
        return psi0.copy(), diag

    dt = spec.dt if spec.dt is not None else default_dt(H)
    if not 0.0 < dt <= T:
        raise ContractViolation(f"dt must satisfy 0 < dt <= T, got dt={dt}, T={T}")
    diag.dt = dt
    norm0 = psi0.norm_squared()
    stepper = _Stepper(H, diag)
    n = psi0.n_qubits
    segments = _segments(H)
    diag.segments = len(segments)

    y = psi0.amplitudes.copy()
    seg_start, j_start, hist = 0, 0, None
    if resume_from is not None:
        y, seg_start, j_start, hist, diag.steps = _load_checkpoint(resume_from, n)
    elif observer is not None:
        observer(0.0, StateVector(n, y))

    def lab_frame(t, y):
        phi = shift_integral(H, t)
        return y * np.exp(-1j * phi) if phi else y.copy()

    for si in range(seg_start, len(segments)):
        ta, tb = segments[si]
        nsteps = max(1, math.ceil((tb - ta) / dt - 1e-9))
        h = (tb - ta) / nsteps
        j0 = j_start if si == seg_start else 0
        if hist is None or j0 == 0:
            hist = [stepper.f(ta + j0 * h, y)]
        for j in range(j0, nsteps):
            t = ta + j * h
            t_next = tb if j == nsteps - 1 else ta + (j + 1) * h
            if j < 3:
                y = stepper.rk4(t, y, hist[0], h)
                diag.bootstrap_steps += 1
                hist.insert(0, stepper.f(t_next, y))
            else:
                y, fp = stepper.abm(t, y, hist, h)
                hist.insert(0, fp)
            del hist[4:]
            diag.steps += 1

            nrm = float(np.vdot(y, y).real)
            if not math.isfinite(nrm):
                raise NumericalError(f"non-finite amplitude at step {diag.steps} (t = {t_next!r})")
            drift = abs(nrm - norm0)
            diag.max_norm_drift = max(diag.max_norm_drift, drift)
            if drift > spec.norm_tolerance:
                if not spec.renormalize:
                    raise DivergenceError(
                        f"norm drift {drift:.3e} exceeds {spec.norm_tolerance:.1e} at step {diag.steps} (t = {t_next!r})",
                        step=diag.steps,
                        drift=drift,
                    )
                y *= math.sqrt(norm0 / nrm)
            if observer is not None and observe_every and diag.steps % observe_every == 0 and not (
                si == len(segments) - 1 and j == nsteps - 1
            ):
                observer(t_next, StateVector(n, lab_frame(t_next, y)))
            if spec.checkpoint_every and spec.checkpoint_dir and diag.steps % spec.checkpoint_every == 0:
                diag.checkpoints.append(
                    _write_checkpoint(spec.checkpoint_dir, diag.steps, t_next, si, j + 1, y, hist, n)
                )
        hist = None

    psiT = StateVector(n, lab_frame(T, y))
    if observer is not None:
        observer(T, psiT)
    diag.norm_drift = abs(1.0 - psiT.norm_squared())
    diag.wall_time = time.perf_counter() - start
    return psiT, diag


def _write_checkpoint(directory, step, t, segment, seg_step, y, hist, n) -> str:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    stem = f"ckpt_{step:09d}"
    write_state(d / f"{stem}.state", StateVector(n, y))
    hist_files = []
    for k, fk in enumerate(hist):
        name = f"{stem}.f{k}.state"
        # derivatives are not normalized; the dump format does not care
        write_state(d / name, StateVector(n, fk))
        hist_files.append(name)
    # y is stored in the shift-free frame; the global phase is recomputed on resume
    meta = {"t": t, "step": step, "segment": segment, "segment_step": seg_step, "frame": "shift-free", "history": hist_files}
    (d / f"{stem}.json").write_text(json.dumps(meta, indent=1))
    return str(d / f"{stem}.json")


def _load_checkpoint(sidecar, n):
    sidecar = Path(sidecar)
    meta = json.loads(sidecar.read_text())
    y = read_state(sidecar.with_suffix(".state")).amplitudes.copy()
    if y.shape[0] != 1 << n:
        raise ContractViolation("checkpoint does not match the Hamiltonian's qubit count")
    hist = [read_state(sidecar.parent / name).amplitudes.copy() for name in meta["history"]]
    return y, meta["segment"], meta["segment_step"], hist, meta["step"]
