"""Experiment drivers: single evolutions, runtime search, sweeps, gaps, scaling."""
from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .. import _kernels
from ..ec3 import Clause, Ec3Instance, generate_hard_instance, read_instance, write_instance
from ..errors import ContractViolation, DivergenceError, ValidationError
from ..integrator import EvolutionSpec, default_dt, evolve
from ..paths import Path as AdiabaticPath
from ..paths import build_path, hamiltonian_at
from ..spectra import gap_curve, ground_state, min_gap
from ..sqh import SqhOperator
from ..state import StateVector, dicke_state, energy_expectation, sector_leakage, uniform_superposition
from .config import PathSpec, RunConfig

QUARTILE_METHOD = "linear interpolation between order statistics (numpy 'linear', inclusive)"
LEAKAGE_LIMIT = 1e-8
DT_REFINEMENTS = 4  # halvings of dt tried when an evolution exceeds the norm tolerance


def derive_seed(master: int, *keys: int) -> int:
    """Deterministic 63-bit seed from a master seed and integer keys."""
    state = np.random.SeedSequence([int(master), *(int(k) for k in keys)]).generate_state(1, np.uint64)
    return int(state[0] >> np.uint64(1))


def write_csv(path, header, rows):
    """RFC-4180 CSV with LF line endings and shortest round-trip floats."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def write_manifest(outdir, name: str, payload: dict):
    path = Path(outdir) / "manifest.json"
    data = json.loads(path.read_text()) if path.exists() else {}
    data[name] = payload
    data["backend"] = _kernels.BACKEND
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=str) + "\n")


def state_checksum(psi: StateVector) -> str:
    return hashlib.sha256(psi.amplitudes.astype("<c16").tobytes()).hexdigest()


@dataclass
class Prepared:
    spec: PathSpec
    path: AdiabaticPath
    psi0: StateVector
    final: SqhOperator
    ground_indices: tuple
    ground_energy: float
    instance: Optional[Ec3Instance] = None
    sector: Optional[int] = None


def resolve_instance(cfg: RunConfig, persist_dir=None) -> Optional[Ec3Instance]:
    """Load or generate the configured instance; generated ones are written to disk first."""
    src = cfg.instance
    if src.file:
        return read_instance(src.file)
    if src.n is None:
        return None
    if src.seed is None:
        raise ValidationError("instance source needs either 'file' or both 'n' and 'seed'")
    inst = generate_hard_instance(int(src.n), int(src.seed))
    if persist_dir is not None:
        Path(persist_dir).mkdir(parents=True, exist_ok=True)
        write_instance(Path(persist_dir) / f"instance_n{src.n}_s{src.seed}.ec3", inst)
    return inst


def _clause_order(spec: PathSpec, inst: Ec3Instance):
    if spec.clause_order is not None:
        return list(spec.clause_order)
    if spec.clause_order_seed is not None:
        rng = np.random.Generator(np.random.PCG64(spec.clause_order_seed))
        return [int(i) for i in rng.permutation(inst.m)]
    return None


def prepare(
    cfg: RunConfig,
    spec: PathSpec,
    inst: Optional[Ec3Instance],
    n: Optional[int] = None,
    sector: Optional[int] = None,
) -> Prepared:
    """Build the path, the initial state and the success target for one algorithm."""
    omega = cfg.omega
    if spec.algorithm == "ising":
        if n is None:
            n = cfg.instance.n if cfg.instance.n is not None else getattr(inst, "n", None)
        if n is None:
            raise ValidationError("the Ising benchmark needs instance.n")
        path = build_path("ising", spec.path, n=int(n), omega=omega)
        return Prepared(spec, path, uniform_superposition(int(n)), path.final, (0, (1 << int(n)) - 1), -omega * int(n))

    if inst is None:
        raise ValidationError(f"algorithm {spec.algorithm!r} needs an EC3 instance")
    w = inst.solution()
    removed = Clause.of(spec.removed_clause) if spec.removed_clause else None
    path = build_path(
        spec.algorithm,
        spec.path,
        inst,
        omega=omega,
        alpha=spec.alpha,
        removed_clause=removed,
        clause_order=_clause_order(spec, inst),
    )
    if spec.algorithm == "x":
        psi0 = uniform_superposition(inst.n)
    else:
        delta = bin(w).count("1") if sector is None else sector
        path = AdiabaticPath(path.parts, path.label, path.initial, path.final, delta, path.meta)
        if spec.algorithm == "xyz":
            psi0 = dicke_state(inst.n, delta)
        else:
            _, psi0 = ground_state(path.initial, delta, tol=cfg.eig_tol, seed=cfg.master_seed)
        sector = delta
    return Prepared(spec, path, psi0, path.final, (w,), 0.0, inst, sector)


@dataclass
class Probe:
    T: float
    energy: float  # residual energy <H_f> - E_ground, units of Omega
    p1: float
    leakage: float
    steps: int
    norm_drift: float
    checksum: str
    sector: Optional[int] = None
    dt: float = 0.0

    def valid(self) -> bool:
        return not (self.leakage >= LEAKAGE_LIMIT)


def run_probe(cfg: RunConfig, prep: Prepared, T: float) -> tuple[Probe, StateVector]:
    """Evolve the prepared initial state over runtime ``T`` at constant speed.

    If the norm drifts past the tolerance, the run is repeated with dt halved
    (at most ``DT_REFINEMENTS`` times) before the error is propagated.
    """
    it = cfg.integrator
    H = prep.path.time_dependent(float(T))
    dt = min(it.dt, T) if it.dt is not None else (default_dt(H) if T > 0 else None)
    for attempt in range(DT_REFINEMENTS + 1):
        spec = EvolutionSpec(dt=dt, norm_tolerance=it.norm_tolerance, renormalize=it.renormalize)
        try:
            psiT, diag = evolve(prep.psi0, H, spec)
            break
        except DivergenceError as exc:
            if attempt == DT_REFINEMENTS:
                raise DivergenceError(f"T = {T!r}: {exc}", step=exc.step, drift=exc.drift) from exc
            dt *= 0.5
    energy = energy_expectation(psiT, prep.final, norm_tol=max(1e-9, 2 * it.norm_tolerance)) - prep.ground_energy
    p1 = float(sum(abs(psiT.amplitudes[g]) ** 2 for g in prep.ground_indices))
    leak = sector_leakage(psiT, prep.sector) if prep.sector is not None else float("nan")
    probe = Probe(float(T), energy, p1, leak, diag.steps, diag.norm_drift, state_checksum(psiT), prep.sector, diag.dt)
    return probe, psiT


def _probe_scanning(cfg, spec, inst, T) -> Probe:
    """Run every Hamming sector and keep the lowest final energy."""
    best = None
    for delta in range(inst.n + 1):
        prep = prepare(cfg, spec, inst, sector=delta)
        p, _ = run_probe(cfg, prep, T)
        if best is None or p.energy < best.energy:
            best = p
    return best


@dataclass
class RuntimeSearchResult:
    label: str
    T_s: float
    energy: float
    p1: float
    T_fail: float
    censored: bool
    checksum: str
    leakage: float
    valid: bool
    probes: list = field(default_factory=list)

    @property
    def total_steps(self) -> int:
        return sum(p.steps for p in self.probes)


def successful_runtime(cfg: RunConfig, spec: PathSpec | None = None, inst: Ec3Instance | None = None, n: int | None = None) -> RuntimeSearchResult:
    """Smallest probed ``T`` with residual energy ``<= Omega/2``.

    Doubles ``T`` from ``t_start`` until the criterion holds (or halves it until
    it fails), then bisects geometrically until ``(T_s - T_fail) / T_fail <= rel_tol``.
    """
    spec = spec or cfg.path
    if inst is None and spec.algorithm != "ising":
        inst = resolve_instance(cfg)
    search = cfg.search
    threshold = 0.5 * cfg.omega
    prep = None if cfg.scan_hamming else prepare(cfg, spec, inst, n=n)
    probes: dict[float, Probe] = {}

    def probe(T):
        if T not in probes:
            if cfg.scan_hamming and spec.algorithm in ("xy", "xyz"):
                probes[T] = _probe_scanning(cfg, spec, inst, T)
            else:
                p = prep or prepare(cfg, spec, inst, n=n)
                probes[T] = run_probe(cfg, p, T)[0]
        return probes[T]

    def ok(T):
        return probe(T).energy <= threshold

    T = float(search.t_start)
    censored = False
    if ok(T):
        T_s, T_fail = T, 0.0
        while T_s / search.growth >= search.t_min:
            lower = T_s / search.growth
            if ok(lower):
                T_s = lower
            else:
                T_fail = lower
                break
    else:
        T_fail = T
        T_s = None
        while True:
            upper = T_fail * search.growth
            if upper > search.t_cap:
                censored = True
                break
            if ok(upper):
                T_s = upper
                break
            T_fail = upper
    if censored:
        last = probes[T_fail]
        probes_list = [probes[k] for k in sorted(probes)]
        return RuntimeSearchResult(spec.name, float(search.t_cap), last.energy, last.p1, T_fail, True, last.checksum, last.leakage, last.valid(), probes_list)

    while T_fail > 0 and (T_s - T_fail) / T_fail > search.rel_tol:
        mid = math.sqrt(T_fail * T_s)
        if ok(mid):
            T_s = mid
        else:
            T_fail = mid
    best = probes[T_s]
    probes_list = [probes[k] for k in sorted(probes)]
    valid = all(p.valid() for p in probes_list)
    return RuntimeSearchResult(spec.name, T_s, best.energy, best.p1, T_fail, False, best.checksum, best.leakage, valid, probes_list)


def evolution_series(cfg: RunConfig, spec: PathSpec | None = None, inst: Ec3Instance | None = None):
    """Energy and solution probability sampled along one evolution of length ``total_time``."""
    spec = spec or cfg.path
    if inst is None and spec.algorithm != "ising":
        inst = resolve_instance(cfg)
    prep = prepare(cfg, spec, inst)
    T = float(cfg.total_time)
    H = prep.path.time_dependent(T)
    it = cfg.integrator
    dt = it.dt if it.dt is not None else (default_dt(H) if T > 0 else 0.0)
    rows = []

    def observe(t, psi):
        e = float(np.vdot(psi.amplitudes, prep.final.apply(psi.amplitudes)).real) - prep.ground_energy
        p1 = float(sum(abs(psi.amplitudes[g]) ** 2 for g in prep.ground_indices))
        leak = sector_leakage(psi, prep.sector) if prep.sector is not None else float("nan")
        rows.append((t, t / T if T > 0 else 0.0, e, p1, psi.norm_squared(), leak))

    every = max(1, math.ceil(T / dt / max(1, cfg.samples))) if T > 0 else None
    spec_ev = EvolutionSpec(dt=min(dt, T) if T > 0 else None, norm_tolerance=it.norm_tolerance, renormalize=it.renormalize)
    psiT, diag = evolve(prep.psi0, H, spec_ev, observer=observe, observe_every=every)
    return rows, psiT, diag, prep


def energy_vs_runtime(cfg: RunConfig, t_list=None, variants=None, inst: Ec3Instance | None = None):
    """Rows ``(label, T, E_f, P1, leakage, steps)`` for every path variant and runtime."""
    t_list = list(cfg.t_list if t_list is None else t_list)
    variants = variants or cfg.path_variants()
    if inst is None and any(v.algorithm != "ising" for v in variants):
        inst = resolve_instance(cfg)
    rows = []
    for spec in variants:
        prep = prepare(cfg, spec, inst)
        for T in t_list:
            p, _ = run_probe(cfg, prep, float(T))
            rows.append((spec.name, float(T), p.energy, p.p1, p.leakage, p.steps))
    return rows


def gap_symmetry(cfg: RunConfig, prep: Prepared) -> dict:
    choice = cfg.gap_sector
    if choice == "full":
        return {}
    if isinstance(choice, int) and not isinstance(choice, bool):
        return {"sector": choice}
    if choice != "auto":
        raise ValidationError(f"gap_sector must be 'auto', 'full' or an integer, got {choice!r}")
    if prep.spec.algorithm in ("xy", "xyz"):
        return {"sector": prep.sector}
    if prep.spec.algorithm == "ising":
        return {"parity": 1}
    return {}


def gap_report(cfg: RunConfig, grid: int | None = None, variants=None, inst: Ec3Instance | None = None):
    """Gap curves for each variant; returns ``(curves, summary_rows)``."""
    grid = int(grid or cfg.grid)
    variants = variants or cfg.path_variants()
    if inst is None and any(v.algorithm != "ising" for v in variants):
        inst = resolve_instance(cfg)
    s_grid = np.linspace(0.0, 1.0, grid)
    curves, summary = {}, []
    for spec in variants:
        prep = prepare(cfg, spec, inst)
        sym = gap_symmetry(cfg, prep)
        curve = gap_curve(prep.path, s_grid, sym.get("sector"), parity=sym.get("parity"), seed=cfg.master_seed)
        curves[spec.name] = curve
        s_star, dmin = min_gap(curve)
        summary.append((spec.name, s_star, dmin, _symmetry_label(sym)))
    return curves, summary


def _symmetry_label(sym: dict) -> str:
    if "sector" in sym:
        return f"hamming={sym['sector']}"
    if "parity" in sym:
        return f"parity={sym['parity']:+d}"
    return "full"


@dataclass
class ScalingRecord:
    algorithm: str
    n: int
    runtimes: list
    censored: list
    median: float
    q1: float
    q3: float


def quartiles(values) -> tuple[float, float, float]:
    q1, med, q3 = np.percentile(np.asarray(values, dtype=float), [25, 50, 75], method="linear")
    return float(q1), float(med), float(q3)


def _scaling_task(args):
    cfg_dict, algorithm, n, index, persist_dir = args
    cfg = RunConfig.from_dict(cfg_dict)
    spec = PathSpec(algorithm=algorithm, path="straight")
    if algorithm == "ising":
        res = successful_runtime(cfg, spec, n=n)
        return (algorithm, n, index, -1, res)
    seed = derive_seed(cfg.master_seed, n, index)
    inst = generate_hard_instance(n, seed)
    if persist_dir is not None:
        write_instance(Path(persist_dir) / f"ec3_n{n}_i{index}.ec3", inst)
    return (algorithm, n, index, seed, successful_runtime(cfg, spec, inst))


def scaling_study(cfg: RunConfig, n_list=None, instances_per_n=None, algorithms=None, persist_dir=None):
    """Successful runtimes per instance and per-``n`` median/quartile records."""
    sc = cfg.scaling
    n_list = list(n_list or sc.n_list)
    per_n = int(instances_per_n or sc.instances_per_n)
    algorithms = list(algorithms or sc.algorithms)
    if persist_dir is not None:
        Path(persist_dir).mkdir(parents=True, exist_ok=True)
    cfg_dict = cfg.to_dict()
    tasks = []
    for alg in algorithms:
        for n in n_list:
            count = 1 if alg == "ising" else per_n
            tasks += [(cfg_dict, alg, int(n), i, persist_dir) for i in range(count)]
    workers = cfg.worker_count()
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_scaling_task, tasks))
    else:
        results = [_scaling_task(t) for t in tasks]
    results.sort(key=lambda r: (r[0], r[1], r[2]))

    per_instance = []
    records = []
    for alg in algorithms:
        for n in n_list:
            rs = [r for r in results if r[0] == alg and r[1] == n]
            per_instance += rs
            ts = [r[4].T_s for r in rs if not (sc.exclude_censored and r[4].censored)]
            if not ts:
                continue
            q1, med, q3 = quartiles(ts)
            records.append(ScalingRecord(alg, n, [r[4].T_s for r in rs], [r[4].censored for r in rs], med, q1, q3))
    return per_instance, records


def fit_power_law(xs, ys) -> float:
    """Exponent ``b`` of the least-squares fit ``log y = a + b log x``."""
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    if len(xs) < 2 or np.any(xs <= 0) or np.any(ys <= 0):
        raise ContractViolation("power-law fit needs at least two positive points")
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def probe_rows(res: RuntimeSearchResult):
    return [(res.label, p.T, p.energy, p.p1, p.leakage, p.steps, p.energy <= 0.5) for p in res.probes]


def result_summary(res: RuntimeSearchResult) -> dict:
    d = asdict(res)
    d.pop("probes")
    d["total_steps"] = res.total_steps
    return d
