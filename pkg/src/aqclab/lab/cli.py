"""Command-line entry point ``aqclab``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..ec3 import generate_hard_instance, write_instance
from ..errors import AqcError
from . import experiments as ex
from .config import RunConfig, load_config, save_config

log = logging.getLogger("aqclab")


def _outdir(cfg, args) -> Path:
    out = Path(args.out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args):
    cfg = load_config(args.config)
    if getattr(args, "workers", None):
        cfg.workers = args.workers
    if getattr(args, "scan_hamming", False):
        cfg.scan_hamming = True
    return cfg


def cmd_gen(args):
    inst = generate_hard_instance(args.n, args.seed)
    write_instance(args.out, inst)
    log.info("wrote n=%d m=%d instance to %s", inst.n, inst.m, args.out)


def cmd_evolve(args):
    cfg = _load(args)
    out = _outdir(cfg, args)
    rows, psiT, diag, prep = ex.evolution_series(cfg)
    name = f"evolve_{prep.spec.name}.csv"
    ex.write_csv(out / name, ["t", "s", "energy", "p1", "norm", "leakage"], rows)
    ex.write_manifest(out, "evolve", {
        "csv": name,
        "path": prep.spec.name,
        "total_time": cfg.total_time,
        "dt": diag.dt,
        "steps": diag.steps,
        "checksum": ex.state_checksum(psiT),
    })
    log.info("final energy %.6g, P1 %.6g", rows[-1][2], rows[-1][3])


def cmd_runtime(args):
    cfg = _load(args)
    out = _outdir(cfg, args)
    inst = ex.resolve_instance(cfg, persist_dir=out)
    rows, summary = [], []
    for spec in cfg.path_variants():
        res = ex.successful_runtime(cfg, spec, inst)
        rows += ex.probe_rows(res)
        summary.append((res.label, res.T_s, res.T_fail, res.energy, res.p1, res.total_steps, int(res.censored), int(res.valid), res.checksum))
    ex.write_csv(out / "runtime_probes.csv", ["label", "T", "energy", "p1", "leakage", "steps", "success"], rows)
    ex.write_csv(out / "runtime.csv", ["label", "T_s", "T_fail", "energy", "p1", "steps", "censored", "valid", "checksum"], summary)
    ex.write_manifest(out, "runtime", {"criterion": "energy <= omega/2", "search": vars(cfg.search)})
    for r in summary:
        log.info("%s: T_s = %.6g (bracket %.6g), E = %.4g%s", r[0], r[1], r[2], r[3], " [censored]" if r[6] else "")


def cmd_sweep(args):
    cfg = _load(args)
    out = _outdir(cfg, args)
    rows = ex.energy_vs_runtime(cfg)
    ex.write_csv(out / "energy_vs_runtime.csv", ["label", "T", "energy", "p1", "leakage", "steps"], rows)
    ex.write_manifest(out, "sweep", {"t_list": list(cfg.t_list)})


def cmd_gap(args):
    cfg = _load(args)
    out = _outdir(cfg, args)
    curves, summary = ex.gap_report(cfg, grid=args.grid)
    for label, c in curves.items():
        ex.write_csv(out / f"gap_{label}.csv", ["s", "e1", "e2", "gap"], zip(c.s_grid, c.e1, c.e2, c.gap))
    ex.write_csv(out / "gap_summary.csv", ["label", "s_star", "min_gap", "symmetry"], summary)
    ex.write_manifest(out, "gap", {"grid": int(args.grid or cfg.grid), "gap_sector": cfg.gap_sector})
    for r in summary:
        log.info("%s: min gap %.6g at s = %.4g (%s)", r[0], r[2], r[1], r[3])


def cmd_scaling(args):
    cfg = _load(args)
    out = _outdir(cfg, args)
    per_instance, records = ex.scaling_study(cfg, persist_dir=out / "instances")
    ex.write_csv(
        out / "scaling_instances.csv",
        ["algorithm", "n", "index", "seed", "T_s", "T_fail", "energy", "p1", "censored", "valid"],
        [(a, n, i, s, r.T_s, r.T_fail, r.energy, r.p1, int(r.censored), int(r.valid)) for a, n, i, s, r in per_instance],
    )
    ex.write_csv(
        out / "scaling.csv",
        ["algorithm", "n", "count", "median", "q1", "q3", "censored"],
        [(r.algorithm, r.n, len(r.runtimes), r.median, r.q1, r.q3, sum(r.censored)) for r in records],
    )
    ex.write_manifest(out, "scaling", {"quartile_method": ex.QUARTILE_METHOD, "exclude_censored": cfg.scaling.exclude_censored})


def cmd_dump_config(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.out:
        save_config(cfg, args.out)
    else:
        print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aqclab", description="Adiabatic quantum computation experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a hard EC3 instance")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    def with_config(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out-dir", help="override the config's output directory")
        sp.add_argument("--workers", type=int, help="worker processes (AQCLAB_THREADS overrides)")
        sp.set_defaults(func=func)
        return sp

    with_config("evolve", cmd_evolve, "single evolution, energy/P1 time series")
    r = with_config("runtime", cmd_runtime, "successful-runtime search")
    r.add_argument("--scan-hamming", action="store_true", help="try every Hamming sector instead of the solution's")
    with_config("sweep", cmd_sweep, "final energy versus runtime for each path variant")
    gp = with_config("gap", cmd_gap, "gap curves along each path variant")
    gp.add_argument("--grid", type=int, default=None)
    with_config("scaling", cmd_scaling, "runtime scaling study")

    d = sub.add_parser("dump-config", help="print a config with every default filled in")
    d.add_argument("--config")
    d.add_argument("--out", help="write to a file instead of stdout")
    d.set_defaults(func=cmd_dump_config)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except AqcError as exc:
        print(f"aqclab: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"aqclab: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
