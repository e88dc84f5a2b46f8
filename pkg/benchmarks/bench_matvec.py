"""Compare the compiled and numpy matvec kernels.

Times ``apply_terms`` (full space) and ``apply_terms_sector`` on the
instance-derived Hamiltonians that dominate evolutions and gap scans, and
checks that both backends return identical arrays.

    python benchmarks/bench_matvec.py --n 8 10 12 14 --repeat 20
"""
from __future__ import annotations

import argparse
import importlib
import json
import time

import numpy as np

from aqclab._kernels import _pykernels
from aqclab.ec3 import generate_hard_instance
from aqclab.paths import build_path, hamiltonian_at
from aqclab.state import sector_map


def _time(fn, repeat):
    fn()  # warm-up
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(n: int, repeat: int, backends: dict) -> list[dict]:
    inst = generate_hard_instance(n, 0)
    path = build_path("xy", "straight", inst)
    op = hamiltonian_at(path, 0.5)
    c = op.compiled
    rng = np.random.default_rng(0)
    rows = []

    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    outs = {}
    for name, mod in backends.items():
        out = np.empty_like(v)
        t = _time(lambda: mod.apply_terms(c.flip, c.mask, c.coef, op.shift, v, out), repeat)
        outs[name] = out.copy()
        rows.append({"kernel": "full", "n": n, "dim": 1 << n, "terms": len(c.flip), "backend": name, "seconds": t})
    _check(outs)

    smap = sector_map(n, path.conserved_sector)
    v = rng.normal(size=len(smap)) + 1j * rng.normal(size=len(smap))
    outs = {}
    for name, mod in backends.items():
        out = np.empty_like(v)
        t = _time(lambda: mod.apply_terms_sector(smap.indices, c.flip, c.mask, c.coef, op.shift, v, out), repeat)
        outs[name] = out.copy()
        rows.append({"kernel": "sector", "n": n, "dim": len(smap), "terms": len(c.flip), "backend": name, "seconds": t})
    _check(outs)
    return rows


def _check(outs):
    vals = list(outs.values())
    for other in vals[1:]:
        if not np.array_equal(vals[0], other):
            raise AssertionError("backends disagree")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--n", type=int, nargs="+", default=[8, 10, 12, 14])
    ap.add_argument("--repeat", type=int, default=10)
    ap.add_argument("--json", help="also write results to this file")
    args = ap.parse_args(argv)

    backends = {"numpy": _pykernels}
    try:
        backends["cython"] = importlib.import_module("aqclab._kernels._ckernels")
    except ImportError:
        print("compiled extension not available; timing the numpy backend only")

    rows = []
    for n in args.n:
        rows += bench(n, args.repeat, backends)

    print(f"{'kernel':7} {'n':>3} {'dim':>7} {'terms':>6} " + " ".join(f"{b:>12}" for b in backends) + "   speedup")
    for kernel in ("full", "sector"):
        for n in args.n:
            sel = {r["backend"]: r for r in rows if r["kernel"] == kernel and r["n"] == n}
            first = next(iter(sel.values()))
            times = " ".join(f"{sel[b]['seconds'] * 1e3:10.3f}ms" for b in backends)
            speed = sel["numpy"]["seconds"] / sel["cython"]["seconds"] if "cython" in sel else float("nan")
            print(f"{kernel:7} {n:>3} {first['dim']:>7} {first['terms']:>6} {times}   {speed:6.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
