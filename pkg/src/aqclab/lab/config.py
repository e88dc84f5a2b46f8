"""Run configuration (JSON document) for the experiment harness.

Relative ``instance.file`` and ``output_dir`` are resolved against the config
file's directory.  Schema (every key optional)::

    {
      "instance": {"file": "inst.ec3"} | {"n": 8, "seed": 3},
      "path": {"algorithm": "x|xyz|xy|ising", "path": "straight|nonlinear|clause_by_clause",
               "alpha": 8.0, "removed_clause": [i, j, k], "clause_order": [..],
               "clause_order_seed": null, "label": null},
      "variants": [<path descriptor>, ...],      # sweep/gap: paths compared side by side
      "omega": 1.0,
      "integrator": {"dt": null, "norm_tolerance": 1e-6, "renormalize": false},
      "search": {"t_start": 1.0, "growth": 2.0, "rel_tol": 0.05, "t_cap": 10000.0, "t_min": 0.001},
      "total_time": 10.0, "samples": 100,       # evolve
      "t_list": [1, 2, 4],                      # sweep
      "grid": 101, "gap_sector": "auto",        # gap: "auto" | "full" | <Hamming weight>
      "scaling": {"n_list": [6, 7, 8], "instances_per_n": 10, "algorithms": ["xy"],
                  "exclude_censored": false},
      "scan_hamming": false,
      "eig_tol": 1e-10,
      "output_dir": "out",
      "master_seed": 0,
      "workers": 1
    }
"""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from ..errors import ValidationError


@dataclass
class InstanceSource:
    file: Optional[str] = None
    n: Optional[int] = None
    seed: Optional[int] = None


@dataclass
class PathSpec:
    algorithm: str = "xy"
    path: str = "straight"
    alpha: float = 8.0
    removed_clause: Optional[list] = None
    clause_order: Optional[list] = None
    clause_order_seed: Optional[int] = None
    label: Optional[str] = None

    def __post_init__(self):
        if self.algorithm not in ("x", "xyz", "xy", "ising"):
            raise ValidationError(f"unknown algorithm {self.algorithm!r}")
        if self.path not in ("straight", "nonlinear", "clause_by_clause"):
            raise ValidationError(f"unknown path {self.path!r}")

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        if self.path == "nonlinear":
            tag = f"{self.algorithm}-nonlinear-a{self.alpha:g}"
            if self.removed_clause:
                tag += "-r" + "_".join(str(b) for b in self.removed_clause)
            return tag
        return f"{self.algorithm}-{self.path}"


@dataclass
class IntegratorSpec:
    dt: Optional[float] = None
    norm_tolerance: float = 1e-6
    renormalize: bool = False


@dataclass
class SearchSpec:
    t_start: float = 1.0
    growth: float = 2.0
    rel_tol: float = 0.05
    t_cap: float = 1e4
    t_min: float = 1e-3


@dataclass
class ScalingSpec:
    n_list: list = field(default_factory=lambda: [6, 7, 8])
    instances_per_n: int = 10
    algorithms: list = field(default_factory=lambda: ["xy"])
    exclude_censored: bool = False


@dataclass
class RunConfig:
    instance: InstanceSource = field(default_factory=InstanceSource)
    path: PathSpec = field(default_factory=PathSpec)
    variants: list = field(default_factory=list)
    omega: float = 1.0
    integrator: IntegratorSpec = field(default_factory=IntegratorSpec)
    search: SearchSpec = field(default_factory=SearchSpec)
    total_time: float = 10.0
    samples: int = 100
    t_list: list = field(default_factory=lambda: [1.0, 2.0, 4.0, 8.0, 16.0])
    grid: int = 101
    gap_sector: object = "auto"
    scaling: ScalingSpec = field(default_factory=ScalingSpec)
    scan_hamming: bool = False
    eig_tol: float = 1e-10
    output_dir: str = "out"
    master_seed: int = 0
    workers: int = 1

    def path_variants(self) -> list[PathSpec]:
        return list(self.variants) if self.variants else [self.path]

    def worker_count(self) -> int:
        env = os.environ.get("AQCLAB_THREADS")
        if env:
            return max(1, int(env))
        return max(1, int(self.workers))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        nested = {
            "instance": InstanceSource,
            "path": PathSpec,
            "integrator": IntegratorSpec,
            "search": SearchSpec,
            "scaling": ScalingSpec,
        }
        kwargs = {}
        for key, value in data.items():
            if key in nested and isinstance(value, dict):
                try:
                    kwargs[key] = nested[key](**value)
                except TypeError as exc:
                    raise ValidationError(f"config section {key!r}: {exc}") from None
            elif key == "variants":
                kwargs[key] = [PathSpec(**v) if isinstance(v, dict) else v for v in value]
            else:
                kwargs[key] = value
        return cls(**kwargs)


def load_config(path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    cfg = RunConfig.from_dict(data)
    base = Path(path).parent
    if cfg.instance.file and not Path(cfg.instance.file).is_absolute():
        cfg.instance.file = str(base / cfg.instance.file)
    if not Path(cfg.output_dir).is_absolute():
        cfg.output_dir = str(base / cfg.output_dir)
    return cfg


def save_config(cfg: RunConfig, path):
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
