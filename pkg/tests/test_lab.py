import json
import math
import subprocess
import sys

import numpy as np
import pytest

from aqclab.ec3 import generate_hard_instance, write_instance
from aqclab.errors import ValidationError
from aqclab.lab import experiments as ex
from aqclab.lab.cli import main
from aqclab.lab.config import PathSpec, RunConfig, SearchSpec, load_config, save_config

INST = generate_hard_instance(7, 5)


def cfg_for(tmp_path, **kw):
    write_instance(tmp_path / "inst.ec3", INST)
    data = {"instance": {"file": "inst.ec3"}, "output_dir": "out"}
    data.update(kw)
    (tmp_path / "run.json").write_text(json.dumps(data))
    return tmp_path / "run.json"


def test_config_roundtrip_and_validation(tmp_path):
    path = cfg_for(tmp_path, path={"algorithm": "x", "path": "nonlinear", "alpha": 4})
    cfg = load_config(path)
    assert cfg.instance.file == str(tmp_path / "inst.ec3")
    assert cfg.path.name == "x-nonlinear-a4"
    save_config(cfg, tmp_path / "again.json")
    assert load_config(tmp_path / "again.json").to_dict() == cfg.to_dict()
    with pytest.raises(ValidationError):
        RunConfig.from_dict({"bogus": 1})
    with pytest.raises(ValidationError):
        RunConfig.from_dict({"path": {"algorithm": "quantum"}})
    with pytest.raises(ValidationError):
        RunConfig.from_dict({"search": {"t0": 1}})


def test_worker_env_override(monkeypatch):
    cfg = RunConfig(workers=3)
    assert cfg.worker_count() == 3
    monkeypatch.setenv("AQCLAB_THREADS", "1")
    assert cfg.worker_count() == 1


def test_derive_seed_is_stable():
    assert ex.derive_seed(0, 7, 1) == ex.derive_seed(0, 7, 1)
    assert ex.derive_seed(0, 7, 1) != ex.derive_seed(0, 7, 2)


def test_prepared_states():
    cfg = RunConfig()
    w = INST.solution()
    for alg in ("x", "xyz", "xy"):
        prep = ex.prepare(cfg, PathSpec(alg), INST)
        prep.psi0.check_normalized(1e-10)
        assert prep.ground_indices == (w,)
        if alg != "x":
            assert prep.sector == bin(w).count("1")
            # initial state is the ground state of the driver inside the sector
            e0 = float(np.vdot(prep.psi0.amplitudes, prep.path.initial.apply(prep.psi0.amplitudes)).real)
            from aqclab.spectra import lowest_eigs

            assert e0 == pytest.approx(lowest_eigs(prep.path.initial, 1, prep.sector).eigenvalues[0], abs=1e-9)
    ising = ex.prepare(RunConfig(), PathSpec("ising"), None, n=5)
    assert ising.ground_energy == -5.0 and ising.ground_indices == (0, 31)


def test_runtime_search_certificate():
    cfg = RunConfig(search=SearchSpec(t_start=1.0, rel_tol=0.05))
    res = ex.successful_runtime(cfg, PathSpec("xy"), INST)
    assert not res.censored and res.valid
    assert res.energy <= 0.5
    by_t = {p.T: p for p in res.probes}
    assert by_t[res.T_fail].energy > 0.5
    assert res.T_s / res.T_fail <= 1 + 2 * 0.05
    assert res.p1 >= 0.5 - 1e-9
    assert len(res.checksum) == 64


@pytest.mark.slow
def test_runtime_search_shrinks_from_above():
    cfg = RunConfig(search=SearchSpec(t_start=64.0, rel_tol=0.1))
    res = ex.successful_runtime(cfg, PathSpec("xy", "nonlinear"), INST)
    assert res.T_s < 64 and res.T_fail < res.T_s


def test_runtime_search_censoring():
    cfg = RunConfig(search=SearchSpec(t_start=0.5, t_cap=2.0))
    res = ex.successful_runtime(cfg, PathSpec("x"), INST)
    assert res.censored and res.T_s == 2.0


@pytest.mark.slow
def test_scan_hamming_finds_solution_sector():
    cfg = RunConfig(scan_hamming=True, t_list=[4.0])
    res = ex.successful_runtime(cfg, PathSpec("xyz"), INST)
    assert res.probes[-1].sector is not None
    assert all(p.sector == bin(INST.solution()).count("1") for p in res.probes if p.energy <= 0.5)


def test_energy_vs_runtime_rows_and_bound():
    cfg = RunConfig(omega=1.0)
    rows = ex.energy_vs_runtime(cfg, [0.0, 2.0, 8.0], [PathSpec("x"), PathSpec("xy")], INST)
    assert len(rows) == 6
    for label, T, e, p1, leak, steps in rows:
        assert e >= (1 - p1) - 1e-9
    # T = 0 is the initial state's energy under the final Hamiltonian
    from aqclab.ec3 import clause_penalties

    pen = clause_penalties(INST)
    assert rows[0][2] == pytest.approx(pen.mean())


@pytest.mark.slow
def test_long_runtime_reaches_ground_state():
    rows = ex.energy_vs_runtime(RunConfig(), [60.0], [PathSpec("xy", "nonlinear")], INST)
    assert rows[0][2] < 0.05


def test_gap_report_sectors():
    cfg = RunConfig(grid=21)
    curves, summary = ex.gap_report(cfg, variants=[PathSpec("xy"), PathSpec("x"), PathSpec("ising")], inst=INST)
    labels = [r[0] for r in summary]
    assert labels == ["xy-straight", "x-straight", "ising-straight"]
    assert [r[3] for r in summary] == [f"hamming={bin(INST.solution()).count('1')}", "full", "parity=+1"]


def test_gap_report_requires_instance_size_for_ising():
    with pytest.raises(ValidationError):
        ex.gap_report(RunConfig(grid=5), variants=[PathSpec("ising")])


def test_quartiles_and_power_law():
    q1, med, q3 = ex.quartiles([1.0, 2.0, 3.0, 4.0])
    assert (q1, med, q3) == (1.75, 2.5, 3.25)
    assert ex.quartiles([5.0]) == (5.0, 5.0, 5.0)
    assert ex.fit_power_law([1, 2, 4], [3, 12, 48]) == pytest.approx(2.0)


def test_scaling_study_single_instance_degenerates():
    cfg = RunConfig()
    cfg.scaling.n_list = [7]
    cfg.scaling.instances_per_n = 1
    cfg.scaling.algorithms = ["xy"]
    per, records = ex.scaling_study(cfg)
    assert len(per) == 1 and len(records) == 1
    r = records[0]
    assert r.median == r.q1 == r.q3 == per[0][4].T_s


def test_csv_format(tmp_path):
    ex.write_csv(tmp_path / "a.csv", ["x", "y"], [(0.1, "a,b"), (1e-20, 3)])
    data = (tmp_path / "a.csv").read_bytes()
    assert b"\r" not in data
    assert data == b'x,y\n0.1,"a,b"\n1e-20,3\n'


def _run_cli(args, cwd):
    return subprocess.run([sys.executable, "-m", "aqclab.lab.cli", *args], cwd=cwd, capture_output=True, text=True)


def test_cli_gen_and_errors(tmp_path):
    assert main(["gen", "--n", "7", "--seed", "3", "--out", str(tmp_path / "g.ec3")]) == 0
    assert (tmp_path / "g.ec3").read_text().startswith("ec3 7 ")
    (tmp_path / "bad.json").write_text('{"instance": {"file": "missing.ec3"}}')
    assert main(["runtime", "--config", str(tmp_path / "bad.json")]) == 2
    (tmp_path / "bad2.json").write_text("{not json")
    assert main(["gap", "--config", str(tmp_path / "bad2.json")]) == 2


@pytest.mark.slow
def test_cli_outputs_are_deterministic(tmp_path):
    cfg = cfg_for(
        tmp_path,
        variants=[{"algorithm": "xy"}, {"algorithm": "xy", "path": "clause_by_clause"}],
        t_list=[1.0, 3.0],
        total_time=2.0,
        samples=10,
        grid=11,
        scaling={"n_list": [7], "instances_per_n": 2, "algorithms": ["xy"]},
        search={"rel_tol": 0.2},
    )
    outputs = []
    for run in range(2):
        out = tmp_path / f"o{run}"
        for cmd in (["evolve"], ["runtime"], ["sweep"], ["gap", "--grid", "11"], ["scaling"]):
            assert main([cmd[0], "--config", str(cfg), "--out-dir", str(out), *cmd[1:]]) == 0
        outputs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
    assert outputs[0] == outputs[1]
    assert set(outputs[0]) >= {"runtime.csv", "energy_vs_runtime.csv", "gap_summary.csv", "scaling.csv", "scaling_instances.csv"}
    manifest = json.loads((tmp_path / "o0" / "manifest.json").read_text())
    assert "linear" in manifest["scaling"]["quartile_method"]


def test_cli_module_entry_point(tmp_path):
    proc = _run_cli(["gen", "--n", "7", "--seed", "1", "--out", "x.ec3"], tmp_path)
    assert proc.returncode == 0, proc.stderr
    proc = _run_cli(["--help"], tmp_path)
    assert "scaling" in proc.stdout
