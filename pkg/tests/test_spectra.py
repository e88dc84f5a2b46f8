import numpy as np
import pytest

from aqclab.ec3 import generate_hard_instance
from aqclab.errors import ContractViolation, SolverError, ValidationError
from aqclab.paths import build_path, h_x_initial, hamiltonian_at, ising_path
from aqclab.spectra import GapCurve, gap_curve, ground_state, lowest_eigs, min_gap
from aqclab.sqh import SqhOperator, hamming_weight_operator, term, to_dense
from aqclab.state import sector_map

from oracles import dense_oracle, random_operator


@pytest.mark.parametrize("seed", range(5))
def test_dense_path_matches_numpy(seed):
    op = random_operator(np.random.default_rng(seed), 5, 12)
    ref = np.linalg.eigvalsh(dense_oracle(op))[:3]
    res = lowest_eigs(op, 3)
    assert res.method == "dense"
    assert np.allclose(res.eigenvalues, ref, atol=1e-10)


@pytest.mark.parametrize("n", [6, 8, 10])
def test_lanczos_matches_dense(n):
    h = hamiltonian_at(ising_path(n), 0.4)
    ref = np.linalg.eigvalsh(to_dense(h))[:3]
    res = lowest_eigs(h, 3, dense_threshold=0, tol=1e-10)
    assert res.method == "lanczos"
    assert np.allclose(res.eigenvalues, ref, atol=1e-8)
    assert np.all(res.residuals < 1e-10)


def test_lanczos_resolves_degeneracy():
    # classical Ising ring: doubly degenerate ground state
    h = hamiltonian_at(ising_path(8), 1.0)
    res = lowest_eigs(h, 3, dense_threshold=0)
    assert np.allclose(res.eigenvalues, [-8, -8, -4], atol=1e-8)


def test_lanczos_is_seeded():
    h = hamiltonian_at(ising_path(9), 0.3)
    a = lowest_eigs(h, 2, dense_threshold=0, seed=3)
    b = lowest_eigs(h, 2, dense_threshold=0, seed=3)
    assert np.array_equal(a.eigenvalues, b.eigenvalues)


def test_solver_error_carries_residual():
    h = hamiltonian_at(ising_path(9), 0.5)
    with pytest.raises(SolverError) as info:
        lowest_eigs(h, 1, dense_threshold=0, tol=1e-30, max_restarts=2, max_krylov=5)
    assert info.value.best_residual is not None


@pytest.mark.parametrize("method_threshold", [512, 0])
def test_hamming_sector_matches_block(method_threshold):
    inst = generate_hard_instance(9, 1)
    path = build_path("xy", "straight", inst)
    h = hamiltonian_at(path, 0.6)
    w = path.conserved_sector
    idx = sector_map(9, w).indices.astype(int)
    block = to_dense(h)[np.ix_(idx, idx)]
    ref = np.linalg.eigvalsh(block)[:2]
    res = lowest_eigs(h, 2, sector=w, dense_threshold=method_threshold)
    assert np.allclose(res.eigenvalues, ref, atol=1e-8)


def test_parity_sector_matches_projected_spectrum():
    h = hamiltonian_at(ising_path(6), 0.5)
    full = to_dense(h)
    flip = np.eye(64)[::-1]
    vals, vecs = np.linalg.eigh(full)
    even = [v for v, x in zip(vals, vecs.T) if np.allclose(flip @ x, x, atol=1e-8)]
    res = lowest_eigs(h, 2, parity=1)
    assert np.allclose(res.eigenvalues, even[:2], atol=1e-10)
    res = lowest_eigs(h, 2, parity=1, dense_threshold=0)
    assert np.allclose(res.eigenvalues, even[:2], atol=1e-8)


def test_symmetry_checks():
    h = h_x_initial(generate_hard_instance(7, 0))
    with pytest.raises(ValidationError):
        lowest_eigs(SqhOperator(4, 0.0, [term(1.0, "x1")]), 1, sector=2)
    with pytest.raises(ValidationError):
        lowest_eigs(SqhOperator(4, 0.0, [term(1.0, "z1")]), 1, parity=1)
    with pytest.raises(ContractViolation):
        lowest_eigs(h, 0)
    with pytest.raises(ContractViolation):
        lowest_eigs(hamming_weight_operator(4), 1, sector=1, parity=1)
    with pytest.raises(ValidationError):
        lowest_eigs(hamming_weight_operator(4), 2, sector=0)


def test_ground_state_vector():
    inst = generate_hard_instance(8, 2)
    path = build_path("xy", "straight", inst)
    e, psi = ground_state(path.initial, path.conserved_sector)
    psi.check_normalized(1e-10)
    hv = path.initial.apply(psi.amplitudes)
    assert np.linalg.norm(hv - e * psi.amplitudes) < 1e-8


def test_gap_curve_and_min_gap():
    curve = gap_curve(ising_path(6), np.linspace(0, 1, 21), parity=1)
    assert np.all(curve.gap > 0)
    s_star, g = curve.min_gap
    assert g == curve.gap.min() and 0 < s_star < 1
    with pytest.raises(ContractViolation):
        gap_curve(ising_path(6), [0.5])
    with pytest.raises(ContractViolation):
        gap_curve(ising_path(6), [0.5, 0.2])


def test_min_gap_ties_prefer_smaller_s():
    curve = GapCurve(np.array([0.0, 0.5, 1.0]), np.zeros(3), np.array([1.0, 0.5, 0.5]), np.zeros((3, 2)))
    assert min_gap(curve) == (0.5, 0.5)
