import math

import numpy as np
import pytest

from aqclab.errors import ContractViolation, DivergenceError, NumericalError
from aqclab.integrator import (
    EvolutionSpec,
    FusedOperator,
    TimeDependentHamiltonian,
    default_dt,
    evolve,
    rhs,
    shift_integral,
)
from aqclab.sqh import SqhOperator, linear_combine, term, to_dense
from aqclab.state import StateVector, basis_state, uniform_superposition

from oracles import dense_oracle, magnus4_propagator, random_operator

HI = SqhOperator(2, 0.3, [term(1.0, "x1"), term(0.7, "x2"), term(0.4, "y1 y2")])
HF = SqhOperator(2, -0.2, [term(1.3, "z1"), term(-0.9, "z1 z2"), term(0.5, "x1 z2")])


def one_minus_s(s):
    return 1.0 - s


def identity(s):
    return s


def two_qubit_problem(T=2.0):
    return TimeDependentHamiltonian(((one_minus_s, HI), (identity, HF)), T)


def oracle_state(T=2.0, steps=4000):
    A, B = dense_oracle(HI), dense_oracle(HF)
    U = magnus4_propagator(lambda t: (1 - t / T) * A + (t / T) * B, T, steps)
    return U @ basis_state(2, 0).amplitudes


def test_rabi_rotation():
    H = TimeDependentHamiltonian(((lambda s: 1.0, SqhOperator(1, 0.0, [term(1.0, "x1")])),), math.pi / 2)
    psi, diag = evolve(basis_state(1, 0), H, EvolutionSpec(dt=1e-3))
    assert abs(abs(psi.amplitudes[1]) ** 2 - 1) < 1e-8
    assert diag.bootstrap_steps == 3
    # one rhs per multistep step, four per RK4 bootstrap step, plus the initial one
    assert diag.rhs_evaluations == 1 + 4 * 3 + (diag.steps - 3)


def test_fourth_order_convergence_against_magnus_oracle():
    ref = oracle_state()
    errs = []
    for dt in (4e-3, 2e-3, 1e-3):
        psi, _ = evolve(basis_state(2, 0), two_qubit_problem(), EvolutionSpec(dt=dt))
        errs.append(np.linalg.norm(psi.amplitudes - ref))
    ratios = [errs[i] / errs[i + 1] for i in range(2)]
    assert all(12 <= r <= 20 for r in ratios), ratios
    assert errs[-1] < 1e-10


def test_global_phase_of_shift_is_exact():
    # a pure shift only rotates the phase
    H = TimeDependentHamiltonian(((identity, SqhOperator(1, 3.0, [])), (lambda s: 1.0, SqhOperator(1, 0.0, [term(0.0, "x1")]))), 2.0)
    psi, _ = evolve(basis_state(1, 0), H, EvolutionSpec(dt=0.01))
    # int_0^2 3 t/2 dt = 3
    assert abs(psi.amplitudes[0] - np.exp(-3j)) < 1e-12
    assert shift_integral(H, 2.0) == pytest.approx(3.0, abs=1e-12)


def test_time_independent_matches_expm():
    from scipy.linalg import expm

    rng = np.random.default_rng(2)
    op = random_operator(rng, 3, 8)
    H = TimeDependentHamiltonian(((lambda s: 1.0, op),), 1.5)
    psi0 = uniform_superposition(3)
    psi, _ = evolve(psi0, H, EvolutionSpec(dt=1e-3))
    ref = expm(-1.5j * dense_oracle(op)) @ psi0.amplitudes
    assert np.linalg.norm(psi.amplitudes - ref) < 1e-9


def test_zero_runtime_returns_copy():
    H = two_qubit_problem(T=0.0)
    psi0 = basis_state(2, 1)
    psi, diag = evolve(psi0, H)
    assert np.array_equal(psi.amplitudes, psi0.amplitudes) and psi is not psi0
    assert diag.steps == 0


def test_contract_checks():
    with pytest.raises(ContractViolation):
        evolve(basis_state(3, 0), two_qubit_problem())
    with pytest.raises(ContractViolation):
        evolve(StateVector(2, np.array([1, 1, 0, 0], dtype=complex)), two_qubit_problem())
    with pytest.raises(ContractViolation):
        evolve(basis_state(2, 0), two_qubit_problem(T=1.0), EvolutionSpec(dt=2.0))
    with pytest.raises(ContractViolation):
        TimeDependentHamiltonian((), 1.0)
    with pytest.raises(ContractViolation):
        TimeDependentHamiltonian(((identity, HI),), -1.0)


def test_divergence_is_reported_with_step():
    H = two_qubit_problem(T=50.0)
    with pytest.raises(DivergenceError) as info:
        evolve(basis_state(2, 0), H, EvolutionSpec(dt=0.5, norm_tolerance=1e-6))
    assert info.value.step is not None and info.value.drift > 1e-6
    psi, diag = evolve(basis_state(2, 0), H, EvolutionSpec(dt=0.5, norm_tolerance=1e-6, renormalize=True))
    assert abs(psi.norm_squared() - 1) < 1e-6
    assert diag.max_norm_drift > 1e-6


def test_non_finite_envelope_raises():
    H = TimeDependentHamiltonian(((lambda s: float("nan") if s > 0.5 else 1.0, HI),), 1.0)
    with pytest.raises(NumericalError):
        evolve(basis_state(2, 0), H, EvolutionSpec(dt=0.01))


def test_norm_drift_small_at_moderate_step():
    # ||H|| dt ~ 0.02 over 1e5 steps
    norm = max(np.linalg.norm(to_dense(linear_combine([(1 - s, HI), (s, HF)])), 2) for s in np.linspace(0, 1, 11))
    dt = 0.02 / norm
    H = two_qubit_problem(T=dt * 1e5)
    psi, diag = evolve(basis_state(2, 0), H, EvolutionSpec(dt=dt, norm_tolerance=1.0))
    assert diag.steps == 100_000
    assert diag.norm_drift < 1e-6


def test_default_dt_rule():
    H = two_qubit_problem()
    e_max = max(linear_combine([(1 - s, HI), (s, HF)]).weight_bound() for s in (0, 0.5, 1))
    assert default_dt(H) == pytest.approx(min(1e-2, 0.05 / e_max))


def test_rhs_matches_dense():
    H = two_qubit_problem()
    psi = uniform_superposition(2)
    out = rhs(H, psi, 0.5)
    h = 0.75 * dense_oracle(HI) + 0.25 * dense_oracle(HF)
    assert np.allclose(out.amplitudes, -1j * h @ psi.amplitudes)
    with pytest.raises(ContractViolation):
        rhs(H, psi, 3.0)


def test_fused_operator_matches_linear_combination():
    rng = np.random.default_rng(4)
    ops = [random_operator(rng, 4, 10) for _ in range(3)]
    fused = FusedOperator(ops)
    coeffs = np.array([0.3, -1.2, 0.7])
    v = rng.normal(size=16) + 1j * rng.normal(size=16)
    out = np.empty_like(v)
    fused.apply(coeffs, v, out)
    ref = linear_combine(list(zip(coeffs, ops))).apply(v)
    assert np.allclose(out, ref, atol=1e-12)


def test_breakpoints_restart_and_observer():
    class Kink:
        breakpoints = (0.5,)

        def __call__(self, s):
            return min(s, 0.5)

    H = TimeDependentHamiltonian(((one_minus_s, HI), (Kink(), HF)), 1.0)
    seen = []
    psi, diag = evolve(basis_state(2, 0), H, EvolutionSpec(dt=0.01), observer=lambda t, p: seen.append(t), observe_every=10)
    assert diag.segments == 2 and diag.bootstrap_steps == 6
    assert seen[0] == 0.0 and seen[-1] == 1.0
    assert len(seen) == 2 + (diag.steps - 1) // 10


def test_checkpoint_resume_reproduces_result(tmp_path):
    H = two_qubit_problem()
    spec = EvolutionSpec(dt=1e-2, checkpoint_every=50, checkpoint_dir=str(tmp_path))
    full, diag = evolve(basis_state(2, 0), H, spec)
    assert diag.checkpoints
    resumed, diag2 = evolve(basis_state(2, 0), H, EvolutionSpec(dt=1e-2), resume_from=diag.checkpoints[1])
    assert np.array_equal(resumed.amplitudes, full.amplitudes)
    assert diag2.steps == diag.steps
