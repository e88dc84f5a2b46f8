"""Adiabatic quantum computation lab: SQH operators, state-vector evolution,
EC3 instances, interpolation paths and low-lying spectra."""
from ._kernels import BACKEND
from .ec3 import Clause, Ec3Instance, final_hamiltonian, generate_hard_instance, read_instance, write_instance
from .errors import (
    AqcError,
    ContractViolation,
    DivergenceError,
    GenerationError,
    NumericalError,
    ResourceLimitError,
    SolverError,
    ValidationError,
)
from .integrator import EvolutionSpec, TimeDependentHamiltonian, evolve
from .paths import Path, build_path, hamiltonian_at
from .spectra import gap_curve, ground_state, lowest_eigs, min_gap
from .sqh import PauliAxis, SqhOperator, SqhTerm, parse_operator, format_operator, term, to_dense
from .state import StateVector, basis_state, dicke_state, energy_expectation, sector_map, uniform_superposition

__version__ = "0.1.0"
