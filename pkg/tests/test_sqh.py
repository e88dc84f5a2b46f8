import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aqclab.errors import ContractViolation, ValidationError
from aqclab.sqh import (
    PauliAxis,
    SqhOperator,
    SqhTerm,
    apply_term,
    decompose_dense,
    format_operator,
    hamming_weight_operator,
    linear_combine,
    matvec,
    parse_operator,
    term,
    to_dense,
)
from aqclab.state import StateVector

from oracles import dense_oracle, pauli_string, random_operator


def test_single_qubit_actions():
    # sigma^y|0> = i|1>, sigma^y|1> = -i|0>
    assert apply_term(term(1, "y1"), 0, 1) == (1, 1j)
    assert apply_term(term(1, "y1"), 1, 1) == (0, -1j)
    assert apply_term(term(1, "x1"), 0, 1) == (1, 1)
    assert apply_term(term(1, "z1"), 1, 1) == (1, -1)
    assert apply_term(term(1, "z1 z2"), 1, 2) == (1, -1)
    assert apply_term(term(1, "z1 z2"), 3, 2) == (3, 1)


def test_qubit_one_is_least_significant_bit():
    op = SqhOperator(3, 0.0, [term(1.0, "x1")])
    out = op.apply(np.eye(8, dtype=complex)[0])
    assert out[1] == 1.0
    op = SqhOperator(3, 0.0, [term(1.0, "x3")])
    assert op.apply(np.eye(8, dtype=complex)[0])[4] == 1.0


@pytest.mark.parametrize("seed", range(20))
def test_to_dense_matches_kronecker_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 6))
    op = random_operator(rng, n, int(rng.integers(1, 12)))
    assert np.abs(to_dense(op) - dense_oracle(op)).max() < 1e-12


@pytest.mark.parametrize("seed", range(20))
def test_matvec_matches_dense(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(1, 7))
    op = random_operator(rng, n, int(rng.integers(1, 15)))
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    assert np.abs(op.apply(v) - dense_oracle(op) @ v).max() < 1e-12


def test_operators_are_hermitian():
    rng = np.random.default_rng(5)
    for _ in range(10):
        h = to_dense(random_operator(rng, 4, 10))
        assert np.allclose(h, h.conj().T, atol=1e-14)


def test_decompose_roundtrip_and_uniqueness():
    rng = np.random.default_rng(9)
    for _ in range(10):
        op = random_operator(rng, 3, 8)
        back = decompose_dense(to_dense(op))
        assert np.abs(to_dense(back) - to_dense(op)).max() < 1e-10
        assert {t.key for t in back.terms} == {t.key for t in op.terms}
        for t in op.terms:
            other = {u.key: u.weight for u in back.terms}[t.key]
            assert abs(other - t.weight) < 1e-10


def test_decompose_example_matrix():
    # x1 z2 with weight 2 and shift 0.5
    h = 0.5 * np.eye(4) + 2 * pauli_string(2, [(1, "x"), (2, "z")])
    op = decompose_dense(h)
    assert op.shift == pytest.approx(0.5)
    assert [(t.key, t.weight) for t in op.terms] == [(((1, "x"), (2, "z")), pytest.approx(2.0))]


def test_decompose_rejects_bad_input():
    with pytest.raises(ValidationError):
        decompose_dense(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ValidationError):
        decompose_dense(np.eye(3))


def test_term_validation():
    with pytest.raises(ValidationError):
        SqhTerm(1.0, ())
    with pytest.raises(ValidationError):
        SqhTerm(1.0, ((2, "x"), (1, "z")))
    with pytest.raises(ValidationError):
        SqhTerm(1.0, ((0, "x"),))
    with pytest.raises(ValidationError):
        SqhTerm(1j, ((1, "x"),))
    with pytest.raises(ValidationError):
        SqhTerm(float("nan"), ((1, "x"),))
    with pytest.raises(ValidationError):
        SqhTerm(1.0, ((1, "w"),))
    with pytest.raises(ContractViolation):
        SqhOperator(2, 0.0, [term(1, "x3")])


def test_merging_and_zero_dropping():
    op = SqhOperator(2, 1.0, [term(1.0, "x1"), term(2.0, "x1"), term(1.0, "z2"), term(-1.0, "z2")])
    assert len(op) == 1
    assert op.terms[0].weight == 3.0
    assert op == SqhOperator(2, 1.0, [term(3.0, "x1")])
    assert hash(op) == hash(SqhOperator(2, 1.0, [term(3.0, "x1")]))


def test_linear_combine_and_arithmetic():
    a = SqhOperator(2, 1.0, [term(1.0, "x1"), term(0.5, "z1 z2")])
    b = SqhOperator(2, -2.0, [term(1.0, "x1"), term(1.0, "y2")])
    c = linear_combine([(0.25, a), (0.75, b)])
    assert np.allclose(to_dense(c), 0.25 * to_dense(a) + 0.75 * to_dense(b))
    assert np.allclose(to_dense(a + b), to_dense(a) + to_dense(b))
    assert np.allclose(to_dense(a - b), to_dense(a) - to_dense(b))
    assert np.allclose(to_dense(2.0 * a), 2 * to_dense(a))
    with pytest.raises(ContractViolation):
        linear_combine([(1.0, a), (1.0, SqhOperator(3))])


def test_hamming_weight_operator_diagonal():
    d = hamming_weight_operator(4).diagonal()
    assert np.array_equal(d, [bin(z).count("1") for z in range(16)])


def test_diagonal_matches_dense():
    rng = np.random.default_rng(3)
    op = random_operator(rng, 4, 12)
    assert np.allclose(op.diagonal(), np.diag(to_dense(op)).real)


def test_matvec_on_state_vector():
    op = SqhOperator(1, 0.0, [term(1.0, "x1")])
    out = matvec(op, StateVector(1, np.array([1, 0], dtype=complex)))
    assert isinstance(out, StateVector)
    assert np.allclose(out.amplitudes, [0, 1])
    with pytest.raises(ContractViolation):
        matvec(op, StateVector(2, np.array([1, 0, 0, 0], dtype=complex)))


def test_text_roundtrip():
    rng = np.random.default_rng(11)
    op = random_operator(rng, 5, 9)
    assert parse_operator(format_operator(op), 5) == op
    with pytest.raises(ValidationError, match="line 2"):
        parse_operator("shift 0\n1.0 1:q\n")
    with pytest.raises(ValidationError):
        parse_operator("1.0 1:x\n")


axis = st.sampled_from(["x", "y", "z"])


@st.composite
def operators(draw):
    n = draw(st.integers(1, 5))
    terms = []
    for _ in range(draw(st.integers(0, 8))):
        qubits = sorted(draw(st.sets(st.integers(1, n), min_size=1, max_size=n)))
        factors = tuple((q, draw(axis)) for q in qubits)
        terms.append(SqhTerm(draw(st.floats(-3, 3, allow_nan=False)), factors))
    return SqhOperator(n, draw(st.floats(-3, 3, allow_nan=False)), terms)


@settings(max_examples=60, deadline=None)
@given(operators(), st.floats(-2, 2, allow_nan=False))
def test_property_matvec_linear_and_hermitian(op, c):
    rng = np.random.default_rng(0)
    u = rng.normal(size=op.dim) + 1j * rng.normal(size=op.dim)
    v = rng.normal(size=op.dim) + 1j * rng.normal(size=op.dim)
    assert np.allclose(op.apply(u + c * v), op.apply(u) + c * op.apply(v), atol=1e-10)
    # <u|Hv> == <Hu|v>
    assert abs(np.vdot(u, op.apply(v)) - np.vdot(op.apply(u), v)) < 1e-9


@settings(max_examples=40, deadline=None)
@given(operators())
def test_property_dense_agrees_with_oracle(op):
    assert np.abs(to_dense(op) - dense_oracle(op)).max() < 1e-12


def test_pauli_axis_enum():
    assert PauliAxis("y") is PauliAxis.Y
