import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from secure_metrology.pauli import (
    ArityError,
    PauliOperator,
    PauliSimilarityClass,
    enumerate_paulis,
    multiply,
    pauli_from_matrix,
)

SINGLE = {
    "I": np.eye(2),
    "X": np.array([[0, 1], [1, 0]]),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1, -1]),
}


def dense(label: str) -> np.ndarray:
    out = np.eye(1)
    for ch in label:
        out = np.kron(out, SINGLE[ch])
    return out


labels = st.integers(1, 4).flatmap(lambda m: st.text("IXYZ", min_size=m, max_size=m))


def pair(m):
    return st.tuples(st.text("IXYZ", min_size=m, max_size=m), st.text("IXYZ", min_size=m, max_size=m))


pairs = st.integers(1, 4).flatmap(pair)


@given(labels)
def test_matrix_matches_kron_of_single_qubit_paulis(label):
    assert np.allclose(PauliOperator.from_label(label).to_matrix(), dense(label))


@given(pairs, st.integers(0, 3), st.integers(0, 3))
def test_product_matches_dense_product(ab, ka, kb):
    a = PauliOperator.from_label(ab[0])
    b = PauliOperator.from_label(ab[1])
    a = PauliOperator(a.num_qubits, a.x, a.z, ka)
    b = PauliOperator(b.num_qubits, b.x, b.z, kb)
    prod = multiply(a, b)
    assert np.allclose(prod.to_matrix(), a.to_matrix() @ b.to_matrix())


@given(pairs)
def test_commutation_matches_dense(ab):
    a, b = (PauliOperator.from_label(s) for s in ab)
    ma, mb = a.to_matrix(), b.to_matrix()
    assert a.commutes_with(b) == np.allclose(ma @ mb, mb @ ma)


@given(labels, st.integers(0, 3))
def test_from_matrix_roundtrip(label, k):
    p = PauliOperator.from_label(label)
    p = PauliOperator(p.num_qubits, p.x, p.z, k)
    assert pauli_from_matrix(p.to_matrix()) == p


@given(labels)
def test_apply_to_vector_matches_matrix(label):
    p = PauliOperator.from_label(label)
    v = np.arange(1 << p.num_qubits) + 1j
    assert np.allclose(p.apply_to_vector(v), p.to_matrix() @ v)


def test_known_products():
    x, y, z = (PauliOperator.from_label(c) for c in "XYZ")
    assert x * y == PauliOperator(1, 0, 1, 1)  # XY = iZ
    assert y * x == PauliOperator(1, 0, 1, 3)
    assert (z * z).is_identity()


def test_label_with_phase_prefix():
    p = PauliOperator.from_label("-iXZ")
    assert np.allclose(p.to_matrix(), -1j * dense("XZ"))
    assert p.label() == "-iXZ"


@pytest.mark.parametrize("m", [1, 2, 3])
def test_enumeration_is_complete_and_distinct(m):
    ps = enumerate_paulis(m)
    assert len(ps) == 4**m
    assert len(set(ps)) == 4**m
    assert ps[0].is_identity()


@pytest.mark.parametrize("m", [1, 2])
def test_enumeration_is_orthogonal_basis(m):
    mats = np.stack([p.to_matrix() for p in enumerate_paulis(m)])
    gram = np.einsum("aij,bij->ab", mats.conj(), mats)
    assert np.allclose(gram, (1 << m) * np.eye(4**m))


def test_arity_mismatch_raises():
    with pytest.raises(ArityError):
        multiply(PauliOperator.from_label("X"), PauliOperator.from_label("XX"))


def test_pauli_from_matrix_rejects_non_pauli():
    with pytest.raises(ValueError):
        pauli_from_matrix(np.array([[1, 1], [1, -1]]) / np.sqrt(2))


def test_similarity_class():
    p = PauliOperator.from_label("XIZ")
    cls = PauliSimilarityClass.of(p)
    members = cls.members()
    assert len(members) == len(cls) == 9
    assert all(q.support == frozenset({0, 2}) for q in members)
    assert PauliOperator.from_label("YIY") in cls
    assert PauliOperator.from_label("XXZ") not in cls


def test_weight_and_support():
    p = PauliOperator.from_label("IXYI")
    assert p.weight == 2
    assert p.support == frozenset({1, 2})
    assert p.x_bits == (0, 1, 1, 0)
    assert p.z_bits == (0, 0, 1, 0)
