"""Exhaustive twirl sums over the Pauli, local-Clifford and full-Clifford groups.

The sum ``sum_G (G^+ Q1 G) rho (G^+ Q2 G)`` is accumulated by grouping group
elements according to the pair of Pauli strings they conjugate ``Q1, Q2`` to.
Phases are counted as integers mod 4, so cancellations are exact and only the
final contraction with ``rho`` is done in floating point.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from .clifford import MAX_ENUMERATED_CLIFFORD_QUBITS, conjugate, enumerate_c1, enumerate_clifford_group
from .pauli import ArityError, PauliOperator, PauliSimilarityClass, enumerate_paulis, multiply
from .states import as_array

KINDS = ("pauli", "local_clifford", "full_clifford")
MAX_TWIRL_QUBITS = {"pauli": 3, "local_clifford": 3, "full_clifford": MAX_ENUMERATED_CLIFFORD_QUBITS}


class TwirlPreconditionError(ValueError):
    pass


def group_size(kind: str, m: int) -> int:
    if kind == "pauli":
        return 4**m
    if kind == "local_clifford":
        return 24**m
    if kind == "full_clifford":
        return len(enumerate_clifford_group(m))
    raise ValueError(f"unknown twirl group {kind!r}")


def _check(kind: str, m: int) -> None:
    if kind not in KINDS:
        raise ValueError(f"unknown twirl group {kind!r}")
    if m > MAX_TWIRL_QUBITS[kind]:
        raise TwirlPreconditionError(
            f"{kind} group on {m} qubits is too large to enumerate (limit {MAX_TWIRL_QUBITS[kind]})"
        )


@lru_cache(maxsize=None)
def _c1_table() -> tuple[np.ndarray, np.ndarray]:
    # phase[c, s] and string[c, s] for C^+ sigma_s C, s indexing I, X, Y, Z as (x<<1)|z
    phases = np.zeros((24, 4), dtype=np.int64)
    strings = np.zeros((24, 4), dtype=np.int64)
    for ci, c in enumerate(enumerate_c1()):
        for s in range(4):
            img = conjugate(c, PauliOperator(1, s >> 1, s & 1))
            phases[ci, s] = img.phase
            strings[ci, s] = (img.x << 1) | img.z
    return phases, strings


def _string_index(p: PauliOperator) -> int:
    return (p.x << p.num_qubits) | p.z


@lru_cache(maxsize=4096)
def conjugated_images(kind: str, q: PauliOperator) -> tuple[np.ndarray, np.ndarray]:
    """Phase exponents and packed strings of ``G^+ q G`` for every group element ``G``."""
    m = q.num_qubits
    _check(kind, m)
    if kind == "pauli":
        out = [multiply(p.adjoint(), multiply(q, p)) for p in enumerate_paulis(m)]
        return (np.array([o.phase for o in out]), np.array([_string_index(o) for o in out]))
    if kind == "full_clifford":
        out = [conjugate(c, q) for c in enumerate_clifford_group(m)]
        return (np.array([o.phase for o in out]), np.array([_string_index(o) for o in out]))
    phases1, strings1 = _c1_table()
    letters = [((q.x >> (m - 1 - j)) & 1) << 1 | ((q.z >> (m - 1 - j)) & 1) for j in range(m)]
    grids = np.meshgrid(*[np.arange(24)] * m, indexing="ij")
    phase = np.full(grids[0].shape, q.phase, dtype=np.int64)
    x = np.zeros(grids[0].shape, dtype=np.int64)
    z = np.zeros(grids[0].shape, dtype=np.int64)
    for j, (grid, s) in enumerate(zip(grids, letters)):
        phase += phases1[grid, s]
        img = strings1[grid, s]
        x |= (img >> 1) << (m - 1 - j)
        z |= (img & 1) << (m - 1 - j)
    return (phase.reshape(-1) % 4, ((x << m) | z).reshape(-1))


def pair_coefficients(kind: str, q1: PauliOperator, q2: PauliOperator) -> np.ndarray:
    """Integer-exact complex weights ``W[a, b] = sum_G i^(k1+k2)`` over elements mapping
    ``(q1, q2)`` to strings ``(a, b)``."""
    if q1.num_qubits != q2.num_qubits:
        raise ArityError("twirl operands differ in arity")
    m = q1.num_qubits
    n_strings = 4**m
    k1, s1 = conjugated_images(kind, q1)
    k2, s2 = conjugated_images(kind, q2)
    counts = np.zeros((n_strings, n_strings, 4), dtype=np.int64)
    np.add.at(counts, (s1, s2, (k1 + k2) % 4), 1)
    return (counts[..., 0] - counts[..., 2]) + 1j * (counts[..., 1] - counts[..., 3])


@lru_cache(maxsize=None)
def _string_matrices(m: int) -> np.ndarray:
    d = 1 << m
    mats = np.zeros((4**m, d, d), dtype=complex)
    for x in range(d):
        for z in range(d):
            mats[(x << m) | z] = PauliOperator(m, x, z).to_matrix()
    return mats


def twirl_sum(kind: str, q1: PauliOperator, q2: PauliOperator, rho) -> np.ndarray:
    """``sum_G (G^+ q1 G) rho (G^+ q2 G)`` over the whole group."""
    arr = as_array(rho)
    m = q1.num_qubits
    if arr.shape != (1 << m, 1 << m):
        raise ArityError("state dimension does not match the Pauli operands")
    w = pair_coefficients(kind, q1, q2)
    a_idx, b_idx = np.nonzero(w)
    out = np.zeros_like(arr)
    if a_idx.size == 0:
        return out
    mats = _string_matrices(m)
    return np.einsum("k,kij,jl,klr->ir", w[a_idx, b_idx], mats[a_idx], arr, mats[b_idx])


def twirl_average(kind: str, q1: PauliOperator, q2: PauliOperator, rho) -> np.ndarray:
    return twirl_sum(kind, q1, q2, rho) / group_size(kind, q1.num_qubits)


def twirl_check(kind: str, q1: PauliOperator, q2: PauliOperator, rho) -> float:
    """Operator norm of the twirl sum; the cancellation lemmas predict 0 when ``q1 != q2``."""
    if q1.unphased() == q2.unphased():
        raise TwirlPreconditionError("the twirl cancellation needs distinct Pauli strings")
    _check(kind, q1.num_qubits)
    return float(np.linalg.norm(twirl_sum(kind, q1, q2, rho), 2))


def distinct_pairs(m: int):
    """All ordered pairs of distinct phase-free Pauli strings on ``m`` qubits."""
    paulis = enumerate_paulis(m)
    return [(a, b) for a, b in itertools.product(paulis, repeat=2) if a != b]


def clifford_depolarized(rho, num_qubits: int) -> np.ndarray:
    """Closed form of the full-Clifford twirl of a non-identity Pauli: ``(2^m I - rho)/(4^m - 1)``."""
    arr = as_array(rho)
    d = 1 << num_qubits
    return (d * np.trace(arr) * np.eye(d) - arr) / (d * d - 1)


def similar_pauli_mixture(p: PauliOperator, rho) -> np.ndarray:
    """Uniform average of ``P~ rho P~`` over the Paulis similar to ``p``."""
    arr = as_array(rho)
    members = PauliSimilarityClass.of(p).members()
    out = np.zeros_like(arr)
    for q in members:
        qm = q.to_matrix()
        out = out + qm @ arr @ qm.conj().T
    return out / len(members)


def twirl_residuals(kind: str, m: int, states) -> np.ndarray:
    """Residual norms for every ordered distinct pair and every state.

    Returns an array of shape ``(pairs, states)`` in the order of :func:`distinct_pairs`.
    """
    _check(kind, m)
    stack = np.stack([as_array(s) for s in states])
    mats = _string_matrices(m)
    pairs = distinct_pairs(m)
    out = np.zeros((len(pairs), len(stack)))
    for i, (q1, q2) in enumerate(pairs):
        w = pair_coefficients(kind, q1, q2)
        a_idx, b_idx = np.nonzero(w)
        if a_idx.size == 0:
            continue
        sums = np.einsum("k,kij,sjl,klr->sir", w[a_idx, b_idx], mats[a_idx], stack, mats[b_idx])
        out[i] = np.linalg.norm(sums, 2, axis=(1, 2))
    return out
