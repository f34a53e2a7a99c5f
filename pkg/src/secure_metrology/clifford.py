"""Clifford group elements modulo global phase.

A :class:`CliffordElement` is stored through its conjugation action
``g -> C^dagger g C`` on the ``2m`` generators ``X_0..X_{m-1}, Z_0..Z_{m-1}``.
Two elements are equal exactly when their actions agree, which is the same as
matrix equality up to a global phase. The dense matrix is built on demand.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .pauli import ArityError, PauliOperator, multiply, pauli_from_matrix, symplectic_product

DEFAULT_MAX_QUBITS = 10
MAX_ENUMERATED_CLIFFORD_QUBITS = 2

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_S = np.diag([1, 1j])
_CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def generator(num_qubits: int, index: int) -> PauliOperator:
    """Generator ``index`` in the order ``X_0..X_{m-1}, Z_0..Z_{m-1}``."""
    if index < num_qubits:
        return PauliOperator.single(num_qubits, index, "X")
    return PauliOperator.single(num_qubits, index - num_qubits, "Z")


def canonical_phase(mat: np.ndarray, atol: float = 1e-9) -> np.ndarray:
    """Rescale so the first entry with modulus above ``atol`` is real positive."""
    flat = mat.reshape(-1)
    idx = int(np.argmax(np.abs(flat) > atol))
    value = flat[idx]
    return mat * (abs(value) / value)


@dataclass(frozen=True, eq=False)
class CliffordElement:
    num_qubits: int
    images: tuple[PauliOperator, ...]

    def __post_init__(self):
        if len(self.images) != 2 * self.num_qubits:
            raise ValueError("need one image per generator")
        for img in self.images:
            if img.num_qubits != self.num_qubits:
                raise ArityError("image arity differs from element arity")

    # -- identity and hashing -------------------------------------------
    @property
    def arity(self) -> int:
        return self.num_qubits

    @cached_property
    def key(self) -> tuple:
        return tuple((p.x, p.z, p.phase) for p in self.images)

    def __eq__(self, other) -> bool:
        return isinstance(other, CliffordElement) and self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def __repr__(self) -> str:
        body = ", ".join(p.label() for p in self.images)
        return f"CliffordElement(m={self.num_qubits}, action=[{body}])"

    # -- construction -------------------------------------------------
    @classmethod
    def identity(cls, num_qubits: int) -> "CliffordElement":
        return cls(num_qubits, tuple(generator(num_qubits, i) for i in range(2 * num_qubits)))

    @classmethod
    def from_matrix(cls, mat: np.ndarray, atol: float = 1e-9) -> "CliffordElement":
        """Read off the action ``g -> U^dagger g U`` of a dense Clifford unitary."""
        mat = np.asarray(mat, dtype=complex)
        d = mat.shape[0]
        m = d.bit_length() - 1
        if not np.allclose(mat.conj().T @ mat, np.eye(d), atol=atol):
            raise ValueError("matrix is not unitary")
        images = []
        for i in range(2 * m):
            g = generator(m, i).to_matrix()
            images.append(pauli_from_matrix(mat.conj().T @ g @ mat, atol=1e-7))
        out = cls(m, tuple(images))
        out.__dict__["matrix"] = canonical_phase(mat)
        return out

    @classmethod
    def tensor(cls, *factors: "CliffordElement") -> "CliffordElement":
        """Tensor product, first factor on the most significant qubits."""
        m = sum(f.num_qubits for f in factors)
        xs, zs = [], []
        offset = 0
        for f in factors:
            shift = m - offset - f.num_qubits
            lifted = [PauliOperator(m, p.x << shift, p.z << shift, p.phase) for p in f.images]
            xs.extend(lifted[: f.num_qubits])
            zs.extend(lifted[f.num_qubits:])
            offset += f.num_qubits
        return cls(m, tuple(xs) + tuple(zs))

    # -- algebra ------------------------------------------------------
    def conjugate(self, p: PauliOperator) -> PauliOperator:
        return conjugate(self, p)

    def __matmul__(self, other: "CliffordElement") -> "CliffordElement":
        """Matrix product ``self @ other``."""
        if other.num_qubits != self.num_qubits:
            raise ArityError("arity mismatch")
        return CliffordElement(self.num_qubits, tuple(other.conjugate(img) for img in self.images))

    def inverse(self) -> "CliffordElement":
        return _symplectic_inverse(self)

    def is_valid(self) -> bool:
        """Images are Hermitian and satisfy the canonical commutation relations."""
        m = self.num_qubits
        for img in self.images:
            if not img.is_hermitian() or img.is_identity():
                return False
        for i in range(2 * m):
            for j in range(i + 1, 2 * m):
                a, b = self.images[i], self.images[j]
                expected = 1 if (j == i + m) else 0
                if symplectic_product(a.x, a.z, b.x, b.z) != expected:
                    return False
        return True

    def factorizes(self) -> bool:
        """True when every generator image is supported on its own qubit only."""
        m = self.num_qubits
        for i, img in enumerate(self.images):
            if img.support != frozenset({i % m}):
                return False
        return True

    @cached_property
    def matrix(self) -> np.ndarray:
        return _matrix_from_action(self)

    def dagger_matrix(self) -> np.ndarray:
        return self.matrix.conj().T


def conjugate(c: CliffordElement, p: PauliOperator) -> PauliOperator:
    """Return ``C^dagger P C`` as a phased Pauli, computed from the stored action."""
    if c.num_qubits != p.num_qubits:
        raise ArityError(f"arity mismatch: {c.num_qubits} vs {p.num_qubits}")
    m = c.num_qubits
    # P = i^(k + #Y) X^x Z^z, and conjugation is an algebra automorphism
    out = PauliOperator(m, 0, 0, p.phase + p.num_y)
    for j in range(m):
        if (p.x >> (m - 1 - j)) & 1:
            out = multiply(out, c.images[j])
    for j in range(m):
        if (p.z >> (m - 1 - j)) & 1:
            out = multiply(out, c.images[m + j])
    return out


def _matrix_from_action(c: CliffordElement) -> np.ndarray:
    # U = C^dagger satisfies U g U^dagger = image(g); U|0> is the joint +1
    # eigenvector of the Z images and U|x> = prod_j image(X_j)^x_j U|0>.
    m = c.num_qubits
    d = 1 << m
    z_images = c.images[m:]
    state = None
    for start in range(d):
        v = np.zeros(d, dtype=complex)
        v[start] = 1.0
        for q in z_images:
            v = 0.5 * (v + q.apply_to_vector(v))
        norm = np.linalg.norm(v)
        if norm > 1e-6:
            state = v / norm
            break
    if state is None:  # pragma: no cover - impossible for a valid action
        raise ValueError("inconsistent Clifford action")
    u = np.zeros((d, d), dtype=complex)
    u[:, 0] = state
    for col in range(1, d):
        # flip the lowest set bit: |col> = X_j |col without bit j>
        low = col & -col
        j = m - low.bit_length()
        u[:, col] = c.images[j].apply_to_vector(u[:, col ^ low])
    return canonical_phase(u.conj().T)


def _symplectic_inverse(c: CliffordElement) -> CliffordElement:
    # Each generator g equals (up to phase) a product of images prod_j P_j^a_j Q_j^b_j
    # with a_j = <g, Q_j> and b_j = <g, P_j>; then C g C^dagger = X^a Z^b with the
    # phase that makes the product match g exactly.
    m = c.num_qubits
    inv_images = []
    for i in range(2 * m):
        g = generator(m, i)
        # coefficients of g in the image basis: image X_j pairs with image Z_j
        coeff_x = [symplectic_product(g.x, g.z, c.images[m + j].x, c.images[m + j].z) for j in range(m)]
        coeff_z = [symplectic_product(g.x, g.z, c.images[j].x, c.images[j].z) for j in range(m)]
        prod = PauliOperator.identity(m)
        pre_x = 0
        pre_z = 0
        for j in range(m):
            if coeff_x[j]:
                prod = multiply(prod, c.images[j])
                pre_x |= 1 << (m - 1 - j)
        for j in range(m):
            if coeff_z[j]:
                prod = multiply(prod, c.images[m + j])
                pre_z |= 1 << (m - 1 - j)
        pre = PauliOperator(m, pre_x, pre_z, -PauliOperator(m, pre_x, pre_z).num_y)
        delta = (g.phase - prod.phase) % 4
        inv_images.append(PauliOperator(m, pre.x, pre.z, pre.phase + delta))
    return CliffordElement(m, tuple(inv_images))


@lru_cache(maxsize=None)
def _named_gates():
    return {
        "H": CliffordElement.from_matrix(_H),
        "S": CliffordElement.from_matrix(_S),
        "CNOT": CliffordElement.from_matrix(_CNOT),
    }


def hadamard() -> CliffordElement:
    return _named_gates()["H"]


def phase_gate() -> CliffordElement:
    return _named_gates()["S"]


def cnot() -> CliffordElement:
    return _named_gates()["CNOT"]


def _bfs_closure(gens: list[CliffordElement]) -> tuple[CliffordElement, ...]:
    start = CliffordElement.identity(gens[0].num_qubits)
    seen = {start: None}
    order = [start]
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        for g in gens:
            nxt = cur @ g
            if nxt not in seen:
                seen[nxt] = None
                order.append(nxt)
                queue.append(nxt)
    return tuple(order)


def enumerate_c1() -> list[CliffordElement]:
    """The 24 single-qubit Cliffords modulo global phase, identity first."""
    return list(_c1())


@lru_cache(maxsize=None)
def _c1() -> tuple[CliffordElement, ...]:
    return _bfs_closure([hadamard(), phase_gate()])


def enumerate_clifford_group(m: int) -> list[CliffordElement]:
    """Exhaustive ``C_m`` modulo phase for ``m <= 2`` (24 and 11520 elements)."""
    if not 1 <= m <= MAX_ENUMERATED_CLIFFORD_QUBITS:
        raise ValueError(f"exhaustive Clifford enumeration only for m <= {MAX_ENUMERATED_CLIFFORD_QUBITS}")
    return list(_clifford_group(m))


@lru_cache(maxsize=None)
def _clifford_group(m: int) -> tuple[CliffordElement, ...]:
    if m == 1:
        return _c1()
    ident = CliffordElement.identity(1)
    gens = [
        CliffordElement.tensor(hadamard(), ident),
        CliffordElement.tensor(ident, hadamard()),
        CliffordElement.tensor(phase_gate(), ident),
        CliffordElement.tensor(ident, phase_gate()),
        cnot(),
    ]
    return _bfs_closure(gens)


def clifford_group_order(m: int) -> int:
    """``|C_m|`` modulo global phase: ``2^(m^2 + 2m) prod_j (4^j - 1)``."""
    out = 2 ** (m * m + 2 * m)
    for j in range(1, m + 1):
        out *= 4**j - 1
    return out


def local_clifford(indices) -> CliffordElement:
    """Tensor product of single-qubit Cliffords picked from :func:`enumerate_c1`."""
    c1 = _c1()
    return CliffordElement.tensor(*(c1[int(i)] for i in indices))


# -- uniform sampling ------------------------------------------------------

def _sympl(a: tuple[int, int], b: tuple[int, int]) -> int:
    return symplectic_product(a[0], a[1], b[0], b[1])


def _add(a: tuple[int, int], b: tuple[int, int]) -> tuple[int, int]:
    return (a[0] ^ b[0], a[1] ^ b[1])


def _combine(basis: list[tuple[int, int]], bits: int) -> tuple[int, int]:
    out = (0, 0)
    for i, vec in enumerate(basis):
        if (bits >> i) & 1:
            out = _add(out, vec)
    return out


def _symplectic_basis(vectors: list[tuple[int, int]]) -> list[tuple[int, int]]:
    """Symplectic Gram-Schmidt: returns ``[a_1, b_1, a_2, b_2, ...]`` with <a_i, b_i> = 1."""
    pool = [v for v in vectors if v != (0, 0)]
    out = []
    while pool:
        a = pool.pop(0)
        partner = next((i for i, v in enumerate(pool) if _sympl(a, v)), None)
        if partner is None:
            continue  # a is in the radical of the span; skip it
        b = pool.pop(partner)
        out.extend([a, b])
        nxt = []
        for y in pool:
            if _sympl(y, b):
                y = _add(y, a)
            if _sympl(y, a):
                y = _add(y, b)
            if y != (0, 0):
                nxt.append(y)
        pool = nxt
    return out


def _random_bits(rng: np.random.Generator, nbits: int) -> int:
    out = 0
    for chunk in rng.integers(0, 2, size=nbits):
        out = (out << 1) | int(chunk)
    return out


def _sample_symplectic_images(m: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Uniform ordered symplectic basis ``(v_1, w_1, ..., v_m, w_m)``.

    Each ``v_i`` is uniform over nonzero vectors of the symplectic complement
    of the earlier pairs and each ``w_i`` is uniform over vectors of that
    complement pairing to 1 with ``v_i``. The number of choices at each step
    does not depend on earlier choices, so the result is uniform on Sp(2m).
    """
    basis = []
    for j in range(m):
        bit = 1 << (m - 1 - j)
        basis.extend([(bit, 0), (0, bit)])
    pairs = []
    for _ in range(m):
        dim = len(basis)
        while True:
            v = _combine(basis, _random_bits(rng, dim))
            if v != (0, 0):
                break
        while True:
            w = _combine(basis, _random_bits(rng, dim))
            if _sympl(v, w):
                break
        pairs.append((v, w))
        projected = []
        for y in basis:
            s_w = _sympl(y, w)
            s_v = _sympl(y, v)
            if s_w:
                y = _add(y, v)
            if s_v:
                y = _add(y, w)
            projected.append(y)
        basis = _symplectic_basis(projected)
    return pairs


def sample_clifford(
    m: int,
    mode: str,
    rng: np.random.Generator,
    max_qubits: int = DEFAULT_MAX_QUBITS,
) -> CliffordElement:
    """Draw a Clifford uniformly from ``C_1^{(x)m}`` (``mode="local"``) or ``C_m`` (``mode="full"``)."""
    if not 1 <= m <= max_qubits:
        raise ValueError(f"unsupported number of qubits {m} (max_qubits={max_qubits})")
    if mode == "local":
        return local_clifford(rng.integers(0, 24, size=m))
    if mode != "full":
        raise ValueError(f"unknown sampling mode {mode!r}")
    pairs = _sample_symplectic_images(m, rng)
    signs = rng.integers(0, 2, size=2 * m)
    xs = []
    zs = []
    for i, (v, w) in enumerate(pairs):
        xs.append(_hermitian_pauli(m, v, int(signs[i])))
        zs.append(_hermitian_pauli(m, w, int(signs[m + i])))
    return CliffordElement(m, tuple(xs) + tuple(zs))


def _hermitian_pauli(m: int, vec: tuple[int, int], negative: int) -> PauliOperator:
    return PauliOperator(m, vec[0], vec[1], 2 * negative)
