"""Phased multi-qubit Pauli operators.

An operator is stored as ``i**phase * sigma(x_0, z_0) (x) ... (x) sigma(x_{m-1}, z_{m-1})``
where ``sigma(0,0)=I``, ``sigma(1,0)=X``, ``sigma(0,1)=Z`` and ``sigma(1,1)=Y``.
The x and z bit strings are kept as integer masks with qubit 0 in the most
significant bit, which makes the mask agree with computational-basis indices.
Phases are integers mod 4 so products and cancellations are exact.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_ENUMERATION_QUBITS = 6

_LABEL_TO_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_BITS_TO_LABEL = {v: k for k, v in _LABEL_TO_BITS.items()}
_PHASE_PREFIX = {0: "", 1: "i", 2: "-", 3: "-i"}


class ArityError(ValueError):
    """Operands act on different numbers of qubits."""


def _popcount(v: int) -> int:
    return bin(v).count("1")


@dataclass(frozen=True)
class PauliOperator:
    num_qubits: int
    x: int
    z: int
    phase: int = 0

    def __post_init__(self):
        if self.num_qubits < 1:
            raise ValueError("a Pauli operator needs at least one qubit")
        limit = 1 << self.num_qubits
        if not (0 <= self.x < limit and 0 <= self.z < limit):
            raise ValueError("bit masks exceed the number of qubits")
        object.__setattr__(self, "phase", self.phase % 4)

    # -- construction -------------------------------------------------
    @classmethod
    def from_label(cls, label: str) -> "PauliOperator":
        """Parse labels such as ``"XIZ"``, ``"-iY"`` or ``"iXX"``."""
        phase = 0
        body = label
        for prefix, k in (("-i", 3), ("+i", 1), ("i", 1), ("-", 2), ("+", 0)):
            if body.startswith(prefix):
                phase = k
                body = body[len(prefix):]
                break
        if not body or any(c not in _LABEL_TO_BITS for c in body):
            raise ValueError(f"bad Pauli label {label!r}")
        x = z = 0
        for c in body:
            bx, bz = _LABEL_TO_BITS[c]
            x = (x << 1) | bx
            z = (z << 1) | bz
        return cls(len(body), x, z, phase)

    @classmethod
    def identity(cls, num_qubits: int) -> "PauliOperator":
        return cls(num_qubits, 0, 0, 0)

    @classmethod
    def single(cls, num_qubits: int, qubit: int, letter: str) -> "PauliOperator":
        """Pauli ``letter`` on ``qubit`` and identity elsewhere."""
        if not 0 <= qubit < num_qubits:
            raise ValueError(f"qubit {qubit} out of range for {num_qubits} qubits")
        bx, bz = _LABEL_TO_BITS[letter]
        shift = num_qubits - 1 - qubit
        return cls(num_qubits, bx << shift, bz << shift, 0)

    @classmethod
    def from_bits(cls, x_bits, z_bits, phase: int = 0) -> "PauliOperator":
        if len(x_bits) != len(z_bits):
            raise ArityError("x and z bit strings differ in length")
        x = z = 0
        for bx, bz in zip(x_bits, z_bits):
            x = (x << 1) | int(bool(bx))
            z = (z << 1) | int(bool(bz))
        return cls(len(x_bits), x, z, phase)

    # -- views --------------------------------------------------------
    @property
    def phase_exponent(self) -> int:
        return self.phase

    @property
    def x_bits(self) -> tuple[int, ...]:
        m = self.num_qubits
        return tuple((self.x >> (m - 1 - j)) & 1 for j in range(m))

    @property
    def z_bits(self) -> tuple[int, ...]:
        m = self.num_qubits
        return tuple((self.z >> (m - 1 - j)) & 1 for j in range(m))

    @property
    def weight(self) -> int:
        return _popcount(self.x | self.z)

    @property
    def support(self) -> frozenset[int]:
        m = self.num_qubits
        mask = self.x | self.z
        return frozenset(j for j in range(m) if (mask >> (m - 1 - j)) & 1)

    @property
    def num_y(self) -> int:
        return _popcount(self.x & self.z)

    def is_identity(self) -> bool:
        """True for the identity string, ignoring the phase."""
        return self.x == 0 and self.z == 0

    def is_hermitian(self) -> bool:
        return self.phase % 2 == 0

    def unphased(self) -> "PauliOperator":
        return PauliOperator(self.num_qubits, self.x, self.z, 0)

    def label(self) -> str:
        letters = "".join(_BITS_TO_LABEL[(bx, bz)] for bx, bz in zip(self.x_bits, self.z_bits))
        return _PHASE_PREFIX[self.phase] + letters

    def __repr__(self) -> str:
        return f"PauliOperator({self.label()!r})"

    def __str__(self) -> str:
        return self.label()

    def commutes_with(self, other: "PauliOperator") -> bool:
        _check_arity(self, other)
        return symplectic_product(self.x, self.z, other.x, other.z) == 0

    def __mul__(self, other: "PauliOperator") -> "PauliOperator":
        return multiply(self, other)

    def __neg__(self) -> "PauliOperator":
        return PauliOperator(self.num_qubits, self.x, self.z, self.phase + 2)

    def adjoint(self) -> "PauliOperator":
        # sigma strings are Hermitian, so only the scalar is conjugated
        return PauliOperator(self.num_qubits, self.x, self.z, -self.phase)

    def to_matrix(self) -> np.ndarray:
        d = 1 << self.num_qubits
        cols = np.arange(d)
        sign = _parity(cols & self.z)
        values = (1j ** ((self.phase + self.num_y) % 4)) * (1 - 2 * sign)
        out = np.zeros((d, d), dtype=complex)
        out[cols ^ self.x, cols] = values
        return out

    def apply_to_vector(self, vec: np.ndarray) -> np.ndarray:
        """Return ``P @ vec`` without forming the matrix (vec may be (d,) or (d, k))."""
        d = 1 << self.num_qubits
        cols = np.arange(d)
        sign = 1 - 2 * _parity(cols & self.z)
        scale = 1j ** ((self.phase + self.num_y) % 4)
        out = np.empty_like(vec, dtype=complex)
        if vec.ndim == 1:
            out[cols ^ self.x] = scale * sign * vec
        else:
            out[cols ^ self.x] = scale * sign[:, None] * vec
        return out


def _parity(values: np.ndarray) -> np.ndarray:
    return (np.bitwise_count(np.asarray(values, dtype=np.int64)) & 1).astype(np.int64)


def _check_arity(a: PauliOperator, b: PauliOperator) -> None:
    if a.num_qubits != b.num_qubits:
        raise ArityError(f"arity mismatch: {a.num_qubits} vs {b.num_qubits}")


def symplectic_product(xa: int, za: int, xb: int, zb: int) -> int:
    """0 if the two strings commute, 1 if they anticommute."""
    return _popcount((xa & zb) ^ (za & xb)) & 1


def multiply(a: PauliOperator, b: PauliOperator) -> PauliOperator:
    """Exact product ``a @ b`` with the phase tracked as an exponent of i.

    Uses ``sigma-string = i**(#Y) X^x Z^z`` and ``Z^z X^x = (-1)^(z.x) X^x Z^z``.
    """
    _check_arity(a, b)
    x = a.x ^ b.x
    z = a.z ^ b.z
    k = (
        a.phase
        + b.phase
        + a.num_y
        + b.num_y
        + 2 * _popcount(a.z & b.x)
        - _popcount(x & z)
    )
    return PauliOperator(a.num_qubits, x, z, k)


def enumerate_paulis(m: int) -> list[PauliOperator]:
    """All ``4**m`` phase-free Pauli strings in lexicographic ``I, X, Y, Z`` order."""
    if not 1 <= m <= MAX_ENUMERATION_QUBITS:
        raise ValueError(f"enumeration supports 1 <= m <= {MAX_ENUMERATION_QUBITS}, got {m}")
    return list(_enumerate_paulis(m))


@lru_cache(maxsize=None)
def _enumerate_paulis(m: int) -> tuple[PauliOperator, ...]:
    return tuple(PauliOperator.from_label("".join(p)) for p in itertools.product("IXYZ", repeat=m))


def pauli_from_matrix(mat: np.ndarray, atol: float = 1e-9) -> PauliOperator:
    """Identify a phased Pauli from its dense matrix.

    Raises ``ValueError`` if ``mat`` is not a Pauli string times a power of i.
    """
    mat = np.asarray(mat)
    d = mat.shape[0]
    m = d.bit_length() - 1
    if mat.shape != (d, d) or (1 << m) != d:
        raise ValueError("matrix is not a square power-of-two operator")
    x = int(np.argmax(np.abs(mat[:, 0])))
    v0 = mat[x, 0]
    z = 0
    for j in range(m):
        c = 1 << (m - 1 - j)
        ratio = mat[c ^ x, c] / v0
        if abs(ratio + 1) < 1e-6:
            z |= c
    scalar_phase = int(np.rint(np.angle(v0) / (np.pi / 2))) % 4
    probe = PauliOperator(m, x, z, 0)
    k = (scalar_phase - probe.num_y) % 4
    candidate = PauliOperator(m, x, z, k)
    if not np.allclose(candidate.to_matrix(), mat, atol=atol):
        raise ValueError("matrix is not a phased Pauli operator")
    return candidate


@dataclass(frozen=True)
class PauliSimilarityClass:
    """Pauli strings sharing the same non-identity positions (``X ~ Y ~ Z`` per site)."""

    num_qubits: int
    support: frozenset[int]

    @classmethod
    def of(cls, p: PauliOperator) -> "PauliSimilarityClass":
        return cls(p.num_qubits, p.support)

    def members(self) -> list[PauliOperator]:
        sites = sorted(self.support)
        out = []
        for letters in itertools.product("XYZ", repeat=len(sites)):
            chars = ["I"] * self.num_qubits
            for site, letter in zip(sites, letters):
                chars[site] = letter
            out.append(PauliOperator.from_label("".join(chars)))
        return out

    def __len__(self) -> int:
        return 3 ** len(self.support)

    def __contains__(self, p: PauliOperator) -> bool:
        return p.num_qubits == self.num_qubits and p.support == self.support
