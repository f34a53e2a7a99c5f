"""Dense density matrices, Kraus channels, observables and measurement."""

from __future__ import annotations

import json
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg

from .pauli import PauliOperator

ATOL = 1e-9
EIGEN_CLUSTER_TOL = 1e-9


class InvalidStateError(ValueError):
    pass


class InvalidChannelError(ValueError):
    pass


class DimensionError(ValueError):
    pass


def _num_qubits(dim: int) -> int:
    m = dim.bit_length() - 1
    if dim < 2 or (1 << m) != dim:
        raise DimensionError(f"dimension {dim} is not a power of two")
    return m


class DensityMatrix:
    """Validated, immutable density matrix on ``m`` qubits.

    Pass ``validate=False`` for internally produced matrices that are known to
    be states up to round-off; validation never repairs a matrix.
    """

    def __init__(self, data, validate: bool = True):
        arr = np.array(data, dtype=complex)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DimensionError("density matrix must be square")
        self.num_qubits = _num_qubits(arr.shape[0])
        arr.setflags(write=False)
        self.data = arr
        if validate:
            self.validate()

    @classmethod
    def from_vector(cls, vec) -> "DensityMatrix":
        v = np.asarray(vec, dtype=complex).reshape(-1)
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()))

    @classmethod
    def basis(cls, bits: str) -> "DensityMatrix":
        """Computational basis state from a bit string such as ``"010"``."""
        d = 1 << len(bits)
        v = np.zeros(d, dtype=complex)
        v[int(bits, 2)] = 1.0
        return cls.from_vector(v)

    @classmethod
    def maximally_mixed(cls, num_qubits: int) -> "DensityMatrix":
        d = 1 << num_qubits
        return cls(np.eye(d) / d, validate=False)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def validate(self, atol: float = ATOL) -> None:
        a = self.data
        if not np.allclose(a, a.conj().T, atol=atol):
            raise InvalidStateError("density matrix is not Hermitian")
        tr = np.trace(a)
        if abs(tr - 1) > atol:
            raise InvalidStateError(f"trace {tr.real:.12g} differs from 1")
        low = np.linalg.eigvalsh((a + a.conj().T) / 2).min()
        if low < -atol:
            raise InvalidStateError(f"negative eigenvalue {low:.3g}")

    def is_pure(self, atol: float = 1e-9) -> bool:
        return abs(np.trace(self.data @ self.data).real - 1) < atol

    def tensor(self, other: "DensityMatrix") -> "DensityMatrix":
        return DensityMatrix(np.kron(self.data, other.data), validate=False)

    def __matmul__(self, other):
        return self.data @ (other.data if isinstance(other, DensityMatrix) else other)

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def __repr__(self) -> str:
        return f"DensityMatrix(num_qubits={self.num_qubits})"

    def to_json(self) -> dict:
        return matrix_to_json(self.data)

    @classmethod
    def from_json(cls, obj: dict) -> "DensityMatrix":
        return cls(matrix_from_json(obj))


def as_array(rho) -> np.ndarray:
    return rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)


class KrausChannel:
    """CPTP map ``rho -> sum_k K_k rho K_k^dagger`` on ``m`` qubits."""

    def __init__(self, operators: Sequence[np.ndarray], check: bool = True, name: str = "kraus"):
        ops = [np.array(k, dtype=complex) for k in operators]
        if not ops:
            raise InvalidChannelError("empty Kraus set")
        d = ops[0].shape[0]
        for k in ops:
            if k.shape != (d, d):
                raise DimensionError("Kraus operators must share one square shape")
        self.num_qubits = _num_qubits(d)
        self.name = name
        self._operators = ops
        if check:
            self.check_complete()

    @property
    def operators(self) -> list[np.ndarray]:
        return self._operators

    @property
    def dim(self) -> int:
        return 1 << self.num_qubits

    def check_complete(self, atol: float = ATOL) -> None:
        total = sum(k.conj().T @ k for k in self.operators)
        if not np.allclose(total, np.eye(self.dim), atol=atol):
            raise InvalidChannelError(f"Kraus set of {self.name!r} is not complete")

    def apply(self, rho: np.ndarray) -> np.ndarray:
        rho = as_array(rho)
        if rho.shape[-1] != self.dim:
            raise DimensionError(f"channel on {self.num_qubits} qubits, state of dim {rho.shape[-1]}")
        out = np.zeros_like(rho, dtype=complex)
        for k in self.operators:
            out = out + k @ rho @ k.conj().T
        return out

    def superoperator(self) -> np.ndarray:
        """Row-major vectorized action: ``vec(K rho K^+) = (K (x) conj(K)) vec(rho)``."""
        return sum(np.kron(k, k.conj()) for k in self.operators)

    def compose(self, first: "KrausChannel") -> "KrausChannel":
        """Channel ``self o first``."""
        return KrausChannel([a @ b for a in self.operators for b in first.operators], name=f"{self.name}o{first.name}")

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name!r}, m={self.num_qubits})"


class PauliChannel(KrausChannel):
    """Mixture ``rho -> sum_i p_i P_i rho P_i``; Kraus operators built on demand."""

    def __init__(self, terms: Sequence[tuple[float, PauliOperator]], name: str = "pauli"):
        probs = np.array([float(p) for p, _ in terms])
        if np.any(probs < -ATOL) or abs(probs.sum() - 1) > ATOL:
            raise InvalidChannelError("Pauli channel probabilities must be a distribution")
        paulis = [p for _, p in terms]
        m = paulis[0].num_qubits
        if any(p.num_qubits != m for p in paulis):
            raise DimensionError("Pauli terms differ in arity")
        self.num_qubits = m
        self.name = name
        self.probabilities = np.clip(probs, 0, None)
        self.paulis = paulis

    @cached_property
    def _ops(self) -> list[np.ndarray]:
        return [np.sqrt(p) * q.to_matrix() for p, q in zip(self.probabilities, self.paulis) if p > 0]

    @property
    def operators(self) -> list[np.ndarray]:
        return self._ops

    def apply(self, rho: np.ndarray) -> np.ndarray:
        rho = as_array(rho)
        if rho.shape[-1] != self.dim:
            raise DimensionError(f"channel on {self.num_qubits} qubits, state of dim {rho.shape[-1]}")
        out = np.zeros_like(rho, dtype=complex)
        for p, q in zip(self.probabilities, self.paulis):
            if p > 0:
                pm = q.to_matrix()
                out = out + p * (pm @ rho @ pm.conj().T)
        return out

    def sample(self, rng: np.random.Generator) -> PauliOperator:
        return self.paulis[int(rng.choice(len(self.paulis), p=self.probabilities))]


class DepolarizingChannel(PauliChannel):
    """``rho -> (1 - p) rho + p I / 2^m`` with a closed-form action."""

    def __init__(self, num_qubits: int, p: float):
        if not 0 <= p <= 1:
            raise InvalidChannelError("depolarizing probability must lie in [0, 1]")
        self.num_qubits = num_qubits
        self.p = float(p)
        self.name = f"depolarize:{p:g}"

    @cached_property
    def paulis(self) -> list[PauliOperator]:
        m = self.num_qubits
        d = 1 << m
        return [PauliOperator(m, x, z) for x in range(d) for z in range(d)]

    @cached_property
    def probabilities(self) -> np.ndarray:
        n = 4**self.num_qubits
        probs = np.full(n, self.p / n)
        probs[0] += 1 - self.p
        return probs

    def apply(self, rho: np.ndarray) -> np.ndarray:
        rho = as_array(rho)
        if rho.shape[-1] != self.dim:
            raise DimensionError(f"channel on {self.num_qubits} qubits, state of dim {rho.shape[-1]}")
        tr = np.trace(rho, axis1=-2, axis2=-1)
        eye = np.eye(self.dim) / self.dim
        return (1 - self.p) * rho + self.p * np.multiply.outer(tr, eye).reshape(rho.shape)

    def superoperator(self) -> np.ndarray:
        d = self.dim
        eye = np.eye(d).reshape(-1)
        return (1 - self.p) * np.eye(d * d) + self.p * np.outer(eye / d, eye)

    def sample(self, rng: np.random.Generator) -> PauliOperator:
        m = self.num_qubits
        if rng.random() >= self.p:
            return PauliOperator.identity(m)
        d = 1 << m
        return PauliOperator(m, int(rng.integers(d)), int(rng.integers(d)))


def identity_channel(num_qubits: int) -> KrausChannel:
    return KrausChannel([np.eye(1 << num_qubits)], name="identity")


def unitary_channel(u: np.ndarray, name: str = "unitary") -> KrausChannel:
    return KrausChannel([u], name=name)


def apply_channel(ch: KrausChannel, rho) -> DensityMatrix:
    """Apply ``ch`` and return a validated state."""
    return DensityMatrix(ch.apply(as_array(rho)))


class Observable:
    """Hermitian observable with eigenvalues clustered into projectors.

    ``eigenvalues[i]`` pairs with ``projectors[i]``; eigenvalues closer than
    ``EIGEN_CLUSTER_TOL`` share one projector.
    """

    def __init__(self, matrix, name: str = "O"):
        mat = np.array(matrix, dtype=complex)
        if not np.allclose(mat, mat.conj().T, atol=ATOL):
            raise ValueError("observable must be Hermitian")
        mat.setflags(write=False)
        self.matrix = mat
        self.name = name
        vals, vecs = np.linalg.eigh(mat)
        groups: list[list[int]] = []
        for i, v in enumerate(vals):
            if groups and abs(v - vals[groups[-1][0]]) < EIGEN_CLUSTER_TOL:
                groups[-1].append(i)
            else:
                groups.append([i])
        self.eigenvalues = np.array([vals[g].mean() for g in groups])
        self.projectors = [vecs[:, g] @ vecs[:, g].conj().T for g in groups]

    @classmethod
    def from_pauli(cls, p: PauliOperator) -> "Observable":
        return cls(p.to_matrix(), name=p.label())

    @property
    def num_qubits(self) -> int:
        return _num_qubits(self.matrix.shape[0])

    @property
    def max_abs_eigenvalue(self) -> float:
        return float(np.max(np.abs(self.eigenvalues)))

    def probabilities(self, rho) -> np.ndarray:
        """Born probabilities ``Tr(Pi_i rho)``; works on stacks ``(..., d, d)``."""
        rho = as_array(rho)
        if rho.shape[-1] != self.matrix.shape[0]:
            raise DimensionError("observable and state dimensions differ")
        probs = np.stack([np.einsum("ij,...ji->...", p, rho).real for p in self.projectors], axis=-1)
        return np.clip(probs, 0.0, None)

    def __repr__(self) -> str:
        return f"Observable({self.name!r}, eigenvalues={np.round(self.eigenvalues, 12).tolist()})"


def expectation(rho, obs: Observable) -> float:
    rho = as_array(rho)
    if rho.shape != obs.matrix.shape:
        raise DimensionError("observable and state dimensions differ")
    return float(np.trace(obs.matrix @ rho).real)


def measure(rho, obs: Observable, rng: np.random.Generator) -> tuple[float, DensityMatrix]:
    """Projective measurement: returns the eigenvalue and the post-measurement state."""
    arr = as_array(rho)
    probs = obs.probabilities(arr)
    probs = probs / probs.sum()
    i = int(rng.choice(len(probs), p=probs))
    proj = obs.projectors[i]
    post = proj @ arr @ proj
    post = post / np.trace(post).real
    return float(obs.eigenvalues[i]), DensityMatrix(post, validate=False)


def permute_qubits(op, order: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors: factor ``i`` of ``op`` becomes qubit ``order[i]``.

    Works on a single operator or a stack of operators.
    """
    arr = np.asarray(op)
    d = arr.shape[-1]
    m = _num_qubits(d)
    order = list(order)
    if sorted(order) != list(range(m)):
        raise ValueError("order must be a permutation of the qubit indices")
    lead = arr.shape[:-2]
    inv = list(np.argsort(order))
    t = arr.reshape(lead + (2,) * (2 * m))
    k = len(lead)
    axes = list(range(k)) + [k + i for i in inv] + [k + m + i for i in inv]
    return t.transpose(axes).reshape(lead + (d, d))


def partial_trace(rho, keep: Sequence[int]) -> DensityMatrix:
    """Reduced state on the qubits in ``keep`` (kept in ascending order)."""
    arr = as_array(rho)
    m = _num_qubits(arr.shape[0])
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise ValueError("keep set must be non-empty")
    if keep[0] < 0 or keep[-1] >= m:
        raise ValueError(f"qubit index out of range for {m} qubits")
    traced = [q for q in range(m) if q not in keep]
    t = arr.reshape((2,) * (2 * m))
    letters = [chr(ord("a") + i) for i in range(2 * m)]
    for q in traced:
        letters[m + q] = letters[q]
    out = "".join(letters[q] for q in keep) + "".join(letters[m + q] for q in keep)
    reduced = np.einsum("".join(letters) + "->" + out, t)
    dk = 1 << len(keep)
    return DensityMatrix(reduced.reshape(dk, dk), validate=False)


def trace_distance(a, b) -> float:
    """Half the trace norm of ``a - b``."""
    a, b = as_array(a), as_array(b)
    if a.shape != b.shape:
        raise DimensionError("states have different dimensions")
    diff = a - b
    return float(0.5 * np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2)).sum())


def fidelity(a, b) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(a) b sqrt(a)))^2``."""
    a, b = as_array(a), as_array(b)
    if a.shape != b.shape:
        raise DimensionError("states have different dimensions")
    sa = _psd_sqrt(a)
    inner = sa @ b @ sa
    ev = np.clip(np.linalg.eigvalsh((inner + inner.conj().T) / 2), 0, None)
    return float(min(1.0, np.sqrt(ev).sum() ** 2))


def _psd_sqrt(a: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh((a + a.conj().T) / 2)
    return (vecs * np.sqrt(np.clip(vals, 0, None))) @ vecs.conj().T


def random_density_matrix(num_qubits: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Ginibre-distributed random state of the given rank (full rank by default)."""
    d = 1 << num_qubits
    r = d if rank is None else rank
    g = rng.normal(size=(d, r)) + 1j * rng.normal(size=(d, r))
    rho = g @ g.conj().T
    return DensityMatrix(rho / np.trace(rho).real, validate=False)


def random_pure_state(num_qubits: int, rng: np.random.Generator) -> DensityMatrix:
    return random_density_matrix(num_qubits, rng, rank=1)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary from the QR decomposition of a Ginibre matrix."""
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = scipy.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_kraus_channel(num_qubits: int, num_ops: int, rng: np.random.Generator) -> KrausChannel:
    """Random complete Kraus set from a slice of a Haar isometry."""
    d = 1 << num_qubits
    u = random_unitary(d * num_ops, rng)
    iso = u[:, :d]
    return KrausChannel([iso[k * d:(k + 1) * d, :] for k in range(num_ops)], name="random")


# -- JSON matrix format -----------------------------------------------------
# {"shape": [rows, cols], "data": [[re, im], ...]} in row-major order.

def matrix_to_json(mat: np.ndarray) -> dict:
    mat = np.asarray(mat, dtype=complex)
    return {
        "shape": list(mat.shape),
        "data": [[float(v.real), float(v.imag)] for v in mat.reshape(-1)],
    }


def matrix_from_json(obj: dict) -> np.ndarray:
    shape = tuple(int(s) for s in obj["shape"])
    pairs = np.asarray(obj["data"], dtype=float)
    if pairs.shape != (int(np.prod(shape)), 2):
        raise ValueError("matrix JSON data does not match its shape")
    return (pairs[:, 0] + 1j * pairs[:, 1]).reshape(shape)


def channel_to_json(ch: KrausChannel) -> dict:
    return {"name": ch.name, "kraus": [matrix_to_json(k) for k in ch.operators]}


def channel_from_json(obj: dict) -> KrausChannel:
    return KrausChannel([matrix_from_json(k) for k in obj["kraus"]], name=obj.get("name", "custom"))


def load_channel(path: str | Path) -> KrausChannel:
    return channel_from_json(json.loads(Path(path).read_text()))
