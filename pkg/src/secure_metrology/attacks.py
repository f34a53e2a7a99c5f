"""Two-stage adversaries and the named attack library.

An attack is written ``name[:param][@leg]`` where ``leg`` is ``1`` (Alice to
Bob), ``2`` (Bob to Alice) or ``both`` (the default). Names:

``identity``
    no tampering.
``pauli:<label>``
    a fixed Pauli, either a full label such as ``XIZ`` or a letter and a
    qubit index such as ``X2``.
``random-pauli:<letter>``
    the letter on a uniformly random qubit.
``weak-pauli:<p>``
    with probability ``p`` an ``X`` on a uniformly random qubit.
``depolarize:<p>``
    ``rho -> (1 - p) rho + p I / 2^m``.
``replace:<state>``
    discard the register and send ``mixed`` (``I / 2^m``) or ``zero``.
``rotate:<angle>``
    the coherent rotation ``exp(-i angle Y / 2)`` on every qubit.
``kraus:<path>``
    a custom Kraus set read from a JSON file.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, reduce

import numpy as np

from .pauli import PauliOperator
from .states import (
    DepolarizingChannel,
    DimensionError,
    InvalidChannelError,
    KrausChannel,
    PauliChannel,
    as_array,
    load_channel,
    unitary_channel,
)

ATTACK_NAMES = ("identity", "pauli", "random-pauli", "weak-pauli", "depolarize", "replace", "rotate", "kraus")
LEGS = ("1", "2", "both")


class AttackSpecError(ValueError):
    pass


class ReplacementChannel(KrausChannel):
    """``rho -> Tr(rho) sigma``; Kraus operators ``sqrt(l_k) |v_k><i|`` built on demand."""

    def __init__(self, sigma, name: str = "replace"):
        self.sigma = as_array(sigma)
        d = self.sigma.shape[0]
        self.num_qubits = d.bit_length() - 1
        self.name = name

    @cached_property
    def _ops(self) -> list[np.ndarray]:
        vals, vecs = np.linalg.eigh(self.sigma)
        d = self.dim
        out = []
        for lam, v in zip(vals, vecs.T):
            if lam > 1e-15:
                for i in range(d):
                    k = np.zeros((d, d), dtype=complex)
                    k[:, i] = math.sqrt(lam) * v
                    out.append(k)
        return out

    @property
    def operators(self) -> list[np.ndarray]:
        return self._ops

    def apply(self, rho) -> np.ndarray:
        rho = as_array(rho)
        if rho.shape[-1] != self.dim:
            raise DimensionError(f"channel on {self.num_qubits} qubits, state of dim {rho.shape[-1]}")
        tr = np.trace(rho, axis1=-2, axis2=-1)
        return np.multiply.outer(tr, self.sigma).reshape(rho.shape)

    def superoperator(self) -> np.ndarray:
        eye = np.eye(self.dim).reshape(-1)
        return np.outer(self.sigma.reshape(-1), eye)


@dataclass(frozen=True)
class AdversaryModel:
    """Channels applied on the outbound (``gamma1``) and return (``gamma2``) legs.

    ``None`` stands for the identity channel.
    """

    gamma1: KrausChannel | None = None
    gamma2: KrausChannel | None = None
    name: str = "identity"

    def __post_init__(self):
        for ch in (self.gamma1, self.gamma2):
            if ch is not None and type(ch) is KrausChannel:
                ch.check_complete()
        if self.gamma1 is not None and self.gamma2 is not None and self.gamma1.num_qubits != self.gamma2.num_qubits:
            raise DimensionError("the two legs act on different numbers of qubits")

    def check_arity(self, m: int) -> None:
        for ch in (self.gamma1, self.gamma2):
            if ch is not None and ch.num_qubits != m:
                raise DimensionError(f"adversary acts on {ch.num_qubits} qubits, protocol uses {m}")

    def leg(self, i: int) -> KrausChannel | None:
        return self.gamma1 if i == 1 else self.gamma2

    @property
    def is_pauli(self) -> bool:
        """True when both legs are Pauli mixtures, so branches can be sampled."""
        return all(ch is None or isinstance(ch, PauliChannel) for ch in (self.gamma1, self.gamma2))


def _single_qubit_terms(m: int, letter: str, weight: float) -> list[tuple[float, PauliOperator]]:
    return [(weight / m, PauliOperator.single(m, j, letter)) for j in range(m)]


def _fixed_pauli(m: int, param: str) -> PauliOperator:
    if len(param) >= 2 and param[0] in "XYZ" and param[1:].isdigit():
        return PauliOperator.single(m, int(param[1:]), param[0])
    try:
        p = PauliOperator.from_label(param)
    except ValueError as exc:
        raise AttackSpecError(str(exc)) from None
    if p.num_qubits != m:
        raise AttackSpecError(f"Pauli label {param!r} has {p.num_qubits} letters, expected {m}")
    return p.unphased()


def _float(param: str | None, name: str) -> float:
    if param is None:
        raise AttackSpecError(f"attack {name!r} needs a numeric parameter")
    try:
        return float(param)
    except ValueError as exc:
        raise AttackSpecError(f"attack {name!r}: {param!r} is not a number") from exc


def build_channel(name: str, param: str | None, m: int) -> KrausChannel | None:
    """Channel on ``m`` qubits for one library entry; ``None`` for the identity."""
    if name == "identity":
        return None
    if name == "pauli":
        if not param:
            raise AttackSpecError("pauli attack needs a label")
        p = _fixed_pauli(m, param)
        return PauliChannel([(1.0, p)], name=f"pauli:{p.label()}")
    if name == "random-pauli":
        letter = param or "X"
        if letter not in ("X", "Y", "Z"):
            raise AttackSpecError(f"random-pauli needs X, Y or Z, got {letter!r}")
        return PauliChannel(_single_qubit_terms(m, letter, 1.0), name=f"random-pauli:{letter}")
    if name == "weak-pauli":
        p = _float(param, name)
        if not 0 <= p <= 1:
            raise AttackSpecError("weak-pauli probability must lie in [0, 1]")
        terms = [(1 - p, PauliOperator.identity(m))] + _single_qubit_terms(m, "X", p)
        return PauliChannel(terms, name=f"weak-pauli:{p:g}")
    if name == "depolarize":
        p = _float(param, name)
        try:
            return DepolarizingChannel(m, p)
        except InvalidChannelError as exc:
            raise AttackSpecError(str(exc)) from exc
    if name == "replace":
        d = 1 << m
        target = param or "mixed"
        if target == "mixed":
            sigma = np.eye(d) / d
        elif target == "zero":
            sigma = np.zeros((d, d))
            sigma[0, 0] = 1
        else:
            raise AttackSpecError(f"replace target must be 'mixed' or 'zero', got {target!r}")
        return ReplacementChannel(sigma, name=f"replace:{target}")
    if name == "rotate":
        a = _float(param, name)
        r = np.array([[math.cos(a / 2), -math.sin(a / 2)], [math.sin(a / 2), math.cos(a / 2)]], dtype=complex)
        return unitary_channel(reduce(np.kron, [r] * m), name=f"rotate:{a:g}")
    if name == "kraus":
        if not param:
            raise AttackSpecError("kraus attack needs a file path")
        ch = load_channel(param)
        if ch.num_qubits != m:
            raise AttackSpecError(f"Kraus file acts on {ch.num_qubits} qubits, expected {m}")
        return ch
    raise AttackSpecError(f"unknown attack {name!r}; choose from {', '.join(ATTACK_NAMES)}")


def parse_attack(spec: str) -> tuple[str, str | None, str]:
    """Split ``name[:param][@leg]`` into its parts."""
    body, _, leg = spec.partition("@")
    leg = leg or "both"
    if leg not in LEGS:
        raise AttackSpecError(f"leg must be one of {LEGS}, got {leg!r}")
    name, sep, param = body.partition(":")
    if name not in ATTACK_NAMES:
        raise AttackSpecError(f"unknown attack {name!r}; choose from {', '.join(ATTACK_NAMES)}")
    return name, (param if sep else None), leg


def adversary_from_spec(spec: str, m: int) -> AdversaryModel:
    name, param, leg = parse_attack(spec)
    ch = build_channel(name, param, m)
    g1 = ch if leg in ("1", "both") else None
    g2 = ch if leg in ("2", "both") else None
    return AdversaryModel(g1, g2, name=spec)


def attack_library(m: int) -> dict[str, AdversaryModel]:
    """The documented attack family used by the soundness checks."""
    specs = [
        "identity",
        "pauli:X0@1",
        "pauli:Z0@1",
        f"pauli:Y{m - 1}@2",
        "random-pauli:X@1",
        "random-pauli:Y",
        "weak-pauli:0.01",
        "depolarize:0.1",
        "depolarize:0.5",
        "depolarize:1.0",
        "replace:mixed@1",
        "replace:mixed@2",
        "replace:zero@2",
        "rotate:0.3",
        "rotate:1.2@1",
    ]
    return {s: adversary_from_spec(s, m) for s in specs}
