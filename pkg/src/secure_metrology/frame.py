"""Pauli-frame simulation of protocol runs under Pauli-mixture adversaries.

Each Kraus branch of a Pauli mixture is a Pauli ``P``, and decryption maps it
to the Pauli ``E^+ P E``. The flags start in ``|0>`` so only the X parts of
the two decrypted branches on flag qubits matter: their XOR is the flag
outcome. The probe sees ``Q Lambda(P rho P) Q`` with ``P`` and ``Q`` the probe
parts. Sampling a branch per leg reproduces the dense run in distribution
without ever forming ``2^m``-dimensional matrices.
"""

from __future__ import annotations

import numpy as np

from .metrology import EncodingChannel
from .pauli import PauliOperator
from .states import DensityMatrix, PauliChannel, as_array


class FrameUnsupportedError(TypeError):
    pass


def _restrict(p: PauliOperator, positions) -> PauliOperator:
    m = p.num_qubits
    x = z = 0
    for q in positions:
        shift = m - 1 - q
        x = (x << 1) | ((p.x >> shift) & 1)
        z = (z << 1) | ((p.z >> shift) & 1)
    return PauliOperator(len(positions), x, z)


def _flag_bits(p: PauliOperator, flags) -> tuple[int, ...]:
    m = p.num_qubits
    return tuple((p.x >> (m - 1 - f)) & 1 for f in flags)


def frame_branch(probe, enc: EncodingChannel, key, p1: PauliOperator, p2: PauliOperator):
    """Flag outcome and output state for fixed Pauli branches on the two legs."""
    d1 = key.conjugate(1, p1)
    d2 = key.conjugate(2, p2)
    bits = tuple(a ^ b for a, b in zip(_flag_bits(d1, key.flags), _flag_bits(d2, key.flags)))
    pos = key.probe_positions
    a = _restrict(d1, pos).to_matrix()
    b = _restrict(d2, pos).to_matrix()
    rho = enc.apply(a @ as_array(probe) @ a.conj().T)
    return bits, b @ rho @ b.conj().T


def _sample_branch(channel, m: int, rng: np.random.Generator) -> PauliOperator:
    if channel is None:
        return PauliOperator.identity(m)
    if not isinstance(channel, PauliChannel):
        raise FrameUnsupportedError(f"channel {channel.name!r} is not a Pauli mixture")
    return channel.sample(rng)


def run_protocol_frame(code: str, probe, enc: EncodingChannel, adv, key, rng: np.random.Generator):
    from .protocols import MalformedKeyError, ProtocolOutcome

    if key.code != code:
        raise MalformedKeyError(f"key was drawn for the {key.code} code")
    m = key.num_qubits
    adv.check_arity(m)
    if not adv.is_pauli:
        raise FrameUnsupportedError("Pauli-frame simulation needs Pauli-mixture adversaries on both legs")
    p1 = _sample_branch(adv.gamma1, m, rng)
    p2 = _sample_branch(adv.gamma2, m, rng)
    bits, out = frame_branch(probe, enc, key, p1, p2)
    if any(bits):
        return ProtocolOutcome(False, bits, None, key)
    return ProtocolOutcome(True, bits, DensityMatrix((out + out.conj().T) / 2, validate=False), key)


def frame_accepted_state(probe, enc: EncodingChannel, adv, key) -> np.ndarray:
    """Exact unnormalized accepted state for one key, summed over every branch pair."""
    m = key.num_qubits

    def terms(ch):
        if ch is None:
            return [(1.0, PauliOperator.identity(m))]
        return [(p, q) for p, q in zip(ch.probabilities, ch.paulis) if p > 0]

    d = as_array(probe).shape[0]
    total = np.zeros((d, d), dtype=complex)
    for w1, q1 in terms(adv.gamma1):
        for w2, q2 in terms(adv.gamma2):
            bits, out = frame_branch(probe, enc, key, q1, q2)
            if not any(bits):
                total += w1 * w2 * out
    return total
