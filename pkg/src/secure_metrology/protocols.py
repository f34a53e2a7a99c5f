"""Trap-code and Clifford-code metrology protocols with key-averaged evaluators.

A run on ``m = n + t`` qubits: insert ``|0>`` flags at the key's positions,
encrypt with ``E_k1``, adversary leg 1, decrypt, encode the non-flag qubits,
encrypt with ``E_k2``, adversary leg 2, decrypt, measure the flags in the
computational basis and accept when every flag reads 0.

Exhaustive key averages are computed on superoperators: averaging
``S(E^+) S(Gamma) S(E)`` over the encryption group gives the twirled leg, and
since ``k1`` and ``k2`` are independent the averaged output for a fixed flag
set is ``T2 . Lambda . T1`` applied to the input. Beyond the enumerable
range the full Clifford group is replaced by its Haar average, which it equals
exactly because it is a unitary 2-design.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .attacks import AdversaryModel
from .clifford import (
    DEFAULT_MAX_QUBITS,
    CliffordElement,
    enumerate_c1,
    enumerate_clifford_group,
    local_clifford,
    sample_clifford,
)
from .metrology import (
    EncodingChannel,
    EstimationConfig,
    EstimationResult,
    expectation_model,
    parity_observable,
    phase_encoding,
    prepare_ghz,
    run_estimation,
    theorem1_bounds,
)
from .pauli import PauliOperator
from .states import DensityMatrix, DimensionError, KrausChannel, as_array, permute_qubits, trace_distance
from .twirl import _c1_table

CODES = ("trap", "clifford")
EXHAUSTIVE_SOUNDNESS_QUBITS = {"trap": 2, "clifford": 4}
EXHAUSTIVE_PRIVACY_QUBITS = {"trap": 3, "clifford": 2}
DEFAULT_KEY_SAMPLES = 100_000
SUPPORT_TOL = 1e-9


class MalformedKeyError(ValueError):
    pass


class InfeasibleEnumerationError(ValueError):
    pass


class NoAcceptedStatesError(RuntimeError):
    pass


def _check_code(code: str) -> None:
    if code not in CODES:
        raise ValueError(f"unknown code {code!r}; choose 'trap' or 'clifford'")


# -- keys -------------------------------------------------------------------

@lru_cache(maxsize=None)
def _c1_matrices() -> np.ndarray:
    return np.stack([c.matrix for c in enumerate_c1()])


def _batched_kron(factors: np.ndarray) -> np.ndarray:
    """``factors`` has shape ``(B, m, 2, 2)``; returns the ``(B, 2^m, 2^m)`` tensor products."""
    out = factors[:, 0]
    for j in range(1, factors.shape[1]):
        b, d = out.shape[0], out.shape[1]
        out = np.einsum("bij,bkl->bikjl", out, factors[:, j]).reshape(b, 2 * d, 2 * d)
    return out


@dataclass(frozen=True)
class ProtocolKey:
    """Classical key ``(k1, k2, flags)``.

    For the trap code ``k1`` and ``k2`` are tuples of per-qubit indices into
    :func:`enumerate_c1`; for the Clifford code they are :class:`CliffordElement`
    instances on all ``m`` qubits.
    """

    code: str
    num_probe: int
    k1: tuple | CliffordElement
    k2: tuple | CliffordElement
    flags: tuple[int, ...]

    def __post_init__(self):
        _check_code(self.code)
        m = self.num_qubits
        flags = tuple(int(f) for f in self.flags)
        if list(flags) != sorted(set(flags)) or (flags and (flags[0] < 0 or flags[-1] >= m)):
            raise MalformedKeyError("flags must be sorted distinct qubit indices")
        if not flags:
            raise MalformedKeyError("need at least one flag qubit")
        if self.num_probe < 1:
            raise MalformedKeyError("need at least one probe qubit")
        object.__setattr__(self, "flags", flags)
        for k in (self.k1, self.k2):
            if self.code == "trap":
                if isinstance(k, CliffordElement) or len(k) != m or any(not 0 <= int(i) < 24 for i in k):
                    raise MalformedKeyError("trap-code keys are m indices into the 24 single-qubit Cliffords")
            elif not isinstance(k, CliffordElement) or k.num_qubits != m:
                raise MalformedKeyError("Clifford-code keys are Clifford elements on all m qubits")

    @property
    def num_flags(self) -> int:
        return len(self.flags)

    @property
    def num_qubits(self) -> int:
        return self.num_probe + len(self.flags)

    @property
    def probe_positions(self) -> tuple[int, ...]:
        fl = set(self.flags)
        return tuple(q for q in range(self.num_qubits) if q not in fl)

    def _part(self, leg: int):
        if leg not in (1, 2):
            raise ValueError("leg must be 1 or 2")
        return self.k1 if leg == 1 else self.k2

    def clifford(self, leg: int) -> CliffordElement:
        k = self._part(leg)
        return local_clifford(k) if self.code == "trap" else k

    def matrix(self, leg: int) -> np.ndarray:
        k = self._part(leg)
        if self.code == "trap":
            return _batched_kron(_c1_matrices()[np.asarray(k)][None])[0]
        return k.matrix

    def conjugate(self, leg: int, p: PauliOperator) -> PauliOperator:
        """``E^+ p E`` for the leg's encryption ``E``."""
        k = self._part(leg)
        if self.code == "clifford":
            return k.conjugate(p)
        phases, strings = _c1_table()
        m = p.num_qubits
        x = z = 0
        phase = p.phase
        mask = p.x | p.z
        while mask:
            low = mask & -mask
            j = m - low.bit_length()
            s = (((p.x & low) != 0) << 1) | ((p.z & low) != 0)
            c = int(k[j])
            phase += int(phases[c, s])
            img = int(strings[c, s])
            if img & 2:
                x |= low
            if img & 1:
                z |= low
            mask ^= low
        return PauliOperator(m, x, z, phase)


def sample_key(
    code: str,
    n: int,
    t: int,
    rng: np.random.Generator,
    flags: Sequence[int] | None = None,
    max_qubits: int | None = None,
) -> ProtocolKey:
    """Uniform key. Trap-code flags are a uniform ``t``-subset; Clifford-code flags default to the last ``t`` qubits."""
    _check_code(code)
    m = n + t
    if code == "trap":
        k1 = tuple(int(i) for i in rng.integers(0, 24, size=m))
        k2 = tuple(int(i) for i in rng.integers(0, 24, size=m))
        if flags is None:
            flags = np.sort(rng.choice(m, size=t, replace=False))
    else:
        limit = max(m, DEFAULT_MAX_QUBITS) if max_qubits is None else max_qubits
        k1 = sample_clifford(m, "full", rng, max_qubits=limit)
        k2 = sample_clifford(m, "full", rng, max_qubits=limit)
        if flags is None:
            flags = range(n, m)
    return ProtocolKey(code, n, k1, k2, tuple(int(f) for f in flags))


def canonical_flags(n: int, t: int) -> tuple[int, ...]:
    return tuple(range(n, n + t))


# -- dense protocol ---------------------------------------------------------

@dataclass
class ProtocolOutcome:
    accepted: bool
    flag_outcome: tuple[int, ...]
    output_state: DensityMatrix | None
    key_used: ProtocolKey
    acceptance_probability: float | None = None


def _zero_projector(t: int) -> np.ndarray:
    z = np.zeros((1 << t, 1 << t), dtype=complex)
    z[0, 0] = 1
    return z


def prepare_input(probe, flags: Sequence[int], m: int) -> np.ndarray:
    """Probe on the non-flag qubits (in order) and ``|0>`` on every flag."""
    arr = as_array(probe)
    flags = list(flags)
    probe_pos = [q for q in range(m) if q not in flags]
    if arr.shape[0] != 1 << len(probe_pos):
        raise DimensionError("probe dimension does not match the number of non-flag qubits")
    return permute_qubits(np.kron(arr, _zero_projector(len(flags))), probe_pos + flags)


def accepted_indices(flags: Sequence[int], m: int) -> np.ndarray:
    """Basis indices with every flag bit 0, in increasing order (probe order)."""
    idx = np.arange(1 << m)
    mask = 0
    for f in flags:
        mask |= 1 << (m - 1 - f)
    return idx[(idx & mask) == 0]


def _flag_values(flags: Sequence[int], m: int) -> np.ndarray:
    idx = np.arange(1 << m)
    out = np.zeros_like(idx)
    for f in flags:
        out = (out << 1) | ((idx >> (m - 1 - f)) & 1)
    return out


def _leg(rho: np.ndarray, e: np.ndarray, channel: KrausChannel | None) -> np.ndarray:
    if channel is None:
        return rho
    ed = np.conj(np.swapaxes(e, -1, -2))
    return ed @ channel.apply(e @ rho @ ed) @ e


def protocol_state(code: str, probe, enc: EncodingChannel, adv: AdversaryModel, key: ProtocolKey) -> np.ndarray:
    """The ``m``-qubit state after the last decryption, before the flag measurement."""
    _check_code(code)
    if key.code != code:
        raise MalformedKeyError(f"key was drawn for the {key.code} code")
    m = key.num_qubits
    adv.check_arity(m)
    if enc.num_qubits != key.num_probe:
        raise DimensionError("encoding arity differs from the number of probe qubits")
    rho = prepare_input(probe, key.flags, m)
    rho = _leg(rho, key.matrix(1), adv.gamma1)
    rho = enc.apply_on(rho, key.probe_positions, m)
    return _leg(rho, key.matrix(2), adv.gamma2)


def run_protocol(
    code: str,
    probe,
    enc: EncodingChannel,
    adv: AdversaryModel,
    key: ProtocolKey,
    rng: np.random.Generator,
    method: str = "auto",
) -> ProtocolOutcome:
    """One protocol instance; the flag outcome is sampled from ``rng``.

    ``method="frame"`` samples Kraus branches of Pauli-mixture adversaries and
    tracks them as Pauli frames, which is exact in distribution and scales to
    registers far beyond the dense limit. ``"auto"`` picks it when ``m``
    exceeds the dense limit.
    """
    if method not in ("auto", "dense", "frame"):
        raise ValueError("method must be 'auto', 'dense' or 'frame'")
    if method == "frame" or (method == "auto" and key.num_qubits > DEFAULT_MAX_QUBITS):
        from .frame import run_protocol_frame

        return run_protocol_frame(code, probe, enc, adv, key, rng)
    m = key.num_qubits
    rho = protocol_state(code, probe, enc, adv, key)
    diag = np.clip(np.real(np.diag(rho)), 0, None)
    marginal = np.bincount(_flag_values(key.flags, m), weights=diag, minlength=1 << key.num_flags)
    marginal = marginal / marginal.sum()
    outcome = int(np.searchsorted(np.cumsum(marginal), rng.random(), side="right"))
    outcome = min(outcome, len(marginal) - 1)
    t = key.num_flags
    bits = tuple((outcome >> (t - 1 - j)) & 1 for j in range(t))
    p_acc = float(marginal[0])
    if outcome != 0:
        return ProtocolOutcome(False, bits, None, key, p_acc)
    idx = accepted_indices(key.flags, m)
    block = rho[np.ix_(idx, idx)]
    out = block / np.trace(block).real
    return ProtocolOutcome(True, bits, DensityMatrix((out + out.conj().T) / 2, validate=False), key, p_acc)


# -- soundness ----------------------------------------------------------------

def soundness_bound(code: str, n: int, t: int) -> float:
    """``3n/t`` for the trap code and ``2/2^t`` for the Clifford code."""
    _check_code(code)
    return 3 * n / t if code == "trap" else 2.0 / 2**t


def complement_projector(ideal) -> np.ndarray:
    """Projector onto the orthogonal complement of the support of ``ideal``."""
    vals, vecs = np.linalg.eigh(as_array(ideal))
    supp = vecs[:, vals > SUPPORT_TOL]
    return np.eye(vecs.shape[0]) - supp @ supp.conj().T


def _unitary_superop(u: np.ndarray) -> np.ndarray:
    # row-major vec: vec(U rho U^+) = (U (x) conj U) vec(rho); batched over leading axis
    if u.ndim == 2:
        return np.kron(u, u.conj())
    b, d, _ = u.shape
    return np.einsum("bij,bkl->bikjl", u, u.conj()).reshape(b, d * d, d * d)


def _channel_superop(channel: KrausChannel | None, d: int) -> np.ndarray:
    return np.eye(d * d, dtype=complex) if channel is None else channel.superoperator()


@lru_cache(maxsize=None)
def _group_matrices(code: str, m: int) -> np.ndarray:
    if code == "trap":
        if m > EXHAUSTIVE_PRIVACY_QUBITS["trap"]:
            raise InfeasibleEnumerationError(f"C1^(x){m} is too large to enumerate")
        grid = np.array(list(itertools.product(range(24), repeat=m)))
        return _batched_kron(_c1_matrices()[grid])
    if m > EXHAUSTIVE_PRIVACY_QUBITS["clifford"]:
        raise InfeasibleEnumerationError(f"C_{m} is too large to enumerate")
    return np.stack([c.matrix for c in enumerate_clifford_group(m)])


def design_twirl(s_gamma: np.ndarray, d: int) -> np.ndarray:
    """Haar average of ``S(U^+) S S(U)``: the unique ``a Id + b |I><I|`` sharing ``Tr`` and ``<I|S|I>`` with ``S``."""
    vec_i = np.eye(d).reshape(-1)
    tr = np.trace(s_gamma)
    ii = vec_i @ s_gamma @ vec_i
    # Tr T = a d^2 + b d, <I|T|I> = a d + b d^2
    a, b = np.linalg.solve(np.array([[d * d, d], [d, d * d]], dtype=complex), np.array([tr, ii]))
    return a * np.eye(d * d) + b * np.outer(vec_i, vec_i)


def twirled_superoperator(
    code: str, channel: KrausChannel | None, m: int, chunk: int = 2048, use_design: bool | None = None
) -> np.ndarray:
    """Exact key average of ``rho -> E^+ Gamma(E rho E^+) E`` as a superoperator.

    For the Clifford code ``use_design`` (default: only when ``C_m`` is not
    enumerable) evaluates the average through the 2-design identity.
    """
    d = 1 << m
    s_gamma = _channel_superop(channel, d)
    if channel is None:
        return s_gamma
    if use_design is None:
        use_design = code == "clifford" and m > EXHAUSTIVE_PRIVACY_QUBITS["clifford"]
    if use_design:
        if code != "clifford":
            raise ValueError("the 2-design identity holds for the full Clifford group only")
        return design_twirl(s_gamma, d)
    mats = _group_matrices(code, m)
    total = np.zeros((d * d, d * d), dtype=complex)
    for start in range(0, len(mats), chunk):
        s_e = _unitary_superop(mats[start:start + chunk])
        total += np.einsum("bji,bjl->il", s_e.conj(), s_gamma @ s_e)
    return total / len(mats)


def _encoding_superop(enc: EncodingChannel, positions: Sequence[int], m: int) -> np.ndarray:
    from .metrology import embed_operator

    if enc.is_unitary_family:
        return _unitary_superop(embed_operator(enc.unitary(), positions, m))
    ops = [embed_operator(k, positions, m) for k in enc.channel().operators]
    return sum(np.kron(k, k.conj()) for k in ops)


def _flag_sets(code: str, n: int, t: int) -> list[tuple[int, ...]]:
    if code == "clifford":
        return [canonical_flags(n, t)]
    return list(itertools.combinations(range(n + t), t))


def key_averaged_output(
    code: str, n: int, t: int, probe, enc: EncodingChannel, adv: AdversaryModel, flags: Sequence[int]
) -> np.ndarray:
    """Exact average of the pre-measurement state over ``k1`` and ``k2`` with ``flags`` fixed."""
    m = n + t
    adv.check_arity(m)
    d = 1 << m
    t1 = twirled_superoperator(code, adv.gamma1, m)
    t2 = twirled_superoperator(code, adv.gamma2, m)
    flags = tuple(flags)
    probe_pos = [q for q in range(m) if q not in flags]
    lam = _encoding_superop(enc, probe_pos, m)
    vec = prepare_input(probe, flags, m).reshape(-1)
    return (t2 @ (lam @ (t1 @ vec))).reshape(d, d)


@dataclass
class SoundnessResult:
    value: float
    standard_error: float
    literal_value: float
    bound: float
    acceptance: float
    samples: int
    exhaustive: bool
    per_sample: np.ndarray | None = None

    @property
    def within_bound(self) -> bool:
        return self.value <= self.bound + 3 * self.standard_error


def _penalty_operators(ideal: np.ndarray, flags: Sequence[int], m: int) -> tuple[np.ndarray, np.ndarray]:
    # |0><0| on flags (x) Q on probe, for Q the complement projector and the literal I - rho_ideal
    flags = list(flags)
    probe_pos = [q for q in range(m) if q not in flags]
    z = _zero_projector(len(flags))
    q = complement_projector(ideal)
    lit = np.eye(ideal.shape[0]) - ideal
    order = probe_pos + flags
    return permute_qubits(np.kron(q, z), order), permute_qubits(np.kron(lit, z), order)


def _trace_with(op: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return np.real(np.einsum("...ij,...ji->...", op, rho))


def soundness_lhs(
    code: str,
    n: int,
    t: int,
    probe,
    enc: EncodingChannel,
    adv: AdversaryModel,
    key_sampling: str | int = "exhaustive",
    rng: np.random.Generator | None = None,
    chunk: int = 4096,
) -> SoundnessResult:
    """Key average of ``Tr(Pi_k rho_out(k, Gamma))``.

    ``key_sampling`` is ``"exhaustive"`` or a number of Monte Carlo key samples.
    ``Pi_k`` is ``|0><0|`` on the flags times the projector onto the complement
    of the ideal output's support; ``literal_value`` uses ``I - rho_ideal``
    instead, which coincides for pure ideal outputs.
    """
    _check_code(code)
    m = n + t
    ideal = enc.apply(probe)
    bound = soundness_bound(code, n, t)
    if key_sampling == "exhaustive":
        if m > EXHAUSTIVE_SOUNDNESS_QUBITS[code]:
            raise InfeasibleEnumerationError(
                f"exhaustive soundness supports m <= {EXHAUSTIVE_SOUNDNESS_QUBITS[code]} for the {code} code"
            )
        values, literal, acc = [], [], []
        for flags in _flag_sets(code, n, t):
            rho = key_averaged_output(code, n, t, probe, enc, adv, flags)
            pi, pi_lit = _penalty_operators(ideal, flags, m)
            values.append(_trace_with(pi, rho))
            literal.append(_trace_with(pi_lit, rho))
            acc.append(_trace_with(_penalty_operators(np.zeros_like(ideal), flags, m)[0], rho))
        return SoundnessResult(
            float(np.mean(values)), 0.0, float(np.mean(literal)), bound, float(np.mean(acc)), 0, True, np.array(values)
        )
    samples = int(key_sampling)
    if samples < 2:
        raise ValueError("Monte Carlo soundness needs at least two key samples")
    rng = np.random.default_rng() if rng is None else rng
    vals = np.empty(samples)
    lits = np.empty(samples)
    accs = np.empty(samples)
    done = 0
    while done < samples:
        b = min(chunk, samples - done)
        keys = [sample_key(code, n, t, rng) for _ in range(b)]
        v, lv, av = _batch_penalties(code, keys, probe, enc, adv, ideal)
        vals[done:done + b], lits[done:done + b], accs[done:done + b] = v, lv, av
        done += b
    se = float(vals.std(ddof=1) / math.sqrt(samples))
    return SoundnessResult(float(vals.mean()), se, float(lits.mean()), bound, float(accs.mean()), samples, False, vals)


def _key_matrices(keys: list[ProtocolKey], leg: int) -> np.ndarray:
    if keys[0].code == "trap":
        idx = np.array([k.k1 if leg == 1 else k.k2 for k in keys])
        return _batched_kron(_c1_matrices()[idx])
    return np.stack([k.matrix(leg) for k in keys])


def _batch_penalties(code, keys, probe, enc, adv, ideal):
    m = keys[0].num_qubits
    adv.check_arity(m)
    groups: dict[tuple, list[int]] = {}
    for i, k in enumerate(keys):
        groups.setdefault(k.flags, []).append(i)
    e1 = _key_matrices(keys, 1)
    e2 = _key_matrices(keys, 2)
    vals = np.empty(len(keys))
    lits = np.empty(len(keys))
    accs = np.empty(len(keys))
    for flags, members in groups.items():
        sel = np.array(members)
        rho = np.broadcast_to(prepare_input(probe, flags, m), (len(sel), 1 << m, 1 << m))
        rho = _leg(rho, e1[sel], adv.gamma1)
        rho = enc.apply_on(rho, [q for q in range(m) if q not in flags], m)
        rho = _leg(rho, e2[sel], adv.gamma2)
        pi, pi_lit = _penalty_operators(ideal, flags, m)
        acc_op = _penalty_operators(np.zeros_like(ideal), flags, m)[0]
        vals[sel] = _trace_with(pi, rho)
        lits[sel] = _trace_with(pi_lit, rho)
        accs[sel] = _trace_with(acc_op, rho)
    return vals, lits, accs


# -- privacy ------------------------------------------------------------------

def privacy_eve_view(
    code: str,
    carried_state,
    sampling: str | int = "exhaustive",
    rng: np.random.Generator | None = None,
    chunk: int = 4096,
) -> tuple[DensityMatrix, float]:
    """Average ``E rho E^+`` over the code's encryption group and its distance to ``I/2^m``.

    ``sampling`` is ``"exhaustive"`` or a number of Monte Carlo samples.
    """
    _check_code(code)
    rho = as_array(carried_state)
    d = rho.shape[0]
    m = d.bit_length() - 1
    if sampling == "exhaustive":
        if m > EXHAUSTIVE_PRIVACY_QUBITS[code]:
            raise InfeasibleEnumerationError(
                f"exhaustive privacy check supports m <= {EXHAUSTIVE_PRIVACY_QUBITS[code]} for the {code} code"
            )
        mats = _group_matrices(code, m)
        total = np.zeros((d, d), dtype=complex)
        for start in range(0, len(mats), chunk):
            e = mats[start:start + chunk]
            total += np.einsum("bij,jk,blk->il", e, rho, e.conj())
        avg = total / len(mats)
    else:
        samples = int(sampling)
        if samples < 1:
            raise ValueError("need at least one sample")
        rng = np.random.default_rng() if rng is None else rng
        total = np.zeros((d, d), dtype=complex)
        done = 0
        while done < samples:
            b = min(chunk, samples - done)
            if code == "trap":
                e = _batched_kron(_c1_matrices()[rng.integers(0, 24, size=(b, m))])
            elif m <= EXHAUSTIVE_PRIVACY_QUBITS["clifford"]:
                e = _group_matrices("clifford", m)[rng.integers(0, len(enumerate_clifford_group(m)), size=b)]
            else:
                e = np.stack([sample_clifford(m, "full", rng).matrix for _ in range(b)])
            total += np.einsum("bij,jk,blk->il", e, rho, e.conj())
            done += b
        avg = total / samples
    avg = (avg + avg.conj().T) / 2
    return DensityMatrix(avg, validate=False), trace_distance(avg, np.eye(d) / d)


# -- integrity --------------------------------------------------------------

def theorem3_resources(n: int, nu: int, alpha: float) -> tuple[int, int]:
    """Flag counts ``ceil(3 n nu / alpha)`` (trap) and ``ceil(log2(2 nu / alpha))`` (Clifford)."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if nu < 1 or n < 1:
        raise ValueError("need n >= 1 and nu >= 1")
    t_trap = math.ceil(3 * n * nu / alpha - 1e-12)
    t_cliff = max(1, math.ceil(math.log2(2 * nu / alpha) - 1e-12))
    return t_trap, t_cliff


def theorem3_bias(o: float, deriv: float, delta: float, alpha: float, nu: int) -> tuple[float, float]:
    """Bias bounds for accepted outputs: the source bounds at ``eps = sqrt(delta / alpha)``."""
    if delta < 0:
        raise ValueError("delta must be non-negative")
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    return theorem1_bounds(o, deriv, math.sqrt(delta / alpha), nu)


@dataclass
class SecureEstimationReport:
    estimation: EstimationResult
    ideal: EstimationResult
    acceptance_rate: float
    accepted_counts: np.ndarray
    delta: float
    alpha: float
    beta: float
    beta_se: float
    gamma: float
    gamma_se: float
    beta_bound: float
    gamma_bound: float

    @property
    def bounds_apply(self) -> bool:
        return self.acceptance_rate > self.alpha

    @property
    def within_bounds(self) -> bool | None:
        if not self.bounds_apply:
            return None
        return self.beta <= self.beta_bound + 3 * self.beta_se and self.gamma <= self.gamma_bound + 3 * self.gamma_se


def end_to_end_secure_estimation(
    code: str,
    n: int,
    t: int,
    nu: int,
    theta_true: float,
    adv: AdversaryModel,
    rng: np.random.Generator,
    alpha: float = 0.5,
    repetitions: int = 1,
    window: tuple[float, float] | None = None,
    method: str = "auto",
) -> SecureEstimationReport:
    """Run ``nu`` protocol instances per repetition, estimate from the accepted outputs.

    The ideal comparison run and the secured run share a seed, so accepted
    shot ``j`` reuses the measurement uniform of ideal shot ``j``.
    """
    _check_code(code)
    window = (0.0, math.pi / n) if window is None else window
    cfg = EstimationConfig(n=n, nu=nu, theta_true=theta_true, window=window, repetitions=repetitions)
    probe = prepare_ghz(n)
    enc = phase_encoding(n, theta_true)
    seed = int(rng.integers(2**63))
    counts: list[int] = []

    def source(src_rng: np.random.Generator):
        states = []
        for _ in range(nu):
            key = sample_key(code, n, t, src_rng)
            out = run_protocol(code, probe, enc, adv, key, src_rng, method=method)
            if out.accepted:
                states.append(out.output_state)
        counts.append(len(states))
        if not states:
            raise NoAcceptedStatesError("every protocol instance was rejected")
        return states

    secured = run_estimation(source, cfg, np.random.default_rng(seed))
    ideal = run_estimation(DensityMatrix(cfg.ideal_state(), validate=False), cfg, np.random.default_rng(seed))
    d_est = secured.estimates - ideal.estimates
    d_sq = secured.squared_errors - ideal.squared_errors
    r = repetitions
    se = (lambda a: float(a.std(ddof=1) / math.sqrt(r))) if r > 1 else (lambda a: float("nan"))
    model = expectation_model(None, enc, parity_observable(n))
    deriv = abs(model.derivative(theta_true))
    delta = soundness_bound(code, n, t)
    beta_bound, gamma_bound = theorem3_bias(model.o, deriv, delta, alpha, nu)
    counts_arr = np.array(counts)
    return SecureEstimationReport(
        estimation=secured,
        ideal=ideal,
        acceptance_rate=float(counts_arr.sum() / (nu * r)),
        accepted_counts=counts_arr,
        delta=delta,
        alpha=alpha,
        beta=abs(float(d_est.mean())),
        beta_se=se(d_est),
        gamma=abs(float(d_sq.mean())),
        gamma_se=se(d_sq),
        beta_bound=beta_bound,
        gamma_bound=gamma_bound,
    )
