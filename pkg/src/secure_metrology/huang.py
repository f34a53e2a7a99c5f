"""The randomized remote phase-estimation protocol and an undetectable attack on it.

Each round Alice sends one of four ``n``-qubit states: ``psi+ = (|0..0> + |1..1>)/sqrt2``
and ``psi-`` (each with probability ``P_A/2``) or the decoys ``|0..0>`` and
``|1..1>`` (each ``(1-P_A)/2``). Charlie applies ``U_{theta + m pi/n}`` (with
probability ``P_C``) or ``U_{m pi/n}`` on every qubit, with ``m`` uniform in
``[0, n-1]``. Alice checks decoys in the computational basis and unencoded
phase states with ``X^{(x)n}``, expecting the sign ``+-(-1)^m``.

The attack: Eve keeps Alice's state, sends ``psi+`` of her own to Charlie,
measures ``X^{(x)n}`` on what comes back, and forwards Alice's state with a
correction applied iff she saw ``-1``. The correction has to swap ``psi+`` and
``psi-``. ``Z^{(x)n}`` does that only for odd ``n``: on ``|1..1>`` it gives
``(-1)^n``, so for even ``n`` it fixes both states and the attack is caught.
The default ``"flip"`` correction is ``Z^{(x)n}`` for odd ``n`` and ``Z`` on the
first qubit for even ``n``; ``"literal"`` always uses ``Z^{(x)n}``.

Outcome probabilities for every (Alice state, encoded, m, Eve record) case are
computed from dense state vectors once and then sampled for all rounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .metrology import GHZPhaseModel, phase_encoding, richardson_derivative
from .pauli import PauliOperator
from .states import Observable

ALICE_STATES = ("psi+", "psi-", "d0", "d1")
EVE_MODES = ("absent", "undetectable_attack")
CORRECTIONS = ("flip", "literal")


@dataclass(frozen=True)
class HuangConfig:
    n: int
    p_a: float
    p_c: float
    theta: float
    rounds: int
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one qubit")
        for name in ("p_a", "p_c"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.rounds < 1:
            raise ValueError("need at least one round")

    @property
    def alice_probabilities(self) -> np.ndarray:
        a = self.p_a
        return np.array([a / 2, a / 2, (1 - a) / 2, (1 - a) / 2])


@dataclass
class RoundTranscript:
    alice_choice: str
    charlie_encoded: bool
    charlie_m: int
    eve_action: str
    alice_verdict: str
    eve_record: int | None
    alice_outcome: int | None


@dataclass
class HuangRun:
    detection_count: int
    alice_choice: np.ndarray
    encoded: np.ndarray
    charlie_m: np.ndarray
    eve_records: np.ndarray | None
    alice_outcomes: np.ndarray
    detected: np.ndarray
    transcripts: list[RoundTranscript] | None = field(default=None, repr=False)

    @property
    def eve_samples(self) -> np.ndarray | None:
        return self.eve_records


# -- dense states -----------------------------------------------------------

def alice_state(n: int, choice: int) -> np.ndarray:
    d = 1 << n
    v = np.zeros(d, dtype=complex)
    if choice in (0, 1):
        v[0] = 1 / math.sqrt(2)
        v[-1] = (1 if choice == 0 else -1) / math.sqrt(2)
    else:
        v[0 if choice == 2 else -1] = 1.0
    return v


def charlie_unitary_diag(n: int, x: float) -> np.ndarray:
    """Diagonal of ``U_x^{(x)n}``, ``U_x = exp(-i x Z / 2)``."""
    return np.diag(phase_encoding(n, x).unitary()).copy()


def _charlie_angle(cfg: HuangConfig, encoded: bool, m: int) -> float:
    return (cfg.theta if encoded else 0.0) + m * math.pi / cfg.n


def _parity_projectors(n: int) -> dict[int, np.ndarray]:
    obs = Observable.from_pauli(PauliOperator.from_label("X" * n))
    return {int(round(v)): p for v, p in zip(obs.eigenvalues, obs.projectors)}


def _prob(proj: np.ndarray, v: np.ndarray) -> float:
    return float(np.real(np.vdot(v, proj @ v)))


def _zn(n: int) -> np.ndarray:
    d = 1 << n
    return np.array([(-1) ** bin(b).count("1") for b in range(d)], dtype=complex)


def correction_diag(n: int, correction: str = "flip") -> np.ndarray:
    """Diagonal of Eve's correction: ``Z^{(x)n}``, or ``Z (x) I`` when ``n`` is even and ``correction="flip"``."""
    if correction not in CORRECTIONS:
        raise ValueError(f"correction must be one of {CORRECTIONS}")
    if correction == "literal" or n % 2 == 1:
        return _zn(n)
    d = 1 << n
    return np.array([-1 if b >> (n - 1) else 1 for b in range(d)], dtype=complex)


def forwarded_state(n: int, choice: int, record: int, correction: str = "flip") -> np.ndarray:
    """Alice's own state, with Eve's correction applied when she recorded ``-1``."""
    v = alice_state(n, choice)
    return correction_diag(n, correction) * v if record == -1 else v


def _case_tables(cfg: HuangConfig, correction: str = "flip"):
    """Probabilities indexed by ``[choice, encoded, m]`` (and Eve's record)."""
    n = cfg.n
    proj = _parity_projectors(n)
    psi_plus = alice_state(n, 0)
    eve_plus = np.zeros((2, n))
    # probability that Alice's check / outcome is "+1" or "as expected"
    honest_plus = np.zeros((4, 2, n))
    attacked_plus = np.zeros((4, 2, n, 2))
    for enc in (0, 1):
        for m in range(n):
            u = charlie_unitary_diag(n, _charlie_angle(cfg, bool(enc), m))
            eve_plus[enc, m] = _prob(proj[1], u * psi_plus)
            for c in range(4):
                received = u * alice_state(n, c)
                honest_plus[c, enc, m] = _alice_pass_or_plus(n, c, enc, m, received, proj)
                for ri, r in enumerate((1, -1)):
                    fwd = forwarded_state(n, c, r, correction)
                    attacked_plus[c, enc, m, ri] = _alice_pass_or_plus(n, c, enc, m, fwd, proj)
    return eve_plus, honest_plus, attacked_plus


def _alice_pass_or_plus(n, c, enc, m, v, proj) -> float:
    if c >= 2:
        # decoy: probability the computational-basis outcome equals the sent string
        return float(abs(v[0 if c == 2 else -1]) ** 2)
    if enc:
        return _prob(proj[1], v)
    expected = (1 if c == 0 else -1) * (-1) ** m
    return _prob(proj[expected], v)


def run_huang(
    cfg: HuangConfig, eve: str = "absent", transcripts: bool = False, rng=None, correction: str = "flip"
) -> HuangRun:
    """Simulate ``cfg.rounds`` rounds and count Alice's failed deterministic checks."""
    if eve not in EVE_MODES:
        raise ValueError(f"eve must be one of {EVE_MODES}")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    n, k = cfg.n, cfg.rounds
    choice = rng.choice(4, size=k, p=cfg.alice_probabilities)
    encoded = (rng.random(k) < cfg.p_c).astype(int)
    m = rng.integers(0, n, size=k)
    u_eve, u_alice = rng.random(k), rng.random(k)
    eve_plus, honest_plus, attacked_plus = _case_tables(cfg, correction)
    if eve == "absent":
        records = None
        p_alice = honest_plus[choice, encoded, m]
    else:
        records = np.where(u_eve < eve_plus[encoded, m], 1, -1)
        p_alice = attacked_plus[choice, encoded, m, (records == -1).astype(int)]
    hit = u_alice < p_alice
    checked = (choice >= 2) | (encoded == 0)
    detected = checked & ~hit
    outcomes = np.where(checked, 0, np.where(hit, 1, -1))
    run = HuangRun(int(detected.sum()), choice, encoded.astype(bool), m, records, outcomes, detected)
    if transcripts:
        run.transcripts = [
            RoundTranscript(
                alice_choice=ALICE_STATES[choice[i]],
                charlie_encoded=bool(encoded[i]),
                charlie_m=int(m[i]),
                eve_action="none" if records is None else ("forward" if records[i] == 1 else "correct and forward"),
                alice_verdict="detect" if detected[i] else "pass",
                eve_record=None if records is None else int(records[i]),
                alice_outcome=None if checked[i] else int(outcomes[i]),
            )
            for i in range(k)
        ]
    return run


# -- Eve's estimate ---------------------------------------------------------

def eve_expectation(cfg: HuangConfig, m: int = 0) -> float:
    """``<X^{(x)n}>`` on Eve's returned state: ``-2(-1)^m P_C sin^2(n theta/2) + (-1)^m``."""
    s = (-1) ** m
    return -2 * s * cfg.p_c * math.sin(cfg.n * cfg.theta / 2) ** 2 + s


def eve_precision(cfg: HuangConfig) -> float:
    """``(1 + (1/P_C - 1) sec^2(n theta / 2)) / (nu_A n^2)``."""
    if cfg.p_c == 0:
        raise ValueError("Eve learns nothing when Charlie never encodes")
    c = math.cos(cfg.n * cfg.theta / 2)
    if abs(c) < 1e-12:
        raise ValueError("sec^2(n theta / 2) is singular at this theta")
    return (1 + (1 / cfg.p_c - 1) / c**2) / (cfg.rounds * cfg.n**2)


def eve_estimate(records: np.ndarray, m: np.ndarray, cfg: HuangConfig) -> float:
    """Invert the expectation with known ``m`` and ``P_C`` on the window ``n theta in (0, pi)``."""
    if cfg.p_c == 0:
        raise ValueError("Eve learns nothing when Charlie never encodes")
    y = float(np.mean(records * (-1.0) ** m))
    v = 1 - (1 - y) / cfg.p_c
    v = min(1.0, max(-1.0, v))
    return GHZPhaseModel(cfg.n).invert(v, (0.0, math.pi / cfg.n))


def eve_monte_carlo(cfg: HuangConfig, repetitions: int, rng: np.random.Generator) -> np.ndarray:
    """Eve's estimates from ``repetitions`` independent runs of the attack."""
    out = np.empty(repetitions)
    for r in range(repetitions):
        run = run_huang(cfg, "undetectable_attack", rng=rng)
        out[r] = eve_estimate(run.eve_records, run.charlie_m, cfg)
    return out


# -- Alice's information under attack ---------------------------------------

def _alice_encoded_probabilities(cfg: HuangConfig, theta: float, choice: int, m: int, eve: str) -> np.ndarray:
    """Joint probabilities ``p(record, outcome)`` for Alice's ``X^{(x)n}`` on an encoded phase round."""
    n = cfg.n
    proj = _parity_projectors(n)
    c = HuangConfig(n, cfg.p_a, cfg.p_c, theta, cfg.rounds, cfg.seed)
    u = charlie_unitary_diag(n, _charlie_angle(c, True, m))
    if eve == "absent":
        v = u * alice_state(n, choice)
        return np.array([[_prob(proj[1], v), _prob(proj[-1], v)]])
    p_eve = _prob(proj[1], u * alice_state(n, 0))
    rows = []
    for r, pr in ((1, p_eve), (-1, 1 - p_eve)):
        v = forwarded_state(n, choice, r)
        rows.append([pr * _prob(proj[1], v), pr * _prob(proj[-1], v)])
    return np.array(rows)


def _fisher(prob_fn, theta: float) -> float:
    p = prob_fn(theta)
    total = 0.0
    for idx in np.ndindex(p.shape):
        if p[idx] > 1e-12:
            dp = richardson_derivative(lambda t, i=idx: prob_fn(t)[i], theta)
            total += dp * dp / p[idx]
    return total


def alice_fisher_information(cfg: HuangConfig, eve: str = "undetectable_attack", conditional: bool = True) -> float:
    """Fisher information about ``theta`` in Alice's outcome on an encoded phase round.

    Averaged over Alice's two phase states and Charlie's ``m``. Under attack
    with ``conditional=True`` the outcome is conditioned on Eve's record: the
    forwarded state is then one of Alice's own states and carries nothing
    about ``theta``. With ``conditional=False`` the record is marginalized,
    and the outcome inherits the correlation Eve imprinted through her ``Z``
    correction.
    """
    vals = []
    for choice in (0, 1):
        for m in range(cfg.n):
            def joint(t, choice=choice, m=m):
                return _alice_encoded_probabilities(cfg, t, choice, m, eve)

            if eve == "absent" or not conditional:
                vals.append(_fisher(lambda t: joint(t).sum(axis=0), cfg.theta))
            else:
                # sum_r p(r) I(theta | r) with I computed from p(outcome | r)
                p_r = joint(cfg.theta).sum(axis=1)
                info = 0.0
                for ri in range(2):
                    if p_r[ri] > 1e-12:
                        info += p_r[ri] * _fisher(lambda t, ri=ri: _conditional(joint(t), ri), cfg.theta)
                vals.append(info)
    return float(np.mean(vals))


def _conditional(joint: np.ndarray, row: int) -> np.ndarray:
    total = joint[row].sum()
    return joint[row] / total if total > 0 else joint[row]


def decoy_distribution(n: int, bit: int, x: float) -> np.ndarray:
    """Computational-basis distribution of ``U_x^{(x)n} |bit...bit>``."""
    v = charlie_unitary_diag(n, x) * alice_state(n, 2 + bit)
    return np.abs(v) ** 2


def state_discrimination_undetected_probability(p_a: float, p_c: float, k: int) -> float:
    """``(1 - (1 - P_A P_C)/4)^k``: chance the earlier state-discrimination attack goes unnoticed on ``k`` rounds.

    Reported for reference only; that attack is not simulated.
    """
    return (1 - (1 - p_a * p_c) / 4) ** k
