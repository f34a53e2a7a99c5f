"""Parameter encoding, estimation by repeated measurement, and bias bounds.

The estimation pipeline encodes ``theta`` into a probe, measures an observable
``nu`` times, averages the eigenvalues and inverts the ideal expectation curve.
Outcomes are drawn by inverse-CDF from uniforms on a dedicated measurement
stream, so ideal and perturbed sources run with the same seed are coupled
shot by shot (common random numbers).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
from scipy.optimize import brentq

from .pauli import PauliOperator
from .states import (
    DensityMatrix,
    DimensionError,
    KrausChannel,
    Observable,
    as_array,
    permute_qubits,
    trace_distance,
)

DEFAULT_MAX_QUBITS = 10
MIN_SHOTS = 30
CLAMP_MARGIN = 1e-12
FD_STEP = 1e-5


class EstimationError(ValueError):
    pass


class VanishingDerivativeError(EstimationError):
    pass


# -- encoding ---------------------------------------------------------------

def embed_operator(op: np.ndarray, positions: Sequence[int], num_qubits: int) -> np.ndarray:
    """Lift an operator on ``len(positions)`` qubits to ``num_qubits`` qubits, identity elsewhere."""
    positions = list(positions)
    rest = [q for q in range(num_qubits) if q not in positions]
    return permute_qubits(np.kron(op, np.eye(1 << len(rest))), positions + rest)


@dataclass(frozen=True)
class EncodingChannel:
    """Unitary parameter family ``rho -> U_theta rho U_theta^dagger`` with ``U_theta = exp(-i theta G)``.

    ``generator`` is the Hermitian generator ``G`` on ``num_qubits`` qubits.
    A non-unitary family can be supplied instead through ``family``, a callable
    returning a :class:`KrausChannel` for each ``theta``; derivatives then fall
    back to finite differences.
    """

    num_qubits: int
    theta: float
    generator: np.ndarray | None = field(default=None, compare=False, repr=False)
    family: Callable[[float], KrausChannel] | None = field(default=None, compare=False, repr=False)

    def at(self, theta: float) -> "EncodingChannel":
        return EncodingChannel(self.num_qubits, theta, self.generator, self.family)

    @property
    def is_unitary_family(self) -> bool:
        return self.generator is not None

    def unitary(self, theta: float | None = None) -> np.ndarray:
        if self.generator is None:
            raise TypeError("encoding has no unitary generator")
        th = self.theta if theta is None else theta
        vals, vecs = np.linalg.eigh(self.generator)
        return (vecs * np.exp(-1j * th * vals)) @ vecs.conj().T

    def channel(self) -> KrausChannel:
        if self.generator is not None:
            return KrausChannel([self.unitary()], name=f"encode({self.theta:g})")
        return self.family(self.theta)

    def apply(self, rho) -> np.ndarray:
        arr = as_array(rho)
        if arr.shape[-1] != 1 << self.num_qubits:
            raise DimensionError("encoding and state dimensions differ")
        if self.generator is not None:
            u = self.unitary()
            return u @ arr @ u.conj().T
        return self.family(self.theta).apply(arr)

    def apply_on(self, rho, positions: Sequence[int], num_qubits: int) -> np.ndarray:
        """Encode only the qubits at ``positions`` of a larger ``num_qubits`` register."""
        arr = as_array(rho)
        if len(positions) != self.num_qubits:
            raise DimensionError("number of encoded positions differs from encoding arity")
        if self.generator is not None:
            u = embed_operator(self.unitary(), positions, num_qubits)
            return u @ arr @ u.conj().T
        ops = [embed_operator(k, positions, num_qubits) for k in self.family(self.theta).operators]
        return KrausChannel(ops, check=False).apply(arr)

    def then(self, other: "EncodingChannel") -> "EncodingChannel":
        """``other`` applied after ``self``; for a shared generator this is a shift of theta."""
        if self.generator is None or other.generator is None or not np.allclose(self.generator, other.generator):
            raise ValueError("composition as a single encoding needs a shared generator")
        return self.at(self.theta + other.theta)


def _phase_generator(n: int) -> np.ndarray:
    # sum_j Z_j / 2 is diagonal: (n - 2 * popcount(b)) / 2 on basis state b
    d = 1 << n
    weights = np.array([bin(b).count("1") for b in range(d)])
    return np.diag((n - 2 * weights) / 2.0).astype(complex)


def phase_encoding(n: int, theta: float) -> EncodingChannel:
    """``U_theta^{(x)n}`` with ``U_x = exp(-i x Z / 2)`` on every qubit."""
    return EncodingChannel(n, float(theta), generator=_phase_generator(n))


def prepare_ghz(n: int, max_qubits: int = DEFAULT_MAX_QUBITS) -> DensityMatrix:
    """``(|0...0> + |1...1>)/sqrt(2)`` as a density matrix."""
    if not 1 <= n <= max_qubits:
        raise ValueError(f"GHZ size must satisfy 1 <= n <= {max_qubits}, got {n}")
    d = 1 << n
    v = np.zeros(d, dtype=complex)
    v[0] = v[-1] = 1 / math.sqrt(2)
    return DensityMatrix.from_vector(v)


def parity_observable(n: int, letter: str = "X") -> Observable:
    return Observable.from_pauli(PauliOperator.from_label(letter * n))


# -- expectation models -------------------------------------------------------

class GHZPhaseModel:
    """Closed form for GHZ probes under phase encoding measured with ``X^{(x)n}``."""

    def __init__(self, n: int):
        self.n = n
        self.o = 1.0

    def value(self, theta: float) -> float:
        return math.cos(self.n * theta)

    def derivative(self, theta: float) -> float:
        return -self.n * math.sin(self.n * theta)

    def variance(self, theta: float) -> float:
        return math.sin(self.n * theta) ** 2

    def probabilities(self, theta: float) -> np.ndarray:
        c = math.cos(self.n * theta)
        return np.array([(1 - c) / 2, (1 + c) / 2])

    def invert(self, v: float, window: tuple[float, float]) -> float:
        if v > 1 + CLAMP_MARGIN or v < -1 - CLAMP_MARGIN:
            raise EstimationError(f"mean outcome {v!r} lies outside the invertible range [-1, 1]")
        base = math.acos(min(1.0, max(-1.0, v))) / self.n
        return _branch_in_window(base, 2 * math.pi / self.n, window, self.value, v)


def _branch_in_window(base, period, window, f, v):
    lo, hi = window
    k_lo = math.floor((lo - base) / period) - 1
    k_hi = math.ceil((hi + base) / period) + 1
    centre = (lo + hi) / 2
    candidates = []
    for k in range(k_lo, k_hi + 1):
        for c in (base + k * period, -base + k * period):
            if lo - 1e-15 <= c <= hi + 1e-15:
                candidates.append(c)
    if candidates:
        return min(candidates, key=lambda c: (abs(c - centre), c))
    # sampled mean beyond the window's range: clamp to the closer edge in value
    return lo if abs(f(lo) - v) <= abs(f(hi) - v) else hi


class DenseModel:
    """Expectation curve ``Tr(O Lambda_theta(probe))`` evaluated on dense matrices."""

    def __init__(self, probe, encoding: EncodingChannel, observable: Observable):
        self.probe = as_array(probe)
        self.encoding = encoding
        self.observable = observable
        self.o = observable.max_abs_eigenvalue
        if self.probe.shape != observable.matrix.shape:
            raise DimensionError("probe and observable dimensions differ")

    def state(self, theta: float) -> np.ndarray:
        return self.encoding.at(theta).apply(self.probe)

    def value(self, theta: float) -> float:
        return float(np.trace(self.observable.matrix @ self.state(theta)).real)

    def second_moment(self, theta: float) -> float:
        o = self.observable.matrix
        return float(np.trace(o @ o @ self.state(theta)).real)

    def variance(self, theta: float) -> float:
        return self.second_moment(theta) - self.value(theta) ** 2

    def probabilities(self, theta: float) -> np.ndarray:
        return self.observable.probabilities(self.state(theta))

    def derivative(self, theta: float) -> float:
        if self.encoding.is_unitary_family:
            # d/dtheta rho_theta = -i [G, rho_theta]
            rho = self.state(theta)
            g = self.encoding.generator
            comm = g @ rho - rho @ g
            return float(np.trace(self.observable.matrix @ (-1j * comm)).real)
        return richardson_derivative(self.value, theta)

    def invert(self, v: float, window: tuple[float, float]) -> float:
        lo, hi = window
        lo_v, hi_v = self.value(lo), self.value(hi)
        spec_lo, spec_hi = self.observable.eigenvalues.min(), self.observable.eigenvalues.max()
        if v > spec_hi + CLAMP_MARGIN or v < spec_lo - CLAMP_MARGIN:
            raise EstimationError(f"mean outcome {v!r} lies outside the spectrum of the observable")
        if min(lo_v, hi_v) <= v <= max(lo_v, hi_v):
            if lo_v == v:
                return lo
            if hi_v == v:
                return hi
            return brentq(lambda t: self.value(t) - v, lo, hi, xtol=1e-14)
        return lo if abs(lo_v - v) <= abs(hi_v - v) else hi


def richardson_derivative(f: Callable[[float], float], x: float, h: float = FD_STEP) -> float:
    """Central difference with one Richardson step: ``(4 D(h/2) - D(h)) / 3``."""
    if x + h == x or x + h / 2 == x:
        raise EstimationError("finite-difference step underflows at this parameter value")
    d1 = (f(x + h) - f(x - h)) / (2 * h)
    d2 = (f(x + h / 2) - f(x - h / 2)) / h
    return (4 * d2 - d1) / 3


def _is_canonical_ghz(probe, encoding, observable) -> bool:
    if probe is None:
        return True
    n = encoding.num_qubits
    return (
        np.allclose(as_array(probe), prepare_ghz(n).data)
        and encoding.generator is not None
        and np.allclose(encoding.generator, _phase_generator(n))
        and np.allclose(observable.matrix, parity_observable(n).matrix)
    )


def expectation_model(probe, encoding: EncodingChannel, observable: Observable):
    """Closed-form model for the canonical GHZ case, dense model otherwise."""
    if _is_canonical_ghz(probe, encoding, observable):
        return GHZPhaseModel(encoding.num_qubits)
    return DenseModel(probe, encoding, observable)


# -- estimation ---------------------------------------------------------------

@dataclass(frozen=True)
class EstimationConfig:
    n: int
    nu: int
    theta_true: float
    window: tuple[float, float]
    observable: Observable | None = None
    probe: DensityMatrix | None = None
    repetitions: int = 1
    allow_small_nu: bool = False

    def __post_init__(self):
        if self.nu < 1:
            raise ValueError("nu must be at least 1")
        if self.nu < MIN_SHOTS:
            if not self.allow_small_nu:
                raise ValueError(f"nu={self.nu} is below {MIN_SHOTS}; the linearized estimator needs many shots")
            warnings.warn(f"nu={self.nu} < {MIN_SHOTS}: linear error propagation may be inaccurate", stacklevel=2)
        lo, hi = self.window
        if not lo < self.theta_true < hi and not (lo <= self.theta_true <= hi and lo < hi):
            raise ValueError("theta_true must lie inside the inversion window")
        if self.repetitions < 1:
            raise ValueError("need at least one repetition")
        if self.observable is None:
            object.__setattr__(self, "observable", parity_observable(self.n))

    @property
    def encoding(self) -> EncodingChannel:
        return phase_encoding(self.n, self.theta_true)

    def model(self):
        return expectation_model(self.probe, self.encoding, self.observable)

    def ideal_state(self) -> np.ndarray:
        probe = prepare_ghz(self.n) if self.probe is None else self.probe
        return self.encoding.apply(probe)


@dataclass
class EstimationResult:
    theta_true: float
    estimates: np.ndarray
    mean_outcomes: np.ndarray
    shots: np.ndarray

    @property
    def theta_hat(self) -> float:
        return float(self.estimates[0])

    @property
    def mean_estimate(self) -> float:
        return float(self.estimates.mean())

    @property
    def squared_errors(self) -> np.ndarray:
        return (self.estimates - self.theta_true) ** 2

    @property
    def empirical_mse(self) -> float:
        return float(self.squared_errors.mean())

    @property
    def mse_standard_error(self) -> float:
        r = len(self.estimates)
        return float(self.squared_errors.std(ddof=1) / math.sqrt(r)) if r > 1 else float("nan")

    @property
    def shots_used(self) -> int:
        return int(self.shots.sum())


Source = Union[DensityMatrix, np.ndarray, Sequence, Callable[[np.random.Generator], Sequence]]


def _source_probabilities(source, obs: Observable, rng: np.random.Generator, nu: int) -> np.ndarray:
    if callable(source) and not isinstance(source, (DensityMatrix, np.ndarray)):
        source = source(rng)
    if isinstance(source, DensityMatrix) or (isinstance(source, np.ndarray) and source.ndim == 2):
        return obs.probabilities(source)[None, :]
    states = [as_array(s) for s in source]
    if not states:
        raise EstimationError("the source supplied no states")
    return obs.probabilities(np.stack(states))


def sample_outcomes(probs: np.ndarray, eigenvalues: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Inverse-CDF sampling; ``probs`` is ``(k,)`` for i.i.d. shots or ``(nu, k)`` per shot."""
    probs = np.atleast_2d(probs)
    cdf = np.cumsum(probs / probs.sum(axis=1, keepdims=True), axis=1)
    idx = (uniforms[:, None] >= cdf[:, :-1]).sum(axis=1)
    return eigenvalues[idx]


def run_estimation(source: Source, cfg: EstimationConfig, rng: np.random.Generator) -> EstimationResult:
    """Repeat the prepare-and-measure experiment ``cfg.repetitions`` times.

    ``source`` is a single state (``nu`` i.i.d. copies), a sequence of states
    (one per shot, its length sets the shot count), or a callable that returns
    such a sequence for every repetition.
    """
    model = cfg.model()
    obs = cfg.observable
    estimates = np.empty(cfg.repetitions)
    means = np.empty(cfg.repetitions)
    shots = np.empty(cfg.repetitions, dtype=int)
    for r in range(cfg.repetitions):
        src_rng, meas_rng = rng.spawn(2)
        probs = _source_probabilities(source, obs, src_rng, cfg.nu)
        nu = cfg.nu if probs.shape[0] == 1 else probs.shape[0]
        if nu == 0:
            raise EstimationError("the source supplied no states")
        u = meas_rng.random(cfg.nu)[:nu] if nu <= cfg.nu else meas_rng.random(nu)
        outcomes = sample_outcomes(probs, obs.eigenvalues, u)
        means[r] = outcomes.mean()
        estimates[r] = model.invert(means[r], cfg.window)
        shots[r] = nu
    return EstimationResult(cfg.theta_true, estimates, means, shots)


def error_propagation_precision(obs: Observable, probe, enc: EncodingChannel, theta: float, nu: int) -> float:
    """``Var(O)_theta / (nu |d<O>_theta/dtheta|^2)``."""
    model = expectation_model(probe, enc, obs)
    deriv = model.derivative(theta)
    if abs(deriv) <= 1e-9:
        raise VanishingDerivativeError(f"d<O>/dtheta vanishes at theta={theta!r}")
    return model.variance(theta) / (nu * deriv**2)


def classical_fisher_information(obs: Observable, probe, enc: EncodingChannel, theta: float) -> float:
    """``sum_i (dp_i/dtheta)^2 / p_i`` with Richardson-extrapolated central differences."""
    model = DenseModel(probe, enc, obs)
    p = model.probabilities(theta)
    dp = np.array([richardson_derivative(lambda t, i=i: model.probabilities(t)[i], theta) for i in range(len(p))])
    keep = p > 1e-12
    return float(np.sum(dp[keep] ** 2 / p[keep]))


def theorem1_bounds(o: float, deriv: float, eps: float, nu: int) -> tuple[float, float]:
    """Estimate-bias and precision-bias bounds for a source ``eps`` away from ideal.

    ``beta <= 2 o eps / |d<O>|`` and ``gamma <= 4 o^2 (2 eps / nu + eps^2) / |d<O>|^2``.
    """
    if deriv <= 0:
        raise ValueError("derivative magnitude must be positive")
    if eps < 0 or nu < 1:
        raise ValueError("need eps >= 0 and nu >= 1")
    beta = 2 * o * eps / deriv
    gamma = 4 * o**2 * (2 * eps / nu + eps**2) / deriv**2
    return beta, gamma


def epsilon_of_resource(states: Sequence, ideal) -> float:
    """Average trace distance of the per-copy states from the ideal state."""
    ideal = as_array(ideal)
    if len(states) == 0:
        raise ValueError("need at least one state")
    return float(np.mean([trace_distance(as_array(s), ideal) for s in states]))


def convex_perturbation(ideal, sigma, eps: float) -> DensityMatrix:
    """``(1 - eps) ideal + eps sigma``; its trace distance to ``ideal`` is at most ``eps``."""
    return DensityMatrix((1 - eps) * as_array(ideal) + eps * as_array(sigma), validate=False)


@dataclass
class BiasMeasurement:
    beta: float
    beta_se: float
    gamma: float
    gamma_se: float
    beta_bound: float
    gamma_bound: float
    epsilon: float
    ideal: EstimationResult
    perturbed: EstimationResult

    @property
    def within_bounds(self) -> bool:
        return (
            self.beta <= self.beta_bound + 3 * self.beta_se
            and self.gamma <= self.gamma_bound + 3 * self.gamma_se
        )


def measure_bias(perturbed: Source, cfg: EstimationConfig, seed: int, eps: float, ideal: Source | None = None) -> BiasMeasurement:
    """Paired Monte Carlo estimate of the estimate and precision biases.

    Both runs use generators seeded with ``seed`` so shot ``j`` of repetition
    ``r`` consumes the same uniform in each run.
    """
    ideal_source = DensityMatrix(cfg.ideal_state(), validate=False) if ideal is None else ideal
    base = run_estimation(ideal_source, cfg, np.random.default_rng(seed))
    pert = run_estimation(perturbed, cfg, np.random.default_rng(seed))
    r = cfg.repetitions
    d_est = pert.estimates - base.estimates
    d_sq = pert.squared_errors - base.squared_errors
    model = cfg.model()
    deriv = abs(model.derivative(cfg.theta_true))
    beta_bound, gamma_bound = theorem1_bounds(model.o, deriv, eps, cfg.nu)
    return BiasMeasurement(
        beta=abs(float(d_est.mean())),
        beta_se=float(d_est.std(ddof=1) / math.sqrt(r)),
        gamma=abs(float(d_sq.mean())),
        gamma_se=float(d_sq.std(ddof=1) / math.sqrt(r)),
        beta_bound=beta_bound,
        gamma_bound=gamma_bound,
        epsilon=eps,
        ideal=base,
        perturbed=pert,
    )


SOURCE_KINDS = ("mixed", "worst", "random", "per-copy")


def perturbed_source(kind: str, ideal, obs: Observable, eps: float, nu: int):
    """Sources whose average trace distance to ``ideal`` is at most ``eps``.

    ``mixed``: ``(1-eps) ideal + eps I/d`` for every copy. ``worst``: mix in the
    eigenspace of ``O`` whose eigenvalue is farthest from ``<O>``. ``random``:
    each copy mixes in a fresh Haar-random pure state. ``per-copy``: the first
    half of the copies carry ``2 eps`` of the worst-case state, the rest are ideal.
    """
    from .states import random_pure_state

    ideal = as_array(ideal)
    d = ideal.shape[0]
    if not 0 <= eps <= 1:
        raise ValueError("eps must lie in [0, 1]")
    mean = float(np.trace(obs.matrix @ ideal).real)
    far = int(np.argmax(np.abs(obs.eigenvalues - mean)))
    worst = obs.projectors[far] / np.trace(obs.projectors[far]).real
    if kind == "mixed":
        return convex_perturbation(ideal, np.eye(d) / d, eps)
    if kind == "worst":
        return convex_perturbation(ideal, worst, eps)
    if kind == "random":
        n = d.bit_length() - 1

        def draw(rng):
            return [convex_perturbation(ideal, random_pure_state(n, rng), eps) for _ in range(nu)]

        return draw
    if kind == "per-copy":
        if eps > 0.5:
            raise ValueError("per-copy perturbation needs eps <= 0.5")
        bad = convex_perturbation(ideal, worst, 2 * eps)
        good = DensityMatrix(ideal, validate=False)
        return [bad] * (nu // 2) + [good] * (nu - nu // 2)
    raise ValueError(f"unknown source kind {kind!r}; choose from {', '.join(SOURCE_KINDS)}")
