import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from secure_metrology.metrology import (
    DenseModel,
    EncodingChannel,
    EstimationConfig,
    GHZPhaseModel,
    SOURCE_KINDS,
    VanishingDerivativeError,
    classical_fisher_information,
    convex_perturbation,
    embed_operator,
    epsilon_of_resource,
    error_propagation_precision,
    measure_bias,
    parity_observable,
    perturbed_source,
    phase_encoding,
    prepare_ghz,
    richardson_derivative,
    run_estimation,
    theorem1_bounds,
)
from secure_metrology.pauli import PauliOperator
from secure_metrology.states import (
    DensityMatrix,
    Observable,
    partial_trace,
    random_density_matrix,
    random_pure_state,
    random_unitary,
    trace_distance,
)

seeds = st.integers(0, 2**32 - 1)


# -- states and encoding ------------------------------------------------------

def test_ghz_small_cases():
    plus = DensityMatrix.from_vector(np.array([1, 1]) / math.sqrt(2))
    assert np.allclose(prepare_ghz(1).data, plus.data)
    xx = PauliOperator.from_label("XX").to_matrix()
    assert np.trace(xx @ prepare_ghz(2).data).real == pytest.approx(1)


@pytest.mark.parametrize("q", [0, 1, 2])
def test_ghz_single_qubit_marginal_is_mixed(q):
    assert np.allclose(partial_trace(prepare_ghz(3), [q]).data, np.eye(2) / 2)


def test_ghz_size_checked():
    with pytest.raises(ValueError):
        prepare_ghz(0)
    with pytest.raises(ValueError):
        prepare_ghz(11)


def test_phase_encoding_matches_kron_of_single_qubit_rotations():
    theta = 0.37
    u1 = np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])
    expected = np.kron(np.kron(u1, u1), u1)
    assert np.allclose(phase_encoding(3, theta).unitary(), expected)


def test_zero_phase_is_identity(rng):
    rho = random_density_matrix(2, rng).data
    assert np.allclose(phase_encoding(2, 0.0).apply(rho), rho)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_encoding_composition(a, b):
    ea, eb = phase_encoding(2, a), phase_encoding(2, b)
    assert np.allclose(eb.unitary() @ ea.unitary(), ea.then(eb).unitary())
    assert ea.then(eb).theta == pytest.approx(a + b)


def test_apply_on_subset_matches_embedding(rng):
    rho = random_density_matrix(3, rng).data
    enc = phase_encoding(2, 0.8)
    u = enc.unitary()
    # qubits 2 and 0 carry the encoding; factor order follows positions
    full = embed_operator(u, [2, 0], 3)
    assert np.allclose(enc.apply_on(rho, [2, 0], 3), full @ rho @ full.conj().T)
    # diagonal generator is symmetric so the placement order does not matter here
    u1 = np.diag([np.exp(-0.4j), np.exp(0.4j)])
    assert np.allclose(full, np.kron(np.kron(u1, np.eye(2)), u1))


# -- models -------------------------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("theta", [0.1, 0.3, 0.7])
def test_ghz_model_matches_dense_model(n, theta):
    ghz = GHZPhaseModel(n)
    dense = DenseModel(prepare_ghz(n), phase_encoding(n, 0.0), parity_observable(n))
    assert ghz.value(theta) == pytest.approx(math.cos(n * theta))
    assert dense.value(theta) == pytest.approx(ghz.value(theta), abs=1e-12)
    assert dense.derivative(theta) == pytest.approx(-n * math.sin(n * theta), abs=1e-12)
    assert dense.variance(theta) == pytest.approx(ghz.variance(theta), abs=1e-12)


@given(st.integers(1, 4), st.floats(0.05, 0.95))
def test_ghz_inversion_roundtrip(n, frac):
    model = GHZPhaseModel(n)
    theta = frac * math.pi / n
    window = (0.0, math.pi / n)
    assert model.invert(model.value(theta), window) == pytest.approx(theta, abs=1e-9)


@given(seeds, st.floats(0.05, 0.95))
def test_dense_inversion_roundtrip(seed, frac):
    # <X> on one qubit is R cos(theta - phi): monotone on (phi, phi + pi)
    probe = random_pure_state(1, np.random.default_rng(seed))
    model = DenseModel(probe, phase_encoding(1, 0.0), parity_observable(1))
    phi = math.atan2(model.value(math.pi / 2), model.value(0.0))
    if abs(model.value(phi)) < 1e-3:
        return
    window = (phi + 0.01, phi + math.pi - 0.01)
    theta = window[0] + frac * (window[1] - window[0])
    assert model.invert(model.value(theta), window) == pytest.approx(theta, abs=1e-7)


def test_richardson_derivative_accuracy():
    assert richardson_derivative(math.sin, 0.4) == pytest.approx(math.cos(0.4), abs=1e-10)


# -- precision and Fisher information -------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_error_propagation_ghz_heisenberg(n):
    theta = 0.3 / n
    value = error_propagation_precision(parity_observable(n), prepare_ghz(n), phase_encoding(n, 0), theta, 1000)
    assert value == pytest.approx(1 / (1000 * n * n))


def test_error_propagation_single_qubit_example():
    plus = prepare_ghz(1)
    value = error_propagation_precision(parity_observable(1), plus, phase_encoding(1, 0), math.pi / 2, 100)
    assert value == pytest.approx(0.01)


def test_error_propagation_stationary_point_raises():
    with pytest.raises(VanishingDerivativeError):
        error_propagation_precision(parity_observable(2), prepare_ghz(2), phase_encoding(2, 0), 0.0, 100)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("theta", [0.2, 0.5])
def test_fisher_information_ghz(n, theta):
    # p_+-(theta) = (1 +- cos n theta) / 2 gives F = n^2 wherever sin(n theta) != 0
    f = classical_fisher_information(parity_observable(n), prepare_ghz(n), phase_encoding(n, 0), theta / n)
    assert f == pytest.approx(n * n, rel=1e-6)


def test_fisher_information_vanishes_for_commuting_observable():
    z = Observable.from_pauli(PauliOperator.from_label("Z"))
    assert classical_fisher_information(z, prepare_ghz(1), phase_encoding(1, 0), 0.4) == pytest.approx(0, abs=1e-9)


def test_fisher_information_vanishes_for_mixed_probe():
    f = classical_fisher_information(parity_observable(2), DensityMatrix.maximally_mixed(2), phase_encoding(2, 0), 0.4)
    assert f == pytest.approx(0, abs=1e-9)


@given(seeds, st.integers(1, 2), st.floats(0.1, 3.0))
def test_cramer_rao_consistency(seed, n, theta):
    rng = np.random.default_rng(seed)
    probe = random_density_matrix(n, rng)
    u = random_unitary(1 << n, rng)
    obs = Observable(u @ np.diag(rng.normal(size=1 << n)) @ u.conj().T)
    enc = phase_encoding(n, 0)
    nu = 100
    try:
        prec = error_propagation_precision(obs, probe, enc, theta, nu)
    except VanishingDerivativeError:
        return
    f = classical_fisher_information(obs, probe, enc, theta)
    if f > 0:
        # two-outcome observables saturate the bound, so allow finite-difference error in F
        bound = 1 / (nu * f)
        assert prec >= bound - 1e-9 - 1e-7 * bound


@pytest.mark.parametrize("n", [1, 2, 3])
def test_cramer_rao_saturated_by_ghz(n):
    theta = 0.4 / n
    enc = phase_encoding(n, 0)
    prec = error_propagation_precision(parity_observable(n), prepare_ghz(n), enc, theta, 50)
    f = classical_fisher_information(parity_observable(n), prepare_ghz(n), enc, theta)
    assert prec == pytest.approx(1 / (50 * f), rel=1e-6)


# -- bounds and resources -----------------------------------------------------

def test_theorem1_bounds_examples():
    beta, gamma = theorem1_bounds(1, 4, 0.01, 100)
    assert beta == pytest.approx(0.005)
    assert gamma == pytest.approx(7.5e-5)
    assert theorem1_bounds(1, 4, 0.0, 100) == (0.0, 0.0)


@given(st.integers(1, 6), st.floats(0, 0.5), st.integers(1, 10_000))
def test_theorem1_ghz_precision_bound(n, eps, nu):
    _, gamma = theorem1_bounds(1, n, eps, nu)
    assert gamma == pytest.approx(8 * eps / (nu * n * n) + 4 * eps**2 / (n * n))


def test_theorem1_rejects_bad_arguments():
    with pytest.raises(ValueError):
        theorem1_bounds(1, 0, 0.1, 10)
    with pytest.raises(ValueError):
        theorem1_bounds(1, -1, 0.1, 10)


def test_epsilon_of_resource_examples():
    ideal = DensityMatrix.basis("0")
    other = DensityMatrix.basis("1")
    assert epsilon_of_resource([ideal] * 4, ideal) == 0
    mixed = convex_perturbation(ideal, other, 0.3)
    assert epsilon_of_resource([mixed] * 4, ideal) == pytest.approx(0.3)
    far = convex_perturbation(ideal, other, 0.2)
    assert epsilon_of_resource([ideal, far] * 3, ideal) == pytest.approx(0.1)


@pytest.mark.parametrize("kind", SOURCE_KINDS)
def test_perturbed_sources_are_within_eps(kind, rng):
    cfg = EstimationConfig(n=2, nu=40, theta_true=0.3, window=(0, math.pi / 2))
    ideal = cfg.ideal_state()
    src = perturbed_source(kind, ideal, cfg.observable, 0.05, cfg.nu)
    states = src(rng) if callable(src) else (src if isinstance(src, list) else [src] * cfg.nu)
    assert epsilon_of_resource(states, ideal) <= 0.05 + 1e-12


# -- estimation ---------------------------------------------------------------

def test_config_validation():
    with pytest.raises(ValueError):
        EstimationConfig(n=2, nu=10, theta_true=0.3, window=(0, 1))
    with pytest.warns(UserWarning):
        EstimationConfig(n=2, nu=10, theta_true=0.3, window=(0, 1), allow_small_nu=True)
    with pytest.raises(ValueError):
        EstimationConfig(n=2, nu=100, theta_true=1.3, window=(0, 1))


def test_noiseless_zero_phase_estimate_is_exact(rng):
    cfg = EstimationConfig(n=3, nu=100, theta_true=0.0, window=(-0.2, 0.2), repetitions=20)
    res = run_estimation(DensityMatrix(cfg.ideal_state(), validate=False), cfg, rng)
    assert np.all(res.mean_outcomes == 1)
    assert np.all(res.estimates == 0)


def test_estimates_lie_in_window(rng):
    cfg = EstimationConfig(n=2, nu=30, theta_true=0.05, window=(0, math.pi / 2), repetitions=100)
    res = run_estimation(DensityMatrix(cfg.ideal_state(), validate=False), cfg, rng)
    assert np.all((res.estimates >= 0) & (res.estimates <= math.pi / 2))
    assert res.empirical_mse >= 0
    assert res.shots_used == 30 * 100


def test_ideal_estimator_is_unbiased():
    n, nu, reps = 3, 2000, 200
    cfg = EstimationConfig(n=n, nu=nu, theta_true=0.3, window=(0, math.pi / n), repetitions=reps)
    res = run_estimation(DensityMatrix(cfg.ideal_state(), validate=False), cfg, np.random.default_rng(8))
    assert abs(res.mean_estimate - 0.3) <= 3 * math.sqrt(1 / (nu * n * n) / reps)


def test_composed_encoding_gives_same_statistics():
    n, nu, reps = 2, 1000, 200
    cfg = EstimationConfig(n=n, nu=nu, theta_true=0.5, window=(0, math.pi / n), repetitions=reps)
    composed = phase_encoding(n, 0.2).then(phase_encoding(n, 0.3)).apply(prepare_ghz(n))
    a = run_estimation(DensityMatrix(cfg.ideal_state(), validate=False), cfg, np.random.default_rng(9))
    b = run_estimation(DensityMatrix(composed, validate=False), cfg, np.random.default_rng(9))
    assert np.allclose(a.estimates, b.estimates)


def test_mixed_source_bias_within_theorem1():
    cfg = EstimationConfig(n=2, nu=1000, theta_true=0.3, window=(0, math.pi / 2), repetitions=200)
    src = convex_perturbation(cfg.ideal_state(), np.eye(4) / 4, 0.05)
    b = measure_bias(src, cfg, seed=12, eps=0.05)
    assert b.within_bounds
    assert b.beta_bound == pytest.approx(2 * 0.05 / (2 * math.sin(0.6)))


def test_paired_runs_share_shot_randomness():
    cfg = EstimationConfig(n=2, nu=500, theta_true=0.3, window=(0, math.pi / 2), repetitions=30)
    b = measure_bias(DensityMatrix(cfg.ideal_state(), validate=False), cfg, seed=3, eps=0.0)
    assert b.beta == 0 and b.gamma == 0
