import itertools
import math

import numpy as np
import pytest

from secure_metrology.huang import (
    HuangConfig,
    alice_fisher_information,
    alice_state,
    charlie_unitary_diag,
    correction_diag,
    decoy_distribution,
    eve_estimate,
    eve_expectation,
    eve_monte_carlo,
    eve_precision,
    forwarded_state,
    run_huang,
    state_discrimination_undetected_probability,
)

GRID = list(itertools.product([1, 2, 3, 4], [0.25, 0.5, 1.0], [0.25, 0.5, 1.0]))


def test_config_validation():
    with pytest.raises(ValueError):
        HuangConfig(0, 0.5, 0.5, 0.1, 10)
    with pytest.raises(ValueError):
        HuangConfig(2, 1.5, 0.5, 0.1, 10)
    with pytest.raises(ValueError):
        HuangConfig(2, 0.5, 0.5, 0.1, 0)
    assert np.allclose(HuangConfig(2, 0.6, 0.5, 0.1, 10).alice_probabilities, [0.3, 0.3, 0.2, 0.2])


@pytest.mark.parametrize("n, p_a, p_c", GRID)
def test_honest_protocol_passes(n, p_a, p_c):
    cfg = HuangConfig(n, p_a, p_c, 0.37, 10_000, seed=n)
    assert run_huang(cfg, "absent").detection_count == 0


@pytest.mark.parametrize("n, p_a, p_c", GRID)
def test_attack_is_undetected(n, p_a, p_c):
    cfg = HuangConfig(n, p_a, p_c, 0.37, 10_000, seed=100 + n)
    assert run_huang(cfg, "undetectable_attack").detection_count == 0


@pytest.mark.parametrize("n", [2, 4])
def test_literal_correction_is_caught_for_even_n(n):
    # unencoded phase rounds with odd m give Eve the record -1, and Z^n leaves psi+- alone for even n
    p_a, p_c, k = 0.5, 0.5, 20_000
    cfg = HuangConfig(n, p_a, p_c, 0.37, k, seed=7)
    rate = run_huang(cfg, "undetectable_attack", correction="literal").detection_count / k
    expected = p_a * (1 - p_c) * (n // 2) / n
    assert abs(rate - expected) < 4 * math.sqrt(expected * (1 - expected) / k)


@pytest.mark.parametrize("n", [1, 3])
def test_literal_correction_is_fine_for_odd_n(n):
    cfg = HuangConfig(n, 0.5, 0.5, 0.37, 10_000, seed=8)
    assert run_huang(cfg, "undetectable_attack", correction="literal").detection_count == 0


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_correction_swaps_phase_states(n):
    z = correction_diag(n, "flip")
    plus, minus = alice_state(n, 0), alice_state(n, 1)
    assert abs(np.vdot(minus, z * plus)) == pytest.approx(1)


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("choice", [0, 1])
def test_forwarded_state_is_alices_state_up_to_record(n, choice):
    assert abs(np.vdot(alice_state(n, choice), forwarded_state(n, choice, 1))) == pytest.approx(1)
    assert abs(np.vdot(alice_state(n, 1 - choice), forwarded_state(n, choice, -1))) == pytest.approx(1)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_records_at_zero_phase_are_deterministic(n):
    run = run_huang(HuangConfig(n, 0.5, 0.7, 0.0, 2000, seed=3), "undetectable_attack")
    assert np.array_equal(run.eve_records, (-1) ** run.charlie_m)


def test_transcripts(rng):
    run = run_huang(HuangConfig(2, 0.5, 0.5, 0.3, 50), "undetectable_attack", transcripts=True, rng=rng)
    assert len(run.transcripts) == 50
    for tr, rec in zip(run.transcripts, run.eve_samples):
        assert tr.eve_record == rec
        assert tr.alice_verdict == "pass"
        assert 0 <= tr.charlie_m < 2


@pytest.mark.parametrize("n, bit, x", [(1, 0, 0.3), (2, 1, 1.1), (3, 0, 2.0), (4, 1, math.pi / 4)])
def test_decoy_statistics_invariant(n, bit, x):
    d = 1 << n
    expected = np.zeros(d)
    expected[0 if bit == 0 else -1] = 1
    assert np.allclose(decoy_distribution(n, bit, x), expected, rtol=0, atol=1e-14)


def test_charlie_unitary_is_phase_rotation():
    diag = charlie_unitary_diag(1, 0.6)
    assert np.allclose(diag, [np.exp(-0.3j), np.exp(0.3j)])


def test_eve_expectation_examples():
    for n, theta in ((1, 0.3), (2, 0.4), (3, 0.2)):
        full = HuangConfig(n, 0.5, 1.0, theta, 10)
        assert eve_expectation(full, 0) == pytest.approx(math.cos(n * theta))
        assert eve_expectation(full, 1) == pytest.approx(-math.cos(n * theta))
        assert eve_expectation(HuangConfig(n, 0.5, 0.6, 0.0, 10), 1) == pytest.approx(-1)
        assert eve_expectation(HuangConfig(n, 0.5, 0.0, theta, 10), 0) == pytest.approx(1)


@pytest.mark.parametrize("n, p_c, theta", [(1, 0.5, 0.7), (2, 0.8, 0.4), (3, 1.0, 0.3)])
def test_eve_sample_mean_matches_expectation(n, p_c, theta):
    cfg = HuangConfig(n, 0.5, p_c, theta, 40_000, seed=11)
    run = run_huang(cfg, "undetectable_attack")
    signed = run.eve_records * (-1.0) ** run.charlie_m
    mu = eve_expectation(cfg, 0)
    assert abs(signed.mean() - mu) <= 3 * math.sqrt((1 - mu * mu) / cfg.rounds) + 1e-12


def test_eve_precision_examples():
    assert eve_precision(HuangConfig(3, 0.5, 1.0, 0.4, 10_000)) == pytest.approx(1 / (10_000 * 9))
    assert eve_precision(HuangConfig(2, 0.5, 0.5, 1e-9, 100)) == pytest.approx(2 / (100 * 4))
    cfg = HuangConfig(2, 0.5, 0.8, 0.4, 10_000)
    assert eve_precision(cfg) == pytest.approx((1 + 0.25 / math.cos(0.4) ** 2) / (10_000 * 4))
    with pytest.raises(ValueError):
        eve_precision(HuangConfig(2, 0.5, 0.0, 0.4, 10))
    with pytest.raises(ValueError):
        eve_precision(HuangConfig(1, 0.5, 0.5, math.pi, 10))


def test_eve_estimate_inverts_expectation():
    cfg = HuangConfig(2, 0.5, 0.8, 0.4, 10)
    m = np.array([0, 1])
    records = np.array([eve_expectation(cfg, 0), eve_expectation(cfg, 1)])
    assert eve_estimate(records, m, cfg) == pytest.approx(0.4)


@pytest.mark.parametrize("n, p_c", [(2, 0.8), (2, 1.0), (3, 0.5)])
def test_eve_mse_matches_formula(n, p_c):
    cfg = HuangConfig(n, 0.5, p_c, 0.4, 10_000)
    est = eve_monte_carlo(cfg, 200, np.random.default_rng(40 + n))
    mse = np.mean((est - cfg.theta) ** 2)
    assert abs(mse / eve_precision(cfg) - 1) <= 0.15


@pytest.mark.parametrize("n", [1, 2, 3])
def test_alice_information_under_attack(n):
    cfg = HuangConfig(n, 0.5, 0.7, 0.4, 10_000)
    assert alice_fisher_information(cfg, "undetectable_attack", conditional=True) <= 1e-6
    honest = alice_fisher_information(cfg, "absent")
    assert honest == pytest.approx(n * n, rel=1e-6)
    # Eve's correction copies her theta-dependent record into the forwarded sign
    assert alice_fisher_information(cfg, "undetectable_attack", conditional=False) == pytest.approx(honest, rel=1e-6)


def test_state_discrimination_reference_formula():
    assert state_discrimination_undetected_probability(1, 1, 5) == 1
    assert state_discrimination_undetected_probability(0, 0, 2) == pytest.approx(0.75**2)


def test_bad_eve_mode():
    with pytest.raises(ValueError):
        run_huang(HuangConfig(1, 0.5, 0.5, 0.1, 10), "bogus")
