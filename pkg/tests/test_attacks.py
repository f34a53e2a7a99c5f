import json

import numpy as np
import pytest

from secure_metrology.attacks import (
    AttackSpecError,
    ReplacementChannel,
    adversary_from_spec,
    attack_library,
    build_channel,
    parse_attack,
)
from secure_metrology.pauli import PauliOperator
from secure_metrology.states import KrausChannel, channel_to_json, random_density_matrix, random_kraus_channel


@pytest.mark.parametrize(
    "spec, parsed",
    [
        ("identity", ("identity", None, "both")),
        ("pauli:X0@1", ("pauli", "X0", "1")),
        ("depolarize:0.5@2", ("depolarize", "0.5", "2")),
        ("replace:mixed", ("replace", "mixed", "both")),
    ],
)
def test_parse_attack(spec, parsed):
    assert parse_attack(spec) == parsed


@pytest.mark.parametrize("spec", ["bogus", "pauli:X0@3", "depolarize:2", "pauli:Q0", "weak-pauli", "replace:plus"])
def test_bad_specs_rejected(spec):
    with pytest.raises(AttackSpecError):
        adversary_from_spec(spec, 2)


def test_leg_selection():
    adv = adversary_from_spec("pauli:X0@2", 2)
    assert adv.gamma1 is None and adv.gamma2 is not None
    both = adversary_from_spec("depolarize:0.1", 2)
    assert both.gamma1 is both.gamma2


def test_fixed_pauli_forms_agree(rng):
    rho = random_density_matrix(3, rng).data
    a = build_channel("pauli", "IXI", 3)
    b = build_channel("pauli", "X1", 3)
    p = PauliOperator.from_label("IXI").to_matrix()
    assert np.allclose(a.apply(rho), p @ rho @ p)
    assert np.allclose(b.apply(rho), a.apply(rho))


def test_random_position_pauli(rng):
    rho = random_density_matrix(2, rng).data
    ch = build_channel("random-pauli", "Z", 2)
    zi = PauliOperator.from_label("ZI").to_matrix()
    iz = PauliOperator.from_label("IZ").to_matrix()
    assert np.allclose(ch.apply(rho), 0.5 * (zi @ rho @ zi + iz @ rho @ iz))


def test_weak_pauli(rng):
    rho = random_density_matrix(2, rng).data
    ch = build_channel("weak-pauli", "0.1", 2)
    xi = PauliOperator.from_label("XI").to_matrix()
    ix = PauliOperator.from_label("IX").to_matrix()
    assert np.allclose(ch.apply(rho), 0.9 * rho + 0.05 * (xi @ rho @ xi + ix @ rho @ ix))


@pytest.mark.parametrize("which", ["mixed", "zero"])
def test_replacement_channel_closed_forms(which, rng):
    ch = build_channel("replace", which, 2)
    assert isinstance(ch, ReplacementChannel)
    rho = random_density_matrix(2, rng).data
    sigma = np.eye(4) / 4 if which == "mixed" else np.diag([1, 0, 0, 0])
    assert np.allclose(ch.apply(rho), sigma)
    explicit = KrausChannel(ch.operators)
    assert np.allclose(explicit.apply(rho), sigma)
    assert np.allclose(ch.superoperator(), explicit.superoperator())


def test_rotation(rng):
    ch = build_channel("rotate", "0.4", 2)
    u1 = np.array([[np.cos(0.2), -np.sin(0.2)], [np.sin(0.2), np.cos(0.2)]])
    u = np.kron(u1, u1)
    rho = random_density_matrix(2, rng).data
    assert np.allclose(ch.apply(rho), u @ rho @ u.T)


def test_custom_kraus_file(tmp_path, rng):
    ch = random_kraus_channel(2, 2, rng)
    path = tmp_path / "attack.json"
    path.write_text(json.dumps(channel_to_json(ch)))
    adv = adversary_from_spec(f"kraus:{path}@1", 2)
    rho = random_density_matrix(2, rng).data
    assert np.allclose(adv.gamma1.apply(rho), ch.apply(rho))
    with pytest.raises(Exception):
        adversary_from_spec(f"kraus:{path}", 3).check_arity(3)


@pytest.mark.parametrize("m", [2, 3])
def test_library_channels_are_complete(m, rng):
    lib = attack_library(m)
    assert len(lib) == 15
    rho = random_density_matrix(m, rng).data
    for adv in lib.values():
        adv.check_arity(m)
        for ch in (adv.gamma1, adv.gamma2):
            if ch is not None:
                assert np.isclose(np.trace(ch.apply(rho)).real, 1)


def test_pauli_classification():
    assert adversary_from_spec("weak-pauli:0.1", 2).is_pauli
    assert adversary_from_spec("depolarize:0.1", 2).is_pauli
    assert not adversary_from_spec("rotate:0.3", 2).is_pauli
