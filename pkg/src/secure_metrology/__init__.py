"""Simulation and verification of secured quantum phase estimation.

Modules: ``pauli`` and ``clifford`` (group algebra and sampling), ``twirl``
(exhaustive twirl sums), ``states`` (dense states, channels, measurement),
``metrology`` (estimation and bias bounds), ``attacks`` and ``protocols``
(trap and Clifford codes), ``frame`` (Pauli-frame runs), ``huang`` (the
randomized remote protocol and its undetectable attack) and ``cli``.
"""

from .attacks import AdversaryModel, adversary_from_spec, attack_library
from .clifford import CliffordElement, conjugate, enumerate_c1, enumerate_clifford_group, sample_clifford
from .huang import HuangConfig, eve_expectation, eve_precision, run_huang
from .metrology import (
    EncodingChannel,
    EstimationConfig,
    EstimationResult,
    classical_fisher_information,
    epsilon_of_resource,
    error_propagation_precision,
    phase_encoding,
    prepare_ghz,
    run_estimation,
    theorem1_bounds,
)
from .pauli import PauliOperator, PauliSimilarityClass, enumerate_paulis, multiply
from .protocols import (
    ProtocolKey,
    ProtocolOutcome,
    end_to_end_secure_estimation,
    privacy_eve_view,
    run_protocol,
    soundness_lhs,
    theorem3_bias,
    theorem3_resources,
)
from .states import (
    DensityMatrix,
    KrausChannel,
    Observable,
    apply_channel,
    expectation,
    fidelity,
    measure,
    partial_trace,
    trace_distance,
)
from .twirl import twirl_check

__version__ = "0.1.0"
