"""Simulator and verification suite for bidirectional controlled remote
state preparation of equatorial qudit states in arbitrary dimension."""

from .core import (
    ATOL,
    WEIGHT_ATOL,
    BranchEnsemble,
    KrausSet,
    MeasurementBasis,
    Operator,
    StateVector,
    apply_kraus,
    apply_on,
    basis_state,
    fidelity,
    fidelity_density,
    measure,
    project,
    reduced_density,
    states_equal,
    tensor,
)
from .noise import (
    NoiseKind,
    OutcomePolicy,
    compare_paper_vs_exact,
    dephasing_kraus,
    exact_fidelities,
    kraus_for,
    noisy_protocol_run,
    paper_fidelity_dephasing,
    paper_fidelity_phaseflip_equatorial,
    phase_flip_kraus,
    qudit_flip_kraus,
)
from .optics import (
    BeamSplitter,
    InterferometerNetwork,
    PhaseShifter,
    bs_matrix,
    cnot_gate,
    compose_network,
    correction_circuit,
    ghz_via_cnot,
    paper_network_4d,
    reck_decompose,
    sender_network,
)
from .protocol import (
    CorrectionRule,
    OutcomeTuple,
    PhaseVector,
    ProtocolResult,
    build_correction_table,
    collapsed_state,
    correction_unitary,
    equatorial_state,
    fourier_basis,
    ghz_state,
    outcome_probability,
    run_protocol,
    sender_basis,
    verify_decomposition,
)
from .session import (
    ClassicalMessage,
    PartyId,
    Session,
    SessionStatus,
    export_transcript,
    import_transcript,
    new_session,
)

__version__ = "0.1.0"
