"""Nonlocal two-mode optical amplifier simulator.

Gaussian covariance engine and exact Heisenberg ledger for the
entanglement-assisted amplifier protocol: four-mode resource preparation,
distributed homodyne with classical feedforward, local displacement, and
the genuine four-partite inseparability criteria.
"""

from ._kernels import DEFAULT_BACKEND, available_backends
from .criteria import (
    Criterion,
    CriterionReport,
    CriterionResult,
    cluster_combos,
    criteria_contrast,
    evaluate,
    ghz_combos,
    nopa_criteria,
)
from .gaussian import (
    GaussianState,
    InputSpec,
    PhysicalityReport,
    QuadratureCombination,
    SymplecticOp,
    apply_symplectic,
    balanced_combiner_map,
    beam_splitter_map,
    check_physicality,
    combination_variance,
    displace,
    epr_state,
    homodyne_measure,
    join_states,
    relabel,
    reorder,
    single_mode_state,
    state_from_json,
    state_to_json,
    vacuum_state,
)
from .ledger import (
    BasisSpec,
    HeisenbergLedger,
    check_commutators,
    ledger_apply,
    ledger_new,
    ledger_to_covariance,
    ledger_to_json,
    ledger_variance,
    measure_feedforward,
    row_coefficient,
)
from .protocol import (
    AddedNoise,
    DisplacementSignal,
    FeedforwardGains,
    MeasurementRecord,
    ProtocolConfig,
    RunResult,
    TransferReport,
    added_noise,
    build_four_mode_state,
    consistency_zscores,
    displacement_signal,
    ideal_nopa,
    ideal_nopa_map,
    ideal_reference,
    paper_gains,
    protocol_stage_states,
    run_protocol,
    transfer_report,
)
from .stations import (
    ClassicalMessage,
    InProcessTransport,
    ProtocolViolation,
    decode_message,
    encode_message,
    run_network,
    step_station,
)

__version__ = "0.1.0"
