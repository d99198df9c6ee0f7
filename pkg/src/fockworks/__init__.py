"""fockworks: exact sparse Fock-space simulation of passive linear optics,
photodetection, post-selected gates and teleportation gadgets.
"""

from ._backend import backend_name
from .fock import (
    FockState,
    canonicalize,
    fidelity,
    inner_product,
    number_state,
    tensor,
    vacuum,
)
from .measure import (
    Bucket,
    ConditionalOutcome,
    Counter,
    FanoutCounter,
    fanout_count,
    measure_modes,
    postselect,
    sample_outcome,
)
from .optics import (
    BeamSplitter,
    ElementSequence,
    ModeUnitary,
    PhaseShifter,
    apply_mode_unitary,
    apply_unitary,
    compose,
    decompose_reck,
    element_matrix,
    fourier_matrix,
    transition_amplitude,
)
from .costs import (
    CostModel,
    TrialStats,
    cost_model,
    expected_trials,
    monte_carlo,
    s_recursion_table,
)
from .protocols import (
    BosonicQubit,
    PreparedResource,
    ProtocolResult,
    apply_ns1,
    csign_teleported,
    csign_via_ns,
    encode_qubit,
    hadamard,
    make_resource,
    parity_measure,
    prepare_tp_n,
    teleport_tn,
)
from .source import SqueezeParam, heralded_single_photon, two_mode_squeezed_vacuum

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
