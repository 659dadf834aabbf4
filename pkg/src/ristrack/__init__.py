"""Tensor-based channel estimation and tracking for an RIS-assisted
multi-user MIMO uplink, with a Monte-Carlo experiment harness."""

from .bals import (
    BalsOptions,
    FactorEstimate,
    Identifiability,
    Verdict,
    bals,
    check_identifiability,
    ls_krf,
    resolve_scaling,
)
from .channel import (
    ChannelRealization,
    PathParamsG,
    PathParamsUser,
    PhaseProfileMatrix,
    PilotMatrix,
    SystemConfig,
    channel_sequence,
    channel_sequence_slots,
    gen_g,
    gen_h,
    gen_phase_profiles,
    gen_pilots,
    noise_var_for_snr,
    steering_vector,
    synthesize_slot,
)
from .errors import (
    AmbiguityError,
    ConfigError,
    DivergenceError,
    NumericError,
    RistrackError,
)
from .gamp import (
    GampDiagnostics,
    GampOptions,
    from_angular,
    gamp_options_for,
    gamp_solve,
    ls_orthogonal_baseline,
    recover_h,
    to_angular,
)
from .rls import (
    TrackerState,
    track_direct,
    track_recursive,
    tracker_init,
    tracker_init_from_tensor,
)
from .tensor_ops import (
    SlotTensor,
    dft_matrix,
    khatri_rao,
    pseudo_inverse,
    unfold_mode1,
    unfold_mode2,
    unfold_mode3,
)

__version__ = "0.1.0"
