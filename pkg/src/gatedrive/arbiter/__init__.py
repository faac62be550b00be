from .observation import (
    FEATURES,
    OBS_DIM,
    MaskConfig,
    ObservationConfig,
    build_observation,
    draw_mask,
    front_clearance,
    mask_opponent,
)
from .policy import (
    GatePolicy,
    NonFiniteActivation,
    RunningNormalizer,
    gate_forward,
    load_policy,
    save_policy,
    sigmoid,
)
from .runtime import (
    ArbiterConfig,
    ArbiterRuntimeState,
    ArbiterStack,
    ConstantGate,
    InteractionConfig,
    PurePursuitOnly,
    SafetyConfig,
    blend,
    fuse,
    interaction_mode,
    safety_override,
    smooth_gate,
)
