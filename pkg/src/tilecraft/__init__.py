"""tilecraft: constraint-driven diffusion sampling for tileable images.

Declare which image edges must join seamlessly, and the sampler keeps the
latents consistent across those joints at every denoising step; decoded
tiles then abut without blending. Ships with analytic denoisers for a fully
offline pipeline and a wire protocol for remote ones.
"""

from .constraints import (
    Constraint,
    ConstraintSpec,
    ImageSlot,
    PaddingPlan,
    ScenarioKind,
    Side,
    SideRef,
    SpecValidationError,
    ValidatedSpec,
    classify,
    padding_plan,
    validate,
)
from .dsl import ParseError, TileSpecParseError, parse, parse_with_spans, serialize
from .engine import (
    DenoiserFailure,
    DenoiserRequest,
    GaussianTexturePrior,
    NoiseSchedule,
    SamplerParams,
    constant_denoiser,
    gaussian_denoiser,
    make_schedule,
    noise_to,
    sample,
)
from .imaging import (
    IdentityCodec,
    Layout,
    LinearUpsampleCodec,
    NoValidLayout,
    Placement,
    assemble,
    decode_and_crop,
    make_codec,
    solve_layout,
)
from .lattice import (
    InteriorTooSmall,
    LatentCanvas,
    RoundRobinState,
    apply_constraints,
    extract_strip,
    orient_strip,
    round_robin_pick,
)
from .metrics import ScoreReport, seam_profile, swap_halves, tiling_score
from .wire import (
    LoopbackServer,
    ProtocolVersionMismatch,
    RequestTimeout,
    ShapeMismatch,
    TransportFailure,
    WireError,
    decode_message,
    encode_message,
    remote_denoise,
    remote_denoiser,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
