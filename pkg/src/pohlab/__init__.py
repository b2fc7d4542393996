"""pohlab: generate display-ready phase-only holograms, compress them with a
progressive per-pixel-RoI PCM codec (plus DCT and unwrapping baselines), and
evaluate quality by numerical reconstruction and PSNR-vs-bpp sweeps."""

__version__ = "0.1.0"

from .baselines import (
    DctCodecConfig,
    UnwrappedPhase,
    bits_for_span,
    dct_decode,
    dct_encode,
    itoh_unwrap,
    itoh_unwrap_blocks,
    unwrap_pipeline_roundtrip,
)
from .cgh import (
    GUARD_BAND,
    SceneLayer,
    TargetScene,
    generate_complex_hologram,
    load_scene,
    load_scene_with_depthmap,
)
from .evaluation import (
    MethodSpec,
    RdPoint,
    SweepConfig,
    emit_rd_csv,
    emit_reconstruction_png,
    rd_sweep,
    reconstruction_psnr,
    target_psnr,
)
from .phase_retrieval import FidocConfig, RetrievalTrace, default_signal_mask, fidoc
from .pohcodec import (
    PohBitstream,
    PohStreamError,
    RoiMask,
    SubhologramParams,
    decode,
    encode,
    encode_levels,
    nominal_rate_bpp,
    quantize_bitplanes,
    quantize_levels,
    roi_from_scene,
)
from .rate_control import (
    CapacityError,
    ChannelModel,
    CodingDecision,
    SessionConfig,
    allocate_users,
    compression_summary,
    run_session,
    select_coding_params,
    simulate_channel,
)
from .scenes import builtin_scene
from .wavefield import (
    ComplexField,
    IntensityImage,
    PhaseHologram,
    SlmParams,
    field_to_phase,
    intensity,
    phase_to_field,
    propagate,
)
