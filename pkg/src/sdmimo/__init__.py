"""Spatial sigma-delta shaping of PA distortion in a multi-user
MIMO-OFDM downlink: PA models, antenna-domain modulators, the OFDM and
multipath channel chain, ZF and symbol-level precoders, and a seeded
Monte Carlo experiment harness."""

from .channel import (
    ChannelRealization,
    DiracFilter,
    RrcFilter,
    UlaGeometry,
    channel_from_paths,
    distortion_noise_power,
    draw_channel,
    load_channel,
    propagate,
    psi_hat_bound,
    psi_hat_calibrated,
    save_channel,
    steering_vector,
)
from .config import ExperimentConfig, load_config
from .errors import (
    ConfigError,
    NoCompressionPoint,
    OverloadWarning,
    RankDeficient,
    ShapeMismatch,
)
from .harness import run_ber, run_scatter, run_shaping_spectrum
from .ofdm import OfdmParams, TimeGrid, idft_modulate, receiver_dft, sample_hold
from .pa import PaModel, ShapingBudget, apply_pa, compute_psi, compute_r1db
from .precoding import (
    PrecodeResult,
    project_amplitude,
    slp_objective,
    slp_precode,
    zf_precode,
)
from .qam import QamConstellation, detect, dp_real_component
from .sigma_delta import (
    ModulatorConfig,
    modulate,
    modulate_first_order,
    modulate_second_order,
    shaped_distortion_power,
)

__version__ = "0.1.0"
