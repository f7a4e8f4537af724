"""Zero-shot video restoration and enhancement via temporally
consistent guided reverse diffusion."""

__version__ = "0.1.0"

from .constraints import ddnm_project, distance_gradient
from .denoiser import (
    AttentionLayer,
    EpsilonModel,
    OracleDenoiser,
    PrevFrameContext,
    ShrinkageDenoiser,
    TinyUNet,
    TinyUNetSpec,
    attention,
    oracle_predict,
    shrinkage_predict,
)
from .errors import ConfigurationError, ContractError, NumericalFailure, ZvrdError
from .flow import estimate_flow, fb_occlusion, warp
from .metrics import MetricsReport, evaluate, psnr, ssim, warping_error
from .operators import (
    Awgn,
    BlurConv,
    DegradationOperator,
    Grayscale,
    InpaintMask,
    LowLight,
    SRAveragePool,
    estimate_gain,
    gaussian_kernel,
    make_operator,
)
from .sampler import FrameTrajectoryCache, RunReport, SamplerConfig, ablation_run, restore_video
from .schedule import DiffusionSchedule, forward_sample, make_schedule, posterior_mean_var, predict_x0
from .temporal import NoiseBank, blend_noise, tc_loss_and_grad
from .video import FixtureSpec, fixture_gt_flow, from_unit_range, make_fixture, to_unit_range

__all__ = [
    "AttentionLayer",
    "Awgn",
    "BlurConv",
    "ConfigurationError",
    "ContractError",
    "DegradationOperator",
    "DiffusionSchedule",
    "EpsilonModel",
    "FixtureSpec",
    "FrameTrajectoryCache",
    "Grayscale",
    "InpaintMask",
    "LowLight",
    "MetricsReport",
    "NoiseBank",
    "NumericalFailure",
    "OracleDenoiser",
    "PrevFrameContext",
    "RunReport",
    "SRAveragePool",
    "SamplerConfig",
    "ShrinkageDenoiser",
    "TinyUNet",
    "TinyUNetSpec",
    "ZvrdError",
    "ablation_run",
    "attention",
    "blend_noise",
    "ddnm_project",
    "distance_gradient",
    "estimate_flow",
    "estimate_gain",
    "evaluate",
    "fb_occlusion",
    "fixture_gt_flow",
    "forward_sample",
    "from_unit_range",
    "gaussian_kernel",
    "make_fixture",
    "make_operator",
    "make_schedule",
    "oracle_predict",
    "posterior_mean_var",
    "predict_x0",
    "psnr",
    "restore_video",
    "shrinkage_predict",
    "ssim",
    "tc_loss_and_grad",
    "to_unit_range",
    "warp",
    "warping_error",
]
