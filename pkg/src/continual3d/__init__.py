"""Continual 3D CNNs: frame-by-frame inference equivalent to clip-wise 3D convolution."""

from .accounting import (
    CostReport,
    FlopConvention,
    conv_flops_clip,
    conv_flops_frame,
    cost_report,
    grouped_state_table,
    memory_report,
    pool_fractions,
    residual_fraction,
)
from .conv import ConvSpec, CoConvState, StepOutput, coconv_delay, coconv_init, coconv_step, conv3d_regular
from .io import load_spec, load_weights, parse_spec, save_spec, save_weights, spec_to_document
from .layers import (
    CoPoolState,
    DelayLineState,
    NormSpec,
    PoolSpec,
    SEParams,
    copool_init,
    copool_step,
    delay_init,
    delay_step,
    momentum_adjust,
    norm_infer,
    se_block_step,
)
from .network import (
    ActivationSpec,
    CoNetwork,
    GlobalPoolSpec,
    LinearSpec,
    NetworkSpec,
    ReceptiveSummary,
    ResidualBlock,
    analyze,
    convert_to_continual,
    forward_clip,
    init_parameters,
    stream_init,
    stream_step,
    window_reference,
)
from .tensor import ClipTensor, DimSpec, FrameTensor, clip_from_frames, output_size, split_clip
from .zoo import builtin_x3d_l, builtin_x3d_m, builtin_x3d_s

__version__ = "0.1.0"

__all__ = [
    "ActivationSpec",
    "ClipTensor",
    "CoConvState",
    "CoNetwork",
    "CoPoolState",
    "ConvSpec",
    "CostReport",
    "DelayLineState",
    "DimSpec",
    "FlopConvention",
    "FrameTensor",
    "GlobalPoolSpec",
    "LinearSpec",
    "NetworkSpec",
    "NormSpec",
    "PoolSpec",
    "ReceptiveSummary",
    "ResidualBlock",
    "SEParams",
    "StepOutput",
    "analyze",
    "builtin_x3d_l",
    "builtin_x3d_m",
    "builtin_x3d_s",
    "clip_from_frames",
    "coconv_delay",
    "coconv_init",
    "coconv_step",
    "conv3d_regular",
    "conv_flops_clip",
    "conv_flops_frame",
    "convert_to_continual",
    "copool_init",
    "copool_step",
    "cost_report",
    "delay_init",
    "delay_step",
    "forward_clip",
    "grouped_state_table",
    "init_parameters",
    "load_spec",
    "load_weights",
    "memory_report",
    "momentum_adjust",
    "norm_infer",
    "output_size",
    "parse_spec",
    "pool_fractions",
    "residual_fraction",
    "save_spec",
    "save_weights",
    "se_block_step",
    "spec_to_document",
    "split_clip",
    "stream_init",
    "stream_step",
    "window_reference",
]
