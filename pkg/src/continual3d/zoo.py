"""Built-in X3D-S/M/L descriptors.

Layout follows the reference X3D implementation: a 1x3x3 stride-2 spatial
stem conv followed by a depthwise 5x1x1 temporal conv, four stages of
bottleneck blocks whose depthwise 3x3x3 conv carries the spatial stride,
SE on every other block, then conv5, a global average pool and a two-layer
head. All parameters are zero; use ``init_parameters`` or load weights.
"""

from __future__ import annotations

from .conv import ConvSpec
from .layers import NormSpec, SEParams
from .network import ActivationSpec, GlobalPoolSpec, LinearSpec, NetworkSpec, ResidualBlock
from .tensor import DimSpec

STAGE_WIDTHS = ((24, 54), (48, 108), (96, 216), (192, 432))
HEAD_WIDTH = 432
HEAD_HIDDEN = 2048
NUM_CLASSES = 400
SE_RATIO = 1 / 16

VARIANTS = {
    # name: (depths, default resolution, clip frames)
    "x3d-s": ((3, 5, 11, 7), 160, 13),
    "x3d-m": ((3, 5, 11, 7), 224, 16),
    "x3d-l": ((5, 10, 25, 15), 312, 16),
}


def round_width(width: float, divisor: int = 8) -> int:
    """Channel rounding used for SE projections (multiple of 8, at least 8)."""
    rounded = max(divisor, int(width + divisor / 2) // divisor * divisor)
    if rounded < 0.9 * width:
        rounded += divisor
    return rounded


def _conv(name, c_in, c_out, kt=1, ks=1, stride=1, groups=1, pt=None, ps=None):
    pt = kt // 2 if pt is None else pt
    ps = ks // 2 if ps is None else ps
    spatial = DimSpec(ks, stride, 1, ps)
    return ConvSpec(c_in, c_out, DimSpec(kt, 1, 1, pt), spatial, spatial, groups=groups, name=name)


def _bn(name, channels):
    return NormSpec.identity(channels, name=name)


def _block(name: str, c_in: int, inner: int, c_out: int, stride: int, se: bool) -> ResidualBlock:
    layers = [
        _conv(f"{name}.conv_a", c_in, inner),
        _bn(f"{name}.bn_a", inner),
        ActivationSpec("relu", name=f"{name}.relu_a"),
        _conv(f"{name}.conv_b", inner, inner, kt=3, ks=3, stride=stride, groups=inner),
        _bn(f"{name}.bn_b", inner),
    ]
    if se:
        hidden = round_width(inner * SE_RATIO)
        layers.append(SEParams.zeros(inner, hidden, act="relu", temporal=True, name=f"{name}.se"))
    layers += [
        ActivationSpec("swish", name=f"{name}.swish_b"),
        _conv(f"{name}.conv_c", inner, c_out),
        _bn(f"{name}.bn_c", c_out),
    ]
    shortcut = []
    if stride != 1 or c_in != c_out:
        shortcut = [
            _conv(f"{name}.proj", c_in, c_out, stride=stride),
            _bn(f"{name}.proj_bn", c_out),
        ]
    return ResidualBlock(layers, shortcut, activation="relu", name=name)


def builtin_x3d(variant: str, resolution: int | None = None) -> NetworkSpec:
    try:
        depths, default_res, pool_t = VARIANTS[variant]
    except KeyError:
        raise ValueError(f"unknown builtin {variant!r}; choose from {sorted(VARIANTS)}")
    res = default_res if resolution is None else resolution
    layers = [
        _conv("conv1.conv_s", 3, 24, ks=3, stride=2),
        _conv("conv1.conv_t", 24, 24, kt=5, groups=24),
        _bn("conv1.bn", 24),
        ActivationSpec("relu", name="conv1.relu"),
    ]
    c_in = 24
    for stage, (depth, (c_out, inner)) in enumerate(zip(depths, STAGE_WIDTHS), start=2):
        for i in range(depth):
            layers.append(
                _block(f"res{stage}.block{i + 1}", c_in, inner, c_out, 2 if i == 0 else 1, i % 2 == 0)
            )
            c_in = c_out
    layers += [
        _conv("conv5", c_in, HEAD_WIDTH),
        _bn("conv5.bn", HEAD_WIDTH),
        ActivationSpec("relu", name="conv5.relu"),
        GlobalPoolSpec(pool_t, name="pool5"),
        LinearSpec(HEAD_WIDTH, HEAD_HIDDEN, has_bias=False, name="fc1"),
        ActivationSpec("relu", name="fc1.relu"),
        LinearSpec(HEAD_HIDDEN, NUM_CLASSES, name="fc2"),
    ]
    return NetworkSpec((3, res, res), layers, fps=None, name=variant)


def builtin_x3d_s(resolution: int | None = None) -> NetworkSpec:
    return builtin_x3d("x3d-s", resolution)


def builtin_x3d_m(resolution: int | None = None) -> NetworkSpec:
    return builtin_x3d("x3d-m", resolution)


def builtin_x3d_l(resolution: int | None = None) -> NetworkSpec:
    return builtin_x3d("x3d-l", resolution)


BUILTINS = {"x3d-s": builtin_x3d_s, "x3d-m": builtin_x3d_m, "x3d-l": builtin_x3d_l}


def clip_frames(variant: str) -> int:
    """Clip length the variant was designed for (and its pool5 temporal kernel)."""
    return VARIANTS[variant][2]
