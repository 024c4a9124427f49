"""Clip-wise 3D convolution and its frame-by-frame continual form.

The continual form convolves each incoming frame with all ``k_T`` temporal
slices of the kernel exactly once. The newest slice completes the output
window ending at the current frame; the remaining ``k_T - 1`` partial maps
are added into a ring buffer of pending output sums, one slot per future
step, so the buffer holds ``d_T * (k_T - 1)`` maps of the layer's spatial
output shape.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import ClassVar, Literal

import numpy as np

from .tensor import DTYPE, ClipTensor, DimSpec, FrameTensor, output_size

InitScheme = Literal["zeros", "replicate"]


@dataclass(eq=False)
class ConvSpec:
    kind: ClassVar[str] = "conv3d"

    in_channels: int
    out_channels: int
    temporal: DimSpec = DimSpec()
    spatial_h: DimSpec = DimSpec()
    spatial_w: DimSpec = DimSpec()
    groups: int = 1
    has_bias: bool = False
    weights: np.ndarray | None = None
    bias: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        if self.in_channels % self.groups or self.out_channels % self.groups:
            raise ValueError(
                f"{self.name or 'conv'}: groups={self.groups} must divide "
                f"in_channels={self.in_channels} and out_channels={self.out_channels}"
            )
        if self.weights is None:
            self.weights = np.zeros(self.weight_shape, dtype=DTYPE)
        else:
            self.weights = np.asarray(self.weights, dtype=DTYPE)
        if self.weights.shape != self.weight_shape:
            raise ValueError(
                f"{self.name or 'conv'}: weight shape {self.weights.shape} "
                f"!= expected {self.weight_shape}"
            )
        if self.has_bias:
            if self.bias is None:
                self.bias = np.zeros(self.out_channels, dtype=DTYPE)
            self.bias = np.asarray(self.bias, dtype=DTYPE).reshape(self.out_channels)
        elif self.bias is not None:
            raise ValueError(f"{self.name or 'conv'}: bias given but has_bias is false")

    @property
    def kernel(self) -> tuple[int, int, int]:
        return (self.temporal.kernel, self.spatial_h.kernel, self.spatial_w.kernel)

    @property
    def weight_shape(self) -> tuple[int, ...]:
        return (self.out_channels, self.in_channels // self.groups) + self.kernel

    @property
    def buffer_len(self) -> int:
        return self.temporal.dilation * (self.temporal.kernel - 1)

    def spatial_out(self, height: int, width: int) -> tuple[int, int]:
        return output_size(height, self.spatial_h), output_size(width, self.spatial_w)


@dataclass
class StepOutput:
    """Result of one streaming step; ``value`` is None when nothing is emitted."""

    value: np.ndarray | None = None

    @property
    def valid(self) -> bool:
        return self.value is not None

    @property
    def frame(self) -> FrameTensor | None:
        return None if self.value is None else FrameTensor(self.value)


@dataclass(eq=False)
class CoConvState:
    """Ring buffer of pending output sums, write index and consumed-frame count."""

    mem: np.ndarray
    index: int = 0
    steps: int = 0

    @property
    def floats(self) -> int:
        return int(self.mem.size)


# -- shared direct-convolution kernel ---------------------------------------


def _contract(w_tap: np.ndarray, xs: np.ndarray, groups: int) -> np.ndarray:
    """Channel contraction of one kernel tap: (O, C/g) x (C, *S) -> (O, *S)."""
    out_ch, cg = w_tap.shape
    spatial = xs.shape[1:]
    if groups == 1:
        return (w_tap @ xs.reshape(cg, -1)).reshape((out_ch,) + spatial)
    og = out_ch // groups
    if cg == 1 and og == 1:
        return w_tap.reshape((out_ch,) + (1,) * len(spatial)) * xs
    y = w_tap.reshape(groups, og, cg) @ xs.reshape(groups, cg, -1)
    return y.reshape((out_ch,) + spatial)


def _direct_conv(xp, weight, groups, strides, dilations, out_sizes) -> np.ndarray:
    """Direct convolution of an already padded (C, *D) array, no bias."""
    out = np.zeros((weight.shape[0],) + tuple(out_sizes), dtype=DTYPE)
    kernel = weight.shape[2:]
    for offset in itertools.product(*(range(k) for k in kernel)):
        window = tuple(
            slice(o * d, o * d + (n - 1) * s + 1, s)
            for o, d, n, s in zip(offset, dilations, out_sizes, strides)
        )
        xs = xp[(slice(None),) + window]
        out += _contract(weight[(slice(None), slice(None)) + offset], xs, groups)
    return out


def _pad_spatial(x: np.ndarray, spec: ConvSpec) -> np.ndarray:
    ph, pw = spec.spatial_h.padding, spec.spatial_w.padding
    if ph == 0 and pw == 0:
        return x
    widths = [(0, 0)] * (x.ndim - 2) + [(ph, ph), (pw, pw)]
    return np.pad(x, widths)


# -- regular (clip-wise) convolution ----------------------------------------


def conv3d_array(
    x: np.ndarray, spec: ConvSpec, temporal_pad: tuple[int, int] | None = None
) -> np.ndarray:
    """Dense 3D convolution of a (C, T, H, W) array.

    ``temporal_pad`` = (left, right) zero frames; defaults to the declared
    symmetric temporal padding.
    """
    if x.shape[0] != spec.in_channels:
        raise ValueError(
            f"{spec.name or 'conv'}: input has {x.shape[0]} channels, "
            f"expected {spec.in_channels}"
        )
    left, right = temporal_pad or (spec.temporal.padding,) * 2
    xp = _pad_spatial(np.asarray(x, dtype=DTYPE), spec)
    if left or right:
        xp = np.pad(xp, [(0, 0), (left, right), (0, 0), (0, 0)])
    t_in = x.shape[1] + left + right
    n_t = output_size(t_in, spec.temporal, padding=0)
    n_h, n_w = spec.spatial_out(x.shape[2], x.shape[3])
    dims = (spec.temporal, spec.spatial_h, spec.spatial_w)
    y = _direct_conv(
        xp,
        spec.weights,
        spec.groups,
        [d.stride for d in dims],
        [d.dilation for d in dims],
        (n_t, n_h, n_w),
    )
    if spec.has_bias:
        y += spec.bias[:, None, None, None]
    return y


def conv3d_regular(clip: ClipTensor, spec: ConvSpec) -> ClipTensor:
    return ClipTensor(conv3d_array(np.asarray(clip), spec))


# -- continual convolution ---------------------------------------------------


def coconv_delay(spec: ConvSpec) -> int:
    """Steps between a window's last input frame index and its output index.

    With no declared temporal padding this is ``d_T (k_T - 1)``; declared
    padding shifts the output index back by ``p_T`` frames.
    """
    span = spec.buffer_len
    if spec.temporal.padding > span:
        raise ValueError(
            f"{spec.name or 'conv'}: temporal padding {spec.temporal.padding} "
            f"exceeds kernel span {span}; output would precede its input"
        )
    return span - spec.temporal.padding


def frame_partials(frame: np.ndarray, spec: ConvSpec) -> np.ndarray:
    """Convolve one frame with every temporal kernel slice: (k_T, c_O, n_H, n_W)."""
    if frame.shape[0] != spec.in_channels:
        raise ValueError(
            f"{spec.name or 'conv'}: frame has {frame.shape[0]} channels, "
            f"expected {spec.in_channels}"
        )
    xp = _pad_spatial(np.asarray(frame, dtype=DTYPE), spec)
    n_h, n_w = spec.spatial_out(frame.shape[1], frame.shape[2])
    strides = (spec.spatial_h.stride, spec.spatial_w.stride)
    dilations = (spec.spatial_h.dilation, spec.spatial_w.dilation)
    k_t = spec.temporal.kernel
    w = spec.weights
    if spec.groups == 1 and k_t > 1:
        # one matmul per spatial tap covering all temporal slices
        stacked = w.transpose(2, 0, 1, 3, 4).reshape(
            (k_t * spec.out_channels, spec.in_channels) + w.shape[3:]
        )
        y = _direct_conv(xp, stacked, 1, strides, dilations, (n_h, n_w))
        return y.reshape(k_t, spec.out_channels, n_h, n_w)
    return np.stack(
        [
            _direct_conv(xp, w[:, :, kt], spec.groups, strides, dilations, (n_h, n_w))
            for kt in range(k_t)
        ]
    )


def coconv_init(
    spec: ConvSpec,
    scheme: InitScheme = "zeros",
    seed_frame: FrameTensor | np.ndarray | None = None,
    input_hw: tuple[int, int] | None = None,
) -> CoConvState:
    if scheme not in ("zeros", "replicate"):
        raise ValueError(f"unknown init scheme {scheme!r}")
    if seed_frame is not None:
        seed = np.asarray(seed_frame, dtype=DTYPE)
        input_hw = seed.shape[1:]
    elif scheme == "replicate":
        raise ValueError("replicate initialisation requires a seed frame")
    if input_hw is None:
        raise ValueError("zeros initialisation needs input_hw or a seed frame")
    n_h, n_w = spec.spatial_out(*input_hw)
    state = CoConvState(np.zeros((spec.buffer_len, spec.out_channels, n_h, n_w), DTYPE))
    if scheme == "replicate":
        for _ in range(spec.buffer_len):
            _step_array(seed, state, spec)
    return state


def _step_array(frame: np.ndarray, state: CoConvState, spec: ConvSpec) -> np.ndarray | None:
    partials = frame_partials(frame, spec)
    mem = state.mem
    size = len(mem)
    if mem.shape[1:] != partials.shape[1:]:
        raise ValueError(
            f"{spec.name or 'conv'}: state holds maps of shape {mem.shape[1:]}, "
            f"frame produces {partials.shape[1:]}"
        )
    k_t, dil = spec.temporal.kernel, spec.temporal.dilation
    if size:
        slot = state.index
        output = mem[slot] + partials[-1]
        mem[slot] = 0.0
        # partial of slice kt completes (k_T - 1 - kt) * d_T steps from now
        for kt in range(k_t - 1):
            mem[(slot + (k_t - 1 - kt) * dil) % size] += partials[kt]
        state.index = (slot + 1) % size
    else:
        output = partials[0]
    if spec.has_bias:
        output += spec.bias[:, None, None]
    t = state.steps
    state.steps += 1
    delay = coconv_delay(spec)
    if t < delay or (t - delay) % spec.temporal.stride:
        return None
    return output


def coconv_step(
    frame: FrameTensor | np.ndarray,
    state: CoConvState | None,
    spec: ConvSpec,
) -> tuple[StepOutput, CoConvState]:
    """Advance one frame. The state is updated in place and returned."""
    frame = np.asarray(frame, dtype=DTYPE)
    if state is None:
        state = coconv_init(spec, "zeros", input_hw=frame.shape[1:])
    return StepOutput(_step_array(frame, state, spec)), state
