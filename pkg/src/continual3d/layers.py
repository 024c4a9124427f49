"""Continual pooling, residual delay lines, SE attention, normalisation, activations."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, ClassVar, Literal

import numpy as np

from .conv import StepOutput
from .tensor import DTYPE, DimSpec, FrameTensor, output_size

PoolKind = Literal["avg", "max"]


# -- activations -------------------------------------------------------------


def sigmoid(x: np.ndarray) -> np.ndarray:
    return (0.5 * (1.0 + np.tanh(0.5 * x))).astype(DTYPE, copy=False)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0, dtype=DTYPE)


def swish(x: np.ndarray) -> np.ndarray:
    return x * sigmoid(x)


def identity(x: np.ndarray) -> np.ndarray:
    return x


ACTIVATIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "relu": relu,
    "swish": swish,
    "sigmoid": sigmoid,
    "identity": identity,
}


def activation(name: str) -> Callable[[np.ndarray], np.ndarray]:
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ValueError(f"unknown activation {name!r}; choose from {sorted(ACTIVATIONS)}")


# -- normalisation -----------------------------------------------------------


@dataclass(eq=False)
class NormSpec:
    kind: ClassVar[str] = "norm"

    scale: np.ndarray
    shift: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    eps: float = 1e-5
    name: str = ""

    def __post_init__(self):
        for attr in ("scale", "shift", "mean", "var"):
            setattr(self, attr, np.asarray(getattr(self, attr), dtype=DTYPE).reshape(-1))
        n = len(self.scale)
        if not all(len(getattr(self, a)) == n for a in ("shift", "mean", "var")):
            raise ValueError(f"{self.name or 'norm'}: parameter vectors differ in length")
        if np.any(self.var < 0):
            raise ValueError(f"{self.name or 'norm'}: running variance must be >= 0")

    @classmethod
    def identity(cls, channels: int, eps: float = 1e-5, name: str = "") -> "NormSpec":
        return cls(
            np.ones(channels), np.zeros(channels), np.zeros(channels), np.ones(channels), eps, name
        )

    @property
    def channels(self) -> int:
        return len(self.scale)

    def affine(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-channel multiplier and offset equivalent to the normalisation."""
        mult = (self.scale / np.sqrt(self.var + DTYPE(self.eps))).astype(DTYPE)
        return mult, (self.shift - self.mean * mult).astype(DTYPE)


def norm_infer(frame: FrameTensor | np.ndarray, spec: NormSpec) -> np.ndarray:
    """Inference-mode normalisation of a (C, ...) array over its leading axis."""
    x = np.asarray(frame, dtype=DTYPE)
    if x.shape[0] != spec.channels:
        raise ValueError(
            f"{spec.name or 'norm'}: input has {x.shape[0]} channels, expected {spec.channels}"
        )
    mult, offset = spec.affine()
    bshape = (-1,) + (1,) * (x.ndim - 1)
    return x * mult.reshape(bshape) + offset.reshape(bshape)


def momentum_adjust(mom_clip: float, timesteps: int) -> float:
    """Per-step momentum matching the moving-average dynamics of clip training."""
    if not 0 < mom_clip <= 1:
        raise ValueError(f"mom_clip must lie in (0, 1], got {mom_clip}")
    if timesteps < 1:
        raise ValueError(f"timesteps must be >= 1, got {timesteps}")
    return 2.0 / (1.0 + timesteps * (2.0 / mom_clip - 1.0))


# -- squeeze and excitation -------------------------------------------------


def se_hidden(channels: int, reduction: float) -> int:
    return max(1, int(channels // reduction))


@dataclass(eq=False)
class SEParams:
    """Two-projection channel gate. ``temporal`` pools over time as well (clip mode only)."""

    kind: ClassVar[str] = "se"

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    act: str = "relu"
    temporal: bool = False
    name: str = ""

    def __post_init__(self):
        self.w1 = np.asarray(self.w1, dtype=DTYPE)
        self.w2 = np.asarray(self.w2, dtype=DTYPE)
        self.b1 = np.asarray(self.b1, dtype=DTYPE).reshape(-1)
        self.b2 = np.asarray(self.b2, dtype=DTYPE).reshape(-1)
        hidden, channels = self.w1.shape
        if self.w2.shape != (channels, hidden) or len(self.b1) != hidden or len(self.b2) != channels:
            raise ValueError(f"{self.name or 'se'}: inconsistent projection shapes")
        activation(self.act)

    @classmethod
    def zeros(cls, channels: int, hidden: int, **kw) -> "SEParams":
        return cls(
            np.zeros((hidden, channels)), np.zeros(hidden),
            np.zeros((channels, hidden)), np.zeros(channels), **kw,
        )

    @property
    def channels(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden(self) -> int:
        return self.w1.shape[0]

    def gate(self, means: np.ndarray) -> np.ndarray:
        hidden = activation(self.act)(self.w1 @ means + self.b1)
        return sigmoid(self.w2 @ hidden + self.b2)


def se_block_step(frame: FrameTensor | np.ndarray, params: SEParams) -> np.ndarray:
    """Spatial-only SE: gate from the current frame's per-channel spatial mean."""
    x = np.asarray(frame, dtype=DTYPE)
    if x.ndim != 3 or x.shape[0] != params.channels:
        raise ValueError(
            f"{params.name or 'se'}: expected ({params.channels}, H, W) frame, got {x.shape}"
        )
    g = params.gate(x.mean(axis=(1, 2), dtype=DTYPE))
    return x * g[:, None, None]


def se_block_clip(clip: np.ndarray, params: SEParams) -> np.ndarray:
    """SE over a (C, T, H, W) clip; per frame unless ``params.temporal``."""
    if params.temporal:
        g = params.gate(clip.mean(axis=(1, 2, 3), dtype=DTYPE))
        return clip * g[:, None, None, None]
    return np.stack([se_block_step(clip[:, t], params) for t in range(clip.shape[1])], axis=1)


# -- pooling -------------------------------------------------------------------


@dataclass(frozen=True)
class PoolSpec:
    kind: ClassVar[str] = "pool"

    mode: PoolKind = "avg"
    temporal: DimSpec = DimSpec()
    spatial_h: DimSpec = DimSpec()
    spatial_w: DimSpec = DimSpec()
    name: str = ""

    def __post_init__(self):
        if self.mode not in ("avg", "max"):
            raise ValueError(f"unknown pool mode {self.mode!r}")
        if self.temporal.dilation != 1:
            raise ValueError("temporal pooling dilation must be 1")
        if self.temporal.padding > self.temporal.kernel - 1:
            raise ValueError("temporal pool padding exceeds kernel span")

    @property
    def fill(self) -> float:
        """Value of an empty (padded or not-yet-seen) position."""
        return 0.0 if self.mode == "avg" else -np.inf

    @property
    def delay(self) -> int:
        return self.temporal.kernel - 1 - self.temporal.padding

    def spatial_out(self, height: int, width: int) -> tuple[int, int]:
        return output_size(height, self.spatial_h), output_size(width, self.spatial_w)


def _reduce(kind: PoolKind, arrays: list[np.ndarray]) -> np.ndarray:
    if kind == "max":
        out = arrays[0].copy()
        for a in arrays[1:]:
            np.maximum(out, a, out=out)
        return out
    out = arrays[0].copy()
    for a in arrays[1:]:
        out += a
    return out / DTYPE(len(arrays))


def pool_spatial(x: np.ndarray, spec: PoolSpec) -> np.ndarray:
    """Pool the two trailing axes of ``x``."""
    ph, pw = spec.spatial_h.padding, spec.spatial_w.padding
    if ph or pw:
        widths = [(0, 0)] * (x.ndim - 2) + [(ph, ph), (pw, pw)]
        x = np.pad(x, widths, constant_values=spec.fill)
    n_h = output_size(x.shape[-2], spec.spatial_h, padding=0)
    n_w = output_size(x.shape[-1], spec.spatial_w, padding=0)
    dims = (spec.spatial_h, spec.spatial_w)
    if spec.spatial_h.kernel == x.shape[-2] and spec.spatial_w.kernel == x.shape[-1]:
        if spec.mode == "avg":
            return x.mean(axis=(-2, -1), keepdims=True, dtype=DTYPE)
        return x.max(axis=(-2, -1), keepdims=True)
    taps = []
    for offset in itertools.product(*(range(d.kernel) for d in dims)):
        window = tuple(
            slice(o * d.dilation, o * d.dilation + (n - 1) * d.stride + 1, d.stride)
            for o, d, n in zip(offset, dims, (n_h, n_w))
        )
        taps.append(x[(Ellipsis,) + window])
    return _reduce(spec.mode, taps)


def pool_clip(
    clip: np.ndarray, spec: PoolSpec, temporal_pad: tuple[int, int] | None = None
) -> np.ndarray:
    """Regular spatio-temporal pooling of a (C, T, H, W) array."""
    left, right = temporal_pad or (spec.temporal.padding,) * 2
    x = pool_spatial(clip, spec)
    if left or right:
        x = np.pad(x, [(0, 0), (left, right), (0, 0), (0, 0)], constant_values=spec.fill)
    t = spec.temporal
    n_t = output_size(x.shape[1], t, padding=0)
    taps = [x[:, k : k + (n_t - 1) * t.stride + 1 : t.stride] for k in range(t.kernel)]
    return _reduce(spec.mode, taps)


@dataclass(eq=False)
class CoPoolState:
    mem: np.ndarray
    index: int = 0
    steps: int = 0

    @property
    def floats(self) -> int:
        return int(self.mem.size)


def copool_init(spec: PoolSpec, channels: int, input_hw: tuple[int, int]) -> CoPoolState:
    n_h, n_w = spec.spatial_out(*input_hw)
    mem = np.full((spec.temporal.kernel - 1, channels, n_h, n_w), spec.fill, dtype=DTYPE)
    return CoPoolState(mem)


def _copool_array(frame: np.ndarray, state: CoPoolState, spec: PoolSpec) -> np.ndarray | None:
    pooled = pool_spatial(frame, spec)
    mem = state.mem
    size = len(mem)
    if mem.shape[1:] != pooled.shape:
        raise ValueError(
            f"{spec.name or 'pool'}: state holds maps of shape {mem.shape[1:]}, "
            f"frame pools to {pooled.shape}"
        )
    if size:
        # oldest first: slots index, index+1, ... hold frames t-size .. t-1
        window = [mem[(state.index + m) % size] for m in range(size)] + [pooled]
        out = _reduce(spec.mode, window)
        mem[state.index] = pooled
        state.index = (state.index + 1) % size
    else:
        out = pooled
    t = state.steps
    state.steps += 1
    if t < spec.delay or (t - spec.delay) % spec.temporal.stride:
        return None
    return out


def copool_step(
    frame: FrameTensor | np.ndarray,
    state: CoPoolState | None,
    spec: PoolSpec,
) -> tuple[StepOutput, CoPoolState]:
    """Spatially pool a frame, then pool temporally over the last ``k_T`` maps."""
    frame = np.asarray(frame, dtype=DTYPE)
    if state is None:
        state = copool_init(spec, frame.shape[0], frame.shape[1:])
    return StepOutput(_copool_array(frame, state, spec)), state


# -- residual delay line -----------------------------------------------------


@dataclass(eq=False)
class DelayLineState:
    """Fixed FIFO of ``delay`` frames held in a ring buffer."""

    mem: np.ndarray
    index: int = 0
    filled: int = 0

    @property
    def delay(self) -> int:
        return len(self.mem)

    @property
    def floats(self) -> int:
        return int(self.mem.size)


def delay_init(delay: int, frame_shape: tuple[int, ...], seed: np.ndarray | None = None) -> DelayLineState:
    if delay < 0:
        raise ValueError(f"delay must be >= 0, got {delay}")
    mem = np.zeros((delay,) + tuple(frame_shape), dtype=DTYPE)
    state = DelayLineState(mem)
    if seed is not None:
        mem[...] = seed
        state.filled = delay
    return state


def _delay_array(frame: np.ndarray, state: DelayLineState) -> np.ndarray | None:
    if state.delay == 0:
        return frame
    slot = state.index
    out = state.mem[slot].copy() if state.filled == state.delay else None
    state.mem[slot] = frame
    state.index = (slot + 1) % state.delay
    state.filled = min(state.filled + 1, state.delay)
    return out


def delay_step(
    frame: FrameTensor | np.ndarray, state: DelayLineState
) -> tuple[StepOutput, DelayLineState]:
    frame = np.asarray(frame, dtype=DTYPE)
    if state.mem.shape[1:] != frame.shape:
        raise ValueError(f"delay line holds {state.mem.shape[1:]}, got frame {frame.shape}")
    return StepOutput(_delay_array(frame, state)), state
