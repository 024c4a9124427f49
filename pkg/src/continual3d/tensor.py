"""Dense float32 frame/clip containers and convolution shape arithmetic."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

DTYPE = np.float32


def _frozen(array, ndim: int, name: str) -> np.ndarray:
    data = np.array(array, dtype=DTYPE, copy=True, order="C")
    if data.ndim != ndim:
        raise ValueError(f"{name} expects {ndim} dimensions, got shape {data.shape}")
    if min(data.shape) < 1:
        raise ValueError(f"{name} dimensions must be >= 1, got {data.shape}")
    data.flags.writeable = False
    return data


@dataclass(frozen=True, eq=False)
class FrameTensor:
    """A single (C, H, W) time slice."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen(self.data, 3, "FrameTensor"))

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, FrameTensor):
            return NotImplemented
        return self.shape == other.shape and self.data.tobytes() == other.data.tobytes()


@dataclass(frozen=True, eq=False)
class ClipTensor:
    """A (C, T, H, W) spatio-temporal volume."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen(self.data, 4, "ClipTensor"))

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def time(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[2]

    @property
    def width(self) -> int:
        return self.data.shape[3]

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.data.shape

    def frame(self, t: int) -> FrameTensor:
        return FrameTensor(self.data[:, t])

    def frames(self) -> list[FrameTensor]:
        return [self.frame(t) for t in range(self.time)]

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, ClipTensor):
            return NotImplemented
        return self.shape == other.shape and self.data.tobytes() == other.data.tobytes()


@dataclass(frozen=True)
class DimSpec:
    """Kernel, stride, dilation and padding along one axis."""

    kernel: int = 1
    stride: int = 1
    dilation: int = 1
    padding: int = 0

    def __post_init__(self):
        if self.kernel < 1:
            raise ValueError(f"kernel must be >= 1, got {self.kernel}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.dilation < 1:
            raise ValueError(f"dilation must be >= 1, got {self.dilation}")
        if self.padding < 0:
            raise ValueError(f"padding must be >= 0, got {self.padding}")

    @property
    def span(self) -> int:
        """Number of input positions covered by one kernel application."""
        return self.dilation * (self.kernel - 1) + 1


def output_size(m: int, dim: DimSpec, padding: int | None = None) -> int:
    """``floor((m + 2p - d(k-1) - 1) / s) + 1``.

    ``padding`` overrides ``dim.padding`` (used when a declared padding is
    not applied, e.g. along a streamed axis).
    """
    if m < 1:
        raise ValueError(f"input size must be >= 1, got {m}")
    p = dim.padding if padding is None else padding
    numerator = m + 2 * p - dim.dilation * (dim.kernel - 1) - 1
    if numerator < 0:
        raise ValueError(
            f"kernel span {dim.span} exceeds padded input {m + 2 * p}"
        )
    return numerator // dim.stride + 1


def clip_from_frames(frames: Sequence[FrameTensor | np.ndarray]) -> ClipTensor:
    if len(frames) == 0:
        raise ValueError("need at least one frame")
    arrays = [np.asarray(f, dtype=DTYPE) for f in frames]
    shape = arrays[0].shape
    for j, a in enumerate(arrays):
        if a.shape != shape:
            raise ValueError(f"frame {j} has shape {a.shape}, expected {shape}")
    return ClipTensor(np.stack(arrays, axis=1))


def split_clip(clip: ClipTensor) -> list[FrameTensor]:
    return clip.frames()
