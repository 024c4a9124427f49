"""Network descriptions, clip/continual conversion, receptive-field analysis and execution.

A network is an ordered list of layer specs. It runs in two ways:

* ``forward_clip`` evaluates it clip-wise on a (C, T, H, W) array. The
  temporal padding policy is explicit: ``"none"`` is the unrolled network
  with no temporal padding, ``"declared"`` applies each layer's declared
  symmetric padding (the original regular network), and ``"causal"`` pads
  only on the left, which is what a zero-initialised stream computes.
* ``CoNetwork`` runs it frame by frame with per-layer states.

Time bookkeeping: every clip-mode intermediate carries the input frame index
at which its first time position becomes available in a stream (``end0``).
Residual skips are aligned through it.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace
from typing import Callable, ClassVar, Iterator, Literal, Sequence, Union

import numpy as np

from .conv import (
    ConvSpec,
    StepOutput,
    _step_array,
    coconv_init,
    conv3d_array,
    frame_partials,
)
from .layers import (
    NormSpec,
    PoolSpec,
    SEParams,
    _copool_array,
    _delay_array,
    activation,
    copool_init,
    delay_init,
    norm_infer,
    pool_clip,
    pool_spatial,
    se_block_clip,
    se_block_step,
)
from .tensor import DTYPE, ClipTensor, DimSpec, FrameTensor, clip_from_frames

Padding = Literal["none", "declared", "causal"]
InitScheme = Literal["zeros", "replicate"]


@dataclass(eq=False)
class ActivationSpec:
    kind: ClassVar[str] = "activation"

    fn: str = "relu"
    name: str = ""

    def __post_init__(self):
        activation(self.fn)


@dataclass(eq=False)
class GlobalPoolSpec:
    """Average (or max) over the whole frame and ``temporal_kernel`` frames."""

    kind: ClassVar[str] = "global_pool"

    temporal_kernel: int = 1
    mode: Literal["avg", "max"] = "avg"
    name: str = ""

    def __post_init__(self):
        if self.temporal_kernel < 1:
            raise ValueError(f"{self.name or 'global_pool'}: temporal_kernel must be >= 1")

    def resolve(self, height: int, width: int) -> PoolSpec:
        return PoolSpec(
            self.mode,
            DimSpec(self.temporal_kernel),
            DimSpec(height),
            DimSpec(width),
            name=self.name,
        )


@dataclass(eq=False)
class LinearSpec:
    """Fully connected layer over the flattened frame; output shape (out, 1, 1)."""

    kind: ClassVar[str] = "linear"

    in_features: int
    out_features: int
    has_bias: bool = True
    weights: np.ndarray | None = None
    bias: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        shape = (self.out_features, self.in_features)
        self.weights = (
            np.zeros(shape, DTYPE) if self.weights is None else np.asarray(self.weights, DTYPE)
        )
        if self.weights.shape != shape:
            raise ValueError(f"{self.name or 'linear'}: weight shape {self.weights.shape} != {shape}")
        if self.has_bias:
            self.bias = (
                np.zeros(self.out_features, DTYPE)
                if self.bias is None
                else np.asarray(self.bias, DTYPE).reshape(self.out_features)
            )
        elif self.bias is not None:
            raise ValueError(f"{self.name or 'linear'}: bias given but has_bias is false")

    def apply(self, x: np.ndarray) -> np.ndarray:
        y = self.weights @ x.reshape(-1)
        if self.has_bias:
            y = y + self.bias
        return y.reshape(self.out_features, 1, 1)


@dataclass(eq=False)
class ResidualBlock:
    """``act(inner(x) + shortcut(x))``.

    ``shortcut`` must be temporally trivial (k_T = 1 convolutions, norms,
    activations). ``delay`` is the skip delay used when streaming; None means
    "derive from the inner path", which is what conversion fills in.
    """

    kind: ClassVar[str] = "residual_block"

    inner: list = field(default_factory=list)
    shortcut: list = field(default_factory=list)
    activation: str | None = None
    delay: int | None = None
    name: str = ""

    def __post_init__(self):
        if self.activation is not None:
            activation(self.activation)
        if self.delay is not None and self.delay < 0:
            raise ValueError(f"{self.name or 'residual'}: delay must be >= 0")


LayerSpec = Union[
    ConvSpec, PoolSpec, ActivationSpec, NormSpec, SEParams, ResidualBlock, GlobalPoolSpec, LinearSpec
]
LAYER_KINDS = {
    cls.kind: cls
    for cls in (
        ConvSpec, PoolSpec, ActivationSpec, NormSpec, SEParams, ResidualBlock, GlobalPoolSpec, LinearSpec
    )
}


@dataclass(eq=False)
class NetworkSpec:
    input_shape: tuple[int, int, int]
    layers: list = field(default_factory=list)
    fps: float | None = None
    name: str = ""
    continual: bool = False

    def __post_init__(self):
        self.input_shape = tuple(int(v) for v in self.input_shape)
        if len(self.input_shape) != 3 or min(self.input_shape) < 1:
            raise ValueError(f"input shape must be (channels, height, width), got {self.input_shape}")
        _assign_names(self.layers, "")
        names = [n for n, _ in iter_layers(self.layers)]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise ValueError(f"duplicate layer names: {sorted(dupes)}")
        infer_shapes(self)


def _assign_names(layers: list, prefix: str) -> None:
    for i, layer in enumerate(layers):
        if not layer.name:
            name = f"{prefix}{i}"
            if isinstance(layer, PoolSpec):
                object.__setattr__(layer, "name", name)
            else:
                layer.name = name
        if isinstance(layer, ResidualBlock):
            _assign_names(layer.inner, f"{layer.name}.inner.")
            _assign_names(layer.shortcut, f"{layer.name}.shortcut.")


def iter_layers(layers: Sequence, depth: int = 0) -> Iterator[tuple[str, LayerSpec]]:
    """Depth-first walk over every layer including nested residual paths."""
    for layer in layers:
        yield layer.name, layer
        if isinstance(layer, ResidualBlock):
            yield from iter_layers(layer.inner, depth + 1)
            yield from iter_layers(layer.shortcut, depth + 1)


# -- shapes --------------------------------------------------------------------


def layer_out_shape(layer: LayerSpec, shape: tuple[int, int, int]) -> tuple[int, int, int]:
    c, h, w = shape
    label = layer.name or layer.kind
    if isinstance(layer, ConvSpec):
        if c != layer.in_channels:
            raise ValueError(f"{label}: expects {layer.in_channels} channels, receives {c}")
        return (layer.out_channels,) + layer.spatial_out(h, w)
    if isinstance(layer, PoolSpec):
        return (c,) + layer.spatial_out(h, w)
    if isinstance(layer, GlobalPoolSpec):
        return (c, 1, 1)
    if isinstance(layer, (NormSpec, SEParams)):
        if c != layer.channels:
            raise ValueError(f"{label}: expects {layer.channels} channels, receives {c}")
        return shape
    if isinstance(layer, ActivationSpec):
        return shape
    if isinstance(layer, LinearSpec):
        if c * h * w != layer.in_features:
            raise ValueError(f"{label}: expects {layer.in_features} features, receives {c * h * w}")
        return (layer.out_features, 1, 1)
    if isinstance(layer, ResidualBlock):
        inner = shape
        for sub in layer.inner:
            inner = layer_out_shape(sub, inner)
        skip = shape
        for sub in layer.shortcut:
            if temporal_geometry(sub) != (0, 0, 1):
                raise ValueError(f"{label}: shortcut layer {sub.name} is not temporally trivial")
            skip = layer_out_shape(sub, skip)
        if inner != skip:
            raise ValueError(f"{label}: inner path gives {inner}, skip path gives {skip}")
        return inner
    raise TypeError(f"unsupported layer type {type(layer).__name__}")


def infer_shapes(net: NetworkSpec) -> list[tuple[str, tuple, tuple]]:
    """(name, input shape, output shape) for every layer, nested ones included."""
    rows: list[tuple[str, tuple, tuple]] = []

    def walk(layers, shape):
        for layer in layers:
            out = layer_out_shape(layer, shape)
            rows.append((layer.name, shape, out))
            if isinstance(layer, ResidualBlock):
                walk(layer.inner, shape)
                walk(layer.shortcut, shape)
            shape = out
        return shape

    walk(net.layers, net.input_shape)
    return rows


def output_shape(net: NetworkSpec) -> tuple[int, int, int]:
    shape = net.input_shape
    for layer in net.layers:
        shape = layer_out_shape(layer, shape)
    return shape


# -- temporal analysis -------------------------------------------------------


def temporal_geometry(layer: LayerSpec) -> tuple[int, int, int]:
    """(span - 1, declared padding, stride) of a layer along time."""
    if isinstance(layer, (ConvSpec, PoolSpec)):
        t = layer.temporal
        return t.dilation * (t.kernel - 1), t.padding, t.stride
    if isinstance(layer, GlobalPoolSpec):
        return layer.temporal_kernel - 1, 0, 1
    if isinstance(layer, ResidualBlock):
        span = pad = 0
        jump = 1
        for sub in layer.inner:
            s, p, st = temporal_geometry(sub)
            span += s * jump
            pad += p * jump
            jump *= st
        return span, pad, jump
    return 0, 0, 1


def layer_delay(layer: LayerSpec) -> int:
    """Output-index delay of a layer, in its own input frames."""
    span, pad, _ = temporal_geometry(layer)
    if pad > span:
        raise ValueError(f"{layer.name}: temporal padding {pad} exceeds kernel span {span}")
    return span - pad


@dataclass(frozen=True)
class ReceptiveSummary:
    r_t: int
    p_t: int
    transient_len: int
    total_delay: int

    def __post_init__(self):
        if self.transient_len != self.r_t - self.p_t - 1 or self.transient_len < 0:
            raise ValueError(f"inconsistent receptive summary {self}")


def analyze(net: NetworkSpec) -> ReceptiveSummary:
    r, p, delay, jump = 1, 0, 0, 1
    for layer in net.layers:
        span, pad, stride = temporal_geometry(layer)
        r += span * jump
        p += pad * jump
        delay += (span - pad) * jump
        jump *= stride
    return ReceptiveSummary(r, p, r - p - 1, delay)


def padded_layers(net: NetworkSpec) -> list[str]:
    """Layers whose declared temporal padding is dropped when streaming."""
    return [
        name
        for name, layer in iter_layers(net.layers)
        if isinstance(layer, (ConvSpec, PoolSpec)) and layer.temporal.padding > 0
    ]


# -- conversion ----------------------------------------------------------------


def _convert_layers(layers: list) -> list:
    out = []
    for layer in layers:
        if isinstance(layer, ResidualBlock):
            if temporal_geometry(layer)[2] != 1:
                raise ValueError(f"{layer.name}: temporal stride inside a residual path is not convertible")
            inner = _convert_layers(layer.inner)
            shortcut = _convert_layers(layer.shortcut)
            delay = layer.delay if layer.delay is not None else layer_delay(layer)
            out.append(replace(layer, inner=inner, shortcut=shortcut, delay=delay))
        elif isinstance(layer, SEParams):
            out.append(replace(layer, temporal=False))
        else:
            layer_delay(layer)
            out.append(copy.copy(layer))
    return out


def convert_to_continual(net: NetworkSpec, global_pool_temporal: int | None = None) -> NetworkSpec:
    """Continual form of ``net``.

    Weights are shared, not copied. Declared temporal padding stays recorded
    for delay bookkeeping but is never applied to the stream. SE blocks become
    spatial-only and every residual skip gets a delay equal to its inner path's.
    ``global_pool_temporal`` overrides the last global pool's temporal kernel.
    """
    layers = _convert_layers(net.layers)
    if global_pool_temporal is not None:
        pools = [i for i, layer in enumerate(layers) if isinstance(layer, GlobalPoolSpec)]
        if not pools:
            raise ValueError("network has no global pool to extend")
        layers[pools[-1]] = replace(layers[pools[-1]], temporal_kernel=global_pool_temporal)
    return NetworkSpec(net.input_shape, layers, fps=net.fps, name=net.name, continual=True)


def with_global_pool(net: NetworkSpec, temporal_kernel: int) -> NetworkSpec:
    """Copy of ``net`` (clip or continual) with the last global pool resized."""
    layers = list(net.layers)
    pools = [i for i, layer in enumerate(layers) if isinstance(layer, GlobalPoolSpec)]
    if not pools:
        raise ValueError("network has no global pool")
    layers[pools[-1]] = replace(layers[pools[-1]], temporal_kernel=temporal_kernel)
    return NetworkSpec(net.input_shape, layers, fps=net.fps, name=net.name, continual=net.continual)


# -- parameters ------------------------------------------------------------------

PARAM_FIELDS = {
    "conv3d": ("weights", "bias"),
    "linear": ("weights", "bias"),
    "norm": ("scale", "shift", "mean", "var"),
    "se": ("w1", "b1", "w2", "b2"),
}
PARAM_NAMES = {"weights": "weight"}


def parameters(net: NetworkSpec) -> Iterator[tuple[str, LayerSpec, str]]:
    """(entry name, layer, attribute) for every parameter tensor."""
    for name, layer in iter_layers(net.layers):
        for attr in PARAM_FIELDS.get(layer.kind, ()):
            if getattr(layer, attr, None) is None:
                continue
            yield f"{name}.{PARAM_NAMES.get(attr, attr)}", layer, attr


def init_parameters(net: NetworkSpec, seed: int = 0, names: set[str] | None = None) -> None:
    """Seeded uniform initialisation, scaled so activations stay O(1).

    Weights draw from U(-a, a) with a = sqrt(3 / fan_in); biases and norm
    shifts/means from U(-0.1, 0.1); norm scales and variances from U(0.8, 1.2).
    ``names`` restricts initialisation to those entries.
    """
    rng = np.random.default_rng(seed)
    for entry, layer, attr in parameters(net):
        current = getattr(layer, attr)
        shape = current.shape
        if attr in ("weights", "w1", "w2"):
            fan_in = int(np.prod(shape[1:]))
            bound = np.sqrt(3.0 / fan_in)
            value = rng.uniform(-bound, bound, shape)
        elif attr in ("scale", "var"):
            value = rng.uniform(0.8, 1.2, shape)
        else:
            value = rng.uniform(-0.1, 0.1, shape)
        if names is None or entry in names:
            setattr(layer, attr, value.astype(DTYPE))


# -- clip-wise execution ---------------------------------------------------------


def _pad_for(layer, mode: Padding) -> tuple[int, int]:
    p = layer.temporal.padding
    return {"none": (0, 0), "declared": (p, p), "causal": (p, 0)}[mode]


def _map_clip(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray) -> np.ndarray:
    return np.stack([fn(x[:, t]) for t in range(x.shape[1])], axis=1)


def _clip_layer(layer, x: np.ndarray, end0: int, jump: int, mode: Padding):
    """Apply one layer clip-wise; returns (y, end0, jump)."""
    if isinstance(layer, ConvSpec):
        left, right = _pad_for(layer, mode)
        span = layer.buffer_len
        y = conv3d_array(x, layer, temporal_pad=(left, right))
        return y, end0 + (span - left) * jump, jump * layer.temporal.stride
    if isinstance(layer, (PoolSpec, GlobalPoolSpec)):
        spec = layer if isinstance(layer, PoolSpec) else layer.resolve(x.shape[2], x.shape[3])
        left, right = _pad_for(spec, mode)
        y = pool_clip(x, spec, temporal_pad=(left, right))
        return y, end0 + (spec.temporal.kernel - 1 - left) * jump, jump * spec.temporal.stride
    if isinstance(layer, NormSpec):
        return norm_infer(x, layer), end0, jump
    if isinstance(layer, ActivationSpec):
        return activation(layer.fn)(x), end0, jump
    if isinstance(layer, SEParams):
        return se_block_clip(x, layer), end0, jump
    if isinstance(layer, LinearSpec):
        return _map_clip(layer.apply, x), end0, jump
    if isinstance(layer, ResidualBlock):
        y, y_end0, y_jump = _clip_path(layer.inner, x, end0, jump, mode)
        if y_jump != jump:
            raise ValueError(f"{layer.name}: temporal stride inside a residual path")
        # skip frame for inner position j ends at y_end0 + j*jump - D*jump
        offset = (y_end0 - end0) // jump - layer_delay(layer)
        n = y.shape[1]
        if offset < 0 or offset + n > x.shape[1]:
            raise ValueError(f"{layer.name}: skip path cannot be aligned with inner path")
        skip, _, _ = _clip_path(layer.shortcut, x[:, offset : offset + n], 0, jump, mode)
        y = y + skip
        if layer.activation:
            y = activation(layer.activation)(y)
        return y, y_end0, jump
    raise TypeError(f"unsupported layer type {type(layer).__name__}")


def _clip_path(layers, x, end0, jump, mode, capture=None):
    for layer in layers:
        if x.shape[1] < 1:
            raise ValueError(f"{layer.name}: no time positions left")
        try:
            x, end0, jump = _clip_layer(layer, x, end0, jump, mode)
        except ValueError as exc:
            if "exceeds padded input" in str(exc):
                raise ValueError(f"insufficient frames at layer {layer.name}: {exc}") from exc
            raise
        if capture is not None:
            capture.append((layer.name, x, end0, jump))
    return x, end0, jump


def forward_clip_sequence(
    net: NetworkSpec,
    clip: ClipTensor | np.ndarray,
    padding: Padding = "none",
    capture: list | None = None,
) -> tuple[np.ndarray, int, int]:
    """All output time positions: (outputs (n, D), end0, jump).

    Output ``j`` is the prediction a stream emits after input frame
    ``end0 + j * jump`` (0-based).
    """
    x = np.asarray(clip, dtype=DTYPE)
    if x.ndim != 4 or x.shape[0] != net.input_shape[0] or x.shape[2:] != net.input_shape[1:]:
        raise ValueError(f"clip shape {x.shape} does not match network input {net.input_shape}")
    needed = _frames_needed(net, padding)
    if x.shape[1] < needed:
        raise ValueError(f"insufficient frames: {x.shape[1]} given, {needed} needed ({padding} padding)")
    y, end0, jump = _clip_path(net.layers, x, 0, 1, padding, capture)
    return y.transpose(1, 0, 2, 3).reshape(y.shape[1], -1), end0, jump


def _frames_needed(net: NetworkSpec, padding: Padding) -> int:
    summary = analyze(net)
    if padding == "none":
        return summary.r_t
    if padding == "causal":
        return summary.r_t - summary.p_t
    return max(1, summary.r_t - 2 * summary.p_t)


def forward_clip(net: NetworkSpec, clip: ClipTensor | np.ndarray, padding: Padding = "none") -> np.ndarray:
    """Prediction vector for the last output position of ``clip``."""
    outputs, _, _ = forward_clip_sequence(net, clip, padding)
    return outputs[-1]


# -- continual execution -----------------------------------------------------------


class _Node:
    name: str = ""

    def step(self, x: np.ndarray) -> np.ndarray | None:
        raise NotImplementedError

    def replicate(self, x: np.ndarray) -> np.ndarray:
        """Fill state as if ``x`` had been seen forever; return the steady output."""
        raise NotImplementedError

    def states(self) -> Iterator[tuple[str, object]]:
        return iter(())


class _ConvNode(_Node):
    def __init__(self, spec: ConvSpec, in_shape):
        self.spec, self.name = spec, spec.name
        self.state = coconv_init(spec, "zeros", input_hw=in_shape[1:])

    def step(self, x):
        return _step_array(x, self.state, self.spec)

    def replicate(self, x):
        self.state = coconv_init(self.spec, "replicate", seed_frame=x)
        y = frame_partials(x, self.spec).sum(axis=0)
        if self.spec.has_bias:
            y += self.spec.bias[:, None, None]
        return y

    def states(self):
        yield self.name, self.state


class _PoolNode(_Node):
    def __init__(self, spec: PoolSpec, in_shape):
        self.spec, self.name = spec, spec.name
        self.state = copool_init(spec, in_shape[0], in_shape[1:])

    def step(self, x):
        return _copool_array(x, self.state, self.spec)

    def replicate(self, x):
        pooled = pool_spatial(x, self.spec)
        self.state.mem[...] = pooled
        self.state.index = 0
        self.state.steps = self.spec.temporal.kernel - 1
        return pooled

    def states(self):
        yield self.name, self.state


class _MapNode(_Node):
    def __init__(self, fn, name):
        self.fn, self.name = fn, name

    def step(self, x):
        return self.fn(x)

    def replicate(self, x):
        return self.fn(x)


class _ResidualNode(_Node):
    def __init__(self, block: ResidualBlock, in_shape, delay: int):
        self.name = block.name
        self.inner = _compile(block.inner, in_shape)
        self.shortcut = _compile(block.shortcut, in_shape)
        self.delay_line = delay_init(delay, in_shape)
        self.act = activation(block.activation) if block.activation else None

    def step(self, x):
        skip = _delay_array(x, self.delay_line)
        y = _run(self.inner, x)
        if y is None or skip is None:
            return None
        y = y + _run(self.shortcut, skip)
        return self.act(y) if self.act else y

    def replicate(self, x):
        self.delay_line.mem[...] = x
        self.delay_line.filled = self.delay_line.delay
        y = _replicate(self.inner, x) + _replicate(self.shortcut, x)
        return self.act(y) if self.act else y

    def states(self):
        for node in self.inner + self.shortcut:
            yield from node.states()
        yield self.name + ".skip", self.delay_line


def _run(nodes: list[_Node], x):
    for node in nodes:
        x = node.step(x)
        if x is None:
            return None
    return x


def _replicate(nodes: list[_Node], x):
    for node in nodes:
        x = node.replicate(x)
    return x


def _compile(layers: list, shape) -> list[_Node]:
    nodes: list[_Node] = []
    for layer in layers:
        if isinstance(layer, ConvSpec):
            nodes.append(_ConvNode(layer, shape))
        elif isinstance(layer, PoolSpec):
            nodes.append(_PoolNode(layer, shape))
        elif isinstance(layer, GlobalPoolSpec):
            nodes.append(_PoolNode(layer.resolve(*shape[1:]), shape))
        elif isinstance(layer, NormSpec):
            nodes.append(_MapNode(lambda x, s=layer: norm_infer(x, s), layer.name))
        elif isinstance(layer, ActivationSpec):
            nodes.append(_MapNode(activation(layer.fn), layer.name))
        elif isinstance(layer, SEParams):
            if layer.temporal:
                raise ValueError(f"{layer.name}: temporal SE must be converted before streaming")
            nodes.append(_MapNode(lambda x, s=layer: se_block_step(x, s), layer.name))
        elif isinstance(layer, LinearSpec):
            nodes.append(_MapNode(layer.apply, layer.name))
        elif isinstance(layer, ResidualBlock):
            delay = layer.delay if layer.delay is not None else layer_delay(layer)
            nodes.append(_ResidualNode(layer, shape, delay))
        else:
            raise TypeError(f"unsupported layer type {type(layer).__name__}")
        shape = layer_out_shape(layer, shape)
    return nodes


class CoNetwork:
    """Compiled continual runtime: one instance per stream, stepped sequentially."""

    def __init__(self, net: NetworkSpec):
        if not net.continual:
            net = convert_to_continual(net)
        self.spec = net
        self.summary = analyze(net)
        self.nodes = _compile(net.layers, net.input_shape)
        self.steps = 0
        self.trace: list[tuple[str, np.ndarray]] | None = None

    def step(self, frame: FrameTensor | np.ndarray) -> StepOutput:
        x = np.asarray(frame, dtype=DTYPE)
        if x.shape != self.spec.input_shape:
            raise ValueError(f"frame shape {x.shape} != network input {self.spec.input_shape}")
        self.steps += 1
        for node in self.nodes:
            x = node.step(x)
            if x is None:
                return StepOutput(None)
            if self.trace is not None:
                self.trace.append((node.name, x.copy()))
        return StepOutput(x.reshape(-1).copy())

    def states(self) -> Iterator[tuple[str, object]]:
        for node in self.nodes:
            yield from node.states()

    def state_floats(self) -> int:
        """Floats actually held by every ring buffer and delay line."""
        return sum(state.floats for _, state in self.states())


def stream_init(
    net: NetworkSpec,
    scheme: InitScheme = "zeros",
    first_frame: FrameTensor | np.ndarray | None = None,
) -> CoNetwork:
    """Zero-filled states, or states of the steady response to a repeated first frame."""
    if scheme not in ("zeros", "replicate"):
        raise ValueError(f"unknown init scheme {scheme!r}")
    conet = CoNetwork(net)
    if scheme == "replicate":
        if first_frame is None:
            raise ValueError("replicate initialisation requires the first frame")
        x = np.asarray(first_frame, dtype=DTYPE)
        if x.shape != conet.spec.input_shape:
            raise ValueError(f"frame shape {x.shape} != network input {conet.spec.input_shape}")
        _replicate(conet.nodes, x)
    return conet


def stream_step(conet: CoNetwork, frame: FrameTensor | np.ndarray) -> StepOutput:
    return conet.step(frame)


# -- reference windows -----------------------------------------------------------


def reference_window(
    net: NetworkSpec,
    frames: Sequence[np.ndarray] | np.ndarray,
    t: int,
    init: InitScheme = "zeros",
) -> tuple[np.ndarray, Padding, int]:
    """Clip a stream should have seen by frame ``t``: (clip, padding, first frame index).

    Takes the trailing ``r_T`` frames ending at ``t``. Near the start of a
    zero-initialised stream the window is shorter and left-padded per layer;
    for replicate initialisation it is extended with copies of frame 0, so
    the first frame index may be negative. The clip is assembled afresh.
    """
    r_t = analyze(net).r_t
    start = t - r_t + 1
    if start >= 0:
        window = [frames[i] for i in range(start, t + 1)]
        padding: Padding = "none"
    elif init == "replicate":
        window = [frames[0]] * (-start) + [frames[i] for i in range(t + 1)]
        padding = "none"
    else:
        window = [frames[i] for i in range(t + 1)]
        padding, start = "causal", 0
    return clip_from_frames(window).data, padding, start


def window_reference(
    net: NetworkSpec,
    frames: Sequence[np.ndarray] | np.ndarray,
    t: int,
    init: InitScheme = "zeros",
) -> np.ndarray:
    """Clip-wise recomputation of what a stream of ``net`` should emit after frame ``t``.

    ``net`` should be the continual spec so that both sides use the same
    (spatial-only) SE blocks.
    """
    clip, padding, _ = reference_window(net, frames, t, init)
    outputs, end0, jump = forward_clip_sequence(net, clip, padding)
    if end0 + (len(outputs) - 1) * jump != clip.shape[1] - 1:
        raise ValueError(f"no output ends at frame {t}")
    return outputs[-1]
