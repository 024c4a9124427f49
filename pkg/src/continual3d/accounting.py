"""Exact FLOP, memory and delay accounting for clip-wise and continual networks.

Counting rules:

* A convolution costs ``(kH*kW*kT + b) * (c_I/g) * c_O`` per output position;
  clip mode multiplies by ``n_T*n_H*n_W``, a continual step by ``n_H*n_W``.
* Linear layers and SE projections are treated as 1x1x1 convolutions.
* Norms, activations, pooling, SE rescaling and residual adds are reported
  in a separate elementwise column (1 per element, ``k`` per pooled output).
* Continual state: ``d(k-1)*c_O*n_H*n_W`` per conv, ``(k-1)*C*n_H*n_W`` per
  temporal pool and ``D*C*m_H*m_W`` per residual delay line.
* Transient memory of a layer is its output for one step (continual) or for
  the whole clip (clip mode). Worst case adds the largest transient to the
  state, and in clip mode the cache of ``m_T - 1`` prior input frames.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Literal

from .conv import ConvSpec
from .layers import NormSpec, PoolSpec, SEParams
from .network import (
    ActivationSpec,
    GlobalPoolSpec,
    LinearSpec,
    NetworkSpec,
    ResidualBlock,
    layer_delay,
    layer_out_shape,
    with_global_pool,
)
from .tensor import DimSpec, output_size

Mode = Literal["clip", "continual"]


@dataclass(frozen=True)
class FlopConvention:
    count_mac_as: int = 1
    count_bias: bool = True

    def __post_init__(self):
        if self.count_mac_as not in (1, 2):
            raise ValueError("count_mac_as must be 1 or 2")


def _check_out(spec: ConvSpec, out) -> tuple[int, int, int, int]:
    out = tuple(int(v) for v in out)
    if len(out) == 3:
        out = (spec.out_channels,) + out
    if len(out) != 4 or out[0] != spec.out_channels:
        raise ValueError(f"output shape {out} does not fit {spec.out_channels} output channels")
    return out


def _per_position(spec: ConvSpec, conv: FlopConvention) -> int:
    k_t, k_h, k_w = spec.kernel
    b = int(spec.has_bias and conv.count_bias)
    return conv.count_mac_as * (k_h * k_w * k_t + b) * (spec.in_channels // spec.groups) * spec.out_channels


def conv_flops_clip(spec: ConvSpec, out, convention: FlopConvention = FlopConvention()) -> int:
    """FLOPs for a whole output volume ``out`` = (c_O, n_T, n_H, n_W)."""
    _, n_t, n_h, n_w = _check_out(spec, out)
    return _per_position(spec, convention) * n_t * n_h * n_w


def conv_flops_frame(spec: ConvSpec, out, convention: FlopConvention = FlopConvention()) -> int:
    """FLOPs of one continual step; the temporal extent of ``out`` is ignored."""
    _, _, n_h, n_w = _check_out(spec, out)
    return _per_position(spec, convention) * n_h * n_w


def _dense_flops(c_in: int, c_out: int, bias: bool, convention: FlopConvention) -> int:
    return convention.count_mac_as * (1 + int(bias and convention.count_bias)) * c_in * c_out


@dataclass
class CostRow:
    name: str
    kind: str
    flops_per_frame: int = 0
    flops_per_clip: int = 0
    elementwise_per_frame: int = 0
    elementwise_per_clip: int = 0
    state_floats: int = 0
    transient_floats: int = 0
    delay_frames: int = 0
    expression: str = ""

    @property
    def stage(self) -> str:
        return self.name.split(".")[0]


SUMMED = (
    "flops_per_frame",
    "flops_per_clip",
    "elementwise_per_frame",
    "elementwise_per_clip",
    "state_floats",
    "transient_floats",
    "delay_frames",
)


@dataclass
class CostReport:
    mode: Mode
    clip_size: int
    convention: FlopConvention
    rows: list[CostRow] = field(default_factory=list)
    frame_cache_floats: int = 0
    network: str = ""

    def total(self, column: str) -> int:
        return sum(getattr(r, column) for r in self.rows)

    @property
    def totals(self) -> dict[str, int]:
        return {c: self.total(c) for c in SUMMED}

    @property
    def state_floats(self) -> int:
        return self.total("state_floats")

    @property
    def max_transient_floats(self) -> int:
        return max((r.transient_floats for r in self.rows), default=0)

    @property
    def max_transient_layer(self) -> str:
        return max(self.rows, key=lambda r: r.transient_floats).name if self.rows else ""

    @property
    def worst_case_floats(self) -> int:
        return self.state_floats + self.max_transient_floats + self.frame_cache_floats

    @property
    def flops_per_clip(self) -> int:
        return self.total("flops_per_clip")

    @property
    def flops_per_frame(self) -> int:
        return self.total("flops_per_frame")

    @property
    def flop_ratio(self) -> float:
        return self.flops_per_clip / self.flops_per_frame if self.flops_per_frame else float("nan")


class _Walker:
    """Walks a network once, tracking clip shapes (c, t, h, w) and frame jumps."""

    def __init__(self, mode: Mode, clip_size: int, convention: FlopConvention):
        self.mode, self.clip_size, self.conv = mode, clip_size, convention
        self.rows: list[CostRow] = []

    def walk(self, layers, shape, jump):
        for layer in layers:
            shape, jump = self.layer(layer, shape, jump)
        return shape, jump

    def _clip_t(self, t: int, dim, label: str) -> int:
        if self.mode == "continual":
            # per-step rows do not depend on a clip length
            return t
        try:
            return output_size(t, dim)
        except ValueError as exc:
            raise ValueError(f"{label}: clip of {self.clip_size} frames too short ({exc})") from None

    def layer(self, layer, shape, jump):
        c, t, h, w = shape
        frame_in = c * h * w
        continual = self.mode == "continual"
        row = CostRow(layer.name, layer.kind)

        if isinstance(layer, ResidualBlock):
            (c_o, t_o, h_o, w_o), inner_jump = self.walk(layer.inner, shape, jump)
            self.walk(layer.shortcut, shape, jump)
            out_frame = c_o * h_o * w_o
            row.kind = "residual"
            row.elementwise_per_frame = out_frame * (2 if layer.activation else 1)
            row.elementwise_per_clip = row.elementwise_per_frame * t_o
            if continual:
                delay = layer.delay if layer.delay is not None else layer_delay(layer)
                row.state_floats = delay * frame_in
                row.expression = f"{delay} x {c} x {h} x {w}"
                row.transient_floats = out_frame
            else:
                row.transient_floats = out_frame * t_o
            self.rows.append(row)
            return (c_o, t_o, h_o, w_o), inner_jump

        if isinstance(layer, GlobalPoolSpec):
            k_t = layer.temporal_kernel if continual else t
            pool = PoolSpec(layer.mode, DimSpec(k_t), DimSpec(h), DimSpec(w), name=layer.name)
            return self._pool(pool, row, shape, jump)
        if isinstance(layer, PoolSpec):
            return self._pool(layer, row, shape, jump)

        c_o, h_o, w_o = layer_out_shape(layer, (c, h, w))
        out_frame = c_o * h_o * w_o
        t_o = t
        if isinstance(layer, ConvSpec):
            t_o = self._clip_t(t, layer.temporal, layer.name)
            out = (c_o, t_o, h_o, w_o)
            row.flops_per_clip = conv_flops_clip(layer, out, self.conv)
            row.flops_per_frame = conv_flops_frame(layer, out, self.conv)
            span = layer.buffer_len
            row.delay_frames = (span - layer.temporal.padding) * jump
            if continual and span:
                row.state_floats = span * out_frame
                row.expression = f"({_k_expr(layer.temporal)}) x {c_o} x {h_o} x {w_o}"
            jump *= layer.temporal.stride
        elif isinstance(layer, SEParams):
            gate = _dense_flops(c, layer.hidden, True, self.conv) + _dense_flops(
                layer.hidden, c, True, self.conv
            )
            row.flops_per_frame = gate
            row.flops_per_clip = gate if layer.temporal else gate * t
            row.elementwise_per_frame = 2 * out_frame
        elif isinstance(layer, LinearSpec):
            dense = _dense_flops(layer.in_features, layer.out_features, layer.has_bias, self.conv)
            row.flops_per_frame = dense
            row.flops_per_clip = dense * t
        elif isinstance(layer, (NormSpec, ActivationSpec)):
            row.elementwise_per_frame = out_frame
        else:
            raise TypeError(f"unsupported layer type {type(layer).__name__}")
        if not row.elementwise_per_clip:
            row.elementwise_per_clip = row.elementwise_per_frame * t_o
        row.transient_floats = out_frame if continual else out_frame * t_o
        self.rows.append(row)
        return (c_o, t_o, h_o, w_o), jump

    def _pool(self, pool: PoolSpec, row: CostRow, shape, jump):
        c, t, h, w = shape
        h_o, w_o = pool.spatial_out(h, w)
        t_o = self._clip_t(t, pool.temporal, pool.name)
        out_frame = c * h_o * w_o
        k_t, k_h, k_w = pool.temporal.kernel, pool.spatial_h.kernel, pool.spatial_w.kernel
        row.kind = "pool"
        row.elementwise_per_frame = out_frame * (k_h * k_w + k_t - 1)
        row.elementwise_per_clip = out_frame * t_o * k_t * k_h * k_w
        row.delay_frames = pool.delay * jump
        if self.mode == "continual":
            row.state_floats = (k_t - 1) * out_frame
            if k_t > 1:
                row.expression = f"({k_t}-1) x {c} x {h_o} x {w_o}"
            row.transient_floats = out_frame
        else:
            row.transient_floats = out_frame * t_o
        self.rows.append(row)
        return (c, t_o, h_o, w_o), jump * pool.temporal.stride


def _k_expr(dim) -> str:
    return f"{dim.dilation} x ({dim.kernel}-1)" if dim.dilation > 1 else f"{dim.kernel}-1"


def memory_report(
    net: NetworkSpec,
    mode: Mode = "continual",
    clip_size: int = 16,
    convention: FlopConvention = FlopConvention(),
) -> CostReport:
    """Per-layer FLOPs, state, transient and delay for ``net``.

    ``clip_size`` is the clip length of the regular network (clip mode, and
    the FLOPs-per-clip column) and the temporal kernel of the final global
    pool in continual mode.
    """
    if mode not in ("clip", "continual"):
        raise ValueError(f"unknown mode {mode!r}")
    if clip_size < 1:
        raise ValueError("clip_size must be >= 1")
    if mode == "continual":
        net = _resize_pool(net, clip_size)
    c, h, w = net.input_shape
    walker = _Walker(mode, clip_size, convention)
    walker.walk(net.layers, (c, clip_size, h, w), 1)
    cache = c * h * w * (clip_size - 1) if mode == "clip" else 0
    if mode == "continual":
        # FLOPs-per-clip always describes the regular network at this clip size
        clip_rows = {r.name: r for r in _clip_rows(net, clip_size, convention)}
        for row in walker.rows:
            row.flops_per_clip = clip_rows[row.name].flops_per_clip
            row.elementwise_per_clip = clip_rows[row.name].elementwise_per_clip
    return CostReport(mode, clip_size, convention, walker.rows, cache, net.name)


cost_report = memory_report


def _clip_rows(net: NetworkSpec, clip_size: int, convention: FlopConvention) -> list[CostRow]:
    c, h, w = net.input_shape
    walker = _Walker("clip", clip_size, convention)
    walker.walk(net.layers, (c, clip_size, h, w), 1)
    return walker.rows


def _resize_pool(net: NetworkSpec, clip_size: int) -> NetworkSpec:
    if any(isinstance(layer, GlobalPoolSpec) for layer in net.layers):
        return with_global_pool(net, clip_size)
    return net


def residual_fraction(report: CostReport) -> float:
    """Share of continual state held by residual delay lines."""
    if report.mode != "continual":
        raise ValueError("residual_fraction needs a continual-mode report")
    total = report.state_floats
    if total == 0:
        return 0.0
    return sum(r.state_floats for r in report.rows if r.kind == "residual") / total


def pool_fractions(report: CostReport) -> dict[str, float]:
    """Temporal pooling state relative to total state and to worst-case memory."""
    pool = sum(r.state_floats for r in report.rows if r.kind == "pool")
    state, worst = report.state_floats, report.worst_case_floats
    return {
        "pool_floats": pool,
        "of_state": pool / state if state else 0.0,
        "of_worst_case": pool / worst if worst else 0.0,
    }


@dataclass
class TableRow:
    stage: str
    layer: str
    expression: str
    floats: int


_BLOCK = re.compile(r"^(?P<stage>[^.]+)\.block(?P<index>\d+)")


def grouped_state_table(report: CostReport) -> list[TableRow]:
    """State rows merged per stage, in the layout of a stage/layer/expression ledger.

    Rows of one stage with the same category and identical per-row
    expression collapse into ``[expr] x count``; block layers are
    labelled by their block index range.
    """
    groups: dict[tuple[str, str, str], list[CostRow]] = {}
    for row in report.rows:
        if not row.state_floats:
            continue
        category = {"residual": "residual", "pool": row.name.split(".")[-1]}.get(row.kind, "conv")
        groups.setdefault((row.stage, category, row.expression), []).append(row)
    table = []
    for (stage, category, expr), rows in groups.items():
        indices = [m.group("index") for m in (_BLOCK.match(r.name) for r in rows) if m]
        if len(indices) == len(rows):
            span = indices[0] if len(rows) == 1 else f"{indices[0]}-{indices[-1]}"
            label = f"{category}_{span}"
        elif len(rows) == 1:
            label = rows[0].name.split(".", 1)[-1] if "." in rows[0].name else "-"
        else:
            label = category
        text = expr if len(rows) == 1 else f"[{expr}] x {len(rows)}"
        table.append(TableRow(stage, label, text, sum(r.state_floats for r in rows)))
    return table
