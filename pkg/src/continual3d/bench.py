"""Synthetic-stream throughput of clip-wise versus continual inference."""

from __future__ import annotations

import statistics
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .conv import ConvSpec
from .layers import PoolSpec
from .network import (
    GlobalPoolSpec,
    NetworkSpec,
    ResidualBlock,
    analyze,
    convert_to_continual,
    forward_clip,
    stream_init,
    with_global_pool,
)
from .tensor import DTYPE, output_size

BenchMode = Literal["clip", "continual"]


@dataclass
class BenchResult:
    mode: BenchMode
    mean: float
    std: float
    repetitions: int
    warmup: int
    streams: int
    window: int
    frames: int
    threads: int

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")


def _clip_extent(layers, t: int) -> tuple[int, int | None]:
    """Temporal extent after ``layers`` with declared padding, and at the last global pool."""
    at_pool = None
    for layer in layers:
        if isinstance(layer, (ConvSpec, PoolSpec)):
            t = output_size(t, layer.temporal)
        elif isinstance(layer, ResidualBlock):
            t, _ = _clip_extent(layer.inner, t)
        elif isinstance(layer, GlobalPoolSpec):
            at_pool, t = t, 1
    return t, at_pool


def clip_network(net: NetworkSpec, window: int) -> NetworkSpec:
    """Regular network whose global pool spans the whole ``window``-frame clip."""
    _, at_pool = _clip_extent(net.layers, window)
    return net if at_pool is None else with_global_pool(net, at_pool)


def _synthetic(shape, count: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).uniform(-1.0, 1.0, (count,) + tuple(shape)).astype(DTYPE)


def _clip_runner(net: NetworkSpec, frames: np.ndarray, window: int):
    buffer = deque(frames[:window], maxlen=window)
    timed = frames[window:]

    def run():
        for frame in timed:
            buffer.append(frame)
            # re-assemble the window every prediction, as an online clip model must
            forward_clip(net, np.stack(buffer, axis=1), "declared")

    return run


def _continual_runner(net: NetworkSpec, frames: np.ndarray, prefill: int):
    conet = stream_init(net)
    for frame in frames[:prefill]:
        conet.step(frame)
    timed = frames[prefill:]

    def run():
        for frame in timed:
            conet.step(frame)

    return run


def bench(
    net: NetworkSpec,
    mode: BenchMode = "continual",
    window: int = 16,
    frames: int = 16,
    streams: int = 1,
    repetitions: int = 5,
    warmup: int = 1,
    threads: int = 1,
    seed: int = 0,
) -> BenchResult:
    """Predictions per second over ``repetitions`` timed runs.

    Each run produces ``frames`` predictions on each of ``streams`` seeded
    noise streams. Clip mode stacks the trailing ``window`` frames and runs the
    regular network with its declared padding; continual mode steps a stream
    whose final pool spans ``window`` frames, prefilled past its transient.
    Stream setup is never timed, and ``warmup`` untimed runs precede the
    timed ones.
    """
    if repetitions < 1 or frames < 1 or streams < 1 or window < 1:
        raise ValueError("repetitions, frames, streams and window must be >= 1")
    if mode == "clip":
        model = clip_network(net, window)
        prefill = window
    elif mode == "continual":
        model = convert_to_continual(net, _pool_override(net, window))
        prefill = analyze(model).r_t
    else:
        raise ValueError(f"unknown bench mode {mode!r}")

    def runner(index: int, rep: int):
        data = _synthetic(net.input_shape, prefill + frames, seed + 7919 * rep + index)
        if mode == "clip":
            return _clip_runner(model, data, window)
        return _continual_runner(model, data, prefill)

    rates = []
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        for rep in range(warmup + repetitions):
            runners = [runner(i, rep) for i in range(streams)]
            start = time.perf_counter()
            list(pool.map(lambda run: run(), runners))
            elapsed = time.perf_counter() - start
            if rep >= warmup:
                rates.append(streams * frames / elapsed)
    std = statistics.pstdev(rates) if len(rates) > 1 else 0.0
    return BenchResult(mode, statistics.fmean(rates), std, repetitions, warmup, streams, window, frames, threads)


def _pool_override(net: NetworkSpec, window: int) -> int | None:
    _, at_pool = _clip_extent(net.layers, window)
    return at_pool
