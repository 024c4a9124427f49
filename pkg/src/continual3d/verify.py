"""Stream-versus-oracle checks behind the ``verify`` and ``transient`` commands."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import (
    CoNetwork,
    InitScheme,
    NetworkSpec,
    analyze,
    convert_to_continual,
    forward_clip_sequence,
    reference_window,
    stream_init,
    window_reference,
)
from .tensor import DTYPE


def synthetic_stream(shape: tuple[int, int, int], frames: int, seed: int) -> np.ndarray:
    """Seeded uniform noise frames in [-1, 1), shaped (frames, C, H, W)."""
    return np.random.default_rng(seed).uniform(-1.0, 1.0, (frames,) + tuple(shape)).astype(DTYPE)


@dataclass
class StepRecord:
    step: int  # 1-based
    valid: bool
    deviation: float | None = None


@dataclass
class VerifyReport:
    records: list[StepRecord]
    tolerance: float
    transient_len: int
    init: InitScheme
    divergence: list[tuple[str, float]] = field(default_factory=list)

    @property
    def first_valid_step(self) -> int | None:
        return next((r.step for r in self.records if r.valid), None)

    @property
    def expected_first_valid(self) -> int:
        return 1 if self.init == "replicate" else self.transient_len + 1

    @property
    def max_deviation(self) -> float:
        devs = [r.deviation for r in self.records if r.deviation is not None]
        return max(devs) if devs else 0.0

    @property
    def monotone(self) -> bool:
        """Once valid, always valid."""
        seen = False
        for r in self.records:
            if seen and not r.valid:
                return False
            seen |= r.valid
        return True

    @property
    def passed(self) -> bool:
        return (
            self.first_valid_step is not None
            and self.monotone
            and self.max_deviation <= self.tolerance
        )


def _ensure_continual(net: NetworkSpec) -> NetworkSpec:
    return net if net.continual else convert_to_continual(net)


def _open_stream(net: NetworkSpec, frames: np.ndarray, init: InitScheme) -> CoNetwork:
    return stream_init(net, init, frames[0] if init == "replicate" else None)


def run_verification(
    net: NetworkSpec,
    frames: np.ndarray,
    init: InitScheme = "zeros",
    tolerance: float = 1e-4,
    check_every: int = 1,
) -> VerifyReport:
    """Stream ``frames`` and compare every ``check_every``-th valid output to the oracle.

    On failure, the first failing step is replayed with per-layer tracing
    and ``divergence`` lists top-level layers whose emission departs from
    the clip oracle, in network order.
    """
    net = _ensure_continual(net)
    conet = _open_stream(net, frames, init)
    records = []
    checked = 0
    first_bad = None
    for t, frame in enumerate(frames):
        out = conet.step(frame)
        rec = StepRecord(t + 1, out.valid)
        if out.valid:
            if checked % check_every == 0 or t == len(frames) - 1:
                ref = window_reference(net, frames, t, init)
                rec.deviation = float(np.max(np.abs(ref - out.value)))
                if rec.deviation > tolerance and first_bad is None:
                    first_bad = t
            checked += 1
        records.append(rec)
    report = VerifyReport(records, tolerance, analyze(net).transient_len, init)
    if first_bad is not None:
        report.divergence = layer_divergence(net, frames, first_bad, init, tolerance)
    return report


def layer_divergence(
    net: NetworkSpec, frames: np.ndarray, t: int, init: InitScheme, tolerance: float
) -> list[tuple[str, float]]:
    """Top-level layers whose step-``t`` emission deviates beyond ``tolerance``."""
    conet = _open_stream(net, frames, init)
    for frame in frames[:t]:
        conet.step(frame)
    conet.trace = []
    conet.step(frames[t])
    emitted = dict(conet.trace)
    clip, padding, start = reference_window(net, frames, t, init)
    capture: list = []
    forward_clip_sequence(net, clip, padding, capture)
    local = t - start
    bad = []
    for name, y, end0, jump in capture:
        if name not in emitted or (local - end0) % jump:
            continue
        j = (local - end0) // jump
        if not 0 <= j < y.shape[1]:
            continue
        dev = float(np.max(np.abs(y[:, j] - emitted[name])))
        if dev > tolerance:
            bad.append((name, dev))
    return bad
