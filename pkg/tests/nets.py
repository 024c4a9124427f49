"""Seeded random network builder for property tests."""

import numpy as np

from continual3d.conv import ConvSpec
from continual3d.layers import NormSpec, PoolSpec, SEParams
from continual3d.network import (
    ActivationSpec,
    GlobalPoolSpec,
    LinearSpec,
    NetworkSpec,
    ResidualBlock,
    init_parameters,
)
from continual3d.tensor import DimSpec


def _conv(rng, c_in, c_out, padded, allow_stride):
    k = int(rng.choice([1, 2, 3]))
    d = int(rng.choice([1, 2])) if k > 1 else 1
    s = int(rng.choice([1, 2])) if allow_stride and rng.random() < 0.25 else 1
    p = int(rng.integers(0, d * (k - 1) + 1)) if padded else 0
    ks = int(rng.choice([1, 3]))
    groups = c_in if c_in == c_out and rng.random() < 0.3 else 1
    spatial = DimSpec(ks, 1, 1, ks // 2)
    return ConvSpec(c_in, c_out, DimSpec(k, s, d, p), spatial, spatial, groups=groups, has_bias=bool(rng.random() < 0.5))


def random_network(seed: int, padded: bool = True, depth: int | None = None, init: bool = True) -> NetworkSpec:
    """A small network mixing every layer kind; ``padded`` allows declared temporal padding."""
    rng = np.random.default_rng(seed)
    c = c_in = int(rng.integers(1, 4))
    hw = int(rng.integers(3, 7))
    layers = []
    depth = int(rng.integers(2, 6)) if depth is None else depth
    for _ in range(depth):
        choice = rng.choice(["conv", "pool", "residual", "se", "norm"], p=[0.35, 0.15, 0.3, 0.1, 0.1])
        if choice == "conv":
            c_out = int(rng.integers(1, 5))
            layers.append(_conv(rng, c, c_out, padded, allow_stride=True))
            layers.append(ActivationSpec(str(rng.choice(["relu", "swish", "identity"]))))
            c = c_out
        elif choice == "pool":
            k = int(rng.integers(1, 4))
            p = int(rng.integers(0, k)) if padded else 0
            layers.append(PoolSpec(str(rng.choice(["avg", "max"])), DimSpec(k, 1, 1, p)))
        elif choice == "residual":
            c_out = int(rng.integers(1, 5))
            inner = [_conv(rng, c, c_out, padded, allow_stride=False), NormSpec.identity(c_out)]
            if rng.random() < 0.5:
                inner += [ActivationSpec("relu"), _conv(rng, c_out, c_out, padded, allow_stride=False)]
            shortcut = [] if c_out == c else [ConvSpec(c, c_out)]
            layers.append(ResidualBlock(inner, shortcut, activation=str(rng.choice(["relu", "swish"]))))
            c = c_out
        elif choice == "se":
            layers.append(SEParams.zeros(c, max(1, c // 2)))
        else:
            layers.append(NormSpec.identity(c))
    layers.append(GlobalPoolSpec(int(rng.integers(1, 4))))
    layers.append(LinearSpec(c, int(rng.integers(1, 4))))
    net = NetworkSpec((c_in, hw, hw), layers)
    if init:
        init_parameters(net, seed)
    return net

