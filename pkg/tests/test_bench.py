import pytest

from continual3d.bench import BenchResult, bench, clip_network
from continual3d.io import load_spec
from continual3d.network import GlobalPoolSpec, analyze, init_parameters
from test_cli import TOY


@pytest.fixture(scope="module")
def toy():
    net = load_spec(TOY)
    init_parameters(net, 0)
    return net


def test_single_repetition_has_zero_spread(toy):
    r = bench(toy, "continual", window=16, frames=2, repetitions=1, warmup=0)
    assert r.std == 0.0 and r.mean > 0
    assert (r.repetitions, r.warmup, r.streams) == (1, 0, 1)


def test_clip_network_pool_spans_window(toy):
    net = clip_network(toy, 16)
    assert analyze(net).r_t == 16
    assert [layer for layer in net.layers if isinstance(layer, GlobalPoolSpec)][0].temporal_kernel == 10


def test_streams_and_threads(toy):
    r = bench(toy, "continual", frames=2, streams=3, repetitions=2, warmup=0, threads=2)
    assert r.streams == 3 and r.threads == 2 and r.std >= 0


def test_continual_beats_clip_on_toy(toy):
    clip = bench(toy, "clip", window=16, frames=6, repetitions=3)
    cont = bench(toy, "continual", window=16, frames=6, repetitions=3)
    assert cont.mean > clip.mean


def test_argument_validation(toy):
    with pytest.raises(ValueError):
        bench(toy, "clip", repetitions=0)
    with pytest.raises(ValueError):
        bench(toy, "batched")
    with pytest.raises(ValueError):
        BenchResult("clip", 1.0, 0.0, 0, 0, 1, 16, 1, 1)
