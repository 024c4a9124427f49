import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from continual3d.conv import ConvSpec, conv3d_array
from continual3d.layers import NormSpec, PoolSpec, SEParams, norm_infer, pool_clip
from continual3d.network import (
    ActivationSpec,
    GlobalPoolSpec,
    LinearSpec,
    NetworkSpec,
    ResidualBlock,
    analyze,
    convert_to_continual,
    forward_clip,
    forward_clip_sequence,
    infer_shapes,
    init_parameters,
    iter_layers,
    padded_layers,
    parameters,
    stream_init,
    stream_step,
    window_reference,
)
from continual3d.tensor import DimSpec
from continual3d.zoo import builtin_x3d_l, builtin_x3d_m, builtin_x3d_s
from nets import random_network
from oracles import receptive_field


def stream_all(net, frames, scheme="zeros"):
    conet = stream_init(net, scheme, frames[0] if scheme == "replicate" else None)
    return [stream_step(conet, f) for f in frames], conet


def noise(shape, n, seed=0):
    return np.random.default_rng(seed).uniform(-1, 1, (n,) + tuple(shape)).astype(np.float32)


def conv(c_in, c_out, kt=1, pt=0, ks=1, **kw):
    return ConvSpec(c_in, c_out, DimSpec(kt, 1, 1, pt), DimSpec(ks, 1, 1, ks // 2), DimSpec(ks, 1, 1, ks // 2), **kw)


# -- construction ----------------------------------------------------------------------


def test_layer_names_assigned_and_unique():
    block = ResidualBlock([conv(2, 2, 3)], [])
    net = NetworkSpec((2, 3, 3), [conv(2, 2), block, GlobalPoolSpec()])
    names = [n for n, _ in iter_layers(net.layers)]
    assert names == ["0", "1", "1.inner.0", "2"]


def test_duplicate_names_rejected():
    with pytest.raises(ValueError, match="duplicate"):
        NetworkSpec((1, 2, 2), [conv(1, 1, name="a"), conv(1, 1, name="a")])


def test_channel_chain_checked():
    with pytest.raises(ValueError, match="channels"):
        NetworkSpec((3, 4, 4), [conv(3, 2), conv(3, 2)])


def test_residual_shape_mismatch_rejected():
    with pytest.raises(ValueError, match="skip path"):
        NetworkSpec((2, 4, 4), [ResidualBlock([conv(2, 3)], [])])


def test_temporal_shortcut_rejected():
    with pytest.raises(ValueError, match="temporally trivial"):
        NetworkSpec((2, 4, 4), [ResidualBlock([conv(2, 2, 3)], [conv(2, 2, 3)])])


def test_shape_inference_rows():
    net = builtin_x3d_m(64)
    rows = {name: out for name, _, out in infer_shapes(net)}
    assert rows["conv1.conv_s"] == (24, 32, 32)
    assert rows["res2.block1.conv_a"] == (54, 32, 32)
    assert rows["res2.block1.conv_b"] == (54, 16, 16)
    assert rows["res5.block7"] == (192, 2, 2)
    assert rows["fc2"] == (400, 1, 1)


# -- clip forward ------------------------------------------------------------------------


def test_linear_over_global_pool_of_constant_clip():
    w = np.array([[1.0, 2.0], [-1.0, 0.5], [0.0, 3.0]], np.float32)
    b = np.array([0.1, 0.2, 0.3], np.float32)
    net = NetworkSpec((2, 3, 3), [GlobalPoolSpec(4), LinearSpec(2, 3, weights=w, bias=b)])
    clip = np.empty((2, 4, 3, 3), np.float32)
    clip[0], clip[1] = 2.0, -1.0
    assert np.allclose(forward_clip(net, clip), w @ [2.0, -1.0] + b)


def test_two_unpadded_k3_layers_need_five_frames():
    net = NetworkSpec((1, 1, 1), [conv(1, 1, 3), conv(1, 1, 3)])
    init_parameters(net, 0)
    outputs, end0, jump = forward_clip_sequence(net, noise((1, 1, 1), 5).transpose(1, 0, 2, 3))
    assert outputs.shape == (1, 1)
    assert (end0, jump) == (4, 1)
    with pytest.raises(ValueError, match="insufficient"):
        forward_clip(net, np.zeros((1, 4, 1, 1), np.float32))


def test_forward_matches_manual_composition():
    rng = np.random.default_rng(0)
    c1 = conv(2, 3, 3, ks=3, has_bias=True)
    c2 = conv(3, 3, 2, ks=3)
    norm = NormSpec(rng.uniform(0.5, 1.5, 3), rng.standard_normal(3), rng.standard_normal(3), rng.uniform(0.5, 2, 3))
    pool = PoolSpec("max", DimSpec(2), DimSpec(2, 2), DimSpec(2, 2))
    net = NetworkSpec((2, 4, 4), [c1, ActivationSpec("relu"), c2, norm, pool])
    init_parameters(net, 3)
    x = rng.standard_normal((2, 7, 4, 4)).astype(np.float32)
    manual = pool_clip(norm_infer(conv3d_array(np.maximum(conv3d_array(x, c1), 0), c2), norm), pool)
    outputs, _, _ = forward_clip_sequence(net, x)
    assert np.array_equal(outputs[-1], manual[:, -1].reshape(-1))


def test_residual_alignment_in_clip_mode():
    # unpadded inner k3 conv pairs output j with skip frame j + 1 (its centre)
    block = ResidualBlock([conv(1, 1, 3, pt=1)], [])
    net = NetworkSpec((1, 1, 1), [block])
    net.layers[0].inner[0].weights[...] = 0.0
    x = np.arange(5, dtype=np.float32).reshape(1, 5, 1, 1)
    out, end0, _ = forward_clip_sequence(net, x, "none")
    assert out.reshape(-1).tolist() == [1.0, 2.0, 3.0]
    assert end0 == 2
    out, end0, _ = forward_clip_sequence(net, x, "declared")
    assert out.reshape(-1).tolist() == [0.0, 1.0, 2.0, 3.0, 4.0]


# -- analysis -----------------------------------------------------------------------------


@pytest.mark.parametrize(
    "builder, r_t, p_t, transient",
    [(builtin_x3d_s, 69, 28, 40), (builtin_x3d_m, 72, 28, 43), (builtin_x3d_l, 130, 57, 72)],
)
def test_x3d_receptive_fields(builder, r_t, p_t, transient):
    s = analyze(builder(32))
    assert (s.r_t, s.p_t, s.transient_len) == (r_t, p_t, transient)
    assert s.total_delay == transient


def test_single_pointwise_layer():
    s = analyze(NetworkSpec((1, 1, 1), [conv(1, 1)]))
    assert (s.r_t, s.p_t, s.transient_len) == (1, 0, 0)


@settings(max_examples=60)
@given(st.lists(st.tuples(st.integers(1, 5), st.integers(1, 3), st.integers(1, 3)), min_size=1, max_size=6))
def test_receptive_field_matches_textbook_recursion(geometry):
    layers = [ConvSpec(1, 1, DimSpec(k, s, d)) for k, s, d in geometry]
    try:
        net = NetworkSpec((1, 1, 1), layers)
    except ValueError:
        return
    assert analyze(net).r_t == receptive_field(geometry)


def test_analyze_unchanged_by_conversion():
    for seed in range(10):
        net = random_network(seed)
        assert analyze(net) == analyze(convert_to_continual(net))


# -- conversion ----------------------------------------------------------------------------


def test_convert_sets_skip_delay_from_inner_path():
    net = NetworkSpec((2, 3, 3), [ResidualBlock([conv(2, 2, 3, pt=1)], [])])
    co = convert_to_continual(net)
    assert co.layers[0].delay == 1
    assert co.continual and not net.continual


def test_convert_pointwise_net_is_identity():
    net = NetworkSpec((2, 3, 3), [conv(2, 2), ResidualBlock([conv(2, 2)], []), GlobalPoolSpec()])
    co = convert_to_continual(net)
    assert co.layers[1].delay == 0
    assert analyze(co).total_delay == 0
    assert padded_layers(net) == []


def test_x3d_conversion_delays_and_se():
    co = convert_to_continual(builtin_x3d_m(32))
    blocks = [layer for layer in co.layers if isinstance(layer, ResidualBlock)]
    assert len(blocks) == 26
    assert all(b.delay == 1 for b in blocks)
    assert all(not layer.temporal for _, layer in iter_layers(co.layers) if isinstance(layer, SEParams))
    assert len(padded_layers(co)) == 27


def test_conversion_preserves_parameters_bit_exactly():
    net = builtin_x3d_s(32)
    init_parameters(net, 5)
    co = convert_to_continual(net)
    before = {name: getattr(layer, attr).tobytes() for name, layer, attr in parameters(net)}
    after = {name: getattr(layer, attr).tobytes() for name, layer, attr in parameters(co)}
    assert before == after


def test_global_pool_override():
    co = convert_to_continual(builtin_x3d_m(32), global_pool_temporal=64)
    assert co.layers[-4].temporal_kernel == 64
    assert analyze(co).r_t == 72 + 48


def test_temporal_stride_in_residual_is_rejected():
    net = NetworkSpec((1, 4, 4), [ResidualBlock([ConvSpec(1, 1, DimSpec(3, 2))], [])])
    with pytest.raises(ValueError, match="stride"):
        convert_to_continual(net)


# -- streaming ---------------------------------------------------------------------------


def test_pointwise_net_is_immediately_steady():
    net = NetworkSpec((2, 3, 3), [conv(2, 3, ks=3), ActivationSpec("swish"), GlobalPoolSpec(), LinearSpec(3, 2)])
    init_parameters(net, 1)
    frames = noise((2, 3, 3), 4)
    outs, _ = stream_all(convert_to_continual(net), frames)
    assert all(o.valid for o in outs)
    for t, o in enumerate(outs):
        assert np.array_equal(o.value, forward_clip(net, frames[t : t + 1].transpose(1, 0, 2, 3)))


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(seed=st.integers(0, 100_000))
def test_random_nets_match_sliding_window_oracle(seed):
    co = convert_to_continual(random_network(seed))
    s = analyze(co)
    frames = noise(co.input_shape, s.r_t + 6, seed)
    outs, _ = stream_all(co, frames)
    valid = [t for t, o in enumerate(outs) if o.valid]
    assert valid and valid[0] == s.transient_len
    for t in valid:
        assert np.max(np.abs(outs[t].value - window_reference(co, frames, t))) <= 1e-4


@settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(seed=st.integers(0, 100_000))
def test_unpadded_nets_match_plain_window(seed):
    # with no declared padding every valid output sees exactly r_T real frames
    co = convert_to_continual(random_network(seed, padded=False))
    s = analyze(co)
    assert s.p_t == 0
    frames = noise(co.input_shape, s.r_t + 4, seed)
    outs, _ = stream_all(co, frames)
    for t, o in enumerate(outs):
        assert o.valid == (t >= s.r_t - 1 and _on_stride(co, t))
        if o.valid:
            window = frames[t - s.r_t + 1 : t + 1].transpose(1, 0, 2, 3)
            assert np.max(np.abs(o.value - forward_clip(co, window))) <= 1e-4


def _on_stride(net, t):
    outputs, end0, jump = forward_clip_sequence(net, noise(net.input_shape, t + 1).transpose(1, 0, 2, 3))
    return (t - end0) % jump == 0


def test_zero_init_equals_causal_padding():
    co = convert_to_continual(random_network(17))
    s = analyze(co)
    frames = noise(co.input_shape, s.r_t + 4, 17)
    outs, _ = stream_all(co, frames)
    seq, end0, jump = forward_clip_sequence(co, frames.transpose(1, 0, 2, 3), "causal")
    for t, o in enumerate(outs):
        if o.valid:
            assert (t - end0) % jump == 0
            assert np.max(np.abs(o.value - seq[(t - end0) // jump])) <= 1e-4


def test_zero_init_equals_zero_padded_input_for_linear_nets():
    # bias-free linear layers with full causal padding map zeros to zeros, so
    # per-layer padding is the same as p_T zero frames in front of the input
    layers = [conv(1, 2, 3, pt=2), conv(2, 2, 5, pt=4), conv(2, 1, 3, pt=2)]
    net = NetworkSpec((1, 2, 2), layers)
    init_parameters(net, 4)
    s = analyze(net)
    frames = noise((1, 2, 2), 12, 4)
    outs, _ = stream_all(convert_to_continual(net), frames)
    padded = np.concatenate([np.zeros((s.p_t, 1, 2, 2), np.float32), frames])
    seq, end0, _ = forward_clip_sequence(net, padded.transpose(1, 0, 2, 3))
    assert s.transient_len == 0 and all(o.valid for o in outs)
    for t in range(len(frames)):
        assert np.max(np.abs(outs[t].value - seq[t + s.p_t - end0])) <= 1e-5


def test_too_few_frames_stay_invalid():
    co = convert_to_continual(builtin_x3d_s(32))
    init_parameters(co, 0)
    outs, _ = stream_all(co, noise(co.input_shape, 40))
    assert not any(o.valid for o in outs)


def test_validity_is_monotone_and_boring_stream_is_constant():
    co = convert_to_continual(random_network(11))
    s = analyze(co)
    frame = noise(co.input_shape, 1, 3)[0]
    frames = np.repeat(frame[None], s.r_t + 10, axis=0)
    outs, _ = stream_all(co, frames)
    flags = [o.valid for o in outs]
    assert flags == sorted(flags)
    steady = [o.value for o in outs[s.r_t - 1 :] if o.valid]
    assert all(np.allclose(v, steady[0], atol=1e-6) for v in steady)


def test_replicate_first_output_equals_boring_clip():
    co = convert_to_continual(builtin_x3d_s(32))
    init_parameters(co, 2)
    frame = noise(co.input_shape, 1, 6)[0]
    conet = stream_init(co, "replicate", frame)
    out = stream_step(conet, frame)
    boring = np.repeat(frame[:, None], analyze(co).r_t, axis=1)
    assert out.valid
    assert np.max(np.abs(out.value - forward_clip(co, boring))) <= 1e-4


def test_replicate_stream_matches_oracle():
    co = convert_to_continual(random_network(21))
    frames = noise(co.input_shape, 10, 21)
    outs, _ = stream_all(co, frames, "replicate")
    assert all(o.valid for o in outs)
    for t, o in enumerate(outs):
        assert np.max(np.abs(o.value - window_reference(co, frames, t, "replicate"))) <= 1e-4


def test_shift_invariance_of_window_outputs():
    co = convert_to_continual(random_network(31, padded=False))
    s = analyze(co)
    frames = noise(co.input_shape, s.r_t + 5, 31)
    prefix = noise(co.input_shape, 3, 99)
    a, _ = stream_all(co, frames)
    b, _ = stream_all(co, np.concatenate([prefix, frames]))
    t = len(frames) - 1
    assert a[t].valid and b[t + 3].valid
    assert np.max(np.abs(a[t].value - b[t + 3].value)) <= 1e-5


def test_replicate_requires_frame():
    with pytest.raises(ValueError, match="first frame"):
        stream_init(convert_to_continual(random_network(1)), "replicate")


def test_stream_rejects_wrong_frame_shape():
    conet = stream_init(convert_to_continual(random_network(1)))
    with pytest.raises(ValueError, match="shape"):
        stream_step(conet, np.zeros((9, 9, 9), np.float32))


def test_temporal_se_cannot_stream_unconverted():
    from continual3d.network import _compile

    with pytest.raises(ValueError, match="temporal SE"):
        _compile([SEParams.zeros(2, 1, temporal=True)], (2, 2, 2))
