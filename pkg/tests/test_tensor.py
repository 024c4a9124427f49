import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from continual3d.tensor import ClipTensor, DimSpec, FrameTensor, clip_from_frames, output_size, split_clip


@pytest.mark.parametrize(
    "m, dim, expected",
    [
        (16, DimSpec(3, 1, 1, 0), 14),
        (224, DimSpec(3, 2, 1, 1), 112),
        (1, DimSpec(1, 1, 1, 0), 1),
        (10, DimSpec(3, 1, 2, 0), 6),
        (7, DimSpec(7, 1, 1, 0), 1),
    ],
)
def test_output_size(m, dim, expected):
    assert output_size(m, dim) == expected


def test_output_size_rejects_oversized_kernel():
    with pytest.raises(ValueError, match="exceeds"):
        output_size(2, DimSpec(3))


@given(
    m=st.integers(1, 60),
    k=st.integers(1, 7),
    s=st.integers(1, 4),
    d=st.integers(1, 3),
    p=st.integers(0, 3),
)
def test_output_size_counts_window_positions(m, k, s, d, p):
    # brute force: count window start positions that fit in the padded input
    span = d * (k - 1) + 1
    starts = [i for i in range(0, m + 2 * p, s) if i + span <= m + 2 * p]
    dim = DimSpec(k, s, d, p)
    if not starts:
        with pytest.raises(ValueError):
            output_size(m, dim)
    else:
        assert output_size(m, dim) == len(starts)


@pytest.mark.parametrize("field", ["kernel", "stride", "dilation"])
def test_dimspec_rejects_zero(field):
    with pytest.raises(ValueError):
        DimSpec(**{field: 0})


def test_dimspec_rejects_negative_padding():
    with pytest.raises(ValueError):
        DimSpec(padding=-1)


def test_clip_from_frames_shape():
    frames = [np.full((2, 4, 4), i, np.float32) for i in range(3)]
    clip = clip_from_frames(frames)
    assert clip.shape == (2, 3, 4, 4)
    assert clip.time == 3


def test_single_frame_clip():
    f = np.arange(8, dtype=np.float32).reshape(2, 2, 2)
    clip = clip_from_frames([f])
    assert clip.time == 1
    assert np.array_equal(clip.frame(0).data, f)


def test_mismatched_frames_rejected():
    with pytest.raises(ValueError, match="frame 1"):
        clip_from_frames([np.zeros((2, 3, 3)), np.zeros((2, 3, 4))])


def test_empty_sequence_rejected():
    with pytest.raises(ValueError):
        clip_from_frames([])


@settings(max_examples=50)
@given(
    c=st.integers(1, 3), t=st.integers(1, 5), h=st.integers(1, 4), w=st.integers(1, 4), seed=st.integers(0, 1000)
)
def test_round_trip_is_bit_exact(c, t, h, w, seed):
    rng = np.random.default_rng(seed)
    frames = [FrameTensor(rng.standard_normal((c, h, w))) for _ in range(t)]
    back = split_clip(clip_from_frames(frames))
    assert back == frames
    assert all(a.data.tobytes() == b.data.tobytes() for a, b in zip(back, frames))


def test_clip_indexing_matches_frame():
    rng = np.random.default_rng(1)
    data = rng.standard_normal((2, 4, 3, 5)).astype(np.float32)
    clip = ClipTensor(data)
    for t in range(4):
        assert clip.frame(t).data[1, 2, 3] == data[1, t, 2, 3]


def test_tensors_are_immutable():
    frame = FrameTensor(np.zeros((1, 2, 2)))
    with pytest.raises(ValueError):
        frame.data[0, 0, 0] = 1.0


def test_frame_dimensions_validated():
    with pytest.raises(ValueError):
        FrameTensor(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        FrameTensor(np.zeros((0, 2, 2)))
