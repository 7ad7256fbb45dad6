import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from styleid.errors import FormatError, InvalidArgumentError
from styleid.latent import (MixParams, clip_swap, decouple, load_latent, mix, sample_random_style,
                            save_latent, validate_swap)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


@st.composite
def latent_and_swap(draw, max_layers=10, max_dim=6):
    L = draw(st.integers(1, max_layers))
    D = draw(st.integers(1, max_dim))
    w = draw(arrays(np.float64, (L, D), elements=finite))
    swap = sorted(draw(st.sets(st.integers(0, L - 1))))
    return w, swap


def test_decouple_full_mask():
    w = np.arange(12.0).reshape(4, 3)
    ind, rel = decouple(w, [0, 1, 2, 3])
    assert np.array_equal(ind, np.zeros_like(w))
    assert np.array_equal(rel, w)


def test_decouple_empty_mask():
    w = np.arange(12.0).reshape(4, 3)
    ind, rel = decouple(w, [])
    assert np.array_equal(ind, w)
    assert np.array_equal(rel, np.zeros_like(w))


def test_decouple_hand_example():
    w = np.array([[1.0], [2.0], [3.0], [4.0]])
    ind, rel = decouple(w, [1, 3])
    assert np.array_equal(ind, [[1], [0], [3], [0]])
    assert np.array_equal(rel, [[0], [2], [0], [4]])


def test_decouple_rejects_bad_swap():
    with pytest.raises(InvalidArgumentError):
        decouple(np.zeros((4, 2)), [1, 4])
    with pytest.raises(InvalidArgumentError):
        decouple(np.zeros((4, 2)), [2, 1])
    with pytest.raises(InvalidArgumentError):
        decouple(np.zeros((4, 2)), [1, 1])


def test_mix_alpha_one_returns_source(rng):
    w_s = rng.standard_normal((8, 4))
    w_r = rng.standard_normal((8, 4))
    out = mix(w_s, w_r, MixParams(1.0, (1, 3, 7)))
    assert np.array_equal(out, w_s)


def test_mix_alpha_zero_takes_random_rows(rng):
    w_s = rng.standard_normal((8, 4))
    w_r = rng.standard_normal((8, 4))
    out = mix(w_s, w_r, MixParams(0.0, (1, 3, 7)))
    assert np.array_equal(out[[1, 3, 7]], w_r[[1, 3, 7]])
    assert np.array_equal(out[[0, 2, 4, 5, 6]], w_s[[0, 2, 4, 5, 6]])


def test_mix_hand_example():
    w_s = np.array([[2.0, 4.0], [5.0, 6.0]])
    w_r = np.array([[0.0, 2.0], [0.0, 0.0]])
    out = mix(w_s, w_r, MixParams(0.5, (0,)))
    assert np.array_equal(out, [[1.0, 3.0], [5.0, 6.0]])


def test_mix_shape_mismatch():
    with pytest.raises(InvalidArgumentError):
        mix(np.zeros((4, 2)), np.zeros((4, 3)), MixParams(0.5, (0,)))


def test_mix_params_validation():
    with pytest.raises(InvalidArgumentError):
        MixParams(1.5, (0,))
    with pytest.raises(InvalidArgumentError):
        MixParams(-0.1, (0,))


@given(latent_and_swap())
def test_reconstruction_exact(case):
    w, swap = case
    ind, rel = decouple(w, swap)
    assert np.array_equal(ind + rel, w)


@given(latent_and_swap(), st.floats(0, 1), st.integers(0, 2**31))
def test_mix_preserves_non_swap_rows(case, alpha, seed):
    w, swap = case
    w_r = np.random.default_rng(seed).standard_normal(w.shape)
    out = mix(w, w_r, MixParams(alpha, swap))
    keep = np.setdiff1d(np.arange(w.shape[0]), swap)
    assert out[keep].tobytes() == w[keep].tobytes()


@settings(max_examples=200)
@given(latent_and_swap(), st.floats(0, 1), st.floats(0, 1), st.integers(0, 2**31))
def test_mix_affine_in_alpha(case, a1, a2, seed):
    w, swap = case
    w_r = np.random.default_rng(seed).standard_normal(w.shape)
    d = mix(w, w_r, MixParams(a1, swap)) - mix(w, w_r, MixParams(a2, swap))
    expected = (a1 - a2) * (w[swap] - w_r[swap])
    np.testing.assert_allclose(d[swap], expected, rtol=0, atol=1e-12 * max(1.0, np.abs(w).max()))


def _toy_prior(shape):
    return lambda seed: np.random.default_rng(seed).standard_normal(shape)


def test_sample_random_style_seeded_stream():
    template = np.zeros((2, 2))
    out = sample_random_style(template, [0], 7, _toy_prior((2, 2)))
    stream = np.random.default_rng(7).standard_normal((2, 2))
    assert np.array_equal(out[1], [0.0, 0.0])
    assert np.array_equal(out[0], stream[0])


def test_sample_random_style_empty_swap_is_zero():
    out = sample_random_style(np.ones((4, 3)), [], 1, _toy_prior((4, 3)))
    assert np.array_equal(out, np.zeros((4, 3)))


@given(st.integers(0, 2**32 - 1), st.sets(st.integers(0, 5)))
def test_sample_random_style_deterministic(seed, swap):
    swap = sorted(swap)
    prior = _toy_prior((6, 3))
    a = sample_random_style(np.zeros((6, 3)), swap, seed, prior)
    b = sample_random_style(np.zeros((6, 3)), swap, seed, prior)
    assert a.tobytes() == b.tobytes()
    off = np.setdiff1d(np.arange(6), swap)
    assert not a[off].any()


def test_sample_random_style_shape_mismatch():
    with pytest.raises(InvalidArgumentError):
        sample_random_style(np.zeros((4, 3)), [0], 0, _toy_prior((4, 2)))


def test_clip_swap_drops_out_of_range():
    kept, dropped = clip_swap((7, 9, 11, 15, 16, 17), 8)
    assert kept == (7,)
    assert dropped == (9, 11, 15, 16, 17)
    assert validate_swap(kept, 8) == (7,)


def test_latent_file_roundtrip(tmp_path, rng):
    w = rng.standard_normal((5, 3)).astype(np.float32).astype(np.float64)
    path = tmp_path / "w.sidl"
    save_latent(path, w)
    raw = path.read_bytes()
    assert raw[:5] == b"SIDL1"
    assert struct.unpack("<II", raw[5:13]) == (5, 3)
    assert len(raw) == 13 + 4 * 15
    # row-major little-endian float32
    assert np.array_equal(np.frombuffer(raw[13:], "<f4").reshape(5, 3), w)
    assert np.array_equal(load_latent(path), w)


def test_latent_file_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.sidl"
    bad.write_bytes(b"NOPE1" + b"\0" * 8)
    with pytest.raises(FormatError):
        load_latent(bad)
    short = tmp_path / "short.sidl"
    short.write_bytes(b"SIDL1" + struct.pack("<II", 2, 2) + b"\0" * 4)
    with pytest.raises(FormatError):
        load_latent(short)
