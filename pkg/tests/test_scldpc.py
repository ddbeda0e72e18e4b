"""Coupled LDPC base matrices, lifting, encoding and BP decoding."""
import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sccoding import channel
from sccoding.scldpc import (WindowDecoder, bp_decode, bp_window_decode, build_base_matrix,
                             encode, lift, load_sparse, make_encoder, save_sparse, syndrome)

REG36 = [[[1, 1]]] * 3
PROTO22 = [[[2, 2]], [[1, 1]]]
BIG = [[[1, 2, 1, 2]], [[3, 2, 3, 2]]]


@pytest.mark.parametrize("blocks, T, mode, rate", [
    (REG36, 5, "terminated", 0.3),
    (REG36, 5, "tailbiting", 0.5),
    (PROTO22, 20, "terminated", 0.475),
    (PROTO22, 20, "tailbiting", 0.5),
    (BIG, 30, "tailbiting", 0.75),
    (BIG, 30, "terminated", 0.75 - 1 / 120),
])
def test_design_rates(blocks, T, mode, rate):
    assert build_base_matrix(blocks, T, mode).design_rate == pytest.approx(rate, abs=1e-12)


def test_terminated_shape_and_band():
    b = build_base_matrix(REG36, 5, "terminated")
    assert b.shape == (7, 10)
    assert b.entries[0, 0] == 1 and b.entries[6, 0] == 0
    np.testing.assert_array_equal(b.variable_degrees, 3)
    np.testing.assert_array_equal(b.check_degrees, [2, 4, 6, 6, 6, 4, 2])


@given(st.integers(2, 25))
def test_tailbiting_degrees_uniform(T):
    b = build_base_matrix(BIG, T, "tailbiting")
    assert len(set(b.check_degrees)) == 1
    np.testing.assert_array_equal(b.variable_degrees, [4, 4, 4, 4] * T)


def test_base_matrix_errors():
    with pytest.raises(ValueError):
        build_base_matrix([[[1, 1]], [[1, 1, 1]]], 5)
    with pytest.raises(ValueError):
        build_base_matrix(REG36, 2, "tailbiting")
    with pytest.raises(ValueError):
        build_base_matrix(REG36, 5, "circular")
    with pytest.raises(ValueError):
        lift(build_base_matrix(PROTO22, 4), 1, np.random.default_rng(0))


def test_lifting_preserves_degrees():
    base = build_base_matrix(PROTO22, 6, "terminated")
    code = lift(base, 50, np.random.default_rng(3))
    H = code.parity_check
    assert H.shape == (7 * 50, 12 * 50)
    assert H.max() == 1
    np.testing.assert_array_equal(np.asarray(H.sum(axis=0)).ravel(), np.repeat(base.variable_degrees, 50))
    np.testing.assert_array_equal(np.asarray(H.sum(axis=1)).ravel(), np.repeat(base.check_degrees, 50))


def test_lifting_is_seeded():
    base = build_base_matrix(PROTO22, 6)
    a = lift(base, 20, np.random.default_rng(9)).parity_check
    b = lift(base, 20, np.random.default_rng(9)).parity_check
    assert (a != b).nnz == 0


@pytest.fixture(scope="module")
def small_code():
    return lift(build_base_matrix(REG36, 8, "terminated"), 30, np.random.default_rng(5))


def test_encode_gives_codewords(small_code):
    enc = make_encoder(small_code)
    rng = np.random.default_rng(0)
    info = rng.integers(0, 2, (50, enc.k))
    for word in enc.encode(info):
        assert not syndrome(small_code, word).any()
    assert not encode(small_code, np.zeros(enc.k, int)).any()
    with pytest.raises(ValueError):
        enc.encode(np.zeros(enc.k + 1, int))


def _awgn_llr(word, snr_db, rng):
    c = channel.build_constellation(2)
    s = channel.noise_std(snr_db)
    y = c.pam_levels[np.asarray(word, int)] + s * rng.standard_normal(len(word))
    return channel.pam_llr(c, y, snr_db)[:, 0]


def test_window_with_wide_window_matches_full_bp(small_code):
    rng = np.random.default_rng(11)
    T = small_code.base.T
    for _ in range(100):
        L = _awgn_llr(np.zeros(small_code.n), 6.0, rng)
        a = WindowDecoder(small_code, T - 1, 30).decode(L)
        b = bp_decode(small_code, L, 60)
        np.testing.assert_array_equal(a, b)


def test_window_decoder_recovers_random_codeword(small_code):
    rng = np.random.default_rng(12)
    enc = make_encoder(small_code)
    word = enc.encode(rng.integers(0, 2, enc.k))
    L = _awgn_llr(word, 5.0, rng)
    dec, _ = bp_window_decode(small_code, L, 4, 20)
    np.testing.assert_array_equal(dec, word)


def test_window_decoder_fails_at_low_snr(small_code):
    rng = np.random.default_rng(13)
    L = _awgn_llr(np.zeros(small_code.n), -3.0, rng)
    dec, per_pos = bp_window_decode(small_code, L, 4, 10)
    assert dec.sum() > 0
    assert per_pos.sum() == dec.sum()


def test_tailbiting_window_decoding():
    code = lift(build_base_matrix(PROTO22, 10, "tailbiting"), 40, np.random.default_rng(2))
    rng = np.random.default_rng(3)
    L = _awgn_llr(np.zeros(code.n), 4.0, rng)
    assert WindowDecoder(code, 5, 10).decode(L).sum() == 0


@settings(max_examples=10, deadline=None)
@given(st.sampled_from(["terminated", "tailbiting"]), st.integers(3, 8), st.integers(2, 12))
def test_sparse_round_trip(mode, T, M):
    code = lift(build_base_matrix(PROTO22, T, mode), M, np.random.default_rng(T * M))
    for mat, m in ((code.base.entries, 1), (code.parity_check, M)):
        buf = io.StringIO()
        save_sparse(buf, mat, mode, T, m)
        buf.seek(0)
        A, mode2, T2, M2 = load_sparse(buf)
        np.testing.assert_array_equal(A.toarray(), np.asarray(mat.todense() if hasattr(mat, "todense") else mat))
        assert (mode2, T2, M2) == (mode, T, m)
