"""Coupled GLDPC ensembles and iterative hard-decision decoding."""
import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sccoding import bch
from sccoding.scgldpc import (KNOWN, HddDecoder, _cn_extrinsic_bm, _cn_extrinsic_table, design_rate,
                              hdd_window_decode, load_graph, sample_graph, save_graph)


@pytest.fixture(scope="module")
def B84():
    return bch.construct(7, 3, 43)


@pytest.fixture(scope="module")
def B15():
    return bch.construct(4, 2)


def test_design_rates(B84):
    assert design_rate(B84, 5, 2, "terminated") == pytest.approx(0.4)
    assert design_rate(B84, 5, 2, "tailbiting") == pytest.approx(0.5)
    assert design_rate(B84, 20, 2, "terminated") == pytest.approx(0.475)
    assert design_rate(B84, 10**6, 2, "terminated") == pytest.approx(0.5, abs=1e-5)
    B288 = bch.construct(9, 4, 223)
    assert design_rate(B288, 30, 2, "tailbiting") == pytest.approx(0.75)
    B880 = bch.construct(10, 4, 143)
    assert design_rate(B880, 30, 2, "tailbiting") == pytest.approx(0.909, abs=5e-4)


@pytest.mark.parametrize("mode", ["terminated", "tailbiting"])
def test_degree_audit(B84, mode):
    g = sample_graph(B84, 10, 5, 2, mode, seed=1)
    n_pos = 6 if mode == "terminated" else 5
    assert g.cn_vars.shape == (n_pos * 10, 84)
    assert g.n_vn == 5 * 10 * 42
    counts = np.bincount(g.cn_vars[g.cn_vars != KNOWN], minlength=g.n_vn)
    np.testing.assert_array_equal(counts, 2)
    H = g.incidence()
    assert H.shape == (n_pos * 10, g.n_vn)
    known = (g.cn_vars == KNOWN).sum()
    assert known == (2 * 420 if mode == "terminated" else 0)


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 3), st.integers(3, 7), st.sampled_from(["terminated", "tailbiting"]), st.integers(0, 99))
def test_coupling_pattern(w, T, mode, seed):
    B = bch.construct(4, 2, 1)  # n = 14
    C = 6
    if mode == "tailbiting" and T < w:
        return
    g = sample_graph(B, C, T, w, mode, seed=seed)
    per_group = C * B.n // w
    cn_pos = np.repeat(np.arange(g.n_cn) // C, B.n).reshape(g.cn_vars.shape)
    for c in range(g.n_cn_positions):
        vs = g.cn_vars[cn_pos == c]
        vs = vs[vs != KNOWN]
        lag = (c - g.vn_position(vs)) % T if mode == "tailbiting" else c - g.vn_position(vs)
        assert set(lag) <= set(range(w))
        for i in range(w):
            j = c - i
            if mode == "tailbiting" or 0 <= j < T:
                assert (lag == i).sum() == per_group


def test_uncoupled_graph_decomposes(B15):
    g = sample_graph(B15, 6, 4, 1, "terminated", seed=0)
    cn_pos = np.arange(g.n_cn) // 6
    for cn, row in enumerate(g.cn_vars):
        np.testing.assert_array_equal(g.vn_position(row), cn_pos[cn])


def test_graph_errors(B15):
    with pytest.raises(ValueError):
        sample_graph(B15, 3, 4, 1)   # C*n odd
    with pytest.raises(ValueError):
        sample_graph(B15, 2, 4, 4)   # 30 not divisible by 4
    with pytest.raises(ValueError):
        sample_graph(B15, 2, 2, 3, "tailbiting")
    with pytest.raises(ValueError):
        sample_graph(B15, 2, 4, 1, "ring")


def test_sampling_is_seeded(B84):
    a = sample_graph(B84, 4, 5, 2, seed=7).cn_vars
    b = sample_graph(B84, 4, 5, 2, seed=7).cn_vars
    np.testing.assert_array_equal(a, b)


@pytest.fixture(scope="module")
def graph(B84):
    return sample_graph(B84, 20, 8, 2, "terminated", seed=3)


def test_error_free_input(graph):
    dec, per_pos = hdd_window_decode(graph, np.zeros(graph.n_vn, np.uint8), 5)
    assert dec.sum() == 0 and per_pos.sum() == 0


def test_single_error_corrected_in_one_iteration(graph):
    rng = np.random.default_rng(0)
    for v in rng.integers(0, graph.n_vn, 20):
        y = np.zeros(graph.n_vn, np.uint8)
        y[v] = 1
        dec, _ = hdd_window_decode(graph, y, 1)
        assert dec.sum() == 0


def test_full_and_windowed_decoding_correct_sparse_errors(graph):
    rng = np.random.default_rng(1)
    y = (rng.random(graph.n_vn) < 0.004).astype(np.uint8)
    assert y.sum() > 0
    assert hdd_window_decode(graph, y, 10)[0].sum() == 0
    assert HddDecoder(graph, 10, W=3).decode(y)[0].sum() == 0


def test_cn_rule_is_extrinsic(B84):
    fast = bch.FastBDD(B84)
    rng = np.random.default_rng(2)
    v = (rng.random((200, 84)) < 0.04).astype(np.uint8)
    y = (rng.random((200, 84)) < 0.04).astype(np.uint8)
    out = _cn_extrinsic_table(fast, v, y)
    for i in rng.integers(0, 84, 10):
        v2 = v.copy()
        v2[:, i] ^= 1
        np.testing.assert_array_equal(_cn_extrinsic_table(fast, v2, y)[:, i], out[:, i])


def test_cn_rule_table_matches_algebraic_decoder(B84):
    fast = bch.FastBDD(B84)
    rng = np.random.default_rng(3)
    v = (rng.random((8, 84)) < 0.05).astype(np.uint8)
    y = (rng.random((8, 84)) < 0.05).astype(np.uint8)
    np.testing.assert_array_equal(_cn_extrinsic_table(fast, v, y), _cn_extrinsic_bm(B84, v, y))


def test_decision_rule():
    cv = np.array([0, 0, 1, 1, 0, 1])
    edges = np.array([[0, 1], [2, 3], [4, 5]])
    y = np.array([1, 0, 1])
    np.testing.assert_array_equal(HddDecoder._decide(cv, y, edges), [0, 1, 0])


def test_wrong_length_rejected(graph):
    with pytest.raises(ValueError):
        hdd_window_decode(graph, np.zeros(graph.n_vn - 1, np.uint8), 2)


@pytest.mark.parametrize("mode", ["terminated", "tailbiting"])
def test_graph_round_trip(B15, mode):
    g = sample_graph(B15, 4, 3, 3, mode, seed=5)
    buf = io.StringIO()
    save_graph(buf, g)
    buf.seek(0)
    h = load_graph(buf)
    np.testing.assert_array_equal(h.cn_vars, g.cn_vars)
    assert (h.C, h.T, h.w, h.mode, h.seed) == (4, 3, 3, mode, 5)
