"""Hard-decision density evolution for coupled GLDPC ensembles."""
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sccoding import bch, channel
from sccoding.gldpc_de import GldpcDE, de_ber, de_step, f01, f11, phi, scalar_recursion
from sccoding.pexit import threshold


@pytest.fixture(scope="module")
def B84():
    return bch.construct(7, 3, 43)


def _phi_direct(lam, t):
    return 1.0 - math.fsum(lam**i * math.exp(-lam) / math.factorial(i) for i in range(t + 1))


def test_phi_against_direct_sum():
    for t in range(0, 6):
        for lam in np.linspace(0.0, 30.0, 61):
            assert abs(float(phi(lam, t)) - _phi_direct(lam, t)) < 1e-12


def test_phi_rejects_negative_lambda():
    with pytest.raises(ValueError):
        phi(-1.0, 2)


def test_f_bounds(B84):
    x = np.linspace(0, 1, 101)
    assert f11(0.0, B84) == 0.0 and f01(0.0, B84) == 0.0
    assert np.all((f11(x, B84) >= 0) & (f11(x, B84) <= 1))
    assert np.all(np.diff(f11(x, B84)) >= 0)
    with pytest.raises(ValueError):
        f11(1.5, B84)
    with pytest.raises(ValueError):
        f01(-0.1, B84)


def _standalone(p, n_eff, N, t, iters):
    q = p
    for _ in range(iters):
        lam = n_eff * q
        a = _phi_direct(lam, t - 1)
        b = _phi_direct(lam, t) / (N * math.factorial(t - 1))
        q = p * a + (1 - p) * b
    return q


@pytest.mark.parametrize("p", [0.005, 0.02, 0.04])
def test_uncoupled_de_matches_standalone_recursion(B84, p):
    de = GldpcDE(B84, 6, 1, "terminated")
    st_ = de.init_state(np.full(6, p))
    for _ in range(12):
        de_step(st_, de)
    ref = _standalone(p, B84.n, B84.N, B84.t, 12)
    np.testing.assert_allclose(st_.q[0], ref, rtol=0, atol=1e-14)
    np.testing.assert_allclose(scalar_recursion(p, B84, 12), ref, atol=1e-14)


def test_zero_crossover_is_fixed_point(B84):
    for mode in ("terminated", "tailbiting"):
        de = GldpcDE(B84, 8, 2, mode)
        _, pe = de.run_full(np.zeros(8), 20)
        assert np.all(pe == 0)
        assert np.all(de.run_window(np.zeros(8), 3, 5).position_ber == 0)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 0.05), st.floats(0.0, 0.05))
def test_de_monotone_in_channel(e1, e2):
    B = bch.construct(7, 3, 43)
    lo, hi = sorted((e1, e2))
    de = GldpcDE(B, 6, 2, "terminated")
    s1, s2 = de.init_state(np.full(6, lo)), de.init_state(np.full(6, hi))
    for _ in range(8):
        de.step(s1)
        de.step(s2)
        assert np.all(s1.q <= s2.q + 1e-15)


def test_q_nonincreasing_below_threshold(B84):
    de = GldpcDE(B84, 20, 2, "terminated")
    st_ = de.init_state(np.full(20, 0.02))
    prev = st_.q.copy()
    for _ in range(30):
        de.step(st_)
        assert np.all(st_.q <= prev + 1e-15)
        prev = st_.q.copy()
    pe, mean = de_ber(st_, de)
    assert mean[0] < 1e-10


def _qpsk_ber(de, snr):
    p = channel.bit_crossover_probs(channel.build_constellation(2), snr)[0]
    return de.run_window(np.full(de.T, p), 5, 10).ber[0]


@pytest.mark.parametrize("mode, ref", [("terminated", 3.71), ("tailbiting", 3.94)])
def test_reference_thresholds(B84, mode, ref):
    de = GldpcDE(B84, 20, 2, mode)
    th = threshold(lambda s: _qpsk_ber(de, s), 1e-5, (3.0, 5.0), 0.005)
    assert abs(th - ref) <= 0.05


def test_window_trajectory(B84):
    de = GldpcDE(B84, 10, 2, "terminated")
    run = de.run_window(np.full(10, 0.01), 4, 5)
    buf = io.StringIO()
    run.write_trajectory(buf)
    rec = [json.loads(line) for line in buf.getvalue().splitlines()]
    assert [r["position"] for r in rec] == list(range(10))
    assert run.position_ber.shape == (1, 10)


def test_terminated_not_worse_than_tailbiting(B84):
    snr = 3.85
    b_term = _qpsk_ber(GldpcDE(B84, 20, 2, "terminated"), snr)
    b_tail = _qpsk_ber(GldpcDE(B84, 20, 2, "tailbiting"), snr)
    assert b_term <= b_tail
