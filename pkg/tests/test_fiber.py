"""Split-step fiber link model."""
import io

import numpy as np
import pytest

from sccoding import channel
from sccoding.fiber import (FiberLinkParams, carrier_sync, dump_samples, edfa_noise_psd, equalize_and_sample,
                            linear_snr, measured_snr, propagate, propagate_field, rrc_spectrum, shape,
                            simulate_link_snr, with_spans)

QPSK = channel.build_constellation(2)


def _symbols(n, seed=0, c=QPSK):
    rng = np.random.default_rng(seed)
    return c.modulate(rng.integers(0, 2, (n, c.m))).T


def test_edfa_noise_hand_value():
    p = FiberLinkParams()
    gain = 10 ** (0.25 * 70 / 10)
    expect = (gain - 1) * 6.62607015e-34 * 1.934e14 * 1.622
    assert edfa_noise_psd(p) == pytest.approx(expect, rel=1e-12)
    assert edfa_noise_psd(FiberLinkParams(alpha_db_km=1e-9)) < 1e-25


def test_linear_snr_scaling():
    p = FiberLinkParams()
    r10, r20 = linear_snr(with_spans(p, 10)), linear_snr(with_spans(p, 20))
    assert 10 * np.log10(r10 / r20) == pytest.approx(10 * np.log10(2))
    louder = FiberLinkParams(launch_power_dbm=0.5)
    assert 10 * np.log10(linear_snr(louder) / linear_snr(p)) == pytest.approx(3.0)


def test_parameter_checks():
    with pytest.raises(ValueError):
        FiberLinkParams(step_km=0.3).steps_per_span
    with pytest.raises(ValueError):
        FiberLinkParams(nsp=0)
    with pytest.raises(ValueError):
        FiberLinkParams(samples_per_symbol=1)
    with pytest.raises(ValueError):
        propagate(_symbols(8), FiberLinkParams(n_spans=1), rng=None, noise=True)


def test_rrc_is_nyquist():
    Rs = 40e9
    f = np.linspace(-Rs / 2, Rs / 2, 101)
    total = sum(rrc_spectrum(f - k * Rs, Rs, 0.25) ** 2 for k in range(-2, 3))
    np.testing.assert_allclose(total, 1.0, atol=1e-12)


def test_shaping_power_and_zero_isi():
    p = FiberLinkParams(beta2_ps2_km=0.0)
    s = _symbols(1024)
    field = shape(s, p)
    np.testing.assert_allclose(np.mean(np.abs(field) ** 2, axis=1), p.power, rtol=0.05)
    np.testing.assert_allclose(equalize_and_sample(field, p), s, atol=1e-10)


def test_noiseless_linear_round_trip():
    p = FiberLinkParams(gamma=0.0, n_spans=3)
    s = _symbols(512, 1)
    out = equalize_and_sample(propagate(s, p, noise=False), p)
    np.testing.assert_allclose(out, s, atol=1e-9)


def test_linear_propagation_is_linear():
    p = FiberLinkParams(gamma=0.0, n_spans=1, step_km=1.0)
    a, b = shape(_symbols(256, 2), p), shape(_symbols(256, 3), p)
    lhs = propagate_field(a + 2 * b, p, noise=False)
    rhs = propagate_field(a, p, noise=False) + 2 * propagate_field(b, p, noise=False)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_spm_phase_of_constant_field():
    p = FiberLinkParams(n_spans=1, step_km=1.0)
    amp = np.sqrt(p.power)
    field = np.full((2, 64), amp, dtype=complex)
    out = propagate_field(field, p, noise=False)
    L_eff = -np.expm1(-p.alpha * p.span_length_km) / p.alpha
    phase = -(8 / 9) * p.gamma * 2 * p.power * L_eff
    np.testing.assert_allclose(np.angle(out), phase, atol=1e-9)
    np.testing.assert_allclose(np.abs(out), amp, rtol=1e-9)


def test_step_halving_converges():
    s = _symbols(256, 4)
    p = FiberLinkParams(n_spans=1, launch_power_dbm=3.0, step_km=0.2)
    a = propagate(s, p, noise=False)
    b = propagate(s, FiberLinkParams(n_spans=1, launch_power_dbm=3.0, step_km=0.1), noise=False)
    assert np.sqrt(np.mean(np.abs(a - b) ** 2) / np.mean(np.abs(b) ** 2)) < 1e-3


def test_amplifier_noise_statistics():
    p = FiberLinkParams(gamma=0.0, n_spans=1, step_km=10.0)
    rng = np.random.default_rng(5)
    out = propagate_field(np.zeros((2, 20000)), p, rng)
    sigma2 = edfa_noise_psd(p) * p.sample_rate / 2
    np.testing.assert_allclose(np.var(out.real), sigma2, rtol=0.03)
    np.testing.assert_allclose(np.var(out.imag), sigma2, rtol=0.03)
    assert abs(np.mean(out.real * out.imag)) < 0.03 * sigma2


def test_linear_link_snr_matches_closed_form():
    p = FiberLinkParams(gamma=0.0, n_spans=5)
    snr = simulate_link_snr(QPSK, p, 4096, np.random.default_rng(6))
    assert abs(10 * np.log10(snr / linear_snr(p))) < 0.2


def test_carrier_sync_and_snr():
    s = _symbols(1000, 7)
    rot = s * np.exp(1j * 0.3)
    np.testing.assert_allclose(carrier_sync(rot, s), s, atol=1e-12)
    rng = np.random.default_rng(8)
    noisy = s + 0.1 * (rng.standard_normal(s.shape) + 1j * rng.standard_normal(s.shape))
    assert 10 * np.log10(measured_snr(noisy, s)) == pytest.approx(10 * np.log10(1 / 0.02), abs=0.3)


def test_dump_samples():
    buf = io.BytesIO()
    dump_samples(buf, np.ones((2, 10), dtype=complex))
    raw = np.frombuffer(buf.getvalue(), dtype="<f8").reshape(10, 4)
    np.testing.assert_array_equal(raw, [[1, 0, 1, 0]] * 10)
