"""Dual-polarization fiber link: SNR after CD compensation versus the number of spans.

With gamma = 0 the link is an AWGN channel whose SNR follows the amplifier
noise accumulation. The Kerr nonlinearity costs SNR on top of that.
"""
import numpy as np

from sccoding import channel, fiber

c = channel.build_constellation(8)
rng = np.random.default_rng(0)
for spans in (5, 10, 20):
    lin = fiber.FiberLinkParams(gamma=0.0, n_spans=spans)
    nl = fiber.FiberLinkParams(n_spans=spans)
    ref = 10 * np.log10(fiber.linear_snr(lin))
    s_lin = 10 * np.log10(fiber.simulate_link_snr(c, lin, 4096, rng))
    s_nl = 10 * np.log10(fiber.simulate_link_snr(c, nl, 4096, rng))
    print(f"{spans:3d} spans: closed form {ref:.2f} dB, linear SSFM {s_lin:.2f} dB, with Kerr {s_nl:.2f} dB")
