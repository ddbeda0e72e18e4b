"""Design rates and decoding thresholds of the small reference ensembles.

Two coupled codes of rate 1/2 are analysed on PM-QPSK: an LDPC chain with
soft-decision BP (windowed P-EXIT) and a GLDPC chain of shortened (84, 63)
BCH codes with hard-decision decoding (windowed DE).
"""
import numpy as np

from sccoding import bch, channel
from sccoding.gldpc_de import GldpcDE
from sccoding.pexit import PexitAnalysis, level_sigma2, threshold
from sccoding.scgldpc import design_rate
from sccoding.scldpc import build_base_matrix

qpsk = channel.build_constellation(2)

# soft decision: P_0 = (2, 2), P_1 = (1, 1), T = 20, window W = 10 with 7 iterations
print("SC-LDPC, BP, W=10, l_max=7")
for mode in ("terminated", "tailbiting"):
    base = build_base_matrix([[[2, 2]], [[1, 1]]], 20, mode)
    eng = PexitAnalysis(base, 10, 7)
    ber = lambda s: eng.run(np.ones((eng.n_cols, 1)), level_sigma2(qpsk, np.atleast_1d(s))).ber[0]
    th = threshold(ber, 1e-5, (0.0, 3.0), 0.005)
    print(f"  {mode:11s} rate {base.design_rate:.3f}  threshold {th:.3f} dB")

# hard decision: every position holds C component codes, coupling width w = 2
B = bch.construct(7, 3, 43)
print(f"SC-GLDPC with the ({B.n},{B.k}) BCH code, HDD, W=5, l_max=10")
for mode in ("terminated", "tailbiting"):
    de = GldpcDE(B, 20, 2, mode)
    p = lambda s: channel.bit_crossover_probs(qpsk, s)[0]
    th = threshold(lambda s: de.run_window(np.full(20, p(s)), 5, 10).ber[0], 1e-5, (3.0, 5.0), 0.005)
    print(f"  {mode:11s} rate {design_rate(B, 20, 2, mode):.3f}  threshold {th:.3f} dB")

# the terminated chain decodes as a wave from the known boundary inwards
base = build_base_matrix([[[2, 2]], [[1, 1]]], 20, "terminated")
run = PexitAnalysis(base, 10, 7).run(np.ones((40, 1)), level_sigma2(qpsk, np.array([0.7])))
print("per-position BER at 0.7 dB:", np.array2string(run.position_ber[0], precision=1))
