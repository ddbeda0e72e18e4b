"""Optimize the bit mapper of a rate-0.75 SC-LDPC code on PM-64-QAM.

The tailbiting chain has no boundary to start a decoding wave. Putting more
bits of the first few positions on the well-protected modulation bits creates
one artificially. Takes a few minutes.
"""
import numpy as np

from sccoding import bitmapper
from sccoding.experiments import ExperimentConfig, capacity_snr, design_rate, run_optimize_one

T = 30
cfg = ExperimentConfig.from_dict({"T": [T], "optimizer": {"generations": 60, "patience": 20, "max_buffer": 2.0}})

for mode in ("tailbiting", "terminated"):
    res = run_optimize_one(cfg, T, mode)
    cap = capacity_snr(cfg, design_rate(cfg, T, mode))
    buf = bitmapper.buffer_requirement(res.mapper, res.mapper.m, T)
    print(f"{mode}: baseline {res.baseline_threshold:.2f} dB, optimized {res.threshold:.2f} dB, "
          f"gain {res.gain:.2f} dB, capacity {cap:.2f} dB, extra buffer {buf:.2f} positions")
    # share of each protection level per spatial position (0 = best protected)
    levels = res.mapper.entries.reshape(12, T, 4).mean(axis=-1).reshape(4, 3, T).sum(axis=0)
    print(np.array2string(levels[:, :10], precision=2, suppress_small=True))
