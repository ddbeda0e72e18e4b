"""Sliding-window schedule shared by the finite-length decoders and the DE analyses.

Positions are 0-based. A window anchored at position ``s`` covers check
positions ``s .. s+W-1`` and variable positions ``s .. s+W-1``; after
``l_max`` iterations the variable position ``s`` (the target) is decided and
frozen. Decoding enters the chain through ``W-1`` warm-up windows whose
targets lie before the first real target, so every position spends ``W``
window slots inside the decoder before its decision.

Terminated chains have ``T`` variable and ``T + m_s`` check positions and the
first target is position 0. Tailbiting chains have ``T`` of each, indices wrap
modulo ``T`` and the first target is position ``m_s`` (the last target is
``m_s - 1``). A different tailbiting start can be requested, which rotates the
whole schedule.
"""
from dataclasses import dataclass


@dataclass(frozen=True)
class Window:
    target: int | None  # None for warm-up windows
    check_positions: tuple
    var_positions: tuple


def window_schedule(T, W, m_s, tailbiting, start=None):
    if W < 1:
        raise ValueError("window size must be >= 1")
    if W >= T:
        raise ValueError(f"window size W={W} must be smaller than T={T}; use full decoding instead")
    if tailbiting and T <= m_s:
        raise ValueError("tailbiting chains need T > m_s")
    windows = []
    if tailbiting:
        first = m_s if start is None else m_s + int(start)
        for s in range(first - (W - 1), first + T):
            pos = tuple(dict.fromkeys((s + i) % T for i in range(W)))
            windows.append(Window(s % T if s >= first else None, pos, pos))
    else:
        n_checks = T + m_s
        for s in range(-(W - 1), T):
            checks = tuple(r for r in range(s, s + W) if 0 <= r < n_checks)
            vars_ = tuple(c for c in range(s, s + W) if 0 <= c < T)
            windows.append(Window(s if s >= 0 else None, checks, vars_))
    return windows
