"""Protograph EXIT analysis of windowed BP decoding with bit-mapped channels.

One mutual information is tracked per protograph edge and direction; parallel
edges enter the updates through their multiplicity. Every protograph column j
sees a mixture channel: with weight ``w[j, l]`` its bits are carried by a
modulation bit of protection level ``l`` whose consistent-Gaussian LLR has
variance ``sigma_l^2 = jinv(I_l)^2``. Extrinsic outputs are averaged over the
mixture in MI, decision error probabilities are averaged as probabilities.

All state carries a leading batch axis, so many SNRs or bit mappers are
analysed in one pass. The window schedule is the one used by the decoders.
"""
import json
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import ndtr

from .channel import pam_bit_mi
from .jfun import jfun, jinv
from .window import window_schedule

BRACKET_FAILURE = float("nan")


def qfunc(x):
    return ndtr(-np.asarray(x, dtype=float))


@dataclass(frozen=True)
class ColumnMixture:
    """Per-column channel mixture: weights (..., N, L) over branches with MI ``mi`` (L,)."""

    weights: np.ndarray
    mi: np.ndarray

    @property
    def column_mi(self):
        return self.weights @ self.mi


def _check_stochastic(A, atol=1e-6):
    A = np.asarray(A, dtype=float)
    if np.any(A < -atol):
        raise ValueError("bit mapper entries must be nonnegative")
    if not np.allclose(A.sum(axis=-2), 1.0, atol=atol):
        raise ValueError("bit mapper columns must sum to 1")
    return A


def channel_mi_per_column(A, profile):
    """Mixture {(a_ij, I_i)} seen by each protograph column; bits with equal MI are merged."""
    A = _check_stochastic(getattr(A, "entries", A))
    mi = np.asarray(profile.mi, dtype=float)
    if A.shape[-2] != len(mi):
        raise ValueError(f"mapper has {A.shape[-2]} rows but the channel has {len(mi)} bits")
    uniq, inv = np.unique(mi, return_inverse=True)
    G = np.zeros((len(mi), len(uniq)))
    G[np.arange(len(mi)), inv] = 1.0
    return ColumnMixture(np.swapaxes(A, -1, -2) @ G, uniq)


def level_weights(A, c):
    """Bit mapper (..., m, N) -> weight of each protection level per column (..., N, L)."""
    A = _check_stochastic(getattr(A, "entries", A))
    G = np.eye(c.n_levels)[c.protection_level]
    return np.swapaxes(A, -1, -2) @ G


@dataclass(eq=False)
class _Plan:
    ce: np.ndarray          # edges of the window's check rows, sorted by row
    ce_starts: np.ndarray
    ce_seg: np.ndarray
    ve: np.ndarray          # all edges of the live variable columns, sorted by column
    ve_starts: np.ndarray
    ve_seg: np.ndarray
    ve_cols: np.ndarray     # column of each live group
    target: int | None
    target_cols: np.ndarray


def _groups(keys):
    starts = np.flatnonzero(np.r_[True, keys[1:] != keys[:-1]]) if len(keys) else np.zeros(0, int)
    seg = np.repeat(np.arange(len(starts)), np.diff(np.append(starts, len(keys))))
    return starts, seg


@dataclass(eq=False)
class PexitRun:
    position_ber: np.ndarray   # (B, T) BER of each position at its decision
    trajectory: list = field(repr=False)   # (window index, position, BER (B,))

    @property
    def ber(self):
        return self.position_ber.mean(axis=-1)

    def write_trajectory(self, fh, batch_index=0):
        for k, pos, b in self.trajectory:
            fh.write(json.dumps({"window": k, "position": int(pos), "ber": float(b[batch_index])}) + "\n")


class PexitAnalysis:
    """Windowed P-EXIT engine for one coupled base matrix.

    ``run(weights, sigma2)`` takes per-column level weights (B, N, L) (or
    (N, L), broadcast) and per-level channel LLR variances (B, L).
    """

    def __init__(self, base, W, l_max, start=None):
        if W >= base.T:
            raise ValueError(f"window size W={W} must be smaller than T={base.T}")
        self.base, self.W, self.l_max = base, int(W), int(l_max)
        P = base.entries
        er, ec = np.nonzero(P)  # row-major: sorted by row
        self.er, self.ec = er, ec
        self.mult = P[er, ec].astype(float)
        self.n_cols = P.shape[1]
        Jp, Kp = base.J_prime, base.K_prime
        row_pos, col_pos = er // Jp, ec // Kp
        by_col = np.lexsort((er, ec))
        self.by_col = by_col
        self.schedule = window_schedule(base.T, self.W, base.m_s, base.tailbiting, start)
        decided = set()
        self.plans = []
        for win in self.schedule:
            ce = np.flatnonzero(np.isin(row_pos, win.check_positions))
            ce_starts, ce_seg = _groups(er[ce])
            live = [p for p in win.var_positions if p not in decided]
            ve = by_col[np.isin(col_pos[by_col], live)]
            ve_starts, ve_seg = _groups(ec[ve])
            tcols = np.arange(win.target * Kp, (win.target + 1) * Kp) if win.target is not None else np.zeros(0, int)
            self.plans.append(_Plan(ce, ce_starts, ce_seg, ve, ve_starts, ve_seg, ec[ve][ve_starts], win.target, tcols))
            if win.target is not None:
                decided.add(win.target)

    @cached_property
    def _target_edges(self):
        """Per target position: edges sorted by column, group starts, and columns."""
        out = {}
        Kp = self.base.K_prime
        col_pos = self.ec // Kp
        for pos in range(self.base.T):
            e = self.by_col[col_pos[self.by_col] == pos]
            starts, _ = _groups(self.ec[e])
            out[pos] = (e, starts, self.ec[e][starts])
        return out

    def run(self, weights, sigma2):
        sigma2 = np.atleast_2d(np.asarray(sigma2, dtype=float))
        B, L = sigma2.shape
        weights = np.asarray(weights, dtype=float)
        if weights.ndim == 2:
            weights = np.broadcast_to(weights, (B,) + weights.shape)
        if weights.shape != (B, self.n_cols, L):
            raise ValueError(f"weights shape {weights.shape} does not match ({B}, {self.n_cols}, {L})")
        mult = self.mult
        ec = self.ec
        E = len(ec)
        # initial VN->CN messages carry the channel only, CN->VN start at zero
        ch_mi = np.einsum("bnl,bl->bn", weights, jfun(np.sqrt(sigma2)))
        ivc = ch_mi[:, ec].copy()
        icv = np.zeros((B, E))
        pos_ber = np.zeros((B, self.base.T))
        traj = []
        for k, plan in enumerate(self.plans):
            wv = weights[:, plan.ve_cols, :] if len(plan.ve) else None
            mv = mult[plan.ve]
            mc = mult[plan.ce]
            for _ in range(self.l_max):
                if len(plan.ce):
                    x = jinv(1.0 - ivc[:, plan.ce]) ** 2
                    S = np.add.reduceat(x * mc, plan.ce_starts, axis=1)[:, plan.ce_seg]
                    icv[:, plan.ce] = 1.0 - jfun(np.sqrt(np.maximum(S - x, 0.0)))
                if len(plan.ve):
                    y = jinv(icv[:, plan.ve]) ** 2
                    S = np.add.reduceat(y * mv, plan.ve_starts, axis=1)[:, plan.ve_seg]
                    ext = np.maximum(S - y, 0.0)
                    w = wv[:, plan.ve_seg, :]
                    out = np.einsum("bel,bel->be", w, jfun(np.sqrt(ext[..., None] + sigma2[:, None, :])))
                    ivc[:, plan.ve] = np.clip(out, 0.0, 1.0)
            if plan.target is not None:
                e, starts, cols = self._target_edges[plan.target]
                y = jinv(icv[:, e]) ** 2 * mult[e]
                S = np.add.reduceat(y, starts, axis=1) if len(e) else np.zeros((B, len(cols)))
                pe = qfunc(np.sqrt(S[..., None] + sigma2[:, None, :]) / 2.0)
                ber_cols = np.einsum("bnl,bnl->bn", weights[:, cols, :], pe)
                pos_ber[:, plan.target] = ber_cols.mean(axis=1)
                traj.append((k, plan.target, pos_ber[:, plan.target].copy()))
        return PexitRun(pos_ber, traj)


def level_sigma2(c, snr_db):
    """Consistent-Gaussian LLR variance matched to each protection level's MI, shape snr.shape + (L,)."""
    return jinv(np.clip(pam_bit_mi(c, snr_db), 0.0, 1.0)) ** 2


def pexit_window_run(base, A, c, snr_db, W, l_max):
    """Predicted per-position BER for one bit mapper ``A`` (m x N) at one or more SNRs."""
    snr = np.atleast_1d(np.asarray(snr_db, dtype=float))
    weights = level_weights(A, c)
    return PexitAnalysis(base, W, l_max).run(weights, level_sigma2(c, snr))


def threshold(analysis, target_ber=1e-5, bracket=(-2.0, 10.0), tol_db=0.01, n_probe=9):
    """Smallest SNR in ``bracket`` where ``analysis(snr)`` falls below ``target_ber``.

    Returns ``BRACKET_FAILURE`` (nan) when the bracket contains no crossing.
    """
    lo, hi = map(float, bracket)
    if not lo < hi:
        raise ValueError("bracket must be increasing")
    probe = np.linspace(lo, hi, n_probe)
    vals = np.array([analysis(s) for s in probe])
    ok = vals < target_ber
    if not ok[-1] or ok[0]:
        return BRACKET_FAILURE
    if np.any(np.diff(ok.astype(int)) < 0):
        warnings.warn("analysis is not monotone over the bracket; using the widest crossing", RuntimeWarning)
    # last failing probe followed by success
    i = np.flatnonzero(~ok)[-1]
    lo, hi = probe[i], probe[i + 1]
    while hi - lo > tol_db:
        mid = 0.5 * (lo + hi)
        if analysis(mid) < target_ber:
            hi = mid
        else:
            lo = mid
    return hi


def batch_threshold(batch_analysis, n, target_ber=1e-5, bracket=(-2.0, 10.0), tol_db=0.01):
    """Vectorized bisection: ``batch_analysis(snrs)`` maps an (n,) SNR array to (n,) BERs.

    Entry b of the input belongs to problem b. Problems without a crossing in
    the bracket get nan.
    """
    lo = np.full(n, float(bracket[0]))
    hi = np.full(n, float(bracket[1]))
    ok_hi = np.asarray(batch_analysis(hi)) < target_ber
    ok_lo = np.asarray(batch_analysis(lo)) < target_ber
    valid = ok_hi & ~ok_lo
    while np.max(hi - lo) > tol_db:
        mid = 0.5 * (lo + hi)
        good = np.asarray(batch_analysis(mid)) < target_ber
        hi = np.where(good, mid, hi)
        lo = np.where(good, lo, mid)
    return np.where(valid, hi, np.nan)


def mapper_thresholds(base, mappers, c, W, l_max, target_ber=1e-5, bracket=(-2.0, 10.0), tol_db=0.01, analysis=None):
    """Thresholds of a stack of bit mappers (B, m, N) on one code."""
    mappers = np.asarray(mappers, dtype=float)
    if mappers.ndim == 2:
        mappers = mappers[None]
    weights = level_weights(mappers, c)
    engine = analysis or PexitAnalysis(base, W, l_max)
    return batch_threshold(lambda s: engine.run(weights, level_sigma2(c, s)).ber,
                           len(mappers), target_ber, bracket, tol_db)
