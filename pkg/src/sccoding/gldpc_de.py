"""Density evolution for iterative HDD of coupled GLDPC ensembles.

Component decoding is modelled with the high-rate Poisson scaling limit:
with ``n`` the mother (unshortened) BCH length, a CN whose incoming messages
are wrong with probability x miscorrects/keeps a wrong bit with probability
f11 = phi(n x; t-1) and introduces a wrong bit with probability
f01 = phi(n x; t) / (n (t-1)!), where phi(lam; t) = P[Poisson(lam) > t].
Shortened codes use x (n - s) / n in place of x.

Positions are 0-based. CN position c averages the VN positions c-w+1 .. c;
VN position j averages CN positions j .. j+w-1. Everything carries a leading
batch axis (several SNRs / mappers at once).
"""
import json
from dataclasses import dataclass, field
from math import factorial

import numpy as np
from scipy.stats import poisson

from .window import window_schedule


def phi(lam, t):
    """1 - sum_{i<=t} lam^i e^-lam / i!  (Poisson survival function)."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise ValueError("lambda must be nonnegative")
    return poisson.sf(t, lam)


def _scaled(x, B):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > 1) or np.any(np.isnan(x)):
        raise ValueError("x must lie in [0, 1]")
    return B.N * x * (B.N - B.s) / B.N


def f11(x, B):
    return phi(_scaled(x, B), B.t - 1)


def f01(x, B):
    return np.clip(phi(_scaled(x, B), B.t) / (B.N * factorial(B.t - 1)), 0.0, 1.0)


@dataclass
class HddDeState:
    eps: np.ndarray          # (batch, T)
    q: np.ndarray            # (batch, T)
    a: np.ndarray            # (batch, n_cn_pos) f11 per CN position
    b: np.ndarray            # (batch, n_cn_pos) f01 per CN position
    l: int = 0


class GldpcDE:
    """DE engine for one (B, T, w, mode) ensemble."""

    def __init__(self, B, T, w, mode="terminated"):
        if mode not in ("terminated", "tailbiting"):
            raise ValueError(f"unknown mode {mode!r}")
        self.B, self.T, self.w, self.mode = B, int(T), int(w), mode
        tb = mode == "tailbiting"
        self.n_cn = T if tb else T + w - 1
        k = np.arange(w)
        vn_of_cn = np.arange(self.n_cn)[:, None] - k[None, :]
        cn_of_vn = np.arange(T)[:, None] + k[None, :]
        if tb:
            vn_of_cn %= T
            cn_of_vn %= T
        # out-of-chain VNs are known: index T points to a zero pad
        self.vn_of_cn = np.where((vn_of_cn >= 0) & (vn_of_cn < T), vn_of_cn, T)
        self.cn_of_vn = cn_of_vn

    def init_state(self, eps):
        eps = np.atleast_2d(np.asarray(eps, dtype=float))
        if eps.shape[-1] != self.T:
            eps = np.broadcast_to(eps, eps.shape[:-1] + (self.T,)).copy() if eps.shape[-1] == 1 else None
            if eps is None:
                raise ValueError(f"eps must have {self.T} positions")
        if np.any(eps < 0) or np.any(eps > 1):
            raise ValueError("crossover probabilities must lie in [0, 1]")
        nb = eps.shape[0]
        return HddDeState(eps, eps.copy(), np.ones((nb, self.n_cn)), np.zeros((nb, self.n_cn)))

    def _cn_update(self, st, cns):
        qpad = np.concatenate([st.q, np.zeros((st.q.shape[0], 1))], axis=1)
        x = qpad[:, self.vn_of_cn[cns]].mean(axis=-1)
        st.a[:, cns] = f11(x, self.B)
        st.b[:, cns] = f01(x, self.B)

    def _averages(self, st, vns):
        idx = self.cn_of_vn[vns]
        return st.a[:, idx].mean(axis=-1), st.b[:, idx].mean(axis=-1)

    def _vn_update(self, st, vns):
        abar, bbar = self._averages(st, vns)
        e = st.eps[:, vns]
        st.q[:, vns] = e * abar + (1 - e) * bbar

    def step(self, st):
        """One synchronous full-chain iteration."""
        self._cn_update(st, np.arange(self.n_cn))
        self._vn_update(st, np.arange(self.T))
        st.l += 1
        return st

    def position_ber(self, st, vns=None):
        vns = np.arange(self.T) if vns is None else np.asarray(vns)
        if st.l == 0:
            return st.eps[:, vns].copy()
        abar, bbar = self._averages(st, vns)
        e = st.eps[:, vns]
        return e * abar**2 + (1 - e) * (1 - (1 - bbar) ** 2)

    def run_full(self, eps, l_max, tol=1e-12):
        st = self.init_state(eps)
        for _ in range(l_max):
            prev = st.q.copy()
            self.step(st)
            if np.max(np.abs(st.q - prev)) < tol and np.max(st.q) < tol:
                break
        return st, self.position_ber(st)

    def run_window(self, eps, W, l_max):
        """Windowed DE mirroring the finite-length window decoder."""
        st = self.init_state(eps)
        sched = window_schedule(self.T, W, self.w - 1, self.mode == "tailbiting")
        pe = np.zeros_like(st.eps)
        decided = np.zeros(self.T, dtype=bool)
        traj = []
        for k, win in enumerate(sched):
            cns = np.array(win.check_positions)
            vns = np.array([v for v in win.var_positions if not decided[v]], dtype=int)
            for _ in range(l_max):
                self._cn_update(st, cns)
                if len(vns):
                    self._vn_update(st, vns)
                st.l += 1
            if win.target is not None:
                pe[:, win.target] = self.position_ber(st, [win.target])[:, 0]
                decided[win.target] = True
                traj.append((k, win.target, pe[:, win.target].copy()))
        return DeRun(pe, traj)


@dataclass(eq=False)
class DeRun:
    position_ber: np.ndarray
    trajectory: list = field(repr=False)

    @property
    def ber(self):
        return self.position_ber.mean(axis=-1)

    def write_trajectory(self, fh, batch_index=0):
        for k, pos, b in self.trajectory:
            fh.write(json.dumps({"window": k, "position": int(pos), "ber": float(b[batch_index])}) + "\n")


def de_step(state, de):
    return de.step(state)


def de_ber(state, de):
    pe = de.position_ber(state)
    return pe, pe.mean(axis=-1)


def scalar_recursion(p, B, iterations):
    """Uncoupled recursion q <- p f11(q) + (1-p) f01(q); used as a reference for w = 1."""
    q = p
    for _ in range(iterations):
        q = p * f11(q, B) + (1 - p) * f01(q, B)
    return q
