"""Spatially-coupled GLDPC (product-like) ensembles with BCH component codes.

Every variable node (VN) has degree 2 and every check node (CN) is a
shortened BCH code of length n_B. Position j holds C CNs and C*n_B/2 VNs. The
sockets of each position are split into w groups by a random permutation, and
VN group i of position j is wired to CN group w-i-1 of position j+i.

Decoding is extrinsic iterative hard-decision decoding with bounded-distance
component decoding, optionally with the sliding window shared with the LDPC
decoders.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .bch import BCHCode, FastBDD, bdd_decode, construct
from .window import window_schedule

KNOWN = -1


def design_rate(B, T, w, mode="terminated"):
    """R' = 2 k/n - 1 for tailbiting; terminated loses (1 - R') (w - 1) / T."""
    r = 2.0 * B.k / B.n - 1.0
    if mode == "tailbiting":
        return r
    if mode != "terminated":
        raise ValueError(f"unknown mode {mode!r}")
    return r - (1.0 - r) * (w - 1) / T


@dataclass(frozen=True, eq=False)
class GldpcGraph:
    B: BCHCode
    C: int
    T: int
    w: int
    mode: str
    cn_vars: np.ndarray   # (n_cn, n_B) VN index per CN socket, KNOWN for known VNs
    seed: int | None = None

    @property
    def tailbiting(self):
        return self.mode == "tailbiting"

    @property
    def vn_per_position(self):
        return self.C * self.B.n // 2

    @property
    def n_vn(self):
        return self.T * self.vn_per_position

    @property
    def n_cn_positions(self):
        return self.T if self.tailbiting else self.T + self.w - 1

    @property
    def n_cn(self):
        return self.cn_vars.shape[0]

    @cached_property
    def vn_edges(self):
        """(n_vn, 2) flat socket ids (cn * n_B + slot) of each VN."""
        flat = self.cn_vars.ravel()
        sock = np.flatnonzero(flat != KNOWN)
        order = np.argsort(flat[sock], kind="stable")
        return sock[order].reshape(self.n_vn, 2)

    def vn_position(self, v):
        return np.asarray(v) // self.vn_per_position

    def incidence(self):
        """Sparse CN x VN incidence matrix (counts, known VNs dropped)."""
        import scipy.sparse as sp
        rows = np.repeat(np.arange(self.n_cn), self.B.n)
        cols = self.cn_vars.ravel()
        keep = cols != KNOWN
        return sp.csr_matrix((np.ones(keep.sum(), dtype=int), (rows[keep], cols[keep])),
                             shape=(self.n_cn, self.n_vn))


def sample_graph(B, C, T, w, mode="terminated", rng=None, seed=None):
    if mode not in ("terminated", "tailbiting"):
        raise ValueError(f"unknown mode {mode!r}")
    C, T, w = int(C), int(T), int(w)
    if C < 1 or T < 1 or w < 1:
        raise ValueError("C, T and w must be positive")
    nB = B.n
    if (C * nB) % 2:
        raise ValueError(f"C*n_B = {C * nB} must be even")
    if (C * nB) % w:
        raise ValueError(f"C*n_B = {C * nB} must be divisible by w = {w}")
    if mode == "tailbiting" and T < w:
        raise ValueError("tailbiting needs T >= w")
    if rng is None:
        rng = np.random.default_rng(seed)
    G = C * nB // w
    Vp = C * nB // 2
    n_pos = T if mode == "tailbiting" else T + w - 1
    vn_perm = [rng.permutation(C * nB) for _ in range(T)]
    cn_vars = np.full((n_pos, C * nB), KNOWN, dtype=np.int64)
    for c in range(n_pos):
        perm = rng.permutation(C * nB)
        for g in range(w):
            i = w - 1 - g
            j = c - i
            if mode == "tailbiting":
                j %= T
            elif not 0 <= j < T:
                continue
            csl = perm[g * G:(g + 1) * G]
            vsl = vn_perm[j][i * G:(i + 1) * G]
            cn_vars[c, csl] = j * Vp + vsl // 2
    return GldpcGraph(B, C, T, w, mode, cn_vars.reshape(n_pos * C, nB), seed)


def _cn_extrinsic_table(fast, v, y):
    """out_i = bit i of BDD(v with v_i replaced by y_i), or y_i when BDD fails."""
    n_B = v.shape[-1]
    s0 = fast.packed_syndromes(v)
    d = (v ^ y).astype(bool)
    s = s0[:, None] ^ np.where(d, fast.Hp[None, :], 0)
    pat = fast.table[s]
    ok = fast.correctable[s]
    hit = (pat == np.arange(n_B)[None, :, None]).any(axis=-1)
    return np.where(ok, y ^ hit, y).astype(np.uint8)


def _cn_extrinsic_bm(B, v, y):
    out = y.copy()
    for r in range(v.shape[0]):
        for i in range(v.shape[1]):
            word = v[r].copy()
            word[i] = y[r, i]
            res = bdd_decode(B, word)
            if not res.failed:
                out[r, i] = res.word[i]
    return out


class HddDecoder:
    """Extrinsic iterative HDD of an SC-GLDPC graph (full or windowed)."""

    def __init__(self, graph, l_max, W=None):
        self.graph, self.l_max, self.W = graph, int(l_max), W
        B = graph.B
        try:
            self.fast = FastBDD(B)
        except ValueError:
            self.fast = None
        ve = graph.vn_edges
        self.other = np.zeros(graph.cn_vars.size, dtype=np.int64)
        self.other[ve[:, 0]] = ve[:, 1]
        self.other[ve[:, 1]] = ve[:, 0]
        self.known = graph.cn_vars == KNOWN
        if W is not None:
            self.schedule = window_schedule(graph.T, W, graph.w - 1, graph.tailbiting)
        per = graph.C
        self._cn_of_pos = lambda p: np.arange(p * per, (p + 1) * per)

    def _cn_update(self, cns, vc, y_sock):
        v = vc[cns]
        y = y_sock[cns]
        if self.fast is not None:
            return _cn_extrinsic_table(self.fast, v, y)
        return _cn_extrinsic_bm(self.graph.B, v, y)

    def decode(self, y):
        """Hard channel bits (n_vn,) -> (decisions, per-position error counts vs. all-zero)."""
        g = self.graph
        y = np.asarray(y, dtype=np.uint8)
        if y.shape != (g.n_vn,):
            raise ValueError(f"expected {g.n_vn} channel bits, got {y.shape}")
        flat_vars = g.cn_vars
        y_sock = np.where(self.known, 0, y[np.where(self.known, 0, flat_vars)]).astype(np.uint8)
        cv = y_sock.copy()           # CN->VN, initialised to the channel bit
        vc = y_sock.copy()           # VN->CN
        other = self.other.reshape(cv.shape)
        ve = g.vn_edges
        if self.W is None:
            cns = np.arange(g.n_cn)
            for _ in range(self.l_max):
                cv[cns] = self._cn_update(cns, vc, y_sock)
                vc = np.where(self.known, 0, cv.ravel()[other])
            dec = self._decide(cv.ravel(), y, ve)
        else:
            dec = np.zeros(g.n_vn, dtype=np.uint8)
            vp = g.vn_per_position
            live_vn = np.ones(g.n_vn, dtype=bool)
            sock_vn = np.where(self.known, 0, flat_vars)
            for win in self.schedule:
                cns = np.concatenate([self._cn_of_pos(p) for p in win.check_positions])
                in_win = np.zeros(g.T, dtype=bool)
                in_win[list(win.var_positions)] = True
                upd = (~self.known) & in_win[sock_vn // vp] & live_vn[sock_vn]
                for _ in range(self.l_max):
                    cv[cns] = self._cn_update(cns, vc, y_sock)
                    vc = np.where(upd, cv.ravel()[other], vc)
                if win.target is not None:
                    vs = np.arange(win.target * vp, (win.target + 1) * vp)
                    dec[vs] = self._decide(cv.ravel(), y, ve[vs], vs)
                    live_vn[vs] = False
        per_pos = np.bincount(np.arange(g.n_vn) // g.vn_per_position, weights=dec, minlength=g.T)
        return dec, per_pos

    @staticmethod
    def _decide(cv_flat, y, edges, vs=None):
        m0, m1 = cv_flat[edges[:, 0]], cv_flat[edges[:, 1]]
        yy = y if vs is None else y[vs]
        return np.where(m0 == m1, m0, 1 - yy).astype(np.uint8)


def hdd_window_decode(graph, y, l_max, W=None):
    """Decode hard channel bits; returns (decisions, per-position bit error counts vs. all-zero)."""
    return HddDecoder(graph, l_max, W).decode(y)


def save_graph(fh, graph):
    B = graph.B
    fh.write(f"# nu={B.nu} t={B.t} s={B.s} C={graph.C} T={graph.T} w={graph.w} "
             f"mode={graph.mode} seed={graph.seed}\n")
    for cn, row in enumerate(graph.cn_vars):
        for slot, v in enumerate(row):
            fh.write(f"{cn} {slot} {v}\n")


def load_graph(fh):
    meta = dict(item.split("=") for item in fh.readline().lstrip("#").split())
    B = construct(int(meta["nu"]), int(meta["t"]), int(meta["s"]))
    C, T, w, mode = int(meta["C"]), int(meta["T"]), int(meta["w"]), meta["mode"]
    seed = None if meta["seed"] == "None" else int(meta["seed"])
    n_pos = T if mode == "tailbiting" else T + w - 1
    cn_vars = np.full((n_pos * C, B.n), KNOWN, dtype=np.int64)
    data = np.loadtxt(fh, dtype=np.int64, ndmin=2)
    cn_vars[data[:, 0], data[:, 1]] = data[:, 2]
    return GldpcGraph(B, C, T, w, mode, cn_vars, seed)
