"""Protograph-based spatially-coupled LDPC codes.

Base matrices are built from the component blocks ``P_0 .. P_{m_s}`` (each
J' x K'), lifted to binary parity-check matrices and decoded with a windowed
sum-product decoder. Coded bit ``j * M + u`` is copy ``u`` of protograph
column ``j``.
"""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .window import window_schedule

LLR_CLIP = 50.0


@dataclass(frozen=True, eq=False)
class BaseMatrix:
    entries: np.ndarray
    blocks: tuple
    T: int
    mode: str

    @property
    def J_prime(self):
        return self.blocks[0].shape[0]

    @property
    def K_prime(self):
        return self.blocks[0].shape[1]

    @property
    def m_s(self):
        return len(self.blocks) - 1

    @property
    def tailbiting(self):
        return self.mode == "tailbiting"

    @property
    def shape(self):
        return self.entries.shape

    @property
    def design_rate(self):
        Jp, Kp = self.J_prime, self.K_prime
        if self.tailbiting:
            return 1.0 - Jp / Kp
        return 1.0 - Jp / Kp - self.m_s * Jp / (self.T * Kp)

    @property
    def n_positions(self):
        return self.T

    @property
    def n_check_positions(self):
        return self.T if self.tailbiting else self.T + self.m_s

    def column_position(self, j):
        return np.asarray(j) // self.K_prime

    def row_position(self, i):
        return np.asarray(i) // self.J_prime

    @property
    def check_degrees(self):
        return self.entries.sum(axis=1)

    @property
    def variable_degrees(self):
        return self.entries.sum(axis=0)

    def is_regular(self):
        total = sum(self.blocks)
        return len(set(total.sum(axis=0))) == 1 and len(set(total.sum(axis=1))) == 1


def build_base_matrix(blocks, T, mode="terminated"):
    """Band-diagonal (terminated) or circulant (tailbiting) coupled base matrix."""
    if mode not in ("terminated", "tailbiting"):
        raise ValueError(f"unknown mode {mode!r}")
    blocks = tuple(np.atleast_2d(np.asarray(b, dtype=int)) for b in blocks)
    if not blocks:
        raise ValueError("need at least one component block")
    shape = blocks[0].shape
    if any(b.shape != shape for b in blocks):
        raise ValueError("component blocks must all have the same J' x K' shape")
    if any((b < 0).any() for b in blocks):
        raise ValueError("base matrix entries must be nonnegative")
    m_s = len(blocks) - 1
    T = int(T)
    if T < 1:
        raise ValueError("T must be >= 1")
    if mode == "tailbiting" and T <= m_s:
        raise ValueError("tailbiting requires T > m_s")
    Jp, Kp = shape
    n_rows = T if mode == "tailbiting" else T + m_s
    P = np.zeros((n_rows * Jp, T * Kp), dtype=int)
    for j in range(T):
        for i, B in enumerate(blocks):
            r = (j + i) % n_rows if mode == "tailbiting" else j + i
            P[r * Jp:(r + 1) * Jp, j * Kp:(j + 1) * Kp] += B
    P.setflags(write=False)
    return BaseMatrix(P, blocks, T, mode)


@dataclass(frozen=True, eq=False)
class LiftedCode:
    base: BaseMatrix
    M: int
    parity_check: sp.csr_matrix

    @property
    def n(self):
        return self.parity_check.shape[1]

    @property
    def r(self):
        return self.parity_check.shape[0]

    @cached_property
    def column_origin(self):
        return np.arange(self.n) // self.M

    @cached_property
    def row_origin(self):
        return np.arange(self.r) // self.M

    @cached_property
    def position_of_bit(self):
        return self.column_origin // self.base.K_prime

    @cached_property
    def edges(self):
        """(row, col) of every edge, sorted by row then column."""
        H = self.parity_check.tocoo()
        order = np.lexsort((H.col, H.row))
        return H.row[order].astype(np.int64), H.col[order].astype(np.int64)


def _disjoint_permutations(count, M, rng, max_tries=1000):
    perms = []
    for _ in range(count):
        for _ in range(max_tries):
            cand = rng.permutation(M)
            if all((cand != p).all() for p in perms):
                perms.append(cand)
                break
        else:
            raise RuntimeError("could not draw disjoint permutations; increase M")
    return perms


def lift(base, M, rng):
    """Replace each base entry p by a random M x M matrix with p ones per row and column.

    The block is a sum of p pairwise disjoint random permutation matrices, so
    parallel protograph edges never collapse into a double edge.
    """
    M = int(M)
    if M < max(1, base.entries.max()):
        raise ValueError(f"lifting factor M={M} smaller than max base entry {base.entries.max()}")
    rows, cols = [], []
    ar = np.arange(M)
    for i, j in zip(*np.nonzero(base.entries)):
        for perm in _disjoint_permutations(int(base.entries[i, j]), M, rng):
            rows.append(i * M + ar)
            cols.append(j * M + perm)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    shape = (base.shape[0] * M, base.shape[1] * M)
    H = sp.csr_matrix((np.ones(len(rows), dtype=np.uint8), (rows, cols)), shape=shape)
    H.sum_duplicates()
    return LiftedCode(base, M, H)


def gf2_systematic(H):
    """Row-reduce a dense GF(2) matrix.

    Returns (reduced rows, pivot columns). Rank deficiency simply yields fewer
    pivots; the free columns carry the information bits.
    """
    A = np.array(H, dtype=np.uint8) & 1
    r, n = A.shape
    pivots = []
    row = 0
    for col in range(n):
        if row >= r:
            break
        hits = np.nonzero(A[row:, col])[0]
        if len(hits) == 0:
            continue
        p = row + hits[0]
        if p != row:
            A[[row, p]] = A[[p, row]]
        others = np.nonzero(A[:, col])[0]
        others = others[others != row]
        A[others] ^= A[row]
        pivots.append(col)
        row += 1
    return A[:row], np.array(pivots, dtype=int)


@dataclass(frozen=True, eq=False)
class Encoder:
    reduced: np.ndarray
    pivots: np.ndarray
    free: np.ndarray

    @property
    def k(self):
        return len(self.free)

    def encode(self, info):
        info = np.asarray(info, dtype=np.uint8)
        if info.shape[-1] != self.k:
            raise ValueError(f"expected {self.k} information bits, got {info.shape[-1]}")
        n = len(self.pivots) + len(self.free)
        c = np.zeros(info.shape[:-1] + (n,), dtype=np.uint8)
        c[..., self.free] = info
        # reduced form: x_pivot[i] + sum_free R[i, f] x_f = 0
        c[..., self.pivots] = (info.astype(np.int64) @ self.reduced[:, self.free].T.astype(np.int64)) & 1
        return c


def make_encoder(code):
    """Generic GF(2) encoder for small codes (dense elimination; not used on the all-zero hot path)."""
    H = code.parity_check.toarray() if sp.issparse(code.parity_check) else np.asarray(code.parity_check)
    reduced, pivots = gf2_systematic(H)
    free = np.setdiff1d(np.arange(H.shape[1]), pivots)
    return Encoder(reduced, pivots, free)


def encode(code, info):
    return make_encoder(code).encode(info)


def syndrome(code, word):
    return (code.parity_check @ np.asarray(word, dtype=np.int64)) % 2


# ---------------------------------------------------------------------------
# sum-product decoding


def _boxplus_extrinsic(msgs, starts):
    """Check-node update on row-grouped messages (segments begin at ``starts``)."""
    mag = np.clip(np.abs(msgs), 1e-12, LLR_CLIP)
    phi = -np.log(np.tanh(mag / 2))
    neg = msgs < 0
    seg = np.repeat(np.arange(len(starts)), np.diff(np.append(starts, len(msgs))))
    tot_phi = np.add.reduceat(phi, starts)[seg]
    tot_neg = np.add.reduceat(neg.astype(np.int64), starts)[seg]
    ext = np.clip(tot_phi - phi, 1e-30, None)
    out = -np.log(np.tanh(ext / 2))
    sign = np.where((tot_neg - neg) % 2 == 1, -1.0, 1.0)
    return np.clip(sign * out, -LLR_CLIP, LLR_CLIP)


@dataclass(eq=False)
class _WindowPlan:
    cn_edges: np.ndarray  # edge ids grouped by check node
    cn_starts: np.ndarray
    vn_edges: np.ndarray  # edge ids grouped by variable node
    vn_starts: np.ndarray
    vn_bits: np.ndarray   # variable node of each vn group
    target_bits: np.ndarray


@dataclass(eq=False)
class WindowDecoder:
    """Windowed sum-product decoder for a lifted SC-LDPC code.

    Flooding schedule inside the window, one spatial position per slide,
    messages retained between overlapping windows. Variable positions are
    frozen once decided.
    """

    code: LiftedCode
    W: int
    l_max: int
    plans: list = field(init=False, repr=False)

    def __post_init__(self):
        base = self.code.base
        rows, cols = self.code.edges
        self._rows, self._cols = rows, cols
        M = self.code.M
        row_pos = rows // (M * base.J_prime)
        col_pos = cols // (M * base.K_prime)
        by_col = np.lexsort((rows, cols))
        self.plans = []
        self.schedule = window_schedule(base.T, self.W, base.m_s, base.tailbiting)
        bits_per_pos = M * base.K_prime
        for win in self.schedule:
            cn = np.concatenate([np.nonzero(row_pos == r)[0] for r in win.check_positions])
            cn_starts = np.flatnonzero(np.r_[True, rows[cn][1:] != rows[cn][:-1]])
            vmask = np.isin(col_pos[by_col], win.var_positions)
            vn = by_col[vmask]
            vn_starts = np.flatnonzero(np.r_[True, cols[vn][1:] != cols[vn][:-1]])
            target = (np.arange(bits_per_pos) + win.target * bits_per_pos) if win.target is not None else np.empty(0, int)
            self.plans.append(_WindowPlan(cn, cn_starts, vn, vn_starts, cols[vn][vn_starts], target))

    def decode(self, channel_llr):
        """Decode one frame; returns hard decisions (uint8, 1 = bit one)."""
        ch = np.asarray(channel_llr, dtype=float)
        if ch.shape != (self.code.n,):
            raise ValueError(f"expected {self.code.n} LLRs, got shape {ch.shape}")
        if not np.isfinite(ch).all():
            raise ValueError("channel LLRs must be finite")
        ch = np.clip(ch, -LLR_CLIP, LLR_CLIP)
        cols = self._cols
        vc = ch[cols].copy()
        cv = np.zeros_like(vc)
        decided = np.zeros(self.code.n, dtype=bool)
        out = np.zeros(self.code.n, dtype=np.uint8)
        for plan in self.plans:
            live = ~decided[plan.vn_bits]
            seg_len = np.diff(np.append(plan.vn_starts, len(plan.vn_edges)))
            live_edges = np.repeat(live, seg_len)
            vn_edges = plan.vn_edges[live_edges]
            vn_starts = np.flatnonzero(np.r_[True, cols[vn_edges][1:] != cols[vn_edges][:-1]]) if len(vn_edges) else plan.vn_starts[:0]
            vn_bits = cols[vn_edges][vn_starts] if len(vn_edges) else plan.vn_bits[:0]
            seg = np.repeat(np.arange(len(vn_starts)), np.diff(np.append(vn_starts, len(vn_edges))))
            for _ in range(self.l_max):
                cv[plan.cn_edges] = _boxplus_extrinsic(vc[plan.cn_edges], plan.cn_starts)
                if len(vn_edges):
                    incoming = cv[vn_edges]
                    total = np.add.reduceat(incoming, vn_starts) + ch[vn_bits]
                    vc[vn_edges] = np.clip(total[seg] - incoming, -LLR_CLIP, LLR_CLIP)
            if len(plan.target_bits):
                app = self.app_llr(ch, cv, plan.target_bits)
                out[plan.target_bits] = app < 0
                decided[plan.target_bits] = True
        return out

    def app_llr(self, ch, cv, bits):
        sums = np.bincount(self._cols, weights=cv, minlength=self.code.n)
        return ch[bits] + sums[bits]


def bp_window_decode(code, channel_llr, W, l_max):
    """Windowed BP decoding; returns (decisions, per-position bit error counts vs all-zero)."""
    dec = WindowDecoder(code, W, l_max).decode(channel_llr)
    per_pos = np.bincount(code.position_of_bit, weights=dec, minlength=code.base.T)
    return dec, per_pos


def bp_decode(code, channel_llr, iterations):
    """Full flooding sum-product decoding over the whole graph."""
    ch = np.clip(np.asarray(channel_llr, dtype=float), -LLR_CLIP, LLR_CLIP)
    rows, cols = code.edges
    cn_starts = np.flatnonzero(np.r_[True, rows[1:] != rows[:-1]])
    by_col = np.lexsort((rows, cols))
    vn_starts = np.flatnonzero(np.r_[True, cols[by_col][1:] != cols[by_col][:-1]])
    vn_bits = cols[by_col][vn_starts]
    seg = np.repeat(np.arange(len(vn_starts)), np.diff(np.append(vn_starts, len(by_col))))
    vc = ch[cols].copy()
    cv = np.zeros_like(vc)
    for _ in range(iterations):
        cv = _boxplus_extrinsic(vc, cn_starts)
        incoming = cv[by_col]
        total = np.add.reduceat(incoming, vn_starts) + ch[vn_bits]
        vc[by_col] = np.clip(total[seg] - incoming, -LLR_CLIP, LLR_CLIP)
    app = ch + np.bincount(cols, weights=cv, minlength=code.n)
    return (app < 0).astype(np.uint8)


# ---------------------------------------------------------------------------
# text format: header line, then one line per row listing column indices


def save_sparse(fh, matrix, mode, T, M):
    """Write a (base or lifted) matrix; repeated indices encode base entries > 1."""
    A = matrix.tocsr() if sp.issparse(matrix) else sp.csr_matrix(np.asarray(matrix))
    fh.write(f"# rows={A.shape[0]} cols={A.shape[1]} mode={mode} T={T} M={M}\n")
    for i in range(A.shape[0]):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        idx = np.repeat(A.indices[lo:hi], A.data[lo:hi].astype(int))
        fh.write(" ".join(map(str, idx)) + "\n")


def load_sparse(fh):
    header = fh.readline().lstrip("#").split()
    meta = dict(item.split("=") for item in header)
    n_rows, n_cols = int(meta["rows"]), int(meta["cols"])
    rows, cols = [], []
    for i in range(n_rows):
        idx = [int(v) for v in fh.readline().split()]
        rows.extend([i] * len(idx))
        cols.extend(idx)
    A = sp.csr_matrix((np.ones(len(rows), dtype=int), (rows, cols)), shape=(n_rows, n_cols))
    A.sum_duplicates()
    return A, meta["mode"], int(meta["T"]), int(meta["M"])
