"""Bit mappers: allocation of coded bits to modulation bits, and their optimization.

``A`` is an m x n_cols matrix; ``A[i, j]`` is the fraction of the coded bits
of column j (a protograph column or a GLDPC spatial position) carried by
modulation bit i. Columns sum to 1. Every modulation bit carries the same
number of coded bits, so rows sum to n_cols / m as well.

The optimizer works on the coarser level matrix G (L x n_cols) with one row
per protection level; within a level the bits share the allocation equally.
"""
import json
from dataclasses import dataclass, field

import numpy as np

from .channel import bit_crossover_probs
from .gldpc_de import GldpcDE
from .pexit import PexitAnalysis, batch_threshold, level_sigma2, level_weights


@dataclass(frozen=True, eq=False)
class BitMapperMatrix:
    entries: np.ndarray
    mode: str = "scldpc"
    seed: int | None = None

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2:
            raise ValueError("bit mapper must be a 2-D matrix")
        if np.any(a < -1e-9) or np.any(a > 1 + 1e-9):
            raise ValueError("bit mapper entries must lie in [0, 1]")
        if not np.allclose(a.sum(axis=0), 1.0, atol=1e-6):
            raise ValueError("bit mapper columns must sum to 1")
        object.__setattr__(self, "entries", np.clip(a, 0.0, 1.0))

    @property
    def m(self):
        return self.entries.shape[0]

    @property
    def n_cols(self):
        return self.entries.shape[1]


def baseline_mapper(m, n_cols, mode="scldpc"):
    """Uniform allocation, the density-evolution model of the sequential mapper."""
    return BitMapperMatrix(np.full((m, n_cols), 1.0 / m), mode)


def effective_eps(A, p):
    """eps_j = sum_i a_ij p_i; ``p`` may carry leading batch axes matching A."""
    A = np.asarray(getattr(A, "entries", A), dtype=float)
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != A.shape[-2]:
        raise ValueError(f"{p.shape[-1]} crossover probabilities for a mapper with {A.shape[-2]} rows")
    return np.einsum("...i,...ij->...j", p, A)


def levels_to_bits(G, c):
    """Level matrix (..., L, n) -> bit matrix (..., m, n) with equal split inside a level."""
    G = np.asarray(G, dtype=float)
    sizes = np.bincount(c.protection_level, minlength=c.n_levels)
    return G[..., c.protection_level, :] / sizes[c.protection_level][:, None]


def bits_to_levels(A, c):
    A = np.asarray(getattr(A, "entries", A), dtype=float)
    G = np.zeros(A.shape[:-2] + (c.n_levels, A.shape[-1]))
    for lvl in range(c.n_levels):
        G[..., lvl, :] = A[..., c.protection_level == lvl, :].sum(axis=-2)
    return G


def repair(G, row_totals, iters=2000, tol=1e-12, floor=1e-4):
    """Project negatives to zero, then alternate column (sum 1) and row normalization.

    A small ``floor`` keeps every entry positive so the scaling converges fast.
    """
    G = np.asarray(G, dtype=float)
    row_totals = np.asarray(row_totals, dtype=float)
    if (np.all(G >= 0) and np.allclose(G.sum(axis=-2), 1.0, atol=1e-9)
            and np.allclose(G.sum(axis=-1), row_totals, atol=1e-9)):
        return G.copy()
    G = np.maximum(G, 0.0) + floor
    G = np.where(G.sum(axis=-2, keepdims=True) > 0, G, 1.0)
    for _ in range(iters):
        G = G / G.sum(axis=-2, keepdims=True)
        rs = G.sum(axis=-1, keepdims=True)
        if np.max(np.abs(rs[..., 0] - row_totals)) < tol:
            break
        G = G * (row_totals[..., None] / np.maximum(rs, 1e-300))
    return G / G.sum(axis=-2, keepdims=True)


def level_row_totals(c, n_cols):
    sizes = np.bincount(c.protection_level, minlength=c.n_levels)
    return n_cols * sizes / c.m


# ---------------------------------------------------------------------------
# objectives: stack of bit matrices (B, m, n) -> thresholds (B,)


@dataclass
class PexitObjective:
    """Windowed P-EXIT threshold of an SC-LDPC code under a bit mapper."""

    base: object
    c: object
    W: int = 5
    l_max: int = 10
    target_ber: float = 1e-5
    bracket: tuple = (-2.0, 30.0)
    tol_db: float = 0.01
    engine: PexitAnalysis = field(init=False, repr=False)

    def __post_init__(self):
        self.engine = PexitAnalysis(self.base, self.W, self.l_max)

    @property
    def n_cols(self):
        return self.base.shape[1]

    def __call__(self, mappers):
        mappers = np.asarray(mappers, dtype=float)
        if mappers.ndim == 2:
            mappers = mappers[None]
        weights = level_weights(mappers, self.c)
        return batch_threshold(lambda s: self.engine.run(weights, level_sigma2(self.c, s)).ber,
                               len(mappers), self.target_ber, self.bracket, self.tol_db)


@dataclass
class HddObjective:
    """Windowed HDD density-evolution threshold of an SC-GLDPC ensemble under a bit mapper."""

    B: object
    T: int
    w: int
    mode: str
    c: object
    W: int = 5
    l_max: int = 10
    target_ber: float = 1e-5
    bracket: tuple = (-2.0, 30.0)
    tol_db: float = 0.01
    de: GldpcDE = field(init=False, repr=False)

    def __post_init__(self):
        self.de = GldpcDE(self.B, self.T, self.w, self.mode)

    @property
    def n_cols(self):
        return self.T

    def __call__(self, mappers):
        mappers = np.asarray(mappers, dtype=float)
        if mappers.ndim == 2:
            mappers = mappers[None]

        def ber(s):
            p = bit_crossover_probs(self.c, s)
            return self.de.run_window(effective_eps(mappers, p), self.W, self.l_max).ber

        return batch_threshold(ber, len(mappers), self.target_ber, self.bracket, self.tol_db)


# ---------------------------------------------------------------------------
# differential evolution


@dataclass(frozen=True)
class OptimizerConfig:
    population: int = 30
    F: float = 0.7
    CR: float = 0.9
    generations: int = 150
    seed: int = 0
    optimize_prefix: int | None = None   # optimize only the first P columns (or positions)
    offset: int = 0                      # first optimized column, circular
    tie_columns: int = 1                 # columns sharing one allocation (K' for a protograph position)
    patience: int | None = None          # stop after this many generations without improvement
    max_buffer: float | None = None      # reject mappers needing more buffered positions
    n_positions: int | None = None       # spatial positions, for the buffer constraint

    def __post_init__(self):
        if self.population < 4:
            raise ValueError("population must be at least 4")
        if not 0 < self.F <= 2:
            raise ValueError("F must lie in (0, 2]")
        if not 0 <= self.CR <= 1:
            raise ValueError("CR must lie in [0, 1]")


@dataclass
class OptimizeResult:
    mapper: BitMapperMatrix
    threshold: float
    baseline_threshold: float
    trace: list

    @property
    def gain(self):
        return self.baseline_threshold - self.threshold

    def write_trace(self, fh):
        for g, best, mean in self.trace:
            fh.write(json.dumps({"generation": g, "best": best, "mean": mean}) + "\n")


class _Parametrization:
    """Maps a flat DE vector to a repaired bit matrix."""

    def __init__(self, c, n_cols, cfg):
        if n_cols % cfg.tie_columns:
            raise ValueError("n_cols must be divisible by tie_columns")
        self.c, self.n_cols, self.k = c, n_cols, cfg.tie_columns
        self.n_groups = n_cols // self.k
        self.L = c.n_levels
        P = self.n_groups if cfg.optimize_prefix is None else min(int(cfg.optimize_prefix), self.n_groups)
        if P < 1:
            raise ValueError("optimize_prefix must be >= 1")
        self.free = (cfg.offset + np.arange(P)) % self.n_groups
        self.rest = np.setdiff1d(np.arange(self.n_groups), self.free)
        self.totals = level_row_totals(c, self.n_groups)
        self.dim = self.L * P

    def to_levels(self, x):
        x = np.atleast_2d(x)
        B = x.shape[0]
        free = np.maximum(x.reshape(B, self.L, -1), 0.0)
        s = free.sum(axis=1, keepdims=True)
        free = np.where(s > 1e-12, free / np.maximum(s, 1e-300), 1.0 / self.L)
        G = np.zeros((B, self.L, self.n_groups))
        G[:, :, self.free] = free
        if len(self.rest):
            resid = self.totals[None, :] - free.sum(axis=-1)
            G[:, :, self.rest] = (resid / len(self.rest))[..., None]
            if np.any(G < 0) or np.any(G > 1):
                G = repair(G, self.totals)
        else:
            G = repair(G, self.totals)
        return G

    def to_vector(self, G):
        return G[..., self.free].reshape(G.shape[0], -1)

    def to_bits(self, x):
        G = np.repeat(self.to_levels(x), self.k, axis=-1)
        return levels_to_bits(G, self.c)


def prefix_offset(T, mode, W, m_s, prefix):
    """First optimized position: the first window start (tailbiting) or straddling both chain ends."""
    if mode == "tailbiting":
        return (m_s - (W - 1)) % T
    return (T - prefix // 2) % T


def optimize(objective, c, config=OptimizerConfig(), log=None):
    """Minimize the threshold over bit mappers with DE/rand/1/bin; the baseline is seeded."""
    n_cols = objective.n_cols
    par = _Parametrization(c, n_cols, config)
    rng = np.random.default_rng(config.seed)
    NP = config.population
    base_G = np.full((1, c.n_levels, par.n_groups), 1.0)
    base_G = repair(base_G, par.totals)
    pop = rng.dirichlet(np.ones(c.n_levels), size=(NP, len(par.free))).transpose(0, 2, 1).reshape(NP, -1)
    pop[0] = par.to_vector(base_G)[0]
    pop = par.to_vector(par.to_levels(pop))
    cache = {}

    def evaluate(X):
        bits = par.to_bits(X)
        keys = [np.round(b, 12).tobytes() for b in bits]
        todo = [i for i, k in enumerate(keys) if k not in cache]
        if todo and config.max_buffer is not None:
            T = config.n_positions or n_cols
            ok = [buffer_requirement(bits[i], c.m, T) <= config.max_buffer + 1e-9 for i in todo]
            for i, good in zip(todo, ok):
                if not good:
                    cache[keys[i]] = np.inf
            todo = [i for i, good in zip(todo, ok) if good]
        if todo:
            vals = objective(bits[todo])
            for i, v in zip(todo, vals):
                cache[keys[i]] = np.inf if np.isnan(v) else float(v)
        return np.array([cache[k] for k in keys])

    fit = evaluate(pop)
    baseline = float(fit[0])
    trace = [(0, float(fit.min()), float(np.mean(fit[np.isfinite(fit)])) if np.isfinite(fit).any() else np.inf)]
    stale = 0
    for gen in range(1, config.generations + 1):
        idx = np.array([rng.choice(np.delete(np.arange(NP), i), 3, replace=False) for i in range(NP)])
        mutant = pop[idx[:, 0]] + config.F * (pop[idx[:, 1]] - pop[idx[:, 2]])
        cross = rng.random(pop.shape) < config.CR
        cross[np.arange(NP), rng.integers(0, pop.shape[1], NP)] = True
        trial = np.where(cross, mutant, pop)
        trial = par.to_vector(par.to_levels(trial))
        tf = evaluate(trial)
        better = tf <= fit
        prev_best = fit.min()
        pop[better] = trial[better]
        fit[better] = tf[better]
        finite = fit[np.isfinite(fit)]
        trace.append((gen, float(fit.min()), float(finite.mean()) if len(finite) else np.inf))
        if log is not None:
            log(gen, fit.min(), trace[-1][2])
        stale = stale + 1 if fit.min() >= prev_best - 1e-12 else 0
        if config.patience is not None and stale >= config.patience:
            break
    best = int(np.argmin(fit))
    A = par.to_bits(pop[best])[0]
    return OptimizeResult(BitMapperMatrix(A, seed=config.seed), float(fit[best]), baseline, trace)


# ---------------------------------------------------------------------------
# finite length


def _largest_remainder(x, total):
    fl = np.floor(x).astype(int)
    short = int(total - fl.sum())
    if short > 0:
        fl[np.argsort(-(x - fl), kind="stable")[:short]] += 1
    return fl


def round_to_finite(A, bits_per_column, balance_rows=True):
    """Integer allocation with exact column sums (largest remainder).

    With ``balance_rows`` every modulation bit also receives the same number
    of coded bits, moving single bits where the rounding residual is largest.
    """
    A = np.asarray(getattr(A, "entries", A), dtype=float)
    m, n = A.shape
    X = A * bits_per_column
    N = np.stack([_largest_remainder(X[:, j], bits_per_column) for j in range(n)], axis=1)
    if balance_rows and (n * bits_per_column) % m == 0:
        target = n * bits_per_column // m
        for _ in range(n * bits_per_column):
            rs = N.sum(axis=1)
            over, under = np.flatnonzero(rs > target), np.flatnonzero(rs < target)
            if not len(over):
                break
            i, k = over[0], under[0]
            resid = (N[i] - X[i]) - (N[k] - X[k])
            resid[N[i] == 0] = -np.inf
            j = int(np.argmax(resid))
            N[i, j] -= 1
            N[k, j] += 1
    return N


def mapper_assignment(counts):
    """Modulation bit and symbol index of every coded bit (column-major coded bit order).

    Inside a column the modulation bits are interleaved round-robin, so the
    uniform allocation reproduces the sequential mapper b_{i,k} = c_{(k-1)m+i}.
    """
    counts = np.asarray(counts, dtype=int)
    m, n = counts.shape
    bits = []
    for j in range(n):
        left = counts[:, j].copy()
        col = []
        while left.sum():
            for i in range(m):
                if left[i]:
                    col.append(i)
                    left[i] -= 1
        bits.append(col)
    mod_bit = np.concatenate([np.array(b, dtype=int) for b in bits])
    symbol = np.empty_like(mod_bit)
    for i in range(m):
        where = np.flatnonzero(mod_bit == i)
        symbol[where] = np.arange(len(where))
    return mod_bit, symbol


def buffer_requirement(A, m, T):
    """Extra buffering, in spatial positions, when positions are encoded one at a time.

    After j positions the modulator can emit min_i sum_{j'<=j} a_ij symbols
    worth of bits per position; everything else waits in the buffer.
    """
    A = np.asarray(getattr(A, "entries", A), dtype=float)
    if A.shape[0] != m:
        raise ValueError("row count must equal m")
    if A.shape[1] % T:
        raise ValueError("columns must split evenly into T positions")
    per_pos = A.reshape(m, T, -1).mean(axis=-1)
    cum = np.cumsum(per_pos, axis=1)
    j = np.arange(1, T + 1)
    return float(np.max(j - m * cum.min(axis=0)))


def stripe_mapper(m, T):
    """Worst-case block mapper: the i-th block of T/m positions goes entirely to bit i."""
    if T % m:
        raise ValueError("T must be divisible by m")
    A = np.zeros((m, T))
    for i in range(m):
        A[i, i * T // m:(i + 1) * T // m] = 1.0
    return BitMapperMatrix(A, "scgldpc")


def save_mapper(fh, A):
    A = A if isinstance(A, BitMapperMatrix) else BitMapperMatrix(A)
    fh.write(f"# m={A.m} n_cols={A.n_cols} mode={A.mode} seed={A.seed}\n")
    np.savetxt(fh, A.entries, fmt="%.17g")


def load_mapper(fh):
    meta = dict(item.split("=") for item in fh.readline().lstrip("#").split())
    a = np.loadtxt(fh, ndmin=2)
    if a.shape != (int(meta["m"]), int(meta["n_cols"])):
        raise ValueError("matrix shape does not match header")
    seed = None if meta["seed"] == "None" else int(meta["seed"])
    return BitMapperMatrix(a, meta["mode"], seed)
