"""Polarization-multiplexed square QAM over the discrete-time AWGN channel.

A PM-QAM symbol is the Cartesian product of four identical Gray-labeled PAM
constellations, one per real dimension (xI, xQ, yI, yQ). The SNR ``rho`` is
Es/N0 per polarization with unit symbol energy per polarization, so every real
dimension carries energy 1/2 and noise variance 1/(2 rho).

Bit ``i`` of the 4D label lives in real dimension ``i // k`` at PAM label
position ``i % k`` (MSB first), where ``k = log2(order_per_dim)``. LLRs are
positive when bit 0 is more likely.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import logsumexp, ndtr

_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite_e.hermegauss(160)
_GH_WEIGHTS = _GH_WEIGHTS / _GH_WEIGHTS.sum()


def db2lin(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def lin2db(x):
    return 10.0 * np.log10(x)


def h2(p):
    """Binary entropy in bits (vectorized, h2(0) = h2(1) = 0)."""
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -p * np.log2(p) - (1 - p) * np.log2(1 - p)
    return np.where((p <= 0) | (p >= 1), 0.0, out)


def gray_code(k):
    u = np.arange(2**k)
    return u ^ (u >> 1)


@dataclass(frozen=True)
class Constellation:
    """PM square QAM built from a Gray-labeled PAM per real dimension."""

    order_per_dim: int

    @property
    def bits_per_dim(self):
        return int(np.log2(self.order_per_dim))

    @property
    def m(self):
        return 4 * self.bits_per_dim

    @cached_property
    def pam_levels(self):
        """PAM amplitudes in ascending order, energy 1/2 per real dimension."""
        M = self.order_per_dim
        delta = np.sqrt(3.0 / (2.0 * (M * M - 1)))
        return (2 * np.arange(M) - (M - 1)) * delta

    @cached_property
    def pam_labels(self):
        """Label bits (M x k, MSB first) of each ascending PAM level."""
        k = self.bits_per_dim
        g = gray_code(k)
        return ((g[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(np.uint8)

    @cached_property
    def level_of_label(self):
        """Inverse Gray map: PAM level index for each integer label."""
        inv = np.empty(self.order_per_dim, dtype=int)
        inv[gray_code(self.bits_per_dim)] = np.arange(self.order_per_dim)
        return inv

    @cached_property
    def protection_level(self):
        """Protection level per modulation bit, 0 = best protected."""
        return np.tile(np.arange(self.bits_per_dim), 4)

    @property
    def n_levels(self):
        return self.bits_per_dim

    @cached_property
    def labels(self):
        """All 2^m labels as an (2^m, m) bit array; row index = label integer."""
        idx = np.arange(2**self.m)
        return ((idx[:, None] >> np.arange(self.m - 1, -1, -1)) & 1).astype(np.uint8)

    @cached_property
    def points(self):
        """All 2^m points as (2^m, 2) complex array (x and y polarization)."""
        return self.modulate(self.labels)

    def modulate(self, bits):
        """Map bits of shape (..., m) to 4D symbols of shape (..., 2) complex."""
        bits = np.asarray(bits)
        if bits.shape[-1] != self.m:
            raise ValueError(f"last axis must have {self.m} bits, got {bits.shape[-1]}")
        k = self.bits_per_dim
        weights = 1 << np.arange(k - 1, -1, -1)
        lab = bits.reshape(bits.shape[:-1] + (4, k)) @ weights
        re = self.pam_levels[self.level_of_label[lab]]
        return re[..., 0::2] + 1j * re[..., 1::2]


def build_constellation(order_per_dim, labeling="gray"):
    """PM-QAM constellation with ``order_per_dim`` PAM levels per real dimension.

    order 2 is PM-QPSK (m = 4), 4 is PM-16-QAM (m = 8), 8 is PM-64-QAM (m = 12).
    """
    if labeling != "gray":
        raise ValueError("only Gray labeling is supported")
    order = int(order_per_dim)
    if order != order_per_dim or order < 2 or order & (order - 1):
        raise ValueError(f"order_per_dim must be a power of two >= 2, got {order_per_dim}")
    return Constellation(order)


def to_real(r):
    """(..., 2) complex 4D symbols -> (..., 4) real coordinates xI, xQ, yI, yQ."""
    r = np.asarray(r)
    if np.iscomplexobj(r):
        out = np.empty(r.shape[:-1] + (4,))
        out[..., 0::2] = r.real
        out[..., 1::2] = r.imag
        return out
    return r


def noise_std(snr_db):
    """Per-real-dimension noise standard deviation."""
    return np.sqrt(1.0 / (2.0 * db2lin(snr_db)))


def add_awgn(symbols, snr_db, rng):
    """Complex AWGN with variance 1/rho per complex dimension."""
    s = noise_std(snr_db)
    return symbols + s * (rng.standard_normal(symbols.shape) + 1j * rng.standard_normal(symbols.shape))


def pam_crossover_probs(c, snr_db):
    """Per-PAM-bit error probabilities of minimum-distance detection.

    ``snr_db`` may be an array; the result has shape ``snr_db.shape + (k,)``.
    """
    x = c.pam_levels
    sigma = np.asarray(noise_std(snr_db))[..., None, None]
    edges = np.concatenate([[-np.inf], (x[1:] + x[:-1]) / 2, [np.inf]])
    # P(detect level v | sent level u) from Gaussian tails
    trans = ndtr((edges[None, 1:] - x[:, None]) / sigma) - ndtr((edges[None, :-1] - x[:, None]) / sigma)
    lab = c.pam_labels
    p = np.empty(sigma.shape[:-2] + (c.bits_per_dim,))
    for b in range(c.bits_per_dim):
        differ = lab[:, b][:, None] != lab[:, b][None, :]
        p[..., b] = np.mean(np.sum(trans * differ, axis=-1), axis=-1)
    return np.clip(p, 0.0, 0.5)


def bit_crossover_probs(c, snr_db):
    """Crossover probabilities p_i of the m parallel BSCs seen by hard detection."""
    return np.concatenate([pam_crossover_probs(c, snr_db)] * 4, axis=-1)


def pam_llr(c, y, snr_db):
    """Exact per-bit LLRs for real PAM observations ``y`` -> shape (len(y), k)."""
    y = np.asarray(y, dtype=float)
    sigma2 = noise_std(snr_db) ** 2
    metric = -((y[..., None] - c.pam_levels) ** 2) / (2 * sigma2)
    lab = c.pam_labels.astype(bool)
    out = np.empty(y.shape + (c.bits_per_dim,))
    for b in range(c.bits_per_dim):
        out[..., b] = logsumexp(metric[..., ~lab[:, b]], axis=-1) - logsumexp(metric[..., lab[:, b]], axis=-1)
    return out


def llr(c, r, snr_db):
    """Exact bitwise LLRs of received 4D symbols (..., 2) complex -> (..., m)."""
    re = to_real(r)
    out = pam_llr(c, re, snr_db)
    return out.reshape(re.shape[:-1] + (c.m,))


def hard_detect(c, r):
    """Minimum-distance detection, returning label bits (..., m)."""
    re = to_real(r)
    x = c.pam_levels
    edges = (x[1:] + x[:-1]) / 2
    lev = np.searchsorted(edges, re)
    bits = c.pam_labels[lev]
    return bits.reshape(re.shape[:-1] + (c.m,))


def _check_same_shape(a, d):
    if np.shape(a) != np.shape(d):
        raise ValueError(f"length mismatch: {np.shape(a)} vs scrambler {np.shape(d)}")


def symmetrize(bits, scrambler_bits):
    """XOR coded bits with the i.i.d. scrambler sequence before modulation."""
    _check_same_shape(bits, scrambler_bits)
    return np.bitwise_xor(np.asarray(bits, dtype=np.uint8), np.asarray(scrambler_bits, dtype=np.uint8))


def desymmetrize(values, scrambler_bits):
    """Undo the scrambler: sign flip for LLRs, XOR for hard bits."""
    _check_same_shape(values, scrambler_bits)
    values = np.asarray(values)
    d = np.asarray(scrambler_bits, dtype=np.uint8)
    if np.issubdtype(values.dtype, np.floating):
        return np.where(d == 1, -values, values)
    return np.bitwise_xor(values.astype(np.uint8), d)


def pam_bit_mi(c, snr_db):
    """Mutual information I(b; y) of each PAM label bit via Gauss-Hermite quadrature.

    ``snr_db`` may be an array; the result has shape ``snr_db.shape + (k,)``.
    """
    x = c.pam_levels
    sigma = np.asarray(noise_std(snr_db))[..., None, None]
    y = x[:, None] + sigma * _GH_NODES[None, :]
    metric = -((y[..., None] - x) ** 2) / (2 * sigma[..., None] ** 2)
    lab = c.pam_labels.astype(bool)
    total = logsumexp(metric, axis=-1)
    mi = np.empty(sigma.shape[:-2] + (c.bits_per_dim,))
    for b in range(c.bits_per_dim):
        l0 = logsumexp(metric[..., ~lab[:, b]], axis=-1)
        l1 = logsumexp(metric[..., lab[:, b]], axis=-1)
        l_own = np.where(lab[:, b][:, None], l1, l0)
        # I = 1 - E[log2(sum over all points / sum over points sharing the bit)]
        cost = (total - l_own) / np.log(2)
        mi[..., b] = 1.0 - np.mean(cost @ _GH_WEIGHTS, axis=-1)
    return np.clip(mi, 0.0, 1.0)


def bit_mutual_info(c, snr_db):
    """Per-modulation-bit mutual informations I_i (length m)."""
    return np.concatenate([pam_bit_mi(c, snr_db)] * 4, axis=-1)


def bicm_capacity(c, snr_db):
    """BICM capacity sum_i I(b_i; r) in bits per 4D symbol."""
    return float(4.0 * pam_bit_mi(c, snr_db).sum())


def ber_constrained_bicm_capacity(c, snr_db, target_ber):
    """BICM rate achievable when a residual bit error rate ``target_ber`` is tolerated.

    Uses the rate-distortion adjustment C / (1 - h2(p_b)).
    """
    if not 0.0 < target_ber < 0.5:
        raise ValueError("target_ber must lie in (0, 0.5)")
    return bicm_capacity(c, snr_db) / (1.0 - float(h2(target_ber)))


def bsc_capacity_avg(p):
    """Capacity 1 - h2(mean p) of the BSC with averaged crossover probability."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or np.any(p > 0.5):
        raise ValueError("crossover probabilities must lie in [0, 0.5]")
    return float(1.0 - h2(p.mean()))


@dataclass(frozen=True)
class ChannelProfile:
    snr_db: float
    p: np.ndarray
    mi: np.ndarray

    @property
    def m(self):
        return len(self.p)


def channel_profile(c, snr_db):
    return ChannelProfile(float(snr_db), bit_crossover_probs(c, snr_db), bit_mutual_info(c, snr_db))


def dump_constellation(c, fh):
    """Write one line per point: index, xI xQ yI yQ, label bits."""
    re = to_real(c.points)
    for idx, (coords, lab) in enumerate(zip(re, c.labels)):
        fh.write(f"{idx} " + " ".join(f"{v:.12g}" for v in coords) + " " + "".join(map(str, lab)) + "\n")
