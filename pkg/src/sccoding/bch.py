"""Shortened binary primitive BCH codes with bounded-distance decoding.

Words are indexed by polynomial degree: bit ``i`` is the coefficient of x^i of
the length 2^nu - 1 mother codeword. Parity occupies degrees 0 .. nu*t - 1,
information the degrees above. Shortening fixes the ``s`` highest-degree
information bits to zero, so a shortened word is simply the first ``n`` bits.
"""
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations

import numpy as np

# primitive polynomials as integers (bit i = coefficient of x^i)
PRIMITIVE_POLYS = {
    3: 0b1011,
    4: 0b10011,
    5: 0b100101,
    6: 0b1000011,
    7: 0b10001001,
    8: 0b100011101,
    9: 0b1000010001,
    10: 0b10000001001,
    11: 0b100000000101,
    12: 0b1000001010011,
}

TABLE_MAX_BITS = 24


@dataclass(frozen=True, eq=False)
class GF2m:
    nu: int
    exp: np.ndarray = field(repr=False)
    log: np.ndarray = field(repr=False)

    @property
    def order(self):
        return (1 << self.nu) - 1

    def mul(self, a, b):
        if a == 0 or b == 0:
            return 0
        return int(self.exp[(self.log[a] + self.log[b]) % self.order])

    def inv(self, a):
        if a == 0:
            raise ZeroDivisionError("zero has no inverse in GF(2^m)")
        return int(self.exp[(-self.log[a]) % self.order])

    def pow_alpha(self, e):
        return int(self.exp[e % self.order])


def gf_tables(nu):
    if nu not in PRIMITIVE_POLYS:
        raise ValueError(f"no primitive polynomial tabulated for nu={nu}")
    poly = PRIMITIVE_POLYS[nu]
    N = (1 << nu) - 1
    exp = np.zeros(2 * N, dtype=np.int64)
    log = np.full(N + 1, -1, dtype=np.int64)
    a = 1
    for i in range(N):
        exp[i] = a
        log[a] = i
        a <<= 1
        if a >> nu:
            a ^= poly
    exp[N:] = exp[:N]
    return GF2m(nu, exp, log)


def _minimal_poly(gf, e):
    """Minimal polynomial of alpha^e as a GF(2) coefficient list (low degree first)."""
    N = gf.order
    conj = []
    c = e % N
    while c not in conj:
        conj.append(c)
        c = (2 * c) % N
    poly = [1]  # coefficients in GF(2^nu)
    for c in conj:
        root = gf.pow_alpha(c)
        new = [0] * (len(poly) + 1)
        for i, p in enumerate(poly):
            new[i + 1] ^= p
            new[i] ^= gf.mul(p, root)
        poly = new
    if any(p not in (0, 1) for p in poly):
        raise ArithmeticError("minimal polynomial not binary")
    return poly


def _polymul_gf2(a, b):
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] ^= y
    return out


def _polymod_gf2(num, den):
    num = list(num)
    d = len(den) - 1
    for i in range(len(num) - 1, d - 1, -1):
        if num[i]:
            for j in range(d + 1):
                num[i - d + j] ^= den[j]
    return num[:d]


@dataclass(frozen=True, eq=False)
class BCHCode:
    nu: int
    t: int
    s: int
    gf: GF2m = field(repr=False)
    generator: tuple = field(repr=False)

    @property
    def N(self):
        return self.gf.order

    @property
    def n(self):
        return self.N - self.s

    @property
    def r(self):
        return self.nu * self.t

    @property
    def k(self):
        return self.N - self.r - self.s

    @property
    def rate(self):
        return self.k / self.n

    @cached_property
    def parity_part(self):
        """P (k x r): parity bits of each unit information vector."""
        r = self.r
        P = np.zeros((self.k, r), dtype=np.uint8)
        for i in range(self.k):
            mono = [0] * (r + i) + [1]
            P[i] = _polymod_gf2(mono, list(self.generator))
        return P

    @cached_property
    def generator_matrix(self):
        G = np.zeros((self.k, self.n), dtype=np.uint8)
        G[:, :self.r] = self.parity_part
        G[:, self.r:] = np.eye(self.k, dtype=np.uint8)
        return G

    @cached_property
    def check_matrix(self):
        """Binary (n x nu*t) matrix: word @ H mod 2 stacks the odd syndromes S_1, S_3, ..."""
        H = np.zeros((self.n, self.r), dtype=np.uint8)
        bits = np.arange(self.nu)
        for col, j in enumerate(range(1, 2 * self.t, 2)):
            vals = self.gf.exp[(np.arange(self.n) * j) % self.N]
            H[:, col * self.nu:(col + 1) * self.nu] = (vals[:, None] >> bits) & 1
        return H

    @cached_property
    def _weights(self):
        return (1 << np.arange(self.r, dtype=np.int64))

    @cached_property
    def syndrome_table(self):
        """Packed-syndrome -> correctable error pattern lookup (None when too large)."""
        if self.r > TABLE_MAX_BITS:
            return None
        Hp = self.check_matrix.astype(np.int64) @ self._weights
        size = 1 << self.r
        table = np.full((size, self.t), -1, dtype=np.int16)
        filled = np.zeros(size, dtype=bool)
        filled[0] = True
        for w in range(1, self.t + 1):
            combos = np.array(list(combinations(range(self.n), w)), dtype=np.int64)
            keys = np.bitwise_xor.reduce(Hp[combos], axis=1)
            fresh = ~filled[keys]
            table[keys[fresh], :w] = combos[fresh]
            filled[keys[fresh]] = True
        return table, filled


def construct(nu, t, s=0):
    nu, t, s = int(nu), int(t), int(s)
    if t < 1 or s < 0:
        raise ValueError("need t >= 1 and s >= 0")
    gf = gf_tables(nu)
    N = gf.order
    if N - nu * t - 1 - s < 1:
        raise ValueError(f"infeasible BCH parameters nu={nu}, t={t}, s={s}")
    g = [1]
    seen = set()
    for e in range(1, 2 * t + 1):
        coset_rep = min((e << i) % N for i in range(nu))
        if coset_rep in seen:
            continue
        seen.add(coset_rep)
        g = _polymul_gf2(g, _minimal_poly(gf, e))
    if len(g) - 1 != nu * t:
        raise ValueError(f"generator degree {len(g) - 1} != nu*t = {nu * t} for nu={nu}, t={t}")
    return BCHCode(nu, t, s, gf, tuple(g))


def encode(code, info):
    info = np.asarray(info, dtype=np.uint8)
    if info.shape[-1] != code.k:
        raise ValueError(f"expected {code.k} information bits, got {info.shape[-1]}")
    parity = (info.astype(np.int64) @ code.parity_part) & 1
    return np.concatenate([parity.astype(np.uint8), info], axis=-1)


def _check_len(code, word):
    word = np.asarray(word, dtype=np.uint8)
    if word.shape[-1] != code.n:
        raise ValueError(f"expected words of length {code.n}, got {word.shape[-1]}")
    return word


def syndromes(code, word):
    """Binary odd-syndrome vector (..., nu*t); zero iff ``word`` is a codeword."""
    word = _check_len(code, word)
    return ((word.astype(np.int64) @ code.check_matrix) & 1).astype(np.uint8)


def _field_syndromes(code, word):
    gf = code.gf
    pos = np.flatnonzero(word)
    S = [0] * (2 * code.t + 1)
    for j in range(1, 2 * code.t + 1):
        acc = 0
        for i in pos:
            acc ^= int(gf.exp[(int(i) * j) % gf.order])
        S[j] = acc
    return S


def _berlekamp_massey(gf, S, t):
    C = [1] + [0] * (2 * t)
    Bp = [1] + [0] * (2 * t)
    L, m, b = 0, 1, 1
    for nidx in range(2 * t):
        d = S[nidx + 1]
        for i in range(1, L + 1):
            d ^= gf.mul(C[i], S[nidx + 1 - i])
        if d == 0:
            m += 1
            continue
        coef = gf.mul(d, gf.inv(b))
        Tm = C[:]
        for i in range(len(Bp) - m):
            C[i + m] ^= gf.mul(coef, Bp[i])
        if 2 * L <= nidx:
            L = nidx + 1 - L
            Bp, b, m = Tm, d, 1
        else:
            m += 1
    return C[:L + 1], L


@dataclass(frozen=True)
class BDDResult:
    word: np.ndarray | None
    flips: int

    @property
    def failed(self):
        return self.word is None


def bdd_decode(code, word):
    """Berlekamp-Massey + Chien search bounded-distance decoding of one word.

    Failure when no codeword is within distance t, or when the nearest
    pattern would touch a shortened (non-transmitted) position.
    """
    word = _check_len(code, word)
    S = _field_syndromes(code, word)
    if not any(S[1:]):
        return BDDResult(word.copy(), 0)
    gf = code.gf
    Lam, L = _berlekamp_massey(gf, S, code.t)
    if L > code.t:
        return BDDResult(None, 0)
    # Chien search: error at position i iff Lambda(alpha^-i) = 0
    locs = []
    lam_log = [(gf.log[c] if c else None) for c in Lam]
    for i in range(gf.order):
        acc = 0
        for d, lg in enumerate(lam_log):
            if lg is not None:
                acc ^= int(gf.exp[(lg - i * d) % gf.order])
        if acc == 0:
            locs.append(i)
    if len(locs) != L or any(i >= code.n for i in locs):
        return BDDResult(None, 0)
    out = word.copy()
    out[locs] ^= 1
    return BDDResult(out, len(locs))


class FastBDD:
    """Batched bounded-distance decoder driven by a complete syndrome table."""

    def __init__(self, code):
        tab = code.syndrome_table
        if tab is None:
            raise ValueError(f"syndrome table would need 2^{code.r} entries; use bdd_decode")
        self.code = code
        self.table, self.correctable = tab
        self.Hp = code.check_matrix.astype(np.int64) @ code._weights

    def packed_syndromes(self, words):
        words = np.asarray(words)
        out = np.zeros(words.shape[:-1], dtype=np.int64)
        for i in range(words.shape[-1]):
            out ^= np.where(words[..., i] != 0, self.Hp[i], 0)
        return out

    def error_patterns(self, words):
        """(..., t) error positions (-1 padded) and a success mask."""
        key = self.packed_syndromes(words)
        return self.table[key], self.correctable[key]

    def decode(self, words):
        """Return (decoded words, success mask); failed words are returned unchanged."""
        words = _check_len(self.code, words).copy()
        pat, ok = self.error_patterns(words)
        flat = words.reshape(-1, words.shape[-1])
        pat = pat.reshape(-1, pat.shape[-1])
        rows, cols = np.nonzero(pat >= 0)
        flat[rows, pat[rows, cols]] ^= 1
        return flat.reshape(words.shape), ok
