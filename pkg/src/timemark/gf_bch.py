"""GF(2^6) arithmetic and the binary primitive BCH(63, 10) code.

Polynomials over GF(2) are stored as Python ints, bit ``e`` holding the
coefficient of ``x**e``.  Bit vectors (info words, codewords) are uint8
numpy arrays read most-significant coefficient first, so ``bits[0]`` of a
codeword is the coefficient of ``x**62``.

Encoding is systematic: the 10 info bits occupy ``bits[:10]`` and the 53
parity bits follow.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

PRIMITIVE_POLY = 0b1000011  # x^6 + x + 1
FIELD_ORDER = 64
N = 63
K = 10
T = 13


class ShapeError(ValueError):
    """A bit vector has the wrong length or non-binary entries."""


# ---------------------------------------------------------------------------
# GF(2^6)

def _build_tables() -> tuple[list[int], list[int]]:
    exp = [0] * (2 * N)
    log = [0] * FIELD_ORDER
    x = 1
    for i in range(N):
        exp[i] = x
        log[x] = i
        x <<= 1
        if x & FIELD_ORDER:
            x ^= PRIMITIVE_POLY
    for i in range(N, 2 * N):
        exp[i] = exp[i - N]
    return exp, log


EXP, LOG = _build_tables()


def gf_add(a: int, b: int) -> int:
    return a ^ b


def gf_mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return EXP[LOG[a] + LOG[b]]


def gf_inv(a: int) -> int:
    if a == 0:
        raise ZeroDivisionError("0 has no inverse in GF(64)")
    return EXP[(N - LOG[a]) % N]


def gf_pow(a: int, e: int) -> int:
    if a == 0:
        return 0 if e else 1
    return EXP[(LOG[a] * e) % N]


def alpha_pow(e: int) -> int:
    return EXP[e % N]


def gf_mul_slow(a: int, b: int) -> int:
    """Carry-less multiply then reduce; table-free reference for tests."""
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if a & FIELD_ORDER:
            a ^= PRIMITIVE_POLY
    return r


# ---------------------------------------------------------------------------
# GF(2)[x] helpers

def poly2_mul(a: int, b: int) -> int:
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
    return r


def poly2_mod(a: int, m: int) -> int:
    dm = m.bit_length()
    while a.bit_length() >= dm:
        a ^= m << (a.bit_length() - dm)
    return a


def minimal_polynomial(e: int) -> int:
    """Minimal polynomial over GF(2) of alpha**e, as a GF(2)[x] int."""
    coset = []
    x = e % N
    while x not in coset:
        coset.append(x)
        x = (2 * x) % N
    # prod (x - alpha^c) with GF(64) coefficients, lowest degree first
    poly = [1]
    for c in coset:
        root = alpha_pow(c)
        nxt = [0] * (len(poly) + 1)
        for i, coef in enumerate(poly):
            nxt[i + 1] ^= coef
            nxt[i] ^= gf_mul(coef, root)
        poly = nxt
    out = 0
    for i, coef in enumerate(poly):
        if coef not in (0, 1):
            raise ArithmeticError("minimal polynomial has non-binary coefficient")
        out |= coef << i
    return out


# ---------------------------------------------------------------------------
# BCH(63, 10)

class DecodeStatus(enum.Enum):
    CORRECTED = "Corrected"
    UNCORRECTABLE = "Uncorrectable"


@dataclass(frozen=True)
class DecodeOutcome:
    status: DecodeStatus
    info: np.ndarray | None = None
    errors_corrected: int = 0

    @property
    def ok(self) -> bool:
        return self.status is DecodeStatus.CORRECTED


@dataclass(frozen=True)
class BchCode:
    n: int
    k: int
    t: int
    generator: int
    d_min: int = field(default=0)

    @property
    def parity_bits(self) -> int:
        return self.n - self.k


def _generator_polynomial(t: int) -> int:
    g = 1
    seen: set[int] = set()
    for e in range(1, 2 * t + 1):
        rep = min((e << s) % N for s in range(6))
        if rep in seen:
            continue
        seen.add(rep)
        g = poly2_mul(g, minimal_polynomial(e))
    return g


@lru_cache(maxsize=None)
def build_code() -> BchCode:
    """The fixed BCH(63, 10) code; d_min is established by enumeration."""
    g = _generator_polynomial(T)
    k = N - (g.bit_length() - 1)
    if k != K:
        raise ArithmeticError(f"generator degree gives k={k}, expected {K}")
    cb = _codebook_ints(g)
    d_min = min(c.bit_count() for c in cb[1:])
    return BchCode(n=N, k=K, t=T, generator=g, d_min=d_min)


def _encode_int(info: int, g: int) -> int:
    shifted = info << (N - K)
    return shifted | poly2_mod(shifted, g)


@lru_cache(maxsize=None)
def _codebook_ints(g: int) -> tuple[int, ...]:
    return tuple(_encode_int(m, g) for m in range(1 << K))


def bits_to_int(bits) -> int:
    v = 0
    for b in bits:
        v = (v << 1) | int(b)
    return v


def int_to_bits(value: int, length: int) -> np.ndarray:
    return np.array([(value >> (length - 1 - j)) & 1 for j in range(length)], dtype=np.uint8)


def _check_bits(bits, length: int, what: str) -> np.ndarray:
    arr = np.asarray(bits, dtype=np.int64).ravel()
    if arr.shape[0] != length:
        raise ShapeError(f"{what} must have {length} bits, got {arr.shape[0]}")
    if np.any((arr != 0) & (arr != 1)):
        raise ShapeError(f"{what} must contain only 0/1")
    return arr.astype(np.uint8)


def encode(info) -> np.ndarray:
    """Systematically encode a 10-bit info word into a 63-bit codeword."""
    info = _check_bits(info, K, "info word")
    return int_to_bits(_encode_int(bits_to_int(info), build_code().generator), N)


def codebook() -> np.ndarray:
    """All 1024 codewords as a (1024, 63) uint8 array, row m encodes info m."""
    g = build_code().generator
    return np.array([int_to_bits(c, N) for c in _codebook_ints(g)], dtype=np.uint8)


def syndromes(word: int, count: int = 2 * T) -> list[int]:
    """S_i = r(alpha^i) for i = 1..count."""
    positions = [e for e in range(N) if (word >> e) & 1]
    out = []
    for i in range(1, count + 1):
        s = 0
        for e in positions:
            s ^= EXP[(i * e) % N]
        out.append(s)
    return out


def berlekamp_massey(synd: list[int]) -> list[int]:
    """Shortest LFSR (error locator Lambda, lowest degree first) for synd."""
    lam = [1]
    prev = [1]
    ell = 0
    shift = 1
    b = 1
    for r, s in enumerate(synd):
        d = s
        for i in range(1, ell + 1):
            if i < len(lam):
                d ^= gf_mul(lam[i], synd[r - i])
        if d == 0:
            shift += 1
            continue
        coef = gf_mul(d, gf_inv(b))
        new = lam + [0] * max(0, len(prev) + shift - len(lam))
        for i, p in enumerate(prev):
            new[i + shift] ^= gf_mul(coef, p)
        if 2 * ell <= r:
            prev = lam
            ell = r + 1 - ell
            b = d
            shift = 1
        else:
            shift += 1
        lam = new
    while len(lam) > 1 and lam[-1] == 0:
        lam.pop()
    return lam


def _poly_eval(poly: list[int], x: int) -> int:
    acc = 0
    for coef in reversed(poly):
        acc = gf_mul(acc, x) ^ coef
    return acc


def decode(received) -> DecodeOutcome:
    """Bounded-distance decode up to 13 errors; never guesses beyond that."""
    received = _check_bits(received, N, "received word")
    word = bits_to_int(received)
    synd = syndromes(word)
    if not any(synd):
        return DecodeOutcome(DecodeStatus.CORRECTED, int_to_bits(word >> (N - K), K), 0)
    lam = berlekamp_massey(synd)
    nerr = len(lam) - 1
    if nerr > T:
        return DecodeOutcome(DecodeStatus.UNCORRECTABLE)
    # Chien search: error at x^e iff Lambda(alpha^{-e}) == 0
    err_positions = [e for e in range(N) if _poly_eval(lam, EXP[(N - e) % N]) == 0]
    if len(err_positions) != nerr:
        return DecodeOutcome(DecodeStatus.UNCORRECTABLE)
    for e in err_positions:
        word ^= 1 << e
    if any(syndromes(word)):
        return DecodeOutcome(DecodeStatus.UNCORRECTABLE)
    return DecodeOutcome(DecodeStatus.CORRECTED, int_to_bits(word >> (N - K), K), nerr)


def nearest_codeword(received) -> tuple[int, int]:
    """Exhaustive search: (info index, distance) of the closest codeword.

    Ties resolve to the smallest info index.
    """
    word = bits_to_int(_check_bits(received, N, "received word"))
    best, best_d = 0, N + 1
    for m, c in enumerate(_codebook_ints(build_code().generator)):
        d = (word ^ c).bit_count()
        if d < best_d:
            best, best_d = m, d
    return best, best_d


# ---------------------------------------------------------------------------
# hex serialization (MSB first, zero-padded on the left)

def bits_to_hex(bits) -> str:
    arr = np.asarray(bits, dtype=np.uint8).ravel()
    width = (len(arr) + 3) // 4
    return format(bits_to_int(arr), f"0{width}x")


def hex_to_bits(text: str, length: int) -> np.ndarray:
    value = int(text, 16)
    if value >> length:
        raise ShapeError(f"hex value {text!r} exceeds {length} bits")
    return int_to_bits(value, length)
