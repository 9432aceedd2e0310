"""Watermark mechanics shared by the encoder and the decoder.

Seeds are HMAC-SHA-256 outputs keyed by the window key.  A seed drives an
unbiased Fisher-Yates shuffle of the vocabulary whose byte stream is
``SHA-256(seed || counter)``; the first half of the shuffled vocabulary is
the greenlist.  Token positions are 1-based throughout, as are payload bit
indices returned by :func:`allocate`.
"""
from __future__ import annotations

import hashlib
import hmac
import json
import struct
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

STAGE1_TAG = b"timemark/stage1/v1"
STAGE2_TAG = b"timemark/stage2/v1"

_BLOCK_WORDS = 16  # 16-bit words per SHA-256 block


class ConfigError(ValueError):
    """Inconsistent watermark parameters."""


@dataclass(frozen=True)
class WatermarkConfig:
    vocab_size: int = 1024
    m: int = 10
    n: int = 63
    alpha: int = 5
    delta: float = 2.5
    phi: float = 0.65
    length: int = 945
    granularity_seconds: int = 60
    # None hashes the whole generated prefix; k hashes only the last k tokens
    context_width: int | None = None

    def __post_init__(self):
        if self.vocab_size <= 0 or self.vocab_size % 2:
            raise ConfigError(f"vocab_size must be a positive even number, got {self.vocab_size}")
        if self.vocab_size > 1 << 16:
            raise ConfigError("vocab_size above 65536 is not supported by the shuffle stream")
        if self.alpha <= 0 or self.n <= 0 or self.m <= 0:
            raise ConfigError("alpha, n and m must be positive")
        if self.length < self.stage1_length:
            raise ConfigError(f"length {self.length} shorter than alpha*n = {self.stage1_length}")
        if (self.length - self.stage1_length) % self.n:
            raise ConfigError("length - alpha*n must be a multiple of n")
        if self.delta < 0:
            raise ConfigError("delta must be non-negative")
        if not 0.5 < self.phi <= 1.0:
            raise ConfigError("phi must lie in (0.5, 1]")
        if self.context_width is not None and self.context_width < 0:
            raise ConfigError("context_width must be None or non-negative")

    @property
    def stage1_length(self) -> int:
        return self.alpha * self.n

    @property
    def stage2_reps(self) -> int:
        return (self.length - self.stage1_length) // self.n

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> WatermarkConfig:
        return cls(**data)

    def replace(self, **changes) -> WatermarkConfig:
        return WatermarkConfig(**{**asdict(self), **changes})

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


# ---------------------------------------------------------------------------
# prefix hashing

def _check_tokens(tokens: Sequence[int], vocab_size: int | None) -> None:
    for tok in tokens:
        if tok < 0 or (vocab_size is not None and tok >= vocab_size):
            raise ValueError(f"token id {tok} out of range for vocab of {vocab_size}")


def prefix_hash(tokens: Sequence[int], vocab_size: int | None = None) -> bytes:
    """SHA-256 over the token ids, each as a 4-byte big-endian integer."""
    tokens = [int(t) for t in tokens]
    _check_tokens(tokens, vocab_size)
    return hashlib.sha256(b"".join(t.to_bytes(4, "big") for t in tokens)).digest()


def prefix_digests(tokens: Sequence[int], context_width: int | None = None,
                   vocab_size: int | None = None) -> list[bytes]:
    """Digest of the context seen before each position: entry i covers tokens[:i].

    Returns len(tokens) + 1 digests so the caller can also seed the position
    right after the last token.
    """
    tokens = [int(t) for t in tokens]
    _check_tokens(tokens, vocab_size)
    if context_width is not None:
        return [prefix_hash(tokens[max(0, i - context_width):i]) for i in range(len(tokens) + 1)]
    running = hashlib.sha256()
    out = [running.digest()]
    for tok in tokens:
        running.update(tok.to_bytes(4, "big"))
        out.append(running.digest())
    return out


class PrefixHasher:
    """Incremental context digest for autoregressive loops."""

    def __init__(self, context_width: int | None = None):
        self.context_width = context_width
        self._tokens: list[int] = []
        self._running = hashlib.sha256()

    def push(self, token: int) -> None:
        token = int(token)
        self._tokens.append(token)
        if self.context_width is None:
            self._running.update(token.to_bytes(4, "big"))

    def digest(self) -> bytes:
        if self.context_width is None:
            return self._running.digest()
        if self.context_width == 0:
            return prefix_hash([])
        return prefix_hash(self._tokens[-self.context_width:])


# ---------------------------------------------------------------------------
# seeds

def info_bytes(r: Iterable[int]) -> bytes:
    bits = [int(b) for b in r]
    value = 0
    for b in bits:
        if b not in (0, 1):
            raise ValueError("payload bits must be 0/1")
        value = (value << 1) | b
    return len(bits).to_bytes(1, "big") + value.to_bytes((len(bits) + 7) // 8, "big")


def derive_seed(key: bytes, r: Iterable[int] | None, prefix: bytes) -> bytes:
    """Stage-I seed when r is given, Stage-II seed when r is None."""
    if r is None:
        msg = STAGE2_TAG + prefix
    else:
        msg = STAGE1_TAG + info_bytes(r) + prefix
    return hmac.new(key, msg, hashlib.sha256).digest()


# ---------------------------------------------------------------------------
# greenlists

def _stream_words(seed: bytes, start_block: int, nblocks: int) -> tuple[int, ...]:
    buf = b"".join(
        hashlib.sha256(seed + j.to_bytes(4, "big")).digest()
        for j in range(start_block, start_block + nblocks)
    )
    return struct.unpack(f">{nblocks * _BLOCK_WORDS}H", buf)


def swap_indices(seed: bytes, vocab_size: int) -> list[int]:
    """Fisher-Yates partner j for each i = |V|-1 .. 1.

    j is uniform on [0, i]: 16-bit big-endian words from the counter-mode
    stream are masked to the next power of two above i and rejected when
    they exceed i.
    """
    nblocks = -(-(vocab_size + vocab_size // 2) // _BLOCK_WORDS)
    words = _stream_words(seed, 0, nblocks)
    nw = len(words)
    out: list[int] = []
    append = out.append
    p = 0
    i = vocab_size - 1
    while i:
        mask = (1 << i.bit_length()) - 1
        floor = mask >> 1
        while i > floor:
            if p == nw:
                words = words + _stream_words(seed, nw // _BLOCK_WORDS, 8)
                nw = len(words)
            j = words[p] & mask
            p += 1
            if j <= i:
                append(j)
                i -= 1
    return out


def permutation(seed: bytes, vocab_size: int) -> list[int]:
    if vocab_size % 2:
        raise ConfigError("vocab_size must be even")
    perm = list(range(vocab_size))
    for i, j in zip(range(vocab_size - 1, 0, -1), swap_indices(seed, vocab_size)):
        perm[i], perm[j] = perm[j], perm[i]
    return perm


def greenlist(seed: bytes, vocab_size: int) -> np.ndarray:
    """Boolean membership mask of the first half of the seeded permutation."""
    perm = permutation(seed, vocab_size)
    mask = np.zeros(vocab_size, dtype=bool)
    mask[perm[: vocab_size // 2]] = True
    return mask


def is_green(seed: bytes, vocab_size: int, token: int) -> bool:
    """Membership of one token, following it through the shuffle without
    materialising the permutation.  Consumes the same draws as
    :func:`swap_indices`."""
    if vocab_size % 2:
        raise ConfigError("vocab_size must be even")
    nblocks = -(-(vocab_size + vocab_size // 2) // _BLOCK_WORDS)
    words = _stream_words(seed, 0, nblocks)
    nw = len(words)
    p = 0
    pos = int(token)
    i = vocab_size - 1
    while i:
        mask = (1 << i.bit_length()) - 1
        floor = mask >> 1
        while i > floor:
            if p == nw:
                words = words + _stream_words(seed, nw // _BLOCK_WORDS, 8)
                nw = len(words)
            j = words[p] & mask
            p += 1
            if j <= i:
                if pos == i:
                    pos = j
                elif pos == j:
                    pos = i
                i -= 1
    return pos < vocab_size // 2


# ---------------------------------------------------------------------------
# allocation and biasing

def allocate(i: int, cfg: WatermarkConfig) -> int:
    """Payload bit index (1-based) carried by token position i (1-based)."""
    if not 1 <= i <= cfg.length:
        raise IndexError(f"position {i} outside 1..{cfg.length}")
    s1 = cfg.stage1_length
    if i <= s1:
        return (i - 1) % cfg.n + 1
    return (i - s1 - 1) % cfg.n + 1


def allocation(cfg: WatermarkConfig) -> np.ndarray:
    """0-based bit index for every 0-based position, shape (length,)."""
    return np.array([allocate(i, cfg) - 1 for i in range(1, cfg.length + 1)], dtype=np.int64)


def apply_bias(dist: np.ndarray, mask: np.ndarray, bit: int, delta: float) -> np.ndarray:
    """Scale the target half (green for bit 1, red for bit 0) by e^delta."""
    p = np.asarray(dist, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if p.shape != mask.shape:
        raise ValueError(f"distribution shape {p.shape} does not match mask {mask.shape}")
    if np.any(p < 0) or not np.isfinite(p).all():
        raise ValueError("distribution has negative or non-finite entries")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"distribution sums to {p.sum()!r}, not 1")
    if delta < 0:
        raise ValueError("delta must be non-negative")
    if bit not in (0, 1):
        raise ValueError("bit must be 0 or 1")
    target = mask if bit == 1 else ~mask
    out = np.where(target, p * np.exp(delta), p)
    return out / out.sum()
