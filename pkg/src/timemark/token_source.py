"""Next-token distribution sources.

:class:`SyntheticModel` stands in for a language model.  Its logits at a
given prefix are ``gamma * z`` where ``z`` are standard normal variates
derived from SHA-256 of (model seed, prefix digest, block counter), so the
distribution is a pure function of the seed and the prefix.  ``gamma = 0``
is exactly uniform; larger ``gamma`` gives peakier distributions.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtri, softmax

from .wm_core import prefix_hash


class TokenSource(Protocol):
    vocab_size: int

    def next_distribution(self, prefix: Sequence[int]) -> np.ndarray: ...


@dataclass(frozen=True)
class SyntheticModel:
    model_seed: int = 0
    vocab_size: int = 1024
    gamma: float = 0.0

    def __post_init__(self):
        if self.vocab_size <= 0:
            raise ValueError("vocab_size must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")

    def normals(self, prefix: Sequence[int] = (), digest: bytes | None = None) -> np.ndarray:
        """The standard-normal logit directions at this prefix."""
        if digest is None:
            digest = prefix_hash(prefix, self.vocab_size)
        head = (self.model_seed & (2**64 - 1)).to_bytes(8, "big") + digest
        nblocks = -(-self.vocab_size // 4)  # four uint64 per block
        buf = b"".join(hashlib.sha256(head + j.to_bytes(4, "big")).digest() for j in range(nblocks))
        u = np.frombuffer(buf, dtype=">u8")[: self.vocab_size].astype(np.float64)
        # midpoint of the 2^-64 cell keeps u strictly inside (0, 1)
        return ndtri((u + 0.5) * 2.0**-64)

    def next_distribution(self, prefix: Sequence[int] = (), digest: bytes | None = None) -> np.ndarray:
        if self.gamma == 0.0:
            return np.full(self.vocab_size, 1.0 / self.vocab_size)
        return softmax(self.gamma * self.normals(prefix, digest))


def green_mass(dist: np.ndarray, mask: np.ndarray) -> float:
    dist = np.asarray(dist, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if dist.shape != mask.shape:
        raise ValueError(f"distribution shape {dist.shape} does not match mask {mask.shape}")
    return float(np.clip(dist[mask].sum(), 0.0, 1.0))


def sample_token(dist: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw from a probability vector."""
    cdf = np.cumsum(dist)
    u = rng.random() * cdf[-1]
    return int(min(np.searchsorted(cdf, u, side="right"), len(cdf) - 1))


# ---------------------------------------------------------------------------
# calibration of gamma against an equivalent constant green mass

def biased_target_mass(g: np.ndarray | float, delta: float) -> np.ndarray | float:
    e = np.exp(delta)
    return g * e / (g * e + 1.0 - g)


def _green_mass_samples(gamma: float, z: np.ndarray, masks: np.ndarray) -> np.ndarray:
    probs = softmax(gamma * z, axis=1)
    return (probs * masks).sum(axis=1)


def _calibration_draws(vocab_size: int, samples: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    z = np.stack([SyntheticModel(seed, vocab_size, 1.0).normals([k % vocab_size, k // vocab_size])
                  for k in range(samples)])
    masks = np.zeros((samples, vocab_size), dtype=bool)
    for row in masks:
        row[rng.permutation(vocab_size)[: vocab_size // 2]] = True
    return z, masks


def equivalent_green_mass(gamma: float, delta: float = 2.5, vocab_size: int = 1024,
                          samples: int = 2000, seed: int = 0) -> float:
    """Constant green mass g whose biased target probability equals the
    model's average biased target probability at this gamma.

    The raw mean green mass over random half-splits is 0.5 for any gamma,
    so peakiness is measured through the bias response instead.
    """
    z, masks = _calibration_draws(vocab_size, samples, seed)
    return _equivalent_from_draws(gamma, delta, z, masks)


def _equivalent_from_draws(gamma, delta, z, masks) -> float:
    p = float(np.mean(biased_target_mass(_green_mass_samples(gamma, z, masks), delta)))
    e = np.exp(delta)
    # invert p = g e / (g e + 1 - g)
    return p / (e - p * (e - 1.0))


def calibrate_gamma(target_green_mass: float = 0.35, delta: float = 2.5, vocab_size: int = 1024,
                    samples: int = 2000, seed: int = 0, gamma_max: float = 20.0) -> float:
    """Gamma whose equivalent green mass (see above) equals the target."""
    if not 0.0 < target_green_mass < 0.5:
        raise ValueError("target green mass must lie in (0, 0.5)")
    z, masks = _calibration_draws(vocab_size, samples, seed)
    f = lambda gm: _equivalent_from_draws(gm, delta, z, masks) - target_green_mass  # noqa: E731
    return float(brentq(f, 0.0, gamma_max, xtol=1e-6))
