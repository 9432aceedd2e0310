"""Two-stage watermarked generation.

For each request a fresh 10-bit ``R`` is drawn and BCH-expanded to the
63-bit payload ``P``.  Positions ``1..alpha*n`` are seeded with
``(K_t, R, prefix)``, the rest with ``(K_t, prefix)`` only.  At every
position the half of the vocabulary selected by the payload bit is boosted
by ``e^delta`` before sampling.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import gf_bch
from .token_source import SyntheticModel, TokenSource, sample_token
from .wm_core import PrefixHasher, WatermarkConfig, allocation, apply_bias, derive_seed, greenlist

_PAYLOAD_STREAM = 0
_TOKEN_STREAM = 1


def request_rng(rng_seed: int, stream: int) -> np.random.Generator:
    """Independent generator for one purpose, fanned out from a request seed."""
    return np.random.default_rng(np.random.SeedSequence(int(rng_seed), spawn_key=(stream,)))


@dataclass(frozen=True)
class GenerationRequest:
    window: int
    cfg: WatermarkConfig = field(default_factory=WatermarkConfig)
    model: TokenSource = field(default_factory=SyntheticModel)
    rng_seed: int = 0

    def __post_init__(self):
        if self.model.vocab_size != self.cfg.vocab_size:
            raise ValueError(
                f"model vocab {self.model.vocab_size} != config vocab {self.cfg.vocab_size}"
            )


@dataclass(frozen=True)
class WatermarkedDocument:
    tokens: tuple[int, ...]
    note: str | None = None

    def __len__(self) -> int:
        return len(self.tokens)

    def to_json(self) -> dict:
        out: dict = {"tokens": list(self.tokens)}
        if self.note is not None:
            out["note"] = self.note
        return out

    @classmethod
    def from_json(cls, data: dict) -> WatermarkedDocument:
        if not isinstance(data, dict) or not isinstance(data.get("tokens"), list):
            raise ValueError("document record must be an object with a 'tokens' list")
        toks = data["tokens"]
        if not all(isinstance(t, int) and not isinstance(t, bool) for t in toks):
            raise ValueError("token ids must be integers")
        return cls(tuple(toks), data.get("note"))


@dataclass(frozen=True)
class PositionRecord:
    position: int  # 1-based
    stage: int
    bit: int
    green: bool


@dataclass(frozen=True)
class EncodeTrace:
    r: np.ndarray
    p: np.ndarray
    positions: tuple[PositionRecord, ...]

    def stage2_target_rate(self) -> float:
        recs = [x for x in self.positions if x.stage == 2]
        return float(np.mean([x.green == bool(x.bit) for x in recs]))


def sample_payload(rng: np.random.Generator, m: int = gf_bch.K) -> np.ndarray:
    return rng.integers(0, 2, size=m, dtype=np.uint8)


def encode_document(req: GenerationRequest, key: bytes, trace: bool = False,
                    payload: Sequence[int] | None = None) -> tuple[WatermarkedDocument, EncodeTrace | None]:
    """Generate ``cfg.length`` watermarked tokens under ``key``.

    ``payload`` overrides the random info word; only the fixed-payload
    baseline in :mod:`timemark.attack_sim` uses it.
    """
    cfg = req.cfg
    if payload is None:
        r = sample_payload(request_rng(req.rng_seed, _PAYLOAD_STREAM), cfg.m)
    else:
        r = np.asarray(payload, dtype=np.uint8)
    p = gf_bch.encode(r)
    if len(p) != cfg.n:
        raise ValueError(f"payload length {len(p)} does not match cfg.n={cfg.n}")
    rng = request_rng(req.rng_seed, _TOKEN_STREAM)
    alloc = allocation(cfg)
    hasher = PrefixHasher(cfg.context_width)
    s1 = cfg.stage1_length
    tokens: list[int] = []
    records: list[PositionRecord] = []
    for idx in range(cfg.length):
        digest = hasher.digest()
        seed = derive_seed(key, r if idx < s1 else None, digest)
        mask = greenlist(seed, cfg.vocab_size)
        bit = int(p[alloc[idx]])
        dist = _model_distribution(req.model, tokens)
        tok = sample_token(apply_bias(dist, mask, bit, cfg.delta), rng)
        tokens.append(tok)
        hasher.push(tok)
        if trace:
            records.append(PositionRecord(idx + 1, 1 if idx < s1 else 2, bit, bool(mask[tok])))
    doc = WatermarkedDocument(tuple(tokens))
    if not trace:
        return doc, None
    return doc, EncodeTrace(r.copy(), p, tuple(records))


def generate(req: GenerationRequest, key: bytes) -> WatermarkedDocument:
    """Public generation entry point; the payload is discarded."""
    return encode_document(req, key)[0]


def generate_plain(model: TokenSource, length: int, rng_seed: int) -> WatermarkedDocument:
    """Unwatermarked sampling straight from the model."""
    rng = request_rng(rng_seed, _TOKEN_STREAM)
    tokens: list[int] = []
    for _ in range(length):
        tokens.append(sample_token(_model_distribution(model, tokens), rng))
    return WatermarkedDocument(tuple(tokens))


def _model_distribution(model: TokenSource, tokens: list[int]) -> np.ndarray:
    if isinstance(model, SyntheticModel) and model.gamma == 0.0:
        return np.full(model.vocab_size, 1.0 / model.vocab_size)
    return model.next_distribution(tokens)


# ---------------------------------------------------------------------------
# JSON lines

def write_documents(path: str | Path, docs: Iterable[WatermarkedDocument]) -> None:
    with open(path, "w") as fh:
        for doc in docs:
            fh.write(json.dumps(doc.to_json(), separators=(",", ":")) + "\n")


def read_documents(path: str | Path) -> list[WatermarkedDocument]:
    docs = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                docs.append(WatermarkedDocument.from_json(json.loads(line)))
            except (json.JSONDecodeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed document ({exc})") from exc
    return docs
