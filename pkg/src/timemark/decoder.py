"""Recovering and verifying the generation window of a document.

Step 1 rebuilds the Stage-II greenlists for a candidate key, majority-votes
each payload bit over its Stage-II positions and BCH-decodes the result.
Step 2 rebuilds the Stage-I greenlists from the recovered ``R`` and scores
how many Stage-I tokens sit in the half the re-encoded payload asked for.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import gf_bch
from .encoder import WatermarkedDocument
from .keychain import KeyVault, Role
from .wm_core import WatermarkConfig, allocation, derive_seed, is_green, prefix_digests


class DocumentLengthError(ValueError):
    """Document does not have the configured length."""


class Step1Status(enum.Enum):
    RECOVERED = "Recovered"
    ECC_FAILURE = "EccFailure"


class Decision(enum.Enum):
    PASS = "Pass"
    FAIL = "Fail"


class Verdict(enum.Enum):
    IDENTIFIED = "Identified"
    NO_WATERMARK = "NoWatermark"
    AMBIGUOUS = "Ambiguous"


@dataclass(frozen=True)
class Step1Result:
    status: Step1Status
    p_hat: np.ndarray  # raw majority-vote bits
    r_hat: np.ndarray | None
    green_hits: np.ndarray  # per payload bit
    reps: int
    errors_corrected: int = 0


@dataclass(frozen=True)
class VerificationReport:
    window: int
    step1_status: Step1Status
    recovered_r: np.ndarray | None
    score: float
    matched: int
    verified: int
    decision: Decision
    phi: float
    errors_corrected: int = 0
    # "recovered": scored with the ECC output; "nearest_codeword": diagnostic
    # score after an ECC failure; "none": not scored
    score_basis: str = "recovered"

    def to_json(self) -> dict:
        return {
            "window": self.window,
            "step1_status": self.step1_status.value,
            "recovered_r": None if self.recovered_r is None else gf_bch.bits_to_hex(self.recovered_r),
            "errors_corrected": self.errors_corrected,
            "score": self.score,
            "score_basis": self.score_basis,
            "matched": self.matched,
            "verified": self.verified,
            "decision": self.decision.value,
            "phi": self.phi,
        }


@dataclass(frozen=True)
class IdentificationResult:
    verdict: Verdict
    window: int | None
    reports: tuple[VerificationReport, ...] = field(default=())

    @property
    def passing_windows(self) -> tuple[VerificationReport, ...]:
        return tuple(r for r in self.reports if r.decision is Decision.PASS)

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "window": self.window,
            "passing_windows": [r.window for r in self.passing_windows],
            "reports": [r.to_json() for r in self.reports],
        }


def _tokens(doc: WatermarkedDocument | Sequence[int], cfg: WatermarkConfig) -> list[int]:
    tokens = list(doc.tokens if isinstance(doc, WatermarkedDocument) else doc)
    if len(tokens) != cfg.length:
        raise DocumentLengthError(f"document has {len(tokens)} tokens, expected {cfg.length}")
    if any(t < 0 or t >= cfg.vocab_size for t in tokens):
        raise ValueError(f"document contains token ids outside [0, {cfg.vocab_size})")
    return tokens


def decode_step1(doc, key: bytes, cfg: WatermarkConfig,
                 digests: list[bytes] | None = None) -> Step1Result:
    tokens = _tokens(doc, cfg)
    if digests is None:
        digests = prefix_digests(tokens, cfg.context_width)
    alloc = allocation(cfg)
    hits = np.zeros(cfg.n, dtype=np.int64)
    for idx in range(cfg.stage1_length, cfg.length):
        seed = derive_seed(key, None, digests[idx])
        if is_green(seed, cfg.vocab_size, tokens[idx]):
            hits[alloc[idx]] += 1
    reps = cfg.stage2_reps
    # strict majority; a tie falls to 0
    p_hat = (2 * hits > reps).astype(np.uint8)
    out = gf_bch.decode(p_hat)
    if not out.ok:
        return Step1Result(Step1Status.ECC_FAILURE, p_hat, None, hits, reps)
    return Step1Result(Step1Status.RECOVERED, p_hat, out.info, hits, reps, out.errors_corrected)


def verify_step2(doc, key: bytes, r_hat: Sequence[int], p_hat: Sequence[int] | None,
                 cfg: WatermarkConfig, digests: list[bytes] | None = None) -> tuple[float, int, Decision]:
    """Score Stage-I agreement; ``p_hat`` defaults to ``encode(r_hat)``."""
    tokens = _tokens(doc, cfg)
    if digests is None:
        digests = prefix_digests(tokens, cfg.context_width)
    if p_hat is None:
        p_hat = gf_bch.encode(r_hat)
    p_hat = np.asarray(p_hat, dtype=np.uint8)
    alloc = allocation(cfg)
    matched = 0
    for idx in range(cfg.stage1_length):
        seed = derive_seed(key, r_hat, digests[idx])
        green = is_green(seed, cfg.vocab_size, tokens[idx])
        matched += green == bool(p_hat[alloc[idx]])
    score = matched / cfg.stage1_length
    return score, matched, Decision.PASS if score >= cfg.phi else Decision.FAIL


def verify_window(doc, key: bytes, window: int, cfg: WatermarkConfig,
                  digests: list[bytes] | None = None,
                  fallback_score: bool = False) -> VerificationReport:
    """Step 1 then Step 2 for one candidate window.

    With ``fallback_score`` an ECC failure is still scored against the
    nearest codeword so the report carries a chance-level statistic; the
    decision stays Fail.
    """
    tokens = _tokens(doc, cfg)
    if digests is None:
        digests = prefix_digests(tokens, cfg.context_width)
    s1 = decode_step1(tokens, key, cfg, digests)
    if s1.status is Step1Status.ECC_FAILURE:
        if not fallback_score:
            return VerificationReport(window, s1.status, None, 0.0, 0, cfg.stage1_length,
                                      Decision.FAIL, cfg.phi, score_basis="none")
        info, _ = gf_bch.nearest_codeword(s1.p_hat)
        r_near = gf_bch.int_to_bits(info, gf_bch.K)
        score, matched, _ = verify_step2(tokens, key, r_near, None, cfg, digests)
        return VerificationReport(window, s1.status, None, score, matched, cfg.stage1_length,
                                  Decision.FAIL, cfg.phi, score_basis="nearest_codeword")
    score, matched, decision = verify_step2(tokens, key, s1.r_hat, None, cfg, digests)
    return VerificationReport(window, s1.status, s1.r_hat, score, matched, cfg.stage1_length,
                              decision, cfg.phi, s1.errors_corrected)


KeyLookup = Callable[[int], bytes]


def authority_lookup(vault: KeyVault) -> KeyLookup:
    return lambda t: vault.read_key(Role.AUTHORITY, t)


def identify_time(doc, windows: Iterable[int], keys: KeyVault | KeyLookup,
                  cfg: WatermarkConfig,
                  fallback_scores: bool | Iterable[int] = False) -> IdentificationResult:
    """Verify every candidate window; exactly one pass identifies the window.

    ``fallback_scores`` (all windows, or a collection of them) requests the
    diagnostic nearest-codeword score when Step 1 fails.
    """
    windows = list(windows)
    if not windows:
        raise ValueError("candidate window set is empty")
    if len(set(windows)) != len(windows):
        raise ValueError("candidate windows must be distinct")
    lookup = authority_lookup(keys) if isinstance(keys, KeyVault) else keys
    tokens = _tokens(doc, cfg)
    digests = prefix_digests(tokens, cfg.context_width)
    if isinstance(fallback_scores, bool):
        scored = set(windows) if fallback_scores else set()
    else:
        scored = set(fallback_scores)
    reports = tuple(verify_window(tokens, lookup(t), t, cfg, digests, t in scored) for t in windows)
    passing = [r for r in reports if r.decision is Decision.PASS]
    if len(passing) == 1:
        return IdentificationResult(Verdict.IDENTIFIED, passing[0].window, reports)
    if not passing:
        return IdentificationResult(Verdict.NO_WATERMARK, None, reports)
    return IdentificationResult(Verdict.AMBIGUOUS, None, reports)
