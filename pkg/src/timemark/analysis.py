"""Closed-form error probabilities for the scheme, carried in log space.

Every quantity treats token outcomes as independent Bernoulli trials:
a boosted half of the vocabulary is hit with probability ``p_tok``, a
majority over ``reps`` positions decides each payload bit, BCH absorbs up
to ``t`` bit errors, and Step 2 thresholds a binomial count.  Tails down to
1e-300 and below are fine because nothing is exponentiated until the end.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.special import gammaln, logsumexp

# ---------------------------------------------------------------------------
# binomial tails


def _check_p(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability {p} outside [0, 1]")


def log_binom_pmf(k: np.ndarray | int, n: int, p: float) -> np.ndarray:
    k = np.asarray(k, dtype=np.float64)
    logc = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(k == 0, 0.0, k * np.log(p)) if p > 0 else np.where(k == 0, 0.0, -np.inf)
        b = np.where(k == n, 0.0, (n - k) * np.log1p(-p)) if p < 1 else np.where(k == n, 0.0, -np.inf)
    return logc + a + b


def log_tail_upper(n: int, p: float, k: int) -> float:
    """log Pr(X >= k), X ~ Binomial(n, p)."""
    _check_p(p)
    if k <= 0:
        return 0.0
    if k > n:
        return -math.inf
    return float(logsumexp(log_binom_pmf(np.arange(k, n + 1), n, p)))


def log_tail_lower(n: int, p: float, k: int) -> float:
    """log Pr(X <= k), X ~ Binomial(n, p)."""
    _check_p(p)
    if k < 0:
        return -math.inf
    if k >= n:
        return 0.0
    return float(logsumexp(log_binom_pmf(np.arange(0, k + 1), n, p)))


def exact_tail_upper(n: int, p: float | Fraction, k: int) -> Fraction:
    """Pr(X >= k) as an exact rational in the (exactly represented) p."""
    p = Fraction(p)
    q = 1 - p
    return sum((math.comb(n, j) * p**j * q ** (n - j) for j in range(max(k, 0), n + 1)), Fraction(0))


def exact_tail_lower(n: int, p: float | Fraction, k: int) -> Fraction:
    p = Fraction(p)
    q = 1 - p
    return sum((math.comb(n, j) * p**j * q ** (n - j) for j in range(0, min(k, n) + 1)), Fraction(0))


def _exp(logv: float) -> float:
    return math.exp(logv) if logv > -745.0 else 0.0


# ---------------------------------------------------------------------------
# chained quantities


def token_match_prob(delta: float, g: float = 0.5) -> float:
    """Chance that a sampled token lands in the boosted subset of mass g."""
    if delta < 0:
        raise ValueError("delta must be non-negative")
    if not 0.0 < g < 1.0:
        raise ValueError("green mass g must lie in (0, 1)")
    e = math.exp(delta)
    return g * e / (g * e + 1.0 - g)


def majority_threshold(reps: int) -> int:
    """Smallest hit count that decodes a bit correctly (strict majority)."""
    return reps // 2 + 1


def log_bit_error_prob(p_tok: float, reps: int) -> float:
    if reps < 1:
        raise ValueError("reps must be at least 1")
    return log_tail_lower(reps, p_tok, majority_threshold(reps) - 1)


def bit_correct_prob(p_tok: float, reps: int = 10) -> float:
    if reps < 1:
        raise ValueError("reps must be at least 1")
    return _exp(log_tail_upper(reps, p_tok, majority_threshold(reps)))


def log_payload_failure_prob(q_bit: float, n: int = 63, t: int = 13) -> float:
    """log(1 - p_R) = log Pr(more than t of n bits wrong)."""
    return log_tail_upper(n, q_bit, t + 1)


def payload_recovery_prob(q_bit: float, n: int = 63, t: int = 13) -> float:
    return -math.expm1(log_payload_failure_prob(q_bit, n, t))


def accept_count(verify_count: int, phi: float) -> int:
    """Smallest match count with count / verify_count >= phi."""
    if verify_count < 1:
        raise ValueError("verify_count must be positive")
    if not 0.0 < phi <= 1.0:
        raise ValueError("phi must lie in (0, 1]")
    k = Fraction(phi).limit_denominator(10**9) * verify_count
    return math.ceil(k)


def log_false_rejection_prob(p_match: float, verify_count: int = 315, phi: float = 0.65) -> float:
    return log_tail_lower(verify_count, p_match, accept_count(verify_count, phi) - 1)


def false_rejection_prob(p_match: float, verify_count: int = 315, phi: float = 0.65) -> float:
    return _exp(log_false_rejection_prob(p_match, verify_count, phi))


def log_false_acceptance_prob(verify_count: int = 315, phi: float = 0.65, p_rand: float = 0.5) -> float:
    return log_tail_upper(verify_count, p_rand, accept_count(verify_count, phi))


def false_acceptance_prob(verify_count: int = 315, phi: float = 0.65, p_rand: float = 0.5) -> float:
    return _exp(log_false_acceptance_prob(verify_count, phi, p_rand))


# ---------------------------------------------------------------------------
# report


@dataclass(frozen=True)
class AnalysisParams:
    delta: float = 2.5
    reps_stage2: int = 10
    n: int = 63
    t: int = 13
    verify_count: int = 315
    phi: float = 0.65
    green_mass: float = 0.5

    def __post_init__(self):
        if self.delta < 0 or self.reps_stage2 < 1 or self.n < 1 or self.t < 0 or self.verify_count < 1:
            raise ValueError("analysis parameters must be positive")
        if not 0.5 < self.phi <= 1.0:
            raise ValueError("phi must lie in (0.5, 1]")
        if not 0.0 < self.green_mass < 1.0:
            raise ValueError("green_mass must lie in (0, 1)")


@dataclass(frozen=True)
class Prob:
    value: float
    log_value: float

    @classmethod
    def from_log(cls, logv: float) -> Prob:
        return cls(_exp(logv), logv)

    @classmethod
    def from_value(cls, v: float) -> Prob:
        return cls(v, math.log(v) if v > 0 else -math.inf)

    def log10(self) -> float:
        return self.log_value / math.log(10)


@dataclass(frozen=True)
class ProbReport:
    params: AnalysisParams
    p_tok: Prob
    p_bit: Prob
    q_bit: Prob
    p_R: Prob
    payload_failure: Prob  # 1 - p_R
    false_rejection: Prob
    false_acceptance: Prob
    accept_count: int
    notes: tuple[str, ...] = field(default=())

    def to_json(self) -> dict:
        def enc(p: Prob) -> dict:
            return {"value": p.value, "log_value": p.log_value}
        return {
            "params": vars(self.params),
            "p_tok": enc(self.p_tok),
            "p_bit": enc(self.p_bit),
            "q_bit": enc(self.q_bit),
            "p_R": enc(self.p_R),
            "payload_failure": enc(self.payload_failure),
            "false_rejection": enc(self.false_rejection),
            "false_acceptance": enc(self.false_acceptance),
            "accept_count": self.accept_count,
            "notes": list(self.notes),
        }

    def table(self) -> str:
        rows = [
            ("p_tok  (boosted-subset hit)", self.p_tok),
            ("p_bit  (majority correct)", self.p_bit),
            ("q_bit  (bit error)", self.q_bit),
            ("1-p_R  (payload unrecoverable)", self.payload_failure),
            ("false rejection (correct K, R)", self.false_rejection),
            ("false acceptance (wrong K or R)", self.false_acceptance),
        ]
        lines = [f"{'quantity':34s} {'value':>14s} {'log10':>10s}"]
        for name, p in rows:
            lines.append(f"{name:34s} {p.value:14.7g} {p.log10():10.3f}")
        lines.append(f"accept when matches >= {self.accept_count} of {self.params.verify_count}")
        return "\n".join(lines)


def analyze(params: AnalysisParams | None = None) -> ProbReport:
    params = params or AnalysisParams()
    p_tok = token_match_prob(params.delta, params.green_mass)
    log_q = log_bit_error_prob(p_tok, params.reps_stage2)
    log_p_bit = log_tail_upper(params.reps_stage2, p_tok, majority_threshold(params.reps_stage2))
    q_bit = _exp(log_q)
    log_fail = log_payload_failure_prob(q_bit, params.n, params.t)
    return ProbReport(
        params=params,
        p_tok=Prob.from_value(p_tok),
        p_bit=Prob.from_log(log_p_bit),
        q_bit=Prob.from_log(log_q),
        p_R=Prob(-math.expm1(log_fail), math.log(-math.expm1(log_fail)) if log_fail < 0 else -math.inf),
        payload_failure=Prob.from_log(log_fail),
        false_rejection=Prob.from_log(log_false_rejection_prob(p_tok, params.verify_count, params.phi)),
        false_acceptance=Prob.from_log(log_false_acceptance_prob(params.verify_count, params.phi)),
        accept_count=accept_count(params.verify_count, params.phi),
        notes=("token outcomes treated as independent Bernoulli trials",),
    )
