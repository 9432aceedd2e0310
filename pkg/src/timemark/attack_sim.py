"""Statistical imitation (spoofing) attack against two payload designs.

``FIXED_PAYLOAD`` is the vulnerable design: the info word is a fixed
function of the window, so every document from that window carries the same
payload and the same Stage-I greenlists.  ``TIMEMARK`` draws a fresh random
info word per document.  Everything else, including the key, the two-stage
seeding and the decoder, is shared.

The attacker knows the mechanism (allocation, BCH, the assumed
window-to-payload rule) but not the key.  It labels each observed token
with the bit it believes was embedded, fits a logistic surrogate on hashed
``(previous token, token)`` features, then samples forgeries from
``p(v | c) * exp(lam * (2y - 1) * s(c, v))``.

Both modes seed greenlists from a one-token context (``context_width=1``),
the setting where context-keyed greenlists recur and can be learned at all.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit
from scipy.stats import t as student_t

from . import gf_bch
from .decoder import Decision, Step1Status, verify_window
from .encoder import GenerationRequest, WatermarkedDocument, encode_document, request_rng
from .keychain import KeyVault
from .token_source import SyntheticModel, sample_token
from .wm_core import WatermarkConfig, allocation

BOS = -1


class Mode(enum.Enum):
    FIXED_PAYLOAD = "fixed_payload"
    TIMEMARK = "timemark"


class TrainingDiverged(RuntimeError):
    def __init__(self, iteration: int, loss: float):
        super().__init__(f"surrogate training diverged at iteration {iteration} (loss={loss})")
        self.iteration = iteration
        self.loss = loss


def attack_watermark_config(**overrides) -> WatermarkConfig:
    """Small-vocabulary, one-token-context configuration used by the attack."""
    return WatermarkConfig(**{"vocab_size": 64, "context_width": 1, **overrides})


def window_info_word(t: int, m: int = gf_bch.K) -> np.ndarray:
    """The public timestamp-to-bits rule: t in binary, MSB first."""
    return gf_bch.int_to_bits(int(t) % (1 << m), m)


@dataclass(frozen=True)
class AttackConfig:
    n_docs: int = 120
    feature_buckets: int = 1 << 16
    iterations: int = 100
    step_size: float = 1.0
    l2: float = 1.0
    lam: float = 4.0
    target_window: int = 5
    heldout_fraction: float = 0.25
    forge_trials: int = 20
    seed: int = 0
    wm: WatermarkConfig = field(default_factory=attack_watermark_config)

    def __post_init__(self):
        if self.n_docs < 1 or self.feature_buckets < 1 or self.iterations < 1 or self.forge_trials < 0:
            raise ValueError("attack sizes must be positive")
        if self.step_size <= 0 or self.lam <= 0 or self.l2 < 0:
            raise ValueError("step_size and lam must be positive, l2 non-negative")
        if not 0.0 < self.heldout_fraction < 1.0:
            raise ValueError("heldout_fraction must lie in (0, 1)")


@dataclass
class AttackCorpus:
    mode: Mode
    cfg: WatermarkConfig
    documents: list[WatermarkedDocument]
    windows: list[int]
    # generator-side ground truth, never shown to the attacker
    true_payloads: list[np.ndarray]


@dataclass(frozen=True)
class Triplets:
    """Struct-of-arrays training set: one row per (document, position)."""
    doc: np.ndarray
    stage: np.ndarray
    context: np.ndarray
    token: np.ndarray
    label: np.ndarray

    def __len__(self) -> int:
        return len(self.label)

    def take(self, idx) -> Triplets:
        return Triplets(self.doc[idx], self.stage[idx], self.context[idx], self.token[idx], self.label[idx])


@dataclass
class SurrogateClassifier:
    weights: np.ndarray
    bias: float
    vocab_size: int
    losses: list[float] = field(default_factory=list)

    @property
    def buckets(self) -> int:
        return len(self.weights)

    def logits(self, context, token) -> np.ndarray:
        idx = feature_index(context, token, self.vocab_size, self.buckets)
        return self.weights[idx] + self.bias

    def predict_proba(self, context, token) -> np.ndarray:
        return expit(self.logits(context, token))


@dataclass(frozen=True)
class Interval:
    estimate: float
    low: float
    high: float
    stderr: float

    def contains(self, x: float) -> bool:
        return self.low <= x <= self.high

    def to_json(self) -> dict:
        return {"estimate": self.estimate, "low": self.low, "high": self.high, "stderr": self.stderr}


@dataclass(frozen=True)
class AttackResult:
    mode: Mode
    heldout_accuracy: Interval  # per-document balanced accuracy
    heldout_raw_accuracy: float
    heldout_size: int
    label_truth_agreement: float
    forged_pass_rate: Interval
    forged_passes: int
    forge_trials: int
    mean_forged_score: float

    def to_json(self) -> dict:
        return {
            "mode": self.mode.value,
            "heldout_balanced_accuracy": self.heldout_accuracy.to_json(),
            "heldout_raw_accuracy": self.heldout_raw_accuracy,
            "heldout_size": self.heldout_size,
            "label_truth_agreement": self.label_truth_agreement,
            "forged_pass_rate": self.forged_pass_rate.to_json(),
            "forged_passes": self.forged_passes,
            "forge_trials": self.forge_trials,
            "mean_forged_score": self.mean_forged_score,
        }


# ---------------------------------------------------------------------------
# features


def feature_index(context, token, vocab_size: int, buckets: int) -> np.ndarray:
    """splitmix64 of the packed (context, token) pair, reduced mod buckets.

    The stage is deliberately left out: the attacker's assumed labels have a
    different class balance in each stage, so a stage feature would score
    above chance on position alone without learning anything about greenlists.
    """
    context = np.asarray(np.asarray(context) + 1, dtype=np.uint64)  # BOS -> 0
    token = np.asarray(token, dtype=np.uint64)
    v = np.uint64(vocab_size)
    z = context * v + token
    with np.errstate(over="ignore"):
        z = z + np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
    return (z % np.uint64(buckets)).astype(np.int64)


# ---------------------------------------------------------------------------
# pipeline steps


def collect_corpus(mode: Mode, n_docs: int, cfg: WatermarkConfig, key: bytes, window: int,
                   model: SyntheticModel | None = None, seed: int = 0) -> AttackCorpus:
    if n_docs < 1:
        raise ValueError("n_docs must be at least 1")
    model = model or SyntheticModel(seed, cfg.vocab_size, 0.0)
    docs, payloads = [], []
    for d in range(n_docs):
        req = GenerationRequest(window, cfg, model, rng_seed=_mix(seed, 1, d))
        fixed = window_info_word(window, cfg.m) if mode is Mode.FIXED_PAYLOAD else None
        doc, trace = encode_document(req, key, trace=True, payload=fixed)
        docs.append(doc)
        payloads.append(trace.p)
    return AttackCorpus(mode, cfg, docs, [window] * n_docs, payloads)


def assumed_payload(window: int, cfg: WatermarkConfig) -> np.ndarray:
    """What the attacker believes was embedded for a window."""
    return gf_bch.encode(window_info_word(window, cfg.m))


def build_triplets(corpus: AttackCorpus) -> Triplets:
    cfg = corpus.cfg
    alloc = allocation(cfg)
    stage = np.where(np.arange(cfg.length) < cfg.stage1_length, 1, 2)
    cols: dict[str, list[np.ndarray]] = {k: [] for k in ("doc", "stage", "context", "token", "label")}
    for d, (doc, t) in enumerate(zip(corpus.documents, corpus.windows)):
        toks = np.asarray(doc.tokens, dtype=np.int64)
        cols["doc"].append(np.full(len(toks), d))
        cols["stage"].append(stage)
        cols["context"].append(np.concatenate([[BOS], toks[:-1]]))
        cols["token"].append(toks)
        cols["label"].append(assumed_payload(t, cfg)[alloc].astype(np.int64))
    return Triplets(**{k: np.concatenate(v) for k, v in cols.items()})


def true_labels(corpus: AttackCorpus) -> np.ndarray:
    alloc = allocation(corpus.cfg)
    return np.concatenate([p[alloc].astype(np.int64) for p in corpus.true_payloads])


def train_surrogate(triplets: Triplets, vocab_size: int, attack_cfg: AttackConfig | None = None) -> SurrogateClassifier:
    """Logistic regression on one-hot hashed features.

    Full-batch gradient steps, each feature's step scaled by the inverse of
    its occurrence count plus the ridge weight (a diagonal preconditioner).
    Deterministic: no sampling happens inside the loop.
    """
    acfg = attack_cfg or AttackConfig()
    if len(triplets) == 0:
        raise ValueError("no training triplets")
    F = acfg.feature_buckets
    idx = feature_index(triplets.context, triplets.token, vocab_size, F)
    y = triplets.label.astype(np.float64)
    counts = np.bincount(idx, minlength=F).astype(np.float64)
    w = np.zeros(F)
    b = float(np.log((y.mean() + 1e-3) / (1 - y.mean() + 1e-3)))
    scale = 1.0 / (counts + acfg.l2 + 1e-12)
    losses = []
    nobs = len(y)
    for it in range(acfg.iterations):
        z = w[idx] + b
        pr = expit(z)
        loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * acfg.l2 * np.dot(w, w) / nobs)
        if not math.isfinite(loss) or (losses and loss > 10 * losses[0] + 10):
            raise TrainingDiverged(it, loss)
        losses.append(loss)
        resid = pr - y
        grad = np.bincount(idx, weights=resid, minlength=F) + acfg.l2 * w
        w -= acfg.step_size * scale * grad
        b -= acfg.step_size * float(resid.mean())
    return SurrogateClassifier(w, b, vocab_size, losses)


def surrogate_score(clf: SurrogateClassifier, context, token) -> np.ndarray:
    """log h(1|c,v) / h(0|c,v), i.e. the classifier logit."""
    return clf.logits(context, token)


def balanced_accuracy(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """Mean per-class recall; 0.5 for any predictor that ignores its input."""
    y_true = np.asarray(y_true).astype(bool)
    y_pred = np.asarray(y_pred).astype(bool)
    recalls = [float(np.mean(y_pred[y_true == c] == c)) for c in (False, True) if (y_true == c).any()]
    return float(np.mean(recalls))


def clustered_balanced_accuracy(y_true, y_pred, groups) -> Interval:
    """Balanced accuracy per document, averaged, with a 95% t-interval.

    Positions within a document share one payload, so they are not
    independent trials; the document is the sampling unit.
    """
    groups = np.asarray(groups)
    ids = np.unique(groups)
    per_doc = np.array([balanced_accuracy(np.asarray(y_true)[groups == g], np.asarray(y_pred)[groups == g])
                        for g in ids])
    est = float(per_doc.mean())
    if len(per_doc) < 2:
        return Interval(est, 0.0, 1.0, float("nan"))
    se = float(per_doc.std(ddof=1) / math.sqrt(len(per_doc)))
    half = float(student_t.ppf(0.975, len(per_doc) - 1)) * se
    return Interval(est, est - half, est + half, se)


def wilson_interval(successes: int, trials: int, z: float = 1.96) -> Interval:
    if trials == 0:
        return Interval(0.0, 0.0, 1.0, float("nan"))
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return Interval(p, max(0.0, centre - half), min(1.0, centre + half), math.sqrt(p * (1 - p) / trials))


def forge_document(clf: SurrogateClassifier, target_window: int, lam: float, model: SyntheticModel,
                   cfg: WatermarkConfig, rng_seed: int = 0) -> WatermarkedDocument:
    target = assumed_payload(target_window, cfg)
    alloc = allocation(cfg)
    rng = request_rng(rng_seed, 7)
    vocab = np.arange(cfg.vocab_size)
    tokens: list[int] = []
    for idx in range(cfg.length):
        prev = tokens[-1] if tokens else BOS
        p = model.next_distribution(tokens)
        s = surrogate_score(clf, np.full(cfg.vocab_size, prev), vocab)
        sign = 2 * int(target[alloc[idx]]) - 1
        logq = np.log(p) + lam * sign * s
        q = np.exp(logq - logq.max())
        tokens.append(sample_token(q / q.sum(), rng))
    return WatermarkedDocument(tuple(tokens))


def forged_passes(doc: WatermarkedDocument, mode: Mode, key: bytes, target_window: int,
                  cfg: WatermarkConfig) -> tuple[bool, float]:
    """Does the decoder accept the forgery as coming from target_window?

    The fixed-payload decoder also needs the recovered info word to spell
    the target window, since that is where its timestamp lives.
    """
    rep = verify_window(doc, key, target_window, cfg)
    ok = rep.decision is Decision.PASS
    if ok and mode is Mode.FIXED_PAYLOAD:
        ok = bool(np.array_equal(rep.recovered_r, window_info_word(target_window, cfg.m)))
    return ok, rep.score if rep.step1_status is Step1Status.RECOVERED else float("nan")


def split_by_document(triplets: Triplets, n_docs: int, heldout_fraction: float, seed: int):
    rng = np.random.default_rng(seed)
    order = rng.permutation(n_docs)
    n_held = max(1, int(round(heldout_fraction * n_docs)))
    held = np.isin(triplets.doc, order[:n_held])
    if held.all():
        raise ValueError("corpus too small to keep a training split")
    return triplets.take(~held), triplets.take(held)


def evaluate_attack(mode: Mode, attack_cfg: AttackConfig | None = None,
                    vault: KeyVault | None = None) -> AttackResult:
    """collect -> label -> train -> forge -> decode, for one payload design."""
    acfg = attack_cfg or AttackConfig()
    cfg = acfg.wm
    if vault is None:
        vault = KeyVault.from_seed(_mix(acfg.seed, 2, 0), clock=lambda: 0.0)
    vault.advance_to(acfg.target_window)
    key = vault.current_key()
    model = SyntheticModel(_mix(acfg.seed, 3, 0), cfg.vocab_size, 0.0)
    corpus = collect_corpus(mode, acfg.n_docs, cfg, key, acfg.target_window, model, acfg.seed)
    trip = build_triplets(corpus)
    agreement = float(np.mean(trip.label == true_labels(corpus)))
    train, held = split_by_document(trip, acfg.n_docs, acfg.heldout_fraction, acfg.seed)
    clf = train_surrogate(train, cfg.vocab_size, acfg)
    pred = clf.logits(held.context, held.token) > 0
    acc = clustered_balanced_accuracy(held.label, pred, held.doc)
    raw = float(np.mean(pred == held.label.astype(bool)))
    passes, scores = 0, []
    for k in range(acfg.forge_trials):
        doc = forge_document(clf, acfg.target_window, acfg.lam, model, cfg, _mix(acfg.seed, 4, k))
        ok, score = forged_passes(doc, mode, key, acfg.target_window, cfg)
        passes += ok
        scores.append(score)
    finite = [s for s in scores if math.isfinite(s)]
    return AttackResult(
        mode=mode,
        heldout_accuracy=acc,
        heldout_raw_accuracy=raw,
        heldout_size=len(held),
        label_truth_agreement=agreement,
        forged_pass_rate=wilson_interval(passes, acfg.forge_trials),
        forged_passes=passes,
        forge_trials=acfg.forge_trials,
        mean_forged_score=float(np.mean(finite)) if finite else float("nan"),
    )


def compare_modes(attack_cfg: AttackConfig | None = None) -> dict[str, AttackResult]:
    return {m.value: evaluate_attack(m, attack_cfg) for m in Mode}


def comparison_table(results: dict[str, AttackResult]) -> str:
    lines = [f"{'mode':15s} {'bal.acc':>8s} {'95% CI':>17s} {'label=truth':>11s} {'forged pass':>12s}"]
    for name, r in results.items():
        a = r.heldout_accuracy
        lines.append(f"{name:15s} {a.estimate:8.4f} [{a.low:6.4f},{a.high:6.4f}] "
                     f"{r.label_truth_agreement:11.4f} {r.forged_passes:5d}/{r.forge_trials:<6d}")
    return "\n".join(lines)


def _mix(seed: int, domain: int, index: int) -> int:
    ss = np.random.SeedSequence(int(seed), spawn_key=(domain, index))
    return int(ss.generate_state(2, np.uint64)[0])
