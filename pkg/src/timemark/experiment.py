"""Desk-scale identification experiment.

Each trial produces one watermarked and one plain document from the same
model and request seed, then asks the decoder to pick the generation window
out of ``2 * radius + 1`` candidates centred on the true one.  Generation
happens first, window by window with the provider's current key; decoding
happens afterwards with authority access, as it would in a dispute.
"""
from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .decoder import Decision, Verdict, identify_time
from .encoder import GenerationRequest, encode_document, generate_plain
from .keychain import KeyVault, Role
from .token_source import SyntheticModel
from .wm_core import WatermarkConfig


@dataclass(frozen=True)
class ExperimentConfig:
    trials: int = 100
    radius: int = 2
    gamma: float = 0.0
    seed: int = 0
    model_seed: int = 0
    wm: WatermarkConfig = field(default_factory=WatermarkConfig)

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.radius < 0:
            raise ValueError("radius must be non-negative")

    def true_window(self, trial: int) -> int:
        return self.radius + trial

    def candidates(self, trial: int) -> list[int]:
        t = self.true_window(trial)
        return list(range(t - self.radius, t + self.radius + 1))


@dataclass(frozen=True)
class TrialRow:
    trial: int
    window: int
    rng_seed: int
    wm_verdict: str
    wm_identified: int | None
    wm_passing: list[int]
    wm_score: float
    wm_r_hex: str | None
    plain_verdict: str
    plain_passing: list[int]
    plain_score: float
    plain_score_basis: str

    @property
    def correct(self) -> bool:
        return self.wm_verdict == Verdict.IDENTIFIED.value and self.wm_identified == self.window

    @property
    def wrong_key_passes(self) -> int:
        return sum(1 for w in self.wm_passing if w != self.window)


@dataclass(frozen=True)
class ExperimentReport:
    config: ExperimentConfig
    rows: tuple[TrialRow, ...]

    @property
    def trials(self) -> int:
        return len(self.rows)

    @property
    def correct_identifications(self) -> int:
        return sum(r.correct for r in self.rows)

    @property
    def false_identifications(self) -> int:
        return sum(r.plain_verdict != Verdict.NO_WATERMARK.value for r in self.rows)

    @property
    def wrong_key_passes(self) -> int:
        return sum(r.wrong_key_passes for r in self.rows)

    @property
    def mean_wm_score(self) -> float:
        return float(np.mean([r.wm_score for r in self.rows]))

    @property
    def mean_plain_score(self) -> float:
        return float(np.mean([r.plain_score for r in self.rows]))

    def to_json(self) -> dict:
        n = self.trials
        return {
            "config": {**{k: v for k, v in asdict(self.config).items() if k != "wm"},
                       "wm": self.config.wm.to_json()},
            "correct_identifications": {"count": self.correct_identifications,
                                        "rate": self.correct_identifications / n},
            "false_identifications_on_unwatermarked": {"count": self.false_identifications,
                                                       "rate": self.false_identifications / n},
            "wrong_key_passes": self.wrong_key_passes,
            "mean_step2_score_watermarked": self.mean_wm_score,
            "mean_step2_score_unwatermarked": self.mean_plain_score,
            "rows": [asdict(r) for r in self.rows],
        }

    def table(self) -> str:
        n = self.trials
        return "\n".join([
            f"{'metric':58s} result",
            f"{'watermarked texts with correctly identified time':58s} "
            f"{self.correct_identifications} ({100 * self.correct_identifications / n:.0f}%)",
            f"{'non-watermarked texts identified as having a time':58s} "
            f"{self.false_identifications} ({100 * self.false_identifications / n:.0f}%)",
            f"{'mean Step-2 score, watermarked':58s} {self.mean_wm_score:.4f}",
            f"{'mean Step-2 score, non-watermarked':58s} {self.mean_plain_score:.4f}",
            f"{'wrong-key Step-2 passes':58s} {self.wrong_key_passes}",
        ])


def trial_seed(master: int, trial: int) -> int:
    ss = np.random.SeedSequence(int(master), spawn_key=(trial,))
    return int(ss.generate_state(1, np.uint64)[0])


def _run_trial(args) -> TrialRow:
    cfg, trial, gen_key, keys = args
    t = cfg.true_window(trial)
    seed = trial_seed(cfg.seed, trial)
    model = SyntheticModel(cfg.model_seed, cfg.wm.vocab_size, cfg.gamma)
    wm_doc, _ = encode_document(GenerationRequest(t, cfg.wm, model, seed), gen_key)
    plain_doc = generate_plain(model, cfg.wm.length, seed)
    windows = cfg.candidates(trial)
    wm = identify_time(wm_doc, windows, keys.__getitem__, cfg.wm)
    plain = identify_time(plain_doc, windows, keys.__getitem__, cfg.wm, fallback_scores=[t])
    wm_true = next(r for r in wm.reports if r.window == t)
    plain_true = next(r for r in plain.reports if r.window == t)
    return TrialRow(
        trial=trial,
        window=t,
        rng_seed=seed,
        wm_verdict=wm.verdict.value,
        wm_identified=wm.window,
        wm_passing=[r.window for r in wm.reports if r.decision is Decision.PASS],
        wm_score=wm_true.score,
        wm_r_hex=wm_true.to_json()["recovered_r"],
        plain_verdict=plain.verdict.value,
        plain_passing=[r.window for r in plain.reports if r.decision is Decision.PASS],
        plain_score=plain_true.score,
        plain_score_basis=plain_true.score_basis,
    )


def run_experiment(cfg: ExperimentConfig, vault: KeyVault | None = None, jobs: int = 1) -> ExperimentReport:
    if vault is None:
        vault = KeyVault.from_seed(cfg.seed, cfg.wm.granularity_seconds, clock=lambda: 0.0)
    # generation phase: provider pulls the current key window by window
    gen_keys = {}
    for trial in range(cfg.trials):
        vault.advance_to(cfg.true_window(trial))
        gen_keys[trial] = vault.current_key()
    # dispute phase: authority reads every candidate key
    last = cfg.true_window(cfg.trials - 1) + cfg.radius
    vault.advance_to(last)
    needed = sorted({w for trial in range(cfg.trials) for w in cfg.candidates(trial)})
    keys = {w: vault.read_key(Role.AUTHORITY, w) for w in needed}
    tasks = [(cfg, trial, gen_keys[trial], {w: keys[w] for w in cfg.candidates(trial)})
             for trial in range(cfg.trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_trial, tasks))
    else:
        rows = [_run_trial(t) for t in tasks]
    rows.sort(key=lambda r: r.trial)
    return ExperimentReport(cfg, tuple(rows))


def dumps(report: ExperimentReport) -> str:
    return json.dumps(report.to_json(), indent=1)
