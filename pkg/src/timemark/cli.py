"""Command-line entry point: ``timemark <subcommand>``.

Exit codes
----------
0  success (``identify``: exactly one window identified)
1  ``identify``: no candidate window verifies
2  ``identify``: more than one candidate window verifies
3  bad input: usage, malformed files, config or length errors
4  vault problem: missing/existing vault, policy denial, corruption
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import analysis
from .attack_sim import AttackConfig, Mode, attack_watermark_config, comparison_table, evaluate_attack
from .decoder import DocumentLengthError, Verdict, identify_time
from .encoder import GenerationRequest, encode_document, generate_plain, read_documents, write_documents
from .experiment import ExperimentConfig, dumps as dump_experiment, run_experiment, trial_seed
from .keychain import KeyVault, Role, VaultError
from .token_source import SyntheticModel, calibrate_gamma
from .wm_core import ConfigError, WatermarkConfig

EXIT_OK, EXIT_NO_WATERMARK, EXIT_AMBIGUOUS, EXIT_INPUT, EXIT_VAULT = 0, 1, 2, 3, 4
_VERDICT_EXIT = {Verdict.IDENTIFIED: EXIT_OK, Verdict.NO_WATERMARK: EXIT_NO_WATERMARK,
                 Verdict.AMBIGUOUS: EXIT_AMBIGUOUS}


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INPUT):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _emit(obj, args, table: str | None = None) -> None:
    print(json.dumps(obj, indent=1))
    if getattr(args, "pretty", False) and table:
        print(table, file=sys.stderr)


def _vault_path(args) -> Path:
    path = args.vault or os.environ.get("TIMEMARK_VAULT")
    if not path:
        raise CliError("no vault given: pass --vault or set TIMEMARK_VAULT", EXIT_VAULT)
    return Path(path)


def _load_vault(args) -> tuple[KeyVault, Path]:
    path = _vault_path(args)
    if not path.exists():
        raise CliError(f"vault {path} does not exist (run keyinit)", EXIT_VAULT)
    return KeyVault.load(path), path


def _wm_config(args) -> WatermarkConfig:
    base = {}
    if getattr(args, "config", None):
        try:
            base = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config {args.config}: {exc}") from exc
    for flag, fld in (("delta", "delta"), ("length", "length"), ("phi", "phi"), ("alpha", "alpha"),
                      ("vocab_size", "vocab_size")):
        value = getattr(args, flag, None)
        if value is not None:
            base[fld] = value
    try:
        return WatermarkConfig(**base)
    except TypeError as exc:
        raise CliError(f"bad config field: {exc}") from exc


def _window_range(text: str) -> list[int]:
    try:
        if ":" in text:
            lo, hi = (int(x) for x in text.split(":"))
            return list(range(lo, hi + 1))
        return [int(x) for x in text.split(",")]
    except ValueError as exc:
        raise CliError(f"bad window range {text!r}; use LO:HI or a,b,c") from exc


# ---------------------------------------------------------------------------
# commands


def cmd_keyinit(args) -> int:
    path = _vault_path(args)
    if path.exists() and not args.force:
        raise CliError(f"vault {path} already exists; pass --force to overwrite", EXIT_VAULT)
    vault = KeyVault.from_seed(args.seed, args.granularity)
    vault.save(path)
    _emit({"vault": str(path), "current_index": vault.current_index,
           "current_key_check": vault.to_json()["current_key_check"]}, args)
    return EXIT_OK


def cmd_advance(args) -> int:
    vault, path = _load_vault(args)
    vault.advance(args.steps)
    vault.save(path)
    _emit({"current_index": vault.current_index,
           "current_key_check": vault.to_json()["current_key_check"]}, args)
    return EXIT_OK


def cmd_generate(args) -> int:
    vault, path = _load_vault(args)
    cfg = _wm_config(args)
    window = vault.current_index if args.window is None else args.window
    model = SyntheticModel(args.model_seed, cfg.vocab_size, args.gamma)
    docs = []
    if not args.no_watermark:
        try:
            key = vault.read_key(Role.PROVIDER, window)
        finally:
            vault.save(path)
    for k in range(args.count):
        seed = trial_seed(args.seed, k)
        if args.no_watermark:
            docs.append(generate_plain(model, cfg.length, seed))
        else:
            docs.append(encode_document(GenerationRequest(window, cfg, model, seed), key)[0])
    write_documents(args.out, docs)
    _emit({"out": str(args.out), "documents": len(docs), "length": cfg.length,
           "watermarked": not args.no_watermark}, args)
    return EXIT_OK


def cmd_identify(args) -> int:
    vault, path = _load_vault(args)
    cfg = _wm_config(args)
    windows = _window_range(args.windows)
    try:
        docs = read_documents(args.doc_file)
    except OSError as exc:
        raise CliError(f"cannot read {args.doc_file}: {exc}") from exc
    if not docs:
        raise CliError(f"{args.doc_file} contains no documents")
    results = []
    try:
        for doc in docs:
            results.append(identify_time(doc, windows, vault, cfg))
    finally:
        vault.save(path)
    for res in results:
        print(json.dumps(res.to_json()))
    if args.pretty:
        for i, res in enumerate(results):
            scores = " ".join(f"{r.window}:{r.score:.3f}" for r in res.reports)
            print(f"doc {i}: {res.verdict.value} window={res.window} scores {scores}", file=sys.stderr)
    return max(_VERDICT_EXIT[r.verdict] for r in results)


def cmd_analyze(args) -> int:
    try:
        params = analysis.AnalysisParams(delta=args.delta, reps_stage2=args.reps, n=args.n, t=args.t,
                                         verify_count=args.alpha * args.n, phi=args.phi,
                                         green_mass=args.green_mass)
        report = analysis.analyze(params)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    _emit(report.to_json(), args, report.table())
    return EXIT_OK


def cmd_experiment(args) -> int:
    wm = _wm_config(args)
    gamma = args.gamma
    if args.calibrate_green_mass is not None:
        gamma = calibrate_gamma(args.calibrate_green_mass, wm.delta, wm.vocab_size)
    cfg = ExperimentConfig(trials=args.trials, radius=args.radius, gamma=gamma, seed=args.seed,
                           model_seed=args.model_seed, wm=wm)
    report = run_experiment(cfg, jobs=args.jobs)
    print(dump_experiment(report))
    if args.pretty:
        print(report.table(), file=sys.stderr)
    return EXIT_OK


def cmd_attack(args) -> int:
    wm = attack_watermark_config()
    acfg = AttackConfig(n_docs=args.docs, lam=args.lam, seed=args.seed, forge_trials=args.forge_trials,
                        iterations=args.iterations, target_window=args.target_window, wm=wm)
    modes = list(Mode) if args.mode == "both" else [Mode(args.mode)]
    results = {m.value: evaluate_attack(m, acfg) for m in modes}
    _emit({k: v.to_json() for k, v in results.items()}, args, comparison_table(results))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="timemark", description="Time watermarking for generated token sequences.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, vault=False, wm=False):
        sp.add_argument("--pretty", action="store_true", help="human-readable table on stderr")
        if vault:
            sp.add_argument("--vault", help="vault file (default: $TIMEMARK_VAULT)")
        if wm:
            sp.add_argument("--config", help="JSON file with WatermarkConfig fields")
            sp.add_argument("--delta", type=float)
            sp.add_argument("--length", type=int)
            sp.add_argument("--phi", type=float)
            sp.add_argument("--alpha", type=int)
            sp.add_argument("--vocab-size", type=int)

    sp = sub.add_parser("keyinit", help="create a vault with a fresh root key")
    common(sp, vault=True)
    sp.add_argument("--seed", type=int, help="derive the root from this seed (default: OS entropy)")
    sp.add_argument("--granularity", type=int, default=60, help="window length in seconds")
    sp.add_argument("--force", action="store_true")
    sp.set_defaults(func=cmd_keyinit)

    sp = sub.add_parser("advance", help="evolve the key chain by N windows")
    common(sp, vault=True)
    sp.add_argument("steps", type=int, nargs="?", default=1)
    sp.set_defaults(func=cmd_advance)

    sp = sub.add_parser("generate", help="write documents as JSON lines")
    common(sp, vault=True, wm=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--window", type=int, help="must be the current window (provider policy)")
    sp.add_argument("--count", type=int, default=1)
    sp.add_argument("--gamma", type=float, default=0.0, help="synthetic model peakiness")
    sp.add_argument("--model-seed", type=int, default=0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--no-watermark", action="store_true")
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("identify", help="find the generation window of documents")
    common(sp, vault=True, wm=True)
    sp.add_argument("doc_file")
    sp.add_argument("--windows", required=True, help="candidate windows, LO:HI inclusive or a,b,c")
    sp.set_defaults(func=cmd_identify)

    sp = sub.add_parser("analyze", help="closed-form error probabilities")
    common(sp)
    sp.add_argument("--delta", type=float, default=2.5)
    sp.add_argument("--green-mass", type=float, default=0.5)
    sp.add_argument("--phi", type=float, default=0.65)
    sp.add_argument("--alpha", type=int, default=5)
    sp.add_argument("--n", type=int, default=63)
    sp.add_argument("--t", type=int, default=13)
    sp.add_argument("--reps", type=int, default=10)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("experiment", help="desk-scale identification experiment")
    common(sp, wm=True)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--radius", type=int, default=2)
    sp.add_argument("--gamma", type=float, default=0.0)
    sp.add_argument("--calibrate-green-mass", type=float,
                    help="pick gamma so the model behaves like this constant green mass")
    sp.add_argument("--model-seed", type=int, default=0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_experiment)

    sp = sub.add_parser("attack", help="statistical spoofing attack simulation")
    common(sp)
    sp.add_argument("--mode", choices=["fixed_payload", "timemark", "both"], default="both")
    sp.add_argument("--docs", type=int, default=120)
    sp.add_argument("--lam", type=float, default=4.0)
    sp.add_argument("--iterations", type=int, default=100)
    sp.add_argument("--forge-trials", type=int, default=20)
    sp.add_argument("--target-window", type=int, default=5)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_attack)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"timemark: {exc}", file=sys.stderr)
        return exc.code
    except VaultError as exc:
        print(f"timemark: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VAULT
    except (ConfigError, DocumentLengthError, ValueError) as exc:
        print(f"timemark: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
