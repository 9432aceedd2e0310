"""
A statistical spoofing attack, with and without random payloads
===============================================================

The attacker collects watermarked documents from one window, labels every
token with the bit it believes was embedded, fits a logistic surrogate,
and samples forgeries tilted toward the target window's bits.  Against a
fixed per-window payload this works; with a fresh random payload per
document the labels carry no signal.  Takes about 20 seconds.
"""
from timemark.attack_sim import AttackConfig, compare_modes, comparison_table

results = compare_modes(AttackConfig(n_docs=120, forge_trials=10, seed=0))
print(comparison_table(results))

for name, r in results.items():
    a = r.heldout_accuracy
    print(f"{name}: accuracy {a.estimate:.4f} +/- {1.96 * a.stderr:.4f}, "
          f"forgeries accepted {r.forged_passes}/{r.forge_trials} "
          f"(95% CI up to {r.forged_pass_rate.high:.2f})")
