"""
Watermark a document, then recover when it was written
======================================================

A synthetic next-token model stands in for an LLM.  The document is
generated in window 7; later, the decoder tries five candidate windows and
only the true one verifies.
"""
from timemark.decoder import identify_time
from timemark.encoder import GenerationRequest, encode_document, generate_plain
from timemark.keychain import KeyVault, Role
from timemark.token_source import SyntheticModel
from timemark.wm_core import WatermarkConfig

cfg = WatermarkConfig(vocab_size=256)  # smaller vocab keeps the demo quick
model = SyntheticModel(model_seed=0, vocab_size=cfg.vocab_size, gamma=2.0)

vault = KeyVault.from_seed(7, clock=lambda: 0.0)
vault.advance_to(7)
key = vault.read_key(Role.PROVIDER, 7)

doc, trace = encode_document(GenerationRequest(7, cfg, model, rng_seed=1), key, trace=True)
print("length", len(doc), "first tokens", doc.tokens[:8])
print("hidden random R:", "".join(map(str, trace.r)))
print(f"Stage-II tokens that landed in their target half: {trace.stage2_target_rate():.3f}")

# a dispute, much later
vault.advance_to(20)
result = identify_time(doc, range(5, 10), vault, cfg)
print("verdict", result.verdict.value, "window", result.window)
for rep in result.reports:
    print(f"  window {rep.window}: step1 {rep.step1_status.value:15s} score {rep.score:.3f} {rep.decision.value}")

# the same model without a watermark
plain = generate_plain(model, cfg.length, rng_seed=1)
print("plain text verdict:", identify_time(plain, range(5, 10), vault, cfg).verdict.value)
