"""
Hash-chain keys and who may read them
=====================================

Each time window has its own key, K_{t+1} = SHA-256(K_t).  The provider only
ever sees the current key; an authority may look up any window that has
already started.
"""
from timemark.keychain import (
    KeyVault, ProviderPastAccessDenied, Role, WindowNotYetReached, chain,
)

vault = KeyVault.from_seed(42, granularity_seconds=60, clock=lambda: 0.0)
vault.advance(5)
print("current window:", vault.current_index)
print("K_5 =", vault.current_key().hex()[:16], "...")

# the chain is plain iterated SHA-256 from the root
assert chain(vault.root, 6)[5] == vault.current_key()

# provider: past windows are off limits, so old watermarks cannot be re-minted
try:
    vault.read_key(Role.PROVIDER, 2)
except ProviderPastAccessDenied as exc:
    print("provider denied:", exc)

# authority: any started window, nothing from the future
print("authority K_2 =", vault.read_key(Role.AUTHORITY, 2).hex()[:16], "...")
try:
    vault.read_key(Role.AUTHORITY, 9)
except WindowNotYetReached as exc:
    print("authority denied:", exc)

for rec in vault.audit_log[-3:]:
    print(rec)
