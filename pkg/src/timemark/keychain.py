"""One-way time-key chain and an emulated HSM vault.

``K_t = SHA-256(K_{t-1})``.  The vault holds the whole history and hands
keys out according to the caller's role: the provider only ever sees the
current window's key, the authority may read any past one.  Every read and
every advance is written to an append-only audit log.
"""
from __future__ import annotations

import enum
import hashlib
import json
import os
import threading
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable

KEY_BYTES = 32
_ROOT_TAG = b"timemark/root/v1"
_CHECK_TAG = b"timemark/vault-check/v1"


class VaultError(Exception):
    """Base class for vault access problems."""


class ProviderPastAccessDenied(VaultError):
    """The provider asked for a key older than the current window."""


class WindowNotYetReached(VaultError):
    """A key was requested for a window the chain has not reached."""


class VaultCorrupted(VaultError):
    """A loaded vault does not re-derive to its stored check digest."""


class Role(enum.Enum):
    PROVIDER = "provider"
    AUTHORITY = "authority"


def evolve(key: bytes) -> bytes:
    if len(key) != KEY_BYTES:
        raise ValueError(f"time key must be {KEY_BYTES} bytes, got {len(key)}")
    return hashlib.sha256(key).digest()


def derive_root(seed: int | None = None) -> bytes:
    """K_0 from an explicit integer seed, or from OS entropy when seed is None."""
    if seed is None:
        return os.urandom(KEY_BYTES)
    return hashlib.sha256(_ROOT_TAG + str(int(seed)).encode()).digest()


def chain(root: bytes, count: int) -> list[bytes]:
    """[K_0, ..., K_{count-1}] starting from root."""
    keys = [root]
    for _ in range(count - 1):
        keys.append(evolve(keys[-1]))
    return keys


def window_index(epoch_seconds: float, granularity_seconds: int, origin: float = 0.0) -> int:
    """Map wall time to a window index; times before origin clamp to 0."""
    if granularity_seconds <= 0:
        raise ValueError("granularity_seconds must be positive")
    return max(0, int((epoch_seconds - origin) // granularity_seconds))


def key_check_digest(key: bytes) -> str:
    # plain SHA-256(K_t) would be K_{t+1}; tag it so the file never leaks a future key
    return hashlib.sha256(_CHECK_TAG + key).hexdigest()


@dataclass(frozen=True)
class AuditRecord:
    action: str  # "advance" or "read"
    requester_role: str
    requested_index: int
    granted: bool
    wall_time: float


class KeyVault:
    """Role-policed store of the key chain.

    All mutations and audited reads go through one lock, so concurrent
    callers queue in call order.
    """

    def __init__(
        self,
        root: bytes,
        granularity_seconds: int = 60,
        clock: Callable[[], float] = time.time,
    ):
        if len(root) != KEY_BYTES:
            raise ValueError(f"root key must be {KEY_BYTES} bytes")
        if granularity_seconds <= 0:
            raise ValueError("granularity_seconds must be positive")
        self.granularity_seconds = granularity_seconds
        self._history = [root]
        self._audit: list[AuditRecord] = []
        self._clock = clock
        self._lock = threading.Lock()

    @classmethod
    def from_seed(cls, seed: int | None, granularity_seconds: int = 60, **kw) -> KeyVault:
        return cls(derive_root(seed), granularity_seconds, **kw)

    @property
    def current_index(self) -> int:
        return len(self._history) - 1

    @property
    def root(self) -> bytes:
        return self._history[0]

    @property
    def audit_log(self) -> tuple[AuditRecord, ...]:
        return tuple(self._audit)

    def _log(self, action: str, role: Role, index: int, granted: bool) -> None:
        self._audit.append(AuditRecord(action, role.value, index, granted, float(self._clock())))

    def advance(self, steps: int = 1) -> int:
        """Move to the next window(s); returns the new current index."""
        if steps < 0:
            raise ValueError("cannot advance by a negative number of windows")
        with self._lock:
            for _ in range(steps):
                self._history.append(evolve(self._history[-1]))
                self._log("advance", Role.AUTHORITY, self.current_index, True)
            return self.current_index

    def advance_to(self, index: int) -> int:
        return self.advance(max(0, index - self.current_index))

    def read_key(self, role: Role, index: int) -> bytes:
        with self._lock:
            current = self.current_index
            if index < 0 or index > current:
                self._log("read", role, index, False)
                raise WindowNotYetReached(f"window {index} not reached (current {current})")
            if role is Role.PROVIDER and index != current:
                self._log("read", role, index, False)
                raise ProviderPastAccessDenied(
                    f"provider may only read window {current}, asked for {index}"
                )
            self._log("read", role, index, True)
            return self._history[index]

    def current_key(self) -> bytes:
        """Provider-side pull of the active key."""
        return self.read_key(Role.PROVIDER, self.current_index)

    # -- persistence ------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "granularity_seconds": self.granularity_seconds,
            "current_index": self.current_index,
            "root_hex": self.root.hex(),
            "current_key_check": key_check_digest(self._history[-1]),
            "audit": [asdict(r) for r in self._audit],
        }

    @classmethod
    def from_json(cls, data: dict, clock: Callable[[], float] = time.time) -> KeyVault:
        vault = cls(bytes.fromhex(data["root_hex"]), int(data["granularity_seconds"]), clock=clock)
        vault._history = chain(vault.root, int(data["current_index"]) + 1)
        if key_check_digest(vault._history[-1]) != data["current_key_check"]:
            raise VaultCorrupted("re-derived current key does not match the stored check digest")
        vault._audit = [AuditRecord(**r) for r in data.get("audit", [])]
        return vault

    def save(self, path: str | os.PathLike) -> None:
        path = Path(path)
        tmp = path.with_suffix(path.suffix + ".tmp")
        with self._lock:
            tmp.write_text(json.dumps(self.to_json(), indent=1))
        os.chmod(tmp, 0o600)
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str | os.PathLike, **kw) -> KeyVault:
        return cls.from_json(json.loads(Path(path).read_text()), **kw)
