"""Named, seeded random streams.

Streams are keyed by (master seed, stream name) through SHA-256 into a
Philox counter-based generator, so adding a new consumer stream never
perturbs the draws of existing ones.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_stream_key(master_seed: int, stream_name: str) -> np.ndarray:
    digest = hashlib.sha256(f"{master_seed}:{stream_name}".encode()).digest()
    return np.frombuffer(digest[:16], dtype=np.uint64).copy()


def stream(master_seed: int, stream_name: str) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=derive_stream_key(master_seed, stream_name)))


class StreamSet:
    """Lazily created named generators over one master seed."""

    def __init__(self, master_seed: int):
        self.master_seed = int(master_seed)
        self._streams: dict[str, np.random.Generator] = {}

    def get(self, name: str) -> np.random.Generator:
        g = self._streams.get(name)
        if g is None:
            g = stream(self.master_seed, name)
            self._streams[name] = g
        return g

    def state_bytes(self) -> bytes:
        """Canonical serialization of all touched streams, for state hashing."""
        parts = []
        for name in sorted(self._streams):
            st = self._streams[name].bit_generator.state
            inner = st["state"]
            parts.append(name.encode())
            parts.append(np.asarray(inner["counter"]).tobytes())
            parts.append(np.asarray(inner["key"]).tobytes())
            parts.append(np.asarray(st["buffer"]).tobytes())
            parts.append(str(st["buffer_pos"]).encode())
            parts.append(str(st["has_uint32"]).encode())
            parts.append(str(st["uinteger"]).encode())
        return b"|".join(parts)
