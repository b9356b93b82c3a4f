"""Deterministic seed derivation.

Every bootstrap consumer derives its own seed from a master seed plus string
components, so grouped and parallel work reproduces bit-exactly regardless of
execution order.
"""

import hashlib


def derive_seed(master: int, *components) -> int:
    payload = repr((int(master),) + tuple(str(c) for c in components))
    digest = hashlib.sha256(payload.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1  # non-negative 63-bit
