"""Canonical JSON encoding shared by scene files, fixtures and digests.

Floats are rounded to 9 significant digits before encoding and containers are
written without whitespace, so byte-stable golden files survive refactors of
the in-memory layout. Dict key order is preserved (construction order is part
of each format's contract), never sorted.
"""

from __future__ import annotations

import hashlib
import json
import math
from typing import Any


def round_sig(x: float, digits: int = 9) -> float:
    if not math.isfinite(x):
        raise ValueError(f"cannot canonicalize non-finite float {x!r}")
    return float(f"{x:.{digits}g}")


def _canon(value: Any) -> Any:
    if isinstance(value, bool) or value is None or isinstance(value, (int, str)):
        return value
    if isinstance(value, float):
        return round_sig(value)
    if isinstance(value, dict):
        return {k: _canon(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_canon(v) for v in value]
    raise TypeError(f"not canonical-JSON encodable: {type(value).__name__}")


def canonical_dumps(value: Any) -> str:
    return json.dumps(_canon(value), separators=(",", ":"), ensure_ascii=False)


def canonical_bytes(value: Any) -> bytes:
    return canonical_dumps(value).encode("utf-8")


def digest_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def digest_json(value: Any) -> str:
    return digest_bytes(canonical_bytes(value))


def digest_text(text: str) -> str:
    return digest_bytes(text.encode("utf-8"))
