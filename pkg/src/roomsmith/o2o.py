"""Offline-to-online reference search.

Offline: examples are grouped by category; within each group every example is
scored by its summed pairwise similarity (higher sum = more representative of
the group) and the top-k survive. Online: a classifier maps the live input to
a category id and that group's support set is attached to the prompt.

Pair similarity is f(a, b) = cos(u) + alpha*cos(t) + beta*cos(v) with
alpha=0.3, beta=0.2; a missing scene text or visual set contributes zero.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol, Sequence

import numpy as np

from .errors import ClassifierFailure, EmbeddingFailure

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExampleRecord:
    id: str
    category: str
    u: str  # user text
    t: str = ""  # scene text ("" = absent)
    v: tuple = ()  # visual refs (paths or Image objects)
    y: dict = field(default_factory=dict)  # output payload

    def __post_init__(self):
        if not self.u:
            raise ValueError(f"record {self.id!r}: user text must be non-empty")
        if not self.y:
            raise ValueError(f"record {self.id!r}: output payload must be non-empty")
        object.__setattr__(self, "v", tuple(self.v))


@dataclass(frozen=True)
class O2OConfig:
    alpha: float = 0.3
    beta: float = 0.2
    k: int = 8
    taxonomy: tuple = ()
    entropy_scope: str = "group"  # "group" | "global"

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be >= 0")
        if self.k < 0:
            raise ValueError("k must be >= 0")
        if self.entropy_scope not in ("group", "global"):
            raise ValueError("entropy_scope must be 'group' or 'global'")


@dataclass(frozen=True)
class SupportSet:
    category: str
    records: tuple = ()
    entropy_scores: tuple = ()

    def __post_init__(self):
        if len(self.records) != len(self.entropy_scores):
            raise ValueError("records and entropy_scores must be parallel")
        if any(r.category != self.category for r in self.records):
            raise ValueError("support set records must share the category")

    def __len__(self) -> int:
        return len(self.records)


EMPTY_SUPPORT = SupportSet(category="")


class EmbeddingProvider(Protocol):
    def text_embed(self, text: str) -> np.ndarray: ...

    def image_embed(self, ref) -> np.ndarray: ...


@dataclass(frozen=True)
class DeterministicHashEmbedder:
    """Seeded feature hashing onto the unit sphere; no model downloads.

    Words and character trigrams each bump one signed coordinate chosen by a
    salted SHA-256, so similar texts land near each other and the output is
    identical across processes and platforms.
    """

    dim: int = 64
    seed: int = 0

    def _embed_tokens(self, tokens: Sequence[str]) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        for tok in tokens:
            h = hashlib.sha256(f"{self.seed}:{tok}".encode("utf-8")).digest()
            idx = int.from_bytes(h[:4], "little") % self.dim
            vec[idx] += 1.0 if h[4] & 1 else -1.0
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            vec[int.from_bytes(hashlib.sha256(str(self.seed).encode()).digest()[:4], "little") % self.dim] = 1.0
            return vec
        return vec / norm

    def text_embed(self, text: str) -> np.ndarray:
        words = text.lower().split()
        trigrams = [text.lower()[i : i + 3] for i in range(max(0, len(text) - 2))]
        return self._embed_tokens(words + trigrams or [""])

    def image_embed(self, ref) -> np.ndarray:
        key = getattr(ref, "digest", None) or str(ref)
        return self._embed_tokens([f"img:{key}"])


class RemoteEmbedder:
    """Adapter for HTTP embedding endpoints (real CLIP/DINOv2-style models).

    POST {base_url}/embed/text with {"text": ...} and {base_url}/embed/image
    with {"image": <base64 png or ref>}; expects {"vector": [...]}. Vectors
    are re-normalized locally so the unit-norm invariant never depends on the
    remote side.
    """

    def __init__(self, base_url: str, api_key: Optional[str] = None, timeout: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.timeout = timeout

    def _post(self, route: str, payload: dict) -> np.ndarray:
        import requests

        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        try:
            resp = requests.post(
                f"{self.base_url}{route}", json=payload, headers=headers, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise EmbeddingFailure(f"embedding request failed: {exc}") from exc
        if resp.status_code != 200:
            raise EmbeddingFailure(f"embedding endpoint returned {resp.status_code}")
        try:
            vec = np.asarray(resp.json()["vector"], dtype=np.float64)
        except (ValueError, KeyError) as exc:
            raise EmbeddingFailure(f"malformed embedding response: {exc}") from exc
        norm = float(np.linalg.norm(vec))
        if norm == 0.0 or not np.isfinite(norm):
            raise EmbeddingFailure("embedding endpoint returned a degenerate vector")
        return vec / norm

    def text_embed(self, text: str) -> np.ndarray:
        return self._post("/embed/text", {"text": text})

    def image_embed(self, ref) -> np.ndarray:
        payload = getattr(ref, "to_base64", lambda: str(ref))()
        return self._post("/embed/image", {"image": payload})


def _visual_embedding(record: ExampleRecord, emb: EmbeddingProvider) -> Optional[np.ndarray]:
    if not record.v:
        return None
    try:
        vecs = [np.asarray(emb.image_embed(r), dtype=np.float64) for r in record.v]
    except Exception as exc:
        raise EmbeddingFailure(f"image embedding failed for {record.id!r}: {exc}") from exc
    mean = np.mean(vecs, axis=0)
    norm = float(np.linalg.norm(mean))
    if norm == 0.0:
        return None
    return mean / norm


def _embed_record(record: ExampleRecord, emb: EmbeddingProvider):
    try:
        u = np.asarray(emb.text_embed(record.u), dtype=np.float64)
        t = np.asarray(emb.text_embed(record.t), dtype=np.float64) if record.t else None
    except EmbeddingFailure:
        raise
    except Exception as exc:
        raise EmbeddingFailure(f"text embedding failed for {record.id!r}: {exc}") from exc
    return u, t, _visual_embedding(record, emb)


def pair_similarity(
    a: ExampleRecord, b: ExampleRecord, cfg: O2OConfig, emb: EmbeddingProvider
) -> float:
    ua, ta, va = _embed_record(a, emb)
    ub, tb, vb = _embed_record(b, emb)
    f = float(ua @ ub)
    if ta is not None and tb is not None:
        f += cfg.alpha * float(ta @ tb)
    if va is not None and vb is not None:
        f += cfg.beta * float(va @ vb)
    return f


def entropy(
    record: ExampleRecord, group: Sequence[ExampleRecord], cfg: O2OConfig, emb: EmbeddingProvider
) -> float:
    if not any(r.id == record.id for r in group):
        raise ValueError(f"record {record.id!r} is not part of the group")
    return sum(
        pair_similarity(record, other, cfg, emb) for other in group if other.id != record.id
    )


def _pair_f(ea, eb, cfg: O2OConfig) -> float:
    """pair_similarity on pre-computed (u, t, v) embeddings, same arithmetic."""
    f = float(ea[0] @ eb[0])
    if ea[1] is not None and eb[1] is not None:
        f += cfg.alpha * float(ea[1] @ eb[1])
    if ea[2] is not None and eb[2] is not None:
        f += cfg.beta * float(ea[2] @ eb[2])
    return f


def _entropy_sums(embedded: Sequence, cfg: O2OConfig) -> list[float]:
    n = len(embedded)
    return [
        sum(_pair_f(embedded[i], embedded[j], cfg) for j in range(n) if j != i)
        for i in range(n)
    ]


def build_offline_index(
    db: Sequence[ExampleRecord], cfg: O2OConfig, emb: EmbeddingProvider
) -> dict[str, SupportSet]:
    """Per category: entropy scores, then the top-k records (ties by id).

    Entropies are accumulated pair-by-pair in id order, not via a matmul, so
    the ranking is bit-identical to a brute-force pairwise oracle and stable
    under input reordering (a BLAS row-sum rounds differently and can flip
    exact ties).
    """
    if cfg.taxonomy:
        for r in db:
            if r.category not in cfg.taxonomy:
                raise ValueError(f"record {r.id!r} category {r.category!r} not in taxonomy")
    ordered = sorted(db, key=lambda r: r.id)  # canonical order: invariance + tie bit-stability
    if any(a.id == b.id for a, b in zip(ordered, ordered[1:])):
        raise ValueError("duplicate record ids in database")
    groups: dict[str, list[ExampleRecord]] = {}
    for r in ordered:
        groups.setdefault(r.category, []).append(r)

    scores: dict[str, float] = {}
    if cfg.entropy_scope == "global":
        embedded = [_embed_record(r, emb) for r in ordered]
        for r, s in zip(ordered, _entropy_sums(embedded, cfg)):
            scores[r.id] = s

    index: dict[str, SupportSet] = {}
    for category in sorted(groups):
        members = groups[category]
        if cfg.entropy_scope == "group":
            embedded = [_embed_record(r, emb) for r in members]
            member_scores = {r.id: s for r, s in zip(members, _entropy_sums(embedded, cfg))}
        else:
            member_scores = {r.id: scores[r.id] for r in members}
        ranked = sorted(members, key=lambda r: (-member_scores[r.id], r.id))
        top = ranked[: cfg.k]
        index[category] = SupportSet(
            category=category,
            records=tuple(top),
            entropy_scores=tuple(member_scores[r.id] for r in top),
        )
    return index


class CategoryClassifier(Protocol):
    def classify(self, u: str, t: str, v: Sequence) -> str: ...


@dataclass
class ScriptedClassifier:
    """Keyword-rule classifier for offline runs; first matching rule wins."""

    rules: list  # [(substring, category)]
    default: str = ""

    def classify(self, u: str, t: str, v: Sequence) -> str:
        low = u.lower()
        for needle, category in self.rules:
            if needle in low:
                return category
        if self.default:
            return self.default
        raise ClassifierFailure(f"no rule matched {u!r}")


def retrieve(
    test_input: tuple, index: dict[str, SupportSet], classifier: CategoryClassifier
) -> SupportSet:
    """Classify the live input and return its category's support set.

    Classifier failures are retried once; persistent failure or an unknown
    category degrades to an empty support set with a warning.
    """
    u, t, v = test_input
    category = None
    for _ in range(2):
        try:
            category = classifier.classify(u, t, v)
            break
        except ClassifierFailure:
            continue
    if category is None:
        log.warning("category classifier failed twice; continuing without references")
        return EMPTY_SUPPORT
    if category not in index:
        log.warning("classifier produced unregistered category %r; no references", category)
        return EMPTY_SUPPORT
    return index[category]


# --- database files --------------------------------------------------------------


def load_example_db(path) -> tuple[list[str], list[ExampleRecord]]:
    """Read {taxonomy, records} JSON; image refs resolve relative to the file."""
    p = Path(path)
    doc = json.loads(p.read_text(encoding="utf-8"))
    taxonomy = [str(c) for c in doc.get("taxonomy", [])]
    records = []
    for rd in doc.get("records", []):
        visuals = tuple(str((p.parent / ref)) for ref in rd.get("v", []))
        records.append(
            ExampleRecord(
                id=str(rd["id"]),
                category=str(rd["category"]),
                u=rd["u"],
                t=rd.get("t", ""),
                v=visuals,
                y=rd["y"],
            )
        )
    return taxonomy, records


def validate_example_db(path) -> list[str]:
    """Problems found in a database file; empty list means valid."""
    problems: list[str] = []
    try:
        taxonomy, records = load_example_db(path)
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        return [f"unreadable database: {exc}"]
    seen = set()
    for r in records:
        if r.id in seen:
            problems.append(f"duplicate record id {r.id!r}")
        seen.add(r.id)
        if taxonomy and r.category not in taxonomy:
            problems.append(f"record {r.id!r}: category {r.category!r} not in taxonomy")
    if not records:
        problems.append("database has no records")
    return problems
