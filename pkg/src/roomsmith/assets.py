"""Text-to-3D provider abstraction and candidate selection.

The remote adapter talks to an HTTP text-to-3D endpoint; the mock provider
emits parametric primitives seeded by a hash of the prompt text, so the whole
pipeline (including pose alignment, which gets deliberately pre-rotated
meshes) runs offline and deterministically.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

import numpy as np

from .errors import AssetGenerationFailed, JudgeFailure
from .geometry import Rotation, TriMesh, align_pose, compute_aabb
from .primitives import make_primitive
from .scene import FurnitureItem, Placement, Vec3


class AssetProvider(Protocol):
    def generate(self, prompt: str, index: int) -> TriMesh:
        """Produce candidate ``index`` for the prompt; raises AssetGenerationFailed."""
        ...


class CandidateJudge(Protocol):
    def pick(self, text: str, candidates: Sequence[TriMesh]) -> int:
        """Index of the most suitable candidate; raises JudgeFailure."""
        ...


def style_prompt(text: str, style: Optional[str]) -> str:
    return f"{style}-style {text}" if style else text


_MOCK_SHAPES = (
    "box", "box", "tall_box", "wide_box", "panel",
    "l_box", "stepped_box", "hex_prism", "hexadecagon_prism", "icosahedron",
)


@dataclass(frozen=True)
class MockProvider:
    """Deterministic offline stand-in for the text-to-3D service.

    The candidate mesh depends only on (prompt, index, seed): a primitive is
    chosen and non-uniformly stretched, then rotated by a random pose so the
    alignment stage downstream has real work to do.
    """

    seed: int = 0

    def generate(self, prompt: str, index: int) -> TriMesh:
        digest = hashlib.sha256(f"{prompt}|{index}|{self.seed}".encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        name = _MOCK_SHAPES[int(rng.integers(len(_MOCK_SHAPES)))]
        mesh = make_primitive(name)
        stretch = rng.uniform(0.5, 2.2, size=3)
        q, r = np.linalg.qr(rng.normal(size=(3, 3)))
        q *= np.sign(np.diag(r))
        if np.linalg.det(q) < 0:
            q[:, 0] = -q[:, 0]
        return mesh.scaled(stretch).transformed(Rotation(q))


@dataclass(frozen=True)
class PresetProvider:
    """Returns one fixed mesh regardless of prompt — used to funnel an
    already-judged candidate into the Add action."""

    mesh: TriMesh

    def generate(self, prompt: str, index: int) -> TriMesh:
        return self.mesh


class RemoteProvider:
    """Adapter for an HTTP text-to-3D endpoint returning OBJ text.

    POST {base_url}/generate with {"prompt": ..., "index": ...}; expects
    {"obj": "<wavefront text>"}.
    """

    def __init__(self, base_url: str, api_key: Optional[str] = None, timeout: float = 120.0):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.timeout = timeout

    def generate(self, prompt: str, index: int) -> TriMesh:
        import requests

        from .geometry import load_obj

        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        try:
            resp = requests.post(
                f"{self.base_url}/generate",
                json={"prompt": prompt, "index": index},
                headers=headers,
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise AssetGenerationFailed(f"text-to-3D request failed: {exc}") from exc
        if resp.status_code != 200:
            raise AssetGenerationFailed(f"text-to-3D endpoint returned {resp.status_code}")
        try:
            return load_obj(resp.json()["obj"])
        except Exception as exc:
            raise AssetGenerationFailed(f"unusable text-to-3D payload: {exc}") from exc


@dataclass(frozen=True)
class FixedPickJudge:
    """Test judge returning a constant candidate index."""

    index: int = 0

    def pick(self, text: str, candidates: Sequence[TriMesh]) -> int:
        return self.index


def generate_asset(
    text: str,
    style: Optional[str] = None,
    n_candidates: int = 16,
    assets: Optional[AssetProvider] = None,
    judge: Optional[CandidateJudge] = None,
) -> TriMesh:
    """Generate candidates for the (style-augmented) prompt and pick one.

    With a single candidate the judge is bypassed. A missing or failing judge
    degrades to candidate 0 rather than failing the whole Add.
    """
    if n_candidates < 1:
        raise ValueError("n_candidates must be >= 1")
    if assets is None:
        raise ValueError("an AssetProvider is required")
    prompt = style_prompt(text, style)
    candidates = [assets.generate(prompt, i) for i in range(n_candidates)]
    if n_candidates == 1 or judge is None:
        return candidates[0]
    try:
        idx = judge.pick(text, candidates)
        if not 0 <= idx < n_candidates:
            raise JudgeFailure(f"judge picked out-of-range index {idx}")
    except JudgeFailure:
        idx = 0
    return candidates[idx]


def normalize_local_frame(mesh: TriMesh) -> TriMesh:
    """Recenter so the AABB is centered in x/z and rests on y=0.

    Items then place by footprint center: world x/z = placement position,
    bottom face at position.y.
    """
    bb = compute_aabb(mesh)
    c = bb.center
    return mesh.translated(np.array([-c.x, -bb.min.y, -c.z]))


def ingest_mesh(
    objkey: str,
    label: str,
    mesh: TriMesh,
    category: str = "Unassigned",
    style_tag: Optional[str] = None,
    parent: Optional[str] = None,
) -> FurnitureItem:
    """Pose-align and recenter a raw mesh, yielding a placeable item."""
    _, aligned = align_pose(mesh)
    aligned = normalize_local_frame(aligned)
    return FurnitureItem(
        objkey=objkey,
        label=label,
        aabb_local=compute_aabb(aligned),
        placement=Placement(Vec3(0.0, 0.0, 0.0)),
        category=category,
        mesh_ref=f"mesh:{objkey}",
        style_tag=style_tag,
        parent=parent,
    )
