"""Grounded-object inventory: manifest ingestion, the counts-only summary
shown to the model, and canonicalization of evidence citations.

Object labels never appear in the summary; they live only in the validator
so the model cannot parrot saliency output back as evidence.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

from .fitness import OrdinalLevel


class ManifestError(ValueError):
    """Schema violation in a grounding manifest; names the offending field."""


class IntegrityError(ValueError):
    """Cross-reference violation: duplicate object keys or dangling image refs."""


@dataclass(frozen=True)
class ImageMeta:
    image_index: int  # 1-based
    width: int
    height: int
    source_id: str

    def __post_init__(self) -> None:
        if self.image_index < 1:
            raise ManifestError(f"image_index must be >= 1, got {self.image_index}")
        if self.width <= 0:
            raise ManifestError(f"width must be positive, got {self.width}")
        if self.height <= 0:
            raise ManifestError(f"height must be positive, got {self.height}")


@dataclass(frozen=True)
class GroundedObject:
    image_index: int
    object_index: int  # 1-based within image
    label: str
    bbox: Optional[tuple[float, float, float, float]] = None
    score: Optional[float] = None

    def __post_init__(self) -> None:
        if self.image_index < 1:
            raise ManifestError(f"object image_index must be >= 1, got {self.image_index}")
        if self.object_index < 1:
            raise ManifestError(f"object_index must be >= 1, got {self.object_index}")
        if not self.label:
            raise ManifestError("object label must be nonempty")
        if self.score is not None and not 0.0 <= self.score <= 1.0:
            raise ManifestError(f"score must be in [0, 1], got {self.score}")
        if self.bbox is not None:
            x0, y0, x1, y1 = self.bbox
            if not (x0 < x1 and y0 < y1):
                raise ManifestError(f"bbox must satisfy x0<x1 and y0<y1, got {self.bbox}")


@dataclass(frozen=True)
class EvidenceRef:
    image_index: int
    object_index: int
    label: str


@dataclass
class GroundingSet:
    images: list[ImageMeta]
    objects: list[GroundedObject]
    cap_per_image: int

    def __post_init__(self) -> None:
        self._by_key = {(o.image_index, o.object_index): o for o in self.objects}

    def image(self, index: int) -> Optional[ImageMeta]:
        for meta in self.images:
            if meta.image_index == index:
                return meta
        return None

    def lookup(self, image_index: int, object_index: int) -> Optional[GroundedObject]:
        return self._by_key.get((image_index, object_index))

    def objects_in(self, image_index: int) -> list[GroundedObject]:
        return [o for o in self.objects if o.image_index == image_index]

    def to_manifest(self) -> dict:
        """Serialize back to the manifest schema (inverse of load_grounding_set)."""
        doc: dict = {
            "images": [
                {
                    "image_index": m.image_index,
                    "source_id": m.source_id,
                    "width": m.width,
                    "height": m.height,
                }
                for m in self.images
            ],
            "objects": [],
        }
        for o in self.objects:
            entry: dict = {
                "image_index": o.image_index,
                "object_index": o.object_index,
                "label": o.label,
            }
            if o.bbox is not None:
                entry["bbox"] = list(o.bbox)
            if o.score is not None:
                entry["score"] = o.score
            doc["objects"].append(entry)
        return doc


def _require(doc: dict, key: str, kind, where: str):
    if key not in doc:
        raise ManifestError(f"missing field '{key}' in {where}")
    value = doc[key]
    if kind is int and isinstance(value, bool):
        raise ManifestError(f"field '{key}' in {where} must be {kind.__name__}")
    if not isinstance(value, kind):
        raise ManifestError(f"field '{key}' in {where} must be {kind.__name__}")
    return value


def load_grounding_set(manifest: Union[bytes, str, dict], cap: int) -> GroundingSet:
    """Parse and validate a grounding manifest, keeping at most ``cap``
    objects per image.

    Eviction beyond the cap is by descending score (unscored objects last,
    then ascending object_index), matching the grounding model's own
    confidence ordering.
    """
    if cap < 1:
        raise ValueError(f"cap must be positive, got {cap}")
    if isinstance(manifest, (bytes, str)):
        try:
            doc = json.loads(manifest)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"manifest is not valid JSON: {exc}") from exc
    else:
        doc = manifest
    if not isinstance(doc, dict):
        raise ManifestError("manifest root must be a JSON object")

    raw_images = _require(doc, "images", list, "manifest")
    raw_objects = _require(doc, "objects", list, "manifest")

    images = []
    seen_images = set()
    for i, entry in enumerate(raw_images):
        if not isinstance(entry, dict):
            raise ManifestError(f"images[{i}] must be an object")
        where = f"images[{i}]"
        meta = ImageMeta(
            image_index=_require(entry, "image_index", int, where),
            source_id=_require(entry, "source_id", str, where),
            width=_require(entry, "width", int, where),
            height=_require(entry, "height", int, where),
        )
        if meta.image_index in seen_images:
            raise IntegrityError(f"duplicate image_index {meta.image_index}")
        seen_images.add(meta.image_index)
        images.append(meta)

    objects = []
    seen_keys = set()
    for i, entry in enumerate(raw_objects):
        if not isinstance(entry, dict):
            raise ManifestError(f"objects[{i}] must be an object")
        where = f"objects[{i}]"
        bbox = entry.get("bbox")
        if bbox is not None:
            if not isinstance(bbox, (list, tuple)) or len(bbox) != 4:
                raise ManifestError(f"field 'bbox' in {where} must be a 4-element array")
            bbox = tuple(float(v) for v in bbox)
        score = entry.get("score")
        if score is not None:
            if isinstance(score, bool) or not isinstance(score, (int, float)):
                raise ManifestError(f"field 'score' in {where} must be a number")
            score = float(score)
        obj = GroundedObject(
            image_index=_require(entry, "image_index", int, where),
            object_index=_require(entry, "object_index", int, where),
            label=_require(entry, "label", str, where),
            bbox=bbox,
            score=score,
        )
        key = (obj.image_index, obj.object_index)
        if key in seen_keys:
            raise IntegrityError(f"duplicate object key img#{key[0]}_obj#{key[1]}")
        seen_keys.add(key)
        if obj.image_index not in seen_images:
            raise IntegrityError(
                f"objects[{i}] references image_index {obj.image_index} "
                f"but no such image exists"
            )
        meta = next(m for m in images if m.image_index == obj.image_index)
        if obj.bbox is not None:
            x0, y0, x1, y1 = obj.bbox
            if x0 < 0 or y0 < 0 or x1 > meta.width or y1 > meta.height:
                raise ManifestError(
                    f"field 'bbox' in {where} exceeds image bounds "
                    f"{meta.width}x{meta.height}"
                )
        objects.append(obj)

    capped: list[GroundedObject] = []
    for meta in images:
        mine = [o for o in objects if o.image_index == meta.image_index]
        # Descending score, unscored last, then ascending object_index.
        mine.sort(key=lambda o: (o.score is None, -(o.score or 0.0), o.object_index))
        capped.extend(mine[:cap])

    images.sort(key=lambda m: m.image_index)
    return GroundingSet(images=images, objects=capped, cap_per_image=cap)


def build_grounding_summary(gs: GroundingSet) -> str:
    """Counts-and-sizes summary shown to the model; never contains labels."""
    lines = []
    for meta in sorted(gs.images, key=lambda m: m.image_index):
        count = len(gs.objects_in(meta.image_index))
        lines.append(f"img#{meta.image_index}: {meta.width}x{meta.height}, {count} objects")
    return "\n".join(lines)


def format_evidence_ref(ref: EvidenceRef) -> str:
    return f"img#{ref.image_index}_obj#{ref.object_index}({ref.label})"


_CANONICAL_RE = re.compile(r"^\s*img#(\d+)_obj#(\d+)\((.*)\)\s*$", re.DOTALL)
_ARTICLE_RE = re.compile(r"^(the|a|an)\s+", re.IGNORECASE)


def _label_key(label: str) -> str:
    return " ".join(label.split()).casefold()


def canonicalize_evidence(
    raw: Sequence[str], gs: GroundingSet
) -> list[Union[EvidenceRef, str]]:
    """Resolve raw citation strings against the grounded-object inventory.

    Resolution order per item: exact canonical-form parse with a valid
    (image, object) key; then a case-insensitive label match that is unique
    within the cited image (or the sole image); otherwise the item stays as
    its unresolved string.
    """
    resolved: list[Union[EvidenceRef, str]] = []
    for item in raw:
        match = _CANONICAL_RE.match(item) if isinstance(item, str) else None
        cited_image: Optional[int] = None
        if match:
            k, j = int(match.group(1)), int(match.group(2))
            obj = gs.lookup(k, j)
            if obj is not None:
                resolved.append(EvidenceRef(k, j, obj.label))
                continue
            cited_image = k
            candidate_label = match.group(3)
        else:
            candidate_label = item if isinstance(item, str) else ""

        if cited_image is None and len(gs.images) == 1:
            cited_image = gs.images[0].image_index

        ref = None
        if cited_image is not None and candidate_label:
            keys = {_label_key(candidate_label)}
            stripped = _ARTICLE_RE.sub("", candidate_label)
            keys.add(_label_key(stripped))
            hits = [
                o
                for o in gs.objects_in(cited_image)
                if _label_key(o.label) in keys
            ]
            if len(hits) == 1:
                hit = hits[0]
                ref = EvidenceRef(hit.image_index, hit.object_index, hit.label)
        resolved.append(ref if ref is not None else item)
    return resolved


def assess_evidence_level(resolved: Sequence[Union[EvidenceRef, str]]) -> OrdinalLevel:
    """Discretize the valid-citation ratio: >= 0.8 high, >= 0.4 medium,
    else low; no citations at all is low."""
    if not resolved:
        return OrdinalLevel.LOW
    good = sum(1 for item in resolved if isinstance(item, EvidenceRef))
    ratio = Fraction(good, len(resolved))
    if ratio >= Fraction(4, 5):
        return OrdinalLevel.HIGH
    if ratio >= Fraction(2, 5):
        return OrdinalLevel.MEDIUM
    return OrdinalLevel.LOW
