"""Salient-region extraction and manifest assembly.

Regions come from connected components of pixels that contrast with the
dominant background color; labels come from a tiny deterministic captioner
(nearest named color plus a shape word).  Everything is pure array math,
so identical inputs always produce identical manifests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import cv2
import numpy as np
from PIL import Image


class AdapterError(ValueError):
    """Unreadable image or invalid adapter configuration."""


@dataclass(frozen=True)
class AdapterConfig:
    image_paths: tuple[str, ...]
    threshold: float = 0.5
    max_objects: int = 8
    out_path: str = "manifest.json"
    min_area_fraction: float = 0.0005  # ignore speckle components

    def __post_init__(self) -> None:
        if not 0.0 <= self.threshold <= 1.0:
            raise AdapterError(f"threshold must be in [0, 1], got {self.threshold}")
        if self.max_objects < 1:
            raise AdapterError(f"max_objects must be >= 1, got {self.max_objects}")


@dataclass(frozen=True)
class RegionObject:
    """One extracted region in manifest field terms."""

    image_index: int
    object_index: int
    label: str
    bbox: tuple[float, float, float, float]
    score: float


@dataclass(frozen=True)
class ImageRecord:
    image_index: int
    source_id: str
    width: int
    height: int
    objects: tuple[RegionObject, ...] = field(default_factory=tuple)


_COLOR_NAMES = {
    "red": (200, 40, 40),
    "green": (40, 170, 60),
    "blue": (50, 70, 200),
    "yellow": (230, 220, 60),
    "orange": (240, 140, 40),
    "purple": (140, 60, 170),
    "brown": (130, 90, 50),
    "black": (20, 20, 20),
    "white": (240, 240, 240),
    "gray": (128, 128, 128),
}

# Maximum possible RGB distance; normalizes contrast into [0, 1).
_MAX_DIST = float(np.sqrt(3) * 255.0)


def _nearest_color_name(rgb: np.ndarray) -> str:
    names = list(_COLOR_NAMES)
    table = np.array([_COLOR_NAMES[n] for n in names], dtype=np.float64)
    distances = np.linalg.norm(table - rgb.astype(np.float64), axis=1)
    return names[int(np.argmin(distances))]


def _shape_word(area: float, bbox_area: float) -> str:
    fill = area / bbox_area if bbox_area else 0.0
    if fill >= 0.92:
        return "rectangle"
    if fill >= 0.6:
        return "round shape"
    return "region"


def caption_region(mean_rgb: np.ndarray, area: float, bbox_area: float) -> str:
    """One short noun phrase for a region crop: '<color> <shape>'."""
    return f"{_nearest_color_name(mean_rgb)} {_shape_word(area, bbox_area)}"


def load_image(path: str) -> np.ndarray:
    p = Path(path)
    if not p.is_file():
        raise AdapterError(f"image not readable: {path}")
    try:
        with Image.open(p) as img:
            return np.asarray(img.convert("RGB"))
    except Exception as exc:  # Pillow raises many concrete types here
        raise AdapterError(f"image not readable: {path}: {exc}") from exc


def _background_color(pixels: np.ndarray) -> np.ndarray:
    """Dominant color estimated from the image border."""
    border = np.concatenate(
        [pixels[0], pixels[-1], pixels[:, 0], pixels[:, -1]], axis=0
    )
    colors, counts = np.unique(border.reshape(-1, 3), axis=0, return_counts=True)
    return colors[int(np.argmax(counts))]


def generate_objects(
    image_path: str, cfg: AdapterConfig, image_index: int
) -> list[RegionObject]:
    """Extract salient regions from one image.

    Components whose contrast score clears the threshold are kept, ordered
    by descending score (ties by top-left position), truncated to
    max_objects, and indexed 1..M in that order.
    """
    pixels = load_image(image_path)
    height, width = pixels.shape[:2]
    background = _background_color(pixels)
    distance = np.linalg.norm(
        pixels.astype(np.float64) - background.astype(np.float64), axis=2
    )
    mask = (distance > 0.08 * _MAX_DIST).astype(np.uint8)
    count, labels, stats, _ = cv2.connectedComponentsWithStats(mask, connectivity=8)

    min_area = max(4.0, cfg.min_area_fraction * width * height)
    candidates = []
    for component in range(1, count):
        x, y, w, h, area = stats[component]
        if area < min_area:
            continue
        region = labels == component
        mean_rgb = pixels[region].mean(axis=0)
        contrast = float(distance[region].mean()) / _MAX_DIST
        score = round(min(contrast, 0.999), 4)
        if score < cfg.threshold:
            continue
        label = caption_region(mean_rgb, float(area), float(w * h))
        bbox = (float(x), float(y), float(x + w), float(y + h))
        candidates.append((score, y, x, label, bbox))

    candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
    return [
        RegionObject(
            image_index=image_index,
            object_index=j,
            label=label,
            bbox=bbox,
            score=score,
        )
        for j, (score, _, _, label, bbox) in enumerate(
            candidates[: cfg.max_objects], start=1
        )
    ]


def process_images(cfg: AdapterConfig) -> list[ImageRecord]:
    records = []
    for k, path in enumerate(cfg.image_paths, start=1):
        pixels = load_image(path)
        height, width = pixels.shape[:2]
        records.append(
            ImageRecord(
                image_index=k,
                source_id=path,
                width=width,
                height=height,
                objects=tuple(generate_objects(path, cfg, k)),
            )
        )
    return records


def build_manifest(records: Sequence[ImageRecord]) -> dict:
    return {
        "images": [
            {
                "image_index": r.image_index,
                "source_id": r.source_id,
                "width": r.width,
                "height": r.height,
            }
            for r in records
        ],
        "objects": [
            {
                "image_index": o.image_index,
                "object_index": o.object_index,
                "label": o.label,
                "bbox": list(o.bbox),
                "score": o.score,
            }
            for r in records
            for o in r.objects
        ],
    }


def emit_manifest(records: Sequence[ImageRecord], path: str) -> dict:
    doc = build_manifest(records)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return doc
