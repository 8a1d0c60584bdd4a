"""COCO-format annotations, k-shot seed sampling, and missing-annotation stats."""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import (
    DanglingReference,
    InsufficientInstances,
    ParseError,
    SubsetNotContained,
    TooFewSamples,
)


@dataclass(frozen=True)
class ImageInfo:
    id: int
    width: int
    height: int


@dataclass(frozen=True)
class Category:
    id: int
    name: str


@dataclass(frozen=True)
class Annotation:
    id: int
    image_id: int
    category_id: int
    bbox: tuple[float, float, float, float]  # x, y, w, h
    iscrowd: bool = False


@dataclass
class AnnotationSet:
    images: list[ImageInfo]
    categories: list[Category]
    annotations: list[Annotation]

    def __post_init__(self):
        image_ids = {im.id for im in self.images}
        cat_ids = {c.id for c in self.categories}
        seen = set()
        for ann in self.annotations:
            if ann.id in seen:
                raise ParseError(f"duplicate annotation id {ann.id}")
            seen.add(ann.id)
            if ann.image_id not in image_ids:
                raise DanglingReference(ann.id, f"(image {ann.image_id})")
            if ann.category_id not in cat_ids:
                raise DanglingReference(ann.id, f"(category {ann.category_id})")
            x, y, w, h = ann.bbox
            if w <= 0 or h <= 0:
                raise ParseError(f"annotation {ann.id} has non-positive box size")

    def category_name(self, class_id: int) -> str:
        for c in self.categories:
            if c.id == class_id:
                return c.name
        raise KeyError(class_id)

    def anns_by_image(self) -> dict[int, list[Annotation]]:
        out: dict[int, list[Annotation]] = {im.id: [] for im in self.images}
        for ann in self.annotations:
            out[ann.image_id].append(ann)
        return out


def parse_annotations(path) -> AnnotationSet:
    """Load a COCO annotation JSON; unknown fields are ignored."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return annotation_set_from_dict(doc, source=str(path))


def annotation_set_from_dict(doc: dict, source: str = "<dict>") -> AnnotationSet:
    for key in ("images", "categories", "annotations"):
        if not isinstance(doc.get(key), list):
            raise ParseError(f"{source}: missing or invalid '{key}' array")
    try:
        images = [
            ImageInfo(im["id"], im.get("width", 0), im.get("height", 0))
            for im in doc["images"]
        ]
        categories = [Category(c["id"], c["name"]) for c in doc["categories"]]
        annotations = [
            Annotation(
                a["id"],
                a["image_id"],
                a["category_id"],
                tuple(float(v) for v in a["bbox"]),
                bool(a.get("iscrowd", 0)),
            )
            for a in doc["annotations"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{source}: malformed entry ({exc})") from exc
    return AnnotationSet(images, categories, annotations)


def annotation_set_to_dict(ann_set: AnnotationSet) -> dict:
    return {
        "images": [
            {"id": im.id, "width": im.width, "height": im.height}
            for im in ann_set.images
        ],
        "categories": [{"id": c.id, "name": c.name} for c in ann_set.categories],
        "annotations": [
            {
                "id": a.id,
                "image_id": a.image_id,
                "category_id": a.category_id,
                "bbox": list(a.bbox),
                "iscrowd": int(a.iscrowd),
            }
            for a in ann_set.annotations
        ],
    }


@dataclass
class KShotSeed:
    k: int
    rng_seed: int
    subset: AnnotationSet
    provenance: dict[int, list[int]]  # class_id -> sampled ann ids


def sample_kshot(full: AnnotationSet, k: int, classes, rng_seed: int) -> KShotSeed:
    """Greedy per-class sampling of whole images until >= k instances.

    Per class: shuffle the images containing it, add whole images until the
    class's instance count reaches k.  Only the sampled annotations survive
    into the subset, so every other object on a selected image becomes a
    missing annotation.  Crowd annotations are never sampled.
    """
    rng = random.Random(rng_seed)
    per_image: dict[int, dict[int, list[Annotation]]] = {}
    for ann in full.annotations:
        if ann.iscrowd:
            continue
        per_image.setdefault(ann.image_id, {}).setdefault(
            ann.category_id, []
        ).append(ann)

    kept_anns: dict[int, Annotation] = {}
    kept_images: set[int] = set()
    provenance: dict[int, list[int]] = {}
    for class_id in classes:
        candidates = sorted(
            img for img, by_cat in per_image.items() if class_id in by_cat
        )
        supply = sum(len(per_image[img][class_id]) for img in candidates)
        if supply < k:
            raise InsufficientInstances(class_id, supply, k)
        rng.shuffle(candidates)
        count = 0
        sampled: list[int] = []
        for img in candidates:
            if count >= k:
                break
            kept_images.add(img)
            for ann in per_image[img][class_id]:
                kept_anns[ann.id] = ann
                sampled.append(ann.id)
                count += 1
        provenance[class_id] = sorted(sampled)

    subset = AnnotationSet(
        images=[im for im in full.images if im.id in kept_images],
        categories=list(full.categories),
        annotations=sorted(kept_anns.values(), key=lambda a: a.id),
    )
    return KShotSeed(k=k, rng_seed=rng_seed, subset=subset, provenance=provenance)


def save_kshot(seed: KShotSeed, path) -> None:
    """Serialize a seed as COCO JSON plus a top-level provenance key."""
    doc = annotation_set_to_dict(seed.subset)
    doc["provenance"] = {
        "k": seed.k,
        "rng_seed": seed.rng_seed,
        "sampled": {str(c): ids for c, ids in sorted(seed.provenance.items())},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


@dataclass
class MissingStats:
    """Per-class counts of annotations dropped by sampling, for one seed."""

    per_class: dict[int, int]

    def total(self) -> int:
        return sum(self.per_class.values())


def missing_annotation_stats(full: AnnotationSet, subset: AnnotationSet) -> MissingStats:
    """Count, per class, the full-set annotations absent from the subset.

    Only images present in the subset contribute; crowd annotations are
    excluded on both sides.
    """
    full_images = {im.id for im in full.images}
    subset_images = {im.id for im in subset.images}
    if not subset_images <= full_images:
        raise SubsetNotContained("subset contains images not in the full set")
    full_ann_ids = {a.id for a in full.annotations}
    subset_ids = {a.id for a in subset.annotations}
    if not subset_ids <= full_ann_ids:
        raise SubsetNotContained("subset contains annotations not in the full set")

    per_class = {c.id: 0 for c in full.categories}
    for ann in full.annotations:
        if ann.iscrowd or ann.image_id not in subset_images:
            continue
        if ann.id not in subset_ids:
            per_class[ann.category_id] += 1
    return MissingStats(per_class=per_class)


def aggregate_ci(per_seed_values) -> tuple[float, float, float]:
    """Mean with a Student-t 95% confidence interval (small seed counts)."""
    values = np.asarray(list(per_seed_values), dtype=np.float64)
    n = values.size
    if n < 2:
        raise TooFewSamples("need at least 2 values for a confidence interval")
    mean = float(values.mean())
    s = float(values.std(ddof=1))
    half = float(stats.t.ppf(0.975, n - 1)) * s / np.sqrt(n)
    return mean, mean - half, mean + half


def aggregate_missing(per_seed: list[MissingStats]) -> dict[int, tuple[float, float, float]]:
    """Per-class (mean, ci_low, ci_high) across seeds."""
    if not per_seed:
        return {}
    class_ids = sorted(per_seed[0].per_class)
    return {
        cid: aggregate_ci([s.per_class.get(cid, 0) for s in per_seed])
        for cid in class_ids
    }
