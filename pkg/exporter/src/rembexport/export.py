"""Export operations: prompted class-name embeddings and detection-crop
embeddings, both written as RISF-EMB files."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import BadTemplate, DuplicateKey, MissingImage
from .remb import write_remb

_SLOT = "{class name}"
_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


@dataclass(frozen=True)
class PromptTemplate:
    """A text template with exactly one "{class name}" slot."""

    template: str = "this is a {class name}"

    def __post_init__(self):
        if self.template.count(_SLOT) != 1:
            raise BadTemplate(
                f"template must contain exactly one {_SLOT!r} slot: {self.template!r}"
            )

    def render(self, class_name: str) -> str:
        rendered = self.template.replace(_SLOT, class_name)
        if not rendered.strip():
            raise BadTemplate("rendered prompt is empty")
        return rendered


def export_text_embeddings(class_names, template, encoder, out_path,
                           batch_size: int = 64) -> None:
    """Encode one prompt per class name and write a normalized RISF-EMB file.

    The sidecar index holds the raw class names, not the rendered prompts,
    so rows line up with the class map used downstream.
    """
    class_names = list(class_names)
    if not class_names:
        raise ValueError("class_names must be non-empty")
    if len(set(class_names)) != len(class_names):
        raise DuplicateKey("class names must be unique")
    prompts = [template.render(name) for name in class_names]
    chunks = [
        encoder.encode_texts(prompts[i: i + batch_size])
        for i in range(0, len(prompts), batch_size)
    ]
    data = np.vstack(chunks)
    data = data / np.linalg.norm(data, axis=1, keepdims=True)
    write_remb(out_path, data, class_names, normalized=True)


def _find_image(images_dir: Path, image_id) -> Path:
    stems = [str(image_id), f"{int(image_id):012d}"] if str(image_id).isdigit() \
        else [str(image_id)]
    for stem in stems:
        for suffix in _IMAGE_SUFFIXES:
            candidate = images_dir / (stem + suffix)
            if candidate.exists():
                return candidate
    raise MissingImage(f"no image file for image_id {image_id} in {images_dir}")


def _clip_box(box, width, height):
    x, y, w, h = box
    left = max(0.0, x)
    top = max(0.0, y)
    right = min(float(width), x + w)
    bottom = min(float(height), y + h)
    return left, top, right, bottom


@dataclass
class ExportStats:
    exported: int
    skipped: list[tuple[str, str]]  # (det_id, reason)


def export_detection_embeddings(images_dir, results_json, encoder, out_path,
                                batch_size: int = 32) -> ExportStats:
    """Crop each detection box, encode the crops, and write a RISF-EMB file.

    Rows follow results-file order; the sidecar index holds det_id keys
    (synthesized as det000000, det000001, ... when the results file has
    none, matching the downstream loader).  Boxes are clipped to image
    bounds; crops with no positive clipped area are skipped and recorded
    in a text sidecar at out_path + ".skipped" as "det_id<TAB>reason".
    """
    images_dir = Path(images_dir)
    with open(results_json, "r", encoding="utf-8") as fh:
        results = json.load(fh)

    keys = []
    crops = []
    skipped = []
    opened: dict[object, Image.Image] = {}
    for i, entry in enumerate(results):
        det_id = entry.get("det_id", f"det{i:06d}")
        image_id = entry["image_id"]
        if image_id not in opened:
            opened[image_id] = Image.open(_find_image(images_dir, image_id))
        img = opened[image_id]
        left, top, right, bottom = _clip_box(entry["bbox"], img.width, img.height)
        if right <= left or bottom <= top:
            skipped.append((det_id, "empty crop after clipping to image bounds"))
            continue
        keys.append(det_id)
        crops.append(img.crop((left, top, right, bottom)))

    if keys:
        chunks = [
            encoder.encode_images(crops[i: i + batch_size])
            for i in range(0, len(crops), batch_size)
        ]
        data = np.vstack(chunks)
        data = data / np.linalg.norm(data, axis=1, keepdims=True)
    else:
        data = np.empty((0, encoder.dim), dtype=np.float64)
    write_remb(out_path, data, keys, normalized=True)
    with open(str(out_path) + ".skipped", "w", encoding="utf-8") as fh:
        for det_id, reason in skipped:
            fh.write(f"{det_id}\t{reason}\n")
    return ExportStats(exported=len(keys), skipped=skipped)
