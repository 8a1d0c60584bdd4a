"""Image and text encoders.

Two families are provided: CLIP encoders loaded through transformers
(require downloaded weights), and a deterministic offline encoder used
for tests and plumbing checks.  All encoders return unit-norm float32
rows.
"""
from __future__ import annotations

import hashlib

import numpy as np
from PIL import Image

from .errors import EncoderLoadFailure

CLIP_IDS = {
    "clip-vit-b-16": "openai/clip-vit-base-patch16",
    "clip-vit-l-14-336": "openai/clip-vit-large-patch14-336",
}


class HashGridEncoder:
    """Deterministic encoder with no model weights.

    Images are resized to an 8x8 grayscale grid whose pixel values, plus
    a constant bias component, form the feature vector.  Texts map to
    unit vectors drawn from a generator seeded by the SHA-256 of the
    string, so equal strings always encode identically.
    """

    dim = 65

    def encode_images(self, images: list[Image.Image]) -> np.ndarray:
        rows = np.empty((len(images), self.dim), dtype=np.float64)
        for i, img in enumerate(images):
            grid = np.asarray(
                img.convert("L").resize((8, 8), Image.BILINEAR), dtype=np.float64
            )
            rows[i, :64] = grid.reshape(-1) / 255.0
            rows[i, 64] = 1.0  # bias keeps all-black crops off the zero vector
        return rows / np.linalg.norm(rows, axis=1, keepdims=True)

    def encode_texts(self, texts: list[str]) -> np.ndarray:
        rows = np.empty((len(texts), self.dim), dtype=np.float64)
        for i, text in enumerate(texts):
            digest = hashlib.sha256(text.encode("utf-8")).digest()
            rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
            rows[i] = rng.standard_normal(self.dim)
        return rows / np.linalg.norm(rows, axis=1, keepdims=True)


class ClipEncoder:
    """CLIP image/text towers via transformers; needs local weights."""

    def __init__(self, model_name: str):
        try:
            import torch
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise EncoderLoadFailure(f"transformers/torch unavailable: {exc}") from exc
        try:
            self._model = CLIPModel.from_pretrained(model_name)
            self._processor = CLIPProcessor.from_pretrained(model_name)
        except Exception as exc:
            raise EncoderLoadFailure(f"cannot load {model_name}: {exc}") from exc
        self._torch = torch
        self._model.eval()
        self.dim = int(self._model.config.projection_dim)

    def encode_images(self, images):
        inputs = self._processor(images=images, return_tensors="pt")
        with self._torch.no_grad():
            feats = self._model.get_image_features(**inputs)
        feats = feats / feats.norm(dim=-1, keepdim=True)
        return feats.cpu().numpy().astype(np.float64)

    def encode_texts(self, texts):
        inputs = self._processor(text=texts, return_tensors="pt", padding=True)
        with self._torch.no_grad():
            feats = self._model.get_text_features(**inputs)
        feats = feats / feats.norm(dim=-1, keepdim=True)
        return feats.cpu().numpy().astype(np.float64)


def get_encoder(encoder_id: str):
    """Resolve an encoder id to an encoder instance.

    Known ids: "hash-grid" (offline, deterministic), "clip-vit-b-16"
    (default CLIP), "clip-vit-l-14-336".
    """
    if encoder_id == "hash-grid":
        return HashGridEncoder()
    if encoder_id in CLIP_IDS:
        return ClipEncoder(CLIP_IDS[encoder_id])
    raise EncoderLoadFailure(f"unknown encoder id: {encoder_id!r}")
