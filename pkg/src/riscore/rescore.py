"""Score fusion and the per-image detection re-scoring pipeline.

Re-scoring blends detector class scores with image-text similarity scores.
It never changes the predicted class, only the confidence attached to it.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .embedding import EmbeddingMatrix, ScoreMatrix, SimilarityParams, similarity_scores
from .errors import EmbeddingDimMismatch, ShapeMismatch, UnknownClassKey


@dataclass(frozen=True)
class FusionParams:
    c: float = 0.7
    skip_base: bool = False
    base_class_ids: frozenset = frozenset()

    def __post_init__(self):
        if not (0.0 <= self.c <= 1.0):
            raise ValueError("fusion weight c must lie in [0, 1]")
        object.__setattr__(self, "base_class_ids", frozenset(self.base_class_ids))
        if self.skip_base and not self.base_class_ids:
            raise ValueError("skip_base requires a nonempty base_class_ids set")


@dataclass(frozen=True)
class Detection:
    image_id: object
    det_id: str
    class_id: int
    box: tuple[float, float, float, float]  # x, y, w, h
    score: float
    score_vector: tuple[float, ...] | None = None
    score_raw: float | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        x, y, w, h = self.box
        if w <= 0 or h <= 0:
            raise ValueError(f"detection {self.det_id} has non-positive box size")
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"detection {self.det_id} score outside [0, 1]")
        if self.score_vector is not None:
            vec = tuple(float(v) for v in self.score_vector)
            if any(v < 0.0 or v > 1.0 for v in vec):
                raise ValueError(f"detection {self.det_id} score_vector outside [0, 1]")
            object.__setattr__(self, "score_vector", vec)


def fuse_scores(s_f: ScoreMatrix, s_m: ScoreMatrix, params: FusionParams) -> ScoreMatrix:
    """Elementwise blend c*s_f + (1-c)*s_m.

    With skip_base, columns listed in base_class_ids (column indices here)
    copy s_f bit-for-bit.  The endpoints c=1 and c=0 also copy their input
    exactly rather than going through the blend arithmetic.
    """
    if s_f.values.shape != s_m.values.shape:
        raise ShapeMismatch(
            f"shapes differ: {s_f.values.shape} vs {s_m.values.shape}"
        )
    if params.c == 1.0:
        fused = s_f.values.copy()
    elif params.c == 0.0:
        fused = s_m.values.copy()
    else:
        fused = params.c * s_f.values + (1.0 - params.c) * s_m.values
    if params.skip_base:
        for col in params.base_class_ids:
            fused[:, col] = s_f.values[:, col]
    return ScoreMatrix(fused)


@dataclass
class RescoreResult:
    detections: list[Detection]
    rescored: int
    passed_through: int


def rescore_detections(
    dets: list[Detection],
    det_embs: EmbeddingMatrix,
    text_embs: EmbeddingMatrix,
    class_map: dict[str, int],
    sim: SimilarityParams,
    fusion: FusionParams,
) -> RescoreResult:
    """Replace detection scores with fused detector/similarity scores.

    Class columns follow ascending class id.  Detections carrying a
    score_vector are fused elementwise; scalar-only detections are fused at
    their own class.  Detections without an embedding row pass through
    unchanged and are counted in the result.  Class labels and boxes are
    never altered.
    """
    for name in text_embs.index:
        if name not in class_map:
            raise UnknownClassKey(f"text embedding key {name!r} not in class map")
    if det_embs.rows and det_embs.dim != text_embs.dim:
        raise EmbeddingDimMismatch(
            f"detection dim {det_embs.dim} != text dim {text_embs.dim}"
        )

    class_ids = sorted({class_map[name] for name in text_embs.index})
    col_of = {cid: j for j, cid in enumerate(class_ids)}
    n_classes = len(class_ids)
    # permutation from text-embedding row order to class-id column order
    text_col = [col_of[class_map[name]] for name in text_embs.index]

    emb_row = {key: i for i, key in enumerate(det_embs.index)}
    with_emb = [d for d in dets if d.det_id in emb_row]
    s_m_by_det: dict[str, np.ndarray] = {}
    if with_emb:
        sub = EmbeddingMatrix(
            data=det_embs.data[[emb_row[d.det_id] for d in with_emb]],
            index=tuple(d.det_id for d in with_emb),
            normalized=det_embs.normalized,
        )
        sim_scores = similarity_scores(sub, text_embs, sim)
        reordered = np.empty_like(sim_scores.values)
        for src, dst in enumerate(text_col):
            reordered[:, dst] = sim_scores.values[:, src]
        for d, row in zip(with_emb, reordered):
            s_m_by_det[d.det_id] = row

    skip = fusion.base_class_ids if fusion.skip_base else frozenset()
    # fuse_scores works in column space; translate the class-id skip set
    skip_cols = frozenset(col_of[cid] for cid in skip if cid in col_of)
    if skip_cols:
        vec_fusion = FusionParams(c=fusion.c, skip_base=True, base_class_ids=skip_cols)
    else:
        vec_fusion = FusionParams(c=fusion.c)
    out: list[Detection] = []
    rescored = 0
    passed = 0
    for det in dets:
        row = s_m_by_det.get(det.det_id)
        if row is None:
            out.append(det)
            passed += 1
            continue
        col = col_of.get(det.class_id)
        if det.score_vector is not None:
            if len(det.score_vector) != n_classes:
                raise ShapeMismatch(
                    f"detection {det.det_id} score_vector length "
                    f"{len(det.score_vector)} != {n_classes} classes"
                )
            sf = ScoreMatrix(np.asarray(det.score_vector)[None, :])
            sm = ScoreMatrix(row[None, :])
            fused = fuse_scores(sf, sm, vec_fusion).values[0]
            new_score = float(fused[col]) if col is not None else det.score
            out.append(
                replace(
                    det,
                    score=new_score,
                    score_vector=tuple(fused),
                    score_raw=det.score,
                )
            )
        else:
            # scalar-only results format: fuse the single score at the
            # detection's own class
            if col is None or det.class_id in skip:
                new_score = det.score
            elif fusion.c == 1.0:
                new_score = det.score
            elif fusion.c == 0.0:
                new_score = float(row[col])
            else:
                new_score = fusion.c * det.score + (1.0 - fusion.c) * float(row[col])
            out.append(replace(det, score=new_score, score_raw=det.score))
        rescored += 1
    return RescoreResult(detections=out, rescored=rescored, passed_through=passed)


def load_detections(path) -> list[Detection]:
    """Read a COCO results JSON array, optionally extended with det_id and
    score_vector.  Missing det_ids are synthesized from the array position."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    dets = []
    for i, entry in enumerate(doc):
        known = {"image_id", "category_id", "bbox", "score", "det_id", "score_vector", "score_raw"}
        extra = {k: v for k, v in entry.items() if k not in known}
        vec = entry.get("score_vector")
        dets.append(
            Detection(
                image_id=entry["image_id"],
                det_id=str(entry.get("det_id", f"det{i:06d}")),
                class_id=entry["category_id"],
                box=tuple(float(v) for v in entry["bbox"]),
                score=float(entry["score"]),
                score_vector=tuple(vec) if vec is not None else None,
                score_raw=entry.get("score_raw"),
                extra=extra,
            )
        )
    return dets


def save_detections(dets: list[Detection], path) -> None:
    """Write detections back as COCO results JSON, preserving extra fields."""
    doc = []
    for det in dets:
        entry = {
            "image_id": det.image_id,
            "category_id": det.class_id,
            "bbox": list(det.box),
            "score": det.score,
            "det_id": det.det_id,
        }
        if det.score_vector is not None:
            entry["score_vector"] = list(det.score_vector)
        if det.score_raw is not None:
            entry["score_raw"] = det.score_raw
        entry.update(det.extra)
        doc.append(entry)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")
