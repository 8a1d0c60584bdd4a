"""Shared synthetic-data builders for the test suite."""
import json

import numpy as np
import pytest

from riscore.cocoio import Annotation, AnnotationSet, Category, ImageInfo
from riscore.embedding import EmbeddingMatrix, l2_normalize
from riscore.rescore import Detection


def make_dataset(rng, n_images=12, class_ids=(1, 2, 3, 4), anns_per_image=(2, 6),
                 crowd_rate=0.0):
    """Random COCO-style annotation set with boxes inside 640x480 images."""
    images = [ImageInfo(i + 1, 640, 480) for i in range(n_images)]
    categories = [Category(cid, f"class{cid}") for cid in class_ids]
    annotations = []
    ann_id = 1
    for im in images:
        for _ in range(int(rng.integers(anns_per_image[0], anns_per_image[1] + 1))):
            w = float(rng.uniform(20, 120))
            h = float(rng.uniform(20, 120))
            x = float(rng.uniform(0, 640 - w))
            y = float(rng.uniform(0, 480 - h))
            annotations.append(
                Annotation(
                    ann_id, im.id, int(rng.choice(class_ids)), (x, y, w, h),
                    iscrowd=bool(rng.random() < crowd_rate),
                )
            )
            ann_id += 1
    return AnnotationSet(images, categories, annotations)


def dataset_to_json(ann_set, path):
    from riscore.cocoio import annotation_set_to_dict

    with open(path, "w", encoding="utf-8") as fh:
        json.dump(annotation_set_to_dict(ann_set), fh, sort_keys=True)


def basis_embeddings(class_ids, dim=None):
    """One orthonormal basis vector per class; maximally separable."""
    n = len(class_ids)
    dim = dim or n
    data = np.eye(n, dim)
    return l2_normalize(
        EmbeddingMatrix(data=data, index=tuple(f"class{cid}" for cid in class_ids))
    )


def confusion_fixture(rng, n_images=20, class_ids=(1, 2, 3, 4, 5), confusion=0.3):
    """Ground truth + detections where 30% of labels are wrong, plus
    embeddings whose similarity scores are class-correct.

    Detection embeddings copy the text embedding of the true class, so the
    similarity route knows the right answer even when the label is confused.
    """
    gts = make_dataset(rng, n_images=n_images, class_ids=class_ids,
                       anns_per_image=(2, 4))
    text = basis_embeddings(class_ids)
    class_map = {f"class{cid}": cid for cid in class_ids}
    col = {cid: i for i, cid in enumerate(class_ids)}

    dets = []
    det_rows = []
    det_keys = []
    for ann in gts.annotations:
        det_id = f"d{ann.id:05d}"
        confused = rng.random() < confusion
        if confused:
            wrong = int(rng.choice([c for c in class_ids if c != ann.category_id]))
            label, score = wrong, float(rng.uniform(0.6, 0.9))
        else:
            label, score = ann.category_id, float(rng.uniform(0.3, 0.7))
        dets.append(
            Detection(
                image_id=ann.image_id, det_id=det_id, class_id=label,
                box=ann.bbox, score=score,
            )
        )
        det_rows.append(text.data[col[ann.category_id]])
        det_keys.append(det_id)

    det_embs = EmbeddingMatrix(
        data=np.asarray(det_rows), index=tuple(det_keys), normalized=True
    )
    return gts, dets, det_embs, text, class_map


def build_cli_fixture(tmp_path, rng, n_images=10):
    """Write a complete on-disk fixture: gt, results, embeddings, class map."""
    from riscore.embedding import save_embeddings
    from riscore.rescore import save_detections

    gts, dets, det_embs, text, class_map = confusion_fixture(rng, n_images=n_images)
    paths = {
        "gt": tmp_path / "gt.json",
        "dets": tmp_path / "dets.json",
        "image_embs": tmp_path / "dets.remb",
        "text_embs": tmp_path / "text.remb",
        "class_map": tmp_path / "classes.json",
    }
    dataset_to_json(gts, paths["gt"])
    save_detections(dets, paths["dets"])
    save_embeddings(det_embs, paths["image_embs"])
    save_embeddings(text, paths["text_embs"])
    paths["class_map"].write_text(json.dumps(class_map, sort_keys=True))
    return paths, (gts, dets, det_embs, text, class_map)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
