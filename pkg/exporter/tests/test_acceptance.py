"""Acceptance gate for the exporter: full round trip through the
consuming package's loader."""
import json

import numpy as np
from PIL import Image

from rembexport import HashGridEncoder, PromptTemplate
from rembexport import export_detection_embeddings, export_text_embeddings
from riscore.embedding import load_embeddings


def report(name, passed, detail):
    print(f"{'PASS' if passed else 'FAIL'}  {name}  ({detail})")
    assert passed, f"{name}: {detail}"


def test_exporter_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    encoder = HashGridEncoder()

    # synthetic images and a results file mixing valid, degenerate, and
    # explicitly keyed detections
    for image_id in range(1, 4):
        pixels = rng.integers(0, 256, size=(48, 64, 3), dtype=np.uint8)
        Image.fromarray(pixels).save(tmp_path / f"{image_id}.png")
    entries = []
    for i in range(12):
        image_id = 1 + i % 3
        if i % 5 == 4:
            box = [200.0, 200.0, 10.0, 10.0]  # fully outside the 64x48 frame
        else:
            box = [float(rng.uniform(0, 40)), float(rng.uniform(0, 30)),
                   float(rng.uniform(5, 24)), float(rng.uniform(5, 18))]
        entries.append({
            "image_id": image_id, "category_id": 1 + i % 4, "bbox": box,
            "score": round(float(rng.uniform(0.1, 0.9)), 4),
        })
    results = tmp_path / "results.json"
    results.write_text(json.dumps(entries))

    det_out = tmp_path / "dets.remb"
    stats = export_detection_embeddings(tmp_path, results, encoder, det_out)
    text_out = tmp_path / "text.remb"
    export_text_embeddings(
        ["cat", "dog", "bus", "sofa"], PromptTemplate(), encoder, text_out
    )

    det_matrix = load_embeddings(det_out)
    text_matrix = load_embeddings(text_out)

    norms = np.concatenate([
        np.linalg.norm(det_matrix.data, axis=1),
        np.linalg.norm(text_matrix.data, axis=1),
    ])
    worst_norm = float(np.abs(norms - 1.0).max())

    skipped_ids = {d for d, _ in stats.skipped}
    expected_keys = [
        f"det{i:06d}" for i in range(len(entries))
        if f"det{i:06d}" not in skipped_ids
    ]
    bijective = (
        list(det_matrix.index) == expected_keys
        and len(set(det_matrix.index)) == len(det_matrix.index)
        and len(expected_keys) + len(skipped_ids) == len(entries)
    )

    report(
        "exporter round trip via the primary loader",
        worst_norm < 1e-4 and bijective and len(skipped_ids) > 0,
        f"max norm err {worst_norm:.3g}, rows {det_matrix.data.shape[0]}, "
        f"skipped {len(skipped_ids)}, keys bijective={bijective}",
    )
