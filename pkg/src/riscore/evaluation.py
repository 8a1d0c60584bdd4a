"""COCO-style detection evaluation: IoU, greedy matching, 101-point AP."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .cocoio import AnnotationSet
from .errors import NoGroundTruth

IOU_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))
RECALL_GRID = np.arange(101) / 100.0


def iou(a, b) -> float:
    """Intersection over union of two (x, y, w, h) boxes."""
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    ix = max(0.0, min(ax + aw, bx + bw) - max(ax, bx))
    iy = max(0.0, min(ay + ah, by + bh) - max(ay, by))
    inter = ix * iy
    union = aw * ah + bw * bh - inter
    return inter / union if union > 0 else 0.0


def match_detections(dets, gt_boxes, iou_thr: float) -> list[bool]:
    """Greedy one-to-one matching for a single image and class.

    ``dets`` is a list of (det_id, score, box); matching walks detections by
    descending score (ties by det_id) and takes the unmatched ground truth
    with the highest IoU >= iou_thr.  Returns TP flags in the walked order.
    """
    order = sorted(range(len(dets)), key=lambda i: (-dets[i][1], dets[i][0]))
    taken = [False] * len(gt_boxes)
    flags = []
    for i in order:
        _, _, box = dets[i]
        best, best_iou = -1, -1.0
        for j, gt in enumerate(gt_boxes):
            if taken[j]:
                continue
            v = iou(box, gt)
            if v >= iou_thr and v > best_iou:
                best, best_iou = j, v
        if best >= 0:
            taken[best] = True
            flags.append(True)
        else:
            flags.append(False)
    return flags


def average_precision(tp_sequence, n_gt: int) -> tuple[float, np.ndarray]:
    """101-point interpolated AP for a score-sorted TP/FP sequence.

    Returns the AP and the interpolated precision at each recall grid point.
    """
    if n_gt <= 0:
        raise ValueError("n_gt must be positive")
    tp = np.asarray(tp_sequence, dtype=np.float64)
    if tp.size == 0:
        return 0.0, np.zeros_like(RECALL_GRID)
    cum_tp = np.cumsum(tp)
    recall = cum_tp / n_gt
    precision = cum_tp / np.arange(1, tp.size + 1)
    # precision envelope: running max from the right
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, RECALL_GRID, side="left")
    interp = np.where(idx < tp.size, envelope[np.minimum(idx, tp.size - 1)], 0.0)
    return float(interp.mean()), interp


@dataclass
class ApReport:
    per_class_ap: dict[int, float]
    per_class_ap50: dict[int, float]
    per_class_ap75: dict[int, float]
    mean_ap: float
    mean_ap50: float
    mean_ap75: float
    base_ap: float | None = None
    novel_ap: float | None = None
    base_ap50: float | None = None
    novel_ap50: float | None = None
    pr_curves: dict[tuple[int, float], np.ndarray] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        doc = {
            "per_class_ap": {str(k): v for k, v in sorted(self.per_class_ap.items())},
            "per_class_ap50": {str(k): v for k, v in sorted(self.per_class_ap50.items())},
            "per_class_ap75": {str(k): v for k, v in sorted(self.per_class_ap75.items())},
            "mean_ap": self.mean_ap,
            "mean_ap50": self.mean_ap50,
            "mean_ap75": self.mean_ap75,
        }
        for name in ("base_ap", "novel_ap", "base_ap50", "novel_ap50"):
            value = getattr(self, name)
            if value is not None:
                doc[name] = value
        return doc


def coco_map(
    dets,
    gts: AnnotationSet,
    class_partition: tuple[set, set] | None = None,
    max_dets: int | None = None,
) -> ApReport:
    """AP over IoU 0.50:0.05:0.95 plus AP50/AP75, averaged over classes.

    ``dets`` is a list of rescore.Detection.  Classes with zero ground truth
    are excluded from every mean.  ``class_partition`` is an optional
    (base_ids, novel_ids) pair adding partition means to the report.
    """
    gt_by_img_class: dict[tuple, list] = {}
    n_gt: dict[int, int] = {}
    for ann in gts.annotations:
        if ann.iscrowd:
            continue
        gt_by_img_class.setdefault((ann.image_id, ann.category_id), []).append(ann.bbox)
        n_gt[ann.category_id] = n_gt.get(ann.category_id, 0) + 1
    if not n_gt:
        raise NoGroundTruth("no non-crowd ground-truth annotations")

    det_by_class: dict[int, list] = {cid: [] for cid in n_gt}
    for det in dets:
        if det.class_id in det_by_class:
            det_by_class[det.class_id].append(det)

    per_ap: dict[int, float] = {}
    per_ap50: dict[int, float] = {}
    per_ap75: dict[int, float] = {}
    pr_curves: dict[tuple[int, float], np.ndarray] = {}
    for cid in sorted(n_gt):
        cdets = sorted(det_by_class[cid], key=lambda d: (-d.score, d.det_id))
        if max_dets is not None:
            by_img: dict = {}
            capped = []
            for d in cdets:
                cnt = by_img.get(d.image_id, 0)
                if cnt < max_dets:
                    capped.append(d)
                    by_img[d.image_id] = cnt + 1
            cdets = capped
        aps = []
        for thr in IOU_THRESHOLDS:
            flags: dict[str, bool] = {}
            by_img: dict = {}
            for d in cdets:
                by_img.setdefault(d.image_id, []).append(d)
            for img_id, img_dets in by_img.items():
                triples = [(d.det_id, d.score, d.box) for d in img_dets]
                order = sorted(
                    range(len(triples)),
                    key=lambda i: (-triples[i][1], triples[i][0]),
                )
                matched = match_detections(
                    triples, gt_by_img_class.get((img_id, cid), []), thr
                )
                for i, tp in zip(order, matched):
                    flags[triples[i][0]] = tp
            tp_seq = [flags[d.det_id] for d in cdets]
            ap, curve = average_precision(tp_seq, n_gt[cid])
            aps.append(ap)
            pr_curves[(cid, thr)] = curve
        per_ap[cid] = float(np.mean(aps))
        per_ap50[cid] = aps[0]
        per_ap75[cid] = aps[IOU_THRESHOLDS.index(0.75)]

    def mean_over(class_ids, table):
        present = [table[c] for c in class_ids if c in table]
        return float(np.mean(present)) if present else None

    report = ApReport(
        per_class_ap=per_ap,
        per_class_ap50=per_ap50,
        per_class_ap75=per_ap75,
        mean_ap=mean_over(per_ap, per_ap),
        mean_ap50=mean_over(per_ap50, per_ap50),
        mean_ap75=mean_over(per_ap75, per_ap75),
        pr_curves=pr_curves,
    )
    if class_partition is not None:
        base_ids, novel_ids = class_partition
        report.base_ap = mean_over(base_ids, per_ap)
        report.novel_ap = mean_over(novel_ids, per_ap)
        report.base_ap50 = mean_over(base_ids, per_ap50)
        report.novel_ap50 = mean_over(novel_ids, per_ap50)
    return report


def write_report_json(report: ApReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json_dict(), fh, sort_keys=True, indent=1)
        fh.write("\n")


def write_report_csv(report: ApReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class_id", "ap", "ap50"])
        for cid in sorted(report.per_class_ap):
            writer.writerow(
                [cid, f"{report.per_class_ap[cid]:.17g}", f"{report.per_class_ap50[cid]:.17g}"]
            )
