"""Command-line frontend for the full re-scoring / evaluation pipeline.

Exit codes: 0 success, 1 usage error, 2 data error, 3 invariant-check
failure.  Options may also be supplied through a TOML config file via
``--config``; explicit flags win over config values.
"""
from __future__ import annotations

import csv
import json
import os
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import bnrl, cocoio, evaluation, plots, rescore
from .embedding import SimilarityParams, load_embeddings
from .errors import RiscoreError


class InvariantFailure(Exception):
    """A numerical invariant check failed (exit code 3)."""


def _load_config(path):
    if path is None:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _pick(flag_value, config, key, default):
    if flag_value is not None:
        return flag_value
    return config.get(key, default)


def _parse_id_list(text):
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(tok) for tok in str(text).replace(",", " ").split()]


def _parse_float_list(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(tok) for tok in str(text).replace(",", " ").split()]


def _load_class_map(path) -> dict[str, int]:
    """Accepts either a COCO annotation JSON (categories array) or a plain
    {class name: class id} JSON object."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if isinstance(doc, dict) and "categories" in doc:
        return {c["name"]: int(c["id"]) for c in doc["categories"]}
    if isinstance(doc, dict):
        return {str(k): int(v) for k, v in doc.items()}
    raise RiscoreError(f"{path}: not a class map")


def worker_count() -> int:
    """Worker cap, honoring the RISCORE_THREADS environment variable."""
    n = os.cpu_count() or 1
    env = os.environ.get("RISCORE_THREADS")
    if env:
        try:
            n = max(1, min(n, int(env)))
        except ValueError:
            pass
    return n


@click.group()
def cli():
    """Re-score detections with image-text similarity and analyze results."""


@cli.command(name="rescore")
@click.option("--dets", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--image-embs", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--text-embs", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--class-map", "class_map_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--c", "c_weight", type=float, default=None, help="Fusion weight, default 0.7.")
@click.option("--tau", type=float, default=None, help="Softmax temperature, default 0.01.")
@click.option("--skip-base", is_flag=True, default=False, help="Copy detector scores for base classes.")
@click.option("--base-classes", default=None, help="Comma-separated base class ids.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
def cmd_rescore(dets, image_embs, text_embs, class_map_path, out, c_weight, tau,
                skip_base, base_classes, config_path):
    """Fuse detector scores with similarity scores; write rescored results."""
    config = _load_config(config_path)
    c_weight = _pick(c_weight, config, "c", 0.7)
    tau = _pick(tau, config, "tau", 0.01)
    base_ids = _parse_id_list(_pick(base_classes, config, "base_classes", None)) or []
    skip_base = skip_base or bool(config.get("skip_base", False))

    detections = rescore.load_detections(dets)
    det_embs = load_embeddings(image_embs)
    text_matrix = load_embeddings(text_embs)
    class_map = _load_class_map(class_map_path)
    fusion = rescore.FusionParams(
        c=c_weight, skip_base=skip_base, base_class_ids=frozenset(base_ids)
    )
    result = rescore.rescore_detections(
        detections, det_embs, text_matrix, class_map,
        SimilarityParams(tau=tau), fusion,
    )
    rescore.save_detections(result.detections, out)
    click.echo(f"rescored {result.rescored}, passed through {result.passed_through}")


def _eval_files(gt_path, results_path, partition, max_dets):
    gts = cocoio.parse_annotations(gt_path)
    dets = rescore.load_detections(results_path)
    return evaluation.coco_map(dets, gts, class_partition=partition, max_dets=max_dets)


def _partition_from(base_classes, novel_classes):
    base = _parse_id_list(base_classes)
    novel = _parse_id_list(novel_classes)
    if base is None and novel is None:
        return None
    return (set(base or []), set(novel or []))


@cli.command(name="eval")
@click.option("--gt", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--results", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--compare", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Second results file; emits a per-class AP delta table.")
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--base-classes", default=None)
@click.option("--novel-classes", default=None)
@click.option("--max-dets", type=int, default=None)
@click.option("--plot/--no-plot", default=False)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
def cmd_eval(gt, results, compare, out_dir, base_classes, novel_classes, max_dets,
             plot, config_path):
    """Evaluate COCO results against ground truth; write JSON and CSV reports."""
    config = _load_config(config_path)
    base_classes = _pick(base_classes, config, "base_classes", None)
    novel_classes = _pick(novel_classes, config, "novel_classes", None)
    partition = _partition_from(base_classes, novel_classes)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    report = _eval_files(gt, results, partition, max_dets)
    evaluation.write_report_json(report, out / "report.json")
    evaluation.write_report_csv(report, out / "report.csv")
    click.echo(f"mean AP {report.mean_ap:.4f}  AP50 {report.mean_ap50:.4f}")

    if compare is not None:
        other = _eval_files(gt, compare, partition, max_dets)
        with open(out / "delta.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["class_id", "ap_delta", "ap50_delta"])
            for cid in sorted(report.per_class_ap):
                writer.writerow([
                    cid,
                    f"{other.per_class_ap[cid] - report.per_class_ap[cid]:.17g}",
                    f"{other.per_class_ap50[cid] - report.per_class_ap50[cid]:.17g}",
                ])

    if plot:
        cids = sorted(report.per_class_ap)
        plots.bar_plot(
            [str(c) for c in cids],
            [report.per_class_ap[c] for c in cids],
            "AP", out / "ap_per_class.png", title="per-class AP",
        )


@cli.command(name="sweep-c")
@click.option("--gt", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--dets", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--image-embs", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--text-embs", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--class-map", "class_map_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--grid", default=None, help="Comma-separated c values in [0,1].")
@click.option("--grid-points", type=int, default=None, help="Evenly spaced grid size.")
@click.option("--tau", type=float, default=None)
@click.option("--base-classes", default=None)
@click.option("--novel-classes", default=None)
@click.option("--plot/--no-plot", default=False)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
def cmd_sweep_c(gt, dets, image_embs, text_embs, class_map_path, out_dir, grid,
                grid_points, tau, base_classes, novel_classes, plot, config_path):
    """Evaluate AP over a grid of fusion weights; write sweep_c.csv."""
    config = _load_config(config_path)
    tau = _pick(tau, config, "tau", 0.01)
    grid = _pick(grid, config, "grid", None)
    grid_points = _pick(grid_points, config, "grid_points", None)
    base_classes = _pick(base_classes, config, "base_classes", None)
    novel_classes = _pick(novel_classes, config, "novel_classes", None)
    if grid is not None:
        c_values = _parse_float_list(grid)
    else:
        n = grid_points or 11
        c_values = [round(v, 10) for v in np.linspace(0.0, 1.0, n)]
    if any(v < 0.0 or v > 1.0 for v in c_values):
        raise click.UsageError("grid values must lie in [0, 1]")

    partition = _partition_from(base_classes, novel_classes)
    detections = rescore.load_detections(dets)
    det_embs = load_embeddings(image_embs)
    text_matrix = load_embeddings(text_embs)
    class_map = _load_class_map(class_map_path)
    gts = cocoio.parse_annotations(gt)
    sim = SimilarityParams(tau=tau)

    def eval_point(c_value):
        result = rescore.rescore_detections(
            detections, det_embs, text_matrix, class_map, sim,
            rescore.FusionParams(c=c_value),
        )
        report = evaluation.coco_map(result.detections, gts, class_partition=partition)
        nap = report.novel_ap if report.novel_ap is not None else report.mean_ap
        nap50 = report.novel_ap50 if report.novel_ap50 is not None else report.mean_ap50
        return nap, nap50

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        rows = list(pool.map(eval_point, c_values))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep_c.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["c", "nap", "nap50"])
        for c_value, (nap, nap50) in zip(c_values, rows):
            writer.writerow([f"{c_value:.17g}", f"{nap:.17g}", f"{nap50:.17g}"])
    if plot:
        plots.multi_line_plot(
            c_values,
            {"nAP": [r[0] for r in rows], "nAP50": [r[1] for r in rows]},
            "c", "AP", out / "sweep_c.png", title="fusion weight sweep",
        )
    click.echo(f"swept {len(c_values)} grid points")


@cli.command(name="monotonicity")
@click.option("--n", "n_classes", type=int, default=None, help="Number of wrong classes.")
@click.option("--noise", default=None, help="Comma-separated zero-sum noise values.")
@click.option("--noise-seed", type=int, default=None, help="Generate zero-sum noise from this seed.")
@click.option("--alpha-points", type=int, default=None)
@click.option("--alpha-max", type=float, default=None, help="Defaults to 90% of the valid range.")
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--plot/--no-plot", default=False)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
def cmd_monotonicity(n_classes, noise, noise_seed, alpha_points, alpha_max, out_dir,
                     plot, config_path):
    """Check that the mirror penalty is non-decreasing in the noise scale."""
    config = _load_config(config_path)
    n_classes = _pick(n_classes, config, "n", 5)
    noise = _pick(noise, config, "noise", None)
    noise_seed = _pick(noise_seed, config, "noise_seed", None)
    alpha_points = _pick(alpha_points, config, "alpha_points", 50)
    alpha_max = _pick(alpha_max, config, "alpha_max", None)

    if noise is not None:
        noise_vec = np.asarray(_parse_float_list(noise))
        n_classes = noise_vec.size
    else:
        rng = np.random.default_rng(noise_seed if noise_seed is not None else 0)
        noise_vec = rng.normal(size=n_classes)
        noise_vec -= noise_vec.mean()
    if alpha_max is None:
        bound = bnrl.max_valid_alpha(n_classes, noise_vec)
        alpha_max = 1.0 if not np.isfinite(bound) else 0.9 * bound
    grid = np.linspace(0.0, alpha_max, alpha_points)

    report = bnrl.verify_monotonicity(n_classes, noise_vec, grid)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bnrl.write_monotonicity_csv(report, out / "monotonicity.csv")
    if plot:
        plots.line_plot(
            report.alphas, report.mirror_sums, "alpha", "mirror penalty",
            out / "monotonicity.png", title="mirror-term growth",
        )
    click.echo(f"monotonicity {'pass' if report.passed else 'FAIL'}")
    if not report.passed:
        raise InvariantFailure("mirror penalty sequence decreased")


@cli.command(name="kshot")
@click.option("--ann", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--k", type=int, default=None)
@click.option("--classes", default=None, help="Comma-separated class ids; default all categories.")
@click.option("--seed", type=int, default=None)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
def cmd_kshot(ann, k, classes, seed, out, config_path):
    """Sample a k-shot seed subset and write it as COCO JSON with provenance."""
    config = _load_config(config_path)
    k = _pick(k, config, "k", 10)
    classes = _pick(classes, config, "classes", None)
    seed = _pick(seed, config, "seed", 0)

    full = cocoio.parse_annotations(ann)
    class_ids = _parse_id_list(classes)
    if class_ids is None:
        class_ids = sorted(c.id for c in full.categories)
    result = cocoio.sample_kshot(full, k, class_ids, seed)
    cocoio.save_kshot(result, out)
    click.echo(
        f"sampled {len(result.subset.annotations)} annotations over "
        f"{len(result.subset.images)} images"
    )


@cli.command(name="missing")
@click.option("--full", "full_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--subset", "subset_paths", required=True, multiple=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--plot/--no-plot", default=False)
def cmd_missing(full_path, subset_paths, out_dir, plot):
    """Count missing annotations per seed and aggregate with 95% CIs."""
    full = cocoio.parse_annotations(full_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    per_seed = []
    for i, path in enumerate(subset_paths):
        subset = cocoio.parse_annotations(path)
        stats = cocoio.missing_annotation_stats(full, subset)
        per_seed.append(stats)
        with open(out / f"missing_seed{i}.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["class_id", "class_name", "missing_count"])
            for cid in sorted(stats.per_class):
                writer.writerow([cid, full.category_name(cid), stats.per_class[cid]])

    if len(per_seed) >= 2:
        agg = cocoio.aggregate_missing(per_seed)
        with open(out / "aggregate.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["class_id", "mean", "ci_low", "ci_high"])
            for cid in sorted(agg):
                mean, lo, hi = agg[cid]
                writer.writerow([cid, f"{mean:.17g}", f"{lo:.17g}", f"{hi:.17g}"])
        if plot:
            cids = sorted(agg)
            plots.ci_bar_plot(
                [full.category_name(c) for c in cids],
                [agg[c][0] for c in cids],
                [agg[c][1] for c in cids],
                [agg[c][2] for c in cids],
                "missing annotations", out / "missing_ci.png",
                title="missing annotations per class",
            )
    click.echo(f"analyzed {len(per_seed)} seed(s)")


@cli.command(name="loss-check")
@click.option("--trials", type=int, default=200)
@click.option("--seed", type=int, default=0)
def cmd_loss_check(trials, seed):
    """Run the loss gradient and reduction checks and print a report."""
    rng = np.random.default_rng(seed)
    params = bnrl.BnrlParams()
    failures = []

    # reduction to focal loss / cross-entropy at beta=1, omega_bg=1
    max_focal = 0.0
    max_ce = 0.0
    for _ in range(trials):
        n = int(rng.integers(3, 9))
        probs = rng.dirichlet(np.ones(n))
        gt = int(rng.integers(0, n))
        dist = bnrl.ClassDistribution(probs, gt)
        p_gt = float(np.clip(probs[gt], 1e-12, 1 - 1e-12))
        focal = bnrl.bnrl_total(dist, bnrl.BnrlParams(beta=1.0, gamma=4.0, omega_bg=1.0))
        max_focal = max(max_focal, abs(focal - (-((1 - p_gt) ** 4) * np.log(p_gt))))
        ce = bnrl.bnrl_total(dist, bnrl.BnrlParams(beta=1.0, gamma=0.0, omega_bg=1.0))
        max_ce = max(max_ce, abs(ce - (-np.log(p_gt))))
    ok = max_focal < 1e-12 and max_ce < 1e-12
    click.echo(f"{'pass' if ok else 'FAIL'} reduction identities "
               f"(focal diff {max_focal:.3g}, ce diff {max_ce:.3g})")
    if not ok:
        failures.append("reductions")

    # analytic gradient vs central finite differences
    h = 1e-6
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(3, 9))
        probs = rng.dirichlet(np.ones(n))
        # stay away from the endpoints; central differences at h=1e-6
        # lose accuracy where the third derivative blows up
        probs = np.clip(probs, 1e-3, 1 - 1e-3)
        probs /= probs.sum()
        gt = int(rng.integers(0, n))
        dist = bnrl.ClassDistribution(probs, gt)
        grad = bnrl.bnrl_gradient(dist, params)
        for c in range(n):
            up = probs.copy(); up[c] += h
            dn = probs.copy(); dn[c] -= h
            fd = (
                bnrl._total_free(up, gt, params) - bnrl._total_free(dn, gt, params)
            ) / (2 * h)
            denom = max(abs(fd), 1e-8)
            worst = max(worst, abs(grad[c] - fd) / denom)
    ok = worst < 1e-5
    click.echo(f"{'pass' if ok else 'FAIL'} gradient check (worst rel err {worst:.3g})")
    if not ok:
        failures.append("gradient")

    if failures:
        raise InvariantFailure("loss checks failed: " + ", ".join(failures))
    click.echo("all loss checks passed")


def run():
    """Console entry point mapping exceptions to the documented exit codes."""
    try:
        cli(standalone_mode=False)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        sys.exit(1)
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except click.exceptions.Abort:
        sys.exit(1)
    except InvariantFailure as exc:
        click.echo(f"invariant check failed: {exc}", err=True)
        sys.exit(3)
    except (RiscoreError, FileNotFoundError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    sys.exit(0)


if __name__ == "__main__":
    run()
