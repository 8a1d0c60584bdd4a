"""Command-line frontend: remb-export text / detections."""
from __future__ import annotations

import json
import sys

import click

from .encoders import get_encoder
from .errors import ExportError
from .export import PromptTemplate, export_detection_embeddings, export_text_embeddings


@click.group()
def cli():
    """Export RISF-EMB embedding files from class names or detection crops."""


@cli.command(name="text")
@click.option("--classes", required=True,
              help="Comma-separated class names, or a JSON file of names.")
@click.option("--template", default="this is a {class name}", show_default=True)
@click.option("--encoder", "encoder_id", default="clip-vit-b-16", show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--batch-size", type=int, default=64, show_default=True)
def cmd_text(classes, template, encoder_id, out, batch_size):
    """Encode prompted class names into a RISF-EMB file."""
    if classes.endswith(".json"):
        with open(classes, "r", encoding="utf-8") as fh:
            names = json.load(fh)
    else:
        names = [tok.strip() for tok in classes.split(",") if tok.strip()]
    export_text_embeddings(
        names, PromptTemplate(template), get_encoder(encoder_id), out,
        batch_size=batch_size,
    )
    click.echo(f"wrote {len(names)} text embeddings to {out}")


@cli.command(name="detections")
@click.option("--images-dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--results", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--encoder", "encoder_id", default="clip-vit-b-16", show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--batch-size", type=int, default=32, show_default=True)
def cmd_detections(images_dir, results, encoder_id, out, batch_size):
    """Crop and encode detection boxes into a RISF-EMB file keyed by det_id."""
    stats = export_detection_embeddings(
        images_dir, results, get_encoder(encoder_id), out, batch_size=batch_size
    )
    click.echo(f"wrote {stats.exported} crop embeddings, skipped {len(stats.skipped)}")


def run():
    """Console entry point: exit 1 on usage errors, 2 on export errors."""
    try:
        cli(standalone_mode=False)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        sys.exit(1)
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except (ExportError, FileNotFoundError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    sys.exit(0)


if __name__ == "__main__":
    run()
