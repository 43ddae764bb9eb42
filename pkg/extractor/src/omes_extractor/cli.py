"""CLI for batch embedding extraction."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .extract import DecodeError, ExtractorSpec, extract
from .models import DEFAULT_CLIP_VARIANT, MODEL_IDS, ModelUnavailable


@click.command()
@click.option("--model", "model_id", required=True, type=click.Choice(MODEL_IDS))
@click.option("--manifest", type=click.Path(exists=True, path_type=Path),
              help="Crop manifest (JSON Lines) for image models.")
@click.option("--images", type=click.Path(exists=True, path_type=Path),
              help="Root directory holding <image_id>.<ext> files.")
@click.option("--prompt-file", type=click.Path(exists=True, path_type=Path),
              help="Prompt JSON for clip-text.")
@click.option("--out", required=True, type=click.Path(path_type=Path))
@click.option("--variant", default=DEFAULT_CLIP_VARIANT, show_default=True,
              help="CLIP checkpoint name (recorded in the meta sidecar).")
@click.option("--batch-size", default=16, show_default=True)
@click.option("--pretrained/--no-pretrained", default=True, show_default=True,
              help="--no-pretrained uses random weights (plumbing checks only).")
def main(model_id, manifest, images, prompt_file, out, variant, batch_size, pretrained):
    """Embed crops or prompts with a pretrained backbone into an OMES file."""
    try:
        spec = ExtractorSpec(
            model_id=model_id, output=out, manifest=manifest, image_root=images,
            prompt_file=prompt_file, variant=variant, batch_size=batch_size,
            pretrained=pretrained,
        )
    except ValueError as err:
        raise click.UsageError(str(err))
    try:
        path = extract(spec)
    except (DecodeError, ModelUnavailable, OSError) as err:
        click.echo(f"error: {err}", err=True)
        sys.exit(3)
    click.echo(f"{model_id} -> {path}")


if __name__ == "__main__":
    main()
