"""Command-line entry: images in, grounding manifest out."""

from __future__ import annotations

import sys

import click

from .adapter import AdapterConfig, AdapterError, emit_manifest, process_images


@click.command()
@click.option(
    "--images", "image_paths", multiple=True, required=True, help="Input image paths."
)
@click.option("--out", default="manifest.json", help="Manifest output path.")
@click.option("--threshold", type=float, default=0.5, help="Score threshold in [0, 1].")
@click.option("--max-objects", type=int, default=8, help="Objects kept per image.")
def main(image_paths, out, threshold, max_objects):
    """Extract salient regions from images and write a grounding manifest."""
    try:
        cfg = AdapterConfig(
            image_paths=tuple(image_paths),
            threshold=threshold,
            max_objects=max_objects,
            out_path=out,
        )
        records = process_images(cfg)
        emit_manifest(records, out)
    except AdapterError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    total = sum(len(r.objects) for r in records)
    click.echo(f"wrote {out}: {len(records)} images, {total} objects")


if __name__ == "__main__":
    main()
