"""Command-line entry point for the dataset converter."""

from __future__ import annotations

import json
import sys

import click

from .convert import ConvertError, convert
from .recipes import RECIPES


@click.group()
def main():
    """Convert MAT-file benchmark scenes to cube/label files."""


@main.command("convert")
@click.option("--dataset", type=click.Choice(sorted(RECIPES)), required=True)
@click.option("--input", "input_path", type=click.Path(exists=True), required=True,
              help="MAT file holding the scene cube")
@click.option("--gt", "gt_path", type=click.Path(exists=True), default=None,
              help="MAT file holding the ground-truth labels")
@click.option("--out", "out_dir", type=click.Path(), required=True)
def cmd_convert(dataset, input_path, gt_path, out_dir):
    """Apply the dataset recipe and write the normative files + manifest."""
    try:
        manifest = convert(dataset, input_path, out_dir, gt_path=gt_path)
    except ConvertError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    click.echo(json.dumps(manifest, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
