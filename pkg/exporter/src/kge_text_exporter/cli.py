"""Command-line interface: ``text`` and ``smiles`` export subcommands."""

from __future__ import annotations

import logging
import sys

import click

from .encoders import EncoderError
from .export import export_items
from .items import ItemTableError


def _export_options(fn):
    for option in reversed([
        click.option("--input", "input_path", required=True,
                     type=click.Path(exists=True, dir_okay=False),
                     help="Item TSV: row_id<TAB>field<TAB>text."),
        click.option("--output", "output_path", required=True,
                     type=click.Path(dir_okay=False),
                     help="Vector file to write."),
        click.option("--encoder", required=True,
                     help="hash:<dim>, a model directory, or a model id."),
        click.option("--max-len", default=512, show_default=True, type=int,
                     help="Maximum input length in subwords."),
        click.option("--batch-size", default=32, show_default=True, type=int),
    ]):
        fn = option(fn)
    return fn


def _run(smiles: bool, input_path, output_path, encoder, max_len, batch_size):
    logging.basicConfig(level=logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        count = export_items(input_path, output_path, encoder,
                             max_len=max_len, batch_size=batch_size,
                             smiles=smiles)
    except (ItemTableError, EncoderError, OSError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    click.echo(f"wrote {count} vectors to {output_path}")


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def main():
    """Encode entity texts and SMILES strings into anchor vector files."""


@main.command()
@_export_options
def text(input_path, output_path, encoder, max_len, batch_size):
    """Encode a text field (name, description, synonyms, ...)."""
    _run(False, input_path, output_path, encoder, max_len, batch_size)


@main.command()
@_export_options
def smiles(input_path, output_path, encoder, max_len, batch_size):
    """Encode SMILES structure strings with a SMILES-pretrained model."""
    _run(True, input_path, output_path, encoder, max_len, batch_size)


if __name__ == "__main__":
    main()
