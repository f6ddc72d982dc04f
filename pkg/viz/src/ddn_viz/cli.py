"""ddn-viz: plot exported factor CSVs."""

from __future__ import annotations

import sys

import click

from .plots import plot_factor_lines, plot_tsne
from .table import FactorTableError, load_factor_table


@click.group()
def main():
    """Offline plots for combination-factor CSV exports."""


@main.command("factors")
@click.argument("csv_path", type=click.Path(exists=True))
@click.option("--top-k", default=32, type=int,
              help="Plot only the k highest-variance factors.")
@click.option("-o", "--out", "out_path", required=True)
def factors(csv_path, top_k, out_path):
    """Line plot of per-domain factors across the highest-variance columns."""
    try:
        table = load_factor_table(csv_path)
        path, selected = plot_factor_lines(table, top_k, out_path, source_csv=csv_path)
    except FactorTableError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"wrote {path} ({len(selected)} factors, {table.n_rows} domains)")


@main.command("tsne")
@click.argument("csv_path", type=click.Path(exists=True))
@click.option("--color-by", default=None, help="Attribute column for point colors.")
@click.option("--perplexity", default=30.0, type=float)
@click.option("--seed", default=0, type=int)
@click.option("-o", "--out", "out_path", required=True)
@click.option("--coords-out", required=True,
              help="Where to write the 2-D coordinates CSV.")
def tsne(csv_path, color_by, perplexity, seed, out_path, coords_out):
    """2-D t-SNE projection of per-image factor vectors."""
    try:
        table = load_factor_table(csv_path)
        png, coords_csv, _ = plot_tsne(table, out_path, coords_out,
                                       color_by=color_by, perplexity=perplexity,
                                       seed=seed, source_csv=csv_path)
    except FactorTableError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"wrote {png} and {coords_csv} ({table.n_rows} points)")


if __name__ == "__main__":
    main()
