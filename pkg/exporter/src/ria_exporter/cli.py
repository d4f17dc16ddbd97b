"""Command-line wrapper around the exporter."""

import sys

import click

from ria_exporter.export import FACETS, ExportConfig, ExportError, export_images


@click.command()
@click.option("--model", default="facebook/dinov2-giant", show_default=True,
              help="Backbone name, or 'random-tiny' for a seeded offline model.")
@click.option("--layer", default=31, show_default=True, help="Transformer layer to dump.")
@click.option("--facet", type=click.Choice(FACETS), default="output", show_default=True)
@click.option("--out", "output_dir", required=True, type=click.Path(file_okay=False))
@click.option("--seed", default=0, show_default=True, help="random-tiny weight seed.")
@click.argument("images", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
def main(model, layer, facet, output_dir, seed, images):
    """Dump dense patch features for IMAGES into RIAF files."""
    cfg = ExportConfig(
        model=model,
        layer=layer,
        facet=facet,
        output_dir=output_dir,
        images=list(images),
        seed=seed,
    )
    try:
        written = export_images(cfg)
    except ExportError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"wrote {len(written)} feature files to {output_dir}")
    if not written:
        sys.exit(1)


if __name__ == "__main__":
    main()
