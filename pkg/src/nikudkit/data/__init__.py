"""Bundled sample data: a tiny dotted curriculum corpus and a CoNLL-U
sample, used by the demos and the acceptance suite."""

from importlib import resources


def path(rel: str) -> str:
    """Filesystem path of a bundled data file, e.g. path("toy/manifest.tsv")."""
    return str(resources.files(__package__).joinpath(rel))
