"""Offline data prep: turn a text query corpus into the shared binary
embedding file (L2-normalized vectors, token lengths, source tags).

The only contract with the serving-side package is the file format itself.
"""

__version__ = "0.1.0"

from .exporter import CorpusRow, export_embeddings, read_corpus  # noqa: F401
