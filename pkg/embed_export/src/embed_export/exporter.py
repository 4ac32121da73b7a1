"""Corpus reading, embedding backends, tokenizers, and the binary writer.

Binary layout (shared contract, little-endian):
    magic "SEMC" | version u32 | count u64 | dim u32
    count*dim float32 coords | count u32 token lengths | count u32 source tags

Default backends are a pinned 384-dim sentence-transformer checkpoint and the
GPT-2 tokenizer. A deterministic hash embedder (``hash:<dim>``) and a
``whitespace`` tokenizer are available for air-gapped runs and tests.
"""

from __future__ import annotations

import csv
import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"SEMC"
VERSION = 1
_HEADER = struct.Struct("<4sIQI")

DEFAULT_MODEL = "sentence-transformers/all-MiniLM-L6-v2"
DEFAULT_TOKENIZER = "gpt2"


class ExportError(RuntimeError):
    pass


@dataclass
class CorpusRow:
    text: str
    source: str = ""

    def __post_init__(self):
        if not self.text:
            raise ExportError("corpus rows need nonempty text")


def read_corpus(path: str | Path) -> list[CorpusRow]:
    """JSON-lines ({"text": ..., "source": ...}) or CSV (text, source)."""
    path = Path(path)
    if not path.exists():
        raise ExportError(f"corpus not found: {path}")
    rows: list[CorpusRow] = []
    if path.suffix.lower() in (".jsonl", ".json", ".ndjson"):
        with open(path) as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                rows.append(CorpusRow(text=obj["text"], source=obj.get("source", "")))
    else:
        with open(path, newline="") as f:
            for rec in csv.reader(f):
                if not rec or rec[0].startswith("#"):
                    continue
                rows.append(CorpusRow(text=rec[0], source=rec[1] if len(rec) > 1 else ""))
    if not rows:
        raise ExportError(f"corpus is empty: {path}")
    return rows


# ---------- embedding backends ----------


def _hash_embed(texts: list[str], dim: int) -> np.ndarray:
    """Deterministic feature-hashing embedder (no model download needed)."""
    out = np.zeros((len(texts), dim), dtype=np.float64)
    for i, text in enumerate(texts):
        for tok in text.lower().split():
            digest = hashlib.sha256(tok.encode("utf-8")).digest()
            idx = int.from_bytes(digest[:4], "little") % dim
            sign = 1.0 if digest[4] % 2 == 0 else -1.0
            out[i, idx] += sign
        if not out[i].any():
            out[i, 0] = 1.0
    return out


def embed_texts(texts: list[str], model_name: str) -> np.ndarray:
    if model_name.startswith("hash:"):
        return _hash_embed(texts, int(model_name.split(":", 1)[1]))
    try:
        from sentence_transformers import SentenceTransformer
    except ImportError as exc:  # pragma: no cover
        raise ExportError(f"sentence-transformers unavailable: {exc}") from exc
    try:
        model = SentenceTransformer(model_name)
        # deterministic inference: no shuffling, eval mode is the default
        return np.asarray(model.encode(texts, show_progress_bar=False, convert_to_numpy=True))
    except Exception as exc:
        raise ExportError(f"failed to load or run model {model_name!r}: {exc}") from exc


def count_tokens(texts: list[str], tokenizer_name: str) -> np.ndarray:
    if tokenizer_name == "whitespace":
        return np.asarray([max(1, len(t.split())) for t in texts], dtype=np.int64)
    try:
        from transformers import AutoTokenizer
    except ImportError as exc:  # pragma: no cover
        raise ExportError(f"transformers unavailable: {exc}") from exc
    try:
        tok = AutoTokenizer.from_pretrained(tokenizer_name)
        return np.asarray([len(ids) for ids in tok(texts)["input_ids"]], dtype=np.int64)
    except Exception as exc:
        raise ExportError(f"failed to load tokenizer {tokenizer_name!r}: {exc}") from exc


# ---------- binary writer (the shared contract) ----------


def write_embedding_file(
    path: str | Path, coords: np.ndarray, token_lengths: np.ndarray, source_tags: np.ndarray
) -> None:
    coords = np.atleast_2d(np.asarray(coords, dtype=np.float64))
    norms = np.linalg.norm(coords, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ExportError("zero embedding vector cannot be normalized")
    coords = coords / norms
    count, dim = coords.shape
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, count, dim))
        f.write(coords.astype("<f4").tobytes(order="C"))
        f.write(np.asarray(token_lengths).astype("<u4").tobytes())
        f.write(np.asarray(source_tags).astype("<u4").tobytes())


def export_embeddings(
    corpus_path: str | Path,
    model_name: str,
    out_path: str | Path,
    tokenizer_name: str = DEFAULT_TOKENIZER,
) -> dict:
    """Embed a corpus and write the binary file; returns the manifest dict."""
    rows = read_corpus(corpus_path)
    texts = [r.text for r in rows]
    coords = embed_texts(texts, model_name)
    lens = count_tokens(texts, tokenizer_name)
    sources = sorted({r.source for r in rows})
    tag_of = {s: i for i, s in enumerate(sources)}
    tags = np.asarray([tag_of[r.source] for r in rows], dtype=np.int64)
    write_embedding_file(out_path, coords, lens, tags)
    return {
        "count": len(rows),
        "dim": int(coords.shape[1]),
        "model": model_name,
        "tokenizer": tokenizer_name,
        "sources": sources,
        "token_length_min": int(lens.min()),
        "token_length_max": int(lens.max()),
        "out": str(out_path),
    }
