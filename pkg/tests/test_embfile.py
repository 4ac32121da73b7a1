import numpy as np
import pytest

from semcache.embfile import (
    EmbeddingFileError,
    load_embedding_file,
    write_embedding_file,
)
from semcache.geometry import normalize


def test_binary_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    coords = rng.standard_normal((12, 6))
    lens = rng.integers(1, 40, size=12)
    tags = rng.integers(0, 2, size=12)
    path = tmp_path / "x.semc"
    write_embedding_file(path, coords, lens, tags)
    got = load_embedding_file(path)
    assert got.count == 12 and got.dim == 6
    assert np.array_equal(got.token_lengths, lens)
    assert np.array_equal(got.source_tags, tags)
    # loader normalizes float32-rounded coords
    expect = normalize(coords.astype("<f4").astype(np.float64))
    assert np.allclose(got.coords, expect)
    assert np.allclose(np.linalg.norm(got.coords, axis=1), 1.0)


def test_binary_without_tags(tmp_path):
    path = tmp_path / "y.semc"
    write_embedding_file(path, np.eye(3), [5, 6, 7])
    got = load_embedding_file(path)
    assert got.source_tags is None
    assert got.token_lengths.tolist() == [5, 6, 7]


def test_truncated_file_rejected(tmp_path):
    path = tmp_path / "z.semc"
    write_embedding_file(path, np.eye(3), [1, 2, 3])
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(EmbeddingFileError):
        load_embedding_file(path)


def test_bad_magic_falls_back_to_csv_then_fails(tmp_path):
    path = tmp_path / "bad.semc"
    path.write_bytes(b"NOPE" + b"\x00" * 40)
    with pytest.raises(Exception):
        load_embedding_file(path)


def test_csv_debug_format(tmp_path):
    path = tmp_path / "debug.csv"
    path.write_text(
        "# id, token_len, source, coords...\n"
        "q0,12,nq,1.0,0.0,0.0\n"
        "q1,30,trivia,0.0,2.0,0.0\n"
    )
    got = load_embedding_file(path)
    assert got.count == 2 and got.dim == 3
    assert got.token_lengths.tolist() == [12, 30]
    assert got.source_names == ["nq", "trivia"]
    assert np.allclose(got.coords[1], [0.0, 1.0, 0.0])


def test_token_length_mismatch_rejected(tmp_path):
    with pytest.raises(EmbeddingFileError):
        write_embedding_file(tmp_path / "w.semc", np.eye(3), [1, 2])
