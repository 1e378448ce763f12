"""Embedding corpus file formats.

Binary canonical form: magic ``XCAL``, version u16 (=1), dimension u32,
count u64, all little-endian, followed by ``count`` records of
``[id_len u16][id utf-8 bytes][dimension x float32 LE]``.

A JSONL alternative is accepted at ingest: one object per line with
``id`` (string), ``vec`` (number array) and optional ``label``. Labels
may also come from a separate CSV with an ``id,label`` header; the CSV
takes precedence over inline JSONL labels.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .errors import CorpusError, FormatError
from .store import Corpus

MAGIC = b"XCAL"
VERSION = 1
_HEADER = struct.Struct("<4sHIQ")
_ID_LEN = struct.Struct("<H")


def ingest_corpus(source: str | Path, labels: str | Path | None = None) -> Corpus:
    """Parse an embedding file (binary or JSONL) into a normalized Corpus.

    The format is sniffed from the leading magic bytes, not the file
    extension. Label CSV rows for ids absent from the corpus are ignored.
    """
    path = Path(source)
    data = path.read_bytes()
    if data[:4] == MAGIC:
        dimension, ids, vectors, inline_labels = _parse_binary(data)
    else:
        dimension, ids, vectors, inline_labels = _parse_jsonl(data)

    label_by_id = dict(zip(ids, inline_labels))
    if labels is not None:
        label_by_id.update(read_labels(labels))
    return Corpus(
        dimension,
        ids,
        vectors,
        labels=[label_by_id.get(record_id) for record_id in ids],
    )


def _parse_binary(data: bytes):
    if len(data) < _HEADER.size:
        raise FormatError("truncated header", len(data))
    magic, version, dimension, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", 0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    if dimension < 2:
        raise FormatError(f"dimension must be >= 2, got {dimension}", 6)
    offset = _HEADER.size
    record_bytes = 4 * dimension
    # Each record needs at least 2 (id_len) + 1 (id) + vector bytes; a count
    # claiming more than the file holds is rejected before allocation.
    if count * (_ID_LEN.size + 1 + record_bytes) > len(data) - offset:
        raise FormatError(f"header count {count} exceeds file capacity", 10)

    ids: list[str] = []
    rows = np.empty((count, dimension), dtype=np.float32)
    for i in range(count):
        if offset + _ID_LEN.size > len(data):
            raise FormatError(f"truncated record {i}: missing id length", offset)
        (id_len,) = _ID_LEN.unpack_from(data, offset)
        offset += _ID_LEN.size
        if id_len == 0:
            raise FormatError(f"record {i} has an empty id", offset - _ID_LEN.size)
        if offset + id_len > len(data):
            raise FormatError(f"truncated record {i}: missing id bytes", offset)
        try:
            record_id = data[offset : offset + id_len].decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError(f"record {i} id is not valid UTF-8", offset) from None
        offset += id_len
        if offset + record_bytes > len(data):
            raise FormatError(f"truncated record {i} ({record_id!r}): missing vector bytes", offset)
        rows[i] = np.frombuffer(data, dtype="<f4", count=dimension, offset=offset)
        offset += record_bytes
        ids.append(record_id)
    if offset != len(data):
        raise FormatError(f"{len(data) - offset} trailing bytes after {count} records", offset)
    return int(dimension), ids, rows, [None] * len(ids)


def _parse_jsonl(data: bytes):
    ids: list[str] = []
    vectors: list[list[float]] = []
    labels: list[str | None] = []
    dimension: int | None = None
    offset = 0
    for raw_line in data.split(b"\n"):
        line = raw_line.strip()
        if line:
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                raise FormatError("invalid JSON line", offset) from None
            if not isinstance(obj, dict) or "id" not in obj or "vec" not in obj:
                raise FormatError("JSONL record must carry 'id' and 'vec'", offset)
            record_id = obj["id"]
            vec = obj["vec"]
            if not isinstance(record_id, str) or not record_id:
                raise FormatError("record id must be a non-empty string", offset)
            if not isinstance(vec, list) or not all(isinstance(x, (int, float)) for x in vec):
                raise FormatError(f"record {record_id!r} has a non-numeric vec", offset)
            if dimension is None:
                dimension = len(vec)
                if dimension < 2:
                    raise FormatError(f"dimension must be >= 2, got {dimension}", offset)
            elif len(vec) != dimension:
                raise CorpusError(
                    f"dimension mismatch: record {record_id!r} has {len(vec)}, corpus has {dimension}"
                )
            ids.append(record_id)
            vectors.append(vec)
            labels.append(obj.get("label"))
        offset += len(raw_line) + 1
    if dimension is None:
        raise FormatError("no records found", 0)
    return dimension, ids, np.asarray(vectors, dtype=np.float64), labels


def read_labels(path: str | Path) -> dict[str, str]:
    """Load an ``id,label`` CSV (header row required)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["id", "label"]:
            raise CorpusError(f"label file {path} must start with an 'id,label' header row")
        out: dict[str, str] = {}
        for row in reader:
            if len(row) < 2:
                raise CorpusError(f"label file {path}: malformed row {row!r}")
            out[row[0]] = row[1]
    return out


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write the binary canonical form (vectors down-cast to float32)."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, corpus.dimension, len(corpus)))
        for record_id, row in zip(corpus.ids, corpus.matrix):
            encoded = record_id.encode("utf-8")
            if len(encoded) > 0xFFFF:
                raise CorpusError(f"id {record_id!r} exceeds the 65535-byte id limit")
            fh.write(_ID_LEN.pack(len(encoded)))
            fh.write(encoded)
            fh.write(row.astype("<f4").tobytes())


def write_labels(corpus: Corpus, path: str | Path) -> None:
    """Write the labels of a corpus as an ``id,label`` CSV."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "label"])
        for record_id, label in zip(corpus.ids, corpus.labels):
            if label is not None:
                writer.writerow([record_id, label])
