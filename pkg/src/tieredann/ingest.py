"""Streaming dataset ingestion and index snapshot persistence.

Input records are JSON lines with a "text" string and an "embedding"
array. Texts and embeddings are separated at ingest: embeddings go
write-through to tier 3, texts into an id-to-text store that is only
touched when final results are materialized.

Snapshot layout (little-endian): magic, version, then length-prefixed
blocks each followed by a CRC32 — metadata, node levels, one adjacency
block per level, and a vector-store reference string.
"""

from __future__ import annotations

import io
import json
import struct
import zlib
from pathlib import Path
from typing import Dict, Iterable, Optional, TextIO, Tuple

import numpy as np

from .errors import (
    IngestError,
    MissingTextError,
    SnapshotFormatError,
    SnapshotIntegrityError,
)
from .hnsw import COSINE, EUCLIDEAN, HnswIndex
from .store import TieredVectorStore

SNAPSHOT_MAGIC = b"TIDX"
SNAPSHOT_VERSION = 1
TEXT_MAGIC = b"TTXT"
TEXT_VERSION = 1

_TEXT_HEADER = struct.Struct("<4sIQQ")  # magic, version, count, table offset
_META = struct.Struct("<IIIBBHQIQQ")
_METRIC_CODES = {EUCLIDEAN: 0, COSINE: 1}
_METRIC_NAMES = {v: k for k, v in _METRIC_CODES.items()}


class TextStore:
    """Append-only id -> UTF-8 text store, separate from vector payloads."""

    def __init__(self, path: Optional[str | Path] = None):
        self._texts: Dict[int, str] = {}
        self._offsets: Dict[int, Tuple[int, int]] = {}
        self._fh = None
        self.lookups = 0
        if path is not None:
            self._path = Path(path)
            self._fh = open(self._path, "w+b")
            self._fh.write(_TEXT_HEADER.pack(TEXT_MAGIC, TEXT_VERSION, 0, 0))

    def add(self, vector_id: int, text: str) -> None:
        if self._fh is not None:
            raw = text.encode("utf-8")
            self._offsets[vector_id] = (self._fh.tell(), len(raw))
            self._fh.write(raw)
        else:
            self._texts[vector_id] = text

    def get_text(self, vector_id: int) -> str:
        self.lookups += 1
        if self._fh is not None:
            if vector_id not in self._offsets:
                raise MissingTextError(vector_id)
            offset, length = self._offsets[vector_id]
            self._fh.seek(offset)
            return self._fh.read(length).decode("utf-8")
        if vector_id not in self._texts:
            raise MissingTextError(vector_id)
        return self._texts[vector_id]

    def __len__(self) -> int:
        return len(self._offsets) if self._fh is not None else len(self._texts)

    def finalize(self) -> None:
        """Write the offset table and patch the header; keeps file readable."""
        if self._fh is None:
            return
        self._fh.seek(0, 2)
        table_offset = self._fh.tell()
        table = io.BytesIO()
        for vector_id in sorted(self._offsets):
            offset, length = self._offsets[vector_id]
            table.write(struct.pack("<QQI", vector_id, offset, length))
        raw = table.getvalue()
        self._fh.write(raw)
        self._fh.write(struct.pack("<I", zlib.crc32(raw)))
        self._fh.seek(0)
        self._fh.write(_TEXT_HEADER.pack(TEXT_MAGIC, TEXT_VERSION,
                                         len(self._offsets), table_offset))
        self._fh.flush()

    def close(self) -> None:
        if self._fh is not None:
            self.finalize()
            self._fh.close()
            self._fh = None

    @classmethod
    def open(cls, path: str | Path) -> "TextStore":
        store = cls.__new__(cls)
        store._texts = {}
        store._offsets = {}
        store.lookups = 0
        store._path = Path(path)
        store._fh = open(store._path, "r+b")
        raw = store._fh.read(_TEXT_HEADER.size)
        if len(raw) < _TEXT_HEADER.size:
            raise SnapshotIntegrityError(f"{path}: truncated text store")
        magic, version, count, table_offset = _TEXT_HEADER.unpack(raw)
        if magic != TEXT_MAGIC:
            raise SnapshotFormatError(f"{path}: bad magic {magic!r}")
        if version != TEXT_VERSION:
            raise SnapshotFormatError(f"{path}: unsupported version {version}")
        store._fh.seek(table_offset)
        entry = struct.Struct("<QQI")
        table_raw = store._fh.read(count * entry.size)
        crc_raw = store._fh.read(4)
        if len(table_raw) < count * entry.size or len(crc_raw) < 4:
            raise SnapshotIntegrityError(f"{path}: truncated text table")
        if struct.unpack("<I", crc_raw)[0] != zlib.crc32(table_raw):
            raise SnapshotIntegrityError(f"{path}: text table checksum mismatch")
        for i in range(count):
            vector_id, offset, length = entry.unpack_from(table_raw, i * entry.size)
            store._offsets[vector_id] = (offset, length)
        return store


def _parse_record(line: str, line_number: int, dimension: int):
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise IngestError(line_number, f"invalid JSON ({exc.msg})") from exc
    if not isinstance(obj, dict):
        raise IngestError(line_number, "record is not a JSON object")
    text = obj.get("text")
    embedding = obj.get("embedding")
    if not isinstance(text, str):
        raise IngestError(line_number, 'missing or non-string "text" field')
    if not isinstance(embedding, list):
        raise IngestError(line_number, 'missing or non-array "embedding" field')
    if len(embedding) != dimension:
        raise IngestError(
            line_number,
            f"embedding has dimension {len(embedding)}, expected {dimension}")
    try:
        vec = np.asarray(embedding, dtype=np.float32)
    except (TypeError, ValueError) as exc:
        raise IngestError(line_number, "embedding contains non-numeric values") from exc
    if not np.isfinite(vec).all():
        raise IngestError(line_number, "embedding contains NaN or Inf")
    return text, vec


def ingest_stream(
    source: Iterable[str] | TextIO,
    index: HnswIndex,
    store: TieredVectorStore,
    text_store: Optional[TextStore] = None,
    chunk_size: int = 1000,
) -> int:
    """Parse and insert JSONL records in chunks; returns the count ingested.

    Ids are assigned sequentially from the current index size. A chunk is
    fully parsed and validated before any of its records is inserted, so
    ingestion is all-or-nothing per chunk.
    """
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    next_id = len(index)
    ingested = 0
    chunk = []
    for line_number, line in enumerate(source, start=1):
        if not line.strip():
            continue
        chunk.append((line_number, line))
        if len(chunk) >= chunk_size:
            next_id, ingested = _insert_chunk(chunk, index, store, text_store,
                                              next_id, ingested)
            chunk = []
    if chunk:
        next_id, ingested = _insert_chunk(chunk, index, store, text_store,
                                          next_id, ingested)
    return ingested


def _insert_chunk(chunk, index, store, text_store, next_id, ingested):
    parsed = [(_parse_record(line, ln, index.dimension)) for ln, line in chunk]
    for text, vec in parsed:
        index.insert(next_id, vec, store)
        if text_store is not None:
            text_store.add(next_id, text)
        next_id += 1
        ingested += 1
    return next_id, ingested


# -- snapshot serialization --------------------------------------------------


def _write_block(fh, payload: bytes) -> None:
    fh.write(struct.pack("<Q", len(payload)))
    fh.write(payload)
    fh.write(struct.pack("<I", zlib.crc32(payload)))


def _read_block(fh, path) -> bytes:
    raw_len = fh.read(8)
    if len(raw_len) < 8:
        raise SnapshotIntegrityError(f"{path}: truncated block header")
    (length,) = struct.unpack("<Q", raw_len)
    payload = fh.read(length)
    crc_raw = fh.read(4)
    if len(payload) < length or len(crc_raw) < 4:
        raise SnapshotIntegrityError(f"{path}: truncated block")
    if struct.unpack("<I", crc_raw)[0] != zlib.crc32(payload):
        raise SnapshotIntegrityError(f"{path}: block checksum mismatch")
    return payload


def save_index(index: HnswIndex, path: str | Path,
               vector_ref: str = "") -> None:
    """Serialize topology and header; payloads stay in the referenced store."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<I", SNAPSHOT_VERSION))

        entry = index.entry_point if index.entry_point is not None else 0
        meta = _META.pack(
            index.dimension, index.m, index.ef_construction,
            _METRIC_CODES[index.metric],
            1 if index.entry_point is not None else 0, 0,
            entry, len(index.layers), index.seed, len(index))
        _write_block(fh, meta)

        levels = io.BytesIO()
        for vector_id in sorted(index.node_level):
            levels.write(struct.pack("<QI", vector_id, index.node_level[vector_id]))
        _write_block(fh, levels.getvalue())

        for layer in index.layers:
            block = io.BytesIO()
            block.write(struct.pack("<Q", len(layer)))
            for vector_id in sorted(layer):
                nbrs = layer[vector_id]
                block.write(struct.pack("<QI", vector_id, len(nbrs)))
                block.write(struct.pack(f"<{len(nbrs)}Q", *nbrs))
            _write_block(fh, block.getvalue())

        _write_block(fh, vector_ref.encode("utf-8"))


def load_index(path: str | Path) -> Tuple[HnswIndex, str]:
    """Load a snapshot; returns (index, vector-store reference)."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != SNAPSHOT_MAGIC:
            raise SnapshotFormatError(f"{path}: bad magic {magic!r}")
        raw_version = fh.read(4)
        if len(raw_version) < 4:
            raise SnapshotIntegrityError(f"{path}: truncated header")
        (version,) = struct.unpack("<I", raw_version)
        if version != SNAPSHOT_VERSION:
            raise SnapshotFormatError(f"{path}: unsupported version {version}")

        meta = _read_block(fh, path)
        (dimension, m, ef_construction, metric_code, has_entry, _pad,
         entry, level_count, seed, count) = _META.unpack(meta)
        index = HnswIndex(dimension, m=m, ef_construction=ef_construction,
                          metric=_METRIC_NAMES[metric_code], seed=seed)

        levels_raw = _read_block(fh, path)
        rec = struct.Struct("<QI")
        if len(levels_raw) != count * rec.size:
            raise SnapshotIntegrityError(f"{path}: node level table size mismatch")
        for i in range(count):
            vector_id, level = rec.unpack_from(levels_raw, i * rec.size)
            index.node_level[vector_id] = level

        index.layers = []
        for _ in range(level_count):
            raw = _read_block(fh, path)
            view = memoryview(raw)
            (n_nodes,) = struct.unpack_from("<Q", view, 0)
            pos = 8
            layer: Dict[int, list] = {}
            for _ in range(n_nodes):
                vector_id, deg = struct.unpack_from("<QI", view, pos)
                pos += 12
                layer[vector_id] = list(struct.unpack_from(f"<{deg}Q", view, pos))
                pos += 8 * deg
            index.layers.append(layer)
        if not index.layers:
            index.layers = [{}]

        vector_ref = _read_block(fh, path).decode("utf-8")

        index.max_level = level_count - 1
        index.entry_point = entry if has_entry else None
        return index, vector_ref
