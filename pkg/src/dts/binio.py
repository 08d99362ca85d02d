"""Binary artifact formats and atomic file writes.

All multi-byte fields are little-endian. Four container formats:

DTSE (embedding matrix)
    magic   b"DTSE"
    version u16 (currently 1)
    rows    u64
    dim     u64
    offset  u64   byte offset of the id map == HEADER_SIZE + rows*dim*4
    payload rows*dim float32, row-major
    id map  UTF-8 JSON array of row ids, in row order

DTSG (multiplex graph)
    magic b"DTSG", version u16, node count u64,
    per node (ascending id order): u16 id length + bytes, u16 category
    length + bytes; then u8 edge-type count, per edge type: u8 name length
    + bytes, u64 edge count, edges as (u32 u, u32 v, u32 weight) with
    u < v being row indices into the node table.

DTSW (random walks) / DTSP (training pairs)
    magic, version u16, u8 edge-type name length + bytes, u64 seed,
    u64 count, then per walk u16 length + u32 node rows, or per pair
    (u32 center, u32 context). Node rows index the owning graph's node
    table.

Writes go through a temp file plus os.replace so interrupted runs never
leave a half-written artifact behind.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError

MATRIX_MAGIC = b"DTSE"
GRAPH_MAGIC = b"DTSG"
WALKS_MAGIC = b"DTSW"
PAIRS_MAGIC = b"DTSP"
FORMAT_VERSION = 1

_MATRIX_HEADER = struct.Struct("<4sHQQQ")


def atomic_write_bytes(path: Path, payload: bytes) -> None:
    """Write payload to path via a same-directory temp file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def save_matrix(path: Path, matrix: np.ndarray, ids: Sequence[str]) -> None:
    """Serialize a matrix plus its row id map into one DTSE file.

    The payload is stored as float32 regardless of the input dtype, so a
    save/load round trip is bitwise only for float32 inputs.
    """
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise DataError(f"matrix must be 2-D, got shape {matrix.shape}")
    rows, dim = matrix.shape
    if len(ids) != rows:
        raise DataError(f"id map has {len(ids)} entries for {rows} rows")
    payload = np.ascontiguousarray(matrix, dtype="<f4").tobytes()
    offset = _MATRIX_HEADER.size + len(payload)
    header = _MATRIX_HEADER.pack(MATRIX_MAGIC, FORMAT_VERSION, rows, dim, offset)
    idmap = json.dumps(list(ids)).encode("utf-8")
    atomic_write_bytes(path, header + payload + idmap)


def load_matrix(path: Path) -> tuple[np.ndarray, list[str]]:
    """Load a DTSE file, returning (float32 matrix, row ids)."""
    raw = Path(path).read_bytes()
    if len(raw) < _MATRIX_HEADER.size:
        raise DataError(f"{path}: file shorter than header")
    magic, version, rows, dim, offset = _MATRIX_HEADER.unpack_from(raw)
    if magic != MATRIX_MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported version {version}")
    expected = rows * dim * 4
    if offset != _MATRIX_HEADER.size + expected or len(raw) < offset:
        raise DataError(f"{path}: payload length mismatch")
    payload = raw[_MATRIX_HEADER.size:offset]
    if len(payload) != expected:
        raise DataError(f"{path}: payload length mismatch")
    matrix = np.frombuffer(payload, dtype="<f4").reshape(rows, dim).copy()
    try:
        ids = json.loads(raw[offset:].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: corrupt id map ({exc})") from exc
    if not isinstance(ids, list) or len(ids) != rows:
        raise DataError(f"{path}: id map does not cover all rows")
    return matrix, [str(i) for i in ids]


def _pack_str(value: str, width: str) -> bytes:
    data = value.encode("utf-8")
    return struct.pack(f"<{width}", len(data)) + data


class _Reader:
    def __init__(self, raw: bytes, label: str):
        self.raw = raw
        self.pos = 0
        self.label = label

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.raw):
            raise DataError(f"{self.label}: truncated file")
        values = struct.unpack_from(fmt, self.raw, self.pos)
        self.pos += size
        return values

    def take_str(self, width: str) -> str:
        (n,) = self.take(f"<{width}")
        if self.pos + n > len(self.raw):
            raise DataError(f"{self.label}: truncated string")
        out = self.raw[self.pos:self.pos + n].decode("utf-8")
        self.pos += n
        return out

    def take_array(self, dtype: str, count: int) -> np.ndarray:
        size = np.dtype(dtype).itemsize * count
        if self.pos + size > len(self.raw):
            raise DataError(f"{self.label}: truncated array")
        out = np.frombuffer(self.raw, dtype=dtype, count=count, offset=self.pos).copy()
        self.pos += size
        return out


def save_graph(path: Path, graph) -> None:
    """Serialize a MultiplexGraph (see graph.MultiplexGraph) as DTSG."""
    chunks = [GRAPH_MAGIC, struct.pack("<H", FORMAT_VERSION)]
    ids = graph.node_ids
    chunks.append(struct.pack("<Q", len(ids)))
    for nid in ids:
        chunks.append(_pack_str(nid, "H"))
        chunks.append(_pack_str(graph.category(nid), "H"))
    chunks.append(struct.pack("<B", len(graph.edge_types)))
    for etype in graph.edge_types:
        chunks.append(_pack_str(etype, "B"))
        edges = graph.edge_rows(etype)
        chunks.append(struct.pack("<Q", len(edges)))
        for u, v, w in edges:
            chunks.append(struct.pack("<III", u, v, w))
    atomic_write_bytes(path, b"".join(chunks))


def load_graph(path: Path):
    """Load a DTSG file back into a MultiplexGraph."""
    from .graph import MultiplexGraph

    rd = _Reader(Path(path).read_bytes(), str(path))
    magic, version = rd.take("<4sH")
    if magic != GRAPH_MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported version {version}")
    (n,) = rd.take("<Q")
    categories = {}
    ids = []
    for _ in range(n):
        nid = rd.take_str("H")
        categories[nid] = rd.take_str("H")
        ids.append(nid)
    (etype_count,) = rd.take("<B")
    edges: dict[str, dict[tuple[str, str], int]] = {}
    for _ in range(etype_count):
        etype = rd.take_str("B")
        (count,) = rd.take("<Q")
        bucket: dict[tuple[str, str], int] = {}
        for _ in range(count):
            u, v, w = rd.take("<III")
            bucket[(ids[u], ids[v])] = w
        edges[etype] = bucket
    return MultiplexGraph(categories, edges)


def save_walks(path: Path, edge_type: str, seed: int, walks: Sequence[Sequence[int]]) -> None:
    """Persist walks (node row sequences) with the seed that produced them."""
    chunks = [WALKS_MAGIC, struct.pack("<H", FORMAT_VERSION), _pack_str(edge_type, "B"),
              struct.pack("<QQ", seed, len(walks))]
    for walk in walks:
        chunks.append(struct.pack("<H", len(walk)))
        chunks.append(np.asarray(walk, dtype="<u4").tobytes())
    atomic_write_bytes(path, b"".join(chunks))


def load_walks(path: Path) -> tuple[str, int, list[np.ndarray]]:
    rd = _Reader(Path(path).read_bytes(), str(path))
    magic, version = rd.take("<4sH")
    if magic != WALKS_MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported version {version}")
    edge_type = rd.take_str("B")
    seed, count = rd.take("<QQ")
    walks = []
    for _ in range(count):
        (length,) = rd.take("<H")
        walks.append(rd.take_array("<u4", length))
    return edge_type, seed, walks


def save_pairs(path: Path, edge_type: str, seed: int, pairs: np.ndarray) -> None:
    """Persist (center, context) node row pairs for one edge type."""
    pairs = np.asarray(pairs, dtype="<u4").reshape(-1, 2)
    blob = (PAIRS_MAGIC + struct.pack("<H", FORMAT_VERSION) + _pack_str(edge_type, "B")
            + struct.pack("<QQ", seed, len(pairs)) + pairs.tobytes())
    atomic_write_bytes(path, blob)


def load_pairs(path: Path) -> tuple[str, int, np.ndarray]:
    rd = _Reader(Path(path).read_bytes(), str(path))
    magic, version = rd.take("<4sH")
    if magic != PAIRS_MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported version {version}")
    edge_type = rd.take_str("B")
    seed, count = rd.take("<QQ")
    return edge_type, seed, rd.take_array("<u4", count * 2).reshape(-1, 2)
