"""
Tree Loader - Binary and TSV tree files

Binary layout (little-endian): b"COEV", version byte 0x01, flags byte (bit 0: birth
times follow), u64 n, n x u64 parents with the root stored as 0xFFFFFFFFFFFFFFFF,
then n x f64 birth times when flagged.
"""
import logging
import struct
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import BadMagic, InvariantViolation, TruncatedFile
from .tree import ROOT, TreeState

logger = logging.getLogger(__name__)

MAGIC = b"COEV"
VERSION = 0x01
FLAG_BIRTH_TIMES = 0x01
HEADER = struct.Struct("<4sBBQ")
ROOT_SENTINEL = np.uint64(0xFFFFFFFFFFFFFFFF)
TSV_HEADER = "index\tparent\tdepth"

PathLike = Union[str, Path]


def _format_of(path: Path, fmt: Optional[str]) -> str:
    fmt = (fmt or path.suffix.lstrip(".") or "bin").lower()
    if fmt not in ("bin", "tsv"):
        raise ValueError(f"unknown tree format '{fmt}' (expected bin or tsv)")
    return fmt


def tree_to_bytes(tree: TreeState) -> bytes:
    flags = FLAG_BIRTH_TIMES if tree.birth_time is not None else 0
    parents = tree.parent.astype(np.uint64)
    parents[0] = ROOT_SENTINEL
    chunks = [HEADER.pack(MAGIC, VERSION, flags, tree.n), parents.astype("<u8").tobytes()]
    if flags & FLAG_BIRTH_TIMES:
        chunks.append(tree.birth_time.astype("<f8").tobytes())
    return b"".join(chunks)


def tree_from_bytes(data: bytes) -> TreeState:
    if len(data) < len(MAGIC) or data[:4] != MAGIC:
        raise BadMagic(f"expected magic {MAGIC!r}, found {data[:4]!r}")
    if len(data) < HEADER.size:
        raise TruncatedFile(f"header needs {HEADER.size} bytes, file has {len(data)}")
    _, version, flags, n = HEADER.unpack_from(data)
    if version != VERSION:
        raise BadMagic(f"unsupported tree file version {version}")
    expected = HEADER.size + 8 * n * (2 if flags & FLAG_BIRTH_TIMES else 1)
    if len(data) < expected:
        raise TruncatedFile(f"{n} vertices need {expected} bytes, file has {len(data)}")

    raw = np.frombuffer(data, dtype="<u8", count=n, offset=HEADER.size)
    if n == 0 or raw[0] != ROOT_SENTINEL:
        raise InvariantViolation("vertex 0 must carry the root sentinel")
    if np.any(raw[1:] == ROOT_SENTINEL):
        raise InvariantViolation("only vertex 0 may be a root")
    parent = raw.astype(np.int64)
    parent[0] = ROOT
    births = None
    if flags & FLAG_BIRTH_TIMES:
        births = np.frombuffer(data, dtype="<f8", count=n, offset=HEADER.size + 8 * n).astype(np.float64)
    tree = TreeState.from_parents(parent, birth_time=births)
    tree.validate()
    return tree


def serialize_tree(tree: TreeState, path: PathLike, fmt: Optional[str] = None) -> Path:
    """
    Write a tree as binary or TSV

    Args:
        tree: tree to write
        path: destination; the suffix picks the format when fmt is not given
        fmt: 'bin' or 'tsv'

    Returns:
        Path written
    """
    path = Path(path)
    fmt = _format_of(path, fmt)
    if fmt == "bin":
        path.write_bytes(tree_to_bytes(tree))
    else:
        lines = [TSV_HEADER]
        lines.extend(f"{i}\t{p}\t{d}" for i, (p, d) in enumerate(zip(tree.parent.tolist(), tree.depth.tolist())))
        path.write_text("\n".join(lines) + "\n")
    logger.info("wrote %d-vertex tree to %s", tree.n, path)
    return path


def load_tree(path: PathLike, fmt: Optional[str] = None) -> TreeState:
    """Read a tree written by serialize_tree; depths are recomputed and validated"""
    path = Path(path)
    fmt = _format_of(path, fmt)
    if fmt == "bin":
        return tree_from_bytes(path.read_bytes())

    rows = [line.split("\t") for line in path.read_text().splitlines() if line.strip()]
    if rows and rows[0][0] == "index":
        rows = rows[1:]
    if not rows:
        raise TruncatedFile(f"{path} holds no vertices")
    parent = []
    stored_depth = []
    for i, row in enumerate(rows):
        if len(row) != 3:
            raise TruncatedFile(f"{path}: line {i + 2} has {len(row)} fields, expected 3")
        index, p, d = (int(field) for field in row)
        if index != i:
            raise InvariantViolation(f"{path}: vertex {index} listed at position {i}")
        parent.append(p)
        stored_depth.append(d)
    tree = TreeState.from_parents(parent)
    if tree.depth.tolist() != stored_depth:
        raise InvariantViolation(f"{path}: stored depths disagree with the parent array")
    tree.validate()
    return tree
