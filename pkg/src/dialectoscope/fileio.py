"""Small file helpers: transparent gzip, hashing, float formatting."""

from __future__ import annotations

import gzip
import hashlib
import io
import os
from pathlib import Path


def resolve_read_path(path: str | Path) -> Path:
    """Return `path` if it exists, else `path + '.gz'` if that exists."""
    p = Path(path)
    if p.exists():
        return p
    gz = Path(str(p) + ".gz")
    if gz.exists():
        return gz
    return p


def open_text_read(path: str | Path):
    p = resolve_read_path(path)
    if str(p).endswith(".gz"):
        return io.TextIOWrapper(gzip.open(p, "rb"), encoding="utf-8", newline="")
    return open(p, "r", encoding="utf-8", newline="")


class _GzipTextWriter(io.TextIOWrapper):
    """Text wrapper whose close() also closes the file under the GzipFile.

    GzipFile leaves a caller-supplied fileobj open, so the trailer would
    otherwise sit in the unflushed buffer until garbage collection.
    """

    def __init__(self, raw_file, gz):
        super().__init__(gz, encoding="utf-8", newline="\n")
        self._raw_file = raw_file

    def close(self):
        try:
            super().close()
        finally:
            if not self._raw_file.closed:
                self._raw_file.close()


def open_text_write(path: str | Path, compress: bool = False):
    """Open for writing; with compress=True writes `path.gz` with zeroed mtime."""
    if compress:
        p = Path(str(path) + ".gz")
        raw = open(p, "wb")
        # filename and mtime pinned to keep gzip output byte-stable across runs
        gz = gzip.GzipFile(filename="", mode="wb", fileobj=raw, mtime=0)
        return _GzipTextWriter(raw, gz)
    return open(path, "w", encoding="utf-8", newline="\n")


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def ensure_dir(path: str | Path) -> Path:
    p = Path(path)
    os.makedirs(p, exist_ok=True)
    return p
