"""Flat binary draw archive.

Layout: 8-byte magic ``PGDRAWS1``, little-endian uint64 header length,
UTF-8 JSON header padded with spaces to a multiple of 8 bytes, then the
draws as little-endian float64 in row-major (draw, column) order.  The
header records ``shape``, ``columns`` and any caller metadata (seed etc.).
"""
import json
import struct

import numpy as np

MAGIC = b"PGDRAWS1"


class DrawWriter:
    """Append rows of draws to an archive whose column set is fixed up front."""

    def __init__(self, path, columns, n_rows, **meta):
        self.columns = list(columns)
        self.n_rows = int(n_rows)
        self._written = 0
        header = dict(meta, shape=[self.n_rows, len(self.columns)], columns=self.columns,
                      dtype="<f8", order="C")
        blob = json.dumps(header, sort_keys=True).encode("utf-8")
        blob += b" " * (-len(blob) % 8)
        self._fh = open(path, "wb")
        self._fh.write(MAGIC + struct.pack("<Q", len(blob)) + blob)

    def write(self, rows):
        rows = np.ascontiguousarray(np.atleast_2d(rows), dtype="<f8")
        if rows.shape[1] != len(self.columns):
            raise ValueError(f"expected {len(self.columns)} columns, got {rows.shape[1]}")
        if self._written + rows.shape[0] > self.n_rows:
            raise ValueError("more rows than declared")
        self._fh.write(rows.tobytes())
        self._written += rows.shape[0]

    def close(self):
        self._fh.close()
        if self._written != self.n_rows:
            raise ValueError(f"declared {self.n_rows} rows, wrote {self._written}")

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        if exc[0] is None:
            self.close()
        else:
            self._fh.close()


def read_header(path):
    with open(path, "rb") as fh:
        if fh.read(8) != MAGIC:
            raise ValueError(f"{path} is not a draw archive")
        (n,) = struct.unpack("<Q", fh.read(8))
        return json.loads(fh.read(n).decode("utf-8")), 16 + n


def read_draws(path, mmap=False):
    """Return ``(header, array)``; ``array`` has shape ``header['shape']``."""
    header, offset = read_header(path)
    shape = tuple(header["shape"])
    if mmap:
        data = np.memmap(path, dtype="<f8", mode="r", offset=offset, shape=shape)
    else:
        with open(path, "rb") as fh:
            fh.seek(offset)
            data = np.frombuffer(fh.read(), dtype="<f8")
        if data.size != shape[0] * shape[1]:
            raise ValueError(f"{path}: expected {shape[0] * shape[1]} values, found {data.size}")
        data = data.reshape(shape)
    return header, data
