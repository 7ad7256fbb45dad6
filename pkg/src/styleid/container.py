"""SIDG1 flat-weights container.

Layout (all integers little-endian uint32)::

    b"SIDG1"
    L, D, H, W, C, param_count
    arch_len, arch (utf-8)
    n_tensors
    n_tensors x (name_len, name (utf-8), ndim, dims[ndim])
    param_count x float32, tensors concatenated in manifest order (row-major)

Generators and external perceptual weights both use this container; the
``arch`` tag selects the adapter that interprets the tensors.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"SIDG1"


@dataclass
class Container:
    arch: str
    dims: tuple[int, int, int, int, int]  # L, D, H, W, C
    tensors: dict[str, np.ndarray]

    @property
    def param_count(self) -> int:
        return sum(int(t.size) for t in self.tensors.values())


def to_bytes(c: Container) -> bytes:
    out = bytearray(MAGIC)
    out += struct.pack("<6I", *c.dims, c.param_count)
    arch = c.arch.encode()
    out += struct.pack("<I", len(arch)) + arch
    out += struct.pack("<I", len(c.tensors))
    for name, t in c.tensors.items():
        enc = name.encode()
        out += struct.pack("<I", len(enc)) + enc
        out += struct.pack(f"<I{t.ndim}I", t.ndim, *t.shape)
    for t in c.tensors.values():
        out += np.ascontiguousarray(t, dtype="<f4").tobytes()
    return bytes(out)


def from_bytes(data: bytes, source="<bytes>") -> Container:
    def take(fmt):
        nonlocal pos
        size = struct.calcsize(fmt)
        if pos + size > len(data):
            raise FormatError(f"{source}: truncated SIDG1 header")
        vals = struct.unpack_from(fmt, data, pos)
        pos += size
        return vals

    def take_str():
        nonlocal pos
        (n,) = take("<I")
        raw = data[pos:pos + n]
        if len(raw) != n:
            raise FormatError(f"{source}: truncated SIDG1 header")
        pos += n
        return raw.decode()

    if data[:len(MAGIC)] != MAGIC:
        raise FormatError(f"{source}: not a SIDG1 container")
    pos = len(MAGIC)
    *dims, count = take("<6I")
    arch = take_str()
    (n_tensors,) = take("<I")
    shapes = {}
    for _ in range(n_tensors):
        name = take_str()
        (ndim,) = take("<I")
        shapes[name] = take(f"<{ndim}I")
    total = sum(int(np.prod(s)) for s in shapes.values())
    if total != count:
        raise FormatError(f"{source}: manifest lists {total} params, header says {count}")
    body = data[pos:]
    if len(body) != 4 * count:
        raise FormatError(f"{source}: expected {count} floats, found {len(body) // 4}")
    flat = np.frombuffer(body, dtype="<f4").astype(np.float64)
    tensors, off = {}, 0
    for name, shape in shapes.items():
        n = int(np.prod(shape))
        tensors[name] = flat[off:off + n].reshape(shape)
        off += n
    return Container(arch, tuple(dims), tensors)


def save(path, c: Container) -> None:
    Path(path).write_bytes(to_bytes(c))


def load(path) -> Container:
    path = Path(path)
    return from_bytes(path.read_bytes(), source=str(path))
