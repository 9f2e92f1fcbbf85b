"""Single-file binary checkpoints.

Layout (all little-endian)::

    magic      4s   b"MTCK"
    version    u32
    step       u64  global training step
    meta_len   u32  followed by a UTF-8 JSON blob (model config etc.)
    count      u32
    per parameter:
        name_len u16, name bytes
        dtype    u8   (4 = float32, 8 = float64)
        ndim     u8,  shape u32 * ndim
        adam     u64  Adam step counter
        data, m, v    raw arrays in row-major order
"""
import json
import struct

import numpy as np

from ..errors import CheckpointError

MAGIC = b"MTCK"
FORMAT_VERSION = 1
_DTYPES = {4: np.dtype("<f4"), 8: np.dtype("<f8")}


def save_checkpoint(path, params, step, meta=None):
    meta_bytes = json.dumps(meta or {}, sort_keys=True).encode()
    chunks = [MAGIC, struct.pack("<IQI", FORMAT_VERSION, step, len(meta_bytes)), meta_bytes,
              struct.pack("<I", len(params))]
    for p in params:
        name = p.name.encode()
        width = p.dtype.itemsize
        if width not in _DTYPES:
            raise CheckpointError(f"unsupported dtype {p.dtype} for {p.name}")
        dt = _DTYPES[width]
        chunks.append(struct.pack("<H", len(name)) + name)
        chunks.append(struct.pack(f"<BB{p.ndim}I", width, p.ndim, *p.shape))
        chunks.append(struct.pack("<Q", p.step))
        for arr in (p.data, p.m, p.v):
            chunks.append(np.ascontiguousarray(arr, dtype=dt).tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


def read_checkpoint(path):
    """Return (step, meta, {name: (data, m, v, adam_step)})."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    version, step, meta_len = struct.unpack_from("<IQI", buf, 4)
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    off = 20
    meta = json.loads(buf[off:off + meta_len].decode())
    off += meta_len
    (count,) = struct.unpack_from("<I", buf, off)
    off += 4
    entries = {}
    try:
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", buf, off)
            off += 2
            name = buf[off:off + nlen].decode()
            off += nlen
            width, ndim = struct.unpack_from("<BB", buf, off)
            off += 2
            shape = struct.unpack_from(f"<{ndim}I", buf, off)
            off += 4 * ndim
            (adam,) = struct.unpack_from("<Q", buf, off)
            off += 8
            dt = _DTYPES[width]
            n = int(np.prod(shape)) if ndim else 1
            arrays = []
            for _ in range(3):
                nbytes = n * dt.itemsize
                if off + nbytes > len(buf):
                    raise CheckpointError(f"{path}: truncated while reading {name}")
                arrays.append(np.frombuffer(buf, dtype=dt, count=n, offset=off).reshape(shape).copy())
                off += nbytes
            entries[name] = (*arrays, adam)
    except (struct.error, KeyError) as exc:
        raise CheckpointError(f"{path}: corrupt checkpoint near byte {off}: {exc}") from None
    return step, meta, entries


def load_into(params, entries, path="<checkpoint>"):
    """Copy checkpoint entries into ``params`` after checking names and shapes."""
    problems = []
    by_name = {p.name: p for p in params}
    for name in sorted(set(by_name) - set(entries)):
        problems.append(f"missing {name}")
    for name in sorted(set(entries) - set(by_name)):
        problems.append(f"unexpected {name}")
    for name, p in by_name.items():
        if name in entries and entries[name][0].shape != p.shape:
            problems.append(f"{name}: checkpoint {entries[name][0].shape} vs model {p.shape}")
    if problems:
        raise CheckpointError(f"{path}: parameter mismatch: " + "; ".join(problems))
    for name, p in by_name.items():
        data, m, v, adam = entries[name]
        p.data = data.astype(p.dtype)
        p.m = m.astype(p.dtype)
        p.v = v.astype(p.dtype)
        p.step = int(adam)
