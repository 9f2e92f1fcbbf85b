"""8-bit PNG / PPM / PGM read-write with the [-1, 1] <-> [0, 255] mapping."""
import struct
import zlib
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import ParseError

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


def to_uint8(values):
    """v8 = round((v + 1) * 127.5), clipped to [0, 255]."""
    return np.clip(np.round((np.asarray(values, dtype=np.float64) + 1.0) * 127.5), 0, 255).astype(np.uint8)


def from_uint8(values):
    return (np.asarray(values, dtype=np.float32) / 127.5 - 1.0).astype(np.float32)


def _check_png_structure(buf, path):
    """Walk the chunk list, verifying lengths and CRCs, so corruption is reported with its offset."""
    if buf[:8] != PNG_SIGNATURE:
        raise ParseError(f"{path}: missing PNG signature", 0)
    off = 8
    seen_end = False
    while off < len(buf):
        if off + 8 > len(buf):
            raise ParseError(f"{path}: truncated chunk header", off)
        length, ctype = struct.unpack_from(">I4s", buf, off)
        end = off + 12 + length
        if end > len(buf):
            raise ParseError(f"{path}: chunk {ctype!r} runs past end of file", off)
        crc = struct.unpack_from(">I", buf, off + 8 + length)[0]
        if zlib.crc32(buf[off + 4:off + 8 + length]) & 0xFFFFFFFF != crc:
            raise ParseError(f"{path}: CRC mismatch in chunk {ctype!r}", off)
        off = end
        if ctype == b"IEND":
            seen_end = True
            break
    if not seen_end:
        raise ParseError(f"{path}: missing IEND chunk", off)


def _read_netpbm(buf, path):
    magic = buf[:2]
    if magic not in (b"P5", b"P6"):
        raise ParseError(f"{path}: unsupported netpbm magic {magic!r}", 0)
    fields, off = [], 2
    while len(fields) < 3:
        while off < len(buf) and buf[off:off + 1].isspace():
            off += 1
        if off < len(buf) and buf[off:off + 1] == b"#":
            while off < len(buf) and buf[off:off + 1] != b"\n":
                off += 1
            continue
        start = off
        while off < len(buf) and buf[off:off + 1].isdigit():
            off += 1
        if start == off:
            raise ParseError(f"{path}: expected an integer header field", start)
        fields.append(int(buf[start:off]))
    off += 1  # single whitespace byte before the raster
    w, h, maxval = fields
    if maxval != 255:
        raise ParseError(f"{path}: only 8-bit netpbm supported (maxval {maxval})", off)
    ch = 3 if magic == b"P6" else 1
    need = w * h * ch
    if len(buf) - off < need:
        raise ParseError(f"{path}: raster truncated, expected {need} bytes", len(buf))
    arr = np.frombuffer(buf, dtype=np.uint8, count=need, offset=off)
    return arr.reshape(h, w, ch) if ch == 3 else arr.reshape(h, w)


def read_uint8(path):
    """Load an 8-bit image as (H, W, 3) or (H, W) uint8."""
    path = Path(path)
    buf = path.read_bytes()
    if buf[:2] in (b"P5", b"P6"):
        return _read_netpbm(buf, path).copy()
    _check_png_structure(buf, path)
    with Image.open(path) as im:
        im.load()
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB")
        return np.asarray(im).copy()


def write_uint8(path, arr):
    path = Path(path)
    arr = np.asarray(arr, dtype=np.uint8)
    if path.suffix.lower() in (".ppm", ".pgm"):
        magic = b"P6" if arr.ndim == 3 else b"P5"
        header = magic + f"\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode()
        path.write_bytes(header + arr.tobytes())
    else:
        Image.fromarray(arr).save(path, format="PNG")


def load_image(path):
    """(3, H, W) float32 in [-1, 1]."""
    arr = read_uint8(path)
    if arr.ndim == 2:
        arr = np.repeat(arr[..., None], 3, axis=-1)
    return from_uint8(arr).transpose(2, 0, 1).copy()


def save_image(path, image):
    image = np.asarray(image)
    write_uint8(path, to_uint8(image.transpose(1, 2, 0)))


def load_mask(path):
    """(1, H, W) float32 in {0, 1}."""
    arr = read_uint8(path)
    if arr.ndim == 3:
        arr = arr[..., 0]
    return (arr >= 128).astype(np.float32)[None]


def save_mask(path, mask):
    write_uint8(path, (np.asarray(mask)[0] > 0.5).astype(np.uint8) * 255)
