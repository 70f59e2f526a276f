"""Minimal 8-bit image file IO: binary PGM (P5) and non-interlaced PNG.

Pixels cross this boundary as float arrays in [0, 1], (H, W) for grayscale
or (H, W, 3) for RGB. Quantization is round(v * 255), so data already on
the 8-bit grid survives a write/read round trip exactly and anything else
moves by at most half a step.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np


class UnsupportedFormat(Exception):
    pass


class CorruptFile(Exception):
    pass


_PNG_SIG = b"\x89PNG\r\n\x1a\n"


def _quantize(img: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.asarray(img, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def write_pgm(path: str | Path, img: np.ndarray) -> None:
    """Binary PGM, maxval 255. Grayscale input only."""
    img = np.asarray(img)
    if img.ndim != 2:
        raise UnsupportedFormat("PGM holds a single channel; got a color image")
    data = _quantize(img)
    h, w = data.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(data.tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if not raw.startswith(b"P5"):
        raise UnsupportedFormat("not a binary PGM (P5) file")
    # Header is three whitespace-separated fields; '#' comments may intervene.
    fields: list[int] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise CorruptFile("PGM header ended early")
        try:
            fields.append(int(raw[start:pos]))
        except ValueError:
            raise CorruptFile(f"bad PGM header field {raw[start:pos]!r}") from None
    pos += 1  # single whitespace byte after maxval
    w, h, maxval = fields
    if maxval != 255:
        raise UnsupportedFormat(f"only maxval 255 PGM is handled, got {maxval}")
    pixels = raw[pos:pos + w * h]
    if len(pixels) != w * h:
        raise CorruptFile("PGM pixel data truncated")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(h, w).astype(np.float64) / 255.0


def _chunk(tag: bytes, body: bytes) -> bytes:
    return struct.pack(">I", len(body)) + tag + body + \
        struct.pack(">I", zlib.crc32(tag + body) & 0xFFFFFFFF)


def write_png(path: str | Path, img: np.ndarray) -> None:
    """8-bit grayscale or RGB, no interlace, filter type 0 on every row."""
    img = np.asarray(img)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[:, :, 0]
    if img.ndim == 2:
        color_type, channels = 0, 1
    elif img.ndim == 3 and img.shape[2] == 3:
        color_type, channels = 2, 3
    else:
        raise UnsupportedFormat(f"cannot write shape {img.shape} as PNG")
    data = _quantize(img).reshape(img.shape[0], -1)
    h = data.shape[0]
    scanlines = b"".join(b"\x00" + row.tobytes() for row in data)
    ihdr = struct.pack(">IIBBBBB", data.shape[1] // channels, h, 8, color_type, 0, 0, 0)
    with open(path, "wb") as f:
        f.write(_PNG_SIG)
        f.write(_chunk(b"IHDR", ihdr))
        f.write(_chunk(b"IDAT", zlib.compress(scanlines, 9)))
        f.write(_chunk(b"IEND", b""))


def _paeth(a: int, b: int, c: int) -> int:
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    return b if pb <= pc else c


def _unfilter(raw: bytes, h: int, w: int, channels: int) -> np.ndarray:
    stride = w * channels
    if len(raw) != h * (stride + 1):
        raise CorruptFile("decompressed PNG data has the wrong length")
    out = np.empty((h, stride), dtype=np.uint8)
    prev = bytearray(stride)
    pos = 0
    for y in range(h):
        ftype = raw[pos]
        row = bytearray(raw[pos + 1:pos + 1 + stride])
        pos += 1 + stride
        if ftype == 0:
            pass
        elif ftype == 1:  # Sub
            for i in range(channels, stride):
                row[i] = (row[i] + row[i - channels]) & 0xFF
        elif ftype == 2:  # Up
            for i in range(stride):
                row[i] = (row[i] + prev[i]) & 0xFF
        elif ftype == 3:  # Average
            for i in range(stride):
                left = row[i - channels] if i >= channels else 0
                row[i] = (row[i] + ((left + prev[i]) >> 1)) & 0xFF
        elif ftype == 4:  # Paeth
            for i in range(stride):
                left = row[i - channels] if i >= channels else 0
                ul = prev[i - channels] if i >= channels else 0
                row[i] = (row[i] + _paeth(left, prev[i], ul)) & 0xFF
        else:
            raise CorruptFile(f"unknown PNG filter type {ftype}")
        out[y] = np.frombuffer(bytes(row), dtype=np.uint8)
        prev = row
    return out


def read_png(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if not raw.startswith(_PNG_SIG):
        raise UnsupportedFormat("not a PNG file")
    pos = len(_PNG_SIG)
    ihdr = None
    idat = b""
    saw_end = False
    while pos + 8 <= len(raw):
        length, tag = struct.unpack(">I4s", raw[pos:pos + 8])
        body = raw[pos + 8:pos + 8 + length]
        crc = raw[pos + 8 + length:pos + 12 + length]
        if len(body) != length or len(crc) != 4:
            raise CorruptFile("PNG chunk truncated")
        if struct.unpack(">I", crc)[0] != (zlib.crc32(tag + body) & 0xFFFFFFFF):
            raise CorruptFile(f"bad CRC in {tag.decode('latin1')} chunk")
        if tag == b"IHDR":
            ihdr = body
        elif tag == b"IDAT":
            idat += body
        elif tag == b"IEND":
            saw_end = True
            break
        pos += 12 + length
    if ihdr is None or not saw_end:
        raise CorruptFile("PNG ended before IHDR/IEND")
    w, h, depth, color_type, comp, filt, interlace = struct.unpack(">IIBBBBB", ihdr)
    if depth != 8 or color_type not in (0, 2) or interlace != 0 or comp != 0 or filt != 0:
        raise UnsupportedFormat(
            f"only 8-bit gray/RGB non-interlaced PNG is handled "
            f"(depth={depth}, color={color_type}, interlace={interlace})")
    channels = 1 if color_type == 0 else 3
    try:
        plain = zlib.decompress(idat)
    except zlib.error as e:
        raise CorruptFile(f"PNG pixel data does not inflate: {e}") from None
    flat = _unfilter(plain, h, w, channels).astype(np.float64) / 255.0
    return flat.reshape(h, w) if channels == 1 else flat.reshape(h, w, 3)


def write_image(path: str | Path, img: np.ndarray) -> None:
    suffix = Path(path).suffix.lower()
    if suffix == ".png":
        write_png(path, img)
    elif suffix == ".pgm":
        write_pgm(path, img)
    else:
        raise UnsupportedFormat(f"unknown image suffix {suffix!r}")


def read_image(path: str | Path) -> np.ndarray:
    suffix = Path(path).suffix.lower()
    if suffix == ".png":
        return read_png(path)
    if suffix == ".pgm":
        return read_pgm(path)
    raise UnsupportedFormat(f"unknown image suffix {suffix!r}")
