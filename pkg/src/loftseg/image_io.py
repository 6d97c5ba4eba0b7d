"""Bit-exact file I/O for 16-bit grayscale rasters.

Two formats are accepted: binary PGM (P5) with two-byte big-endian samples,
and 16-bit grayscale PNG. 8-bit files are rejected rather than promoted so
intensity bound semantics stay unambiguous.
"""

from __future__ import annotations

import io
import os

import numpy as np
from PIL import Image as PILImage

from .rasters import BinaryMask, GrayImage16

# Decoded pixel budget; keeps a malformed header from allocating gigabytes.
MAX_PIXELS = 1 << 26

PGM16 = "pgm16"
PNG16 = "png16"

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


class ImageFormatError(ValueError):
    """Raised for malformed, truncated or unsupported image files."""


def _format_for_path(path: str) -> str:
    ext = os.path.splitext(path)[1].lower()
    if ext in (".pgm", ".pnm"):
        return PGM16
    if ext == ".png":
        return PNG16
    raise ImageFormatError(f"cannot infer format from extension {ext!r}; pass format explicitly")


def sniff_format(data: bytes) -> str:
    """Identify PGM16/PNG16 payloads from magic bytes."""
    if data[:8] == _PNG_MAGIC:
        return PNG16
    if data[:2] == b"P5":
        return PGM16
    raise ImageFormatError("unrecognized image payload (expected P5 PGM or PNG)")


def _parse_pgm_tokens(data: bytes, count: int):
    """Return `count` header tokens after the magic plus the payload offset."""
    tokens = []
    i = 2
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i] not in (0x0A, 0x0D):
                i += 1
            continue
        start = i
        while i < n and not data[i : i + 1].isspace():
            i += 1
        if start == i:
            raise ImageFormatError("malformed PGM header: truncated")
        tokens.append(data[start:i])
    if i >= n or not data[i : i + 1].isspace():
        raise ImageFormatError("malformed PGM header: missing separator")
    return tokens, i + 1


def decode_pgm16(data: bytes) -> GrayImage16:
    if data[:2] != b"P5":
        raise ImageFormatError("malformed PGM header: not a P5 file")
    tokens, offset = _parse_pgm_tokens(data, 3)
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise ImageFormatError(f"malformed PGM header: non-numeric fields {tokens}") from None
    if width <= 0 or height <= 0:
        raise ImageFormatError(f"malformed PGM header: bad dimensions {width}x{height}")
    if width * height > MAX_PIXELS:
        raise ImageFormatError(f"dimension overflow: {width}x{height} exceeds {MAX_PIXELS} pixels")
    if maxval <= 255:
        raise ImageFormatError(f"unsupported bit depth: PGM maxval {maxval} (need 16-bit, maxval 65535)")
    if maxval > 65535:
        raise ImageFormatError(f"malformed PGM header: maxval {maxval} out of range")
    need = width * height * 2
    payload = data[offset : offset + need]
    if len(payload) < need:
        raise ImageFormatError(f"truncated PGM payload: need {need} bytes, got {len(payload)}")
    px = np.frombuffer(payload, dtype=">u2").reshape(height, width)
    if px.max(initial=0) > maxval:
        raise ImageFormatError(f"malformed PGM payload: sample exceeds maxval {maxval}")
    return GrayImage16(px.astype(np.uint16))


def encode_pgm16(pixels: np.ndarray) -> bytes:
    h, w = pixels.shape
    header = f"P5\n{w} {h}\n65535\n".encode("ascii")
    return header + pixels.astype(">u2").tobytes()


def decode_png16(data: bytes) -> GrayImage16:
    try:
        img = PILImage.open(io.BytesIO(data))
        img.load()
    except Exception as exc:
        raise ImageFormatError(f"malformed PNG: {exc}") from exc
    if img.mode in ("L", "P", "LA"):
        raise ImageFormatError(f"unsupported bit depth: PNG mode {img.mode} (need 16-bit grayscale)")
    if img.mode not in ("I", "I;16", "I;16B"):
        raise ImageFormatError(f"unsupported PNG mode {img.mode} (need 16-bit grayscale)")
    if img.width * img.height > MAX_PIXELS:
        raise ImageFormatError(f"dimension overflow: {img.width}x{img.height} exceeds {MAX_PIXELS} pixels")
    arr = np.asarray(img)
    if arr.min(initial=0) < 0 or arr.max(initial=0) > 65535:
        raise ImageFormatError("PNG sample out of 16-bit range")
    return GrayImage16(arr.astype(np.uint16))


def encode_png16(pixels: np.ndarray) -> bytes:
    buf = io.BytesIO()
    PILImage.fromarray(pixels.astype(np.uint16)).save(buf, format="PNG")
    return buf.getvalue()


def decode_image(data: bytes, fmt: str | None = None) -> GrayImage16:
    fmt = fmt or sniff_format(data)
    if fmt == PGM16:
        return decode_pgm16(data)
    if fmt == PNG16:
        return decode_png16(data)
    raise ImageFormatError(f"unknown format {fmt!r}")


def _mask_pixels(image: GrayImage16 | BinaryMask) -> np.ndarray:
    if isinstance(image, BinaryMask):
        return np.where(image.bits, np.uint16(65535), np.uint16(0))
    return image.pixels


def encode_image(image: GrayImage16 | BinaryMask, fmt: str) -> bytes:
    """Masks are written as 0/65535 intensities."""
    px = _mask_pixels(image)
    if fmt == PGM16:
        return encode_pgm16(px)
    if fmt == PNG16:
        return encode_png16(px)
    raise ImageFormatError(f"unknown format {fmt!r}")


def read_image(path: str, fmt: str | None = None) -> GrayImage16:
    """Load a 16-bit image; pixel values are preserved bit-exactly."""
    fmt = fmt or _format_for_path(path)
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise ImageFormatError(f"cannot read {path}: {exc}") from exc
    return decode_image(data, fmt)


def write_image(image: GrayImage16 | BinaryMask, path: str, fmt: str | None = None) -> None:
    """Write an image or mask; the file reads back with identical pixels."""
    fmt = fmt or _format_for_path(path)
    data = encode_image(image, fmt)
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise ImageFormatError(f"cannot write {path}: {exc}") from exc


def read_mask(path: str, fmt: str | None = None) -> BinaryMask:
    """Load a mask written by write_image: nonzero intensity means set."""
    img = read_image(path, fmt)
    return BinaryMask(img.pixels > 0)
