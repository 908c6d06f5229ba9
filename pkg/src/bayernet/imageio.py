"""Reading and writing 8-bit PNG, binary PPM (P6) and binary PGM (P5).

CFA planes are stored as PGM with a ``# bayer: <LAYOUT>`` comment in the header.
"""
from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .image import BayerLayout, MosaicImage, to_uint8

RGB_SUFFIXES = (".png", ".ppm", ".pnm")
_BAYER_COMMENT = re.compile(rb"#\s*bayer:\s*(\S+)")


class ImageFormatError(ValueError):
    pass


def _read_netpbm(data: bytes):
    """Parse a P5/P6 file; returns (magic, array, comments)."""
    pos = 0
    tokens = []
    comments = []
    while len(tokens) < 4:
        if pos >= len(data):
            raise ImageFormatError("truncated netpbm header")
        c = data[pos : pos + 1]
        if c == b"#":
            end = data.find(b"\n", pos)
            end = len(data) if end < 0 else end
            comments.append(data[pos:end])
            pos = end + 1
        elif c.isspace():
            pos += 1
        else:
            m = re.compile(rb"\S+").match(data, pos)
            tokens.append(m.group())
            pos = m.end()
    # exactly one whitespace byte separates the header from the raster
    pos += 1
    magic = tokens[0]
    if magic not in (b"P5", b"P6"):
        raise ImageFormatError(f"unsupported netpbm magic {magic!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise ImageFormatError("malformed netpbm header") from None
    if maxval != 255:
        raise ImageFormatError(f"only 8-bit netpbm is supported (maxval {maxval})")
    channels = 3 if magic == b"P6" else 1
    n = width * height * channels
    raster = data[pos : pos + n]
    if len(raster) != n:
        raise ImageFormatError("truncated netpbm raster")
    arr = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, channels)
    return magic, arr, comments


def _write_netpbm(path, arr: np.ndarray, comments=()):
    arr = to_uint8(arr)
    magic = b"P6" if arr.ndim == 3 else b"P5"
    h, w = arr.shape[:2]
    header = magic + b"\n"
    for c in comments:
        header += b"# " + c.encode("ascii") + b"\n"
    header += f"{w} {h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + arr.tobytes())


def read_rgb(path) -> np.ndarray:
    """Load an RGB image as an ``(H, W, 3)`` float64 array."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix in (".ppm", ".pnm"):
        magic, arr, _ = _read_netpbm(path.read_bytes())
        if magic != b"P6":
            raise ImageFormatError(f"{path}: expected a P6 RGB image")
        return arr.astype(np.float64)
    if suffix == ".png":
        from PIL import Image

        with Image.open(path) as im:
            if im.mode not in ("RGB", "RGBA", "L", "P"):
                raise ImageFormatError(f"{path}: unsupported PNG mode {im.mode}")
            return np.asarray(im.convert("RGB"), dtype=np.float64)
    raise ImageFormatError(f"{path}: unsupported image type {suffix!r}")


def write_rgb(path, img: np.ndarray) -> None:
    path = Path(path)
    suffix = path.suffix.lower()
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) image, got {img.shape}")
    if suffix in (".ppm", ".pnm"):
        _write_netpbm(path, img)
    elif suffix == ".png":
        from PIL import Image

        Image.fromarray(to_uint8(img), mode="RGB").save(path)
    else:
        raise ImageFormatError(f"{path}: unsupported image type {suffix!r}")


def read_cfa(path, layout=None) -> MosaicImage:
    """Load a PGM CFA plane; the header comment supplies the layout unless given."""
    magic, arr, comments = _read_netpbm(Path(path).read_bytes())
    if magic != b"P5":
        raise ImageFormatError(f"{path}: expected a P5 CFA plane")
    found = []
    for c in comments:
        m = _BAYER_COMMENT.match(c)
        if m:
            found.append(m.group(1).decode("ascii"))
    if layout is None:
        if len(found) != 1:
            raise ImageFormatError(f"{path}: expected exactly one '# bayer:' comment, found {len(found)}")
        layout = found[0]
    return MosaicImage(arr[..., 0].astype(np.float64), BayerLayout.parse(layout))


def write_cfa(path, m: MosaicImage) -> None:
    _write_netpbm(path, m.cfa, comments=[f"bayer: {m.layout.value}"])
