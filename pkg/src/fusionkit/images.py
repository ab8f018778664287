"""Minimal binary PPM (P6) / PGM (P5) reading and writing, 8-bit only."""

import numpy as np

from fusionkit.errors import SchemaError


def _read_header(f, magic):
    got = f.read(2)
    if got != magic:
        raise SchemaError(f"expected {magic.decode()} file, got magic {got!r}")
    fields = []
    while len(fields) < 3:
        tok = b""
        ch = f.read(1)
        while ch.isspace():
            ch = f.read(1)
        if ch == b"#":
            f.readline()
            continue
        while ch and not ch.isspace():
            tok += ch
            ch = f.read(1)
        if not tok:
            raise SchemaError("truncated header")
        if ch == b"#":
            f.readline()
        try:
            fields.append(int(tok))
        except ValueError:
            raise SchemaError(f"non-integer header field {tok!r}") from None
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise SchemaError(f"bad raster dimensions {width}x{height}")
    if not 0 < maxval <= 255:
        raise SchemaError(f"only 8-bit rasters supported, maxval={maxval}")
    return width, height, maxval


def read_ppm(path):
    """Read a binary P6 image into an (h, w, 3) uint8 array, RGB order."""
    with open(path, "rb") as f:
        width, height, _ = _read_header(f, b"P6")
        raw = f.read(width * height * 3)
        if len(raw) != width * height * 3:
            raise SchemaError("truncated raster data")
        return np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 3)


def read_pgm(path):
    """Read a binary P5 image into an (h, w) uint8 array."""
    with open(path, "rb") as f:
        width, height, _ = _read_header(f, b"P5")
        raw = f.read(width * height)
        if len(raw) != width * height:
            raise SchemaError("truncated raster data")
        return np.frombuffer(raw, dtype=np.uint8).reshape(height, width)


def write_ppm(path, image):
    image = np.asarray(image, dtype=np.uint8)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected (h, w, 3) image, got shape {image.shape}")
    h, w, _ = image.shape
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode())
        f.write(image.tobytes())


def write_pgm(path, image):
    image = np.asarray(image, dtype=np.uint8)
    if image.ndim != 2:
        raise ValueError(f"expected (h, w) image, got shape {image.shape}")
    h, w = image.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode())
        f.write(image.tobytes())
