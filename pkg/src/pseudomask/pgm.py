"""Binary PGM (P5, maxval 255) reading and writing."""

import numpy as np

from pseudomask.errors import ParseError
from pseudomask.imaging import as_image, as_mask

MASK_THRESHOLD = 128


def _tokens(data, count):
    """First ``count`` whitespace-separated header tokens and the data offset."""
    tokens = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            break
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def _int_field(token, name):
    try:
        value = int(token)
    except (TypeError, ValueError):
        raise ParseError(f"invalid {name} {token!r}", field=name) from None
    return value


def parse_pgm(data):
    fields = ("magic", "width", "height", "maxval")
    tokens, offset = _tokens(data, 4)
    if len(tokens) < 4:
        raise ParseError(f"truncated header: missing {fields[len(tokens)]}", field=fields[len(tokens)])
    if tokens[0] != b"P5":
        raise ParseError(f"wrong magic {tokens[0]!r}, expected b'P5'", field="magic")
    width = _int_field(tokens[1], "width")
    height = _int_field(tokens[2], "height")
    maxval = _int_field(tokens[3], "maxval")
    if width < 1:
        raise ParseError(f"invalid width {width}", field="width")
    if height < 1:
        raise ParseError(f"invalid height {height}", field="height")
    if maxval != 255:
        raise ParseError(f"unsupported maxval {maxval}", field="maxval")
    raster = data[offset:offset + width * height]
    if len(raster) != width * height:
        raise ParseError(f"raster has {len(raster)} bytes, expected {width * height}", field="data")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width).copy()


def load_image_pgm(path):
    with open(path, "rb") as fh:
        return parse_pgm(fh.read())


def load_mask_pgm(path):
    return load_image_pgm(path) >= MASK_THRESHOLD


def encode_pgm(img):
    img = as_image(img)
    h, w = img.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(img).tobytes()


def save_image_pgm(img, path):
    with open(path, "wb") as fh:
        fh.write(encode_pgm(img))


def save_mask_pgm(mask, path):
    save_image_pgm(as_mask(mask).astype(np.uint8) * 255, path)
