"""Grayscale image I/O: binary PGM (P5) and PBM (P4) done natively for
byte-exact interchange, PNG delegated to Pillow."""

from __future__ import annotations

import numpy as np
from PIL import Image


def write_pgm(path, samples: np.ndarray, maxval: int = 255) -> None:
    """Write a binary PGM.  8-bit for maxval <= 255, else 16-bit big-endian."""
    samples = np.asarray(samples)
    if samples.ndim != 2:
        raise ValueError("PGM data must be 2-D")
    if samples.min() < 0 or samples.max() > maxval:
        raise ValueError("samples out of range for declared maxval")
    h, w = samples.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{maxval}\n".encode("ascii"))
        if maxval <= 255:
            fh.write(samples.astype(np.uint8).tobytes())
        else:
            fh.write(samples.astype(">u2").tobytes())


def _read_pnm_tokens(fh, count):
    """Read whitespace/comment-separated ASCII header tokens."""
    tokens = []
    while len(tokens) < count:
        line = fh.readline()
        if not line:
            raise ValueError("unexpected end of PNM header")
        line = line.split(b"#", 1)[0]
        tokens.extend(line.split())
    return [int(t) for t in tokens[:count]]


def read_pgm(path) -> tuple[np.ndarray, int]:
    """Read a binary PGM; returns (samples, maxval)."""
    with open(path, "rb") as fh:
        magic = fh.read(2)
        if magic != b"P5":
            raise ValueError(f"{path}: not a binary PGM (P5)")
        w, h, maxval = _read_pnm_tokens(fh, 3)
        if not (0 < maxval < 65536):
            raise ValueError(f"{path}: invalid maxval {maxval}")
        dtype = np.dtype(np.uint8) if maxval <= 255 else np.dtype(">u2")
        raw = fh.read(w * h * dtype.itemsize)
        if len(raw) != w * h * dtype.itemsize:
            raise ValueError(f"{path}: truncated PGM payload")
        samples = np.frombuffer(raw, dtype=dtype).reshape(h, w)
    return samples.astype(np.uint16 if maxval > 255 else np.uint8), maxval


def write_pbm(path, mask: np.ndarray) -> None:
    """Write a bitmap as binary PBM (P4); 1 bits mark true pixels."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    with open(path, "wb") as fh:
        fh.write(f"P4\n{w} {h}\n".encode("ascii"))
        fh.write(np.packbits(mask, axis=1).tobytes())


def read_pbm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(2)
        if magic != b"P4":
            raise ValueError(f"{path}: not a binary PBM (P4)")
        w, h = _read_pnm_tokens(fh, 2)
        row_bytes = (w + 7) // 8
        raw = fh.read(row_bytes * h)
        if len(raw) != row_bytes * h:
            raise ValueError(f"{path}: truncated PBM payload")
    bits = np.unpackbits(
        np.frombuffer(raw, dtype=np.uint8).reshape(h, row_bytes), axis=1
    )
    return bits[:, :w].astype(bool)


def read_grayscale(path) -> tuple[np.ndarray, int]:
    """Read a PGM or PNG grayscale image; returns (samples, maxval)."""
    path = str(path)
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == b"P5":
        return read_pgm(path)
    img = Image.open(path)
    if img.mode in ("I;16", "I;16B", "I;16L", "I"):
        arr = np.asarray(img, dtype=np.uint32)
        if arr.max() > 65535:
            raise ValueError(f"{path}: unsupported sample depth")
        return arr.astype(np.uint16), 65535
    if img.mode != "L":
        img = img.convert("L")
    return np.asarray(img, dtype=np.uint8), 255


def write_png_gray(path, samples: np.ndarray) -> None:
    Image.fromarray(np.asarray(samples, dtype=np.uint8), mode="L").save(
        str(path), format="PNG"
    )
