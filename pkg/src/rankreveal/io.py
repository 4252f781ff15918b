"""Matrix and image file formats.

Matrices: MatrixMarket (array and coordinate, real/integer/pattern,
general/symmetric) and a raw little-endian float64 container. Images:
binary PGM (P5) and PPM (P6) with maxval 255.
"""
from __future__ import annotations

import os
import struct

import numpy as np

__all__ = [
    "FormatError",
    "read_matrix",
    "write_matrix",
    "read_matrix_market",
    "write_matrix_market",
    "read_raw",
    "write_raw",
    "read_pnm",
    "write_pnm",
    "image_to_matrix",
    "matrix_to_image",
    "RAW_MAGIC",
]

RAW_MAGIC = b"RRF64\x00\x00\x01"
MAX_PIXELS = 1 << 26


class FormatError(ValueError):
    """Malformed or unsupported input file."""

    def __init__(self, path, message, line=None):
        where = f"{path}:{line}" if line is not None else f"{path}"
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line


def _infer_format(path, fmt):
    if fmt is not None:
        return fmt
    ext = os.path.splitext(str(path))[1].lower()
    if ext in (".mtx", ".mm"):
        return "mm"
    if ext in (".f64", ".bin", ".raw"):
        return "raw"
    raise FormatError(path, f"cannot infer matrix format from extension {ext!r}")


def read_matrix(path, fmt: str | None = None) -> np.ndarray:
    """Read a dense matrix; ``fmt`` is ``"mm"`` or ``"raw"`` (default: by extension)."""
    fmt = _infer_format(path, fmt)
    if fmt == "raw":
        return read_raw(path)
    if fmt in ("mm", "mm-array", "mm-coordinate"):
        return read_matrix_market(path)
    raise ValueError(f"unknown matrix format {fmt!r}")


def write_matrix(path, A, fmt: str | None = None) -> None:
    """Write ``A``; ``fmt`` is ``"raw"``, ``"mm-array"`` or ``"mm-coordinate"``."""
    fmt = _infer_format(path, fmt)
    if fmt == "raw":
        write_raw(path, A)
    elif fmt in ("mm", "mm-array"):
        write_matrix_market(path, A, coordinate=False)
    elif fmt == "mm-coordinate":
        write_matrix_market(path, A, coordinate=True)
    else:
        raise ValueError(f"unknown matrix format {fmt!r}")


def write_raw(path, A) -> None:
    A = np.asarray(A, dtype="<f8")
    if A.ndim != 2:
        raise ValueError("raw format stores 2-D matrices only")
    rows, cols = A.shape
    with open(path, "wb") as fh:
        fh.write(RAW_MAGIC + struct.pack("<II", rows, cols))
        fh.write(np.asfortranarray(A).tobytes(order="F"))


def read_raw(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(16)
        if len(head) < 16 or head[:8] != RAW_MAGIC:
            raise FormatError(path, "bad raw-f64 header")
        rows, cols = struct.unpack("<II", head[8:])
        data = fh.read()
    if len(data) != 8 * rows * cols:
        raise FormatError(path, f"expected {rows * cols} values, found {len(data) / 8:g}")
    return np.frombuffer(data, dtype="<f8").reshape((rows, cols), order="F").astype(float)


def _parse_number(tok, path, lineno, field):
    try:
        return float(int(tok)) if field == "integer" else float(tok)
    except ValueError:
        raise FormatError(path, f"non-numeric token {tok!r}", lineno) from None


def read_matrix_market(path) -> np.ndarray:
    with open(path, "r", encoding="ascii", errors="replace") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FormatError(path, "empty file", 1)
    header = lines[0].split()
    if len(header) != 5 or header[0].lower() != "%%matrixmarket" or header[1].lower() != "matrix":
        raise FormatError(path, "malformed MatrixMarket header", 1)
    layout, field, symmetry = (h.lower() for h in header[2:])
    if layout not in ("array", "coordinate"):
        raise FormatError(path, f"unsupported layout {layout!r}", 1)
    if field not in ("real", "integer", "pattern") or (field == "pattern" and layout == "array"):
        raise FormatError(path, f"unsupported field {field!r}", 1)
    if symmetry not in ("general", "symmetric"):
        raise FormatError(path, f"unsupported symmetry {symmetry!r}", 1)

    body = [(i + 1, ln.split()) for i, ln in enumerate(lines[1:], start=1)
            if ln.strip() and not ln.lstrip().startswith("%")]
    if not body:
        raise FormatError(path, "missing size line", len(lines))
    lineno, size = body[0]
    want = 2 if layout == "array" else 3
    if len(size) != want:
        raise FormatError(path, f"size line needs {want} integers", lineno)
    try:
        dims = [int(t) for t in size]
    except ValueError:
        raise FormatError(path, "non-integer size line", lineno) from None
    rows, cols = dims[:2]
    if rows < 0 or cols < 0:
        raise FormatError(path, "negative dimensions", lineno)
    if symmetry == "symmetric" and rows != cols:
        raise FormatError(path, "symmetric matrix must be square", lineno)
    A = np.zeros((rows, cols))
    entries = body[1:]

    if layout == "array":
        if symmetry == "general":
            slots = [(i, j) for j in range(cols) for i in range(rows)]
        else:
            slots = [(i, j) for j in range(cols) for i in range(j, rows)]
        if len(entries) != len(slots):
            last = entries[-1][0] if entries else lineno
            raise FormatError(path, f"expected {len(slots)} values, found {len(entries)}", last)
        for (ln, toks), (i, j) in zip(entries, slots):
            if len(toks) != 1:
                raise FormatError(path, "expected one value per line", ln)
            A[i, j] = _parse_number(toks[0], path, ln, field)
            if symmetry == "symmetric":
                A[j, i] = A[i, j]
        return A

    nnz = dims[2]
    if len(entries) != nnz:
        last = entries[-1][0] if entries else lineno
        raise FormatError(path, f"expected {nnz} entries, found {len(entries)}", last)
    seen = set()
    width = 2 if field == "pattern" else 3
    for ln, toks in entries:
        if len(toks) != width:
            raise FormatError(path, f"expected {width} tokens per entry", ln)
        try:
            i, j = int(toks[0]) - 1, int(toks[1]) - 1
        except ValueError:
            raise FormatError(path, "non-integer index", ln) from None
        if not (0 <= i < rows and 0 <= j < cols):
            raise FormatError(path, f"index ({i + 1}, {j + 1}) outside {rows}x{cols}", ln)
        key = (min(i, j), max(i, j)) if symmetry == "symmetric" else (i, j)
        if key in seen:
            raise FormatError(path, f"duplicate entry ({i + 1}, {j + 1})", ln)
        seen.add(key)
        v = 1.0 if field == "pattern" else _parse_number(toks[2], path, ln, field)
        A[i, j] = v
        if symmetry == "symmetric":
            A[j, i] = v
    return A


def write_matrix_market(path, A, coordinate: bool = False) -> None:
    A = np.asarray(A, dtype=float)
    rows, cols = A.shape
    with open(path, "w", encoding="ascii") as fh:
        if coordinate:
            I, J = np.nonzero(A.T)
            fh.write("%%MatrixMarket matrix coordinate real general\n")
            fh.write(f"{rows} {cols} {len(I)}\n")
            for j, i in zip(I, J):
                fh.write(f"{i + 1} {j + 1} {A[i, j]:.17g}\n")
        else:
            fh.write("%%MatrixMarket matrix array real general\n")
            fh.write(f"{rows} {cols}\n")
            for v in A.ravel(order="F"):
                fh.write(f"{v:.17g}\n")


def _pnm_tokens(data, path, count):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise FormatError(path, "truncated header")
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def read_pnm(path) -> np.ndarray:
    """Read a binary PGM/PPM; returns ``(h, w)`` or ``(h, w, 3)`` uint8."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] not in (b"P5", b"P6"):
        raise FormatError(path, "not a binary PGM (P5) or PPM (P6) file")
    channels = 1 if data[:2] == b"P5" else 3
    (w, h, maxval), offset = _pnm_tokens(data[2:], path, 3)
    try:
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise FormatError(path, "non-integer header field") from None
    if maxval != 255:
        raise FormatError(path, f"only maxval 255 is supported, got {maxval}")
    if w < 1 or h < 1 or w * h > MAX_PIXELS:
        raise FormatError(path, f"unsupported image size {w}x{h}")
    raster = data[2 + offset:]
    need = w * h * channels
    if len(raster) < need:
        raise FormatError(path, f"raster has {len(raster)} bytes, expected {need}")
    img = np.frombuffer(raster[:need], dtype=np.uint8)
    return img.reshape((h, w)) if channels == 1 else img.reshape((h, w, 3))


def write_pnm(path, img) -> None:
    img = np.asarray(img)
    if img.dtype != np.uint8:
        raise ValueError("write_pnm expects uint8 pixels; use matrix_to_image first")
    if img.ndim == 2:
        magic = b"P5"
    elif img.ndim == 3 and img.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError(f"unsupported image shape {img.shape}")
    h, w = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(magic + f"\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img).tobytes())


def image_to_matrix(img) -> np.ndarray:
    """Gray ``h x w`` stays as is; color stacks R, G, B into ``3h x w``."""
    img = np.asarray(img, dtype=float)
    if img.ndim == 2:
        return img
    return np.vstack([img[:, :, c] for c in range(3)])


def matrix_to_image(A, color: bool = False) -> np.ndarray:
    """Clamp to [0, 255], round half to even and undo the channel stacking."""
    px = np.rint(np.clip(np.asarray(A, dtype=float), 0.0, 255.0)).astype(np.uint8)
    if not color:
        return px
    h = px.shape[0] // 3
    if 3 * h != px.shape[0]:
        raise ValueError(f"color matrix needs a multiple of 3 rows, got {px.shape[0]}")
    return np.stack([px[:h], px[h:2 * h], px[2 * h:]], axis=2)
