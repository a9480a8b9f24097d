"""Binary shape masks: PBM loading, validation and boundary extraction.

Masks use the Netpbm convention (1 = black = shape interior) and are kept
on a regular grid with a guaranteed one-cell false margin so that all
later stencil operations stay in bounds.  Interior cells are 4-connected,
the background is 8-connected; this standard pairing avoids the digital
topology paradoxes of using one connectivity for both.

Points are (x, y) pairs with x = column and y = row; arrays are indexed
[y, x].
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import EmptyShape, HasHoles, MultipleComponents, ParseError

_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_BOX = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Validated rasterized shape region (one 4-connected component,
    simply connected background, one-cell false margin)."""

    inside: np.ndarray  # bool, shape (height, width)

    @property
    def width(self) -> int:
        return self.inside.shape[1]

    @property
    def height(self) -> int:
        return self.inside.shape[0]

    def __eq__(self, other):
        return isinstance(other, BinaryMask) and np.array_equal(self.inside, other.inside)


@dataclass(frozen=True)
class BoundaryCurve:
    """Closed cycle of boundary cells, counter-clockwise (positive signed
    area with y treated as pointing up)."""

    cells: np.ndarray  # int, shape (n, 2), (x, y) pairs

    @property
    def length(self) -> int:
        return len(self.cells)


def mask_from_array(arr, allow_largest_component: bool = False) -> BinaryMask:
    """Validate a boolean array as a shape mask and pad a one-cell margin."""
    arr = np.asarray(arr, dtype=bool)
    if arr.ndim != 2:
        raise ParseError(f"mask array must be 2-D, got shape {arr.shape}")
    if not arr.any():
        raise EmptyShape("mask contains no interior cell")

    labels, ncomp = ndimage.label(arr, structure=_CROSS)
    if ncomp > 1:
        if not allow_largest_component:
            raise MultipleComponents(f"mask has {ncomp} 4-connected components")
        sizes = ndimage.sum_labels(arr, labels, index=np.arange(1, ncomp + 1))
        arr = labels == (int(np.argmax(sizes)) + 1)

    inside = np.pad(arr, 1)

    _, nbg = ndimage.label(~inside, structure=_BOX)
    if nbg > 1:
        raise HasHoles(f"background splits into {nbg} components; shape has holes")
    return BinaryMask(inside)


def load_mask(path, allow_largest_component: bool = False) -> BinaryMask:
    """Read a PBM (P1 or P4) file into a validated, padded mask."""
    data = Path(path).read_bytes()
    if data[:2] == b"P1":
        arr = _parse_p1(data)
    elif data[:2] == b"P4":
        arr = _parse_p4(data)
    else:
        raise ParseError(f"{path}: not a PBM file (magic {data[:2]!r})")
    return mask_from_array(arr, allow_largest_component=allow_largest_component)


def save_mask(mask: BinaryMask, path, fmt: str = "P1") -> None:
    """Write a mask to PBM.  The stored raster is the padded grid; loading
    it back adds a fresh margin but leaves the shape itself untouched."""
    inside = mask.inside
    h, w = inside.shape
    if fmt == "P1":
        rows = ["".join("1" if c else "0" for c in row) for row in inside]
        text = f"P1\n{w} {h}\n" + "\n".join(rows) + "\n"
        Path(path).write_bytes(text.encode("ascii"))
    elif fmt == "P4":
        packed = np.packbits(inside, axis=1)
        Path(path).write_bytes(f"P4\n{w} {h}\n".encode("ascii") + packed.tobytes())
    else:
        raise ValueError(f"unknown PBM format {fmt!r}")


def _header_tokens(data: bytes):
    """First three header tokens (magic, width, height) and the offset one
    byte past the height token, honouring '#' comments."""
    toks = []
    i, n = 0, len(data)
    while i < n and len(toks) < 3:
        c = data[i : i + 1]
        if c == b"#":
            while i < n and data[i : i + 1] != b"\n":
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < n and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
                j += 1
            toks.append(data[i:j])
            i = j
    if len(toks) < 3:
        raise ParseError("malformed PBM header")
    try:
        w, h = int(toks[1]), int(toks[2])
    except ValueError as exc:
        raise ParseError(f"malformed PBM dimensions: {exc}") from exc
    if w <= 0 or h <= 0:
        raise ParseError(f"bad PBM dimensions {w}x{h}")
    return w, h, i


def _parse_p1(data: bytes) -> np.ndarray:
    w, h, end = _header_tokens(data)
    body = re.sub(rb"#[^\n]*", b"", data[end:])
    bits = [c == 0x31 for c in body if c in (0x30, 0x31)]
    if any(not chr(c).isspace() and c not in (0x30, 0x31) for c in body):
        raise ParseError("unexpected character in P1 raster")
    if len(bits) != w * h:
        raise ParseError(f"P1 raster has {len(bits)} bits, expected {w * h}")
    return np.array(bits, dtype=bool).reshape(h, w)


def _parse_p4(data: bytes) -> np.ndarray:
    w, h, end = _header_tokens(data)
    start = end + 1  # exactly one whitespace byte before the raster
    row_bytes = (w + 7) // 8
    raw = data[start : start + row_bytes * h]
    if len(raw) != row_bytes * h:
        raise ParseError(f"P4 raster truncated: {len(raw)} bytes, expected {row_bytes * h}")
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8).reshape(h, row_bytes), axis=1)
    return bits[:, :w].astype(bool)


def boundary_cells(mask: BinaryMask) -> np.ndarray:
    """Boolean grid of interior cells that touch the background
    (8-adjacency)."""
    eroded = ndimage.binary_erosion(mask.inside, structure=_BOX, border_value=0)
    return mask.inside & ~eroded


# Moore neighbourhood in clockwise screen order starting east.
_MOORE = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)]
_MOORE_INDEX = {d: k for k, d in enumerate(_MOORE)}


def extract_boundary(mask: BinaryMask) -> BoundaryCurve:
    """Trace the closed boundary cycle of a mask (Moore neighbour tracing
    with Jacob's stopping criterion).

    The cycle visits every boundary cell; cells on one-pixel spurs appear
    more than once, as they must for the cycle to stay 8-connected.
    """
    inside = mask.inside
    ys, xs = np.nonzero(boundary_cells(mask))
    if len(xs) == 1:
        return BoundaryCurve(np.array([[xs[0], ys[0]]], dtype=int))

    start = (int(xs[0]), int(ys[0]))  # topmost row, leftmost column
    start_back = (start[0] - 1, start[1])  # background by choice of start
    contour = []
    cur, back = start, start_back
    guard = 4 * len(xs) + 8
    while guard:
        guard -= 1
        contour.append(cur)
        base = _MOORE_INDEX[(back[0] - cur[0], back[1] - cur[1])]
        nxt, b = None, back
        for k in range(1, 9):
            d = _MOORE[(base + k) % 8]
            cand = (cur[0] + d[0], cur[1] + d[1])
            if inside[cand[1], cand[0]]:
                nxt = cand
                break
            b = cand
        cur, back = nxt, b
        if (cur, back) == (start, start_back):
            break
    pts = np.array(contour, dtype=int)

    # counter-clockwise orientation: positive signed area with y up
    x, y = pts[:, 0].astype(float), -pts[:, 1].astype(float)
    area2 = np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    if area2 < 0:
        pts = pts[::-1].copy()
    return BoundaryCurve(pts)
