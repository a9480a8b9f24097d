"""Symmetry-point detection on a diffusion surface and branch tracing.

The flux field is the arclength derivative of the gradient magnitude
along level curves,

    d|grad v|/ds = ((vy^2 - vx^2) vxy - vx vy (vyy - vxx)) / |grad v|^2,

evaluated with central differences.  Its zero crossings are the local
symmetry points; a crossing tracks a curvature maximum of the evolving
level curve (positive branch) when |grad v| has a local minimum along
the curve there, i.e. when the tangential derivative of the flux is
positive, and a curvature minimum (negative branch) otherwise.

Tracing groups same-sign points into 8-connected chains, splits them at
junction cells, and re-joins each junction's downhill stem with its
longest arm so that chains stay simple; the swapped pairing is kept
available for the junction-ambiguity alternatives handled downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import DegenerateSkeleton
from .surface import ExtremaSet, SurfaceField

GRAD_FLOOR = 1e-12  # |grad v|^2 below this marks the cell invalid
ZERO_BAND = 1e-9  # |flux| below this cannot generate a crossing
MIN_LENGTH = 3.0  # branches shorter than this (arclength) are artifacts
MIN_STRENGTH = 0.2  # chains whose best crossing is softer than this are artifacts
BOUNDARY_LAYER = 3.0  # cells closer to the boundary than this never count as sharp
EXTREMUM_CLEAR = 1.6  # branches come to rest at extrema: cells this close are cut
CAPTURE_RADIUS = 3.0  # disconnection-to-extremum distance for major branches


@dataclass(frozen=True)
class FluxField:
    values: np.ndarray  # float64, (height, width)
    valid: np.ndarray  # bool


@dataclass(frozen=True)
class SymmetryPoints:
    cells: np.ndarray  # (n, 2) int, (x, y)
    signs: np.ndarray  # (n,) int8, +1 positive / -1 negative
    strengths: np.ndarray  # (n,) relative sharpness of the crossing

    def __len__(self) -> int:
        return len(self.cells)


@dataclass
class SymmetryBranch:
    points: np.ndarray  # (n, 2) int, boundary end first
    sign: int  # +1 | -1
    length: float  # chain arclength, grid units
    disconnection: tuple  # (x, y), interior end
    phi_at_disconnection: float
    is_major: bool = False
    phis: np.ndarray | None = None  # surface value per chain point
    # junction bookkeeping for alternative descriptions: branches created
    # at the same junction share a group id; the merged branch knows where
    # its stem part starts so the pairing can be swapped
    junction_group: int | None = None
    junction_role: str | None = None  # "merged" | "arm"
    junction_split: int | None = None  # index of the junction cell in points

    @property
    def tip(self) -> tuple:
        """Boundary end of the chain."""
        return (int(self.points[0, 0]), int(self.points[0, 1]))


def dgrad_ds(field: SurfaceField, grad_floor: float = GRAD_FLOOR) -> FluxField:
    """Per-cell flux d|grad v|/ds with invalid cells flagged."""
    v = field.values
    h, w = v.shape
    vx = np.zeros_like(v)
    vy = np.zeros_like(v)
    vxx = np.zeros_like(v)
    vyy = np.zeros_like(v)
    vxy = np.zeros_like(v)
    c = np.s_[1:-1, 1:-1]
    vx[c] = 0.5 * (v[1:-1, 2:] - v[1:-1, :-2])
    vy[c] = 0.5 * (v[2:, 1:-1] - v[:-2, 1:-1])
    vxx[c] = v[1:-1, 2:] - 2.0 * v[c] + v[1:-1, :-2]
    vyy[c] = v[2:, 1:-1] - 2.0 * v[c] + v[:-2, 1:-1]
    vxy[c] = 0.25 * (v[2:, 2:] + v[:-2, :-2] - v[2:, :-2] - v[:-2, 2:])

    g = vx * vx + vy * vy
    valid = field.interior_mask() & (g >= grad_floor)
    num = (vy * vy - vx * vx) * vxy - vx * vy * (vyy - vxx)
    out = np.zeros_like(v)
    np.divide(num, g, out=out, where=valid)
    return FluxField(values=out, valid=valid)


def detect_symmetry_points(
    flux: FluxField,
    field: SurfaceField,
    zero_band: float = ZERO_BAND,
    sample_arc: float = 2.0,
) -> SymmetryPoints:
    """Zero crossings of the flux with their sign and relative sharpness.

    A crossing between two valid axis-aligned neighbours with opposite,
    above-band flux values marks the cell with the smaller magnitude.

    Classification and strength both come from the second difference of
    |grad v| sampled along the level curve through the cell (two points
    at arclength +-``sample_arc``, Newton-projected back onto the level
    set): a positive second difference means |grad v| dips at the
    crossing, the signature of a curvature maximum of the evolving
    boundary; negative means a curvature minimum.  The magnitude of the
    second difference relative to the local |grad v| separates genuine
    ribbon symmetry axes from the faint ridges that grid anisotropy
    imprints on any rasterized shape.
    """
    F = flux.values
    ok = flux.valid
    absF = np.abs(F)
    marked = np.zeros(F.shape, dtype=bool)

    for axis in (0, 1):
        a = np.s_[:, :-1] if axis == 1 else np.s_[:-1, :]
        b = np.s_[:, 1:] if axis == 1 else np.s_[1:, :]
        cross = (
            ok[a]
            & ok[b]
            & (np.sign(F[a]) * np.sign(F[b]) < 0)
            & (absF[a] >= zero_band)
            & (absF[b] >= zero_band)
        )
        take_a = absF[a] <= absF[b]
        m_a = np.zeros(F.shape, dtype=bool)
        m_b = np.zeros(F.shape, dtype=bool)
        m_a[a] = cross & take_a
        m_b[b] = cross & ~take_a
        marked |= m_a | m_b

    if not marked.any():
        empty = np.empty(0)
        return SymmetryPoints(np.empty((0, 2), dtype=int), np.empty(0, dtype=np.int8), empty)

    v = field.values
    vx = np.zeros_like(v)
    vy = np.zeros_like(v)
    c = np.s_[1:-1, 1:-1]
    vx[c] = 0.5 * (v[1:-1, 2:] - v[1:-1, :-2])
    vy[c] = 0.5 * (v[2:, 1:-1] - v[:-2, 1:-1])
    gmag = np.hypot(vx, vy)

    ys, xs = np.nonzero(marked)
    d2 = _oncurve_second_diff(v, vx, vy, gmag, xs, ys, sample_arc)
    signs = np.where(d2 > 0, 1, -1).astype(np.int8)
    cells = np.column_stack([xs, ys]).astype(int)
    return SymmetryPoints(cells=cells, signs=signs, strengths=np.abs(d2))


def _bilinear(arr, px, py):
    h, w = arr.shape
    px = np.clip(px, 0.0, w - 1.001)
    py = np.clip(py, 0.0, h - 1.001)
    x0 = px.astype(int)
    y0 = py.astype(int)
    fx = px - x0
    fy = py - y0
    return (
        arr[y0, x0] * (1 - fx) * (1 - fy)
        + arr[y0, x0 + 1] * fx * (1 - fy)
        + arr[y0 + 1, x0] * (1 - fx) * fy
        + arr[y0 + 1, x0 + 1] * fx * fy
    )


def _oncurve_second_diff(v, vx, vy, gmag, xs, ys, h):
    """(f(+h) + f(-h) - 2 f(0)) / f(0) with f = |grad v|, sampled at
    arclength +-h along the level curve through each cell."""
    x0 = xs.astype(float)
    y0 = ys.astype(float)
    g = gmag[ys, xs]
    f0 = np.maximum(g, 1e-300)
    tx = vy[ys, xs] / f0
    ty = -vx[ys, xs] / f0
    phi0 = v[ys, xs]

    fs = []
    for sgn in (1.0, -1.0):
        px = x0 + sgn * h * tx
        py = y0 + sgn * h * ty
        for _ in range(2):  # Newton projection onto the level set of phi0
            gx = _bilinear(vx, px, py)
            gy = _bilinear(vy, px, py)
            pv = _bilinear(v, px, py)
            g2 = np.maximum(gx * gx + gy * gy, 1e-300)
            corr = (phi0 - pv) / g2
            px = px + gx * corr
            py = py + gy * corr
        fs.append(_bilinear(gmag, px, py))
    return (fs[0] + fs[1] - 2.0 * g) / f0


# ---------------------------------------------------------------------------
# branch tracing

_N8 = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)]


def trace_branches(
    points: SymmetryPoints,
    field: SurfaceField,
    extrema: ExtremaSet,
    min_length: float = MIN_LENGTH,
    min_strength: float = MIN_STRENGTH,
    boundary_layer: float = BOUNDARY_LAYER,
    extremum_clear: float = EXTREMUM_CLEAR,
    capture_radius: float = CAPTURE_RADIUS,
) -> list[SymmetryBranch]:
    """Group symmetry points into pruned, oriented branches.

    Branches come to rest at surface extrema, so cells within
    ``extremum_clear`` of a minimum or saddle are cut before grouping;
    this is what separates the two opposite major branches that would
    otherwise read as one chain running through the centre.

    Chains are pruned when shorter than ``min_length`` or when no cell of
    theirs deeper than ``boundary_layer`` reaches ``min_strength``: the
    clamped rasterized boundary keeps the surface pixel-rough in a thin
    permanent layer, so sharpness is only trusted below it, and a chain
    that never sharpens there is a discretization artifact rather than a
    symmetry axis of the shape.

    Raises DegenerateSkeleton when points were supplied but nothing
    survives pruning; an empty input yields an empty list (a featureless
    shape such as a disk legitimately has no branches).
    """
    if len(points) == 0:
        return []
    from scipy import ndimage as _ndi

    v = field.values
    depth = _ndi.distance_transform_edt(field.inside)
    raw_strength = {}
    sign_of = {}
    for p, s, sg in zip(points.cells, points.strengths, points.signs):
        x, y = int(p[0]), int(p[1])
        raw_strength[(x, y)] = float(s) if depth[y, x] >= boundary_layer else 0.0
        sign_of[(x, y)] = int(sg)
    # spread each cell's sharpness to same-sign cells within 2 cells, so a
    # chain whose sharpest cells sit inside the extremum clearing zone is
    # still credited with them
    strength_of = dict(raw_strength)
    for (x, y), s in raw_strength.items():
        if s <= 0.0:
            continue
        sg = sign_of[(x, y)]
        for dx in range(-2, 3):
            for dy in range(-2, 3):
                q = (x + dx, y + dy)
                if sign_of.get(q) == sg and strength_of[q] < s:
                    strength_of[q] = s
    ext_pts = np.array(extrema.minima + extrema.saddles, dtype=float)
    branches: list[SymmetryBranch] = []
    group_counter = 0

    for sgn in (1, -1):
        cells = [tuple(p) for p, s in zip(points.cells.tolist(), points.signs) if s == sgn]
        if not cells:
            continue
        if len(ext_pts):
            cells = [
                p
                for p in cells
                if np.hypot(ext_pts[:, 0] - p[0], ext_pts[:, 1] - p[1]).min() > extremum_clear
            ]
        if not cells:
            continue
        cell_set = set(map(tuple, cells))
        adj = _adjacency(cell_set)
        for comp in _components(cell_set, adj):
            segs, junctions = _split_segments(comp, adj)
            merged, ginfo = _merge_at_junctions(segs, junctions, v, strength_of)
            for chain, info in zip(merged, ginfo):
                chain = _orient(chain, v)
                arr = np.array(chain, dtype=int)
                br = SymmetryBranch(
                    points=arr,
                    sign=sgn,
                    length=_arclength(chain),
                    disconnection=chain[-1],
                    phi_at_disconnection=float(v[chain[-1][1], chain[-1][0]]),
                    phis=v[arr[:, 1], arr[:, 0]].copy(),
                )
                if info is not None:
                    role, gid, split_cell = info
                    br.junction_group = group_counter + gid
                    br.junction_role = role
                    if role == "merged":
                        br.junction_split = chain.index(split_cell)
                branches.append(br)
            group_counter += len(junctions) + 1

    survivors = []
    for b in branches:
        if b.length < min_length:
            continue
        peak = max(strength_of.get((int(x), int(y)), 0.0) for x, y in b.points)
        if peak < min_strength:
            continue
        survivors.append(b)
    if not survivors:
        raise DegenerateSkeleton(
            f"no branch survived pruning among {len(branches)} raw chains"
        )
    for b in survivors:
        if len(ext_pts):
            d = np.hypot(ext_pts[:, 0] - b.disconnection[0], ext_pts[:, 1] - b.disconnection[1])
            b.is_major = bool(d.min() <= capture_radius)
    return survivors


def _adjacency(cell_set):
    """8-neighbour adjacency minus diagonal links that shortcut an
    orthogonal two-step (keeps staircases path-like)."""
    adj = {}
    for p in cell_set:
        nbrs = []
        for dx, dy in _N8:
            q = (p[0] + dx, p[1] + dy)
            if q not in cell_set:
                continue
            if dx != 0 and dy != 0:
                if (p[0] + dx, p[1]) in cell_set and (p[0], p[1] + dy) in cell_set:
                    continue  # redundant diagonal
            nbrs.append(q)
        adj[p] = nbrs
    return adj


def _components(cell_set, adj):
    seen = set()
    comps = []
    for p in sorted(cell_set):
        if p in seen:
            continue
        stack, comp = [p], []
        seen.add(p)
        while stack:
            q = stack.pop()
            comp.append(q)
            for r in adj[q]:
                if r not in seen:
                    seen.add(r)
                    stack.append(r)
        comps.append(comp)
    return comps


def _split_segments(comp, adj):
    """Decompose one component into simple open chains split at junction
    cells (degree >= 3).  Junction cells are owned by every incident
    segment end; cycles are broken at their lexicographically smallest
    cell."""
    comp_set = set(comp)
    deg = {p: len(adj[p]) for p in comp}
    junctions = sorted(p for p in comp if deg[p] >= 3)
    junc = set(junctions)

    if len(comp) == 1:
        return [comp[:]], junctions

    segs = []
    used = set()  # undirected edges already walked

    def walk(start, first):
        chain = [start, first]
        used.add((start, first))
        used.add((first, start))
        cur, prev = first, start
        while cur not in junc:
            nxt = [q for q in adj[cur] if q != prev and (cur, q) not in used]
            if not nxt:
                break
            q = nxt[0]
            used.add((cur, q))
            used.add((q, cur))
            chain.append(q)
            prev, cur = cur, q
        if len(chain) > 2 and chain[-1] == chain[0]:
            chain.pop()  # closed loop walked back to its start
        return chain

    starts = sorted(p for p in comp_set if deg[p] == 1) + junctions
    for s in starts:
        for q in sorted(adj[s]):
            if (s, q) not in used:
                segs.append(walk(s, q))
    if not segs:
        # pure cycle: break it at its smallest cell
        start = min(comp_set)
        nbr = sorted(adj[start])
        segs.append(walk(start, nbr[0]) if nbr else [start])
    return segs, junctions


def _merge_at_junctions(segs, junctions, v, strength_of):
    """Re-join segments across junctions: the stem (segment whose far end
    has the lowest surface value, i.e. continues toward the shape centre)
    is concatenated with the sharpest arm; other arms keep their own
    chains.  Returns (chains, per-chain junction info)."""
    if not junctions:
        return segs, [None] * len(segs)

    chains = [list(s) for s in segs]
    info: list = [None] * len(chains)
    for gid, j in enumerate(junctions):
        incident = [i for i, ch in enumerate(chains) if ch and (ch[0] == j or ch[-1] == j)]
        if len(incident) < 2:
            continue

        def far_value(i):
            ch = chains[i]
            far = ch[-1] if ch[0] == j else ch[0]
            return v[far[1], far[0]]

        def peak(i):
            return max(strength_of.get(p, 0.0) for p in chains[i])

        stem = min(incident, key=lambda i: (far_value(i), chains[i][0], chains[i][-1]))
        arms = [i for i in incident if i != stem]
        arms.sort(key=lambda i: (-peak(i), -_arclength(chains[i]), chains[i][0]))
        main = arms[0]

        arm_chain = chains[main]
        if arm_chain[-1] != j:
            arm_chain = arm_chain[::-1]
        stem_chain = chains[stem]
        if stem_chain[0] != j:
            stem_chain = stem_chain[::-1]
        merged = arm_chain + stem_chain[1:]

        chains[main] = merged
        chains[stem] = []
        info[main] = ("merged", gid, j)
        for i in arms[1:]:
            # the junction cell stays with the merged chain only
            ch = chains[i]
            if ch[0] == j:
                chains[i] = ch[1:]
            elif ch[-1] == j:
                chains[i] = ch[:-1]
            if chains[i]:
                info[i] = ("arm", gid, j)

    out_chains, out_info = [], []
    for ch, inf in zip(chains, info):
        if ch:
            out_chains.append(ch)
            out_info.append(inf)
    return out_chains, out_info


def _orient(chain, v):
    """Boundary end (higher surface value) first."""
    if len(chain) < 2:
        return list(chain)
    a, b = chain[0], chain[-1]
    if v[a[1], a[0]] < v[b[1], b[0]]:
        return list(chain[::-1])
    return list(chain)


def _arclength(chain) -> float:
    if len(chain) < 2:
        return 0.0
    pts = np.asarray(chain, dtype=float)
    return float(np.hypot(*(pts[1:] - pts[:-1]).T).sum())
