"""Global shape-centered frames and the attributed point-set descriptor.

Each negative major branch serves as the reference axis for one half of
the shape; every branch is represented by the polar position (r, theta)
of its disconnection point in its half's frame, its normalized length
and its sign, plus cyclic order links.  Extrinsic data (centre, total
axis length, reference-axis orientations, grid size) is stored alongside
but never enters invariant matching.

Ambiguities produce alternative descriptors: n > 2 negative major
branches give all ordered reference pairs, triple junctions give both
stable pairings, and dumbbell surfaces describe each candidate origin.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .axes import SymmetryBranch
from .errors import NoMajorNegative, NoNeighbors, ParseError
from .surface import ExtremaSet, SurfaceField

ALTERNATIVES_CAP = 16
FRAME_REACH = 3.0  # a branch resting this close to the origin can anchor an axis
FORMAT_DESC = "diskel-desc/1"


@dataclass(frozen=True)
class GlobalFrame:
    origin: tuple  # (x, y) of the centre, a surface minimum (or saddle)
    axis0: tuple  # unit vector of the first reference axis
    axis1: tuple
    m0: float  # image-plane orientations, radians CCW from +x
    m1: float
    ref_points: tuple  # the two on-branch points that define the axes


@dataclass
class BranchRecord:
    sign: int  # +1 | -1
    r: float  # |origin -> disconnection| / mean over branches
    theta: float  # [0, 2pi) CCW from the owning half's reference axis
    norm_length: float  # branch length / total axis length
    is_reference: bool
    order_index: int = 0  # position in the global CCW cycle
    next: int = -1  # order links (order_index values)
    prev: int = -1
    # extrinsic anchors (grid coordinates), used by the semi-local frame
    disconnection: tuple = (0.0, 0.0)
    tip: tuple = (0.0, 0.0)
    length: float = 0.0


@dataclass
class ShapeDescriptor:
    center: tuple
    total_axis_length: float
    frame: GlobalFrame
    halves: tuple  # (list[BranchRecord], list[BranchRecord]), each sorted by theta
    alternatives_id: int = 0
    grid_size: tuple = (0, 0)  # (width, height), extrinsic

    def records(self):
        """All records in global CCW cycle order."""
        return sorted(self.halves[0] + self.halves[1], key=lambda r: r.order_index)


def _angle(dx: float, dy: float) -> float:
    return math.atan2(dy, dx) % (2.0 * math.pi)


def _rebuild(branch: SymmetryBranch, points: np.ndarray, phis: np.ndarray) -> SymmetryBranch:
    seg = np.hypot(*(points[1:] - points[:-1]).T.astype(float)) if len(points) > 1 else np.zeros(0)
    end = (int(points[-1, 0]), int(points[-1, 1]))
    return SymmetryBranch(
        points=points,
        sign=branch.sign,
        length=float(seg.sum()),
        disconnection=end,
        phi_at_disconnection=float(phis[-1]),
        is_major=branch.is_major,
        phis=phis,
        junction_group=branch.junction_group,
        junction_role=branch.junction_role,
        junction_split=branch.junction_split,
    )


def cut_major_positive(branch: SymmetryBranch, field: SurfaceField, neighbors) -> SymmetryBranch:
    """Truncate a major positive branch at an artificial disconnection
    point: the chain point whose surface value is nearest the mean of the
    two neighbouring negative branches' disconnection values.

    With a single negative branch available its value is used directly;
    with none, NoNeighbors is raised and the caller may fall back to
    ``cut_at_chord``.
    """
    if not branch.is_major or branch.sign != 1:
        raise ValueError("cut applies to major positive branches only")
    phis = branch.phis
    if phis is None:
        phis = field.values[branch.points[:, 1], branch.points[:, 0]]
    neighbors = [n for n in neighbors if n is not None]
    if not neighbors:
        raise NoNeighbors("no negative branches available to place the cut")
    level = float(np.mean([n.phi_at_disconnection for n in neighbors[:2]]))
    idx = max(int(np.argmin(np.abs(phis - level))), 1)
    return _rebuild(branch, branch.points[: idx + 1], phis[: idx + 1])


def cut_at_chord(branch: SymmetryBranch, field: SurfaceField, p_a, p_b) -> SymmetryBranch:
    """Fallback cut: truncate where the chain crosses the chord between
    two indentation start points."""
    pts = branch.points.astype(float)
    a = np.asarray(p_a, dtype=float)
    b = np.asarray(p_b, dtype=float)
    ab = b - a
    nrm = math.hypot(*ab)
    if nrm < 1e-9:
        raise NoNeighbors("degenerate chord")
    n = np.array([-ab[1], ab[0]]) / nrm
    side = (pts - a) @ n
    crossings = np.nonzero(np.sign(side[1:]) != np.sign(side[:-1]))[0]
    idx = max(int(crossings[0]) + 1 if len(crossings) else len(pts) - 1, 1)
    phis = branch.phis
    if phis is None:
        phis = field.values[branch.points[:, 1], branch.points[:, 0]]
    return _rebuild(branch, branch.points[: idx + 1], phis[: idx + 1])


def resolve_triple_junctions(branches: list) -> list:
    """Alternative branch sets for junction ambiguities.

    Tracing pairs each junction's stem with one arm (Fig.-style first
    stable form); the second stable form swaps which arm continues into
    the stem.  All combinations over junctions are emitted, canonical
    set first, capped at ALTERNATIVES_CAP.
    """
    groups = {}
    for i, b in enumerate(branches):
        if b.junction_group is not None:
            groups.setdefault(b.junction_group, []).append(i)

    swappable = []
    for idxs in groups.values():
        merged = [i for i in idxs if branches[i].junction_role == "merged"]
        arms = [i for i in idxs if branches[i].junction_role == "arm"]
        if len(merged) == 1 and arms and branches[merged[0]].junction_split:
            arm = max(arms, key=lambda i: branches[i].length)
            if branches[arm].sign == branches[merged[0]].sign:
                swappable.append((merged[0], arm))

    alternatives = [list(branches)]
    for mi, ai in swappable:
        doubled = []
        for alt in alternatives:
            doubled.append(alt)
            doubled.append(_swap_junction(alt, mi, ai))
            if len(doubled) >= ALTERNATIVES_CAP:
                break
        alternatives = doubled[:ALTERNATIVES_CAP]
    return alternatives


def _swap_junction(branches: list, merged_idx: int, arm_idx: int) -> list:
    """Swap which arm continues into the stem at one junction."""
    out = list(branches)
    merged = branches[merged_idx]
    arm = branches[arm_idx]
    k = merged.junction_split
    if k is None or k < 1 or k >= len(merged.points) - 1 or merged.phis is None:
        return out

    arm_part_pts = merged.points[:k]  # old arm, junction cell excluded
    arm_part_phi = merged.phis[:k]
    stem_pts = merged.points[k:]  # junction cell onward
    stem_phi = merged.phis[k:]

    new_merged = _rebuild(
        merged,
        np.vstack([arm.points, stem_pts]),
        np.concatenate([arm.phis, stem_phi]),
    )
    new_merged.junction_split = len(arm.points)
    new_arm = _rebuild(arm, arm_part_pts, arm_part_phi)
    new_arm.junction_role = "arm"
    new_arm.is_major = False

    out[merged_idx] = new_merged
    out[arm_idx] = new_arm
    return out


def build_frames(branches: list, extrema: ExtremaSet, field: SurfaceField) -> list:
    """Reference frames from the major branches resting at the centre.

    One frame for exactly two negative majors (reference order fixed
    intrinsically: longer branch first; an exact length tie emits both
    orders).  For n > 2 negative majors, all ordered pairs.  With
    dumbbell extrema (two minima, one saddle) every candidate origin
    that at least two majors reach yields frames; at a saddle the
    anchors may be positive branches, which always rest there.
    """
    origins = [(m, "min") for m in extrema.minima] + [(s, "saddle") for s in extrema.saddles]
    if not origins:
        raise NoMajorNegative("surface has no interior extrema")
    dumbbell = len(extrema.minima) == 2 and len(extrema.saddles) == 1

    frames = []
    for origin, kind in origins if dumbbell else origins[:1]:
        at_origin = [
            b
            for b in branches
            if b.is_major
            and math.hypot(b.disconnection[0] - origin[0], b.disconnection[1] - origin[1])
            <= FRAME_REACH
        ]
        refs = [b for b in at_origin if b.sign == -1]
        if len(refs) < 2 and kind == "saddle":
            refs = [b for b in at_origin if b.sign == 1]
        if len(refs) < 2:
            continue

        phi_o = float(field.values[origin[1], origin[0]])
        level = _reference_level(branches, phi_o)
        anchored = [(b, _axis_point(b, field, phi_o, level)) for b in refs]

        if len(anchored) == 2:
            (b0, p0), (b1, p1) = anchored
            if b0.length < b1.length:
                (b0, p0), (b1, p1) = (b1, p1), (b0, p0)
            pairs = [((b0, p0), (b1, p1))]
            if b0.length == b1.length:
                pairs.append(((b1, p1), (b0, p0)))
        else:
            pairs = [(a, b) for a in anchored for b in anchored if a[0] is not b[0]]

        for (b0, p0), (b1, p1) in pairs:
            a0 = (p0[0] - origin[0], p0[1] - origin[1])
            a1 = (p1[0] - origin[0], p1[1] - origin[1])
            n0 = math.hypot(*a0)
            n1 = math.hypot(*a1)
            if n0 < 1e-9 or n1 < 1e-9:
                continue
            u0 = (a0[0] / n0, a0[1] / n0)
            u1 = (a1[0] / n1, a1[1] / n1)
            if abs(u0[0] - u1[0]) < 1e-12 and abs(u0[1] - u1[1]) < 1e-12:
                continue
            frames.append(
                GlobalFrame(
                    origin=origin,
                    axis0=u0,
                    axis1=u1,
                    m0=_angle(*u0),
                    m1=_angle(*u1),
                    ref_points=(p0, p1),
                )
            )

    if not frames:
        raise NoMajorNegative("fewer than two major reference branches reach a usable origin")
    uniq = []
    for f in frames:
        if not any(f.origin == g.origin and f.ref_points == g.ref_points for g in uniq):
            uniq.append(f)
    return uniq


def _reference_level(branches: list, phi_origin: float) -> float:
    """Surface level of the coarse central blob: mean disconnection value
    of the minor branches, where secondary structure has collapsed."""
    minor = [b.phi_at_disconnection for b in branches if not b.is_major]
    if minor:
        return float(np.mean(minor))
    return 0.5 * (1.0 + phi_origin)


def _axis_point(branch: SymmetryBranch, field: SurfaceField, phi_o: float, level: float):
    """Chain point at the half-level between the origin value and the
    central-blob level, inside the blob where the branch is straight."""
    target = 0.5 * (phi_o + level)
    phis = branch.phis
    if phis is None:
        phis = field.values[branch.points[:, 1], branch.points[:, 0]]
    idx = int(np.argmin(np.abs(phis - target)))
    return (int(branch.points[idx, 0]), int(branch.points[idx, 1]))


def assemble_descriptor(
    frame: GlobalFrame,
    branches: list,
    field: SurfaceField,
    alternatives_id: int = 0,
) -> ShapeDescriptor:
    """Build the attributed point-set descriptor for one frame."""
    ox, oy = frame.origin
    total_len = float(sum(b.length for b in branches))
    if total_len <= 0:
        raise NoMajorNegative("zero total axis length")

    ref0 = _branch_containing(branches, frame.ref_points[0])
    ref1 = _branch_containing(branches, frame.ref_points[1])

    # representative point: the disconnection, except the reference
    # branches use their axis anchor (their raw disconnection sits on the
    # origin, where the polar angle would be undefined)
    reps = []
    for b in branches:
        if b is ref0:
            reps.append(frame.ref_points[0])
        elif b is ref1:
            reps.append(frame.ref_points[1])
        else:
            reps.append(b.disconnection)

    vecs = np.array([(p[0] - ox, p[1] - oy) for p in reps], dtype=float)
    dists = np.hypot(vecs[:, 0], vecs[:, 1])
    mean_dist = float(dists.mean()) if len(dists) else 1.0
    if mean_dist <= 0:
        mean_dist = 1.0

    span = (frame.m1 - frame.m0) % (2.0 * math.pi)
    tagged = []
    for i, b in enumerate(branches):
        beta = _angle(vecs[i, 0], vecs[i, 1])
        rel0 = (beta - frame.m0) % (2.0 * math.pi)
        if b is ref0:
            rel0 = 0.0
        elif b is ref1:
            rel0 = span
        half = 0 if rel0 < span else 1
        theta = rel0 if half == 0 else (rel0 - span) % (2.0 * math.pi)
        rec = BranchRecord(
            sign=b.sign,
            r=float(dists[i] / mean_dist),
            theta=float(theta),
            norm_length=float(b.length / total_len),
            is_reference=(b is ref0 or b is ref1),
            disconnection=(float(reps[i][0]), float(reps[i][1])),
            tip=(float(b.tip[0]), float(b.tip[1])),
            length=float(b.length),
        )
        tagged.append((rel0, half, rec))

    tagged.sort(key=lambda t: t[0])
    n = len(tagged)
    for k, (_, _, rec) in enumerate(tagged):
        rec.order_index = k
        rec.next = (k + 1) % n
        rec.prev = (k - 1) % n
    half0 = [rec for _, h, rec in tagged if h == 0]
    half1 = [rec for _, h, rec in tagged if h == 1]

    return ShapeDescriptor(
        center=(float(ox), float(oy)),
        total_axis_length=total_len,
        frame=frame,
        halves=(half0, half1),
        alternatives_id=alternatives_id,
        grid_size=(field.width, field.height),
    )


def _branch_containing(branches, target):
    for b in branches:
        pts = b.points
        if ((pts[:, 0] == target[0]) & (pts[:, 1] == target[1])).any():
            return b
    return None


# ---------------------------------------------------------------------------
# serialization: diskel-desc/1


def descriptor_to_dict(d: ShapeDescriptor) -> dict:
    def rec_dict(r: BranchRecord) -> dict:
        return {
            "sign": int(r.sign),
            "r": r.r,
            "theta": r.theta,
            "norm_length": r.norm_length,
            "is_reference": bool(r.is_reference),
            "order_index": r.order_index,
            "next": r.next,
            "prev": r.prev,
            "disconnection": list(r.disconnection),
            "tip": list(r.tip),
            "length": r.length,
        }

    return {
        "alternatives_id": d.alternatives_id,
        "halves": [[rec_dict(r) for r in d.halves[0]], [rec_dict(r) for r in d.halves[1]]],
        "extrinsic": {
            "center": list(d.center),
            "total_axis_length": d.total_axis_length,
            "m0": d.frame.m0,
            "m1": d.frame.m1,
            "grid_size": list(d.grid_size),
        },
    }


def descriptor_from_dict(obj: dict) -> ShapeDescriptor:
    ext = obj["extrinsic"]
    halves = []
    for half in obj["halves"]:
        recs = []
        for r in half:
            recs.append(
                BranchRecord(
                    sign=int(r["sign"]),
                    r=float(r["r"]),
                    theta=float(r["theta"]),
                    norm_length=float(r["norm_length"]),
                    is_reference=bool(r["is_reference"]),
                    order_index=int(r.get("order_index", 0)),
                    next=int(r["next"]),
                    prev=int(r["prev"]),
                    disconnection=tuple(r["disconnection"]),
                    tip=tuple(r["tip"]),
                    length=float(r["length"]),
                )
            )
        halves.append(recs)
    m0 = float(ext["m0"])
    m1 = float(ext["m1"])
    frame = GlobalFrame(
        origin=tuple(ext["center"]),
        axis0=(math.cos(m0), math.sin(m0)),
        axis1=(math.cos(m1), math.sin(m1)),
        m0=m0,
        m1=m1,
        ref_points=((0.0, 0.0), (0.0, 0.0)),
    )
    return ShapeDescriptor(
        center=tuple(ext["center"]),
        total_axis_length=float(ext["total_axis_length"]),
        frame=frame,
        halves=(halves[0], halves[1]),
        alternatives_id=int(obj.get("alternatives_id", 0)),
        grid_size=tuple(ext.get("grid_size", (0, 0))),
    )


def save_descriptors(descs: list, path) -> None:
    doc = {"format": FORMAT_DESC, "descriptors": [descriptor_to_dict(d) for d in descs]}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_descriptors(path) -> list:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != FORMAT_DESC:
        raise ParseError(f"not a {FORMAT_DESC} document")
    return [descriptor_from_dict(o) for o in doc["descriptors"]]
