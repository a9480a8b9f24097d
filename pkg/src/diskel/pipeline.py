"""End-to-end extraction: mask -> diffusion surface -> symmetry branches
-> alternative shape descriptors."""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import axes, frame, surface
from .errors import DegenerateSkeleton, NoMajorNegative, NoNeighbors
from .shape_io import BinaryMask


@dataclass
class ExtractConfig:
    dt: float = 0.2
    max_sigma: float | None = None
    dumbbell_mode: bool = False
    smooth_factor: float = 0.25
    min_length: float = axes.MIN_LENGTH
    min_strength: float = axes.MIN_STRENGTH
    zero_band: float = axes.ZERO_BAND


@dataclass
class ExtractResult:
    descriptors: list  # ShapeDescriptor alternatives, possibly empty
    branches: list  # canonical branch set of the primary field
    phi: surface.PhiResult | None
    failure: str | None = None  # reason when descriptors is empty


def extract_branches(mask: BinaryMask, config: ExtractConfig | None = None):
    """Mask -> (PhiResult, canonical branch list).  A featureless shape
    yields an empty branch list rather than an error."""
    config = config or ExtractConfig()
    phi = surface.solve_phi(
        mask,
        dt=config.dt,
        max_sigma=config.max_sigma,
        dumbbell_mode=config.dumbbell_mode,
        smooth_factor=config.smooth_factor,
    )
    branches = _branches_for(phi.field, phi.extrema, config)
    return phi, branches


def _branches_for(fld, extrema, config):
    flux = axes.dgrad_ds(fld)
    pts = axes.detect_symmetry_points(flux, fld, zero_band=config.zero_band)
    try:
        return axes.trace_branches(
            pts,
            fld,
            extrema,
            min_length=config.min_length,
            min_strength=config.min_strength,
        )
    except DegenerateSkeleton:
        return []


def extract_descriptors(mask: BinaryMask, config: ExtractConfig | None = None) -> ExtractResult:
    """Full pipeline.  Descriptor alternatives cover junction pairings,
    reference-axis permutations and, in dumbbell mode, both scales."""
    config = config or ExtractConfig()
    phi, branches = extract_branches(mask, config)

    scales = [(phi.field, phi.extrema, branches)]
    if (
        config.dumbbell_mode
        and phi.dumbbell_field is not None
        and phi.dumbbell_field is not phi.field
    ):
        scales.append(
            (
                phi.dumbbell_field,
                phi.dumbbell_extrema,
                _branches_for(phi.dumbbell_field, phi.dumbbell_extrema, config),
            )
        )

    descriptors = []
    failure = None
    alt_id = 0
    for fld, extrema, brs in scales:
        if not brs:
            failure = failure or "no symmetry branches survive pruning"
            continue
        for branch_set in frame.resolve_triple_junctions(brs):
            try:
                prepared = _cut_majors(branch_set, fld, extrema)
                frames = frame.build_frames(prepared, extrema, fld)
            except (NoMajorNegative, NoNeighbors) as exc:
                failure = failure or f"{type(exc).__name__}: {exc}"
                continue
            for fr in frames:
                descriptors.append(
                    frame.assemble_descriptor(fr, prepared, fld, alternatives_id=alt_id)
                )
                alt_id += 1
                if alt_id >= frame.ALTERNATIVES_CAP:
                    break
            if alt_id >= frame.ALTERNATIVES_CAP:
                break
        if alt_id >= frame.ALTERNATIVES_CAP:
            break

    if descriptors:
        failure = None
    elif failure is None:
        failure = "no descriptor could be assembled"
    return ExtractResult(descriptors=descriptors, branches=branches, phi=phi, failure=failure)


def _cut_majors(branches: list, fld, extrema) -> list:
    """Artificial disconnection points for all major positive branches,
    using the adjacent negative branches in angular order around the
    first origin."""
    origin = (extrema.minima + extrema.saddles)[0]
    negatives = [(i, b) for i, b in enumerate(branches) if b.sign == -1]

    def ang(b):
        return math.atan2(b.disconnection[1] - origin[1], b.disconnection[0] - origin[0]) % (
            2.0 * math.pi
        )

    out = list(branches)
    for i, b in enumerate(branches):
        if not (b.is_major and b.sign == 1):
            continue
        a = ang(b)
        if negatives:
            below = min(negatives, key=lambda nb: (a - ang(nb[1])) % (2.0 * math.pi) or 2 * math.pi)
            above = min(negatives, key=lambda nb: (ang(nb[1]) - a) % (2.0 * math.pi) or 2 * math.pi)
            nbrs = [below[1]]
            if above[1] is not below[1]:
                nbrs.append(above[1])
            out[i] = frame.cut_major_positive(b, fld, nbrs)
        else:
            # no indentations anywhere: leave the branch uncut; descriptor
            # assembly will fail with NoMajorNegative downstream anyway
            pass
    return out
