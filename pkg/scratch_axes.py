"""Scratch: inspect detector output on canonical shapes."""
import numpy as np
from diskel import shape_io, surface, axes


def report(name, mask, zero_band=axes.ZERO_BAND, show=False):
    res = surface.solve_phi(mask)
    flux = axes.dgrad_ds(res.field)
    pts = axes.detect_symmetry_points(flux, res.field, zero_band=zero_band)
    print(f"\n=== {name}: sigma*={res.field.sigma:.1f} minima={res.extrema.minima} "
          f"saddles={res.extrema.saddles} points={len(pts)}")
    if len(pts) == 0:
        print("   no symmetry points")
        return res, []
    try:
        brs = axes.trace_branches(pts, res.field, res.extrema)
    except Exception as e:
        print("   trace:", type(e).__name__, e)
        return res, []
    for b in sorted(brs, key=lambda b: (-b.sign, -b.length)):
        print(f"   sign={b.sign:+d} len={b.length:5.1f} tip={b.tip} disc={b.disconnection} "
              f"major={b.is_major} jrole={b.junction_role}")
    if show:
        grid = np.full(mask.inside.shape, ".", dtype="U1")
        grid[~mask.inside] = " "
        for p, s in zip(pts.cells, pts.signs):
            grid[p[1], p[0]] = "+" if s > 0 else "-"
        for x, y in res.extrema.minima:
            grid[y, x] = "M"
        for x, y in res.extrema.saddles:
            grid[y, x] = "S"
        for row in grid:
            print("".join(row))
    return res, brs


# 40x20 rectangle
rect = shape_io.mask_from_array(np.ones((20, 40), bool))
report("rect 40x20", rect, show=True)

# disk r=20
yy, xx = np.mgrid[0:45, 0:45]
disk = shape_io.mask_from_array((xx - 22) ** 2 + (yy - 22) ** 2 <= 20 ** 2)
report("disk r20", disk, show=True)

# 2:1 ellipse 60x30
yy, xx = np.mgrid[0:34, 0:64]
ell = shape_io.mask_from_array(((xx - 31.5) / 30) ** 2 + ((yy - 16.5) / 15) ** 2 <= 1.0)
report("ellipse 60x30", ell, show=True)
