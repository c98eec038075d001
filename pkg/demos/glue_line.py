"""Glue two interval maps on a line through a distance-ratio partition of unity.

Run: python demos/glue_line.py
"""

import numpy as np

from coarseglue import Cover, cover_stats, glue, interval_indicator_map, interval_width, line_space, max_variation, pou_from_cover

R, EPS = 2, 0.25

space = line_space(600)
cover = Cover(space, {0: range(0, 400), 1: range(143, space.n)})
stats = cover_stats(cover)
print(f"cover: multiplicity {stats.multiplicity}, Lebesgue lower bound {stats.lebesgue_lower:g}")

# the partition varies slowly because the overlap is wide
pou = pou_from_cover(cover)
var = max_variation(pou, R)[0]
print(f"partition variation at R={R}: {var:.5f} (budget eps^2/4 = {EPS**2 / 4:.5f})")

# two unrelated pieces: interval maps with shifted coordinates and different widths
T = interval_width(R, EPS / 2)
pieces = {
    0: interval_indicator_map(space, np.arange(space.n), T),
    1: interval_indicator_map(space, np.arange(space.n) + 1000, T + 2),
}
eta, report = glue(pou, pieces, R, EPS)
print(f"glued map: max_close_diff {report.certificate.max_close_diff:.4f} <= eps = {EPS}")
print(f"  alpha_max {report.alpha_max:.4f} (partition part), beta_max {report.beta_max:.4f} (piece part)")
