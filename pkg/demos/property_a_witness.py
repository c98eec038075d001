"""Turn a ball-indicator Property A witness on a window of Z into a feature map.

Run: python demos/property_a_witness.py
"""

import numpy as np

from coarseglue import ball_witness, check_char_ue, integer_space, pa_to_pou, sqrt_lift

space = integer_space(range(-30, 31))
w = ball_witness(space, 10)
print(f"||xi_0 - xi_3||_1 = {w.l1_distance(space.index('0'), space.index('3')):.6f} (2/7 = {2 / 7:.6f})")

# probability vectors -> partition of unity -> unit vectors via square roots
fm, _ = sqrt_lift(pa_to_pou(w))
cert = check_char_ue(fm, 3, 0.76)
print(f"sqrt lift at R=3: max_close_diff {cert.max_close_diff:.4f}, condition (i) {'holds' if cert.condition_i else 'fails'}")

G = fm.gram()
for d in (0, 5, 10, 15, 20, 21):
    vals = G[space.dist == d]
    print(f"  distance {d:2d}: largest inner product {np.abs(vals).max():.4f}")
