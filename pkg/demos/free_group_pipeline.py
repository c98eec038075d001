"""Walk through the relative-ball machinery on a window of the free group F(a,b).

Run: python demos/free_group_pipeline.py   (about 30 s)
"""

from coarseglue import GroupWindow, MarkedGroup, osin_decomposition, relhyp_embed_pipeline, separation_search

G = MarkedGroup([0, 0], 6)
win = GroupWindow(G)
print(f"window of radius 6: {len(win)} elements")

g = G.parse("a^2.b.a^-3")
print(f"{G.format(g)}: word length {G.length(g)}, syllables {G.rel_length(g)}")

# closed-form metrics agree with breadth-first search in the Cayley graph
chk = win.cross_check()
print(f"cross-check: word metric {chk['s']['agree']}, relative metric {chk['rel']['agree']}")

# the ball of relative radius 2 splits into cosets of the first factor
_, rec = osin_decomposition(win, 2, 1)
print(f"n=2, k=1: {rec.n_cosets} cosets, disjoint {rec.cosets_disjoint}, exhaustive {rec.cosets_exhaust}")

for L in (1, 2, 4, 8):
    res = separation_search(win, 2, 1, L)
    print(f"  kappa({L}) = {res.kappa}, verified {res.verified}")

eta, report = relhyp_embed_pipeline(G, 2, 0.5)
print(report.summary())
