"""End-to-end uniform embedding of a free-product window.

The construction follows the relative-ball recursion:

* ``B(1)`` is the finite union of the factor subgroups ``H_k``;
* ``B(n)`` is the finite union of ``B(n-1) H_k`` and ``B(n-1) x``;
* ``B(n-1) H_k`` is the (1, L)-separated union of a core ``Y`` (a
  neighbourhood of ``B(n-1)``) and the coset pieces ``g H_k \\ Y``.

Each union is glued with the distance-ratio partition of a separated
cover. A piece defined on a cover set ``U`` is extended to the enlarged
domain by nearest-point retraction onto ``U``, which costs ``2 rho`` in
scale (``rho`` the retraction distance). The final map is glued along the
partition pulled back from a separated cover of the relative metric, with
left-translated copies of the ball embeddings as pieces.

Error budget: with partition variation ``v`` at scale R the glued map
satisfies ``||eta(x) - eta(y)|| <= alpha + sqrt(v)``, so pieces are built at
``eps - sqrt(v)``, which is at least ``eps/2`` since ``v <= eps^2/4``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import CertificateError, InputError
from .groups import (
    GroupWindow,
    MarkedGroup,
    osin_decomposition,
    rel_ball,
    relative_asdim_cover,
    separation_search,
)
from .hilbert import (
    FeatureMap,
    check_char_ue,
    compression_profile,
    constant_map,
    glue,
    interval_indicator_map,
    interval_width,
    max_close_diff,
)
from .metric import Cover, check_separated, set_diameter
from .partition import minimal_separation, pullback_pou, separated_cover_pipeline


@dataclass
class StageRecord:
    name: str
    route: str
    n: int
    k: int | None
    R: float
    eps: float
    n_points: int
    n_sets: int
    cover_k: int
    L: float
    kappa: int | None
    variation: float
    piece_eps: float
    pieces_used: list
    alpha_max: float
    beta_max: float
    max_close_diff: float
    passed: bool


@dataclass
class PipelineReport:
    factors: list
    W: int
    R: float
    eps: float
    n_elements: int
    metric_check: dict
    recursion_checks: list
    asdim: dict
    pullback: dict
    translations: list
    stages: list
    final_glue: dict
    certificate: object
    profile: object
    passed: bool
    n_max: int = 0
    notes: list = field(default_factory=list)

    def summary(self):
        c = self.certificate
        return {
            "passed": self.passed,
            "n_elements": self.n_elements,
            "max_close_diff": c.max_close_diff,
            "eps": self.eps,
            "n_stages": len(self.stages),
            "decay_at_max_distance": c.decay_values[-1] if c.decay_values else None,
        }


class _Builder:
    """Memoised ball and coset-union embeddings on one window."""

    def __init__(self, window: GroupWindow):
        self.window = window
        self.group = window.group
        self.space = window.metric("s")
        self.stages = []
        self.checks = {}
        self._balls = {}
        self._unions = {}

    # -- helpers

    def _sub(self, positions):
        return self.space.subspace(positions)

    def _diameter(self, positions):
        return set_diameter(self.space, positions)

    def _retract(self, dom, base, embed, R, eps):
        """Map on ``dom`` given by nearest-point retraction onto ``base``
        followed by ``embed(R', eps)`` on ``base``."""
        d = self.space.dist[np.ix_(dom, base)]
        nearest = np.argmin(d, axis=1)
        rho = float(d[np.arange(len(dom)), nearest].max())
        fm = embed(R + 2 * rho, eps)
        return FeatureMap(self._sub(dom), fm.keys, fm.matrix[nearest], check=False), rho

    def _decomposition(self, n, k):
        key = (n, k)
        if key not in self.checks:
            self.checks[key] = osin_decomposition(self.window, n, k)
        return self.checks[key]

    # -- base maps

    def coset_map(self, rep, f, members, R, eps):
        """Base map on ``members`` of ``rep H_f``: the trailing exponent
        feeds an interval-indicator map (Z) or a constant map (finite)."""
        sub = self._sub(members)
        if self.group.factors[f]:
            return constant_map(sub, key=("H", f + 1, "const"))
        coords = []
        for i in members:
            y = self.window.elements[i]
            coords.append(0 if y == rep else y[-1][1])
        R_eff = min(R, max(self._diameter(members), 1.0))
        return interval_indicator_map(sub, coords, interval_width(R_eff, eps), prefix=("H", f + 1))

    # -- glue of a finite cover of `domain`

    def _union(self, name, route, n, k, domain, sets, coloring, builders, R, eps, kappa=None):
        space_A = self._sub(domain)
        local = np.full(self.space.n, -1, dtype=np.intp)
        local[domain] = np.arange(len(domain))
        cover = Cover(space_A, {i: local[s] for i, s in sets.items()})
        ck = max(coloring.values())
        L = minimal_separation(ck, R, eps**2 / 4)
        sep = check_separated(cover, ck, 2 * L, coloring)
        pou, cert, _ = separated_cover_pipeline(sep, R, eps**2 / 4)
        var = cert.max_variation
        piece_eps = eps - math.sqrt(var)
        enlarged = pou.subordinate_to
        pieces = {}
        for i in pou.index:
            if not pou[i].any():
                continue
            dom_local = np.flatnonzero(space_A.distance_to_set(enlarged[i]) <= R)
            dom = domain[dom_local]
            fm = builders[i](dom, R, piece_eps)
            mcd = max_close_diff(fm, R)[0]
            if mcd > piece_eps + 1e-12:
                raise CertificateError(
                    f"piece {i!r} of {name} has max_close_diff {mcd:.6g} > {piece_eps:.6g}",
                    stage=name,
                    witness=i,
                )
            pieces[i] = FeatureMap(space_A.subspace(dom_local), fm.keys, fm.matrix, check=False)
        eta, rep = glue(pou, pieces, R, eps)
        self.stages.append(
            StageRecord(
                name=name,
                route=route,
                n=int(n),
                k=k,
                R=float(R),
                eps=float(eps),
                n_points=int(len(domain)),
                n_sets=len(cover),
                cover_k=int(ck),
                L=float(L),
                kappa=kappa,
                variation=float(var),
                piece_eps=float(piece_eps),
                pieces_used=[list(i) for i in rep.pieces_used],
                alpha_max=rep.alpha_max,
                beta_max=rep.beta_max,
                max_close_diff=rep.certificate.max_close_diff,
                passed=rep.passed,
            )
        )
        return eta

    # -- recursion

    def ball(self, n, R, eps):
        """Embedding of ``B(n)`` (within the window) with max_close_diff <= eps at R."""
        members = rel_ball(self.window, n).members
        R = min(float(R), max(self._diameter(members), 1.0))
        key = (n, R, eps)
        if key in self._balls:
            return self._balls[key]
        grp = self.group
        sets, builders = {}, {}
        for f in range(grp.n_factors):
            k = f + 1
            if n == 1:
                hk = self.window.factor_members(k)
                sets[("H", k)] = hk
                builders[("H", k)] = self._coset_builder((), f, hk)
            else:
                decomp, _ = self._decomposition(n, k)
                sets[("H", k)] = decomp.union
                builders[("H", k)] = self._union_builder(n, k, decomp.union)
        if n > 1:
            prev = rel_ball(self.window, n - 1).members
            prev_elems = [self.window.elements[i] for i in prev]
            for s in grp.S:
                moved = {grp.multiply(g, s) for g in prev_elems}
                pos = np.array(sorted(self.window.pos[y] for y in moved if y in self.window.pos), dtype=np.intp)
                key_s = ("S", grp.format(s))
                sets[key_s] = pos
                builders[key_s] = self._ball_retract_builder(n - 1)
        coloring = {i: c for c, i in enumerate(sorted(sets, key=lambda t: (t[0], str(t[1]))))}
        eta = self._union(f"ball[{n}]", "finite-union", n, None, members, sets, coloring, builders, R, eps)
        self._balls[key] = eta
        return eta

    def coset_union(self, n, k, members, R, eps):
        """Embedding of ``B(n-1) H_k`` via the core plus separated cosets."""
        R = min(float(R), max(self._diameter(members), 1.0))
        key = (n, k, R, eps)
        if key in self._unions:
            return self._unions[key]
        f = k - 1
        decomp, _ = self._decomposition(n, k)
        L = minimal_separation(1, R, eps**2 / 4)
        sr = separation_search(self.window, n, k, 2 * L, decomposition=decomp)
        in_y = np.zeros(self.space.n, dtype=bool)
        in_y[sr.Y] = True
        sets = {("core",): members[in_y[members]]}
        builders = {("core",): self._ball_retract_builder(n - 1)}
        coloring = {("core",): 0}
        for rep in decomp.reps:
            rest = decomp.cosets[rep][~in_y[decomp.cosets[rep]]]
            if len(rest):
                i = ("coset", self.group.format(rep))
                sets[i] = rest
                builders[i] = self._coset_builder(rep, f, rest)
                coloring[i] = 1
        eta = self._union(
            f"coset-union[{n},{k}]", "infinite-union", n, k, members, sets, coloring, builders, R, eps, kappa=sr.kappa
        )
        self._unions[key] = eta
        return eta

    # -- builders: (dom, R, eps) -> FeatureMap on the window subspace `dom`

    def _coset_builder(self, rep, f, members):
        def build(dom, R, eps):
            return self._retract(dom, members, lambda R2, e2: self.coset_map(rep, f, members, R2, e2), R, eps)[0]

        return build

    def _ball_retract_builder(self, m):
        base = rel_ball(self.window, m).members

        def build(dom, R, eps):
            return self._retract(dom, base, lambda R2, e2: self.ball(m, R2, e2), R, eps)[0]

        return build

    def _union_builder(self, n, k, members):
        def build(dom, R, eps):
            return self._retract(dom, members, lambda R2, e2: self.coset_union(n, k, members, R2, e2), R, eps)[0]

        return build


def relhyp_embed_pipeline(group: MarkedGroup, R, eps, W=None, n_max=None, cross_check=True):
    """Certified embedding of the window of radius W with ``||eta(x)-eta(y)||
    <= eps`` whenever ``d_S(x, y) <= R``.

    Returns ``(eta, PipelineReport)``; every stage raises
    `CertificateError` on failure.
    """
    R, eps = float(R), float(eps)
    if not R > 0 or not 0 < eps:
        raise InputError("R and eps must be positive")
    window = GroupWindow(group, W)
    XS = window.metric("s")
    XR = window.metric("rel")
    metric_check = window.cross_check() if cross_check else {}
    if n_max is None:
        n_max = min(window.W, 3)

    # relative cover: iterate k until the separation matches the colouring
    k = 0
    while True:
        L = minimal_separation(k, R, eps**2 / 4)
        sep, asdim = relative_asdim_cover(window, L)
        if sep.k <= k:
            break
        k = sep.k
    L_used = minimal_separation(sep.k, R, eps**2 / 4)
    pou_Y, cert_Y, _ = separated_cover_pipeline(sep, R, eps**2 / 4)
    ident = np.arange(len(window))
    pou_X, pb = pullback_pou(pou_Y, XS, ident, S=R, R=R)
    var = cert_Y.max_variation
    piece_eps = eps - math.sqrt(var)

    builder = _Builder(window)
    for n in range(1, n_max + 1):
        for kk in range(1, group.n_factors + 1):
            builder._decomposition(n, kk)

    grp = group
    cover_X = pou_X.subordinate_to
    pieces, translations = {}, []
    for i in pou_X.index:
        if not pou_X[i].any():
            continue
        dom = np.flatnonzero(XS.distance_to_set(cover_X[i]) <= R)
        shift = grp.inverse(window.elements[int(cover_X[i][0])])
        moved = [grp.multiply(shift, window.elements[x]) for x in dom]
        outside = [y for y in moved if y not in window.pos]
        if outside:
            raise CertificateError(
                f"translate of cover set {i!r} leaves the window",
                stage="translate",
                witness=grp.format(outside[0]),
            )
        moved_pos = np.array([window.pos[y] for y in moved], dtype=np.intp)
        n_i = int(window.rel_lengths[moved_pos].max())
        base = builder.ball(max(n_i, 1), R, piece_eps)
        ball_pos = base.space.positions_in(XS)
        lookup = np.full(len(window), -1, dtype=np.intp)
        lookup[ball_pos] = np.arange(len(ball_pos))
        fm = FeatureMap(XS.subspace(dom), base.keys, base.matrix[lookup[moved_pos]], check=False)
        mcd = max_close_diff(fm, R)[0]
        if mcd > piece_eps + 1e-12:
            raise CertificateError(f"translated piece {i!r} fails control", stage="translate", witness=i)
        pieces[i] = fm
        translations.append({"index": list(i), "shift": grp.format(shift), "n": n_i, "max_close_diff": mcd})

    eta, final = glue(pou_X, pieces, R, eps)
    cert = check_char_ue(eta, R, eps)
    profile = compression_profile(eta)
    rec = []
    for (n, kk), (decomp, chk) in sorted(builder.checks.items()):
        rec.append(asdict(chk))
    passed = bool(
        cert.condition_i
        and final.passed
        and all(s.passed for s in builder.stages)
        and eta.norm_error() <= 1e-9
        and cert.decay_nonincreasing
    )
    report = PipelineReport(
        factors=list(group.factors),
        W=window.W,
        R=R,
        eps=eps,
        n_elements=len(window),
        metric_check=metric_check,
        recursion_checks=rec,
        asdim={
            **asdict(asdim),
            "k": int(sep.k),
            "L": float(L_used),
            "variation": float(var),
            "relative_diameter": XR.diameter,
        },
        pullback=asdict(pb),
        translations=translations,
        stages=builder.stages,
        final_glue={
            "alpha_max": final.alpha_max,
            "beta_max": final.beta_max,
            "pou_variation": final.pou_variation,
            "unit_norm_error": final.unit_norm_error,
            "triangle_split_ok": final.triangle_split_ok,
            "beta_variation_ok": final.beta_variation_ok,
            "decay_transfer_ok": final.decay_transfer_ok,
            "pieces_used": [list(i) for i in final.pieces_used],
            "piece_eps": piece_eps,
        },
        certificate=cert,
        profile=profile,
        passed=passed,
        n_max=int(n_max),
    )
    if not passed:
        raise CertificateError("pipeline certificate failed", stage="pipeline", details=report.summary())
    return eta, report
