"""Partitions of unity on finite metric spaces.

A partition is stored densely as a ``(n_index, n_points)`` array whose
zeros outside the subordinated sets are structural (never rounded).
Variation at scale R is the l1 quantity ``sum_i |phi_i(x) - phi_i(y)|``
maximised over pairs with ``d(x, y) <= R``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Mapping, Optional

import numpy as np

from .errors import CertificateError, InfeasibleParameters, InputError
from .metric import (
    INF,
    Cover,
    FiniteMetricSpace,
    SeparatedCover,
    cover_stats,
    enlarge_cover,
    index_key,
    separated_enlargement,
)

SUM_TOL = 1e-9
LIP_TOL = 1e-9


def close_pairs(space: FiniteMetricSpace, R):
    """Index arrays ``(xs, ys)`` of all pairs x < y with ``d(x, y) <= R``."""
    xs, ys = np.nonzero(np.triu(space.dist <= R, k=1))
    return xs, ys


def l1_rows(A, xs, ys, chunk=200_000):
    """``sum_j |A[x, j] - A[y, j]|`` for each pair; A is point-major.

    Shared by partitions and Property A witnesses so that both routes run
    the same floating point reduction.
    """
    out = np.empty(len(xs))
    for s in range(0, len(xs), chunk):
        e = s + chunk
        out[s:e] = np.abs(A[xs[s:e]] - A[ys[s:e]]).sum(axis=1)
    return out


class PartitionOfUnity:
    """Functions ``phi_i : X -> [0, 1]`` summing to one at every point.

    ``origin`` records how the partition was produced (for example the
    multiplicity and Lebesgue bound of the cover it came from); the
    Lipschitz checks in `variation_certificate` read it.
    """

    def __init__(self, space, index, values, subordinate_to: Optional[Cover] = None, origin=None, check=True):
        self.space = space
        self.index = tuple(index)
        values = np.array(values, dtype=float)
        if values.shape != (len(self.index), space.n):
            raise InputError(f"values shape {values.shape} != ({len(self.index)}, {space.n})")
        values.flags.writeable = False
        self.values = values
        self.subordinate_to = subordinate_to
        self.origin = dict(origin or {})
        self._row = {i: r for r, i in enumerate(self.index)}
        self._point_major = None
        if check:
            self.check()

    def __len__(self):
        return len(self.index)

    def __repr__(self):
        return f"PartitionOfUnity({len(self)} functions on {self.space.n} points)"

    def __getitem__(self, i):
        return self.values[self._row[i]]

    def value(self, i, x):
        return float(self.values[self._row[i], x])

    def point_major(self):
        if self._point_major is None:
            self._point_major = np.ascontiguousarray(self.values.T)
        return self._point_major

    def support(self, i):
        return np.flatnonzero(self[i] > 0)

    def sum_error(self):
        return float(np.abs(self.values.sum(axis=0) - 1.0).max())

    def check(self):
        v = self.values
        if v.size and (v.min() < 0 or v.max() > 1 + SUM_TOL):
            raise CertificateError("partition values outside [0, 1]", stage="partition")
        err = self.sum_error()
        if err > SUM_TOL:
            x = int(np.argmax(np.abs(v.sum(axis=0) - 1.0)))
            raise CertificateError(
                f"partition sums deviate from 1 by {err:.3g}",
                stage="partition",
                witness=self.space.labels[x],
            )
        cover = self.subordinate_to
        if cover is not None:
            if cover.space is not self.space:
                raise InputError("subordinated cover lives on a different space")
            mem = cover.membership()
            rows = np.array([cover.indices.index(i) for i in self.index])
            leak = (v > 0) & ~mem[rows]
            if leak.any():
                r, x = np.argwhere(leak)[0]
                raise CertificateError(
                    f"phi_{self.index[r]!r} nonzero outside its set",
                    stage="subordination",
                    witness=[self.index[r], self.space.labels[x]],
                )

    def variations(self, xs, ys):
        return l1_rows(self.point_major(), xs, ys)

    def as_triples(self):
        """Sparse ``(point_label, index, value)`` sorted by point then index order."""
        out = []
        order = sorted(range(len(self.index)), key=lambda r: index_key(self.index[r]))
        for x in range(self.space.n):
            for r in order:
                val = self.values[r, x]
                if val != 0:
                    out.append((self.space.labels[x], self.index[r], float(val)))
        return out


@dataclass
class VariationCertificate:
    R: float
    max_variation: float
    bound_claimed: Optional[float]
    witness: Optional[tuple]
    passed: bool
    lipschitz: dict = field(default_factory=dict)
    n_pairs: int = 0


def max_variation(pou: PartitionOfUnity, R):
    """``(max_variation, (x, y))`` over pairs at distance <= R; (0, None) if none."""
    xs, ys = close_pairs(pou.space, R)
    if len(xs) == 0:
        return 0.0, None
    var = pou.variations(xs, ys)
    j = int(np.argmax(var))
    return float(var[j]), (int(xs[j]), int(ys[j]))


def lipschitz_check(pou: PartitionOfUnity, k, L, R=None, chunk=50_000):
    """Check the per-index and family Lipschitz estimates for a cover partition.

    Per index: ``|phi_U(x) - phi_U(y)| <= (2k+3)/L d(x,y)``; family:
    ``sum_U |...| <= (2k+2)(2k+3)/L d(x,y)``. Pairs range over
    ``d <= R`` (all pairs when R is None). Returns the worst excesses.
    """
    space = pou.space
    xs, ys = close_pairs(space, INF if R is None else R)
    c1 = (2 * k + 3) / L
    c2 = (2 * k + 2) * (2 * k + 3) / L
    P = pou.point_major()
    worst1 = worst2 = -INF
    w1 = w2 = None
    ratio1 = ratio2 = 0.0
    for s in range(0, len(xs), chunk):
        a, b = xs[s : s + chunk], ys[s : s + chunk]
        d = space.dist[a, b]
        diff = np.abs(P[a] - P[b])
        per_index = diff.max(axis=1)
        fam = diff.sum(axis=1)
        e1 = per_index - c1 * d
        e2 = fam - c2 * d
        j1, j2 = int(np.argmax(e1)), int(np.argmax(e2))
        if e1[j1] > worst1:
            worst1, w1 = float(e1[j1]), (int(a[j1]), int(b[j1]))
        if e2[j2] > worst2:
            worst2, w2 = float(e2[j2]), (int(a[j2]), int(b[j2]))
        ratio1 = max(ratio1, float((per_index / d).max()))
        ratio2 = max(ratio2, float((fam / d).max()))
    labels = space.labels
    return {
        "k": int(k),
        "L": float(L),
        "index_lip_constant": c1,
        "family_lip_constant": c2,
        "index_lip_max_ratio": ratio1,
        "family_lip_max_ratio": ratio2,
        "index_lip_worst_excess": worst1 if w1 else 0.0,
        "family_lip_worst_excess": worst2 if w2 else 0.0,
        "index_lip_witness": (labels[w1[0]], labels[w1[1]]) if w1 else None,
        "family_lip_witness": (labels[w2[0]], labels[w2[1]]) if w2 else None,
        "index_lip_ok": (worst1 <= LIP_TOL) if w1 else True,
        "family_lip_ok": (worst2 <= LIP_TOL) if w2 else True,
        "n_pairs": int(len(xs)),
    }


def pou_from_cover(cover: Cover) -> PartitionOfUnity:
    """``phi_U(x) = d(x, X\\U) / sum_V d(x, X\\V)``.

    When some set is the whole space the formula degenerates (infinite
    distances); the partition is then the indicator of the first full set
    in index order.
    """
    space = cover.space
    comp = cover.complement_distance_matrix()
    full = [r for r, i in enumerate(cover.indices) if cover.is_full(i)]
    stats = cover_stats(cover)
    origin = {
        "kind": "cover",
        "k": stats.multiplicity - 1,
        "L": stats.lebesgue_lower,
        "cover_digest": cover.digest(),
    }
    if full:
        values = np.zeros((len(cover), space.n))
        values[full[0]] = 1.0
        return PartitionOfUnity(space, cover.indices, values, cover, origin)
    denom = comp.sum(axis=0)
    if np.any(denom <= 0):
        x = int(np.flatnonzero(denom <= 0)[0])
        raise CertificateError(
            "zero denominator: point at distance 0 from every complement (corrupt cover or metric)",
            stage="pou_from_cover",
            witness=space.labels[x],
        )
    return PartitionOfUnity(space, cover.indices, comp / denom, cover, origin)


def variation_certificate(pou: PartitionOfUnity, R, bound=None) -> VariationCertificate:
    """Exhaustive l1 variation at scale R, plus the Lipschitz checks when
    the partition came from a cover of known multiplicity and Lebesgue bound.

    Raises `CertificateError` if a claimed or derived bound fails.
    """
    R = float(R)
    if R < 0:
        raise InputError("R must be >= 0")
    xs, ys = close_pairs(pou.space, R)
    var = pou.variations(xs, ys) if len(xs) else np.zeros(0)
    if len(var):
        j = int(np.argmax(var))
        mv = float(var[j])
        witness = (pou.space.labels[xs[j]], pou.space.labels[ys[j]])
    else:
        mv, witness = 0.0, None
    lip = {}
    passed = True
    if pou.origin.get("kind") == "cover":
        k, L = pou.origin["k"], pou.origin["L"]
        if math.isinf(L):
            lip = {"k": k, "L": L, "family_lip_scale_bound": 0.0, "index_lip_ok": True, "family_lip_ok": mv == 0.0}
        else:
            lip = lipschitz_check(pou, k, L, R)
            lip["family_lip_scale_bound"] = (2 * k + 2) * (2 * k + 3) * R / L
        lip["scale_bound_ok"] = mv <= lip["family_lip_scale_bound"] + LIP_TOL
        passed = lip["index_lip_ok"] and lip["family_lip_ok"] and lip["scale_bound_ok"]
    if bound is not None:
        passed = passed and mv <= bound + LIP_TOL
    cert = VariationCertificate(
        R=R,
        max_variation=mv,
        bound_claimed=None if bound is None else float(bound),
        witness=witness,
        passed=passed,
        lipschitz=lip,
        n_pairs=int(len(xs)),
    )
    if not passed:
        raise CertificateError(
            f"variation certificate failed at R={R:g}: max variation {mv:.6g}",
            stage="variation_certificate",
            witness=witness,
            details={"bound": bound, "lipschitz": lip},
        )
    return cert


# ---------------------------------------------------------------- composition


@dataclass
class RefinementReport:
    R: float
    max_variation: float
    outer_variation: float
    inner_variation: float
    term_outer_weighted_inner: float
    term_outer_difference: float
    estimate: float
    split_ok: bool
    witness: Optional[tuple]


def _extended(inner: PartitionOfUnity, positions, n):
    ext = np.zeros((len(inner), n))
    ext[:, positions] = inner.values
    return ext


def product_refine(outer: PartitionOfUnity, inners: Mapping[Hashable, PartitionOfUnity], R):
    """Refine ``outer`` by partitions of the enlarged sets ``U_i(R)``.

    ``theta_(i,j) = phi_i * psi_i^j`` with ``psi_i^j`` extended by zero off
    ``U_i(R)``. Returns ``(theta, report)``; the report carries the two
    terms of the split estimate for the worst pair.
    """
    cover = outer.subordinate_to
    if cover is None:
        raise InputError("outer partition must be subordinated to a cover")
    space = outer.space
    n = space.n
    enlarged = enlarge_cover(cover, R)
    index, rows, sets = [], [], {}
    extended = {}
    for i in outer.index:
        phi = outer[i]
        if i not in inners:
            if phi.any():
                raise InputError(f"no inner partition for index {i!r}")
            continue
        inner = inners[i]
        if inner.subordinate_to is None:
            raise CertificateError(
                f"inner partition {i!r} is not subordinated to a cover", stage="product_refine"
            )
        try:
            pos = inner.space.positions_in(space)
        except InputError:
            raise CertificateError(f"inner partition {i!r} is not on a subspace", stage="product_refine") from None
        if not np.array_equal(np.sort(pos), enlarged[i]):
            raise CertificateError(
                f"inner partition {i!r} does not live on U_i(R)", stage="product_refine", witness=i
            )
        ext = _extended(inner, pos, n)
        extended[i] = ext
        for r, j in enumerate(inner.index):
            index.append((i, j))
            rows.append(phi * ext[r])
            sets[(i, j)] = pos[inner.subordinate_to[j]]
    theta_cover = Cover(space, sets)
    order = {ij: r for r, ij in enumerate(index)}
    values = np.array([rows[order[ij]] for ij in theta_cover.indices])
    theta = PartitionOfUnity(space, theta_cover.indices, values, theta_cover, {"kind": "product"})

    xs, ys = close_pairs(space, R)
    outer_var = max_variation(outer, R)[0]
    inner_var = 0.0
    for i, inner in inners.items():
        inner_var = max(inner_var, max_variation(inner, R)[0])
    if len(xs):
        tv = theta.variations(xs, ys)
        t1 = np.zeros(len(xs))
        t2 = np.zeros(len(xs))
        for i, ext in extended.items():
            phi = outer[i]
            t1 += phi[xs] * np.abs(ext[:, xs] - ext[:, ys]).sum(axis=0)
            t2 += np.abs(phi[xs] - phi[ys]) * ext[:, ys].sum(axis=0)
        split_ok = bool(np.all(tv <= t1 + t2 + LIP_TOL))
        j = int(np.argmax(tv))
        mv, witness = float(tv[j]), (space.labels[xs[j]], space.labels[ys[j]])
        t1m, t2m = float(t1.max()), float(t2.max())
    else:
        mv, witness, t1m, t2m, split_ok = 0.0, None, 0.0, 0.0, True
    report = RefinementReport(
        R=float(R),
        max_variation=mv,
        outer_variation=outer_var,
        inner_variation=inner_var,
        term_outer_weighted_inner=t1m,
        term_outer_difference=t2m,
        estimate=outer_var + inner_var,
        split_ok=split_ok,
        witness=witness,
    )
    if not split_ok or mv > report.estimate + LIP_TOL:
        raise CertificateError("product refinement estimate violated", stage="product_refine", witness=witness)
    return theta, report


@dataclass
class PullbackReport:
    R: float
    S: float
    max_image_distance: float
    variation_domain: float
    variation_target: float
    passed: bool


def pullback_pou(pou: PartitionOfUnity, domain: FiniteMetricSpace, p, S, R):
    """Compose a partition on Y with a point map ``p: X -> Y``.

    ``p`` is an array giving, for every point of ``domain``, a position in
    ``pou.space``. The map must send R-close pairs to S-close pairs; this
    is checked exhaustively. Returns ``(partition on X, report)``.
    """
    p = np.asarray(p, dtype=np.intp)
    if p.shape != (domain.n,):
        raise InputError("point map must give one target per domain point")
    xs, ys = close_pairs(domain, R)
    img = pou.space.dist[p[xs], p[ys]] if len(xs) else np.zeros(0)
    if len(img) and img.max() > S:
        j = int(np.argmax(img))
        raise CertificateError(
            f"map not bornologous: pair at distance {domain.dist[xs[j], ys[j]]:g} sent to distance {img[j]:g} > {S:g}",
            stage="pullback_pou",
            witness=(domain.labels[xs[j]], domain.labels[ys[j]]),
        )
    values = pou.values[:, p]
    keep = [r for r in range(len(pou)) if values[r].any()]
    index = [pou.index[r] for r in keep]
    values = values[keep]
    sub = None
    if pou.subordinate_to is not None:
        cover = pou.subordinate_to
        sets = {}
        for i in index:
            inside = np.zeros(pou.space.n, dtype=bool)
            inside[cover[i]] = True
            sets[i] = np.flatnonzero(inside[p])
        sub = Cover(domain, sets)
    pulled = PartitionOfUnity(domain, index, values, sub, {"kind": "pullback"})
    var_x = max_variation(pulled, R)[0]
    var_y = max_variation(pou, S)[0]
    report = PullbackReport(
        R=float(R),
        S=float(S),
        max_image_distance=float(img.max()) if len(img) else 0.0,
        variation_domain=var_x,
        variation_target=var_y,
        passed=var_x <= var_y + LIP_TOL,
    )
    if not report.passed:
        raise CertificateError("pullback variation exceeds target variation", stage="pullback_pou")
    return pulled, report


# ---------------------------------------------------------------- parameters


@dataclass
class ParameterChoice:
    R: float
    eps: float
    delta: float
    claim_checked_up_to: int
    claim_min_slack: float
    claim_holds: bool

    def feasible(self, k, L):
        """The (k, L) requirement ``k^2 + 1 <= 2 L delta eps``."""
        return k * k + 1 <= 2 * L * self.delta * self.eps


def choose_parameters(R, eps, k_max=10**6) -> ParameterChoice:
    """Fix ``delta = 1/(40R)`` and verify ``k^2+1 >= 2(2k+2)(2k+3) R delta``
    for every integer ``0 <= k <= k_max``."""
    R, eps = float(R), float(eps)
    if not R > 0 or not eps > 0:
        raise InputError("R and eps must be positive")
    delta = 1.0 / (40.0 * R)
    k = np.arange(k_max + 1, dtype=float)
    slack = (k * k + 1) - 2 * (2 * k + 2) * (2 * k + 3) * R * delta
    return ParameterChoice(
        R=R,
        eps=eps,
        delta=delta,
        claim_checked_up_to=int(k_max),
        claim_min_slack=float(slack.min()),
        claim_holds=bool(np.all(slack >= 0)),
    )


def minimal_separation(k, R, eps):
    """Smallest L with ``(2k+2)(2k+3) R / L <= eps``."""
    return (2 * k + 2) * (2 * k + 3) * R / eps


def separated_cover_pipeline(sep: SeparatedCover, R, eps):
    """Partition with variation <= eps at scale R from a (k, 2L)-separated cover.

    Enlarges by L, builds the distance-ratio partition on the enlarged
    cover and certifies ``max variation <= (2k+2)(2k+3) R / L <= eps``.
    Returns ``(partition, certificate, enlarged_stats)``.
    """
    R, eps = float(R), float(eps)
    L = sep.L / 2
    bound = (2 * sep.k + 2) * (2 * sep.k + 3) * R / L
    if bound > eps:
        need = minimal_separation(sep.k, R, eps)
        raise InfeasibleParameters(
            f"(2k+2)(2k+3)R/L = {bound:.6g} > eps = {eps:g}; need L >= {need:.6g} (separation 2L >= {2 * need:.6g})",
            stage="separated_cover_pipeline",
            details={"minimal_L": need, "k": sep.k, "R": R, "eps": eps},
        )
    enlarged, stats = separated_enlargement(sep)
    pou = pou_from_cover(enlarged)
    cert = variation_certificate(pou, R, bound=bound)
    return pou, cert, stats
