"""Free products of cyclic groups, their word and relative metrics, and
the recursive relative-ball decomposition.

An element is its normal form: a tuple of syllables ``(factor, exponent)``
with consecutive syllables from distinct factors. Exponents of a finite
factor of order m are kept in ``1..m-1``. The peripheral subgroups are the
factors themselves; ``H_k`` (``k`` counted from 1) is factor ``k - 1``.

Two independent routes compute distances:

* closed form: ``d_S(g, h)`` is the word length of ``g^-1 h`` (sum of the
  syllable lengths) and ``d_{S u H}(g, h)`` its syllable count;
* search: breadth-first search from the identity over the Cayley graph,
  resp. the relative Cayley graph, restricted to the ball of radius 2W.
"""

from __future__ import annotations

import string
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import CertificateError, InputError
from .metric import (
    Cover,
    FiniteMetricSpace,
    SeparatedCover,
    check_separated,
    cover_stats,
    family_gaps,
)


class MarkedGroup:
    """Free product of cyclic groups with its standard symmetric generators.

    ``factors`` lists cyclic orders, 0 meaning infinite cyclic.
    """

    def __init__(self, factors: Sequence[int], window_radius: int = 1):
        factors = tuple(int(m) for m in factors)
        if not factors:
            raise InputError("need at least one factor")
        for m in factors:
            if m == 1:
                raise InputError("trivial factor (order 1) is not allowed")
            if m < 0:
                raise InputError(f"invalid factor order {m}")
        if int(window_radius) < 1:
            raise InputError("window radius must be >= 1")
        if len(factors) > 26:
            raise InputError("at most 26 factors")
        self.factors = factors
        self.window_radius = int(window_radius)
        self.names = string.ascii_lowercase[: len(factors)]

    def __repr__(self):
        parts = ["Z" if m == 0 else f"Z/{m}" for m in self.factors]
        return f"MarkedGroup({' * '.join(parts)}, W={self.window_radius})"

    @property
    def n_factors(self):
        return len(self.factors)

    def normalize(self, f, e):
        m = self.factors[f]
        return e if m == 0 else e % m

    def syllable_length(self, f, e):
        m = self.factors[f]
        if m == 0:
            return abs(e)
        r = e % m
        return min(r, m - r)

    @property
    def identity(self):
        return ()

    def generator(self, f, sign=1):
        return ((f, self.normalize(f, sign)),)

    @property
    def S(self):
        """Symmetric generating set, one generator and its inverse per factor."""
        out = []
        for f in range(self.n_factors):
            for sign in (1, -1):
                g = self.generator(f, sign)
                if g not in out:
                    out.append(g)
        return out

    def multiply(self, g, h):
        word = list(g)
        for f, e in h:
            if word and word[-1][0] == f:
                e2 = self.normalize(f, word[-1][1] + e)
                word.pop()
                if e2 != 0:
                    word.append((f, e2))
            else:
                word.append((f, e))
        return tuple(word)

    def inverse(self, g):
        return tuple((f, self.normalize(f, -e)) for f, e in reversed(g))

    def length(self, g):
        return sum(self.syllable_length(f, e) for f, e in g)

    @staticmethod
    def rel_length(g):
        return len(g)

    def element(self, syllables):
        """Normal form of a product of syllables ``[(factor, exponent), ...]``."""
        g = ()
        for f, e in syllables:
            f, e = int(f), int(e)
            if not 0 <= f < self.n_factors:
                raise InputError(f"factor index {f} out of range")
            e = self.normalize(f, e)
            if e != 0:
                g = self.multiply(g, ((f, e),))
        return g

    def parse(self, text):
        """Parse ``"a^2.b.a^-3"`` (``"e"`` for the identity)."""
        text = text.strip()
        if text in ("", "e", "1"):
            return ()
        syl = []
        for part in text.replace("*", ".").replace(" ", ".").split("."):
            if not part:
                continue
            name, _, exp = part.partition("^")
            if name not in self.names or len(name) != 1:
                raise InputError(f"unknown generator {name!r} in {text!r}")
            syl.append((self.names.index(name), int(exp) if exp else 1))
        return self.element(syl)

    def format(self, g):
        if not g:
            return "e"
        return ".".join(self.names[f] + ("" if e == 1 else f"^{e}") for f, e in g)

    def in_factor(self, g, f):
        return len(g) == 0 or (len(g) == 1 and g[0][0] == f)

    def strip(self, g, f):
        """Drop a trailing syllable from factor f (the coset rep of ``g H_f``)."""
        if g and g[-1][0] == f:
            return g[:-1]
        return g


def build_marked_group(config) -> MarkedGroup:
    """From ``{"factors": [...], "window_radius": W}``."""
    try:
        factors = config["factors"]
    except (KeyError, TypeError):
        raise InputError("group config needs a 'factors' list") from None
    return MarkedGroup(factors, config.get("window_radius", 1))


# ---------------------------------------------------------------- windows


def _enumerate_ball(group: MarkedGroup, W):
    out = [()]

    def extend(prefix, last, budget):
        for f, m in enumerate(group.factors):
            if f == last:
                continue
            exps = range(1, m) if m else [s * t for t in range(1, budget + 1) for s in (1, -1)]
            for e in exps:
                ell = group.syllable_length(f, e)
                if ell <= budget:
                    g = prefix + ((f, e),)
                    out.append(g)
                    extend(g, f, budget - ell)

    extend((), -1, W)
    return out


class GroupWindow:
    """All elements of d_S-length at most W, ordered by (length, normal form)."""

    def __init__(self, group: MarkedGroup, W=None):
        self.group = group
        self.W = int(group.window_radius if W is None else W)
        if self.W < 1:
            raise InputError("window radius must be >= 1")
        elems = _enumerate_ball(group, self.W)
        elems.sort(key=lambda g: (group.length(g), g))
        self.elements = elems
        self.pos = {g: i for i, g in enumerate(elems)}
        self.lengths = np.array([group.length(g) for g in elems])
        self.rel_lengths = np.array([len(g) for g in elems])
        self.labels = [group.format(g) for g in elems]
        self._metrics = {}
        self._crosscheck = {}

    def __len__(self):
        return len(self.elements)

    def __repr__(self):
        return f"GroupWindow({self.group!r}, {len(self)} elements)"

    def __contains__(self, g):
        return g in self.pos

    def position(self, g):
        try:
            return self.pos[g]
        except KeyError:
            raise InputError(f"{self.group.format(g)} is outside the window") from None

    def interior(self):
        """Positions of elements with length <= W - 1."""
        return np.flatnonzero(self.lengths <= self.W - 1)

    def factor_members(self, k):
        """Positions of ``H_k`` inside the window (k counted from 1)."""
        f = k - 1
        return np.array([i for i, g in enumerate(self.elements) if self.group.in_factor(g, f)], dtype=np.intp)

    def closed_form_distances(self):
        """Both distance matrices from the normal form of ``g^-1 h``."""
        grp = self.group
        N = len(self)
        K = max(1, int(self.rel_lengths.max()))
        F = np.full((N, K + 1), -1, dtype=np.int64)
        E = np.zeros((N, K + 1), dtype=np.int64)
        cum = np.zeros((N, K + 1), dtype=np.int64)
        for i, g in enumerate(self.elements):
            for j, (f, e) in enumerate(g):
                F[i, j], E[i, j] = f, e
                cum[i, j + 1] = cum[i, j] + grp.syllable_length(f, e)
        nsyl = self.rel_lengths
        total = self.lengths
        orders = np.array(grp.factors, dtype=np.int64)

        def syl_len(f, e):
            m = orders[f]
            r = np.where(m > 0, np.mod(e, np.where(m > 0, m, 1)), np.abs(e))
            return np.where(m > 0, np.minimum(r, m - r), r)

        ds = np.zeros((N, N), dtype=np.int64)
        dr = np.zeros((N, N), dtype=np.int64)
        rows = np.arange(N)
        for g in range(N):
            eq = (F == F[g]) & (E == E[g])
            cp = np.cumprod(eq, axis=1).sum(axis=1)
            cp = np.minimum(cp, np.minimum(nsyl[g], nsyl))
            len_u = total[g] - cum[g, cp]
            len_v = total - cum[rows, cp]
            cnt = (nsyl[g] - cp) + (nsyl - cp)
            both = (cp < nsyl[g]) & (cp < nsyl)
            fg = F[g, np.minimum(cp, K)]
            fh = F[rows, np.minimum(cp, K)]
            merge = both & (fg == fh)
            a = E[g, np.minimum(cp, K)]
            b = E[rows, np.minimum(cp, K)]
            fm = np.where(merge, fh, 0)
            merged = len_u + len_v - syl_len(fm, a) - syl_len(fm, b) + syl_len(fm, b - a)
            ds[g] = np.where(merge, merged, len_u + len_v)
            dr[g] = np.where(merge, cnt - 1, cnt)
        return ds, dr

    def metric(self, kind="s", cross_check=False) -> FiniteMetricSpace:
        """The window as a metric space under ``d_S`` (kind "s") or ``d_{S u H}`` ("rel")."""
        if kind not in ("s", "rel"):
            raise InputError(f"metric kind must be 's' or 'rel', got {kind!r}")
        if kind not in self._metrics:
            ds, dr = self.closed_form_distances()
            from .metric import validate_metric

            self._metrics["s"] = validate_metric(self.labels, ds)
            self._metrics["rel"] = validate_metric(self.labels, dr)
        if cross_check:
            self.cross_check()
        return self._metrics[kind]

    def as_metric(self, metric_kind="s"):
        return self.metric(metric_kind)

    def cross_check(self):
        """Compare both closed-form matrices with breadth-first search on all pairs.

        Returns a dict of agreement flags; raises `CertificateError` on any
        disagreement.
        """
        if self._crosscheck:
            return self._crosscheck
        ds = self.metric("s").dist
        dr = self.metric("rel").dist
        bfs_s, bfs_r = search_distances(self)
        out = {}
        for kind, closed, searched in (("s", ds, bfs_s), ("rel", dr, bfs_r)):
            bad = np.argwhere(closed != searched)
            if len(bad):
                i, j = bad[0]
                raise CertificateError(
                    f"d_{kind} closed form {closed[i, j]:g} != search {searched[i, j]:g}",
                    stage="metric_cross_check",
                    witness=(self.labels[i], self.labels[j]),
                )
            out[kind] = {"pairs": int(closed.size), "agree": True}
        self._crosscheck = out
        return out


# ---------------------------------------------------------------- search route
# Elements are re-encoded as tuples of packed ints ``e * n_factors + f`` so
# that the ball of radius 2W fits in memory; the arithmetic below is
# written independently of `MarkedGroup.multiply`.


def _packed_ops(group):
    nf = group.n_factors
    orders = group.factors

    def norm(f, e):
        m = orders[f]
        return e % m if m else e

    def times_gen(z, f, step):
        if z and z[-1] % nf == f:
            e = norm(f, z[-1] // nf + step)
            return z[:-1] + (e * nf + f,) if e else z[:-1]
        return z + (norm(f, step) * nf + f,)

    def product(a, b):
        a = list(a)
        for s in b:
            f, e = s % nf, s // nf
            if a and a[-1] % nf == f:
                e2 = norm(f, a[-1] // nf + e)
                a.pop()
                if e2:
                    a.append(e2 * nf + f)
            else:
                a.append(s)
        return tuple(a)

    def inverse(a):
        return tuple(norm(s % nf, -(s // nf)) * nf + s % nf for s in reversed(a))

    def pack(g):
        return tuple(e * nf + f for f, e in g)

    return times_gen, product, inverse, pack


def search_distances(window: GroupWindow):
    """All-pairs ``d_S`` and ``d_{S u H}`` on the window via BFS from e."""
    group = window.group
    nf = group.n_factors
    times_gen, product, inverse, pack = _packed_ops(group)
    radius = 2 * window.W
    steps = []
    for f, m in enumerate(group.factors):
        steps.append((f, 1))
        if m != 2:
            steps.append((f, -1))

    ids = {(): 0}
    nodes = [()]
    dist_s = [0]
    frontier = [()]
    depth = 0
    while frontier and depth < radius:
        depth += 1
        nxt = []
        for z in frontier:
            for f, st in steps:
                w = times_gen(z, f, st)
                if w not in ids:
                    ids[w] = len(nodes)
                    nodes.append(w)
                    dist_s.append(depth)
                    nxt.append(w)
        frontier = nxt
    dist_s = np.array(dist_s)

    # relative graph: z ~ z h for h in a factor. Inside the ball the coset
    # z H_f is a run of consecutive generator steps, so it is found by
    # walking the factor generator both ways until the walk leaves the ball.
    n_nodes = len(nodes)
    expanded = np.zeros((nf, n_nodes), dtype=bool)
    dist_r = np.full(n_nodes, -1, dtype=np.int64)
    dist_r[0] = 0
    queue = deque([0])
    while queue:
        zi = queue.popleft()
        z = nodes[zi]
        for f in range(nf):
            if expanded[f, zi]:
                continue
            clique = [zi]
            for st in (1, -1):
                w = times_gen(z, f, st)
                while w in ids and ids[w] != zi:
                    clique.append(ids[w])
                    w = times_gen(w, f, st)
            expanded[f, clique] = True
            for wi in clique:
                if dist_r[wi] < 0:
                    dist_r[wi] = dist_r[zi] + 1
                    queue.append(wi)

    packed = [pack(g) for g in window.elements]
    inv = [inverse(p) for p in packed]
    N = len(packed)
    ds = np.zeros((N, N))
    dr = np.zeros((N, N))
    for i in range(N):
        gi = inv[i]
        q = np.fromiter((ids[product(gi, packed[j])] for j in range(i + 1, N)), dtype=np.int64, count=N - i - 1)
        ds[i, i + 1 :] = dist_s[q]
        dr[i, i + 1 :] = dist_r[q]
    ds = ds + ds.T
    dr = dr + dr.T
    return ds, dr


def word_metric(window: GroupWindow, cross_check=True) -> FiniteMetricSpace:
    return window.metric("s", cross_check=cross_check)


def relative_metric(window: GroupWindow, cross_check=True) -> FiniteMetricSpace:
    return window.metric("rel", cross_check=cross_check)


# ---------------------------------------------------------------- relative balls


@dataclass
class RelativeBall:
    n: int
    members: np.ndarray

    def __len__(self):
        return len(self.members)


def rel_ball(window: GroupWindow, n) -> RelativeBall:
    if n < 0:
        raise InputError("n must be >= 0")
    return RelativeBall(int(n), np.flatnonzero(window.rel_lengths <= n))


@dataclass
class CosetDecomposition:
    n: int
    k: int
    reps: list
    cosets: dict
    union: np.ndarray

    def coset_sets(self):
        return [self.cosets[r] for r in self.reps]


@dataclass
class RecursionCheck:
    n: int
    k: int
    b1_ok: bool | None
    bn_ok: bool | None
    interior_size: int
    cosets_disjoint: bool
    cosets_exhaust: bool
    n_cosets: int


def _factor_elements(group, f, radius):
    m = group.factors[f]
    if m:
        return [((f, e),) for e in range(1, m)]
    return [((f, s * t),) for t in range(1, radius + 1) for s in (1, -1)]


def osin_decomposition(window: GroupWindow, n, k):
    """Coset decomposition of ``B(n-1) H_k`` and the ball recursion checks.

    Representatives are the elements of ``B(n-1)`` whose normal form does
    not end in a factor-k syllable. The recursion identities are checked as
    exact set equalities on the window interior (length <= W-1).

    Returns ``(CosetDecomposition, RecursionCheck)``.
    """
    grp = window.group
    W = window.W
    if not 1 <= n <= W:
        raise InputError(f"n must satisfy 1 <= n <= W={W}")
    if not 1 <= k <= grp.n_factors:
        raise InputError(f"k must be in 1..{grp.n_factors}")
    f = k - 1
    prev = rel_ball(window, n - 1).members
    prev_elems = [window.elements[i] for i in prev]
    reps = [g for g in prev_elems if not (g and g[-1][0] == f)]
    rep_set = set(reps)
    cosets = {g: [] for g in reps}
    for i, y in enumerate(window.elements):
        r = grp.strip(y, f)
        if r in rep_set:
            cosets[r].append(i)
    cosets = {g: np.array(v, dtype=np.intp) for g, v in cosets.items()}

    # independent route: all products g h, g in B(n-1), h in H_k
    hk = _factor_elements(grp, f, 2 * W)
    prod = set()
    for g in prev_elems:
        prod.add(g)
        for h in hk:
            y = grp.multiply(g, h)
            if y in window.pos:
                prod.add(y)
    union = np.array(sorted(window.pos[y] for y in prod), dtype=np.intp)
    sizes = sum(len(c) for c in cosets.values())
    allpos = np.concatenate(list(cosets.values())) if cosets else np.zeros(0, np.intp)
    disjoint = sizes == len(np.unique(allpos))
    exhaust = np.array_equal(np.unique(allpos), union)

    interior = set(window.interior().tolist())
    b1_ok = bn_ok = None
    if n == 1:
        rhs = {()}
        for s in grp.S:
            rhs.add(s)
        for ff in range(grp.n_factors):
            for h in _factor_elements(grp, ff, 2 * W):
                rhs.add(h)
        lhs = {window.elements[i] for i in rel_ball(window, 1).members}
        rhs_w = {y for y in rhs if y in window.pos}
        b1_ok = lhs == rhs_w
    else:
        lhs = {window.elements[i] for i in rel_ball(window, n).members if i in interior}
        rhs = set()
        for g in prev_elems:
            for ff in range(grp.n_factors):
                rhs.add(g)
                for h in _factor_elements(grp, ff, 2 * W):
                    rhs.add(grp.multiply(g, h))
            for s in grp.S:
                rhs.add(grp.multiply(g, s))
        rhs_i = {y for y in rhs if y in window.pos and window.pos[y] in interior}
        bn_ok = lhs == rhs_i
    check = RecursionCheck(
        n=int(n),
        k=int(k),
        b1_ok=b1_ok,
        bn_ok=bn_ok,
        interior_size=len(interior),
        cosets_disjoint=bool(disjoint),
        cosets_exhaust=bool(exhaust),
        n_cosets=len(reps),
    )
    if b1_ok is False or bn_ok is False or not disjoint or not exhaust:
        raise CertificateError(
            f"ball recursion failed for n={n}, k={k}", stage="osin_decomposition", details=check.__dict__
        )
    decomp = CosetDecomposition(int(n), int(k), reps, cosets, union)
    return decomp, check


@dataclass
class SeparationResult:
    n: int
    k: int
    L: float
    kappa: int
    Y: np.ndarray
    verified: bool
    min_gap: float
    n_remaining_sets: int
    tried: list = field(default_factory=list)


def separation_search(window: GroupWindow, n, k, L, decomposition=None) -> SeparationResult:
    """Least kappa for which the sets ``g H_k \\ Y`` are pairwise > L apart in d_S.

    ``Y`` is the closed kappa-neighbourhood of ``B(n-1)`` inside the window.
    Every candidate kappa is verified exhaustively on the window.
    """
    if not L > 0:
        raise InputError("L must be > 0")
    if decomposition is None:
        decomposition, _ = osin_decomposition(window, n, k)
    space = window.metric("s")
    prev = rel_ball(window, n - 1).members
    d_prev = space.distance_to_set(prev)
    labels = np.full(len(window), -1, dtype=np.intp)
    for c, rep in enumerate(decomposition.reps):
        labels[decomposition.cosets[rep]] = c
    tried = []
    last = None
    for kappa in range(0, window.W + 1):
        in_y = d_prev <= kappa
        rem = np.flatnonzero((labels >= 0) & ~in_y)
        if len(rem) < 2:
            gap = float("inf")
        else:
            sub = space.dist[np.ix_(rem, rem)].copy()
            sub[labels[rem][:, None] == labels[rem][None, :]] = np.inf
            gap = float(sub.min())
            if gap < np.inf:
                a, b = np.unravel_index(int(np.argmin(sub)), sub.shape)
                last = (window.labels[rem[a]], window.labels[rem[b]], gap)
        tried.append({"kappa": kappa, "min_gap": gap, "n_points": int(len(rem))})
        if gap > L:
            n_sets = len(np.unique(labels[rem]))
            return SeparationResult(
                int(n), int(k), float(L), kappa, np.flatnonzero(in_y), True, gap, n_sets, tried
            )
    raise CertificateError(
        f"no kappa <= W={window.W} separates the cosets by more than {L:g}; window too small",
        stage="separation_search",
        witness=last,
    )


# ---------------------------------------------------------------- asdim covers


@dataclass
class AsdimCoverReport:
    R: float
    n_sets: int
    n_annuli: int
    k: int
    multiplicity: int
    max_relative_diameter: float
    separation: float
    color_gaps: dict


def relative_asdim_cover(window: GroupWindow, R):
    """A (k, 2R)-separated cover of the window under ``d_{S u H}``.

    Annuli ``A_m = {g : 2mR <= |g|_rel < 2(m+1)R}`` are split into the
    classes of the relation "joined by a chain of steps of relative length
    <= 2R inside the annulus"; sets are then coloured greedily in index
    order so that each colour class is 2R-separated.

    Returns ``(SeparatedCover, AsdimCoverReport)``; the constants are
    measured, not assumed.
    """
    if not R > 0:
        raise InputError("R must be > 0")
    space = window.metric("rel")
    annulus = np.floor(window.rel_lengths / (2 * R)).astype(np.int64)
    sets = {}
    for m in np.unique(annulus):
        members = np.flatnonzero(annulus == m)
        adj = space.dist[np.ix_(members, members)] <= 2 * R
        ncomp, comp = connected_components(adj, directed=False)
        firsts = sorted(range(ncomp), key=lambda c: members[comp == c][0])
        for c_new, c in enumerate(firsts):
            sets[("A", int(m), c_new)] = members[comp == c]
    cover = Cover(space, sets)
    dmat = cover.distance_matrix()
    coloring = {}
    for r, i in enumerate(cover.indices):
        used = set()
        for r2, j in enumerate(cover.indices[:r]):
            if dmat[r2, cover[i]].min() <= 2 * R:
                used.add(coloring[j])
        c = 0
        while c in used:
            c += 1
        coloring[i] = c
    k = max(coloring.values())
    sep = check_separated(cover, k, 2 * R, coloring)
    stats = cover_stats(cover)
    gaps = {}
    for c, members in sep.families().items():
        gaps[c] = family_gaps(space, [cover[i] for i in members])[0]
    report = AsdimCoverReport(
        R=float(R),
        n_sets=len(cover),
        n_annuli=int(len(np.unique(annulus))),
        k=int(k),
        multiplicity=stats.multiplicity,
        max_relative_diameter=stats.max_diameter,
        separation=sep.closest_gap,
        color_gaps=gaps,
    )
    return sep, report
