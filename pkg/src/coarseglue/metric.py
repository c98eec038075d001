"""Finite metric spaces, covers and cover analytics.

Points are addressed by position (``0..n-1``); labels are only used for
input/output. Distances live in one float64 matrix. Graph metrics are
integer valued, so comparisons on them are exact.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .errors import CertificateError, InputError, MetricAxiomError, SeparationError

INF = math.inf
TRIANGLE_TOL = 1e-12


@dataclass(frozen=True)
class Violation:
    kind: str
    points: tuple
    value: float

    def as_dict(self):
        return {"kind": self.kind, "points": list(self.points), "value": self.value}

    def __str__(self):
        return f"{self.kind} at {self.points} (value {self.value!r})"


def _triangle_violations(dist, tol):
    """Yield ``(x, z, y, excess)`` with d(x,z) > d(x,y) + d(y,z) + tol, x < z.

    For each offending pair only the intermediate point of largest excess
    is kept.
    """
    n = dist.shape[0]
    integral = n > 0 and np.all(dist == np.round(dist)) and dist.max() < 2**14
    work = dist.astype(np.int16) if integral else dist
    lhs = work if integral else work - tol
    offenders = []
    for y in range(n):
        via = work[:, y, None] + work[None, y, :]
        bad = via < lhs
        if bad.any():
            offenders.append(y)
    if not offenders:
        return []
    worst = {}
    for y in offenders:
        via = dist[:, y, None] + dist[None, y, :]
        excess = dist - via
        xs, zs = np.nonzero(excess > tol)
        for x, z in zip(xs.tolist(), zs.tolist()):
            if x >= z:
                continue
            e = float(excess[x, z])
            if (x, z) not in worst or e > worst[(x, z)][1]:
                worst[(x, z)] = (y, e)
    return [(x, z, y, e) for (x, z), (y, e) in sorted(worst.items())]


def metric_violations(labels, table, tol=TRIANGLE_TOL):
    """Every violated metric axiom in ``table``, each with witnessing labels."""
    labels = list(labels)
    dist = np.asarray(table, dtype=float)
    if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
        raise InputError(f"distance table must be square, got shape {dist.shape}")
    if len(labels) != dist.shape[0]:
        raise InputError(f"{len(labels)} labels for a {dist.shape[0]}-point table")
    if len(set(labels)) != len(labels):
        raise InputError("labels must be distinct")
    if not np.all(np.isfinite(dist)):
        raise InputError("distance table has non-finite entries")

    out = []
    for x in np.flatnonzero(np.diag(dist) != 0).tolist():
        out.append(Violation("nonzero-diagonal", (labels[x],), float(dist[x, x])))
    xs, ys = np.nonzero(dist < 0)
    for x, y in zip(xs.tolist(), ys.tolist()):
        out.append(Violation("negative", (labels[x], labels[y]), float(dist[x, y])))
    xs, ys = np.nonzero(np.abs(dist - dist.T) > tol)
    for x, y in zip(xs.tolist(), ys.tolist()):
        if x < y:
            out.append(Violation("asymmetry", (labels[x], labels[y]), float(dist[x, y] - dist[y, x])))
    off = ~np.eye(len(labels), dtype=bool)
    xs, ys = np.nonzero((dist == 0) & off)
    for x, y in zip(xs.tolist(), ys.tolist()):
        if x < y:
            out.append(Violation("zero-distance", (labels[x], labels[y]), 0.0))
    if not out:
        for x, z, y, e in _triangle_violations(dist, tol):
            out.append(Violation("triangle", (labels[x], labels[z], labels[y]), e))
    return out


class FiniteMetricSpace:
    """A labelled point set with a certified distance matrix.

    Use `validate_metric` to build one from raw data; the constructor
    trusts its input. A space made by `subspace` keeps a reference to its
    parent and the parent positions of its points.
    """

    def __init__(self, labels, dist, *, parent=None, positions=None):
        self.labels = tuple(labels)
        dist = np.array(dist, dtype=float)
        dist.flags.writeable = False
        self.dist = dist
        self.parent = parent
        if positions is not None:
            positions = np.asarray(positions, dtype=np.intp)
            positions.flags.writeable = False
        self.positions = positions
        self._index = None
        self._digest = None

    def __len__(self):
        return len(self.labels)

    def __repr__(self):
        return f"FiniteMetricSpace(n={len(self)}, diameter={self.diameter:g})"

    @property
    def n(self):
        return len(self.labels)

    @property
    def diameter(self):
        return float(self.dist.max()) if self.n else 0.0

    def index(self, label):
        if self._index is None:
            self._index = {lab: i for i, lab in enumerate(self.labels)}
        try:
            return self._index[label]
        except KeyError:
            raise InputError(f"unknown point label {label!r}") from None

    def indices(self, labels):
        return np.array([self.index(lab) for lab in labels], dtype=np.intp)

    def subspace(self, members) -> "FiniteMetricSpace":
        members = np.unique(np.asarray(list(members), dtype=np.intp))
        if members.size == 0:
            raise InputError("subspace must be nonempty")
        if members[0] < 0 or members[-1] >= self.n:
            raise InputError("subspace members out of range")
        sub = self.dist[np.ix_(members, members)]
        return FiniteMetricSpace(
            [self.labels[i] for i in members], sub, parent=self, positions=members
        )

    def positions_in(self, ancestor) -> np.ndarray:
        """Positions of this space's points inside ``ancestor``."""
        pos = np.arange(self.n, dtype=np.intp)
        space = self
        while space is not ancestor:
            if space.parent is None:
                raise InputError("space is not a subspace of the given ancestor")
            pos = space.positions[pos]
            space = space.parent
        return pos

    def distance_to_set(self, members) -> np.ndarray:
        """``d(x, U)`` for every point x; +inf when U is empty."""
        members = np.asarray(members, dtype=np.intp)
        if members.size == 0:
            return np.full(self.n, INF)
        return self.dist[:, members].min(axis=1)

    def ball(self, x, radius):
        return np.flatnonzero(self.dist[x] <= radius)

    def digest(self):
        if self._digest is None:
            h = hashlib.sha256()
            h.update(json.dumps([str(lab) for lab in self.labels]).encode())
            h.update(np.ascontiguousarray(self.dist, dtype="<f8").tobytes())
            self._digest = h.hexdigest()
        return self._digest


def validate_metric(labels, table, tol=TRIANGLE_TOL) -> FiniteMetricSpace:
    """Certify ``table`` as a metric on ``labels``.

    Raises `MetricAxiomError` listing every violated axiom. Triangle
    violations are only searched once the pairwise axioms hold.
    """
    violations = metric_violations(labels, table, tol)
    if violations:
        raise MetricAxiomError(violations)
    return FiniteMetricSpace(labels, np.asarray(table, dtype=float))


def check_subspace(sub: FiniteMetricSpace) -> None:
    """Induced distances must equal the parent's distances restricted."""
    if sub.parent is None:
        return
    expected = sub.parent.dist[np.ix_(sub.positions, sub.positions)]
    if not np.array_equal(expected, sub.dist):
        raise CertificateError("subspace distances differ from parent", stage="subspace")


# ---------------------------------------------------------------- generators


def line_space(n, start=0) -> FiniteMetricSpace:
    """Points ``start..start+n-1`` of the integer line with ``|x - y|``."""
    return integer_space(range(start, start + n))


def integer_space(points) -> FiniteMetricSpace:
    pts = np.array(sorted(set(int(p) for p in points)))
    return validate_metric([str(p) for p in pts], np.abs(pts[:, None] - pts[None, :]))


def grid_space(rows, cols) -> FiniteMetricSpace:
    """Grid with the l1 (graph) metric; labels ``"r,c"``."""
    coords = np.array([(r, c) for r in range(rows) for c in range(cols)])
    dist = cdist(coords, coords, metric="cityblock")
    return validate_metric([f"{r},{c}" for r, c in coords], dist)


def euclidean_space(points, labels=None) -> FiniteMetricSpace:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if labels is None:
        labels = [str(i) for i in range(len(pts))]
    return validate_metric(labels, cdist(pts, pts), tol=1e-9)


# ---------------------------------------------------------------- covers


def index_key(i):
    """Total order on cover indices: ints < strings < tuples, each lexicographic."""
    if isinstance(i, bool):
        return (0, int(i))
    if isinstance(i, (int, np.integer)):
        return (0, int(i))
    if isinstance(i, (float, np.floating)):
        return (0, float(i))
    if isinstance(i, str):
        return (1, i)
    if isinstance(i, tuple):
        return (2, tuple(index_key(a) for a in i))
    return (3, repr(i))


class Cover:
    """A finite indexed family of nonempty point sets whose union is the space.

    Indices are kept in `index_key` order, which is the "index order" used
    for tie-breaking everywhere downstream.
    """

    def __init__(self, space: FiniteMetricSpace, sets: Mapping[Hashable, Iterable[int]], *, check=True):
        self.space = space
        items = []
        for i, m in sets.items():
            arr = np.unique(np.asarray(list(m), dtype=np.intp))
            arr.flags.writeable = False
            items.append((i, arr))
        items.sort(key=lambda t: index_key(t[0]))
        self.indices = tuple(i for i, _ in items)
        self.sets = dict(items)
        self._membership = None
        if check:
            self._check()

    def _check(self):
        if not self.sets:
            raise InputError("cover has no sets")
        n = self.space.n
        seen = np.zeros(n, dtype=bool)
        for i, m in self.sets.items():
            if m.size == 0:
                raise InputError(f"cover set {i!r} is empty")
            if m[0] < 0 or m[-1] >= n:
                raise InputError(f"cover set {i!r} has out-of-range points")
            seen[m] = True
        if not seen.all():
            missing = self.space.labels[int(np.flatnonzero(~seen)[0])]
            raise InputError(f"cover misses point {missing!r}")

    @classmethod
    def from_labels(cls, space, sets):
        return cls(space, {i: space.indices(labs) for i, labs in sets.items()})

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __getitem__(self, i):
        return self.sets[i]

    def __repr__(self):
        return f"Cover({len(self)} sets on {self.space.n} points)"

    def labels_of(self, i):
        return [self.space.labels[p] for p in self.sets[i]]

    def membership(self) -> np.ndarray:
        """Boolean matrix ``(n_sets, n_points)``."""
        if self._membership is None:
            mem = np.zeros((len(self), self.space.n), dtype=bool)
            for r, i in enumerate(self.indices):
                mem[r, self.sets[i]] = True
            mem.flags.writeable = False
            self._membership = mem
        return self._membership

    def distance_matrix(self) -> np.ndarray:
        """``d(x, U_i)`` as a ``(n_sets, n_points)`` matrix."""
        return np.stack([self.space.distance_to_set(self.sets[i]) for i in self.indices])

    def complement_distance_matrix(self) -> np.ndarray:
        """``d(x, X \\ U_i)``, +inf for a set equal to the whole space."""
        mem = self.membership()
        return np.stack([self.space.distance_to_set(np.flatnonzero(~row)) for row in mem])

    def is_full(self, i):
        return self.sets[i].size == self.space.n

    def same_sets(self, other) -> bool:
        return self.indices == other.indices and all(
            np.array_equal(self.sets[i], other.sets[i]) for i in self.indices
        )

    def as_label_dict(self):
        return {i: self.labels_of(i) for i in self.indices}

    def digest(self):
        h = hashlib.sha256(self.space.digest().encode())
        for i in self.indices:
            h.update(repr(i).encode())
            h.update(self.sets[i].astype("<i8").tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class SeparatedCover:
    cover: Cover
    k: int
    L: float
    coloring: Mapping[Hashable, int]
    closest_gap: float = INF

    def families(self):
        fam = {c: [] for c in range(self.k + 1)}
        for i in self.cover.indices:
            fam[self.coloring[i]].append(i)
        return fam


@dataclass
class CoverStats:
    multiplicity: int
    r_multiplicity: dict
    lebesgue_lower: float
    lebesgue_witness: object
    lebesgue_boundary_points: list
    max_diameter: float
    n_sets: int

    def r_mult(self, R):
        return self.r_multiplicity[float(R)]

    def as_dict(self):
        return {
            "n_sets": self.n_sets,
            "multiplicity": self.multiplicity,
            "r_multiplicity": {repr(float(r)): m for r, m in self.r_multiplicity.items()},
            "lebesgue_lower": self.lebesgue_lower,
            "lebesgue_witness": self.lebesgue_witness,
            "lebesgue_boundary_points": self.lebesgue_boundary_points,
            "max_diameter": self.max_diameter,
        }


def enlarge_cover(cover: Cover, R) -> Cover:
    """Replace each set U by its closed neighbourhood ``{x : d(x, U) <= R}``."""
    R = float(R)
    if R < 0 or math.isnan(R):
        raise InputError(f"enlargement radius must be >= 0, got {R}")
    space = cover.space
    return Cover(
        space,
        {i: np.flatnonzero(space.distance_to_set(cover[i]) <= R) for i in cover.indices},
        check=False,
    )


def r_multiplicity(cover: Cover, R, dmat=None) -> int:
    """Max over points x of the number of sets meeting the closed ball B(x, R)."""
    if dmat is None:
        dmat = cover.distance_matrix()
    return int((dmat <= R).sum(axis=0).max())


def set_diameter(space, members) -> float:
    members = np.asarray(members, dtype=np.intp)
    return float(space.dist[np.ix_(members, members)].max())


def cover_stats(cover: Cover, radii: Sequence[float] = ()) -> CoverStats:
    space = cover.space
    mem = cover.membership()
    multiplicity = int(mem.sum(axis=0).max())
    dmat = cover.distance_matrix() if len(radii) else None
    rmult = {float(R): r_multiplicity(cover, R, dmat) for R in radii}
    comp = cover.complement_distance_matrix()
    best = comp.max(axis=0)
    x = int(np.argmin(best))
    lower = float(best[x])
    boundary = [space.labels[p] for p in np.flatnonzero(best == lower)] if math.isfinite(lower) else []
    return CoverStats(
        multiplicity=multiplicity,
        r_multiplicity=rmult,
        lebesgue_lower=lower,
        lebesgue_witness=space.labels[x],
        lebesgue_boundary_points=boundary,
        max_diameter=max(set_diameter(space, cover[i]) for i in cover.indices),
        n_sets=len(cover),
    )


def family_gaps(space, sets):
    """Closest pair among ``sets`` (a list of position arrays).

    Returns ``(gap, (a, b))`` with a < b indices into ``sets``; +inf and
    None when fewer than two sets are given.
    """
    best, pair = INF, None
    for a in range(len(sets)):
        if len(sets) - a < 2:
            break
        da = space.distance_to_set(sets[a])
        for b in range(a + 1, len(sets)):
            g = float(da[sets[b]].min())
            if g < best:
                best, pair = g, (a, b)
    return best, pair


def check_separated(cover: Cover, k: int, L, coloring: Mapping) -> SeparatedCover:
    """Certify that ``coloring`` splits the cover into k+1 L-separated families.

    Separation is strict: distinct members of a family need ``d(U, V) > L``.
    Raises `SeparationError` naming the closest offending pair.
    """
    if k < 0:
        raise InputError("k must be >= 0")
    if not L > 0:
        raise InputError("L must be > 0")
    fam = {c: [] for c in range(k + 1)}
    for i in cover.indices:
        if i not in coloring:
            raise InputError(f"cover index {i!r} has no colour")
        c = coloring[i]
        if c not in fam:
            raise InputError(f"colour {c!r} of index {i!r} outside 0..{k}")
        fam[c].append(i)
    overall = INF
    worst = None
    for c, members in fam.items():
        gap, pair = family_gaps(cover.space, [cover[i] for i in members])
        if pair is not None and (worst is None or gap < worst[0]):
            worst = (gap, c, members[pair[0]], members[pair[1]])
        overall = min(overall, gap)
    if worst is not None and not worst[0] > L:
        gap, c, i, j = worst
        raise SeparationError(
            f"family {c}: sets {i!r} and {j!r} at distance {gap:g}, not > {L:g}",
            stage="check_separated",
            witness=[i, j],
            details={"family": c, "distance": gap, "L": float(L)},
        )
    return SeparatedCover(cover, int(k), float(L), dict(coloring), overall)


def separated_enlargement(sep: SeparatedCover):
    """Enlarge a (k, 2L)-separated cover by L and re-measure it.

    Returns ``(enlarged_cover, stats)``; the stats certify multiplicity
    ``<= k+1`` and Lebesgue lower bound ``>= L``.
    """
    L = sep.L / 2
    mult_before = r_multiplicity(sep.cover, L)
    if mult_before > sep.k + 1:
        raise CertificateError(
            f"L-multiplicity {mult_before} exceeds k+1={sep.k + 1}",
            stage="separated_enlargement",
            details={"L": L},
        )
    enlarged = enlarge_cover(sep.cover, L)
    stats = cover_stats(enlarged, [L])
    if stats.multiplicity > sep.k + 1:
        raise CertificateError(
            f"enlarged multiplicity {stats.multiplicity} exceeds k+1={sep.k + 1}",
            stage="separated_enlargement",
        )
    if stats.lebesgue_lower < L:
        raise CertificateError(
            f"enlarged Lebesgue bound {stats.lebesgue_lower:g} below L={L:g}",
            stage="separated_enlargement",
            witness=stats.lebesgue_witness,
        )
    return enlarged, stats
