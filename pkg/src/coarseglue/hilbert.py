"""Sparse Hilbert-space valued maps on finite metric spaces.

A `FeatureMap` assigns each point a real sparse vector whose coordinates
are labelled by key paths (tuples of atoms). Direct sums are realised by
prefixing keys, so inner products only ever join equal key paths and a
pair of vectors with disjoint key sets is orthogonal exactly.
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass, field
from typing import Hashable, Mapping, Optional

import numpy as np
import scipy.sparse as sp

from .errors import CertificateError, InputError, NormError
from .metric import INF, FiniteMetricSpace, enlarge_cover, set_diameter
from .partition import LIP_TOL, PartitionOfUnity, close_pairs, l1_rows

NORM_TOL = 1e-9
RENORM_TOL = 1e-6
EXHAUSTIVE_LIMIT = 2000
DEFAULT_SAMPLES = 10**6
DEFAULT_SEED = 20240611


def default_seed():
    return int(os.environ.get("COARSEGLUE_SEED", DEFAULT_SEED))


class FeatureMap:
    """Point -> sparse vector, stored as a CSR matrix ``(n_points, n_keys)``."""

    def __init__(self, space: FiniteMetricSpace, keys, matrix, unit_norm=True, check=True):
        self.space = space
        self.keys = tuple(keys)
        m = sp.csr_matrix(matrix, dtype=float)
        m.eliminate_zeros()
        m.sort_indices()
        if m.shape != (space.n, len(self.keys)):
            raise InputError(f"matrix shape {m.shape} != ({space.n}, {len(self.keys)})")
        self.matrix = m
        self.unit_norm = unit_norm
        self._gram = None
        if check and unit_norm:
            err = self.norm_error()
            if err > NORM_TOL:
                raise NormError(f"map claims unit norm but deviates by {err:.3g}", stage="feature_map")

    def __repr__(self):
        return f"FeatureMap({self.space.n} points, {len(self.keys)} keys, nnz={self.matrix.nnz})"

    @classmethod
    def from_rows(cls, space, rows, unit_norm=True, check=True):
        """Build from one ``{key: value}`` dict per point (keys in first-seen order)."""
        col = {}
        r_idx, c_idx, vals = [], [], []
        for x, row in enumerate(rows):
            for key, v in row.items():
                key = tuple(key) if isinstance(key, (tuple, list)) else (key,)
                j = col.setdefault(key, len(col))
                r_idx.append(x)
                c_idx.append(j)
                vals.append(float(v))
        m = sp.csr_matrix((vals, (r_idx, c_idx)), shape=(space.n, len(col)))
        return cls(space, list(col), m, unit_norm=unit_norm, check=check)

    def row(self, x):
        s = self.matrix.getrow(x)
        return {self.keys[j]: float(v) for j, v in zip(s.indices, s.data)}

    def norms(self):
        return np.sqrt(np.asarray(self.matrix.multiply(self.matrix).sum(axis=1)).ravel())

    def norm_error(self):
        return float(np.abs(self.norms() - 1.0).max()) if self.space.n else 0.0

    def gram(self):
        if self._gram is None:
            g = (self.matrix @ self.matrix.T).toarray()
            g.flags.writeable = False
            self._gram = g
        return self._gram

    def inner(self, x, y):
        return float(self.matrix.getrow(x).multiply(self.matrix.getrow(y)).sum())

    def diff_norms(self, xs, ys, chunk=50_000):
        """``||F(x) - F(y)||`` from explicit row differences (no cancellation)."""
        out = np.empty(len(xs))
        for s in range(0, len(xs), chunk):
            d = self.matrix[xs[s : s + chunk]] - self.matrix[ys[s : s + chunk]]
            out[s : s + chunk] = np.sqrt(np.asarray(d.multiply(d).sum(axis=1)).ravel())
        return out

    def pullback(self, domain: FiniteMetricSpace, p):
        """The map ``x -> F(p(x))`` on ``domain``; p gives positions in this space."""
        p = np.asarray(p, dtype=np.intp)
        return FeatureMap(domain, self.keys, self.matrix[p], unit_norm=self.unit_norm, check=False)

    def restrict(self, sub: FiniteMetricSpace):
        return self.pullback(sub, sub.positions_in(self.space))

    def prefixed(self, prefix):
        prefix = tuple(prefix)
        return FeatureMap(self.space, [prefix + k for k in self.keys], self.matrix, self.unit_norm, check=False)


# ---------------------------------------------------------------- simple maps


def constant_map(space, key=("const",)):
    m = sp.csr_matrix(np.ones((space.n, 1)))
    return FeatureMap(space, [tuple(key)], m)


def orthonormal_map(space):
    """``x -> e_x``."""
    return FeatureMap(space, [(lab,) for lab in space.labels], sp.identity(space.n, format="csr"))


def interval_indicator_map(space, coords, T, prefix=()):
    """``x -> T^{-1/2} 1_{[c(x), c(x)+T)}`` for integer coordinates c(x).

    The indicator coordinates are merged into the common refinement of all
    the intervals involved, one key per maximal run ``[a, b)``, with value
    ``sqrt((b - a)/T)``. Inner products are unchanged by the merge:
    ``<F(x), F(y)> = max(0, T - |c(x) - c(y)|) / T``.
    """
    coords = np.asarray(coords, dtype=np.int64)
    T = int(T)
    if T < 1:
        raise InputError("interval width T must be >= 1")
    cuts = np.unique(np.concatenate([coords, coords + T]))
    keys = [tuple(prefix) + ("I", int(a), int(b)) for a, b in zip(cuts[:-1], cuts[1:])]
    weights = np.sqrt((cuts[1:] - cuts[:-1]) / T)
    start = np.searchsorted(cuts, coords)
    stop = np.searchsorted(cuts, coords + T)
    r_idx = np.repeat(np.arange(space.n), stop - start)
    c_idx = np.concatenate([np.arange(a, b) for a, b in zip(start, stop)]) if space.n else np.zeros(0, int)
    m = sp.csr_matrix((weights[c_idx], (r_idx, c_idx)), shape=(space.n, len(keys)))
    return FeatureMap(space, keys, m)


def interval_width(R, eps):
    """Width giving ``||F(x)-F(y)|| <= eps/sqrt(2)`` on pairs ``|c(x)-c(y)| <= R``."""
    return 2 * math.ceil(2 * R / eps**2)


def coordinate_map(space, coords):
    """Non-normalised map ``x -> c(x) e_0`` (an isometry for the line)."""
    c = np.asarray(coords, dtype=float).reshape(-1, 1)
    return FeatureMap(space, [("coord",)], sp.csr_matrix(c), unit_norm=False, check=False)


# ---------------------------------------------------------------- profiles


def _pair_arrays(space, members=None):
    """Upper-triangle (incl. diagonal) pair indices restricted to ``members``."""
    idx = np.arange(space.n) if members is None else np.asarray(members, dtype=np.intp)
    a, b = np.triu_indices(len(idx))
    return idx[a], idx[b]


def decay_profile(fm: FeatureMap, members=None):
    """``S -> sup{|<F(x),F(y)>| : d(x,y) >= S}`` at every realised distance S.

    Returns ``(distances, values)``; values are a suffix maximum, so they
    never increase with S.
    """
    xs, ys = _pair_arrays(fm.space, members)
    g = np.abs(fm.gram()[xs, ys])
    d = fm.space.dist[xs, ys]
    order = np.argsort(d, kind="stable")
    d, g = d[order], g[order]
    dist, start = np.unique(d, return_index=True)
    block_max = np.maximum.reduceat(g, start)
    suffix = np.maximum.accumulate(block_max[::-1])[::-1]
    return dist, suffix


def evaluate_decay(dist, values, S):
    """Evaluate a decay profile at arbitrary S (0 beyond the largest distance)."""
    j = np.searchsorted(dist, np.asarray(S, dtype=float), side="left")
    return np.append(values, 0.0)[j]


def _is_nonincreasing(values):
    return bool(np.all(np.diff(values) <= 0))


@dataclass
class UECertificate:
    R: float
    eps: float
    max_close_diff: float
    witness: Optional[tuple]
    condition_i: bool
    decay_distances: list
    decay_values: list
    decay_nonincreasing: bool
    n_close_pairs: int

    def decay_at(self, S):
        return float(evaluate_decay(np.array(self.decay_distances), np.array(self.decay_values), np.array(S)))


def _require_unit(fm, stage):
    if not fm.unit_norm:
        raise NormError("map is not unit-norm", stage=stage)
    err = fm.norm_error()
    if err > NORM_TOL:
        raise NormError(f"map deviates from unit norm by {err:.3g}", stage=stage)


def max_close_diff(fm: FeatureMap, R):
    xs, ys = close_pairs(fm.space, R)
    if len(xs) == 0:
        return 0.0, None, 0
    d = fm.diff_norms(xs, ys)
    j = int(np.argmax(d))
    return float(d[j]), (fm.space.labels[xs[j]], fm.space.labels[ys[j]]), len(xs)


def check_char_ue(fm: FeatureMap, R, eps) -> UECertificate:
    """Condition (i) (``||F(x)-F(y)|| <= eps`` when ``d <= R``) and the full
    decay profile standing in for condition (ii) on a finite space."""
    _require_unit(fm, "check_char_ue")
    mcd, witness, npairs = max_close_diff(fm, R)
    dist, vals = decay_profile(fm)
    return UECertificate(
        R=float(R),
        eps=float(eps),
        max_close_diff=mcd,
        witness=witness,
        condition_i=mcd <= eps,
        decay_distances=dist.tolist(),
        decay_values=vals.tolist(),
        decay_nonincreasing=_is_nonincreasing(vals),
        n_close_pairs=npairs,
    )


@dataclass
class EquiCertificate:
    R: float
    eps: float
    max_close_diff: float
    worst_member: Optional[int]
    member_close_diffs: list
    condition_i: bool
    decay_distances: list
    decay_values: list


def check_equi(family, R, eps) -> EquiCertificate:
    """Family version of `check_char_ue`: sups are taken across members.

    ``family`` is a sequence of unit-norm FeatureMaps (each on its own
    subspace). The shared decay profile is the pointwise sup of the member
    profiles over the union of realised distances.
    """
    diffs, profiles = [], []
    for m, fm in enumerate(family):
        try:
            _require_unit(fm, "check_equi")
        except NormError as exc:
            raise NormError(f"member {m}: {exc}", stage="check_equi", witness=m) from None
        diffs.append(max_close_diff(fm, R)[0])
        profiles.append(decay_profile(fm))
    grid = np.unique(np.concatenate([d for d, _ in profiles]))
    combined = np.zeros(len(grid))
    for d, v in profiles:
        combined = np.maximum(combined, evaluate_decay(d, v, grid))
    worst = int(np.argmax(diffs)) if diffs else None
    mcd = max(diffs) if diffs else 0.0
    return EquiCertificate(
        R=float(R),
        eps=float(eps),
        max_close_diff=mcd,
        worst_member=worst,
        member_close_diffs=diffs,
        condition_i=mcd <= eps,
        decay_distances=grid.tolist(),
        decay_values=combined.tolist(),
    )


# ---------------------------------------------------------------- sqrt lift


@dataclass
class LiftReport:
    max_sq_excess: float
    orthogonality_checked: bool
    orthogonal_beyond: Optional[float]
    orthogonality_ok: bool
    coverage_orthogonality_ok: bool


def sqrt_lift(pou: PartitionOfUnity):
    """``x -> (phi_i(x)^{1/2})_i`` in l2 of the index set.

    Certifies ``||F(x)-F(y)||^2 <= sum_i |phi_i(x) - phi_i(y)|`` on all
    pairs and, for a subordinated partition, exact orthogonality of pairs
    further apart than the largest set diameter and of pairs sharing no set.
    """
    space = pou.space
    fm = FeatureMap(space, [(i,) for i in pou.index], sp.csr_matrix(np.sqrt(pou.point_major())))
    xs, ys = np.triu_indices(space.n, k=1)
    excess = -INF
    if len(xs):
        sq = fm.diff_norms(xs, ys) ** 2
        excess = float((sq - pou.variations(xs, ys)).max())
    if excess > LIP_TOL:
        raise CertificateError("sqrt lift violates |a^1/2-b^1/2|^2 <= |a-b|", stage="sqrt_lift")
    cover = pou.subordinate_to
    if cover is None:
        return fm, LiftReport(max(excess, 0.0), False, None, True, True)
    g = fm.gram()
    diam = max(set_diameter(space, cover[i]) for i in cover.indices)
    far = space.dist > diam
    ortho_ok = bool(np.all(g[far] == 0))
    mem = cover.membership().astype(np.int32)
    shared = (mem.T @ mem) > 0
    cov_ok = bool(np.all(g[~shared] == 0))
    if not (ortho_ok and cov_ok):
        raise CertificateError("sqrt lift not orthogonal where supports are disjoint", stage="sqrt_lift")
    return fm, LiftReport(max(excess, 0.0), True, diam, ortho_ok, cov_ok)


# ---------------------------------------------------------------- gluing


@dataclass
class GlueReport:
    R: float
    eps: Optional[float]
    alpha_max: float
    beta_max: float
    unit_norm_error: float
    pou_variation: float
    triangle_split_ok: bool
    beta_variation_ok: bool
    decay_transfer_ok: bool
    pieces_used: list
    pieces_renormalized: list
    certificate: UECertificate
    passed: bool = True


def _piece_positions(piece, space, i):
    try:
        return piece.space.positions_in(space)
    except InputError:
        raise InputError(f"piece {i!r} is not defined on a subspace of the partition's space") from None


def glue(pou: PartitionOfUnity, pieces: Mapping[Hashable, FeatureMap], R, eps=None):
    """Glue unit-norm piece maps with a partition of unity.

    ``eta(x) = (phi_i(x)^{1/2} xi_i(x))_i`` with the coordinates of piece i
    prefixed by ``(i,)``. Piece i must be defined at least on ``U_i(R)``
    (``U_i`` the subordinated set, else the support of ``phi_i``); pieces
    for indices with ``phi_i == 0`` may be omitted.

    Returns ``(eta, GlueReport)``. With ``eps`` given, ``||eta(x)-eta(y)||
    <= eps`` on R-close pairs is a hard requirement.
    """
    space = pou.space
    n = space.n
    R = float(R)
    cover = pou.subordinate_to
    used, renormalized = [], []
    blocks, keys = [], []
    local = {}
    for i in pou.index:
        phi = pou[i]
        if not phi.any():
            continue
        if i not in pieces:
            raise InputError(f"missing piece for index {i!r}")
        piece = pieces[i]
        pos = _piece_positions(piece, space, i)
        if cover is not None:
            base = cover[i]
        else:
            base = np.flatnonzero(phi > 0)
        need = np.flatnonzero(space.distance_to_set(base) <= R)
        inside = np.zeros(n, dtype=bool)
        inside[pos] = True
        if not inside[need].all():
            miss = space.labels[int(need[~inside[need]][0])]
            raise InputError(f"piece {i!r} not defined on U_i(R); missing {miss!r}")
        norms = piece.norms()
        dev = float(np.abs(norms - 1.0).max())
        m = piece.matrix
        if dev > RENORM_TOL:
            raise NormError(f"piece {i!r} deviates from unit norm by {dev:.3g}", stage="glue", witness=i)
        if dev > NORM_TOL:
            warnings.warn(f"piece {i!r} renormalised (norm deviation {dev:.3g})", RuntimeWarning, stacklevel=2)
            m = sp.diags(1.0 / norms) @ m
            renormalized.append(i)
        lookup = np.full(n, -1, dtype=np.intp)
        lookup[pos] = np.arange(len(pos))
        local[i] = (lookup, sp.csr_matrix(m))
        select = sp.csr_matrix((np.sqrt(phi[pos]), (pos, np.arange(len(pos)))), shape=(n, len(pos)))
        blocks.append(select @ m)
        keys.extend((i,) + k for k in piece.keys)
        used.append(i)
    eta = FeatureMap(space, keys, sp.hstack(blocks, format="csr"), unit_norm=True, check=False)
    unit_err = eta.norm_error()
    if unit_err > NORM_TOL:
        raise NormError(f"glued map deviates from unit norm by {unit_err:.3g}", stage="glue")

    xs, ys = close_pairs(space, R)
    ox = np.concatenate([xs, ys])
    oy = np.concatenate([ys, xs])
    alpha_sq = np.zeros(len(ox))
    beta_sq = np.zeros(len(ox))
    for i in used:
        lookup, m = local[i]
        phi = pou[i]
        root = np.sqrt(phi)
        act = np.flatnonzero(phi[ox] > 0)
        if len(act):
            d = m[lookup[ox[act]]] - m[lookup[oy[act]]]
            alpha_sq[act] += phi[ox[act]] * np.asarray(d.multiply(d).sum(axis=1)).ravel()
        ydef = lookup[oy] >= 0
        beta_sq[ydef] += (root[ox[ydef]] - root[oy[ydef]]) ** 2
    alpha = np.sqrt(alpha_sq)
    beta = np.sqrt(beta_sq)
    diffs = eta.diff_norms(ox, oy) if len(ox) else np.zeros(0)
    split_ok = bool(np.all(diffs <= alpha + beta + LIP_TOL))
    var = pou.variations(xs, ys) if len(xs) else np.zeros(0)
    pou_var = float(var.max()) if len(var) else 0.0
    beta_ok = bool(np.all(beta_sq <= np.concatenate([var, var]) + LIP_TOL)) if len(var) else True

    # decay transfer: |<eta(x),eta(y)>| <= max_i sup over piece pairs in U_i at distance >= d(x,y)
    profiles = []
    for i in used:
        lookup, _ = local[i]
        base = cover[i] if cover is not None else np.flatnonzero(pou[i] > 0)
        sub = space.subspace(base)
        restricted = FeatureMap(sub, pieces[i].keys, local[i][1][lookup[base]], check=False)
        profiles.append(decay_profile(restricted))
    ex, ey = np.triu_indices(n)
    dxy = space.dist[ex, ey]
    bound = np.zeros(len(ex))
    for d, v in profiles:
        bound = np.maximum(bound, evaluate_decay(d, v, dxy))
    decay_ok = bool(np.all(np.abs(eta.gram()[ex, ey]) <= bound + LIP_TOL))

    cert = check_char_ue(eta, R, INF if eps is None else eps)
    report = GlueReport(
        R=R,
        eps=None if eps is None else float(eps),
        alpha_max=float(alpha.max()) if len(alpha) else 0.0,
        beta_max=float(beta.max()) if len(beta) else 0.0,
        unit_norm_error=unit_err,
        pou_variation=pou_var,
        triangle_split_ok=split_ok,
        beta_variation_ok=beta_ok,
        decay_transfer_ok=decay_ok,
        pieces_used=list(used),
        pieces_renormalized=renormalized,
        certificate=cert,
    )
    report.passed = split_ok and beta_ok and decay_ok and (eps is None or cert.max_close_diff <= eps)
    if not report.passed:
        raise CertificateError(
            "glue certificate failed",
            stage="glue",
            witness=cert.witness,
            details={
                "triangle_split_ok": split_ok,
                "beta_variation_ok": beta_ok,
                "decay_transfer_ok": decay_ok,
                "max_close_diff": cert.max_close_diff,
            },
        )
    return eta, report


# ---------------------------------------------------------------- Property A


class PropertyAWitness:
    """Nonnegative l1-normalised ``x -> xi_x`` with ``supp xi_x`` inside ``B(x, S)``.

    ``vectors[x, z]`` is ``xi_x(z)``.
    """

    def __init__(self, space, vectors, S):
        v = np.array(vectors, dtype=float)
        if v.shape != (space.n, space.n):
            raise InputError("witness must be an (n, n) array")
        if v.size and v.min() < 0:
            x, z = np.argwhere(v < 0)[0]
            raise CertificateError(
                "negative witness entry", stage="property_a", witness=(space.labels[x], space.labels[z])
            )
        err = np.abs(v.sum(axis=1) - 1.0)
        if err.size and err.max() > NORM_TOL:
            x = int(np.argmax(err))
            raise CertificateError(
                f"xi_x not l1-normalised (error {err[x]:.3g})", stage="property_a", witness=space.labels[x]
            )
        leak = (v > 0) & (space.dist > S)
        if leak.any():
            x, z = np.argwhere(leak)[0]
            raise CertificateError(
                f"support leak: xi_{space.labels[x]} charges {space.labels[z]} at distance {space.dist[x, z]:g} > S={S:g}",
                stage="property_a",
                witness=(space.labels[x], space.labels[z]),
            )
        v.flags.writeable = False
        self.space = space
        self.vectors = np.ascontiguousarray(v)
        self.S = float(S)

    def l1_distance(self, x, y):
        return float(l1_rows(self.vectors, np.array([x]), np.array([y]))[0])


def ball_witness(space, radius):
    """Uniform probability on ``B(x, radius)`` (truncated balls renormalised)."""
    inside = (space.dist <= radius).astype(float)
    return PropertyAWitness(space, inside / inside.sum(axis=1, keepdims=True), radius)


def delta_witness(space):
    return PropertyAWitness(space, np.eye(space.n), 0.0)


@dataclass
class PropertyACertificate:
    R: float
    eps: float
    S: float
    max_l1_diff: float
    witness: Optional[tuple]
    condition_i: bool
    measured_support_radius: float
    condition_ii: bool


def check_property_a(w: PropertyAWitness, R, eps) -> PropertyACertificate:
    space = w.space
    xs, ys = close_pairs(space, R)
    if len(xs):
        d = l1_rows(w.vectors, xs, ys)
        j = int(np.argmax(d))
        mx, witness = float(d[j]), (space.labels[xs[j]], space.labels[ys[j]])
    else:
        mx, witness = 0.0, None
    charged = w.vectors > 0
    radius = float(space.dist[charged].max()) if charged.any() else 0.0
    return PropertyACertificate(
        R=float(R),
        eps=float(eps),
        S=w.S,
        max_l1_diff=mx,
        witness=witness,
        condition_i=mx <= eps,
        measured_support_radius=radius,
        condition_ii=radius <= w.S,
    )


def pa_to_pou(w: PropertyAWitness) -> PartitionOfUnity:
    """``phi_z(x) = xi_x(z)``, subordinated to ``U_z = {x : phi_z(x) > 0}``.

    Every point z keeps its function, so the partition's l1 variation is
    computed on exactly the witness array. A function that vanishes
    everywhere is attached to ``U_z = {z}``.
    """
    from .metric import Cover

    space = w.space
    values = w.vectors.T
    sets = {}
    for z in range(space.n):
        supp = np.flatnonzero(values[z] > 0)
        if supp.size == 0:
            supp = np.array([z])
        elif space.dist[z, supp].max() > w.S:
            raise CertificateError("U_z escapes B(z, S)", stage="pa_to_pou", witness=space.labels[z])
        sets[space.labels[z]] = supp
    cover = Cover(space, sets)
    pou = PartitionOfUnity(space, space.labels, values, cover, {"kind": "property_a", "S": w.S})
    return pou


# ---------------------------------------------------------------- compression


@dataclass
class CompressionProfile:
    buckets: list
    rho_minus: list
    rho_plus: list
    decay_sup: Optional[list]
    exhaustive: bool
    n_pairs: int
    seed: Optional[int] = None

    def lower_envelope_nondecreasing(self):
        return bool(np.all(np.diff(self.rho_minus) >= -1e-12))

    def rows(self):
        decay = self.decay_sup or [None] * len(self.buckets)
        return list(zip(self.buckets, self.rho_minus, self.rho_plus, decay))


def compression_profile(fm: FeatureMap, exhaustive_limit=EXHAUSTIVE_LIMIT, n_samples=DEFAULT_SAMPLES, seed=None):
    """Per-distance min/max of ``||F(x) - F(y)||`` over pairs x != y.

    Exhaustive up to ``exhaustive_limit`` points, otherwise over
    ``n_samples`` uniformly drawn pairs from a seeded generator.
    """
    space = fm.space
    n = space.n
    if n <= exhaustive_limit:
        xs, ys = np.triu_indices(n, k=1)
        used_seed = None
        exhaustive = True
    else:
        used_seed = default_seed() if seed is None else int(seed)
        rng = np.random.default_rng(used_seed)
        xs = rng.integers(0, n, n_samples)
        ys = rng.integers(0, n, n_samples)
        keep = xs != ys
        xs, ys = xs[keep], ys[keep]
        exhaustive = False
    if len(xs) == 0:
        return CompressionProfile([], [], [], [] if fm.unit_norm else None, exhaustive, 0, used_seed)
    if exhaustive:
        g = fm.gram()
        sq = np.diag(g)[xs] + np.diag(g)[ys] - 2 * g[xs, ys]
        norms = np.sqrt(np.clip(sq, 0, None))
    else:
        norms = fm.diff_norms(xs, ys)
    d = space.dist[xs, ys]
    order = np.argsort(d, kind="stable")
    d, norms = d[order], norms[order]
    buckets, start = np.unique(d, return_index=True)
    lo = np.minimum.reduceat(norms, start)
    hi = np.maximum.reduceat(norms, start)
    decay = None
    if fm.unit_norm and exhaustive:
        dd, dv = decay_profile(fm)
        decay = evaluate_decay(dd, dv, buckets).tolist()
    return CompressionProfile(
        buckets=buckets.tolist(),
        rho_minus=lo.tolist(),
        rho_plus=hi.tolist(),
        decay_sup=decay,
        exhaustive=exhaustive,
        n_pairs=int(len(xs)),
        seed=used_seed,
    )
