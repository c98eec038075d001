import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coarseglue.errors import CertificateError, InfeasibleParameters
from coarseglue.metric import Cover, check_separated, enlarge_cover, grid_space, integer_space, line_space
from coarseglue.partition import (
    PartitionOfUnity,
    choose_parameters,
    lipschitz_check,
    max_variation,
    minimal_separation,
    pou_from_cover,
    product_refine,
    pullback_pou,
    separated_cover_pipeline,
    variation_certificate,
)


def test_line10_values(line10, line10_cover):
    pou = pou_from_cover(line10_cover)
    assert pou.value(0, 5) == 0.5
    assert pou.value(0, 4) == 0.75
    assert pou.value(1, 4) == 0.25
    assert pou.value(0, 9) == 0.0
    assert pou.sum_error() == 0.0


def test_line10_pair_variation(line10_cover):
    pou = pou_from_cover(line10_cover)
    v = pou.variations(np.array([4]), np.array([5]))[0]
    assert v == pytest.approx(0.5, abs=1e-15)
    cert = variation_certificate(pou, 1)
    assert cert.max_variation == pytest.approx(0.5)
    # family bound (2k+2)(2k+3)/L with k=1, L=2
    assert cert.lipschitz["family_lip_constant"] == 10


def test_full_set_indicator(line10):
    cover = Cover(line10, {"a": range(4), "b": range(10), "c": range(10)})
    pou = pou_from_cover(cover)
    assert np.array_equal(pou["b"], np.ones(10))
    assert not pou["c"].any()


def test_origin_records_cover_constants(line10_cover):
    pou = pou_from_cover(line10_cover)
    assert pou.origin["k"] == 1
    assert pou.origin["L"] == 2


def test_subordination_is_exact(line10, line10_cover):
    good = pou_from_cover(line10_cover).values
    bad = good.copy()
    # point 0 lies outside U_1; even a denormal there is a leak
    bad[1, 0] = 1e-300
    bad[0, 0] = 1.0 - 1e-300
    with pytest.raises(CertificateError) as exc:
        PartitionOfUnity(line10, [0, 1], bad, line10_cover)
    assert exc.value.witness == [1, "0"]


def test_sum_check_rejects():
    space = line_space(3)
    with pytest.raises(CertificateError):
        PartitionOfUnity(space, [0], [[1.0, 0.5, 1.0]])


def test_product_refinement_line10(line10, line10_cover):
    outer = pou_from_cover(line10_cover)
    big = enlarge_cover(line10_cover, 1)
    inners = {}
    for i in big.indices:
        sub = line10.subspace(big[i])
        sets = {j: range(j, min(j + 2, sub.n)) for j in range(0, sub.n, 1) if j < sub.n - 1}
        inners[i] = pou_from_cover(Cover(sub, sets))
    theta, rep = product_refine(outer, inners, 1)
    assert theta.sum_error() <= 1e-12
    diam = max(float(line10.dist[np.ix_(theta.subordinate_to[i], theta.subordinate_to[i])].max()) for i in theta.index)
    assert diam <= 2
    assert rep.max_variation <= rep.outer_variation + rep.inner_variation + 1e-12
    assert rep.split_ok


def test_product_requires_enlarged_domain(line10, line10_cover):
    outer = pou_from_cover(line10_cover)
    inners = {i: pou_from_cover(Cover(line10.subspace(line10_cover[i]), {0: range(len(line10_cover[i]))})) for i in (0, 1)}
    with pytest.raises(CertificateError):
        product_refine(outer, inners, 1)


def test_pullback_word_to_relative(fab3):
    XS = fab3.metric("s")
    XR = fab3.metric("rel")
    members = {}
    for i, g in enumerate(fab3.elements):
        members.setdefault(len(g) // 2, []).append(i)
    big = enlarge_cover(Cover(XR, members), 1)
    pou = pou_from_cover(big)
    pulled, rep = pullback_pou(pou, XS, np.arange(len(fab3)), S=1, R=1)
    assert rep.passed
    assert rep.variation_domain <= rep.variation_target + 1e-12
    assert rep.max_image_distance <= 1


def test_pullback_rejects_non_bornologous():
    X = line_space(5)
    Y = integer_space([0, 10, 20, 30, 40])
    pou = pou_from_cover(Cover(Y, {0: range(5)}))
    with pytest.raises(CertificateError):
        pullback_pou(pou, X, np.arange(5), S=5, R=1)


def test_parameter_choice():
    pc = choose_parameters(2, 0.5, k_max=10000)
    assert pc.delta == 1 / 80
    assert pc.claim_holds
    assert pc.feasible(0, 80 / 0.5)
    assert not pc.feasible(3, 1)


def test_minimal_separation():
    assert minimal_separation(1, 1, 1) == 20


def test_separated_pipeline_feasible():
    space = integer_space(list(range(10)) + list(range(100, 110)))
    cover = Cover(space, {0: range(10), 1: range(10, 20)})
    sep = check_separated(cover, 0, 80, {0: 0, 1: 0})
    pou, cert, stats = separated_cover_pipeline(sep, 1, 0.15)
    assert cert.bound_claimed == pytest.approx(0.15)
    assert cert.max_variation <= 0.15


def test_separated_pipeline_names_minimal_L():
    space = integer_space(list(range(10)) + list(range(100, 110)))
    cover = Cover(space, {0: range(10), 1: range(10, 20)})
    sep = check_separated(cover, 0, 40, {0: 0, 1: 0})
    with pytest.raises(InfeasibleParameters) as exc:
        separated_cover_pipeline(sep, 1, 0.15)
    assert exc.value.details["minimal_L"] == pytest.approx(40)


def _random_cover(draw, space):
    n = space.n
    k = draw(st.integers(1, 4))
    sets = {}
    for j in range(k):
        centre = draw(st.integers(0, n - 1))
        radius = draw(st.integers(0, 4))
        sets[j] = np.flatnonzero(space.dist[centre] <= radius)
    covered = np.zeros(n, dtype=bool)
    for s in sets.values():
        covered[s] = True
    if not covered.all():
        sets[k] = np.flatnonzero(~covered)
    return Cover(space, sets)


@st.composite
def spaces_with_covers(draw):
    if draw(st.booleans()):
        space = line_space(draw(st.integers(3, 30)))
    else:
        space = grid_space(draw(st.integers(2, 6)), draw(st.integers(2, 6)))
    return space, _random_cover(draw, space)


@settings(max_examples=60, deadline=None)
@given(spaces_with_covers())
def test_partition_axioms_and_lipschitz(sc):
    space, cover = sc
    pou = pou_from_cover(cover)
    assert pou.sum_error() <= 1e-9
    mem = cover.membership()
    assert not np.any((pou.values > 0) & ~mem)
    k, L = pou.origin["k"], pou.origin["L"]
    if math.isfinite(L):
        res = lipschitz_check(pou, k, L)
        assert res["index_lip_ok"] and res["family_lip_ok"]


@settings(max_examples=40, deadline=None)
@given(spaces_with_covers(), st.integers(1, 4))
def test_variation_is_monotone_in_R(sc, R):
    space, cover = sc
    pou = pou_from_cover(cover)
    assert max_variation(pou, R)[0] <= max_variation(pou, R + 1)[0] + 1e-15
