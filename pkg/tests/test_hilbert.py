import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from coarseglue.errors import CertificateError, InputError, NormError
from coarseglue.hilbert import (
    FeatureMap,
    PropertyAWitness,
    ball_witness,
    check_char_ue,
    check_equi,
    check_property_a,
    compression_profile,
    constant_map,
    decay_profile,
    delta_witness,
    evaluate_decay,
    glue,
    interval_indicator_map,
    interval_width,
    max_close_diff,
    orthonormal_map,
    pa_to_pou,
    sqrt_lift,
)
from coarseglue.metric import Cover, integer_space, line_space
from coarseglue.partition import max_variation, pou_from_cover


def test_constant_map_certificate(line10):
    cert = check_char_ue(constant_map(line10), 1, 0.1)
    assert cert.condition_i
    assert cert.max_close_diff == 0
    assert all(v == 1 for v in cert.decay_values)


def test_orthonormal_map_certificate(line10):
    cert = check_char_ue(orthonormal_map(line10), 1, 0.1)
    assert cert.max_close_diff == pytest.approx(math.sqrt(2))
    assert not cert.condition_i
    assert cert.decay_values[0] == 1
    assert all(v == 0 for v in cert.decay_values[1:])


def test_interval_map_closed_form():
    space = integer_space(range(0, 401))
    T = 200
    fm = interval_indicator_map(space, range(0, 401), T)
    xs = np.array([0, 0, 10, 100, 50])
    ys = np.array([1, 37, 210, 300, 249])
    got = fm.diff_norms(xs, ys) ** 2
    want = 2 * np.abs(xs - ys) / T
    assert np.allclose(got, want, atol=1e-12)
    dist, vals = decay_profile(fm)
    assert evaluate_decay(dist, vals, T) == 0
    assert evaluate_decay(dist, vals, T - 1) == pytest.approx(1 / T)


def test_interval_compression_matches_raw_indicators():
    coords = [0, 3, 5, 12]
    space = integer_space(coords)
    T = 7
    fm = interval_indicator_map(space, coords, T)
    raw = np.zeros((4, 30))
    for r, c in enumerate(coords):
        raw[r, c : c + T] = 1 / math.sqrt(T)
    assert np.allclose(fm.gram(), raw @ raw.T, atol=1e-14)


def test_interval_width():
    assert interval_width(2, 0.5) == 32
    fm = interval_indicator_map(line_space(50), range(50), interval_width(2, 0.5))
    assert max_close_diff(fm, 2)[0] <= 0.5 / math.sqrt(2) + 1e-12


def test_sqrt_lift_orthogonal_far(line10_cover):
    fm, rep = sqrt_lift(pou_from_cover(line10_cover))
    assert fm.inner(0, 9) == 0
    assert rep.orthogonality_ok
    assert rep.orthogonal_beyond == 6


def _glue_setup(R, eps):
    space = line_space(600)
    cover = Cover(space, {0: range(0, 400), 1: range(143, 600)})
    pou = pou_from_cover(cover)
    pieces = {}
    for i, shift in ((0, 0), (1, 1000)):
        T = interval_width(R, eps / 2)
        pieces[i] = interval_indicator_map(space, np.arange(600) + shift, T + 2 * i)
    return pou, pieces


def test_glue_line():
    pou, pieces = _glue_setup(2, 0.25)
    assert max_variation(pou, 2)[0] <= 0.25**2 / 4
    eta, rep = glue(pou, pieces, 2, 0.25)
    assert eta.norm_error() <= 1e-9
    assert rep.certificate.max_close_diff <= 0.25
    assert rep.certificate.max_close_diff <= rep.alpha_max + rep.beta_max + 1e-12
    assert rep.triangle_split_ok and rep.beta_variation_ok and rep.decay_transfer_ok


def test_glue_rejects_non_unit_piece(line10, line10_cover):
    pou = pou_from_cover(line10_cover)
    bad = FeatureMap(line10, [("x",)], sp.csr_matrix(np.full((10, 1), 0.9)), unit_norm=True, check=False)
    with pytest.raises(NormError):
        glue(pou, {0: bad, 1: constant_map(line10)}, 1)


def test_glue_renormalises_small_drift(line10, line10_cover):
    pou = pou_from_cover(line10_cover)
    near = FeatureMap(line10, [("x",)], sp.csr_matrix(np.full((10, 1), 1 + 1e-8)), check=False)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        eta, rep = glue(pou, {0: near, 1: constant_map(line10)}, 1)
    assert rep.pieces_renormalized == [0]
    assert any("renormalised" in str(x.message) for x in w)
    assert eta.norm_error() <= 1e-12


def test_glue_requires_enlarged_domain(line10, line10_cover):
    pou = pou_from_cover(line10_cover)
    short = constant_map(line10.subspace(line10_cover[0]))
    with pytest.raises(InputError):
        glue(pou, {0: short, 1: constant_map(line10)}, 1)


def test_ball_witness_l1_closed_form():
    space = integer_space(range(-30, 31))
    w = ball_witness(space, 10)
    got = w.l1_distance(space.index("0"), space.index("3"))
    assert got == pytest.approx(float(Fraction(6, 21)), abs=1e-15)


def test_property_a_certificate():
    space = integer_space(range(-30, 31))
    cert = check_property_a(ball_witness(space, 10), 3, 0.5)
    assert cert.condition_i and cert.condition_ii
    # truncated balls at the window edge: |B(27)| = 14, |B(30)| = 11
    assert cert.max_l1_diff == pytest.approx(3 / 7)
    assert cert.measured_support_radius == 10


def test_witness_validation():
    space = line_space(4)
    with pytest.raises(CertificateError):
        PropertyAWitness(space, np.full((4, 4), 0.2), 5)
    with pytest.raises(CertificateError) as exc:
        PropertyAWitness(space, np.full((4, 4), 0.25), 1)
    assert exc.value.stage == "property_a"


def test_pa_to_pou_variation():
    space = integer_space(range(-30, 31))
    pou = pa_to_pou(ball_witness(space, 10))
    i0, i3 = space.index("0"), space.index("3")
    v = pou.variations(np.array([i0]), np.array([i3]))[0]
    assert v == pytest.approx(2 / 7, abs=1e-15)
    for z in pou.index:
        members = pou.subordinate_to[z]
        assert space.dist[space.index(z), members].max() <= 10


def test_delta_witness_pou():
    space = line_space(5)
    pou = pa_to_pou(delta_witness(space))
    assert np.array_equal(pou.values, np.eye(5))


def test_constant_profile_is_zero(line10):
    prof = compression_profile(constant_map(line10))
    assert all(v == 0 for v in prof.rho_minus + prof.rho_plus)
    assert prof.exhaustive


def test_sampled_profile_is_seeded():
    space = line_space(30)
    fm = interval_indicator_map(space, range(30), 16)
    a = compression_profile(fm, exhaustive_limit=10, n_samples=500, seed=7)
    b = compression_profile(fm, exhaustive_limit=10, n_samples=500, seed=7)
    assert not a.exhaustive
    assert a == b
    assert all(lo <= hi for lo, hi in zip(a.rho_minus, a.rho_plus))


def test_seed_env_override(monkeypatch):
    from coarseglue.hilbert import default_seed

    monkeypatch.setenv("COARSEGLUE_SEED", "123")
    assert default_seed() == 123


def test_equi_cosets_match_integer_closed_form(fab3):
    XS = fab3.metric("s")
    T = 8
    family = []
    for j in range(-3, 4):
        rep = fab3.group.element([(1, j)])
        members = [i for i, g in enumerate(fab3.elements) if fab3.group.strip(g, 0) == rep]
        coords = [0 if fab3.elements[i] == rep else fab3.elements[i][-1][1] for i in members]
        family.append(interval_indicator_map(XS.subspace(members), coords, T))
    cert = check_equi(family, 1, 1)
    for d, v in zip(cert.decay_distances, cert.decay_values):
        assert v == pytest.approx(max(0.0, 1 - d / T))
    assert cert.max_close_diff == pytest.approx(math.sqrt(2 / T))


@settings(max_examples=30, deadline=None)
@given(
    coords=st.lists(st.integers(-50, 50), min_size=2, max_size=15, unique=True),
    T=st.integers(1, 40),
)
def test_interval_inner_products(coords, T):
    space = integer_space(coords)
    fm = interval_indicator_map(space, coords, T)
    c = np.array(coords)
    want = np.maximum(0, T - np.abs(c[:, None] - c[None, :])) / T
    assert np.allclose(fm.gram(), want, atol=1e-12)
    assert fm.norm_error() <= 1e-12
