import json

import numpy as np
import pytest

from coarseglue import fileio
from coarseglue.errors import InputError, MetricAxiomError
from coarseglue.hilbert import glue, interval_indicator_map, sqrt_lift
from coarseglue.metric import Cover, grid_space, line_space
from coarseglue.partition import pou_from_cover


def test_space_roundtrip(tmp_path):
    g = grid_space(3, 3)
    for name in ("g.csv", "g.json"):
        fileio.write_space(tmp_path / name, g)
        back = fileio.read_space(tmp_path / name)
        assert back.labels == g.labels
        assert np.array_equal(back.dist, g.dist)


def test_bad_space_files(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n0,1\n2,0\n")
    with pytest.raises(MetricAxiomError):
        fileio.read_space(p)
    p.write_text("a,b\n0,q\n1,0\n")
    with pytest.raises(InputError):
        fileio.read_space(p)
    with pytest.raises(InputError):
        fileio.read_space(tmp_path / "missing.csv")


def test_cover_roundtrip_keeps_tuple_indices(tmp_path, line10):
    cover = Cover(line10, {("A", 0): range(6), ("A", 1): range(5, 10)})
    fileio.write_cover(tmp_path / "c.json", cover, {("A", 0): 0, ("A", 1): 1})
    back, col = fileio.read_cover(tmp_path / "c.json", line10)
    assert back.indices == cover.indices
    assert col == {("A", 0): 0, ("A", 1): 1}


def test_cover_file_from_fixture(data_dir, line10):
    cover, col = fileio.read_cover(data_dir / "cover.txt", line10)
    assert cover.indices == (0, 1)
    assert col == {0: 0, 1: 1}


def test_pou_triples_sorted(tmp_path, line10_cover):
    pou = pou_from_cover(line10_cover)
    fileio.write_pou(tmp_path / "p.json", pou)
    doc = json.loads((tmp_path / "p.json").read_text())
    pts = [int(x) for _, x, _ in doc["triples"]]
    assert pts == sorted(pts)
    back = fileio.read_pou(tmp_path / "p.json", line10_cover.space)
    assert np.array_equal(back.values, pou.values)
    assert back.origin["L"] == 2
    assert doc["cover_digest"] == line10_cover.digest()


def test_pou_on_subspace(tmp_path, line10):
    sub = line10.subspace([3, 4, 5])
    pou = pou_from_cover(Cover(sub, {0: [0, 1], 1: [1, 2]}))
    fileio.write_pou(tmp_path / "p.json", pou)
    back = fileio.read_pou(tmp_path / "p.json", line10)
    assert back.space.labels == ("3", "4", "5")
    assert list(back.space.positions_in(line10)) == [3, 4, 5]


def test_feature_map_roundtrip(tmp_path, line10, line10_cover):
    pou = pou_from_cover(line10_cover)
    pieces = {i: interval_indicator_map(line10, range(10), 8) for i in (0, 1)}
    eta, _ = glue(pou, pieces, 1)
    fileio.write_feature_map(tmp_path / "m.jsonl", eta)
    back = fileio.read_feature_map(tmp_path / "m.jsonl", line10)
    assert np.allclose(back.gram(), eta.gram(), atol=0)
    assert back.keys == eta.keys


def test_inf_is_a_string():
    text = fileio.dumps({"x": float("inf"), "y": [1.5, float("-inf")]})
    assert json.loads(text) == {"x": "inf", "y": [1.5, "-inf"]}


def test_dataclass_field_order(line10_cover):
    _, rep = sqrt_lift(pou_from_cover(line10_cover))
    keys = list(json.loads(fileio.dumps(rep)))
    assert keys == ["max_sq_excess", "orthogonality_checked", "orthogonal_beyond", "orthogonality_ok", "coverage_orthogonality_ok"]


def test_profile_csv_header(line10):
    from coarseglue.hilbert import compression_profile, constant_map

    text = fileio.profile_csv(compression_profile(constant_map(line10)))
    assert text.splitlines()[0] == "distance,rho_minus,rho_plus,decay_sup"
    assert len(text.splitlines()) == 10


def test_group_config(data_dir):
    g = fileio.read_group_config(data_dir / "fab.cfg")
    assert g.factors == (0, 0)
    assert g.window_radius == 6
