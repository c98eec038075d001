import json
import subprocess
import sys

import pytest

from coarseglue.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_metric_validate(capsys, data_dir):
    code, out, _ = run(capsys, "metric", "validate", data_dir / "line10.csv")
    assert code == 0
    assert out.startswith("valid, diameter 9")


def test_metric_validate_triangle(capsys, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b,c\n0,1,5\n1,0,1\n5,1,0\n")
    code, out, _ = run(capsys, "metric", "validate", bad)
    assert code == 1
    assert "triangle" in out
    assert 'witness: ["a", "c", "b"]' in out


def test_input_errors_exit_2(capsys, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n0,zz\n1,0\n")
    code, _, err = run(capsys, "metric", "validate", bad)
    assert code == 2
    assert "non-numeric" in err
    code, _, _ = run(capsys, "metric", "validate", tmp_path / "nope.csv")
    assert code == 2


def test_usage_error_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["metric"])
    assert exc.value.code == 2


def test_cover_stats(capsys, data_dir):
    code, out, _ = run(capsys, "metric", "cover-stats", data_dir / "line10.csv", data_dir / "cover.txt")
    assert code == 0
    assert out.splitlines()[0] == "multiplicity 2, lebesgue_lower 2"


def test_separated_check_fails_with_witness(capsys, tmp_path, data_dir):
    cov = tmp_path / "c.json"
    cov.write_text(json.dumps({"sets": {"0": ["0", "1"], "1": ["5", "6"], "2": [str(i) for i in range(2, 10)]},
                               "coloring": {"0": 0, "1": 0, "2": 1}}))
    code, out, _ = run(capsys, "metric", "separated-check", data_dir / "line10.csv", cov, "--k", 1, "--L", 4)
    assert code == 1
    assert "witness: [0, 1]" in out
    code, _, _ = run(capsys, "metric", "separated-check", data_dir / "line10.csv", cov, "--k", 1, "--L", 3)
    assert code == 0


def test_pou_build_and_certify(capsys, tmp_path, data_dir):
    pou = tmp_path / "pou.json"
    code, out, _ = run(capsys, "pou", "build", data_dir / "line10.csv", data_dir / "cover.txt", "--out", pou)
    assert code == 0 and "sums verified" in out
    rep = tmp_path / "cert.json"
    code, out, _ = run(capsys, "pou", "certify", data_dir / "line10.csv", pou, "--R", 1, "--eps", 10, "--report", rep)
    assert code == 0
    assert "max_variation 0.5" in out
    doc = json.loads(rep.read_text())
    assert doc["max_variation"] == 0.5
    assert "space_digest" in doc and "cover_digest" in doc
    code, _, _ = run(capsys, "pou", "certify", data_dir / "line10.csv", pou, "--R", 1, "--eps", 0.1)
    assert code == 1


def test_pou_pipeline(capsys, data_dir):
    code, out, _ = run(
        capsys, "pou", "pipeline", data_dir / "clusters.json", data_dir / "clusters_cover.json",
        "--k", 0, "--L", 40, "--R", 1, "--eps", 0.15,
    )
    assert code == 0 and out.startswith("pass")
    code, out, _ = run(
        capsys, "pou", "pipeline", data_dir / "clusters.json", data_dir / "clusters_cover.json",
        "--k", 0, "--L", 40, "--R", 1, "--eps", 0.1,
    )
    assert code == 1
    assert "need L >= 60" in out


def test_embed_chain(capsys, tmp_path, data_dir):
    space = data_dir / "line10.csv"
    pou = tmp_path / "pou.json"
    run(capsys, "pou", "build", space, data_dir / "cover.txt", "--out", pou)
    lift = tmp_path / "lift.jsonl"
    code, _, _ = run(capsys, "embed", "sqrt-lift", space, pou, "--out", lift)
    assert code == 0
    piece = tmp_path / "piece.jsonl"
    run(capsys, "embed", "generate", space, "--kind", "interval", "--T", 16, "--out", piece)
    glued = tmp_path / "glued.jsonl"
    code, out, _ = run(capsys, "embed", "glue", space, pou, "--piece", f"0={piece}", "--piece", f"1={piece}",
                       "--R", 1, "--eps", 1, "--out", glued)
    assert code == 0, out
    code, out, _ = run(capsys, "embed", "profile", space, glued)
    assert out.splitlines()[0] == "distance,rho_minus,rho_plus,decay_sup"
    assert len(out.splitlines()) == 10


def test_embed_check_ue_constant(capsys, tmp_path, data_dir):
    m = tmp_path / "const.map"
    run(capsys, "embed", "generate", data_dir / "line10.csv", "--kind", "constant", "--out", m)
    code, out, _ = run(capsys, "embed", "check-ue", data_dir / "line10.csv", m, "--R", 1, "--eps", 0.1)
    assert code == 0
    assert "(i) pass" in out and "constant 1" in out


def test_embed_glue_non_unit_piece(capsys, tmp_path, data_dir):
    space = data_dir / "line10.csv"
    pou = tmp_path / "pou.json"
    run(capsys, "pou", "build", space, data_dir / "cover.txt", "--out", pou)
    bad = tmp_path / "bad.jsonl"
    lines = [json.dumps({"labels": [str(i) for i in range(10)], "unit_norm": True, "keys": [["x"]]})]
    lines += [json.dumps({"point": str(i), "entries": [[["x"], 0.5]]}) for i in range(10)]
    bad.write_text("\n".join(lines) + "\n")
    code, out, _ = run(capsys, "embed", "glue", space, pou, "--piece", f"0={bad}", "--piece", f"1={bad}", "--R", 1)
    assert code == 1
    assert "unit norm" in out


def test_embed_property_a(capsys, tmp_path):
    space = tmp_path / "z.csv"
    run(capsys, "metric", "generate", "--kind", "integers", "--n", 61, "--start", -30, "--out", space)
    code, out, _ = run(capsys, "embed", "check-pa", space, "--ball", 10, "--R", 3, "--eps", 0.5)
    assert code == 0
    pou = tmp_path / "pa.json"
    code, _, _ = run(capsys, "embed", "pa-to-pou", space, "--ball", 10, "--out", pou)
    assert code == 0
    code, _, _ = run(capsys, "embed", "check-pa", space, "--R", 3, "--eps", 0.5)
    assert code == 2


def test_group_metric_query(capsys, data_dir):
    code, out, _ = run(capsys, "group", "metric", data_dir / "fab.cfg", "--kind", "rel", "--query", "e", "a^2.b.a^3",
                       "--no-cross-check")
    assert code == 0
    assert out.strip() == "3"


def test_group_separation(capsys, data_dir, tmp_path):
    rep = tmp_path / "sep.json"
    code, out, _ = run(capsys, "group", "separation", data_dir / "fab.cfg", "--n", 2, "--k", 1, "--L", 4,
                       "--report", rep)
    assert code == 0
    assert out.startswith("kappa=1, verified")
    assert json.loads(rep.read_text())["kappa"] == 1


def test_group_small_commands(capsys, data_dir, tmp_path):
    cfg = data_dir / "fab.cfg"
    assert run(capsys, "group", "window", cfg, "--W", 3)[1].startswith("53 elements")
    assert run(capsys, "group", "rel-ball", cfg, "--W", 3, "--n", 1)[1].startswith("B(1): 13 elements")
    code, out, _ = run(capsys, "group", "decompose", cfg, "--W", 4, "--n", 2, "--k", 2)
    assert code == 0 and "disjoint and exhaustive" in out
    cov = tmp_path / "asdim.json"
    code, out, _ = run(capsys, "group", "asdim-cover", cfg, "--W", 3, "--R", 1, "--out", cov)
    assert code == 0
    assert json.loads(cov.read_text())["coloring"]


def test_group_pipeline_small(capsys, tmp_path, data_dir):
    out_dir = tmp_path / "arch"
    code, out, _ = run(capsys, "group", "pipeline", data_dir / "fab.cfg", "--W", 3, "--R", 1, "--eps", 0.5,
                       "--out", out_dir)
    assert code == 0 and out.startswith("pass")
    manifest = json.loads((out_dir / "manifest.json").read_text())
    listed = {a["path"] for a in manifest["artifacts"]}
    on_disk = {p.relative_to(out_dir).as_posix() for p in out_dir.rglob("*") if p.is_file()} - {"manifest.json"}
    assert listed == on_disk
    assert manifest["passed"]


def test_module_entry_point(data_dir):
    res = subprocess.run([sys.executable, "-m", "coarseglue", "metric", "validate", str(data_dir / "line10.csv")],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.startswith("valid")
