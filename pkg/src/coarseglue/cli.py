"""Command-line interface: ``coarseglue {metric,pou,embed,group} ...``.

Exit status: 0 when every certificate passes, 1 on a certificate failure
(the witness is printed), 2 on malformed input or usage.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

import numpy as np

from . import fileio
from .errors import CertificateError, InputError
from .groups import (
    GroupWindow,
    osin_decomposition,
    rel_ball,
    relative_asdim_cover,
    separation_search,
)
from .hilbert import (
    ball_witness,
    check_char_ue,
    check_property_a,
    compression_profile,
    constant_map,
    glue,
    interval_indicator_map,
    orthonormal_map,
    pa_to_pou,
    sqrt_lift,
)
from .metric import (
    check_separated,
    cover_stats,
    enlarge_cover,
    grid_space,
    integer_space,
    line_space,
)
from .partition import (
    pou_from_cover,
    product_refine,
    pullback_pou,
    separated_cover_pipeline,
    variation_certificate,
)
from .pipeline import relhyp_embed_pipeline


def _out(text):
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _report(args, obj):
    if getattr(args, "report", None):
        fileio.write_json(args.report, obj)


def _verdict(ok):
    return "pass" if ok else "FAIL"


def _index_arg(text):
    return fileio._index_from_key(text)


def _pairs(items, what):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise InputError(f"{what} must look like INDEX=FILE, got {item!r}")
        k, v = item.split("=", 1)
        out[_index_arg(k)] = v
    return out


# ---------------------------------------------------------------- metric


def cmd_metric_validate(args):
    space = fileio.read_space(args.space)
    _out(f"valid, diameter {space.diameter:g} ({space.n} points)")
    _report(args, {"valid": True, "n": space.n, "diameter": space.diameter, "digest": space.digest()})
    return 0


def cmd_metric_generate(args):
    if args.kind == "line":
        space = line_space(args.n, start=args.start)
    elif args.kind == "integers":
        space = integer_space(range(args.start, args.start + args.n))
    else:
        space = grid_space(args.n, args.cols or args.n)
    fileio.write_space(args.out, space)
    _out(f"wrote {args.kind} space with {space.n} points to {args.out}")
    return 0


def cmd_metric_cover_stats(args):
    space = fileio.read_space(args.space)
    cover, _ = fileio.read_cover(args.cover, space)
    stats = cover_stats(cover, args.radii or ())
    _out(f"multiplicity {stats.multiplicity}, lebesgue_lower {stats.lebesgue_lower:g}")
    _out(fileio.dumps(stats.as_dict()))
    _report(args, stats.as_dict())
    return 0


def cmd_metric_separated_check(args):
    space = fileio.read_space(args.space)
    cover, coloring = fileio.read_cover(args.cover, space)
    if coloring is None:
        raise InputError("cover file has no 'coloring'")
    sep = check_separated(cover, args.k, args.L, coloring)
    _out(f"separated: k={sep.k}, L={sep.L:g}, closest gap {sep.closest_gap:g}")
    _report(args, {"k": sep.k, "L": sep.L, "closest_gap": sep.closest_gap, "passed": True})
    return 0


def cmd_metric_enlarge(args):
    space = fileio.read_space(args.space)
    cover, coloring = fileio.read_cover(args.cover, space)
    big = enlarge_cover(cover, args.R)
    stats = cover_stats(big)
    if args.out:
        fileio.write_cover(args.out, big, coloring)
    _out(f"enlarged by {args.R:g}: multiplicity {stats.multiplicity}, lebesgue_lower {stats.lebesgue_lower:g}")
    _report(args, stats.as_dict())
    return 0


# ---------------------------------------------------------------- pou


def _cert_doc(cert, pou):
    doc = fileio.jsonable(cert)
    doc["space_digest"] = pou.space.digest()
    if pou.subordinate_to is not None:
        doc["cover_digest"] = pou.subordinate_to.digest()
    return doc


def cmd_pou_build(args):
    space = fileio.read_space(args.space)
    cover, _ = fileio.read_cover(args.cover, space)
    pou = pou_from_cover(cover)
    if args.out:
        fileio.write_pou(args.out, pou)
    _out(f"partition built: {len(pou)} functions, sums verified (max |sum-1| = {pou.sum_error():.3g})")
    return 0


def cmd_pou_certify(args):
    space = fileio.read_space(args.space)
    pou = fileio.read_pou(args.pou, space)
    cert = variation_certificate(pou, args.R)
    ok = cert.max_variation <= args.eps
    _out(f"{_verdict(ok)}: max_variation {cert.max_variation:g} at R={args.R:g} (eps {args.eps:g})")
    _report(args, _cert_doc(cert, pou))
    return 0 if ok else 1


def cmd_pou_product(args):
    space = fileio.read_space(args.space)
    outer = fileio.read_pou(args.outer, space)
    inners = {i: fileio.read_pou(p, space) for i, p in _pairs(args.inner, "--inner").items()}
    theta, rep = product_refine(outer, inners, args.R)
    if args.out:
        fileio.write_pou(args.out, theta)
    _out(f"{_verdict(rep.split_ok)}: refined partition with {len(theta)} functions, max_variation {rep.max_variation:g}")
    _report(args, rep)
    return 0 if rep.split_ok else 1


def cmd_pou_pullback(args):
    domain = fileio.read_space(args.space)
    target = fileio.read_space(args.target)
    pou = fileio.read_pou(args.pou, target)
    mapping = fileio._load_json(args.map)
    try:
        p = np.array([target.index(str(mapping[lab])) for lab in domain.labels], dtype=np.intp)
    except KeyError as e:
        raise InputError(f"map file has no image for point {e.args[0]!r}") from None
    pulled, rep = pullback_pou(pou, domain, p, args.S, args.R)
    if args.out:
        fileio.write_pou(args.out, pulled)
    _out(f"pass: variation {rep.variation_domain:g} on domain <= {rep.variation_target:g} on target")
    _report(args, rep)
    return 0


def cmd_pou_pipeline(args):
    space = fileio.read_space(args.space)
    cover, coloring = fileio.read_cover(args.cover, space)
    if coloring is None:
        raise InputError("cover file has no 'coloring'")
    sep = check_separated(cover, args.k, 2 * args.L, coloring)
    pou, cert, stats = separated_cover_pipeline(sep, args.R, args.eps)
    if args.out:
        fileio.write_pou(args.out, pou)
    _out(f"pass: max_variation {cert.max_variation:g} <= bound {cert.bound_claimed:g} <= eps {args.eps:g}")
    _report(args, {"certificate": _cert_doc(cert, pou), "enlarged": stats.as_dict()})
    return 0


# ---------------------------------------------------------------- embed


def _witness(args, space):
    if args.witness:
        return fileio.read_pa_witness(args.witness, space)
    if args.ball is None:
        raise InputError("give --ball RADIUS or --witness FILE")
    return ball_witness(space, args.ball)


def cmd_embed_sqrt_lift(args):
    space = fileio.read_space(args.space)
    pou = fileio.read_pou(args.pou, space)
    fm, rep = sqrt_lift(pou)
    if args.out:
        fileio.write_feature_map(args.out, fm)
    ok = rep.orthogonality_ok and rep.coverage_orthogonality_ok
    _out(f"{_verdict(ok)}: sqrt-lift with {len(fm.keys)} keys, max square excess {rep.max_sq_excess:.3g}")
    _report(args, rep)
    return 0 if ok else 1


def cmd_embed_glue(args):
    space = fileio.read_space(args.space)
    pou = fileio.read_pou(args.pou, space)
    pieces = {i: fileio.read_feature_map(p, pou.space) for i, p in _pairs(args.piece, "--piece").items()}
    eta, rep = glue(pou, pieces, args.R, args.eps)
    if args.out:
        fileio.write_feature_map(args.out, eta)
    _out(
        f"pass: max_close_diff {rep.certificate.max_close_diff:g} "
        f"(alpha {rep.alpha_max:g}, beta {rep.beta_max:g})"
    )
    _report(args, rep)
    return 0


def cmd_embed_check_ue(args):
    space = fileio.read_space(args.space)
    fm = fileio.read_feature_map(args.map, space)
    cert = check_char_ue(fm, args.R, args.eps)
    _out(f"(i) {_verdict(cert.condition_i)}: max_close_diff {cert.max_close_diff:g} at R={args.R:g}")
    vals = np.array(cert.decay_values)
    if len(vals) and np.all(vals >= 1 - 1e-12):
        _out("decay: constant 1 (fails to decay)")
    elif len(vals):
        _out(f"decay: {vals[-1]:g} at distance {cert.decay_distances[-1]:g}")
    _report(args, cert)
    return 0 if cert.condition_i else 1


def cmd_embed_check_pa(args):
    space = fileio.read_space(args.space)
    w = _witness(args, space)
    cert = check_property_a(w, args.R, args.eps)
    ok = cert.condition_i and cert.condition_ii
    _out(f"{_verdict(ok)}: max l1 diff {cert.max_l1_diff:g} at R={args.R:g}, support radius {cert.measured_support_radius:g} <= S={cert.S:g}")
    _report(args, cert)
    return 0 if ok else 1


def cmd_embed_pa_to_pou(args):
    space = fileio.read_space(args.space)
    pou = pa_to_pou(_witness(args, space))
    if args.out:
        fileio.write_pou(args.out, pou)
    _out(f"partition with {len(pou)} functions from the witness")
    return 0


def cmd_embed_profile(args):
    space = fileio.read_space(args.space)
    fm = fileio.read_feature_map(args.map, space)
    prof = compression_profile(fm, exhaustive_limit=args.exhaustive_limit, n_samples=args.samples, seed=args.seed)
    text = fileio.profile_csv(prof)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        _out(f"wrote {len(prof.buckets)} distance buckets to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_embed_generate(args):
    space = fileio.read_space(args.space)
    if args.kind == "constant":
        fm = constant_map(space)
    elif args.kind == "orthonormal":
        fm = orthonormal_map(space)
    else:
        if args.T is None:
            raise InputError("--T is required for interval maps")
        try:
            coords = [int(lab) for lab in space.labels]
        except ValueError:
            raise InputError("interval maps need integer point labels") from None
        fm = interval_indicator_map(space, coords, args.T)
    fileio.write_feature_map(args.out, fm)
    _out(f"wrote {args.kind} map with {len(fm.keys)} keys to {args.out}")
    return 0


# ---------------------------------------------------------------- group


def _window(args):
    group = fileio.read_group_config(args.config)
    return GroupWindow(group, getattr(args, "W", None))


def cmd_group_window(args):
    win = _window(args)
    _out(f"{len(win)} elements, W={win.W}, factors {list(win.group.factors)}")
    doc = {
        "factors": list(win.group.factors),
        "W": win.W,
        "n_elements": len(win),
        "elements": [[list(s) for s in g] for g in win.elements],
        "labels": win.labels,
    }
    _report(args, doc)
    return 0


def cmd_group_metric(args):
    win = _window(args)
    space = win.metric(args.kind, cross_check=not args.no_cross_check)
    if args.out:
        fileio.write_space(args.out, space)
    if args.query:
        g, h = (win.position(win.group.parse(q)) for q in args.query)
        _out(f"{space.dist[g, h]:g}")
    else:
        checked = "" if args.no_cross_check else ", search-confirmed"
        _out(f"d_{args.kind} on {space.n} elements, diameter {space.diameter:g}{checked}")
    return 0


def cmd_group_rel_ball(args):
    win = _window(args)
    ball = rel_ball(win, args.n)
    _out(f"B({args.n}): {len(ball)} elements")
    _report(args, {"n": args.n, "members": [win.labels[i] for i in ball.members]})
    return 0


def cmd_group_decompose(args):
    win = _window(args)
    dec, chk = osin_decomposition(win, args.n, args.k)
    _out(
        f"pass: {chk.n_cosets} cosets, disjoint and exhaustive; "
        f"B1 {chk.b1_ok}, Bn {chk.bn_ok} on {chk.interior_size} interior elements"
    )
    doc = {
        "check": chk,
        "reps": [win.group.format(r) for r in dec.reps],
        "cosets": {win.group.format(r): [win.labels[i] for i in dec.cosets[r]] for r in dec.reps},
    }
    _report(args, doc)
    return 0


def cmd_group_separation(args):
    win = _window(args)
    res = separation_search(win, args.n, args.k, args.L)
    _out(f"kappa={res.kappa}, verified (min gap {res.min_gap:g} > L={args.L:g})")
    doc = fileio.jsonable(res)
    doc["Y"] = [win.labels[i] for i in res.Y]
    _report(args, doc)
    return 0


def cmd_group_asdim_cover(args):
    win = _window(args)
    sep, rep = relative_asdim_cover(win, args.R)
    _out(
        f"{rep.n_sets} sets in {rep.k + 1} families, multiplicity {rep.multiplicity}, "
        f"max relative diameter {rep.max_relative_diameter:g}, separation {rep.separation:g}"
    )
    if args.out:
        fileio.write_cover(args.out, sep.cover, sep.coloring)
    _report(args, rep)
    return 0


def _slug(name):
    return re.sub(r"[^A-Za-z0-9]+", "-", name).strip("-")


def write_pipeline_archive(directory, config_path, eta, report):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    (d / "stages").mkdir(exist_ok=True)
    config_bytes = Path(config_path).read_bytes()
    fileio.write_json(
        d / "config.json",
        {"config": json.loads(config_bytes), "sha256": fileio.file_digest(config_path), "R": report.R, "eps": report.eps},
    )
    for j, st in enumerate(report.stages):
        fileio.write_json(d / "stages" / f"{j:02d}-{_slug(st.name)}.json", st)
    fileio.write_json(d / "report.json", {f: getattr(report, f) for f in (
        "factors", "W", "R", "eps", "n_elements", "n_max", "metric_check", "recursion_checks",
        "asdim", "pullback", "translations", "final_glue", "passed")})
    fileio.write_json(d / "certificate.json", report.certificate)
    fileio.write_feature_map(d / "final_map.jsonl", eta)
    fileio.write_profile_csv(d / "profile.csv", report.profile)
    (d / "decay.csv").write_text(
        fileio.decay_csv(report.certificate.decay_distances, report.certificate.decay_values), encoding="utf-8"
    )
    return fileio.write_manifest(
        d,
        "group pipeline",
        {"config": fileio.file_digest(config_path)},
        {"R": report.R, "eps": report.eps, "W": report.W, "n_max": report.n_max},
        report.passed,
        report.summary(),
    )


def cmd_group_pipeline(args):
    group = fileio.read_group_config(args.config)
    eta, report = relhyp_embed_pipeline(group, args.R, args.eps, W=args.W, cross_check=not args.no_cross_check)
    if args.out:
        write_pipeline_archive(args.out, args.config, eta, report)
    s = report.summary()
    _out(
        f"pass: {s['n_elements']} elements, {s['n_stages']} glue stages, "
        f"max_close_diff {s['max_close_diff']:.6g} <= {args.eps:g}"
        + (f", archive written to {args.out}" if args.out else "")
    )
    return 0


# ---------------------------------------------------------------- parser


def build_parser():
    p = argparse.ArgumentParser(prog="coarseglue", description=__doc__.splitlines()[0])
    top = p.add_subparsers(dest="group", required=True)

    def sub(parent, name, func, help_):
        q = parent.add_parser(name, help=help_)
        q.set_defaults(func=func)
        q.add_argument("--report", help="write a JSON report here")
        return q

    m = top.add_parser("metric", help="finite metric spaces and covers").add_subparsers(dest="cmd", required=True)
    q = sub(m, "validate", cmd_metric_validate, "check the metric axioms")
    q.add_argument("space")
    q = sub(m, "generate", cmd_metric_generate, "write a generated space")
    q.add_argument("--kind", choices=["line", "integers", "grid"], default="line")
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--cols", type=int)
    q.add_argument("--start", type=int, default=0)
    q.add_argument("--out", required=True)
    q = sub(m, "cover-stats", cmd_metric_cover_stats, "multiplicity, Lebesgue bound, diameters")
    q.add_argument("space")
    q.add_argument("cover")
    q.add_argument("--radii", type=float, nargs="*")
    q = sub(m, "separated-check", cmd_metric_separated_check, "certify (k, L)-separation")
    q.add_argument("space")
    q.add_argument("cover")
    q.add_argument("--k", type=int, required=True)
    q.add_argument("--L", type=float, required=True)
    q = sub(m, "enlarge", cmd_metric_enlarge, "R-neighbourhoods of the cover sets")
    q.add_argument("space")
    q.add_argument("cover")
    q.add_argument("--R", type=float, required=True)
    q.add_argument("--out")

    u = top.add_parser("pou", help="partitions of unity").add_subparsers(dest="cmd", required=True)
    q = sub(u, "build", cmd_pou_build, "distance-ratio partition of a cover")
    q.add_argument("space")
    q.add_argument("cover")
    q.add_argument("--out")
    q = sub(u, "certify", cmd_pou_certify, "variation certificate at scale R")
    q.add_argument("space")
    q.add_argument("pou")
    q.add_argument("--R", type=float, required=True)
    q.add_argument("--eps", type=float, required=True)
    q = sub(u, "product", cmd_pou_product, "refine by partitions of the enlarged sets")
    q.add_argument("space")
    q.add_argument("outer")
    q.add_argument("--inner", action="append", metavar="INDEX=FILE")
    q.add_argument("--R", type=float, required=True)
    q.add_argument("--out")
    q = sub(u, "pullback", cmd_pou_pullback, "pull a partition back along a point map")
    q.add_argument("space", help="domain space")
    q.add_argument("pou", help="partition on the target space")
    q.add_argument("--target", required=True)
    q.add_argument("--map", required=True, help="JSON {domain label: target label}")
    q.add_argument("--S", type=float, required=True)
    q.add_argument("--R", type=float, required=True)
    q.add_argument("--out")
    q = sub(u, "pipeline", cmd_pou_pipeline, "partition from a (k, 2L)-separated cover")
    q.add_argument("space")
    q.add_argument("cover")
    q.add_argument("--k", type=int, required=True)
    q.add_argument("--L", type=float, required=True, help="enlargement radius; the cover must be 2L-separated")
    q.add_argument("--R", type=float, required=True)
    q.add_argument("--eps", type=float, required=True)
    q.add_argument("--out")

    e = top.add_parser("embed", help="feature maps and certificates").add_subparsers(dest="cmd", required=True)
    q = sub(e, "sqrt-lift", cmd_embed_sqrt_lift, "x -> (sqrt phi_i(x))_i")
    q.add_argument("space")
    q.add_argument("pou")
    q.add_argument("--out")
    q = sub(e, "glue", cmd_embed_glue, "glue piece maps along a partition")
    q.add_argument("space")
    q.add_argument("pou")
    q.add_argument("--piece", action="append", metavar="INDEX=FILE")
    q.add_argument("--R", type=float, required=True)
    q.add_argument("--eps", type=float)
    q.add_argument("--out")
    q = sub(e, "check-ue", cmd_embed_check_ue, "condition (i) and the decay profile")
    q.add_argument("space")
    q.add_argument("map")
    q.add_argument("--R", type=float, required=True)
    q.add_argument("--eps", type=float, required=True)
    for name, func, help_ in (
        ("check-pa", cmd_embed_check_pa, "certify a Property A witness"),
        ("pa-to-pou", cmd_embed_pa_to_pou, "partition from a Property A witness"),
    ):
        q = sub(e, name, func, help_)
        q.add_argument("space")
        q.add_argument("--ball", type=float, help="use ball indicators of this radius")
        q.add_argument("--witness", help="JSON {S, rows: {x: {z: value}}}")
        if name == "check-pa":
            q.add_argument("--R", type=float, required=True)
            q.add_argument("--eps", type=float, required=True)
        else:
            q.add_argument("--out")
    q = sub(e, "profile", cmd_embed_profile, "compression profile as CSV")
    q.add_argument("space")
    q.add_argument("map")
    q.add_argument("--out")
    q.add_argument("--samples", type=int, default=10**6)
    q.add_argument("--seed", type=int)
    q.add_argument("--exhaustive-limit", type=int, default=2000)
    q = sub(e, "generate", cmd_embed_generate, "write a simple feature map")
    q.add_argument("space")
    q.add_argument("--kind", choices=["constant", "orthonormal", "interval"], required=True)
    q.add_argument("--T", type=int)
    q.add_argument("--out", required=True)

    g = top.add_parser("group", help="free products of cyclic groups").add_subparsers(dest="cmd", required=True)

    def gsub(name, func, help_):
        q = sub(g, name, func, help_)
        q.add_argument("config")
        q.add_argument("--W", type=int, help="override the window radius")
        return q

    gsub("window", cmd_group_window, "enumerate the window")
    q = gsub("metric", cmd_group_metric, "word or relative metric")
    q.add_argument("--kind", choices=["s", "rel"], default="s")
    q.add_argument("--query", nargs=2, metavar=("G", "H"))
    q.add_argument("--out")
    q.add_argument("--no-cross-check", action="store_true")
    q = gsub("rel-ball", cmd_group_rel_ball, "relative ball B(n)")
    q.add_argument("--n", type=int, required=True)
    q = gsub("decompose", cmd_group_decompose, "coset decomposition and ball recursion checks")
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--k", type=int, required=True)
    q = gsub("separation", cmd_group_separation, "least kappa separating the cosets")
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--k", type=int, required=True)
    q.add_argument("--L", type=float, required=True)
    q = gsub("asdim-cover", cmd_group_asdim_cover, "separated cover of the relative metric")
    q.add_argument("--R", type=float, required=True)
    q.add_argument("--out")
    q = gsub("pipeline", cmd_group_pipeline, "end-to-end certified embedding")
    q.add_argument("--R", type=float, required=True)
    q.add_argument("--eps", type=float, required=True)
    q.add_argument("--out", help="archive directory")
    q.add_argument("--no-cross-check", action="store_true")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CertificateError as e:
        _out(f"FAIL [{e.stage}]: {e}")
        if e.witness is not None:
            _out("witness: " + json.dumps(fileio.jsonable(e.witness)))
        if getattr(args, "report", None):
            fileio.write_json(args.report, {"passed": False, **e.as_dict()})
        return 1
    except InputError as e:
        sys.stderr.write(f"error: {e}\n")
        return 2
    except OSError as e:
        sys.stderr.write(f"error: {e}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
