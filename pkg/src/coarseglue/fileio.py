"""File formats and report serialisation.

Everything is JSON with a stable field order (dataclass field order, then
insertion order) and ``+inf`` written as the string ``"inf"``, so reruns
produce byte-identical files. Metric spaces may also be CSV matrices with a
header row of labels; feature maps are JSON lines with a header record.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import InputError
from .groups import MarkedGroup, build_marked_group
from .hilbert import FeatureMap, PropertyAWitness
from .metric import Cover, FiniteMetricSpace, validate_metric
from .partition import PartitionOfUnity

# ---------------------------------------------------------------- JSON


def _float(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def index_str(i):
    if isinstance(i, tuple):
        return "/".join(index_str(a) for a in i)
    return str(i)


def jsonable(obj):
    """Plain JSON value for reports (dataclasses, numpy, tuples, inf)."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {index_str(k) if not isinstance(k, str) else k: jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, Cover):
        return [[jsonable(i), obj.labels_of(i)] for i in obj.indices]
    return repr(obj)


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), indent=2, ensure_ascii=False) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj), encoding="utf-8")


def _tupled(v):
    return tuple(_tupled(a) for a in v) if isinstance(v, list) else v


def _load_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InputError(f"no such file: {path}") from None
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: not valid JSON ({e})") from None


def file_digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _num(v):
    if isinstance(v, str):
        try:
            return float(v)
        except ValueError:
            raise InputError(f"non-numeric entry {v!r}") from None
    return v


# ---------------------------------------------------------------- spaces


def read_space(path) -> FiniteMetricSpace:
    """CSV matrix with a header row of labels, or JSON ``{labels, rows}``."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"no such file: {path}")
    if path.suffix.lower() == ".csv":
        with path.open(newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
        if not rows:
            raise InputError(f"{path}: empty file")
        labels = [c.strip() for c in rows[0]]
        table = [[_num(c.strip()) for c in r] for r in rows[1:]]
    else:
        doc = _load_json(path)
        try:
            labels, table = doc["labels"], doc["rows"]
        except (KeyError, TypeError):
            raise InputError(f"{path}: expected an object with 'labels' and 'rows'") from None
        labels = [str(lab) for lab in labels]
        table = [[_num(c) for c in r] for r in table]
    return validate_metric(labels, table)


def write_space(path, space: FiniteMetricSpace):
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(space.labels)
            for row in space.dist:
                w.writerow([repr(float(v)) if not float(v).is_integer() else str(int(v)) for v in row])
    else:
        write_json(path, {"labels": list(space.labels), "rows": space.dist.tolist()})


def _subspace_for(space, labels, what):
    labels = [str(lab) for lab in labels]
    if tuple(labels) == space.labels:
        return space, np.arange(space.n)
    pos = space.indices(labels)
    if len(set(pos.tolist())) != len(pos):
        raise InputError(f"{what}: repeated labels")
    sub = space.subspace(pos)
    order = np.argsort(pos)
    return sub, order


# ---------------------------------------------------------------- covers


def _index_from_key(k):
    if isinstance(k, str):
        s = k.strip()
        if s.lstrip("-").isdigit():
            return int(s)
        return k
    return _tupled(k)


def read_cover(path, space):
    """``{sets: {index: [labels]}, coloring: {index: family}}``.

    ``sets`` may also be a list of ``[index, [labels]]`` pairs, which keeps
    tuple indices. Returns ``(Cover, coloring or None)``.
    """
    doc = _load_json(path)
    if not isinstance(doc, dict) or "sets" not in doc:
        raise InputError(f"{path}: expected an object with 'sets'")
    raw = doc["sets"]
    pairs = raw.items() if isinstance(raw, dict) else raw
    sets = {}
    for k, labs in pairs:
        sets[_index_from_key(k)] = space.indices([str(lab) for lab in labs])
    cover = Cover(space, sets)
    coloring = None
    if doc.get("coloring") is not None:
        col = doc["coloring"]
        cpairs = col.items() if isinstance(col, dict) else col
        coloring = {_index_from_key(k): int(v) for k, v in cpairs}
    return cover, coloring


def cover_doc(cover: Cover, coloring=None):
    simple = all(isinstance(i, (int, str)) for i in cover.indices)
    if simple:
        doc = {"sets": {index_str(i): cover.labels_of(i) for i in cover.indices}}
        if coloring is not None:
            doc["coloring"] = {index_str(i): int(coloring[i]) for i in cover.indices}
    else:
        doc = {"sets": [[jsonable(i), cover.labels_of(i)] for i in cover.indices]}
        if coloring is not None:
            doc["coloring"] = [[jsonable(i), int(coloring[i])] for i in cover.indices]
    return doc


def write_cover(path, cover, coloring=None):
    write_json(path, cover_doc(cover, coloring))


# ---------------------------------------------------------------- partitions


def pou_doc(pou: PartitionOfUnity):
    doc = {
        "space_digest": pou.space.digest(),
        "labels": list(pou.space.labels),
        "index": [jsonable(i) for i in pou.index],
        "origin": pou.origin,
    }
    if pou.subordinate_to is not None:
        doc["cover_digest"] = pou.subordinate_to.digest()
        doc["cover"] = [[jsonable(i), pou.subordinate_to.labels_of(i)] for i in pou.subordinate_to.indices]
    doc["triples"] = [[jsonable(i), x, v] for x, i, v in pou.as_triples()]
    return doc


def write_pou(path, pou):
    write_json(path, pou_doc(pou))


def read_pou(path, space) -> PartitionOfUnity:
    """Partition file on ``space`` or on a subspace named by its labels."""
    doc = _load_json(path)
    try:
        labels = doc["labels"]
        index = [_tupled(i) for i in doc["index"]]
        triples = doc["triples"]
    except (KeyError, TypeError):
        raise InputError(f"{path}: expected 'labels', 'index' and 'triples'") from None
    sub, _ = _subspace_for(space, labels, str(path))
    row = {i: r for r, i in enumerate(index)}
    values = np.zeros((len(index), sub.n))
    for i, x, v in triples:
        i = _tupled(i)
        if i not in row:
            raise InputError(f"{path}: triple names unknown index {i!r}")
        values[row[i], sub.index(str(x))] = float(v)
    cover = None
    if doc.get("cover") is not None:
        cover = Cover(sub, {_tupled(i): sub.indices([str(lab) for lab in labs]) for i, labs in doc["cover"]})
    origin = doc.get("origin") or {}
    if isinstance(origin.get("L"), str):
        origin["L"] = float(origin["L"])
    return PartitionOfUnity(sub, index, values, cover, origin)


# ---------------------------------------------------------------- feature maps


def write_feature_map(path, fm: FeatureMap):
    """JSON lines: a header record, then ``{"point", "entries": [[keypath, value], ...]}``."""
    head = {
        "space_digest": fm.space.digest(),
        "labels": list(fm.space.labels),
        "unit_norm": bool(fm.unit_norm),
        "keys": [jsonable(k) for k in fm.keys],
    }
    lines = [json.dumps(head, ensure_ascii=False)]
    m = fm.matrix
    keys = head["keys"]
    for x in range(fm.space.n):
        a, b = m.indptr[x], m.indptr[x + 1]
        entries = [[keys[j], float(v)] for j, v in zip(m.indices[a:b], m.data[a:b])]
        lines.append(json.dumps({"point": fm.space.labels[x], "entries": entries}, ensure_ascii=False))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_feature_map(path, space) -> FeatureMap:
    try:
        text = Path(path).read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise InputError(f"no such file: {path}") from None
    if not text:
        raise InputError(f"{path}: empty feature map")
    try:
        head = json.loads(text[0])
        recs = [json.loads(t) for t in text[1:] if t.strip()]
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: bad JSON line ({e})") from None
    sub, _ = _subspace_for(space, head.get("labels", [r["point"] for r in recs]), str(path))
    keys = [_tupled(k) for k in head.get("keys", [])]
    col = {k: j for j, k in enumerate(keys)}
    seen = np.zeros(sub.n, dtype=bool)
    r_idx, c_idx, vals = [], [], []
    for r in recs:
        x = sub.index(str(r["point"]))
        seen[x] = True
        for k, v in r["entries"]:
            k = _tupled(k)
            if k not in col:
                col[k] = len(keys)
                keys.append(k)
            r_idx.append(x)
            c_idx.append(col[k])
            vals.append(float(v))
    if not seen.all():
        raise InputError(f"{path}: missing point records")
    keys = [k if isinstance(k, tuple) else (k,) for k in keys]
    m = sp.csr_matrix((vals, (r_idx, c_idx)), shape=(sub.n, len(keys)))
    return FeatureMap(sub, keys, m, unit_norm=bool(head.get("unit_norm", True)), check=False)


def read_pa_witness(path, space) -> PropertyAWitness:
    """``{"S": radius, "rows": {x: {z: value}}}``."""
    doc = _load_json(path)
    try:
        S = float(doc["S"])
        rows = doc["rows"]
    except (KeyError, TypeError, ValueError):
        raise InputError(f"{path}: expected 'S' and 'rows'") from None
    v = np.zeros((space.n, space.n))
    for x, row in rows.items():
        for z, val in row.items():
            v[space.index(str(x)), space.index(str(z))] = float(val)
    return PropertyAWitness(space, v, S)


# ---------------------------------------------------------------- profiles


def profile_csv(profile) -> str:
    lines = ["distance,rho_minus,rho_plus,decay_sup"]
    for d, lo, hi, dec in profile.rows():
        cells = [repr(float(d)), repr(float(lo)), repr(float(hi)), "" if dec is None else repr(float(dec))]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_profile_csv(path, profile):
    Path(path).write_text(profile_csv(profile), encoding="utf-8")


def decay_csv(distances, values) -> str:
    lines = ["distance,decay_sup"]
    lines += [f"{float(d)!r},{float(v)!r}" for d, v in zip(distances, values)]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- groups


def read_group_config(path) -> MarkedGroup:
    """``{"factors": [orders], "window_radius": W}``."""
    return build_marked_group(_load_json(path))


# ---------------------------------------------------------------- manifests


def write_manifest(directory, command, inputs, parameters, passed, summary=None):
    """List every file in ``directory`` with its digest; paths are relative."""
    directory = Path(directory)
    artifacts = []
    for p in sorted(directory.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            artifacts.append({"path": p.relative_to(directory).as_posix(), "sha256": file_digest(p)})
    manifest = {
        "command": command,
        "inputs": inputs,
        "parameters": parameters,
        "artifacts": artifacts,
        "passed": bool(passed),
        "summary": summary or {},
    }
    write_json(directory / "manifest.json", manifest)
    return manifest
