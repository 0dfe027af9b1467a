"""JSON walk documents.

::

    {"name": "m3",
     "sites": [{"id": "1", "dim": 2}, ...],
     "edges": [{"from": "1", "to": "2", "kraus": [[[[re, im], ...], ...]]}, ...]}

Matrices are row-major lists of rows, each entry an ``[re, im]`` pair.
"""
from __future__ import annotations

import json

import numpy as np

from .errors import ConfigError, StructuralError
from .model import SiteSpace, TransitionEdge, WalkModel


def _entry(v, path):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(v)
    if (isinstance(v, list) and len(v) == 2
            and all(isinstance(t, (int, float)) and not isinstance(t, bool) for t in v)):
        return complex(v[0], v[1])
    raise ConfigError(f"{path}: expected [re, im] pair, got {v!r}")


def _matrix(m, path) -> np.ndarray:
    if not isinstance(m, list) or not m or not all(isinstance(r, list) for r in m):
        raise ConfigError(f"{path}: expected a non-empty list of rows")
    width = len(m[0])
    for k, row in enumerate(m):
        if len(row) != width:
            raise ConfigError(f"{path}: non-rectangular matrix (row {k} has {len(row)} entries, "
                              f"row 0 has {width})")
    return np.array([[_entry(v, f"{path}[{r}][{c}]") for c, v in enumerate(row)]
                     for r, row in enumerate(m)], dtype=complex)


def _field(obj, key, path, kind):
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object")
    if key not in obj:
        raise ConfigError(f"{path}: missing field {key!r}")
    v = obj[key]
    if not isinstance(v, kind) or isinstance(v, bool):
        raise ConfigError(f"{path}.{key}: wrong type {type(v).__name__}")
    return v


def from_dict(doc: dict) -> WalkModel:
    name = doc.get("name", "walk") if isinstance(doc, dict) else None
    sites = []
    for k, s in enumerate(_field(doc, "sites", "$", list)):
        sid = _field(s, "id", f"sites[{k}]", (str, int))
        dim = _field(s, "dim", f"sites[{k}]", int)
        if dim < 1:
            raise ConfigError(f"sites[{k}].dim: must be positive, got {dim}")
        sites.append(SiteSpace(str(sid), dim))
    known = {s.id for s in sites}
    edges = []
    for k, e in enumerate(_field(doc, "edges", "$", list)):
        path = f"edges[{k}]"
        src = str(_field(e, "from", path, (str, int)))
        dst = str(_field(e, "to", path, (str, int)))
        for key, lab in (("from", src), ("to", dst)):
            if lab not in known:
                raise ConfigError(f"{path}.{key}: unknown site {lab!r}")
        kraus = [_matrix(m, f"{path}.kraus[{q}]")
                 for q, m in enumerate(_field(e, "kraus", path, list))]
        if not kraus:
            raise ConfigError(f"{path}.kraus: empty Kraus list")
        edges.append(TransitionEdge(src, dst, tuple(kraus)))
    try:
        return WalkModel(sites, edges, str(name))
    except StructuralError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(text: str) -> WalkModel:
    """Parse a JSON document into a structurally checked walk (stochasticity not checked)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return from_dict(doc)


def _num(x: float):
    x = float(x)
    return int(x) if x.is_integer() and abs(x) < 2**53 else x


def to_dict(walk: WalkModel) -> dict:
    return {
        "name": walk.name,
        "sites": [{"id": lab, "dim": walk.dims[lab]} for lab in walk.labels],
        "edges": [{"from": e.source, "to": e.target,
                   "kraus": [[[[_num(v.real), _num(v.imag)] for v in row] for row in op]
                             for op in e.kraus]}
                  for e in walk.edges],
    }


def serialize(walk: WalkModel) -> str:
    """Byte-stable JSON (floats printed with ``repr``, so they round-trip exactly)."""
    return json.dumps(to_dict(walk), indent=1) + "\n"


def load(path) -> WalkModel:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_config(text)
