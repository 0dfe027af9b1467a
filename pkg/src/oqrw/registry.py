"""Builtin example walks.

Names accept query-style parameters, e.g. ``m4-eps?eps=0.05`` or
``z8-period4?alpha=1.5707963267948966``.
"""
from __future__ import annotations

import re
from typing import Callable
from urllib.parse import parse_qsl

import numpy as np

from .errors import ConfigError
from .model import WalkModel, lift_homogeneous

SWAP = np.array([[0, 1], [1, 0]], dtype=complex)
ID2 = np.eye(2, dtype=complex)

L_PLUS = np.array([[1, 1], [0, 1]], dtype=complex) / np.sqrt(3)
L_MINUS = np.array([[1, 0], [-1, 1]], dtype=complex) / np.sqrt(3)


def cycle_generators(eps: float = 0.0) -> dict[int, np.ndarray]:
    """Generators of the cyclic walks ``M_(n)`` and, for ``eps > 0``, ``M_(n,eps)``."""
    gens = {1: np.sqrt(1 - eps) * L_PLUS, -1: np.sqrt(1 - eps) * L_MINUS}
    if eps:
        gens[0] = np.sqrt(eps) * ID2
    return gens


def cycle_walk(n: int, eps: float = 0.0) -> WalkModel:
    if not 0 <= eps < 1:
        raise ConfigError(f"eps must lie in [0, 1), got {eps}")
    name = f"m{n}" if not eps else f"m{n}-eps?eps={eps:g}"
    return lift_homogeneous(cycle_generators(eps), n, labels=range(1, n + 1), name=name)


def apss_walk(a2: float = 0.3, p: float = 0.5) -> WalkModel:
    """Two-site walk with a single one-dimensional recurrent class at site 2.

    ``L11 = diag(a, b)``, ``L21 = diag(c, d)``, ``L12 = sqrt(p) E_12``,
    ``L22 = diag(1, sqrt(1-p))`` with ``|a|^2 = |d|^2 = a2`` and
    ``|b|^2 = |c|^2 = 1 - a2``.
    """
    if not (0 < a2 < 1 and 0 < p < 1):
        raise ConfigError("need 0 < a2 < 1 and 0 < p < 1")
    a, b = np.sqrt(a2), np.sqrt(1 - a2)
    c, d = b, a
    kraus = {
        ("1", "1"): [np.diag([a, b])],
        ("2", "1"): [np.array([[0, np.sqrt(p)], [0, 0]])],
        ("2", "2"): [np.diag([1, np.sqrt(1 - p)])],
        ("1", "2"): [np.diag([c, d])],
    }
    return WalkModel.from_kraus({"1": 2, "2": 2}, kraus, "ex-9.2")


def diagonal_cycle_walk() -> WalkModel:
    """Three-site walk with diagonal transitions; two orthogonal minimal enclosures."""
    up = np.diag([2.0, 1.0]) / np.sqrt(5)    # 1->2, 2->3, 3->1
    down = np.diag([1.0, 2.0]) / np.sqrt(5)  # 2->1, 3->2, 1->3
    kraus = {}
    for j, i in (("1", "2"), ("2", "3"), ("3", "1")):
        kraus[(j, i)] = [up]
        kraus[(i, j)] = [down]
    return WalkModel.from_kraus({"1": 2, "2": 2, "3": 2}, kraus, "ex-6.4")


def swap_loop_walk() -> WalkModel:
    """Two sites; loops carry ``swap/sqrt2``, hops carry ``Id/sqrt2``."""
    s, e = SWAP / np.sqrt(2), ID2 / np.sqrt(2)
    kraus = {("1", "1"): [s], ("2", "2"): [s], ("2", "1"): [e], ("1", "2"): [e]}
    return WalkModel.from_kraus({"1": 2, "2": 2}, kraus, "ex-6.11")


def period_four_walk(n: int = 8, alpha: float = np.pi / 2, p2: float = 0.5) -> WalkModel:
    """Cycle Z_n with ``L+ = p swap``, ``L- = q diag(1, e^{i alpha})``, ``|p|^2 = p2``."""
    if not 0 < p2 < 1:
        raise ConfigError("need 0 < p2 < 1")
    gens = {1: np.sqrt(p2) * SWAP,
            -1: np.sqrt(1 - p2) * np.diag([1, np.exp(1j * alpha)])}
    return lift_homogeneous(gens, n, name=f"z{n}-period4")


def coherent_pair_walk(p: float = 0.5) -> WalkModel:
    """Two sites; loops ``sqrt(p) Id``, hops ``sqrt(1-p) swap``. Non-unique decomposition."""
    if not 0 < p < 1:
        raise ConfigError("need 0 < p < 1")
    loop, hop = np.sqrt(p) * ID2, np.sqrt(1 - p) * SWAP
    kraus = {("1", "1"): [loop], ("2", "2"): [loop], ("1", "2"): [hop], ("2", "1"): [hop]}
    return WalkModel.from_kraus({"1": 2, "2": 2}, kraus, "ex-9.6")


def rotation_walk() -> WalkModel:
    """Two sites, every transition ``+-(i/sqrt2) R`` with ``R`` the quarter turn."""
    r = np.array([[0, -1], [1, 0]], dtype=complex)
    plus, minus = 1j / np.sqrt(2) * r, -1j / np.sqrt(2) * r
    kraus = {("1", "1"): [plus], ("1", "2"): [plus], ("2", "1"): [minus], ("2", "2"): [minus]}
    return WalkModel.from_kraus({"1": 2, "2": 2}, kraus, "remark-4.6")


def _f(params, key, default):
    try:
        return float(params.pop(key, default))
    except ValueError as exc:
        raise ConfigError(f"parameter {key!r} is not a number") from exc


_REGISTRY: dict[str, Callable[[dict], WalkModel]] = {
    "ex-9.2": lambda q: apss_walk(_f(q, "a2", 0.3), _f(q, "p", 0.5)),
    "m3": lambda q: cycle_walk(3),
    "m4": lambda q: cycle_walk(4),
    "m4-eps": lambda q: cycle_walk(4, _f(q, "eps", 0.05)),
    "ex-6.4": lambda q: diagonal_cycle_walk(),
    "ex-6.11": lambda q: swap_loop_walk(),
    "z8-period4": lambda q: period_four_walk(8, _f(q, "alpha", np.pi / 2), _f(q, "p2", 0.5)),
    "ex-9.6": lambda q: coherent_pair_walk(_f(q, "p", 0.5)),
    "remark-4.6": lambda q: rotation_walk(),
}

_CYCLE = re.compile(r"^m(\d+)(-eps)?$")


def available() -> list[str]:
    return list(_REGISTRY)


def builtin(ref: str) -> WalkModel:
    """Look up a builtin walk by name, with optional ``?key=value`` parameters.

    Besides the listed names, ``m<n>`` and ``m<n>-eps`` give the cyclic walks
    on any number of sites.
    """
    name, _, query = ref.partition("?")
    params = dict(parse_qsl(query, keep_blank_values=True))
    if name in _REGISTRY:
        walk = _REGISTRY[name](params)
    elif (m := _CYCLE.match(name)) and int(m.group(1)) >= 1:
        eps = _f(params, "eps", 0.05) if m.group(2) else 0.0
        walk = cycle_walk(int(m.group(1)), eps)
    else:
        raise ConfigError(f"unknown builtin {name!r}; available: {', '.join(available())}")
    if params:
        raise ConfigError(f"unused parameters for {name!r}: {sorted(params)}")
    walk.name = ref if query else walk.name
    return walk
