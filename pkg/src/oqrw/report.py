"""Analysis reports and CSV time series."""
from __future__ import annotations

import csv
import os
import re
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError
from .model import BlockOperator, WalkModel, validate
from .numerics import DEFAULT_RANK_TOL
from .spectral import (cesaro_series, cyclic_resolution, evolve, invariant_states, is_faithful,
                       loop_gcd, peripheral_spectrum, period, site_probabilities)
from .structure import minimal_enclosures
from .trajectory import occupation_stats, run_ensemble, sample_trajectory

FMT = "%.17g"


def natural_key(label: str):
    return [(0, int(t), "") if t.isdigit() else (1, 0, t) for t in re.findall(r"\d+|\D+", label)]


def first_site(walk: WalkModel) -> str:
    return min(walk.labels, key=natural_key)


def initial_state(walk: WalkModel, site: str | None = None) -> BlockOperator:
    """Pure ``e_1`` at ``site`` (default: first label in natural order)."""
    site = first_site(walk) if site is None else walk.check_site(site)
    return BlockOperator.pure(walk, site)


def path_counts(walk: WalkModel, n: int) -> np.ndarray:
    """``counts[i, j]``: number of length-``n`` paths ``j -> i``, one per Kraus operator."""
    a = np.zeros((len(walk.labels),) * 2, dtype=object)
    for e in walk.edges:
        a[walk.index[e.target], walk.index[e.source]] += len(e.kraus)
    out = np.identity(len(walk.labels), dtype=object)
    for _ in range(n):
        out = a.dot(out)
    return out


def regularity_probe(walk: WalkModel, max_n: int | None = None) -> int | None:
    """Smallest ``n`` with ``counts[i, j] >= dim h_j`` for all ``i, j``.

    This is a necessary condition for n-regularity, reported as a diagnostic.
    """
    max_n = 2 * len(walk.labels) * max(walk.dims.values()) if max_n is None else max_n
    need = np.array([walk.dims[lab] for lab in walk.labels], dtype=object)[None, :]
    a = path_counts(walk, 1)
    cur = a.copy()
    for n in range(1, max_n + 1):
        if np.all(cur >= need):
            return n
        cur = a.dot(cur)
    return None


def _blocks_json(x: BlockOperator) -> dict:
    return {lab: [[[float(v.real), float(v.imag)] for v in row] for row in b]
            for lab, b in x.items()}


@dataclass
class AnalysisReport:
    name: str
    stochastic_ok: bool
    worst_deviation: float
    fixed_space_dim: int
    irreducible: bool
    period: int | None
    peripheral: list
    invariant_states: list
    decomposition: dict
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)

    def lines(self) -> list[str]:
        d = self.decomposition
        out = [
            f"walk: {self.name}",
            f"stochastic: {'ok' if self.stochastic_ok else 'FAILED'} "
            f"(worst deviation {self.worst_deviation:.3e})",
            f"fixed space dimension: {self.fixed_space_dim}",
            f"irreducible: {'yes' if self.irreducible else 'no'}",
            f"period: {self.period if self.period is not None else 'undefined (reducible)'}",
            f"peripheral eigenvalues: {len(self.peripheral)}",
            f"transient dimension: {d['transient_dim']}",
            f"singleton enclosures: {d['singletons']}",
        ]
        for k, f in enumerate(d["families"]):
            out.append(f"family {k}: member dims {f['member_dims']}, "
                       f"isometry {'yes' if f['isometries'] else 'no'}")
        dg = self.diagnostics
        if "loop_gcd" in dg:
            pairs = ", ".join(f"{k}={v}" for k, v in dg["loop_gcd"].items())
            out.append(f"loop gcd at e_1: {pairs}")
        if "regularity_n" in dg:
            out.append(f"path-count regularity probe: {dg['regularity_n']}")
        if "cyclic_dims" in dg:
            out.append(f"cyclic subspace dims: {dg['cyclic_dims']}")
        return out


def analyze(walk: WalkModel, tol: float = DEFAULT_RANK_TOL, seed: int = 0,
            loop_len: int | None = None) -> AnalysisReport:
    """Stochasticity, fixed space, irreducibility, period, decomposition and diagnostics.

    A walk failing validation gets a report with ``stochastic_ok`` false and
    the remaining fields left empty.
    """
    val = validate(walk)
    if not val.ok:
        return AnalysisReport(walk.name, False, val.worst_deviation, 0, False, None, [], [],
                              {"transient_dim": None, "singletons": [], "families": []})
    inv = invariant_states(walk, tol)
    irreducible = inv.dim == 1 and is_faithful(inv.states[0], tol)
    if irreducible:
        rep = period(walk)
        per = rep.period
        peripheral = rep.peripheral
    else:
        per = None
        peripheral = peripheral_spectrum(walk).peripheral
    dec = minimal_enclosures(walk, seed=seed, tol=tol)
    diag = {
        "loop_gcd": {lab: loop_gcd(walk, lab, np.eye(walk.dims[lab])[0], loop_len)
                     for lab in walk.labels},
        "regularity_n": regularity_probe(walk),
    }
    if irreducible and per > 1:
        diag["cyclic_dims"] = [s.dim for s in cyclic_resolution(walk, per).subspaces]
    return AnalysisReport(
        walk.name, True, val.worst_deviation, inv.dim, bool(irreducible), per,
        [[float(z.real), float(z.imag)] for z in peripheral],
        [_blocks_json(s) for s in inv.states], dec.summary(), diag)


def _open(out: str, name: str):
    return open(os.path.join(out, name), "w", newline="", encoding="utf-8")


def _write_series(out: str, walk: WalkModel, probs: np.ndarray, states: list[BlockOperator]):
    with _open(out, "site_probs.csv") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "site", "probability"])
        for k, row in enumerate(probs):
            for lab, p in zip(walk.labels, row):
                w.writerow([k, lab, FMT % p])
    with _open(out, "blocks.csv") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "site", "row", "col", "re", "im"])
        for k, s in enumerate(states):
            for lab in walk.labels:
                b = s[lab]
                for r in range(b.shape[0]):
                    for c in range(b.shape[1]):
                        w.writerow([k, lab, r, c, FMT % b[r, c].real, FMT % b[r, c].imag])


def emit_series(walk: WalkModel, rho0: BlockOperator, n: int, mode: str, out: str,
                trajectories: int = 1000, seed: int = 0) -> list[str]:
    """Write CSV series for ``mode`` (``direct``, ``cesaro`` or ``sample``); returns file names.

    In sample mode ``site_probs.csv`` and ``blocks.csv`` hold ensemble
    averages over ``trajectories`` walkers, while ``trajectory.csv`` and
    ``conditional_avg.csv`` describe trajectory 0.
    """
    if mode not in ("direct", "cesaro", "sample"):
        raise ConfigError(f"unknown mode {mode!r}")
    if n < 0:
        raise ConfigError("number of steps must be non-negative")
    os.makedirs(out, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise OSError(f"directory {out!r} is not writable")
    if mode != "sample":
        states = evolve(walk, rho0, n)
        if mode == "cesaro":
            states = cesaro_series(states)
        _write_series(out, walk, site_probabilities(states), states)
        return ["site_probs.csv", "blocks.csv"]
    means, probs = [], []

    def record(ens):
        means.append(ens.average())
        probs.append(ens.site_counts() / ens.size)

    run_ensemble(walk, rho0, n, trajectories, seed, record)
    _write_series(out, walk, np.array(probs), means)
    sample = sample_trajectory(walk, rho0, n, seed, 0)
    stats = occupation_stats(walk, sample)
    with _open(out, "trajectory.csv") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "site"])
        w.writerows(enumerate(sample.sites))
    with _open(out, "conditional_avg.csv") as fh:
        w = csv.writer(fh)
        w.writerow(["site", "visits", "row", "col", "re", "im"])
        for lab in walk.labels:
            if lab not in stats.conditional_avg:
                continue
            b = stats.conditional_avg[lab]
            for r in range(b.shape[0]):
                for c in range(b.shape[1]):
                    w.writerow([lab, stats.counts[lab], r, c, FMT % b[r, c].real,
                                FMT % b[r, c].imag])
    return ["site_probs.csv", "blocks.csv", "trajectory.csv", "conditional_avg.csv"]
