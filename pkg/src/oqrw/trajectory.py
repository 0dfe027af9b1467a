"""Monte Carlo sampling of the measured process ``(X_n, rho_n)``.

From ``(j, rho)`` the next site is ``i`` with probability ``Tr Phi_ij(rho)``,
``Phi_ij(rho) = sum_L L rho L*`` over all Kraus operators of the edge
``j -> i``, and the new internal state is ``Phi_ij(rho)`` renormalized.

Trajectory ``k`` of a run with seed ``s`` draws its uniforms from
``SeedSequence(s, spawn_key=(k,))``: one for ``X_0`` and one per step. The
single-trajectory sampler and the batched ensemble consume the same stream,
so trajectory ``k`` lands on the same sites either way.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.stats

from .errors import NumericalError, StructuralError
from .model import BlockOperator, WalkModel, apply
from .spectral import evolve, site_probabilities

PROB_TOL = 1e-9


def stream(seed: int, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def _choose(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF choice per row of ``probs`` (shape ``(m, T)``) with uniforms ``u``."""
    probs = np.where(probs > 0, probs, 0.0)
    total = probs.sum(axis=1)
    bad = np.abs(total - 1) > PROB_TOL
    if bad.any():
        raise NumericalError(
            f"transition probabilities sum to {total[bad][0]!r}; is the walk validated?")
    cum = np.cumsum(probs, axis=1)
    t = probs.shape[1]
    last = t - 1 - np.argmax(probs[:, ::-1] > 0, axis=1)
    cum[np.arange(t)[None, :] >= last[:, None]] = 1.0
    return np.argmax(cum > u[:, None], axis=1)


def _initial(walk: WalkModel, rho0: BlockOperator):
    if not rho0.is_state(1e-9):
        raise StructuralError("initial operator is not a state")
    return np.array([rho0.site_traces()[lab] for lab in walk.labels], dtype=float)


class _Moves:
    """Per source site: target indices and stacked Kraus operators ``(k, d_i, d_j)``."""

    def __init__(self, walk: WalkModel):
        self.walk = walk
        self.targets = []
        self.stacks = []
        for j in walk.labels:
            edges = sorted(walk.outgoing(j), key=lambda e: walk.index[e.target])
            self.targets.append(np.array([walk.index[e.target] for e in edges], dtype=int))
            self.stacks.append([np.stack(e.kraus) for e in edges])
        for j, tg in zip(walk.labels, self.targets):
            if not tg.size:
                raise StructuralError(f"site {j!r} has no outgoing edge")


@dataclass
class TrajectorySample:
    seed: int
    sites: list
    states: list | None = None
    index: int = 0

    @property
    def n(self) -> int:
        return len(self.sites) - 1


def sample_trajectory(walk: WalkModel, rho0: BlockOperator, n: int, seed: int, index: int = 0,
                      record_states: bool = True) -> TrajectorySample:
    """One trajectory of length ``n`` (``n + 1`` recorded positions)."""
    if n < 0:
        raise ValueError("n must be non-negative")
    moves = _Moves(walk)
    u = stream(seed, index).random(n + 1)
    p0 = _initial(walk, rho0)
    x = int(_choose(p0[None, :], u[:1])[0])
    rho = rho0[walk.labels[x]] / p0[x]
    sites = [walk.labels[x]]
    states = [rho] if record_states else None
    for k in range(1, n + 1):
        outs = [(st @ rho @ st.conj().transpose(0, 2, 1)).sum(axis=0) for st in moves.stacks[x]]
        probs = np.array([np.trace(o).real for o in outs])
        t = int(_choose(probs[None, :], u[k:k + 1])[0])
        rho = outs[t] / probs[t]
        rho = (rho + rho.conj().T) / 2
        x = int(moves.targets[x][t])
        sites.append(walk.labels[x])
        if record_states:
            states.append(rho)
    return TrajectorySample(seed, sites, states, index)


class Ensemble:
    """``K`` independent trajectories advanced together.

    States are kept zero-padded to the largest site dimension, so a whole
    group of trajectories sitting at the same site moves with one stacked
    matrix product per target.
    """

    def __init__(self, walk: WalkModel, rho0: BlockOperator, trajectories: int, n: int,
                 seed: int):
        self.walk = walk
        self.moves = _Moves(walk)
        self.size = int(trajectories)
        self.n = int(n)
        self.step = 0
        dmax = max(walk.dims.values())
        self.dmax = dmax
        self.uniforms = np.empty((self.size, n + 1))
        for k in range(self.size):
            self.uniforms[k] = stream(seed, k).random(n + 1)
        p0 = _initial(walk, rho0)
        self.sites = _choose(np.broadcast_to(p0, (self.size, len(p0))), self.uniforms[:, 0])
        self.states = np.zeros((self.size, dmax, dmax), dtype=complex)
        for x, lab in enumerate(walk.labels):
            d = walk.dims[lab]
            self.states[self.sites == x, :d, :d] = rho0[lab] / p0[x] if p0[x] > 0 else 0
        self._padded = []
        for j, lab in enumerate(walk.labels):
            row = []
            for st in self.moves.stacks[j]:
                pad = np.zeros((st.shape[0], dmax, dmax), dtype=complex)
                pad[:, :st.shape[1], :st.shape[2]] = st
                row.append(pad)
            self._padded.append(row)

    def advance(self):
        if self.step >= self.n:
            raise ValueError("ensemble already advanced to its final step")
        self.step += 1
        u = self.uniforms[:, self.step]
        new_sites = self.sites.copy()
        new_states = np.empty_like(self.states)
        for j in np.unique(self.sites):
            idx = np.flatnonzero(self.sites == j)
            s = self.states[idx]
            outs = []
            for pad in self._padded[j]:
                o = np.zeros_like(s)
                for op in pad:
                    o += op @ s @ op.conj().T
                outs.append(o)
            outs = np.stack(outs, axis=1)  # (m, T, D, D)
            probs = np.trace(outs, axis1=2, axis2=3).real
            t = _choose(probs, u[idx])
            pick = outs[np.arange(len(idx)), t] / probs[np.arange(len(idx)), t][:, None, None]
            new_states[idx] = (pick + pick.conj().transpose(0, 2, 1)) / 2
            new_sites[idx] = self.moves.targets[j][t]
        self.sites, self.states = new_sites, new_states

    def average(self) -> BlockOperator:
        """Empirical mean of ``rho_n (x) |X_n><X_n|``."""
        blocks = {}
        for x, lab in enumerate(self.walk.labels):
            d = self.walk.dims[lab]
            blocks[lab] = self.states[self.sites == x, :d, :d].sum(axis=0) / self.size
        return BlockOperator(self.walk.dims, blocks)

    def site_counts(self) -> np.ndarray:
        return np.bincount(self.sites, minlength=len(self.walk.labels))


def run_ensemble(walk: WalkModel, rho0: BlockOperator, n: int, trajectories: int, seed: int,
                 callback=None) -> Ensemble:
    """Advance ``trajectories`` walkers ``n`` steps; ``callback(ens)`` after each step incl. 0."""
    ens = Ensemble(walk, rho0, trajectories, n, seed)
    if callback:
        callback(ens)
    for _ in range(n):
        ens.advance()
        if callback:
            callback(ens)
    return ens


@dataclass
class OccupationStats:
    counts: dict
    freq: dict
    conditional_avg: dict
    km_average: BlockOperator


def occupation_stats(walk: WalkModel, sample: TrajectorySample) -> OccupationStats:
    """Visit counts, frequencies, per-site mean conditional states and the running average.

    Averages run over all ``n + 1`` recorded positions ``X_0 ... X_n``.
    """
    if sample.states is None:
        raise ValueError("sample has no recorded states")
    if not sample.sites:
        raise ValueError("empty sample")
    total = len(sample.sites)
    sums = {lab: np.zeros((d, d), dtype=complex) for lab, d in walk.dims.items()}
    counts = dict.fromkeys(walk.labels, 0)
    for x, rho in zip(sample.sites, sample.states):
        sums[x] += rho
        counts[x] += 1
    freq = {lab: c / total for lab, c in counts.items()}
    cond = {lab: sums[lab] / counts[lab] for lab in walk.labels if counts[lab]}
    km = BlockOperator(walk.dims, {lab: s / total for lab, s in sums.items()})
    return OccupationStats(counts, freq, cond, km)


def km_residual(walk: WalkModel, stats: OccupationStats) -> float:
    """``|M(A) - A|_1`` for the running average ``A``; small when ``A`` is nearly invariant."""
    a = stats.km_average
    return (apply(walk, a) - a).trace_norm()


@dataclass
class ComparisonReport:
    exact: np.ndarray
    observed: np.ndarray
    statistic: float
    dof: int
    p_value: float
    passed: bool
    bins: list = field(default_factory=list)


def chi_square(observed, expected_prob, alpha: float = 1e-3, min_expected: float = 5.0
               ) -> ComparisonReport:
    """Pearson goodness of fit; bins with expected count below ``min_expected`` are pooled."""
    observed = np.asarray(observed, dtype=float)
    p = np.clip(np.asarray(expected_prob, dtype=float), 0, None)
    total = observed.sum()
    expected = p * total
    if np.any((expected == 0) & (observed > 0)):
        return ComparisonReport(p, observed, np.inf, 0, 0.0, False)
    keep = expected > 0
    order = [k for k in np.argsort(expected) if keep[k]]
    bins = [[k] for k in order if expected[k] >= min_expected]
    small = [k for k in order if expected[k] < min_expected]
    if small:
        if expected[small].sum() >= min_expected or not bins:
            bins.insert(0, small)
        else:
            bins[0] = small + bins[0]
    obs = np.array([observed[b].sum() for b in bins])
    exp = np.array([expected[b].sum() for b in bins])
    dof = len(bins) - 1
    if dof == 0:
        ok = bool(np.isclose(obs.sum(), exp.sum()))
        return ComparisonReport(p, observed, 0.0, 0, 1.0 if ok else 0.0, ok, bins)
    stat = float(((obs - exp) ** 2 / exp).sum())
    pval = float(scipy.stats.chi2.sf(stat, dof))
    return ComparisonReport(p, observed, stat, dof, pval, pval >= alpha, bins)


def law_comparison(walk: WalkModel, rho0: BlockOperator, n: int, trials: int, seed: int,
                   alpha: float = 1e-3) -> ComparisonReport:
    """Empirical law of ``X_n`` over ``trials`` trajectories against ``Tr M^n(rho)(i)``."""
    exact = site_probabilities(evolve(walk, rho0, n)[-1:])[0]
    ens = run_ensemble(walk, rho0, n, trials, seed)
    return chi_square(ens.site_counts(), exact, alpha)
