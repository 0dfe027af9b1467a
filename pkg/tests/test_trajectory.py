import numpy as np
import pytest

from oqrw.errors import NumericalError
from oqrw.model import BlockOperator, TransitionEdge, WalkModel, apply
from oqrw.registry import builtin
from oqrw.spectral import evolve, unique_invariant_state
from oqrw.trajectory import (chi_square, km_residual, law_comparison, occupation_stats,
                             run_ensemble, sample_trajectory)


def identity_walk():
    return WalkModel.from_kraus({"a": 2}, {("a", "a"): [np.eye(2)]}, "id")


class TestSample:
    def test_identity_walk(self):
        w = identity_walk()
        rho = BlockOperator(w.dims, {"a": np.array([[0.25, 0.1], [0.1, 0.75]])})
        s = sample_trajectory(w, rho, 20, seed=1)
        assert s.sites == ["a"] * 21
        for r in s.states:
            np.testing.assert_allclose(r, rho["a"], atol=1e-15)

    def test_first_step_law(self):
        w = builtin("m3")
        rho = BlockOperator.pure(w, "1")
        ens = run_ensemble(w, rho, 1, 30000, seed=2)
        freq = ens.site_counts() / ens.size
        assert freq[0] == 0
        assert abs(freq[1] - 1 / 3) < 0.01 and abs(freq[2] - 2 / 3) < 0.01

    def test_determinism(self):
        w = builtin("ex-9.6")
        rho = BlockOperator.pure(w, "1", [0.6, 0.8j])
        a = sample_trajectory(w, rho, 200, seed=9)
        b = sample_trajectory(w, rho, 200, seed=9)
        assert a.sites == b.sites
        assert all(np.array_equal(x, y) for x, y in zip(a.states, b.states))
        c = sample_trajectory(w, rho, 200, seed=10)
        assert c.sites != a.sites

    def test_states_stay_normalized(self):
        w = builtin("z8-period4")
        s = sample_trajectory(w, BlockOperator.pure(w, "0", [1, 1j]), 500, seed=4)
        for r in s.states:
            assert abs(np.trace(r) - 1) <= 1e-9
            assert np.linalg.eigvalsh(r).min() >= -1e-9

    def test_ensemble_matches_single_streams(self):
        w = builtin("m4-eps")
        rho = BlockOperator.pure(w, "1")
        ens = run_ensemble(w, rho, 30, 16, seed=6)
        single = [sample_trajectory(w, rho, 30, 6, k, record_states=False).sites[-1]
                  for k in range(16)]
        assert [w.labels[x] for x in ens.sites] == single

    def test_unvalidated_walk_detected(self):
        w = builtin("m3")
        bad = WalkModel(w.sites, [TransitionEdge(e.source, e.target, (0.9 * e.kraus[0],))
                                  for e in w.edges])
        with pytest.raises(NumericalError):
            sample_trajectory(bad, BlockOperator.pure(bad, "1"), 3, seed=0)

    @pytest.mark.parametrize("name", ["m3", "ex-9.2", "ex-6.11", "z8-period4"])
    def test_unbiased(self, name):
        w = builtin(name)
        rho = BlockOperator.pure(w, w.labels[0])
        n = 6
        ens = run_ensemble(w, rho, n, 100000, seed=12)
        exact = evolve(w, rho, n)[-1]
        assert (ens.average() - exact).trace_norm() <= 0.02

    def test_recurrence(self):
        for name in ("m3", "m4", "z8-period4"):
            w = builtin(name)
            s = sample_trajectory(w, BlockOperator.pure(w, w.labels[0]), 10000, seed=1,
                                  record_states=False)
            assert set(s.sites) == set(w.labels)


class TestOccupation:
    def test_single_site(self):
        w = identity_walk()
        st = occupation_stats(w, sample_trajectory(w, BlockOperator.pure(w, "a"), 5, seed=0))
        assert st.freq == {"a": 1.0} and st.counts == {"a": 6}

    def test_requires_states(self):
        w = identity_walk()
        s = sample_trajectory(w, BlockOperator.pure(w, "a"), 5, seed=0, record_states=False)
        with pytest.raises(ValueError):
            occupation_stats(w, s)

    def test_invariants(self):
        w = builtin("ex-6.4")
        st = occupation_stats(w, sample_trajectory(w, BlockOperator.pure(w, "1", [1, 1]),
                                                   2000, seed=3))
        assert sum(st.freq.values()) == pytest.approx(1)
        for c in st.conditional_avg.values():
            assert abs(np.trace(c) - 1) < 1e-10 and np.linalg.eigvalsh(c).min() > -1e-10
        assert abs(st.km_average.trace() - 1) < 1e-10

    def test_km_residual_exact(self):
        w = builtin("m3")
        st = occupation_stats(w, sample_trajectory(w, BlockOperator.pure(w, "1"), 10, seed=0))
        st.km_average = unique_invariant_state(w)
        assert km_residual(w, st) <= 1e-12

    def test_km_residual_periodic(self):
        w = builtin("m4")
        st = occupation_stats(w, sample_trajectory(w, BlockOperator.pure(w, "1"), 100000,
                                                   seed=8))
        assert km_residual(w, st) < 0.01
        a = st.km_average
        assert abs((apply(w, a) - a).trace_norm() - km_residual(w, st)) < 1e-15


class TestLaw:
    def test_n0_exact(self):
        w = builtin("m3")
        rho = BlockOperator(w.dims, {"1": np.eye(2) / 4, "3": np.eye(2) / 4})
        rep = law_comparison(w, rho, 0, 4000, seed=0)
        np.testing.assert_allclose(rep.exact, [0.5, 0, 0.5])
        assert rep.passed and rep.observed[1] == 0

    def test_chi_square_detects_mismatch(self):
        rep = chi_square([600, 400], [0.5, 0.5])
        assert not rep.passed and rep.dof == 1
        assert chi_square([510, 490], [0.5, 0.5]).passed

    def test_impossible_bin(self):
        rep = chi_square([5, 995], [0.0, 1.0])
        assert not rep.passed

    def test_pooling(self):
        rep = chi_square([2, 3, 95, 900], [0.002, 0.003, 0.095, 0.9])
        assert rep.dof == 2 and rep.passed
        assert sorted(rep.bins[0]) == [0, 1]
        # an undersized pool is folded into the next bin
        rep = chi_square([1, 2, 997], [0.001, 0.002, 0.997])
        assert rep.dof == 0 and rep.passed
