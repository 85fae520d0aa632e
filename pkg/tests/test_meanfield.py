from __future__ import annotations

import csv
import io
import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from potts_anneal.errors import CapacityError, DomainError, UnsupportedConfigurationError
from potts_anneal.meanfield import (FIRST_ORDER, HALF_HOT, ONE_HOT, SECOND_ORDER, MeanFieldParams,
                                    OrderPoint, build_effective_hamiltonian, classify, free_energy,
                                    gamma_grid, ground_energy, minimize_free_energy,
                                    solve_infinite_q, sweep_csv, sweep_gamma,
                                    symmetric_sector_ground_energy)

from oracles import lowest_eigenvalue_bisection

m_values = st.floats(-1.0, 1.0, allow_nan=False)


class TestParams:
    def test_half_hot_needs_even_q(self):
        with pytest.raises(UnsupportedConfigurationError):
            MeanFieldParams(Q=3, constraint=HALF_HOT)

    @pytest.mark.parametrize("kwargs", [{"J": 0.0}, {"lam": -1.0}, {"Q": 1}, {"gamma": -0.1},
                                        {"beta": 0.0}, {"constraint": "both"}])
    def test_invalid(self, kwargs):
        with pytest.raises(DomainError):
            MeanFieldParams(**kwargs)

    @pytest.mark.parametrize("constraint, q, sizes", [(ONE_HOT, 3, (2, 1)), (ONE_HOT, 5, (4, 1)),
                                                       (HALF_HOT, 4, (2, 2)), (HALF_HOT, 6, (3, 3))])
    def test_grouping(self, constraint, q, sizes):
        assert MeanFieldParams(Q=q, constraint=constraint).group_sizes == sizes


class TestHamiltonian:
    def test_half_hot_q2_diagonal(self):
        p = MeanFieldParams(Q=2, constraint=HALF_HOT, lam=1.0, J=1.0, gamma=0.0)
        h = build_effective_hamiltonian(p, [1.0, -1.0])
        np.testing.assert_array_equal(np.diag(h), [1.0, -2.0, 2.0, 1.0])
        assert np.count_nonzero(h - np.diag(np.diag(h))) == 0

    def test_two_free_spins_spectrum(self):
        p = MeanFieldParams(Q=2, constraint=HALF_HOT, lam=0.0, gamma=1.0)
        h = build_effective_hamiltonian(p, [0.0, 0.0])
        np.testing.assert_allclose(np.linalg.eigvalsh(h), [-2.0, 0.0, 0.0, 2.0], atol=1e-14)

    @given(st.integers(2, 6), st.sampled_from([ONE_HOT, HALF_HOT]), st.floats(0, 3), st.data())
    def test_symmetric(self, q, constraint, gamma, data):
        if constraint == HALF_HOT and q % 2:
            q += 1
        p = MeanFieldParams(Q=q, constraint=constraint, gamma=gamma)
        m = data.draw(st.lists(m_values, min_size=q, max_size=q))
        h = build_effective_hamiltonian(p, m)
        assert np.array_equal(h, h.T)

    def test_off_diagonal_structure(self):
        p = MeanFieldParams(Q=3, gamma=0.7)
        h = build_effective_hamiltonian(p, [0.1, 0.2, 0.3])
        for a, b in itertools.combinations(range(8), 2):
            expected = -0.7 if bin(a ^ b).count("1") == 1 else 0.0
            assert h[a, b] == expected

    @pytest.mark.parametrize("q", [3, 5])
    def test_longitudinal_field(self, q):
        # at gamma = 0 the diagonal is (lam/2Q)(sum s)^2 - sum (J m + lam (Q-2)/Q) s
        lam, m = 1.4, np.linspace(-0.5, 0.5, q)
        p = MeanFieldParams(Q=q, lam=lam, J=0.9)
        assert p.longitudinal_field == pytest.approx(lam * (q - 2) / q)
        diag = np.diag(build_effective_hamiltonian(p, m))
        for idx, spins in enumerate(itertools.product((1, -1), repeat=q)):
            s = np.array(spins, dtype=float)
            expected = lam / (2 * q) * s.sum() ** 2 - np.dot(0.9 * m + lam * (q - 2) / q, s)
            assert diag[idx] == pytest.approx(expected, abs=1e-13)

    def test_no_longitudinal_field_q2_or_half_hot(self):
        assert MeanFieldParams(Q=2).longitudinal_field == 0.0
        assert MeanFieldParams(Q=4, constraint=HALF_HOT).longitudinal_field == 0.0

    def test_capacity(self):
        with pytest.raises(CapacityError):
            build_effective_hamiltonian(MeanFieldParams(Q=13), np.zeros(13))

    def test_magnetisation_range(self):
        with pytest.raises(DomainError):
            build_effective_hamiltonian(MeanFieldParams(Q=2), [1.5, 0.0])


class TestGroundEnergy:
    def test_diagonal(self):
        assert ground_energy(np.diag([1.0, -2.0, 2.0, 1.0])) == -2.0

    def test_flip_pair(self):
        assert ground_energy(np.array([[0.0, -0.7], [-0.7, 0.0]])) == pytest.approx(-0.7, abs=1e-15)

    def test_rejects_asymmetric(self):
        with pytest.raises(DomainError):
            ground_energy(np.array([[0.0, 1.0], [0.0, 0.0]]))

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_inertia_oracle(self, seed):
        rng = np.random.default_rng(seed)
        p = MeanFieldParams(Q=3, gamma=float(rng.uniform(0, 2)), lam=float(rng.uniform(0, 2)))
        h = build_effective_hamiltonian(p, rng.uniform(-1, 1, 3))
        assert ground_energy(h) == pytest.approx(lowest_eigenvalue_bisection(h), abs=1e-10)

    @given(st.permutations(range(4)), st.lists(m_values, min_size=4, max_size=4), st.floats(0, 2))
    def test_permutation_invariance(self, perm, m, gamma):
        p = MeanFieldParams(Q=4, constraint=HALF_HOT, gamma=gamma)
        e1 = ground_energy(build_effective_hamiltonian(p, m))
        e2 = ground_energy(build_effective_hamiltonian(p, [m[k] for k in perm]))
        assert e1 == pytest.approx(e2, abs=1e-12)

    @given(st.integers(2, 6), m_values, m_values, st.floats(0, 2))
    def test_sector_reduction_agrees(self, q, mp, mm, gamma):
        for constraint in (ONE_HOT, HALF_HOT):
            if constraint == HALF_HOT and q % 2:
                continue
            p = MeanFieldParams(Q=q, constraint=constraint, gamma=gamma)
            full = ground_energy(build_effective_hamiltonian(p, p.expand(mp, mm)))
            assert symmetric_sector_ground_energy(p, mp, mm) == pytest.approx(full, abs=1e-10)


class TestFreeEnergy:
    def test_half_hot_q2_ground_state(self):
        p = MeanFieldParams(Q=2, constraint=HALF_HOT)
        f, eps = free_energy(p, 1.0, -1.0)
        assert eps == pytest.approx(-2.0)
        assert f == pytest.approx(-1.0)

    @pytest.mark.parametrize("q", [2, 3, 4, 5])
    def test_free_transverse_spins(self, q):
        p = MeanFieldParams(Q=q, lam=0.0, gamma=0.8)
        f, _ = free_energy(p, 0.0, 0.0)
        assert f == pytest.approx(-q * 0.8, abs=1e-12)

    def test_finite_beta_gap_bound(self):
        p = MeanFieldParams(Q=3, gamma=0.5)
        h = build_effective_hamiltonian(p, p.expand(0.4, -0.2))
        ev = np.linalg.eigvalsh(h)
        gap = ev[1] - ev[0]
        beta = 1e3
        f_inf, _ = free_energy(p, 0.4, -0.2)
        f_beta, _ = free_energy(MeanFieldParams(Q=3, gamma=0.5, beta=beta), 0.4, -0.2)
        assert abs(f_beta - f_inf) <= 3 * math.exp(-beta * gap) + 1e-12

    @given(st.floats(0.05, 50), m_values, m_values, st.floats(0, 2), st.integers(2, 4))
    def test_trace_bound(self, beta, mp, mm, gamma, q):
        p_inf = MeanFieldParams(Q=q, gamma=gamma)
        p_beta = MeanFieldParams(Q=q, gamma=gamma, beta=beta)
        f_inf, _ = free_energy(p_inf, mp, mm)
        f_beta, _ = free_energy(p_beta, mp, mm)
        assert f_beta <= f_inf + 1e-12
        assert f_inf <= f_beta + q * math.log(2) / beta + 1e-12

    def test_large_beta_does_not_overflow(self):
        f, _ = free_energy(MeanFieldParams(Q=4, gamma=0.3, beta=1e8), 0.5, 0.5)
        assert math.isfinite(f)


class TestMinimize:
    @pytest.mark.parametrize("q", [2, 3, 4])
    def test_trivial_ground_state(self, q):
        pt = minimize_free_energy(MeanFieldParams(Q=q, gamma=0.0))
        assert pt.m_plus == pytest.approx(1.0, abs=1e-8)
        assert pt.m_minus == pytest.approx(-1.0, abs=1e-8)

    def test_q3_large_gamma_both_positive(self):
        pt = minimize_free_energy(MeanFieldParams(Q=3, gamma=2.0))
        assert pt.m_plus > 0 and pt.m_minus > 0

    @pytest.mark.parametrize("gamma", [0.0, 0.4, 0.9, 1.2, 1.6, 2.0])
    def test_half_hot_unbiased(self, gamma):
        pt = minimize_free_energy(MeanFieldParams(Q=4, constraint=HALF_HOT, gamma=gamma))
        assert abs(pt.m_plus + pt.m_minus) < 1e-6

    @pytest.mark.parametrize("constraint, q", [(ONE_HOT, 3), (HALF_HOT, 4)])
    @pytest.mark.parametrize("gamma", [0.3, 1.1])
    def test_point_invariants(self, constraint, q, gamma):
        p = MeanFieldParams(Q=q, constraint=constraint, gamma=gamma)
        pt = minimize_free_energy(p)
        n_plus, n_minus = p.group_sizes
        assert pt.m_plus >= pt.m_minus
        assert pt.free_energy == pytest.approx(
            0.5 * (n_plus * pt.m_plus ** 2 + n_minus * pt.m_minus ** 2) + pt.eps_min, abs=1e-12)

    def test_is_a_global_minimum_on_fine_grid(self):
        p = MeanFieldParams(Q=3, gamma=0.9)
        pt = minimize_free_energy(p)
        grid = np.linspace(-1, 1, 81)
        best = min(free_energy(p, a, b)[0] for a in grid for b in grid)
        assert pt.free_energy <= best + 1e-10

    def test_finite_beta_high_temperature_disorders(self):
        pt = minimize_free_energy(MeanFieldParams(Q=2, gamma=0.0, beta=0.2))
        assert abs(pt.m_plus) < 1e-6 and abs(pt.m_minus) < 1e-6


class TestSweep:
    def test_grid(self):
        g = gamma_grid(2.0, 0.01)
        assert len(g) == 201 and g[0] == 2.0 and g[-1] == 0.0
        assert np.all(np.diff(g) < 0)

    def test_grid_adds_zero(self):
        assert list(gamma_grid(0.25, 0.1)) == [0.25, 0.15, 0.05, 0.0]

    def test_classify(self):
        pts = [OrderPoint(g, m, -m, 0.0, 0.0) for g, m in [(0.2, 0.0), (0.1, 0.1), (0.0, 0.9)]]
        label, star, jump = classify(pts)
        assert label == FIRST_ORDER and star == pytest.approx(0.05) and jump == pytest.approx(0.8)
        assert classify(pts[:2])[0] == SECOND_ORDER

    def test_half_hot_coarse_sweep(self):
        res = sweep_gamma(MeanFieldParams(Q=4, constraint=HALF_HOT), 2.0, 0.1)
        mp = res.column("m_plus")
        assert np.all(np.diff(mp) >= -1e-9)  # decreasing gamma, so non-decreasing m_plus
        assert np.all(np.abs(mp + res.column("m_minus")) < 1e-6)
        assert [p.gamma for p in res.points] == sorted((p.gamma for p in res.points), reverse=True)

    def test_csv(self):
        res = sweep_gamma(MeanFieldParams(Q=2), 0.2, 0.1)
        rows = list(csv.reader(io.StringIO(sweep_csv(res))))
        assert rows[0] == ["gamma", "m_plus", "m_minus", "free_energy", "eps_min"]
        assert len(rows) == 4
        assert float(rows[-1][1]) == 1.0

    def test_threads_match_serial(self):
        p = MeanFieldParams(Q=3)
        a = sweep_gamma(p, 0.4, 0.2)
        b = sweep_gamma(p, 0.4, 0.2, threads=2)
        assert sweep_csv(a) == sweep_csv(b)


class TestInfiniteQ:
    @pytest.mark.parametrize("gamma", [0.2, 0.6, 0.9])
    def test_zero_temperature_root(self, gamma):
        assert solve_infinite_q(1.0, gamma) == pytest.approx(math.sqrt(1 - gamma ** 2), abs=1e-12)

    @pytest.mark.parametrize("gamma", [1.0, 1.5, 3.0])
    def test_paramagnet(self, gamma):
        assert solve_infinite_q(1.0, gamma) == 0.0

    def test_no_field(self):
        assert solve_infinite_q(1.0, 0.0) == 1.0
        assert solve_infinite_q(2.0, 0.0, beta=0.4) == 0.0

    @pytest.mark.parametrize("beta, gamma", [(2.0, 0.0), (3.0, 0.5), (10.0, 0.8)])
    def test_finite_temperature_fixed_point(self, beta, gamma):
        m = solve_infinite_q(1.0, gamma, beta)
        xi = math.hypot(m, gamma)
        assert m > 0
        assert m == pytest.approx(m / xi * math.tanh(beta * xi), abs=1e-12)

    def test_scales_with_j(self):
        assert solve_infinite_q(2.0, 1.2) == pytest.approx(0.8, abs=1e-12)

    def test_invalid(self):
        with pytest.raises(DomainError):
            solve_infinite_q(0.0, 0.5)
