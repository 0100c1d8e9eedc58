import math

import numpy as np
import pytest

from oqbm import gammaz0, oracle, specfun as sf, spectral
from oqbm.core import LaplaceCoherent, Params, SpatialGrid, sample_initial, to_bloch
from oqbm.errors import QuadratureNotConverged, ScaleMismatch, WrongRegime

RATES = Params(gamma_p=1e-2, gamma_z=0.0, delta=1e-1, omega=1e-2)
IC = LaplaceCoherent.for_params(p=0.25, r=0.0, q=-0.5, params=RATES)
IC_FULL = LaplaceCoherent.for_params(p=0.25, r=0.5, q=-0.5, params=RATES)
GRID = SpatialGrid(224.0, 4096)


class TestThetaQuadrature:
    def test_polynomial_exactness(self):
        # a rule of order n integrates monomials up to degree 2n-1 exactly
        rule = gammaz0.ThetaQuadrature.build(8)
        for k in range(16):
            got = float(np.sum(rule.weights * rule.nodes**k))
            exact = math.pi ** (k + 1) / (k + 1)
            assert abs(got - exact) < 1e-12 * exact

    def test_caching_returns_same_rule(self):
        assert gammaz0.ThetaQuadrature.build(64) is gammaz0.ThetaQuadrature.build(64)


class TestKernelConvolutions:
    def test_kappa1_of_laplace_outside_cone(self):
        # exact identity: (f * k1)(x) = f(x) for x > 2 t delta
        t = 25.0
        c = RATES.omega / RATES.delta

        def f_l(y):
            return 0.5 * c * np.exp(-c * np.abs(y))

        x = np.array([5.5, 7.0, 12.0, 30.0])
        got = gammaz0.convolve_kappa1(f_l, t, x, RATES)
        assert np.max(np.abs(got - f_l(x))) < 1e-10

    def test_kappa0_of_laplace_outside_cone(self):
        t = 25.0
        c = RATES.omega / RATES.delta

        def f_l(y):
            return 0.5 * c * np.exp(-c * np.abs(y))

        x = np.array([5.5, 7.0, 12.0, 30.0])
        got = gammaz0.convolve_kappa0(f_l, t, x, RATES)
        assert np.max(np.abs(got - t * f_l(x))) < 1e-10

    def test_quadrature_cap_raises(self):
        def noisy(y):
            return np.random.default_rng(0).normal(size=y.shape)

        with pytest.raises(QuadratureNotConverged):
            gammaz0.convolve_kappa0(noisy, 25.0, np.array([0.0]), RATES, tol=1e-14)


class TestIdentities:
    def test_all_printed_identities(self):
        rep = gammaz0.convolution_identities_check(
            RATES, 25.0, [-7.0, -2.0, 0.0, 1.5, 4.0, 5.5, 8.0, 12.0]
        )
        assert rep.max_error() < 1e-8
        assert rep.laplace_self < 1e-10
        assert rep.cone_k1 < 1e-10 and rep.cone_k0 < 1e-10


class TestGreen:
    def test_wrong_regime(self):
        with pytest.raises(WrongRegime):
            gammaz0.green_gammaz0(Params(1e-2, 1e-3, 1e-1, 1e-2), 1.0, GRID)

    def test_matches_quadrature_oracle(self):
        t = 25.0
        grid = SpatialGrid(224.0, 8192)
        G = gammaz0.green_gammaz0(RATES, t, grid)
        xi_max = math.sqrt(18 * math.log(10) / (2 * RATES.gamma_p * t))
        sel = np.linspace(0, grid.n_points - 1, 201).astype(int)
        K = oracle.quad_inverse_fourier(gammaz0.exp_symbol_closed(RATES, t), t,
                                        grid.nodes[sel], xi_max)
        err = max(np.max(np.abs(G.entries[i, j][sel] - K[:, i, j]))
                  for i in range(3) for j in range(3))
        assert err < 1e-7

    def test_matches_spectral_symbol(self):
        # the closed matrix exponential equals the generic one entrywise
        t = 25.0
        xi = np.linspace(-12, 12, 401)
        closed = gammaz0.exp_symbol_closed(RATES, t)(xi)
        generic = spectral.exp_symbols(xi, RATES, t)
        assert np.max(np.abs(closed - generic)) < 1e-12

    def test_undecayed_boundary_rejected(self):
        from oqbm.errors import TailNotDecayed

        # the Laplace-tailed kernels reach far beyond a 30-wide window
        with pytest.raises(TailNotDecayed):
            gammaz0.green_gammaz0(RATES, 25.0, SpatialGrid(30.0, 512))

    def test_corner_entries_symmetric(self):
        t = 10.0
        grid = SpatialGrid(224.0, 4096)
        G = gammaz0.green_gammaz0(RATES, t, grid)
        assert np.array_equal(G.entries[0, 2], G.entries[2, 0])


class TestLaplaceCoherentSolve:
    def test_scale_mismatch_rejected(self):
        bad = LaplaceCoherent(p=0.25, r=0.0, q=-0.5, scale=3.0)
        with pytest.raises(ScaleMismatch):
            gammaz0.solve_laplace_coherent(RATES, bad, 1.0, GRID)

    def test_zero_time_recovers_initial_data(self):
        u = gammaz0.solve_laplace_coherent(RATES, IC_FULL, 0.0, GRID)
        ref = to_bloch(sample_initial(IC_FULL, GRID))
        assert np.max(np.abs(u.rho_plus - ref.rho_plus)) == 0.0

    def test_short_time_approaches_initial_data(self):
        x = GRID.nodes
        u = gammaz0.solve_laplace_coherent(RATES, IC_FULL, 1e-3, GRID)
        ref = to_bloch(sample_initial(IC_FULL, GRID))
        away = np.abs(x) > 1.0  # the kink at 0 smooths instantly
        assert np.max(np.abs(u.rho_plus[away] - ref.rho_plus[away])) < 1e-5
        assert np.max(np.abs(u.rho_minus[away] - ref.rho_minus[away])) < 1e-5

    def test_against_transform_oracle(self):
        t = 25.0
        u = gammaz0.solve_laplace_coherent(RATES, IC_FULL, t, GRID)
        amp = math.sqrt(IC_FULL.p * (1 - IC_FULL.p))
        weights = np.array([1.0, IC_FULL.q * amp, 2 * IC_FULL.p - 1.0])
        closed = gammaz0.exp_symbol_closed(RATES, t)

        def symbol(xis):
            f_hat = 4 * RATES.omega**2 / (4 * (RATES.delta**2 * xis**2 + RATES.omega**2))
            out = np.zeros((xis.size, 3, 3), dtype=complex)
            out[:, :, 0] = np.einsum("mij,j->mi", closed(xis), weights) * f_hat[:, None]
            return out

        xi_max = math.sqrt(18 * math.log(10) / (2 * RATES.gamma_p * t))
        sel = np.linspace(0, GRID.n_points - 1, 151).astype(int)
        K = oracle.quad_inverse_fourier(symbol, t, GRID.nodes[sel], xi_max)
        assert np.max(np.abs(K[:, 0, 0] - u.rho_plus[sel])) < 1e-9
        assert np.max(np.abs(K[:, 1, 0] - u.c_i[sel])) < 1e-9
        assert np.max(np.abs(K[:, 2, 0] - u.rho_minus[sel])) < 1e-9

    def test_balanced_data_leaves_only_odd_channel(self):
        # q = 0 and p = 1/2 kill the coherent and population source terms
        ic = LaplaceCoherent.for_params(p=0.5, r=0.0, q=0.0, params=RATES)
        t = 25.0
        u = gammaz0.solve_laplace_coherent(RATES, ic, t, GRID)
        x = GRID.nodes

        def phm(y):
            return sf.phi_minus(t, y, RATES)

        expected = 0.5 * (phm(x) - gammaz0.convolve_kappa1(phm, t, x, RATES))
        assert np.max(np.abs(u.c_i - expected)) < 1e-12
        assert np.max(np.abs(u.rho_minus - 2 * RATES.omega
                             * gammaz0.convolve_kappa0(lambda y: sf.h_minus(t, y, RATES),
                                                       t, x, RATES))) < 1e-12

    def test_mass_conserved(self):
        for t in (1.0, 25.0, 100.0):
            u = gammaz0.solve_laplace_coherent(RATES, IC_FULL, t, GRID)
            assert abs(u.mass() - 1.0) < 1e-7

    def test_regrouped_density_and_imbalance_match_solution(self):
        t = 25.0
        u = gammaz0.solve_laplace_coherent(RATES, IC, t, GRID)
        P = gammaz0.probability_density(RATES, IC, t, GRID.nodes)
        Q = gammaz0.population_imbalance(RATES, IC, t, GRID.nodes)
        assert np.max(np.abs(P - u.rho_plus)) < 1e-9
        assert np.max(np.abs(Q - u.rho_minus)) < 1e-9

    def test_against_fd_oracle_over_the_figure_times(self):
        from oqbm import oracle

        grid = SpatialGrid(224.0, 8192)
        times = [25.0, 50.0, 75.0, 100.0]
        fd = oracle.fd_integrate(RATES, IC, 100.0, grid, snapshot_times=times,
                                 richardson=False)
        for t in times:
            P = gammaz0.probability_density(RATES, IC, t, grid.nodes)
            Q = gammaz0.population_imbalance(RATES, IC, t, grid.nodes)
            assert np.max(np.abs(fd.snapshots[t].rho_plus - P)) < 5e-5, t
            assert np.max(np.abs(fd.snapshots[t].rho_minus - Q)) < 5e-5, t

    def test_small_driving_limit_of_green_entries(self):
        # as omega -> 0 the cone kernels collapse onto the pure deltas, so the
        # (3,3) entry becomes the half-sum of edge-shifted heat kernels and
        # the off-diagonal driving entries vanish
        p = Params(gamma_p=1e-2, gamma_z=0.0, delta=1e-1, omega=1e-9)
        t = 25.0
        grid = SpatialGrid(64.0, 1024)
        G = gammaz0.green_gammaz0(p, t, grid)
        x = grid.nodes
        reach = 2 * t * p.delta
        ref = 0.5 * (sf.heat_kernel(t, x - reach, p.gamma_p)
                     + sf.heat_kernel(t, x + reach, p.gamma_p))
        assert np.max(np.abs(G.entries[2, 2] - ref)) < 1e-10
        # driving entries scale linearly in omega: (2,3) ~ om * t, (3,2) ~ 4x
        assert np.max(np.abs(G.entries[1, 2])) < 5.0 * t * p.omega
        assert np.max(np.abs(G.entries[2, 1])) < 20.0 * t * p.omega

    def test_far_cone_formula_is_only_approximate(self):
        # replacing the cone convolutions by their pointwise tails ignores
        # the Gaussian smoothing across the cone edge; the deviation is real
        t = 25.0
        cone = 2 * t * RATES.delta
        x = GRID.nodes[(GRID.nodes > cone + 0.5) & (GRID.nodes < cone + 10.0)]
        u1_tail, _, _ = gammaz0.far_cone_solution(RATES, IC, t, x)
        u = gammaz0.solve_laplace_coherent(RATES, IC, t, GRID)
        exact = np.interp(x, GRID.nodes, u.rho_plus)
        deviation = np.max(np.abs(u1_tail - exact))
        assert 1e-4 < deviation < 1e-1
