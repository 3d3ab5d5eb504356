import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import erf, roots_legendre

from modscatter.config import SimConfig, build_u_star, default_config
from modscatter.evolution import (
    LeakAbort,
    UNIT_CELL_KERNEL_INTEGRAL,
    _coulomb_multiplier_raw,
    coulomb_coefficient,
    coulomb_convolve,
    evolve,
    hartree_potential,
    hartree_step,
    initial_data,
    nls_step,
)
from modscatter.scattering import profile_transform
from modscatter.spectral import ComplexField, Grid, forward_transform, free_propagate

from conftest import SMALL_NLS


class TestInitialData:
    def test_zero_amplitude_gives_zero_field(self):
        cfg = SimConfig(**{**SMALL_NLS.to_dict(), "eps": 0.0})
        u1, info = initial_data(cfg)
        assert np.all(u1.values == 0)
        assert info["small_data_norm"] == 0.0

    def test_gaussian_mass(self):
        u1, _ = initial_data(SMALL_NLS)
        # free propagation is an isometry, so ‖u(1)‖₂ = ‖u_*‖₂ = 0.5·π^{1/4}
        assert abs(u1.l2() - 0.5 * np.pi**0.25) < 1e-8
        assert u1.time == SMALL_NLS.t_start

    def test_profile_at_t1_equals_initial_transform(self):
        u1, _ = initial_data(SMALL_NLS)
        f_hat = profile_transform(u1)
        u_star_hat = forward_transform(build_u_star(SMALL_NLS))
        err = np.max(np.abs(f_hat.values - u_star_hat.values))
        assert err < 1e-12


class TestNlsStep:
    def test_zero_field(self):
        g = Grid(1, 256, 60.0)
        z = ComplexField(g, np.zeros(256), 1.0, "physical")
        assert np.all(nls_step(z, 1e-3).values == 0)

    def test_mass_isometry_per_step(self):
        u1, _ = initial_data(SMALL_NLS)
        out = nls_step(u1, 5e-3)
        assert abs(out.l2() - u1.l2()) < 1e-13 * u1.l2()

    def test_reversibility(self):
        u1, _ = initial_data(SMALL_NLS)
        back = nls_step(nls_step(u1, 5e-3), -5e-3)
        assert np.max(np.abs(back.values - u1.values)) < 1e-11 * u1.linf()

    def test_rejects_2d(self):
        g = Grid(2, 16, 8.0)
        f = ComplexField(g, np.zeros((16, 16)), 1.0, "physical")
        with pytest.raises(ValueError):
            nls_step(f, 1e-3)

    def test_first_picard_iterate_oracle(self):
        # u(t0+dt) ≈ e^{idtΔ/2}u0 - i ∫[t0,t0+dt] e^{i(t0+dt-s)Δ/2}|u(s)|²u(s) ds
        # with u(s) the free flow of u0 inside the integral; 4-point Gauss in s.
        cfg = SimConfig(equation="nls1d", points_per_dim=2048, box_length=200.0,
                        t_end=2.0, dt=1e-3, eps=0.5, allow_wraparound=True)
        u0, _ = initial_data(cfg)
        dt = 1e-3
        stepped = nls_step(u0, dt)
        nodes, weights = roots_legendre(4)
        acc = np.zeros_like(u0.values)
        for xk, wk in zip(nodes, weights):
            s = 0.5 * dt * (xk + 1.0)
            us = free_propagate(u0, s)
            gs = np.abs(us.values) ** 2 * us.values
            gfield = ComplexField(u0.grid, gs, us.time, "physical")
            acc = acc + wk * free_propagate(gfield, dt - s).values
        integral = 0.5 * dt * acc
        oracle = free_propagate(u0, dt).values - 1j * integral
        assert np.max(np.abs(stepped.values - oracle)) < 1e-5


class TestCoulombMultiplier:
    def test_gamma_coefficient_values(self):
        assert abs(coulomb_coefficient(2) - 1.0) < 1e-14
        for n in (2, 3):
            assert abs(coulomb_coefficient(n, 1) * coulomb_coefficient(n, n - 1) - 1.0) < 1e-14

    def test_2d_multiplier_is_2pi_over_xi(self):
        g = Grid(2, 32, 16.0)
        mult = _coulomb_multiplier_raw(g)
        import scipy.fft as sfft
        ax = 2 * np.pi * sfft.fftfreq(32, d=g.dx)
        xi = np.hypot(ax[:, None], ax[None, :])
        off_zero = xi > 0
        assert np.allclose(mult[off_zero], 2 * np.pi / xi[off_zero], rtol=1e-14)

    def test_zero_mode_is_cell_average(self):
        g = Grid(2, 32, 16.0)
        mult = _coulomb_multiplier_raw(g)
        expected = 2 * np.pi * UNIT_CELL_KERNEL_INTEGRAL[2] / g.dxi
        assert abs(mult[0, 0] - expected) < 1e-12 * expected

    def test_unit_cell_integrals_against_quadrature(self):
        # n = 2: ∫_{[-1/2,1/2]²}|ζ|^{-1} = 4 ln(1+√2); checked by the heat-kernel
        # identity 1/r = π^{-1/2} ∫ u^{-1/2} e^{-r²u} du.
        val2 = quad(lambda u: (1 / math.sqrt(math.pi)) * u**-0.5
                    * (math.sqrt(math.pi) * erf(math.sqrt(u) / 2) / math.sqrt(u)) ** 2,
                    0, np.inf, limit=400)[0]
        assert abs(val2 - UNIT_CELL_KERNEL_INTEGRAL[2]) < 1e-9
        # n = 3: ∫_{[-1/2,1/2]³}|ζ|^{-2} via 1/r² = ∫ e^{-r²u} du.
        val3 = quad(lambda u: (math.sqrt(math.pi) * erf(math.sqrt(u) / 2) / math.sqrt(u)) ** 3,
                    0, np.inf, limit=400)[0]
        assert abs(val3 - UNIT_CELL_KERNEL_INTEGRAL[3]) < 1e-8


def gaussian_charge_field(n=128, L=40.0, a=1.5):
    g = Grid(3, n, L)
    rho = (2 * np.pi * a * a) ** -1.5 * np.exp(-g.radius2() / (2 * a * a))
    return ComplexField(g, np.sqrt(rho), 0.0, "physical"), a


class TestHartreePotential:
    def test_rejects_1d(self):
        g = Grid(1, 64, 16.0)
        f = ComplexField(g, np.ones(64), 0.0, "physical")
        with pytest.raises(ValueError):
            hartree_potential(f)

    def test_real_valued(self):
        rng = np.random.default_rng(4)
        g = Grid(2, 64, 40.0)
        u = ComplexField(g, (rng.standard_normal((64, 64)) + 1j * rng.standard_normal((64, 64)))
                         * np.exp(-g.radius2() / 8), 0.0, "physical")
        v = hartree_potential(u).values
        assert np.max(np.abs(v.imag)) < 1e-12 * np.max(np.abs(v.real))

    def test_positive_for_nonnegative_density(self):
        g = Grid(2, 128, 60.0)
        u = ComplexField(g, np.exp(-g.radius2() / 2), 0.0, "physical")
        assert hartree_potential(u).values.real.min() > 0

    def test_erf_closed_form_verified_by_radial_quadrature(self):
        # V(r) = (4π/r)∫₀^r ρ s² ds + 4π ∫_r^∞ ρ s ds for the radial Gaussian charge
        a = 1.5
        rho = lambda s: (2 * np.pi * a * a) ** -1.5 * np.exp(-(s**2) / (2 * a * a))
        for r in (1.0, 3.0, 7.0):
            inner = quad(lambda s: rho(s) * s * s, 0, r, limit=200)[0]
            outer = quad(lambda s: rho(s) * s, r, 40, limit=200)[0]
            v = 4 * np.pi * inner / r + 4 * np.pi * outer
            assert abs(v - erf(r / (a * math.sqrt(2))) / r) < 1e-10

    def test_matches_closed_form_up_to_lattice_constant(self):
        # On a periodic box the potential differs from the free-space closed
        # form by an O(1/L) lattice constant; the x-dependent part must match.
        u, a = gaussian_charge_field()
        g = u.grid
        V = hartree_potential(u).values.real
        c = g.points_per_dim // 2
        r = np.abs(g.axis())
        exact = np.where(r > 0, erf(r / (a * math.sqrt(2))) / np.maximum(r, 1e-300), 0.0)
        window = (r > 3 * a) & (r < g.box_length / 4)
        diff = V[:, c, c][window] - exact[window]
        offset = diff.mean()
        assert np.max(np.abs(diff - offset)) < 1e-2 * np.max(np.abs(exact[window]))
        assert abs(offset) < 10.0 / g.box_length

    @pytest.mark.xfail(strict=True, reason="periodic-box lattice constant ~0.3/L exceeds "
                       "the free-space closed form at this tolerance for any feasible box")
    def test_erf_closed_form_at_spec_tolerance(self):
        u, a = gaussian_charge_field()
        g = u.grid
        V = hartree_potential(u).values.real
        c = g.points_per_dim // 2
        r = np.abs(g.axis())
        exact = np.where(r > 0, erf(r / (a * math.sqrt(2))) / np.maximum(r, 1e-300), 0.0)
        window = (r > a) & (r < g.box_length / 4)
        rel = np.abs(V[:, c, c][window] - exact[window]) / np.abs(exact[window])
        assert rel.max() < 1e-6

    def test_zero_mode_contribution_identity(self):
        # Replacing the cell-averaged zero mode by zero shifts V by exactly
        # M(0)·mean(ρ): pins the cell-average factor itself.
        u, _ = gaussian_charge_field(64, 24.0, 1.0)
        g = u.grid
        rho = np.abs(u.values) ** 2
        V = coulomb_convolve(g, rho)
        mult = _coulomb_multiplier_raw(g)
        m0 = mult.flat[0]
        import scipy.fft as sfft
        mult_jell = mult.copy()
        mult_jell.flat[0] = 0.0
        raw = sfft.ifftshift(rho).astype(complex)
        v_jell = sfft.fftshift(sfft.ifftn(mult_jell * sfft.fftn(raw)).real)
        shift = V - v_jell
        expected = m0 * rho.mean()
        assert np.max(np.abs(shift - expected)) < 1e-12 * abs(expected)


class TestHartreeStep:
    def test_zero_field(self):
        g = Grid(2, 32, 16.0)
        z = ComplexField(g, np.zeros((32, 32)), 1.0, "physical")
        assert np.all(hartree_step(z, 1e-2).values == 0)

    def test_mass_isometry(self):
        cfg = SimConfig(equation="hartree2d", points_per_dim=64, box_length=64.0,
                        t_end=2.0, dt=1e-2, eps=0.05, initial_width=3.0,
                        allow_wraparound=True)
        u0, _ = initial_data(cfg)
        out = hartree_step(u0, 1e-2)
        assert abs(out.l2() - u0.l2()) < 1e-13 * u0.l2()

    def test_first_picard_iterate_oracle(self):
        cfg = SimConfig(equation="hartree2d", points_per_dim=64, box_length=64.0,
                        t_end=2.0, dt=1e-3, eps=0.05, initial_width=3.0,
                        allow_wraparound=True)
        u0, _ = initial_data(cfg)
        dt = 1e-3
        stepped = hartree_step(u0, dt)
        nodes, weights = roots_legendre(4)
        acc = np.zeros_like(u0.values)
        for xk, wk in zip(nodes, weights):
            s = 0.5 * dt * (xk + 1.0)
            us = free_propagate(u0, s)
            pot = hartree_potential(us).values.real
            gfield = ComplexField(u0.grid, pot * us.values, us.time, "physical")
            acc = acc + wk * free_propagate(gfield, dt - s).values
        oracle = free_propagate(u0, dt).values - 1j * 0.5 * dt * acc
        assert np.max(np.abs(stepped.values - oracle)) < 1e-5


class TestEvolve:
    def test_zero_data_trivial(self):
        cfg = SimConfig(**{**SMALL_NLS.to_dict(), "eps": 0.0, "t_end": 3.0})
        series = evolve(cfg)
        assert series.mass_drift == 0.0
        assert all(np.all(s.u.values == 0) for s in series.snapshots)

    def test_linear_hook_reduces_to_free_flow(self):
        cfg = SimConfig(**{**SMALL_NLS.to_dict(), "t_end": 5.0})
        series = evolve(cfg, linear_only=True)
        u0, _ = initial_data(cfg)
        for snap in series.snapshots:
            ref = free_propagate(u0, snap.time - cfg.t_start)
            assert np.max(np.abs(snap.u.values - ref.values)) < 1e-11

    def test_snapshot_profile_invariant(self, small_series):
        snap = small_series.snapshots[-1]
        ref = forward_transform(free_propagate(snap.u, -snap.time))
        err = np.max(np.abs(snap.f_hat.values - ref.values))
        assert err < 1e-12 * np.max(np.abs(snap.f_hat.values))

    def test_mass_drift_small(self, small_series):
        assert small_series.mass_drift < 1e-11

    def test_gauge_covariance(self):
        cfg = SimConfig(**{**SMALL_NLS.to_dict(), "points_per_dim": 512,
                           "box_length": 130.0, "t_end": 3.0})
        u0, _ = initial_data(cfg)
        theta = 0.7
        rotated = ComplexField(u0.grid, np.exp(1j * theta) * u0.values, u0.time, "physical")
        a = evolve(cfg, initial=u0)
        b = evolve(cfg, initial=rotated)
        for sa, sb in zip(a.snapshots, b.snapshots):
            err = np.max(np.abs(sb.u.values - np.exp(1j * theta) * sa.u.values))
            assert err < 1e-12

    def test_second_order_convergence(self):
        cfg = dict(equation="nls1d", points_per_dim=512, box_length=60.0,
                   t_end=2.0, eps=0.5, allow_wraparound=True)
        sols = {}
        for dt in (8e-3, 4e-3, 1e-3):
            u, _ = initial_data(SimConfig(**cfg, dt=dt))
            steps = round(1.0 / dt)
            for _ in range(steps):
                u = nls_step(u, dt)
            sols[dt] = u.values
        e1 = np.max(np.abs(sols[8e-3] - sols[1e-3]))
        e2 = np.max(np.abs(sols[4e-3] - sols[1e-3]))
        ratio = e1 / e2
        assert 4 * 0.8 < ratio < 4 * 1.2

    def test_scaling_consistency_lambda_2(self):
        # if u solves the cubic equation, so does v(t,x) = λu(λ²t, λx); λ = 2 on
        # nested grids (grid B = grid A scaled by 1/2, same point count).
        # The equation is autonomous, so u(16) is reached by continuing u(4).
        cfg_a1 = SimConfig(equation="nls1d", points_per_dim=2048, box_length=200.0,
                           t_end=4.0, dt=4e-3, eps=0.5, allow_wraparound=True,
                           leak_threshold=1.0)
        ua4 = evolve(cfg_a1).snapshots[-1].u
        cfg_a2 = SimConfig(**{**cfg_a1.to_dict(), "t_end": 13.0})
        ua4_t1 = ComplexField(cfg_a2.grid, ua4.values, 1.0, "physical")
        ua16 = evolve(cfg_a2, initial=ua4_t1).snapshots[-1].u

        # v(1, x) = 2 u(4, 2x): samples of v live on the half-size lattice
        cfg_b = SimConfig(equation="nls1d", points_per_dim=2048, box_length=100.0,
                          t_end=4.0, dt=1e-3, eps=0.5, allow_wraparound=True,
                          leak_threshold=1.0)
        v0 = ComplexField(cfg_b.grid, 2.0 * ua4.values, 1.0, "physical")
        vb4 = evolve(cfg_b, initial=v0).snapshots[-1]
        assert abs(vb4.time - 4.0) < 1e-9
        err = np.max(np.abs(vb4.u.values - 2.0 * ua16.values))
        assert err < 1e-4

    def test_snapshot_times_include_geometric_sequence(self, small_series):
        cfg = small_series.config
        ts = small_series.times()
        assert np.allclose(ts, cfg.snapshot_times())

    def test_leak_abort_carries_partial_series(self):
        cfg = SimConfig(equation="nls1d", points_per_dim=512, box_length=60.0,
                        t_end=30.0, dt=5e-3, eps=0.5, allow_wraparound=True)
        with pytest.raises(LeakAbort) as exc_info:
            evolve(cfg)
        partial = exc_info.value.partial
        assert partial is not None and len(partial.snapshots) >= 1
        assert partial.snapshots[-1].time < 30.0

    def test_hartree_series_sane(self, small_hartree_series):
        s = small_hartree_series
        assert s.mass_drift < 1e-11
        assert s.max_boundary_amplitude < 1e-8
        linf = [n.linf for n in s.norm_table]
        assert linf[-1] < linf[0]
