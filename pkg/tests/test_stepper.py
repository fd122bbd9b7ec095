"""RK4 stepping, projection, forcing and the Smagorinsky closure."""

import warnings

import numpy as np
import pytest

from efrsim import (KolmogorovForcing, PressureField, SmagorinskyClosure,
                    SolverParams, StaggeredGrid, VelocityField, divergence,
                    energy, gradient, project, rhs, rk4_step,
                    smagorinsky_viscosity)
from efrsim.errors import CFLExceeded
from efrsim.stepper import smagorinsky_tendency
from efrsim.spectral import laplacian_symbol

from conftest import random_field, taylor_green


def quiet_rk4(field, params):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CFLExceeded)
        return rk4_step(field, params)


class TestRhs:
    def test_zero_field_zero_tendency(self, grid16):
        params = SolverParams(viscosity=1e-3, dt=1e-3)
        assert rhs(VelocityField.zeros(grid16), params).inf_norm() == 0.0

    def test_taylor_green_projected_tendency_is_viscous_decay(self, grid64):
        tg = taylor_green(grid64)
        nu = 1e-3
        params = SolverParams(viscosity=nu, dt=1e-3)
        tend = project(rhs(tg, params))
        target = -8 * np.pi ** 2 * nu
        err = max(np.max(np.abs(tend.u - target * tg.u)),
                  np.max(np.abs(tend.v - target * tg.v)))
        assert err <= 1e-2 * abs(target)

    def test_kolmogorov_forcing_shape(self, grid32):
        c_f, k_f = 0.65, 4
        params = SolverParams(viscosity=0.0, dt=1e-3,
                              forcing=KolmogorovForcing(c_f, k_f))
        tend = rhs(VelocityField.zeros(grid32), params)
        y = (np.arange(32) + 0.5) * grid32.h
        expected = c_f * np.sin(2 * np.pi * k_f * y)
        assert np.max(np.abs(tend.u - expected[None, :])) < 1e-14
        assert np.max(np.abs(tend.v)) == 0.0


class TestProject:
    def test_idempotent_on_solenoidal_field(self, grid32):
        f = project(random_field(grid32, seed=1))
        again = project(f)
        assert np.max(np.abs(again.u - f.u)) <= 1e-12 * f.inf_norm()

    def test_annihilates_pure_gradients(self, grid32):
        rng = np.random.Generator(np.random.Philox(2))
        g = gradient(PressureField(rng.standard_normal((32, 32)), grid32))
        out = project(g)
        assert out.inf_norm() <= 1e-10 * g.inf_norm()

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_divergence_after_projection(self, grid64, seed):
        f = project(random_field(grid64, seed=seed))
        assert np.max(np.abs(divergence(f).values)) <= 1e-10 * f.inf_norm()


class TestRK4:
    def test_zero_field_stays_zero(self, grid16):
        params = SolverParams(viscosity=1e-3, dt=1e-3)
        out = rk4_step(VelocityField.zeros(grid16), params)
        assert out.inf_norm() == 0.0

    def test_inviscid_energy_drift_is_high_order_per_step(self, grid32):
        # energy is conserved exactly by the spatial scheme, so the only
        # drift is the time integrator's own; halving dt must shrink it by
        # at least 2^4.5 (observed closer to 2^6, the quadratic-invariant
        # drift order of classical RK4)
        u0 = project(random_field(grid32, seed=4))
        drifts = []
        for dt in (1.6e-2, 8e-3):
            u1 = quiet_rk4(u0, SolverParams(viscosity=0.0, dt=dt))
            drifts.append(abs(energy(u1) - energy(u0)))
        assert drifts[0] > 1e-8       # far above roundoff
        assert drifts[0] / drifts[1] > 2 ** 4.5

    def test_taylor_green_semidiscrete_trajectory_is_exact(self, grid64):
        # the projected convection of the single-mode vortex vanishes
        # identically, so the only dynamics left is viscous decay at the
        # discrete diffusion eigenvalue; RK4 then reproduces the closed
        # form to roundoff at mild dt
        tg = taylor_green(grid64)
        nu, dt, nsteps = 1e-3, 5e-3, 20
        lam = 2 * (2 * np.cos(2 * np.pi * grid64.h) - 2) / grid64.h ** 2
        u = tg.copy()
        params = SolverParams(viscosity=nu, dt=dt)
        for _ in range(nsteps):
            u = rk4_step(u, params)
        amp = np.exp(nu * lam * dt * nsteps)
        assert np.max(np.abs(u.u - amp * tg.u)) < 1e-12

    def test_temporal_order_on_two_mode_field(self, grid32):
        # a genuinely nonlinear trajectory: error against a small-dt
        # reference run must shrink ~16x when dt halves
        rng = np.random.Generator(np.random.Philox(6))
        lam = laplacian_symbol(grid32)
        mask = (-lam * grid32.h ** 2 <= 1.0)  # keep only smooth modes
        f = random_field(grid32, seed=6)
        fu = np.fft.ifft2(np.fft.fft2(f.u) * mask).real
        fv = np.fft.ifft2(np.fft.fft2(f.v) * mask).real
        u0 = project(VelocityField(fu, fv, grid32))

        T, nu = 0.04, 1e-3

        def run(dt):
            u = u0.copy()
            params = SolverParams(viscosity=nu, dt=dt)
            for _ in range(int(round(T / dt))):
                u = quiet_rk4(u, params)
            return u

        ref = run(5e-4)
        errs = [(run(dt) - ref).inf_norm() for dt in (8e-3, 4e-3)]
        ratio = errs[0] / errs[1]
        assert 2 ** 3.8 < ratio < 2 ** 4.6

    def test_energy_nonincreasing_viscous_unforced(self, grid32):
        u = project(random_field(grid32, seed=7))
        params = SolverParams(viscosity=1e-3, dt=1e-3)
        energies = [energy(u)]
        for _ in range(20):
            u = quiet_rk4(u, params)
            energies.append(energy(u))
        assert np.all(np.diff(energies) <= 0)

    def test_emitted_states_divergence_free(self, grid32):
        u = project(random_field(grid32, seed=8))
        params = SolverParams(viscosity=1e-4, dt=1e-3)
        for _ in range(5):
            u = quiet_rk4(u, params)
            assert np.max(np.abs(divergence(u).values)) <= 1e-10 * max(u.inf_norm(), 1.0)

    def test_cfl_warning_advisory_only(self, grid16):
        f = VelocityField(np.full((16, 16), 10.0), np.zeros((16, 16)), grid16)
        f = project(f)
        params = SolverParams(viscosity=0.0, dt=1.0)
        with pytest.warns(CFLExceeded):
            out = rk4_step(f, params)
        assert out is not None


class TestKolmogorovFlow:
    def test_forced_run_reaches_sustained_energy(self, grid32):
        # the sinusoidal body force balances dissipation: energy must stay
        # bounded and not decay toward zero
        params = SolverParams(viscosity=1e-3, dt=2e-3,
                              forcing=KolmogorovForcing(0.65, 4))
        u = project(random_field(grid32, seed=11, scale=0.2))
        energies = []
        for _ in range(400):
            u = quiet_rk4(u, params)
            energies.append(energy(u))
        assert np.all(np.isfinite(energies))
        assert 0.01 < energies[-1] < 10.0
        # the same run without forcing decays well below the forced level
        params0 = SolverParams(viscosity=1e-3, dt=2e-3)
        v = project(random_field(grid32, seed=11, scale=0.2))
        for _ in range(400):
            v = quiet_rk4(v, params0)
        assert energy(v) < 0.5 * energies[-1]


class TestSmagorinsky:
    def test_constant_field_zero_viscosity(self, grid16):
        f = VelocityField(np.full((16, 16), 1.5), np.full((16, 16), -0.5), grid16)
        assert np.max(smagorinsky_viscosity(f, theta=0.17)) == 0.0

    def test_pure_shear_interior_value(self, grid32):
        # u = gamma * y is linear, so away from the periodic seam the
        # discrete strain is exact: nu_t = theta^2 width^2 gamma
        n, h = 32, StaggeredGrid(32).h
        gamma, theta = 2.0, 0.17
        y_u = (np.arange(n)[None, :] + 0.5) * h
        f = VelocityField(gamma * y_u * np.ones((n, 1)), np.zeros((n, n)),
                          StaggeredGrid(32))
        nu_t = smagorinsky_viscosity(f, theta=theta)
        expected = theta ** 2 * h ** 2 * gamma
        interior = nu_t[:, 2:-2]
        assert np.max(np.abs(interior - expected)) <= 1e-10 * expected

    def test_theta_zero_reduces_to_plain_rhs(self, grid16):
        f = random_field(grid16, seed=9)
        plain = rhs(f, SolverParams(viscosity=1e-3, dt=1e-3))
        closed = rhs(f, SolverParams(viscosity=1e-3, dt=1e-3,
                                     closure=SmagorinskyClosure(theta=0.0)))
        assert np.max(np.abs(plain.u - closed.u)) == 0.0

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_closure_dissipates_energy(self, grid32, seed):
        f = random_field(grid32, seed=seed)
        term = smagorinsky_tendency(f, SmagorinskyClosure(theta=0.17))
        assert f.dot(term) <= 0.0

    def test_viscosity_nonnegative(self, grid32):
        f = random_field(grid32, seed=10)
        assert np.min(smagorinsky_viscosity(f, theta=0.1)) >= 0.0
