"""Stencil oracles and structure properties of the staggered operators."""

import numpy as np
import pytest

from efrsim import (PressureField, StaggeredGrid, VelocityField, convection,
                    curl, diffusion, divergence, gradient, operator_matrices,
                    project)

from conftest import random_field, taylor_green


def hand_divergence(u, v, h):
    """Independent loop-based stencil evaluation."""
    n = u.shape[0]
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = (u[i, j] - u[i - 1, j]) / h + (v[i, j] - v[i, j - 1]) / h
    return out


class TestDivergence:
    def test_constant_field_is_divergence_free(self, grid32):
        f = VelocityField(np.ones((32, 32)), np.zeros((32, 32)), grid32)
        assert np.max(np.abs(divergence(f).values)) == 0.0

    def test_single_mode_matches_hand_stencil(self, grid32):
        n, h = 32, grid32.h
        i = np.arange(n)
        xu = (i[:, None] + 1.0) * h
        u = np.sin(2 * np.pi * xu) * np.ones((1, n))
        f = VelocityField(u, np.zeros((n, n)), grid32)
        got = divergence(f).values
        expected = hand_divergence(f.u, f.v, h)
        assert np.max(np.abs(got - expected)) < 1e-13
        # closed form: 2 pi cos at cell centers with the discrete sinc factor
        xc = (i[:, None] + 0.5) * h
        sinc = np.sin(np.pi * h) / (np.pi * h)
        analytic = 2 * np.pi * sinc * np.cos(2 * np.pi * xc) * np.ones((1, n))
        assert np.max(np.abs(got - analytic)) < 1e-10

    def test_projected_field_is_divergence_free(self, grid32):
        f = project(random_field(grid32, seed=3))
        assert np.max(np.abs(divergence(f).values)) <= 1e-10 * f.inf_norm()


class TestGradient:
    def test_constant_pressure_has_zero_gradient(self, grid16):
        p = PressureField(3.5 * np.ones((16, 16)), grid16)
        g = gradient(p)
        assert g.inf_norm() == 0.0

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_adjoint_identity(self, grid32, seed):
        rng = np.random.Generator(np.random.Philox(seed))
        p = PressureField(rng.standard_normal((32, 32)), grid32)
        u = random_field(grid32, seed=seed + 10)
        lhs = gradient(p).dot(u)
        rhs = -np.sum(p.values * divergence(u).values)
        scale = abs(lhs) + abs(rhs) + 1.0
        assert abs(lhs - rhs) < 1e-12 * scale

    def test_cosine_matches_stencil(self, grid16):
        n, h = 16, StaggeredGrid(16).h
        i = np.arange(n)
        xc = (i[:, None] + 0.5) * h
        p = PressureField(np.cos(2 * np.pi * xc) * np.ones((1, n)), grid16)
        g = gradient(p)
        expected = np.zeros((n, n))
        for ii in range(n):
            for jj in range(n):
                expected[ii, jj] = (p.values[(ii + 1) % n, jj] - p.values[ii, jj]) / h
        assert np.max(np.abs(g.u - expected)) < 1e-13
        assert np.max(np.abs(g.v)) < 1e-13


class TestDiffusion:
    def test_constant_field_in_nullspace(self, grid16):
        f = VelocityField(np.full((16, 16), 2.0), np.full((16, 16), -1.0), grid16)
        assert diffusion(f).inf_norm() == 0.0

    def test_single_mode_eigenfunction(self, grid32):
        n, h = 32, StaggeredGrid(32).h
        i = np.arange(n)
        xu = (i[:, None] + 1.0) * h
        u = np.sin(2 * np.pi * xu) * np.ones((1, n))
        f = VelocityField(u, np.zeros((n, n)), grid32)
        lam = (2 * np.cos(2 * np.pi * h) - 2) / h ** 2
        got = diffusion(f)
        assert np.max(np.abs(got.u - lam * f.u)) < 1e-9
        assert np.max(np.abs(got.v)) == 0.0

    def test_symmetry(self, grid32):
        u = random_field(grid32, seed=5)
        v = random_field(grid32, seed=6)
        lhs = diffusion(u).dot(v)
        rhs = diffusion(v).dot(u)
        assert abs(lhs - rhs) < 1e-12 * (abs(lhs) + 1.0)

    def test_negative_semidefinite(self, grid32):
        for seed in range(4):
            u = random_field(grid32, seed=seed)
            assert u.dot(diffusion(u)) <= 0.0


class TestConvection:
    def test_zero_field(self, grid16):
        assert convection(VelocityField.zeros(grid16)).inf_norm() == 0.0

    def test_uniform_field(self, grid16):
        f = VelocityField(np.ones((16, 16)), np.zeros((16, 16)), grid16)
        assert convection(f).inf_norm() < 1e-14

    @pytest.mark.parametrize("n", [16, 32])
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_energy_neutral_on_raw_fields(self, n, seed):
        grid = StaggeredGrid(n)
        u = random_field(grid, seed=seed)
        scale = u.norm_sq() * u.inf_norm() / grid.h
        assert abs(u.dot(convection(u))) < 1e-12 * scale

    def test_matches_plain_flux_form_on_solenoidal_fields(self, grid32):
        # the divergence correction vanishes identically on projected fields
        u = project(random_field(grid32, seed=9))
        h = grid32.h
        uu, vv = u.u, u.v
        u_c = 0.5 * (uu + np.roll(uu, 1, axis=0))
        v_c = 0.5 * (vv + np.roll(vv, 1, axis=1))
        u_k = 0.5 * (uu + np.roll(uu, -1, axis=1))
        v_k = 0.5 * (vv + np.roll(vv, -1, axis=0))
        uv = u_k * v_k
        plain_u = (np.roll(u_c * u_c, -1, 0) - u_c * u_c) / h + (uv - np.roll(uv, 1, 1)) / h
        plain_v = (uv - np.roll(uv, 1, 0)) / h + (np.roll(v_c * v_c, -1, 1) - v_c * v_c) / h
        got = convection(u)
        scale = u.inf_norm() ** 2 / h
        assert np.max(np.abs(got.u - plain_u)) < 1e-12 * scale
        assert np.max(np.abs(got.v - plain_v)) < 1e-12 * scale


class TestCurl:
    def test_constant_field(self, grid16):
        f = VelocityField(np.ones((16, 16)), np.ones((16, 16)), grid16)
        assert np.max(np.abs(curl(f).values)) == 0.0

    def test_curl_of_gradient_vanishes(self, grid32):
        rng = np.random.Generator(np.random.Philox(11))
        p = PressureField(rng.standard_normal((32, 32)), grid32)
        g = gradient(p)
        scale = g.inf_norm() / grid32.h + 1.0
        assert np.max(np.abs(curl(g).values)) < 1e-12 * scale

    def test_single_mode_matches_stencil(self, grid32):
        n, h = 32, StaggeredGrid(32).h
        i = np.arange(n)
        yu = (i[None, :] + 0.5) * h
        xv = (i[:, None] + 0.5) * h
        f = VelocityField(-np.sin(2 * np.pi * yu) * np.ones((n, 1)),
                          np.sin(2 * np.pi * xv) * np.ones((1, n)), grid32)
        got = curl(f).values
        expected = np.zeros((n, n))
        for ii in range(n):
            for jj in range(n):
                expected[ii, jj] = ((f.v[(ii + 1) % n, jj] - f.v[ii, jj]) / h
                                    - (f.u[ii, (jj + 1) % n] - f.u[ii, jj]) / h)
        assert np.max(np.abs(got - expected)) < 1e-12
        # closed form: sum of cosines at corners with the sinc factor
        xk = (i[:, None] + 1.0) * h
        yk = (i[None, :] + 1.0) * h
        sinc = np.sin(np.pi * h) / (np.pi * h)
        analytic = 2 * np.pi * sinc * (np.cos(2 * np.pi * xk) + np.cos(2 * np.pi * yk))
        assert np.max(np.abs(got - analytic)) < 1e-10

    def test_periodic_mean_vorticity_vanishes(self, grid32):
        f = random_field(grid32, seed=13)
        assert abs(curl(f).mean()) < 1e-13 * f.inf_norm() / grid32.h


class TestShiftEquivariance:
    @pytest.mark.parametrize("axis", [0, 1])
    def test_operators_commute_with_translations(self, grid16, axis):
        f = random_field(grid16, seed=21)
        shifted = VelocityField(np.roll(f.u, 1, axis=axis),
                                np.roll(f.v, 1, axis=axis), grid16)
        for op in (divergence, curl):
            a = op(shifted).values
            b = np.roll(op(f).values, 1, axis=axis)
            assert np.max(np.abs(a - b)) < 1e-12
        for op in (diffusion, convection):
            a = op(shifted)
            b = op(f)
            assert np.max(np.abs(a.u - np.roll(b.u, 1, axis=axis))) < 1e-11
            assert np.max(np.abs(a.v - np.roll(b.v, 1, axis=axis))) < 1e-11


class TestOperatorMatrices:
    def test_matrices_match_matrix_free_operators(self):
        grid = StaggeredGrid(8)
        mats = operator_matrices(grid)
        f = random_field(grid, seed=2)
        flat = f.flatten()
        assert np.allclose(mats["divergence"] @ flat,
                           divergence(f).values.ravel(), atol=1e-12)
        assert np.allclose(mats["curl"] @ flat, curl(f).values.ravel(), atol=1e-12)
        assert np.allclose(mats["diffusion"] @ flat,
                           diffusion(f).flatten(), atol=1e-9)
        rng = np.random.Generator(np.random.Philox(3))
        p = rng.standard_normal((8, 8))
        assert np.allclose(mats["gradient"] @ p.ravel(),
                           gradient(PressureField(p, grid)).flatten(), atol=1e-12)

    def test_gradient_is_negative_transpose_of_divergence(self):
        mats = operator_matrices(StaggeredGrid(8))
        diff = (mats["gradient"] + mats["divergence"].T).toarray()
        assert np.max(np.abs(diff)) == 0.0

    def test_diffusion_matrix_symmetric(self):
        d = operator_matrices(StaggeredGrid(8))["diffusion"].toarray()
        assert np.max(np.abs(d - d.T)) == 0.0

    def test_curl_of_gradient_matrix_is_zero(self):
        mats = operator_matrices(StaggeredGrid(8))
        prod = (mats["curl"] @ mats["gradient"]).toarray()
        assert np.max(np.abs(prod)) < 1e-10


def test_taylor_green_is_discretely_divergence_free(grid64):
    tg = taylor_green(grid64)
    assert np.max(np.abs(divergence(tg).values)) < 1e-12 / grid64.h
