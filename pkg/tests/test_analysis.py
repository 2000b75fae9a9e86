import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from eulermc.analysis import (
    MeshLadder,
    TestFunction,
    cesaro_average,
    consistency_residuals,
    dual_sobolev_norm,
    inject_to_fine,
    lq_norm,
    restrict_to_coarse,
)
from eulermc.errors import TopologyError
from eulermc.fields import FieldSet, GasParams, KHDataSpec, sample_kh_data, sample_stream
from eulermc.grid import Grid
from eulermc.scheme import SchemeParams, solve

GAS = GasParams()


def const_state(grid, rho, m1=0.0, m2=0.0):
    return FieldSet(
        grid,
        np.full(grid.ncells, rho),
        np.stack([np.full(grid.ncells, m1), np.full(grid.ncells, m2)]),
    )


class TestLqNorm:
    def test_constant_field_any_exponent(self):
        g = Grid(8, 8)
        f = np.full(g.ncells, 3.0)
        assert lq_norm(g, f, 1) == pytest.approx(3.0, rel=1e-14)
        assert lq_norm(g, f, 2) == pytest.approx(3.0, rel=1e-14)

    def test_half_box_indicator(self):
        g = Grid(8, 8)
        f = np.zeros(g.shape)
        f[:4, :] = 2.0
        assert lq_norm(g, f.ravel(), 1) == pytest.approx(1.0, rel=1e-14)

    def test_exponent_validation(self):
        g = Grid(4, 4)
        with pytest.raises(ValueError):
            lq_norm(g, np.zeros(g.ncells), 0.5)

    def test_vector_field_magnitude(self):
        g = Grid(4, 4)
        vec = np.stack([np.full(g.ncells, 3.0), np.full(g.ncells, 4.0)])
        assert lq_norm(g, vec, 2) == pytest.approx(5.0, rel=1e-14)

    @given(
        data=hnp.arrays(
            np.float64,
            (2, 36),
            elements=st.floats(-100, 100, allow_nan=False),
        ),
        q=st.sampled_from([1.0, 1.5, 2.0, 3.0]),
        scale=st.floats(-10, 10),
    )
    def test_homogeneity_and_triangle(self, data, q, scale):
        g = Grid(6, 6)
        a, b = data
        na = lq_norm(g, a, q)
        nb = lq_norm(g, b, q)
        nab = lq_norm(g, a + b, q)
        assert nab <= na + nb + 1e-9 * (1 + na + nb)
        assert lq_norm(g, scale * a, q) == pytest.approx(abs(scale) * na, rel=1e-12, abs=1e-12)


class TestDualSobolevNorm:
    def test_zero_and_constant(self):
        g = Grid(16, 16)
        assert dual_sobolev_norm(g, np.zeros(g.ncells), 4) == 0.0
        c = np.full(g.ncells, -2.5)
        assert dual_sobolev_norm(g, c, 4) == pytest.approx(2.5, rel=1e-12)

    @pytest.mark.parametrize("ell", [1, 2, 3, 4, 5, 6])
    @pytest.mark.parametrize("kvec", [(1, 0), (0, 1), (3, 2), (5, 7)])
    def test_single_mode_closed_form(self, ell, kvec):
        g = Grid(32, 32)
        kx, ky = kvec
        x1, x2 = g.cell_centers()
        amp = 1.7
        mode = amp * math.sqrt(2.0) * np.cos(2 * np.pi * (kx * x1 + ky * x2) + 0.3)
        kappa2 = (2 * np.pi * kx) ** 2 + (2 * np.pi * ky) ** 2
        expected = amp * (1.0 + kappa2) ** (-ell / 2.0)
        got = dual_sobolev_norm(g, mode.ravel(), ell)
        assert abs(got - expected) < 1e-10 * max(1.0, expected / 1e-6)

    def test_order_zero_is_l2_and_monotone_in_ell(self):
        g = Grid(12, 12)
        f = np.random.default_rng(2).standard_normal(g.ncells)
        l2 = lq_norm(g, f, 2)
        assert dual_sobolev_norm(g, f, 0) == pytest.approx(l2, rel=1e-12)
        norms = [dual_sobolev_norm(g, f, ell) for ell in range(5)]
        assert all(a >= b for a, b in zip(norms, norms[1:]))
        assert all(n <= l2 * (1 + 1e-12) for n in norms)


class TestTransfers:
    def test_injection_replicates_blocks(self):
        coarse = Grid(2, 2)
        fine = Grid(4, 4)
        fs = FieldSet(coarse, np.array([1.0, 2.0, 3.0, 4.0]), np.zeros((2, 4)))
        up = inject_to_fine(fs, fine)
        assert np.array_equal(
            fine.as2d(up.rho),
            np.array(
                [
                    [1.0, 1.0, 2.0, 2.0],
                    [1.0, 1.0, 2.0, 2.0],
                    [3.0, 3.0, 4.0, 4.0],
                    [3.0, 3.0, 4.0, 4.0],
                ]
            ),
        )

    def test_injection_preserves_mass_exactly(self):
        coarse, fine = Grid(4, 4), Grid(16, 16)
        rng = np.random.default_rng(0)
        fs = FieldSet(coarse, 1.0 + rng.random(16), rng.standard_normal((2, 16)))
        up = inject_to_fine(fs, fine)
        assert fine.cell_area * up.rho.sum() == pytest.approx(
            coarse.cell_area * fs.rho.sum(), rel=1e-15
        )

    def test_restrict_inverts_inject_bitwise(self):
        coarse, fine = Grid(3, 3, lx=3.0, ly=3.0), Grid(12, 12, lx=3.0, ly=3.0)
        rng = np.random.default_rng(1)
        fs = FieldSet(coarse, 1.0 + rng.random(9), rng.standard_normal((2, 9)))
        back = restrict_to_coarse(inject_to_fine(fs, fine), coarse)
        assert np.array_equal(back.rho, fs.rho)
        assert np.array_equal(back.mom, fs.mom)

    def test_restriction_block_average(self):
        coarse, fine = Grid(2, 2), Grid(4, 4)
        rho = np.ones((4, 4))
        rho[:2, :2] = [[1.0, 1.0], [3.0, 3.0]]
        fs = FieldSet(fine, rho.ravel(), np.zeros((2, 16)))
        down = restrict_to_coarse(fs, coarse)
        assert coarse.as2d(down.rho)[0, 0] == 2.0

    def test_restriction_preserves_mass(self):
        coarse, fine = Grid(4, 4), Grid(8, 8)
        rng = np.random.default_rng(5)
        fs = FieldSet(fine, 1.0 + rng.random(64), rng.standard_normal((2, 64)))
        down = restrict_to_coarse(fs, coarse)
        assert coarse.cell_area * down.rho.sum() == pytest.approx(
            fine.cell_area * fs.rho.sum(), rel=1e-14
        )

    def test_non_nested_grids_rejected(self):
        a = FieldSet.constant(Grid(6, 6), 1.0)
        with pytest.raises(TopologyError):
            inject_to_fine(a, Grid(9, 9))
        with pytest.raises(TopologyError):
            restrict_to_coarse(a, Grid(4, 4))
        with pytest.raises(TopologyError):
            inject_to_fine(a, Grid(12, 12, lx=2.0, ly=2.0))


class TestMeshLadder:
    def test_validates_dyadic_nesting(self):
        MeshLadder((Grid(4, 4), Grid(8, 8), Grid(16, 16)))
        with pytest.raises(TopologyError):
            MeshLadder((Grid(4, 4), Grid(12, 12)))
        with pytest.raises(ValueError):
            MeshLadder(())

    def test_from_nx(self):
        ladder = MeshLadder.from_nx((8, 16, 32))
        assert [g.nx for g in ladder] == [8, 16, 32]
        assert ladder.finest.nx == 32


class TestCesaroAverage:
    def test_single_member_identity(self):
        fs = const_state(Grid(4, 4), 1.5, 0.2)
        out = cesaro_average([fs])
        assert np.array_equal(out.rho, fs.rho) and out is not fs

    def test_equal_members(self):
        fs = const_state(Grid(4, 4), 1.5)
        out = cesaro_average([fs, fs.copy(), fs.copy()])
        assert np.array_equal(out.rho, fs.rho)

    def test_two_constants_average(self):
        a = const_state(Grid(4, 4), 1.0)
        b = const_state(Grid(8, 8), 3.0)
        out = cesaro_average([a, b])
        assert out.grid.nx == 8
        assert np.all(out.rho == 2.0)

    def test_permutation_invariance_and_linearity(self):
        rng = np.random.default_rng(9)
        grids = [Grid(4, 4), Grid(8, 8), Grid(16, 16)]
        states = [
            FieldSet(g, 1.0 + rng.random(g.ncells), rng.standard_normal((2, g.ncells)))
            for g in grids
        ]
        forward = cesaro_average(states)
        backward = cesaro_average(states[::-1])
        assert np.allclose(forward.rho, backward.rho, rtol=1e-14, atol=1e-14)
        doubled = cesaro_average(
            [FieldSet(s.grid, 2.0 * s.rho, 2.0 * s.mom) for s in states]
        )
        assert np.allclose(doubled.rho, 2.0 * forward.rho, rtol=1e-14)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            cesaro_average([])


def time_only_cutoff(t_final):
    def value(t, x1, x2):
        return np.full_like(x1, (1.0 - (t / t_final) ** 2) ** 3)

    def grad(t, x1, x2):
        return np.zeros_like(x1), np.zeros_like(x2)

    return TestFunction(value=value, grad=grad)


class TestConsistencyResiduals:
    def test_constant_trajectory_all_small(self):
        from eulermc.cli import default_test_pair

        g = Grid(16, 16)
        fs = const_state(g, 1.4, 0.7, -0.2)
        sp = SchemeParams(t_final=0.1)
        traj = solve(fs, GAS, sp, keep_all=True)
        phi, phivec = default_test_pair(sp.t_final)
        e1, e2, e3 = consistency_residuals(traj, fs, GAS, sp, phi, phivec)
        assert e1 <= 1e-10 and e2 <= 1e-10 and e3 <= 1e-10

    def test_space_constant_phi_telescopes_mass(self):
        g = Grid(16, 16)
        spec = KHDataSpec()
        fs = sample_kh_data(spec, g, sample_stream(0, 0))
        sp = SchemeParams(t_final=5 * 0.5 * g.h)
        traj = solve(fs, GAS, sp, keep_all=True)
        phi = time_only_cutoff(sp.t_final)
        e1, _, _ = consistency_residuals(traj, fs, GAS, sp, phi, (phi, phi))
        assert e1 <= 1e-12

    def test_invariant_under_constant_shift_of_phi(self):
        from eulermc.cli import default_test_pair

        g = Grid(16, 16)
        fs = sample_kh_data(KHDataSpec(), g, sample_stream(1, 1))
        sp = SchemeParams(t_final=4 * 0.5 * g.h)
        traj = solve(fs, GAS, sp, keep_all=True)
        phi, phivec = default_test_pair(sp.t_final)
        shifted = TestFunction(
            value=lambda t, x1, x2: phi.value(t, x1, x2)
            + (1.0 - (t / sp.t_final) ** 2) ** 3,
            grad=phi.grad,
        )
        e1a, _, _ = consistency_residuals(traj, fs, GAS, sp, phi, phivec)
        e1b, _, _ = consistency_residuals(traj, fs, GAS, sp, shifted, phivec)
        assert abs(e1a - e1b) <= 1e-11
