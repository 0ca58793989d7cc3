import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import legendre as leg

from dimred.basis1d import Interval
from dimred.numerics import CylinderField, Grid, sample, trapezoid_weights
from dimred.problems import NoiseSpec, add_noise, builtin
from dimred.reduction import (CauchyCoefficients, Projector, assemble_coupling, knee_index, phi_misfit,
                              phi_sweep, project_data, project_nonlinearity, select_cutoff)
from dimred.tensor_basis import TensorBasis

X = Interval(0.0, 1.0)
Y = Interval(-1.0, 1.0)
T = Interval(0.0, 1.5)


def grid1(nt=601):
    return Grid.uniform(X, (), 1.5, nt=nt)


def grid2(ny=201, nt=151):
    return Grid.uniform(Interval(0.0, 0.5), [Y], 1.5, n_transverse=[ny], nt=nt)


def noisy_test1_data(noise=0.0, seed=0):
    p = builtin(1)
    return add_noise(sample(p.g, p.grid()), NoiseSpec(noise, seed))


@pytest.fixture(scope="module")
def fine1():
    g = grid1(20_001)
    tb = TensorBasis.build(g.cylinder_intervals, (6,))
    return tb, g, Projector(tb, g)


class TestProjectData:
    @pytest.mark.parametrize("k", range(1, 7))
    def test_basis_member_gives_unit_vector(self, fine1, k):
        tb, g, pr = fine1
        field = CylinderField(tb.time_axis.eval(k, g.t_axis), g)
        zero = field.with_values(np.zeros(g.cylinder_shape))
        c = project_data(field, zero, tb, pr)
        np.testing.assert_allclose(c.g_coeffs, np.eye(6)[k - 1], atol=1e-6)

    def test_basis_member_two_dimensional(self):
        g = grid2(ny=4001, nt=3001)
        tb = TensorBasis.build(g.cylinder_intervals, (2, 2))
        pr = Projector(tb, g)
        # line-up position of (n_2, n_t) = (2, 2) is (2 - 1) * 2 + 2 = 4
        vals = np.outer(tb.axes[0].eval(2, g.transverse[0]), tb.axes[1].eval(2, g.t_axis))
        field = CylinderField(vals, g)
        c = project_data(field, field, tb, pr)
        np.testing.assert_allclose(c.g_coeffs, [0, 0, 0, 1], atol=1e-6)

    def test_zero_flux_gives_exact_zero(self):
        p = builtin(1)
        g = p.grid()
        tb = TensorBasis.build(g.cylinder_intervals, (15,))
        c = project_data(sample(p.g, g), sample(p.q, g), tb)
        assert np.all(c.q_coeffs == 0.0)

    def test_test1_data_within_corner_regime(self):
        g = noisy_test1_data()
        assert phi_misfit(g, (15,)) < 0.05

    def test_grid_basis_mismatch(self):
        g = sample(np.sin, grid1())
        tb = TensorBasis.build([Interval(0.0, 1.0)], (3,))
        with pytest.raises(ValueError):
            project_data(g, g, tb)

    def test_coefficient_lengths_must_agree(self):
        with pytest.raises(ValueError):
            CauchyCoefficients(np.zeros(3), np.zeros(4))

    def test_initial_state_concatenates(self):
        c = CauchyCoefficients(np.array([1.0, 2.0]), np.array([3.0, 4.0]))
        np.testing.assert_array_equal(c.initial_state, [1, 2, 3, 4])


class TestProjector:
    def test_synthesize_single_coefficient(self):
        g = grid2(ny=31, nt=21)
        tb = TensorBasis.build(g.cylinder_intervals, (3, 4))
        pr = Projector(tb, g)
        k = tb.index_set.lineup((2, 3))
        c = np.zeros(tb.size)
        c[k - 1] = 1.0
        expected = np.outer(tb.axes[0].eval(2, g.transverse[0]), tb.axes[1].eval(3, g.t_axis))
        np.testing.assert_allclose(pr.synthesize(c), expected, atol=1e-13)

    def test_derivative_synthesis(self):
        g = grid2(ny=31, nt=21)
        tb = TensorBasis.build(g.cylinder_intervals, (3, 4))
        pr = Projector(tb, g)
        c = np.random.default_rng(1).normal(size=tb.size)
        y, t = g.transverse[0][7], g.t_axis[5]
        expected = sum(ck * tb.eval_tensor(n, (y,), t, "transverse_gradient")[0]
                       for ck, n in zip(c, tb.index_set))
        assert pr.transverse_gradient(c)[0][7, 5] == pytest.approx(expected, rel=1e-12)
        expected_t = sum(ck * tb.eval_tensor(n, (y,), t, "time_deriv") for ck, n in zip(c, tb.index_set))
        assert pr.synthesize(c, (0, 1))[7, 5] == pytest.approx(expected_t, rel=1e-12)

    def test_truncate_shares_leading_members(self):
        g = grid2(ny=31, nt=21)
        big = Projector(TensorBasis.build(g.cylinder_intervals, (5, 6)), g)
        small = Projector(TensorBasis.build(g.cylinder_intervals, (3, 4)), g)
        vals = np.random.default_rng(2).normal(size=g.cylinder_shape)
        np.testing.assert_allclose(big.truncate((3, 4)).analyze(vals), small.analyze(vals), atol=1e-12)

    def test_truncate_cannot_grow(self):
        g = grid2(ny=31, nt=21)
        pr = Projector(TensorBasis.build(g.cylinder_intervals, (2, 2)), g)
        with pytest.raises(ValueError):
            pr.truncate((3, 2))


@pytest.fixture(scope="module")
def fine_projectors():
    out = {}
    g = grid1(40_001)
    for n in range(1, 7):
        out[n] = Projector(TensorBasis.build(g.cylinder_intervals, (n,)), g)
    return out


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 6), seed=st.integers(0, 2**32 - 1))
def test_projection_idempotent(fine_projectors, n, seed):
    pr = fine_projectors[n]
    c = np.random.default_rng(seed).uniform(-1, 1, n)
    np.testing.assert_allclose(pr.analyze(pr.synthesize(c)), c, atol=1e-6)


def test_projection_round_trip_is_trapezoid_gram_two_dimensional():
    # analyze(synthesize(c)) = G c with G the product-trapezoid Gram matrix,
    # and G - I shrinks like h^2 (checked in the tensor basis tests)
    g = grid2(ny=401, nt=301)
    tb = TensorBasis.build(g.cylinder_intervals, (3, 3))
    pr = Projector(tb, g)
    grams = []
    for b, nodes, n in zip(tb.axes, g.cylinder_axes, (3, 3)):
        V = b.values(nodes, 0, n)
        grams.append((V * trapezoid_weights(nodes)) @ V.T)
    G = np.kron(grams[1], grams[0])
    c = np.random.default_rng(5).uniform(-1, 1, tb.size)
    np.testing.assert_allclose(pr.analyze(pr.synthesize(c)), G @ c, atol=1e-13)


class TestCoupling:
    def test_first_entry_closed_form(self):
        # Psi_1' = Psi_1, so s_11 = [Psi_1(T)^2 - Psi_1(0)^2] / 2 = 1 on any interval
        tb = TensorBasis.build([T], (4,))
        S = assemble_coupling(tb)
        b = tb.time_axis
        assert S[0, 0] == pytest.approx(0.5 * (b.eval(1, 1.5) ** 2 - b.eval(1, 0.0) ** 2), abs=1e-12)
        assert S[0, 0] == pytest.approx(1.0, abs=1e-12)

    def test_integration_by_parts_identity(self):
        tb = TensorBasis.build([T], (12,))
        S = assemble_coupling(tb)
        b = tb.time_axis
        end, start = b.values(1.5)[:, 0], b.values(0.0)[:, 0]
        np.testing.assert_allclose(S + S.T, np.outer(end, end) - np.outer(start, start), atol=1e-8)

    def test_one_dimensional_matches_gauss_quadrature(self):
        tb = TensorBasis.build([T], (8,))
        x, w = leg.leggauss(200)
        s = 0.75 + 0.75 * x
        V, V1 = tb.time_axis.values(s), tb.time_axis.values(s, 1)
        brute = (V * 0.75 * w) @ V1.T  # [m, n] = int Psi_n' Psi_m
        np.testing.assert_allclose(assemble_coupling(tb), brute, atol=1e-10)

    def test_two_dimensional_matches_brute_force(self):
        tb = TensorBasis.build([Y, T], (2, 2))
        x, w = leg.leggauss(1000)
        y, wy = x, w
        t, wt = 0.75 + 0.75 * x, 0.75 * w
        by, bt = tb.axes
        S = np.zeros((4, 4))
        idx = list(tb.index_set)
        for a, m in enumerate(idx):
            Pm = np.outer(by.eval(m[0], y), bt.eval(m[1], t))
            for c, n in enumerate(idx):
                dt_Pn = np.outer(by.eval(n[0], y), bt.eval(n[1], t, 1))
                lap_Pn = np.outer(by.eval(n[0], y, 2), bt.eval(n[1], t))
                S[a, c] = wy @ ((dt_Pn - lap_Pn) * Pm) @ wt
        np.testing.assert_allclose(assemble_coupling(tb), S, atol=1e-6)

    def test_three_dimensional_shape_and_finite(self):
        tb = TensorBasis.build([Y, Interval(0.0, 2.0), T], (2, 3, 2))
        S = assemble_coupling(tb)
        assert S.shape == (12, 12) and np.all(np.isfinite(S))


class TestProjectNonlinearity:
    def test_zero(self, fine1):
        tb, g, pr = fine1
        F = lambda point, t, u, ux, grad: 0.0
        c = np.ones(tb.size)
        assert np.all(project_nonlinearity(F, 0.0, c, c, projector=pr) == 0.0)

    @pytest.mark.parametrize("k", [1, 3, 6])
    def test_basis_member_source(self, fine1, k):
        tb, g, pr = fine1
        F = lambda point, t, u, ux, grad: tb.time_axis.eval(k, t)
        out = project_nonlinearity(F, 0.2, np.zeros(tb.size), np.zeros(tb.size), projector=pr)
        np.testing.assert_allclose(out, np.eye(tb.size)[k - 1], atol=1e-6)

    def test_linear_in_u(self, fine1):
        tb, g, pr = fine1
        c = np.random.default_rng(3).normal(size=tb.size)
        F = lambda point, t, u, ux, grad: -2.5 * u
        np.testing.assert_allclose(project_nonlinearity(F, 0.0, c, c, projector=pr), -2.5 * c, atol=1e-6)

    def test_test2_at_true_coefficients(self):
        p = builtin(2)
        g = grid1(20_001)
        tb = TensorBasis.build(g.cylinder_intervals, (15,))
        pr = Projector(tb, g)
        x0, t = 0.0, g.t_axis
        coeffs = pr.analyze(np.sin(x0**2 + t))
        dcoeffs = pr.analyze(2 * x0 * np.cos(x0**2 + t))
        # F(u_true) substituted by hand at x = 0: u_x = 0 so F = -cos(t)
        expected = pr.analyze(-np.cos(t))
        out = project_nonlinearity(p.nonlinearity, x0, coeffs, dcoeffs, projector=pr)
        np.testing.assert_allclose(out, expected, atol=1e-6)

    def test_receives_depth_and_transverse_gradient(self):
        g = grid2(ny=21, nt=11)
        tb = TensorBasis.build(g.cylinder_intervals, (2, 2))
        pr = Projector(tb, g)
        seen = {}

        def F(point, t, u, ux, grad):
            seen.update(x=point[0], y_shape=np.shape(point[1]), n_grad=len(grad))
            return u

        project_nonlinearity(F, 0.3, np.ones(4), np.ones(4), projector=pr)
        assert seen == {"x": 0.3, "y_shape": (21, 1), "n_grad": 1}

    def test_non_finite_raises(self, fine1):
        from dimred.reduction import NonFiniteNonlinearity
        tb, g, pr = fine1
        F = lambda point, t, u, ux, grad: np.log(u - 1e9)
        with pytest.raises(NonFiniteNonlinearity):
            project_nonlinearity(F, 0.0, np.ones(tb.size), np.ones(tb.size), projector=pr)

    def test_builds_projector_from_basis_and_grid(self):
        g = grid1(201)
        tb = TensorBasis.build(g.cylinder_intervals, (3,))
        F = lambda point, t, u, ux, grad: u * ux + t
        c, dc = np.array([1.0, -0.5, 0.2]), np.array([0.3, 0.0, 1.0])
        via_projector = project_nonlinearity(F, 0.0, c, dc, projector=Projector(tb, g))
        np.testing.assert_array_equal(project_nonlinearity(F, 0.0, c, dc, tb, g), via_projector)


class TestPhi:
    def test_in_span_is_zero(self):
        g = grid1(200_001)
        tb = TensorBasis.build(g.cylinder_intervals, (5,))
        pr = Projector(tb, g)
        field = CylinderField(pr.synthesize(np.array([0.3, -1.0, 0.2, 0.0, 0.5])), g)
        assert phi_misfit(field, (5,), pr) <= 1e-8

    def test_test1_sweep_is_l_shaped(self):
        ns = list(range(5, 31))
        phis = phi_sweep(noisy_test1_data(), 0, ns, [30])
        assert phis[0] > 1.0 and phis[ns.index(10)] < 0.05
        assert phis[: ns.index(10)].min() > 0.1
        assert ns[knee_index(ns, phis)] == 10

    def test_constant_data_decreases(self):
        g = sample(lambda t: 2.0 + 0 * t, grid1(200_001))
        phis = phi_sweep(g, 0, range(1, 8), [7])
        assert phis[0] > 0.05 and phis[-1] < 1e-6
        assert np.all(np.diff(phis) < 0)

    def test_zero_data_rejected(self):
        with pytest.raises(ValueError):
            phi_misfit(sample(lambda t: 0 * t, grid1()), (3,))

    @settings(max_examples=20, deadline=None)
    @given(lam=st.floats(1e-3, 1e3) | st.floats(-1e3, -1e-3))
    def test_scale_invariant(self, lam):
        g = sample(lambda t: np.sin(3 * t) + t, grid1(301))
        scaled = g.with_values(lam * g.values)
        assert phi_misfit(scaled, (6,)) == pytest.approx(phi_misfit(g, (6,)), rel=1e-10)


class TestKnee:
    def test_matches_analytic_curvature_peak(self):
        # y = exp(-k u) on u in [0, 1]: curvature k^2 e^{-ku} / (1 + k^2 e^{-2ku})^1.5 peaks
        # where k e^{-ku} = 1/sqrt(2), i.e. u* = ln(k sqrt 2) / k
        k = 12.0
        u = np.linspace(0.0, 1.0, 401)
        y = np.exp(-k * u)
        u_star = np.log(k * np.sqrt(2.0)) / k
        y_norm = (y - y.min()) / (y.max() - y.min())
        # normalization rescales y by 1/(1 - e^-k); the shift of the peak is below one node here
        assert abs(u[knee_index(u, y)] - u_star) <= 2 * (u[1] - u[0])
        assert knee_index(u, y) == knee_index(u, y_norm)

    def test_invariant_to_axis_units(self):
        ns = np.arange(5, 31)
        phis = 1.0 / (ns - 4.0) ** 2
        assert knee_index(ns, phis) == knee_index(ns * 10.0, phis * 1e3)

    def test_short_curve_uses_minimum(self):
        assert knee_index([1, 2], [0.5, 0.1]) == 1

    def test_flat_curve(self):
        assert knee_index([1, 2, 3, 4], [1.0, 1.0, 1.0, 1.0]) == 0


class TestSelectCutoff:
    def test_in_span_gives_minimal_cutoff(self):
        g = grid1(200_001)
        pr = Projector(TensorBasis.build(g.cylinder_intervals, (4,)), g)
        field = CylinderField(pr.synthesize(np.array([0.5, -1.0, 0.0, 0.3])), g)
        sel = select_cutoff(field, (8,), threshold=1e-6)
        assert sel.cutoffs == (4,) and sel.reached

    def test_in_span_two_dimensional_axis_sweeps(self):
        # quadrature error on this grid is ~1e-5, so the threshold sits above it
        g = grid2(ny=1001, nt=601)
        tb = TensorBasis.build(g.cylinder_intervals, (3, 2))
        pr = Projector(tb, g)
        c = np.zeros(tb.size)
        c[tb.index_set.lineup((3, 2)) - 1] = 1.0
        field = CylinderField(pr.synthesize(c), g)
        sel = select_cutoff(field, (6, 6), threshold=1e-3)
        assert sel.cutoffs == (3, 2) and sel.reached

    def test_test1_noiseless_corner(self):
        sel = select_cutoff(noisy_test1_data(), (20,), 0.05)
        assert sel.cutoffs == (10,) and sel.reached

    @pytest.mark.parametrize("seed", range(3))
    def test_test1_noisy_corner(self, seed):
        assert select_cutoff(noisy_test1_data(0.10, seed), (20,), 0.05).cutoffs == (10,)

    def test_unreachable_threshold_falls_back_to_knee(self, caplog):
        with caplog.at_level(logging.WARNING):
            sel = select_cutoff(noisy_test1_data(0.10, 0), (30,), 1e-6)
        assert not sel.reached and sel.cutoffs[0] <= 30
        assert sel.cutoffs == (10,)
        assert "not reached" in caplog.text

    def test_bounded_by_max(self):
        sel = select_cutoff(noisy_test1_data(), (8,), 0.05)
        assert sel.cutoffs[0] <= 8 and not sel.reached

    def test_rejects_bad_threshold(self):
        with pytest.raises(ValueError):
            select_cutoff(noisy_test1_data(), (10,), 1.5)

    def test_records_sweeps(self):
        sel = select_cutoff(noisy_test1_data(), (12,), 0.05)
        assert sel.sweeps[0]["chosen"] == 10 and len(sel.sweeps[0]["phi"]) == 12
