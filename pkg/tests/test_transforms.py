import numpy as np
import pytest

from growth_lab.errors import DomainError, NumericError
from growth_lab.market import CoefficientSchedule, NoiseBlock, simulate_assets
from growth_lab.paths import DiscretePath, TimeGrid, running_max
from growth_lab.transforms import (
    DrawdownSpec,
    LinearDrawdown,
    SmoothIncreasingFn,
    TabulatedDrawdown,
    azema_yor,
    azema_yor_integral_form,
    build_scale_pair,
    implied_floor_of_max,
    linear_drawdown_scale,
)

IDENTITY = SmoothIncreasingFn(
    eval=lambda x: np.asarray(x, dtype=np.float64),
    deriv=lambda x: np.ones_like(np.asarray(x, dtype=np.float64)),
    domain_low=0.0,
)

SQRT = SmoothIncreasingFn(
    eval=lambda x: np.sqrt(x),
    deriv=lambda x: 0.5 / np.sqrt(x),
    domain_low=0.0,
)

SQUARE = SmoothIncreasingFn(
    eval=lambda x: np.asarray(x, dtype=np.float64) ** 2,
    deriv=lambda x: 2.0 * np.asarray(x, dtype=np.float64),
    domain_low=0.0,
)


def max_path(values, t_max=None):
    values = np.asarray(values, dtype=np.float64)
    grid = TimeGrid.regular(t_max if t_max is not None else float(len(values) - 1), len(values) - 1)
    return running_max(DiscretePath(grid=grid, values=values))


def gbm_paths(n_paths, n_steps, seed=0, mu=0.06, sigma=0.2, t_max=1.0):
    sched = CoefficientSchedule(
        breakpoints=np.array([0.0]), mu=np.array([[mu]]), sigma=np.array([[[sigma]]])
    )
    grid = TimeGrid.regular(t_max, n_steps)
    out = []
    for i in range(n_paths):
        noise = NoiseBlock(seed=seed, path_index=i, grid=grid, dim=1)
        out.append(simulate_assets(sched, grid, noise)[0])
    return out


class TestDrawdownFunctions:
    def test_linear_shape(self):
        w = LinearDrawdown(alpha=0.3)
        np.testing.assert_allclose(w(np.array([1.0, 2.0, 10.0])), [0.3, 0.6, 3.0])

    def test_tabulated_interpolates_and_extends(self):
        w = TabulatedDrawdown(xs=np.array([1.0, 2.0]), ys=np.array([0.2, 0.6]))
        assert w(np.array([1.5]))[0] == pytest.approx(0.4)
        # below the first knot the knot's ratio is kept, above the last the
        # value freezes, so the ratio bound cannot silently degrade
        assert w(np.array([0.5]))[0] == pytest.approx(0.1)
        assert w(np.array([10.0]))[0] == pytest.approx(0.6)

    def test_spec_rejects_alpha_at_or_above_one(self):
        with pytest.raises(DomainError):
            DrawdownSpec(w=LinearDrawdown(alpha=0.5), alpha=1.2)
        with pytest.raises(DomainError):
            DrawdownSpec(w=LinearDrawdown(alpha=0.5), alpha=1.0)

    def test_spec_rejects_ratio_above_alpha(self):
        with pytest.raises(DomainError):
            DrawdownSpec(w=LinearDrawdown(alpha=0.5), alpha=0.3)

    def test_spec_rejects_decreasing_w(self):
        w = TabulatedDrawdown(xs=np.array([1.0, 2.0]), ys=np.array([0.4, 0.4]))
        # constant tabulated w is fine; a genuinely decreasing callable is not
        DrawdownSpec(w=w, alpha=0.5, breakpoints=np.array([1.0, 2.0]))
        with pytest.raises(DomainError):
            DrawdownSpec(w=lambda x: 0.4 / np.maximum(x, 1e-300), alpha=0.5)


class TestLinearDrawdownScale:
    def test_alpha_zero_is_identity(self):
        pair = linear_drawdown_scale(0.0)
        x = np.geomspace(0.5, 50.0, 20)
        np.testing.assert_allclose(pair.K.eval(x), x, rtol=1e-14)
        np.testing.assert_allclose(pair.F.eval(x), x, rtol=1e-14)

    def test_half_alpha_closed_form(self):
        pair = linear_drawdown_scale(0.5)
        assert pair.K.eval(2.0) == pytest.approx(4.0, rel=1e-14)
        assert pair.F.eval(4.0) == pytest.approx(2.0, rel=1e-14)

    def test_alpha_03_power_and_slope(self):
        pair = linear_drawdown_scale(0.3)
        y = np.geomspace(1.0, 100.0, 15)
        np.testing.assert_allclose(pair.F.eval(y), y**0.7, rtol=1e-13)
        assert pair.F.deriv(1.0) == pytest.approx(0.7, rel=1e-13)

    def test_v0_is_fixed_point(self):
        for v0 in (0.5, 1.0, 3.0):
            pair = linear_drawdown_scale(0.4, v0)
            assert pair.K.eval(v0) == pytest.approx(v0, rel=1e-13)
            assert pair.F.eval(v0) == pytest.approx(v0, rel=1e-13)

    def test_rejects_alpha_outside_range(self):
        with pytest.raises(DomainError):
            linear_drawdown_scale(1.0)
        with pytest.raises(DomainError):
            linear_drawdown_scale(-0.1)


class TestBuildScalePair:
    def test_zero_drawdown_gives_identity_scale(self):
        spec = DrawdownSpec(w=lambda x: np.zeros_like(np.asarray(x, dtype=np.float64)), alpha=0.0)
        pair = build_scale_pair(spec)
        x = np.geomspace(1.0, 1000.0, 30)
        np.testing.assert_allclose(pair.K.eval(x), x, rtol=1e-9)

    @pytest.mark.parametrize("alpha", [0.1, 0.3, 0.5, 0.8])
    def test_matches_linear_closed_form(self, alpha):
        spec = DrawdownSpec(w=LinearDrawdown(alpha=alpha), alpha=alpha)
        quad = build_scale_pair(spec, quad_tol=1e-10)
        closed = linear_drawdown_scale(alpha)
        x = np.geomspace(1.0, 1000.0, 40)
        np.testing.assert_allclose(quad.K.eval(x), closed.K.eval(x), rtol=1e-9)
        y = closed.K.eval(x)
        np.testing.assert_allclose(quad.F.eval(y), closed.F.eval(y), rtol=1e-9)

    def test_k_of_two_for_half_alpha(self):
        spec = DrawdownSpec(w=LinearDrawdown(alpha=0.5), alpha=0.5)
        pair = build_scale_pair(spec, quad_tol=1e-10)
        assert pair.K.eval(2.0) == pytest.approx(4.0, rel=1e-9)

    def test_roundtrip_within_tolerance(self):
        w = TabulatedDrawdown(xs=np.array([1.0, 2.0, 4.0]), ys=np.array([0.2, 0.5, 1.1]))
        spec = DrawdownSpec(w=w, alpha=0.3, breakpoints=np.array([1.0, 2.0, 4.0]))
        pair = build_scale_pair(spec, quad_tol=1e-10)
        x = np.geomspace(1.0, 100.0, 25)
        np.testing.assert_allclose(pair.F.eval(pair.K.eval(x)), x, rtol=1e-9)

    def test_rejects_nonpositive_quad_tol(self):
        spec = DrawdownSpec(w=LinearDrawdown(alpha=0.5), alpha=0.5)
        with pytest.raises(DomainError):
            build_scale_pair(spec, quad_tol=0.0)


class TestAzemaYor:
    def test_identity_returns_input(self):
        mp = max_path([1.0, 1.4, 1.1, 2.0])
        out = azema_yor(IDENTITY, mp)
        np.testing.assert_allclose(out.values, mp.values, rtol=1e-15)

    def test_constant_f_collapses_path(self):
        c = 3.25
        F = SmoothIncreasingFn(
            eval=lambda x: np.full_like(np.asarray(x, dtype=np.float64), c),
            deriv=lambda x: np.zeros_like(np.asarray(x, dtype=np.float64)),
            domain_low=0.0,
        )
        out = azema_yor(F, max_path([1.0, 1.4, 1.1]))
        np.testing.assert_array_equal(out.values, [c, c, c])

    def test_sqrt_by_hand(self):
        # x = 0.64 at running max 1: sqrt(1) - (1/2)(1 - 0.64) = 0.82
        out = azema_yor(SQRT, max_path([1.0, 0.64]))
        assert out.values[-1] == pytest.approx(0.82, rel=1e-14)

    def test_max_image_is_exact(self):
        for path in gbm_paths(5, 600, seed=21):
            mp = running_max(path)
            out = azema_yor(SQRT, mp)
            got = running_max(out).running_max
            want = SQRT.eval(mp.running_max)
            np.testing.assert_allclose(got, want, rtol=1e-12)

    def test_concave_f_dominates_composition(self):
        for path in gbm_paths(5, 600, seed=22):
            mp = running_max(path)
            out = azema_yor(SQRT, mp).values
            floor = SQRT.eval(mp.values)
            assert np.all(out >= floor - 1e-12 * np.abs(floor))

    @pytest.mark.parametrize("alpha", [0.2, 0.5, 0.7])
    def test_roundtrip_recovers_path(self, alpha):
        pair = linear_drawdown_scale(alpha)
        worst = 0.0
        for path in gbm_paths(20, 500, seed=23):
            forward = azema_yor(pair.F, running_max(path))
            back = azema_yor(pair.K, running_max(forward))
            worst = max(worst, float(np.max(np.abs(back.values - path.values) / path.values)))
        assert worst < 1e-9

    def test_nonfinite_output_reports_index(self):
        with np.errstate(invalid="ignore"):
            with pytest.raises(NumericError, match="index 0"):
                azema_yor(SQRT, max_path([-4.0, 1.0]))


class TestIntegralForm:
    def test_identity_agrees_exactly(self):
        mp = max_path([1.0, 1.3, 0.9, 1.7])
        direct = azema_yor(IDENTITY, mp)
        integral = azema_yor_integral_form(IDENTITY, mp)
        np.testing.assert_allclose(integral.values, direct.values, rtol=1e-14)

    def test_flat_path_stays_at_f_of_start(self):
        out = azema_yor_integral_form(SQUARE, max_path([2.0, 2.0, 2.0]))
        np.testing.assert_array_equal(out.values, [4.0, 4.0, 4.0])

    def test_gap_to_direct_form_is_small_and_shrinks(self):
        # one GBM path sampled at two refinements of the same trajectory
        fine = gbm_paths(1, 20_000, seed=61)[0]
        coarse = DiscretePath(
            grid=TimeGrid.regular(1.0, 10_000), values=fine.values[::2], wealth=True
        )

        def gap(path):
            mp = running_max(path)
            d = azema_yor(SQUARE, mp).values
            i = azema_yor_integral_form(SQUARE, mp).values
            return float(np.max(np.abs(d - i) / np.abs(d)))

        g_coarse, g_fine = gap(coarse), gap(fine)
        assert g_coarse < 1e-2
        assert g_fine < g_coarse


class TestImpliedFloor:
    def test_identity_gives_zero_floor(self):
        w = implied_floor_of_max(IDENTITY)
        x = np.geomspace(0.5, 20.0, 12)
        np.testing.assert_allclose(w(x), np.zeros_like(x), atol=1e-9)

    def test_square_k_gives_half(self):
        # alpha = 1/2 pair has K(x) = x^2, so w(x) = x - K/K' = x/2
        pair = linear_drawdown_scale(0.5)
        w = implied_floor_of_max(pair.F, pair.K)
        x = np.geomspace(1.0, 50.0, 12)
        np.testing.assert_allclose(w(x), x / 2.0, rtol=1e-12)

    @pytest.mark.parametrize("alpha", [0.25, 0.6])
    def test_linear_pair_recovers_alpha_x(self, alpha):
        pair = linear_drawdown_scale(alpha)
        w = implied_floor_of_max(pair.F, pair.K)
        x = np.geomspace(1.0, 100.0, 12)
        np.testing.assert_allclose(w(x), alpha * x, rtol=1e-12)

    def test_affine_f_gives_constant_floor(self):
        delta = 0.2
        F = SmoothIncreasingFn(
            eval=lambda x: delta + (1.0 - delta) * np.asarray(x, dtype=np.float64),
            deriv=lambda x: np.full_like(np.asarray(x, dtype=np.float64), 1.0 - delta),
            domain_low=0.0,
        )
        w = implied_floor_of_max(F)  # exercises the inversion fallback
        x = np.geomspace(1.0, 30.0, 12)
        np.testing.assert_allclose(w(x), np.full_like(x, delta), rtol=1e-9)
