import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from growth_lab.errors import NumericError, StructuralError
from growth_lab.paths import (
    DiscretePath,
    MaxPath,
    TimeGrid,
    integrate_against,
    read_path_dump,
    running_max,
    write_path_dump,
)


def path_of(values, t_max=None):
    values = np.asarray(values, dtype=np.float64)
    grid = TimeGrid.regular(t_max if t_max is not None else float(len(values) - 1), len(values) - 1)
    return DiscretePath(grid=grid, values=values)


class TestTimeGrid:
    def test_regular(self):
        grid = TimeGrid.regular(2.0, 4)
        np.testing.assert_allclose(grid.points, [0.0, 0.5, 1.0, 1.5, 2.0])
        assert grid.n_steps == 4
        assert grid.t_max == 2.0
        assert grid.dt == pytest.approx(0.5)

    def test_index_of_exact_point(self):
        grid = TimeGrid.regular(2.0, 4)
        assert grid.index_of(1.5) == 3
        assert grid.index_of(0.0) == 0

    def test_index_of_rejects_off_grid_time(self):
        grid = TimeGrid.regular(2.0, 4)
        with pytest.raises(StructuralError):
            grid.index_of(0.7)

    def test_must_start_at_zero(self):
        with pytest.raises(StructuralError):
            TimeGrid(points=np.array([0.5, 1.0]))

    def test_must_increase(self):
        with pytest.raises(StructuralError):
            TimeGrid(points=np.array([0.0, 1.0, 1.0]))

    def test_needs_two_points(self):
        with pytest.raises(StructuralError):
            TimeGrid(points=np.array([0.0]))


class TestDiscretePath:
    def test_length_must_match_grid(self):
        grid = TimeGrid.regular(1.0, 2)
        with pytest.raises(StructuralError):
            DiscretePath(grid=grid, values=np.array([1.0, 2.0]))

    def test_wealth_flag_requires_positivity(self):
        grid = TimeGrid.regular(1.0, 1)
        DiscretePath(grid=grid, values=np.array([1.0, -2.0]))  # plain path is fine
        with pytest.raises(StructuralError):
            DiscretePath(grid=grid, values=np.array([1.0, -2.0]), wealth=True)
        with pytest.raises(StructuralError):
            DiscretePath(grid=grid, values=np.array([1.0, 0.0]), wealth=True)

    def test_endpoints(self):
        p = path_of([1.0, 3.0, 2.0])
        assert p.initial == 1.0
        assert p.terminal == 2.0


class TestRunningMax:
    def test_basic(self):
        mp = running_max(path_of([1.0, 3.0, 2.0, 5.0]))
        np.testing.assert_array_equal(mp.running_max, [1.0, 3.0, 3.0, 5.0])

    def test_constant(self):
        mp = running_max(path_of([2.0, 2.0, 2.0]))
        np.testing.assert_array_equal(mp.running_max, [2.0, 2.0, 2.0])

    def test_decreasing_freezes_at_start(self):
        mp = running_max(path_of([5.0, 4.0, 3.0]))
        np.testing.assert_array_equal(mp.running_max, [5.0, 5.0, 5.0])

    def test_idempotent(self):
        mp = running_max(path_of([1.0, 3.0, 2.0, 5.0, 4.0]))
        again = running_max(DiscretePath(grid=mp.grid, values=mp.running_max))
        np.testing.assert_array_equal(again.running_max, mp.running_max)

    def test_base_values_untouched(self):
        values = [1.0, 3.0, 2.0]
        mp = running_max(path_of(values))
        np.testing.assert_array_equal(mp.values, values)

    def test_supplied_max_is_validated(self):
        p = path_of([1.0, 3.0, 2.0])
        with pytest.raises(StructuralError):
            MaxPath(path=p, running_max=np.array([1.0, 2.0, 2.0]))


class TestIntegrateAgainst:
    def test_zero_integrand_gives_constant(self):
        mp = running_max(path_of([1.0, 3.0, 2.0]))
        out = integrate_against(lambda m: np.zeros_like(m), mp)
        np.testing.assert_array_equal(out.values, [1.0, 1.0, 1.0])

    def test_identity_integrand_reproduces_path(self):
        mp = running_max(path_of([1.0, 3.0, 2.0, 5.0]))
        out = integrate_against(lambda m: np.ones_like(m), mp)
        np.testing.assert_allclose(out.values, mp.values, rtol=1e-15)

    def test_identity_integrand_on_long_path(self):
        # 1e4 steps, values in [0.1, 10]: the telescoping sum must not drift.
        rng = np.random.default_rng(5)
        values = np.exp(rng.uniform(np.log(0.1), np.log(10.0), size=10_001))
        mp = running_max(path_of(values, t_max=1.0))
        out = integrate_against(lambda m: np.ones_like(m), mp)
        worst = np.max(np.abs(out.values - values) / np.abs(values))
        assert worst < 1e-12

    def test_left_point_sum_by_hand(self):
        # f(m) = m on [1, 2, 1]: increments 1*(2-1), then 2*(1-2).
        mp = running_max(path_of([1.0, 2.0, 1.0]))
        out = integrate_against(lambda m: m, mp, initial=1.0)
        np.testing.assert_allclose(out.values, [1.0, 2.0, 0.0])

    def test_initial_defaults_to_path_start(self):
        mp = running_max(path_of([1.0, 2.0, 1.0]))
        out = integrate_against(lambda m: m, mp)
        assert out.values[0] == 1.0

    @given(a=st.floats(-3, 3), b=st.floats(-3, 3))
    @settings(max_examples=30, deadline=None)
    def test_linear_in_integrand(self, a, b):
        rng = np.random.default_rng(11)
        values = np.exp(rng.normal(0.0, 0.3, size=64).cumsum())
        mp = running_max(path_of(values, t_max=1.0))
        f = lambda m: np.sqrt(m)
        g = lambda m: m**2
        combined = integrate_against(lambda m: a * f(m) + b * g(m), mp, initial=0.0)
        split = a * integrate_against(f, mp, initial=0.0).values \
            + b * integrate_against(g, mp, initial=0.0).values
        np.testing.assert_allclose(combined.values, split, rtol=1e-12, atol=1e-12)

    def test_nonfinite_integrand_reports_abscissa(self):
        mp = running_max(path_of([1.0, 4.0, 2.0]))
        with pytest.raises(NumericError, match="4"):
            integrate_against(lambda m: np.where(m > 3, np.inf, m), mp)


class TestPathDump:
    def test_roundtrip_is_exact(self):
        rng = np.random.default_rng(3)
        values = np.exp(rng.normal(0.0, 0.4, size=50).cumsum())
        mp = running_max(path_of(values, t_max=2.0))
        buf = io.StringIO()
        write_path_dump(mp, buf)
        buf.seek(0)
        back = read_path_dump(buf)
        np.testing.assert_array_equal(back.values, mp.values)
        np.testing.assert_array_equal(back.running_max, mp.running_max)
        np.testing.assert_array_equal(back.grid.points, mp.grid.points)

    def test_header_line(self):
        buf = io.StringIO()
        write_path_dump(running_max(path_of([1.0, 2.0])), buf)
        assert buf.getvalue().splitlines()[0] == "# growth-lab path v1"

    def test_rejects_foreign_header(self):
        with pytest.raises(StructuralError):
            read_path_dump(io.StringIO("# not a path dump\n"))
