import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polypin.lattice import Profile
from polypin.stefan import (SlopeParameter, agmon_check, heat_boundary_slope, pedestal, stefan_diagnostics,
                            stefan_fixed_point, stefan_front_tracking, tstar)
from polypin.stefan.diagnostics import boundary_relation_residual
from polypin.stefan.fixed_point import collar_width
from polypin.stefan.front_tracking import check_stefan_data, count_sign_changes

T_COS = 4 / math.pi ** 2


def closed(func, a, b, n=2048):
    p = Profile.from_function(func, a, b, n)
    v = np.array(p.values)
    v[0] = v[-1] = 0.0
    return Profile(a, b, v)


def cosine(scale=1.0, n=2048):
    return closed(lambda x: scale * 2 / np.pi * np.cos(np.pi * x / 2), -1.0, 1.0, n)


@pytest.fixture(scope="module")
def cosine_run():
    return stefan_front_tracking(cosine(), 1.0, dx=1 / 256, record_times=[0.05, 0.1, 0.2, 0.3])


class TestSlopeParameter:
    def test_from_lambda(self):
        assert SlopeParameter.from_lambda(math.inf).s == 1.0
        assert SlopeParameter.from_lambda(4.0).s == pytest.approx(0.5)

    def test_subcritical_rejected(self):
        with pytest.raises(ValueError):
            SlopeParameter.from_lambda(1.5)

    @pytest.mark.parametrize("s", [0.0, -0.1, 1.5])
    def test_range(self, s):
        with pytest.raises(ValueError):
            SlopeParameter(s)


class TestFrontTracking:
    def test_collision_time(self, cosine_run):
        assert cosine_run.verdict == "collided"
        assert cosine_run.collision_time == pytest.approx(T_COS, rel=0.01)

    def test_area_law(self, cosine_run):
        S = cosine_run.series
        assert np.max(np.abs(S["area"] - S["area"][0] + 2 * S["t"])) <= 1e-3

    def test_boundaries_move_inward(self, cosine_run):
        S = cosine_run.series
        assert np.all(np.diff(S["l"]) >= 0) and np.all(np.diff(S["r"]) <= 0)

    def test_states_are_lipschitz(self, cosine_run):
        for st_ in cosine_run.states:
            assert st_.f.is_lipschitz(1.0, tol=1e-3)
            assert st_.f.values[0] == 0 and st_.f.values[-1] == 0
            assert np.all(st_.f.values >= -1e-12)

    def test_boundary_slopes(self, cosine_run):
        for st_ in cosine_run.states[:-1]:
            sl = st_.f.slopes()
            assert sl[0] == pytest.approx(1.0, abs=0.02) and sl[-1] == pytest.approx(-1.0, abs=0.02)

    def test_record_times(self, cosine_run):
        assert cosine_run.state_at(0.1).t == pytest.approx(0.1)
        with pytest.raises(KeyError):
            cosine_run.state_at(0.123)

    def test_csv(self, cosine_run):
        lines = cosine_run.to_csv().splitlines()
        assert lines[0] == "t,l,r,area,k_max,k_at_l,k_at_r,inflections"
        assert len(lines) == len(cosine_run.series["t"]) + 1

    def test_general_slope(self):
        s = 0.5
        f0 = cosine(scale=s)
        run = stefan_front_tracking(f0, SlopeParameter(s), dx=1 / 128)
        S = run.series
        assert np.max(np.abs(S["area"] - S["area"][0] + 2 * s * S["t"])) <= 1e-3
        assert run.collision_time == pytest.approx(f0.integral() / (2 * s), rel=0.01)

    def test_explicit_scheme_agrees(self):
        a = stefan_front_tracking(cosine(), 1.0, dx=1 / 64, scheme="euler")
        b = stefan_front_tracking(cosine(), 1.0, dx=1 / 64)
        assert a.collision_time == pytest.approx(b.collision_time, rel=1e-3)

    def test_explicit_stability_guard(self):
        with pytest.raises(ValueError):
            stefan_front_tracking(cosine(), 1.0, dx=1 / 64, dt=1e-3, scheme="euler")

    def test_collision_error_shrinks(self):
        errs = [abs(stefan_front_tracking(cosine(), 1.0, dx=dx).collision_time - T_COS) for dx in (1 / 32, 1 / 128)]
        assert errs[1] < errs[0]

    def test_horizon(self):
        run = stefan_front_tracking(cosine(), 1.0, dx=1 / 64, horizon=0.1)
        assert run.verdict == "horizon" and run.final.t == pytest.approx(0.1)

    def test_inadmissible_data(self):
        steep = closed(lambda x: 3 * np.cos(np.pi * x / 2), -1.0, 1.0)
        with pytest.raises(ValueError):
            stefan_front_tracking(steep, 1.0)
        flat_ends = closed(lambda x: (1 - x ** 2) ** 2, -1.0, 1.0)
        with pytest.raises(ValueError):
            check_stefan_data(flat_ends)

    def test_negative_area_degenerates(self):
        x = np.linspace(-1, 1, 2001)
        f0 = Profile(-1.0, 1.0, np.interp(x, [-1, -0.9, -0.6, 0.6, 0.9, 1], [0, 0.1, -0.2, -0.2, 0.1, 0]))
        assert f0.integral() < 0
        run = stefan_front_tracking(f0, 1.0, dx=1 / 128)
        assert run.verdict == "blowup" and run.blowup_confirmed
        assert run.final.width > 0


class TestFixedPoint:
    @pytest.fixture(scope="class")
    @classmethod
    def report(cls):
        return stefan_fixed_point(cosine(), 0.02, n_steps=100, n_cells=200)

    def test_contraction(self, report):
        assert report.contraction_factor < 1
        assert report.increments[-1] < 1e-10

    def test_against_front_tracking(self, report):
        times = [st_.t for st_ in report.run.states[1:]]
        ref = stefan_front_tracking(cosine(), 1.0, dx=1 / 512, record_times=times)
        for st_ in report.run.states[1:]:
            other = ref.state_at(st_.t)
            assert abs(st_.l - other.l) < 1e-3 and abs(st_.r - other.r) < 1e-3
            xs = np.linspace(max(st_.l, other.l), min(st_.r, other.r), 501)
            assert np.max(np.abs(st_.f(xs) - other.f(xs))) < 5e-3

    def test_half_collar(self, report):
        assert np.all(report.l <= -1 + report.collar)
        assert np.all(report.r >= 1 - report.collar)

    def test_collar_width(self):
        # max |f''| of (2/pi) cos(pi x / 2) is pi / 2
        assert collar_width(cosine(n=4096)) == pytest.approx(1 / (2 * math.pi), rel=1e-3)

    def test_bad_horizon(self):
        with pytest.raises(ValueError):
            stefan_fixed_point(cosine(), 0.0)


class TestTools:
    def test_tstar(self):
        assert tstar(cosine(n=8192)) == pytest.approx(T_COS, rel=1e-6)
        assert tstar(Profile(-1.0, 1.0, np.zeros(5))) == 0

    @given(st.floats(0.1, 5))
    def test_tstar_scaling(self, c):
        f0 = cosine(n=256)
        assert tstar(f0.scaled(c)) == pytest.approx(c * tstar(f0))

    def test_pedestal_identity(self):
        f = cosine(n=256)
        assert pedestal(f, -0.5, 0.5, 0.0) is f

    def test_pedestal_area(self):
        # f supported on (l, r) inside a wider grid
        x = np.linspace(-2, 2, 4001)
        l, r, d = -1.0, 1.0, 0.3
        f = Profile(-2.0, 2.0, np.clip(1 - np.abs(x), 0, None))
        g = pedestal(f, l, r, d)
        assert g.integral() == pytest.approx(f.integral() + d * (r - l) + d ** 2, abs=1e-9)
        assert g.is_lipschitz(1.0)

    def test_pedestal_overflow(self):
        with pytest.raises(ValueError):
            pedestal(cosine(n=256), -0.95, 0.95, 0.2)

    def test_agmon_exponential(self):
        x = np.linspace(0, 50, 200001)
        v = np.exp(-x)
        v[-1] = 0.0
        assert abs(agmon_check(Profile(0.0, 50.0, v))) < 1e-6

    def test_agmon_zero(self):
        assert agmon_check(Profile(0.0, 1.0, np.zeros(11))) == 0.0

    def test_agmon_requires_decay(self):
        with pytest.raises(ValueError):
            agmon_check(Profile(0.0, 1.0, np.ones(11)))

    @settings(max_examples=100)
    @given(st.lists(st.floats(-3, 3), min_size=2, max_size=12))
    def test_agmon_random(self, knots):
        x = np.linspace(0, 10, 2001)
        v = np.interp(x, np.linspace(0, 5, len(knots) + 1), knots + [0.0])
        assert agmon_check(Profile(0.0, 10.0, v)) >= -1e-9

    def test_boundary_slope_collar(self):
        res = heat_boundary_slope(cosine(n=4096), 0.001, 0.2)
        assert res.slope_bound == pytest.approx(1 - math.exp(-2.5))
        assert res.passed

    def test_boundary_slope_time_zero(self):
        f0 = cosine(n=4096)
        res = heat_boundary_slope(f0, 0.0, 0.2)
        assert res.slope_bound == 1.0
        assert res.min_slope_left == pytest.approx(np.min(f0.slopes()[f0.x[:-1] < -0.9]))

    def test_boundary_slope_tends_to_one(self):
        from polypin.stefan import HeatSeries

        s = HeatSeries(cosine(n=4096), modes=8192)
        slopes = [s.derivative(-1.0, t)[0] for t in (1e-2, 1e-3, 1e-4)]
        assert abs(slopes[2] - 1) < abs(slopes[0] - 1)
        assert slopes[2] == pytest.approx(1.0, abs=1e-3)

    def test_heat_area_decay_rate(self):
        f0 = cosine(n=4096)
        for t in (1e-4, 1e-3, 1e-2):
            assert heat_boundary_slope(f0, t, 0.2).area_ok

    def test_boundary_slope_precondition(self):
        with pytest.raises(ValueError):
            heat_boundary_slope(closed(lambda x: 0.5 * np.cos(np.pi * x / 2), -1, 1), 0.01, 0.2)


class TestDiagnostics:
    def test_cosine_all_pass(self, cosine_run):
        rep = stefan_diagnostics(cosine_run)
        for c in rep.checks.values():
            assert c.passed is not False, c
        assert rep["collision"].passed and rep["width_bound"].passed

    def test_summary_text(self, cosine_run):
        text = stefan_diagnostics(cosine_run).summary()
        assert "boundary_relation" in text and "concavification" in text

    def test_dipped_profile(self):
        f0 = closed(lambda x: 2 / np.pi * np.cos(np.pi * x / 2) * (1 - 0.6 * np.cos(np.pi * x / 2) ** 2), -1, 1)
        run = stefan_front_tracking(f0, 1.0, dx=1 / 128, record_times=[0.1])
        rep = stefan_diagnostics(run)
        assert rep["inflections_nonincreasing"].passed
        assert rep["concavification"].passed
        assert rep.concavification_time < run.collision_time
        assert run.series["inflections"][0] == 2 and run.series["inflections"][-1] == 0

    def test_relation_residual_first_order(self):
        res = []
        for dx in (1 / 64, 1 / 128):
            run = stefan_front_tracking(cosine(), 1.0, dx=dx, record_times=[0.2])
            res.append(boundary_relation_residual(run.state_at(0.2)))
        assert res[1] < 0.7 * res[0]

    def test_sign_changes(self):
        assert count_sign_changes(np.array([1.0, 0.5, -0.2, -1.0, 0.3])) == 2
        assert count_sign_changes(np.array([1.0, 1e-9, 1.0])) == 0
        assert count_sign_changes(np.zeros(4)) == 0
