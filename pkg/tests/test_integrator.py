import cmath
import math
import os
import unittest

import numpy as np
import numpy.testing as npt

from riemannflow.errors import ConfigError, DomainError, OffShellError, SingularityError
from riemannflow.events import (BranchCutCrossing, BudgetExhausted, Closure, CutRayCrossing, EnergyFault, Escape,
                                Event, NegativeImagAxisCrossing, TurningTermination)
from riemannflow.integrator import (IntegratorConfig, dense_state, derivative, integrate, integrate_polar,
                                   launch_from_turning_point, launch_on_axis, launch_on_ray, launch_on_shell,
                                   polar_derivative, project_onto_shell, resample)
from riemannflow.surface import MomentumPolar, PhaseState, SurfacePoint, energy, potential_value, turning_point

SLOW = os.environ.get("RIEMANN_FLOW_SLOW") == "1"
EPS_PI = 1 / math.pi


class Test_Config(unittest.TestCase):
    def test_defaults(self):
        config = IntegratorConfig()
        self.assertEqual(config.rel_tol, 1e-10)
        self.assertEqual(config.energy_tol, 1e-8)
        self.assertEqual(config.max_time, 100.0)

    def test_replace(self):
        config = IntegratorConfig().replace(max_time=5.0)
        self.assertEqual(config.max_time, 5.0)
        with self.assertRaises(ConfigError):
            IntegratorConfig().replace(max_tim=5.0)
        with self.assertRaises(ConfigError):
            IntegratorConfig().replace(rel_tol=-1.0)
        with self.assertRaises(ConfigError):
            IntegratorConfig().replace(max_step_angle=4.0)


class Test_Launch(unittest.TestCase):
    def test_on_shell(self):
        for eps in (0.0, EPS_PI, 1.0, 2.5):
            for y in (0.3, 1.0, 2.0):
                for sign in (1, -1):
                    state = launch_on_shell(SurfacePoint(y, -math.pi / 2), sign, eps)
                    npt.assert_allclose(energy(state, eps), 1.0, atol=1e-12)

    def test_direction(self):
        right = launch_on_axis(1.0, 0.0, 1)
        left = launch_on_axis(1.0, 0.0, -1)
        npt.assert_allclose(right.p, math.sqrt(2.0))
        npt.assert_allclose(left.p, -math.sqrt(2.0))
        with self.assertRaises(DomainError):
            launch_on_axis(1.0, 0.0, 0)
        with self.assertRaises(DomainError):
            launch_on_axis(-1.0, 0.0)

    def test_turning_point_launch(self):
        tp = turning_point(0, "right", EPS_PI)
        state = launch_from_turning_point(tp, EPS_PI)
        npt.assert_allclose(energy(state, EPS_PI), 1.0, atol=1e-12)
        self.assertEqual(state.time, 1e-4)
        self.assertLess(abs(state.x - tp.location.x), 1e-6)
        with self.assertRaises(DomainError):
            launch_from_turning_point(tp, EPS_PI, delta=0.01)

    def test_ray_launch_is_outward(self):
        state = launch_on_ray(50.0, 0.5 * math.pi, 1.0)
        self.assertGreater((state.p * state.x.conjugate()).real, 0)

    def test_off_shell_rejected(self):
        state = PhaseState(SurfacePoint(1.0, -math.pi / 2), MomentumPolar(1.0, 0.0))
        with self.assertRaises(OffShellError):
            integrate(state, 0.0)


class Test_Derivatives(unittest.TestCase):
    def test_harmonic(self):
        state = PhaseState.from_complex(-1j, -math.pi / 2, math.sqrt(2.0))
        dx, dp = derivative(state, 0.0)
        npt.assert_allclose(dx, 2 * math.sqrt(2.0))
        npt.assert_allclose(dp, 2j, atol=1e-15)

    def test_polar_matches_cartesian(self):
        state = PhaseState.from_complex(0.3 - 0.8j, -1.2120256565243244, 0.4 + 0.9j)
        eps = EPS_PI
        dx, dp = derivative(state, eps)
        r, theta = state.position.r, state.position.theta
        a, alpha = state.momentum.a, state.momentum.alpha
        dr, dtheta, da, dalpha = polar_derivative(state, eps)
        # x' = (r' + i r theta') e^{i theta}, p' = (a' + i a alpha') e^{i alpha}
        npt.assert_allclose((dr + 1j * r * dtheta) * np.exp(1j * theta), dx, atol=1e-12)
        npt.assert_allclose((da + 1j * a * dalpha) * np.exp(1j * alpha), dp, atol=1e-12)

    def test_polar_singular(self):
        state = PhaseState(SurfacePoint(1.0, 0.0), MomentumPolar(0.0, 0.0))
        with self.assertRaises(SingularityError):
            polar_derivative(state, 0.5)


class Test_Harmonic(unittest.TestCase):
    """eps = 0: nested ellipses of period pi on a single sheet."""

    def test_closes_with_period_pi(self):
        for y in (0.5, 1.0, 1.5, 2.0):
            traj = integrate(launch_on_axis(y, 0.0), 0.0)
            self.assertIsInstance(traj.terminal, Closure)
            npt.assert_allclose(traj.terminal.period, math.pi, atol=1e-7)
            self.assertTrue(np.all(traj.sheets == 0))
            self.assertEqual(traj.events_of(BranchCutCrossing), [])

    def test_cut_ray_crossings(self):
        traj = integrate(launch_on_axis(1.0, 0.0), 0.0)
        crossings = traj.events_of(CutRayCrossing)
        self.assertEqual(len(crossings), 1)
        npt.assert_allclose(crossings[0].time, math.pi / 2, atol=1e-7)
        npt.assert_allclose(crossings[0].state.x, 1j, atol=1e-7)

    def test_energy_conserved(self):
        traj = integrate(launch_on_axis(1.5, 0.0), 0.0)
        self.assertLessEqual(float(traj.energy_err.max()), 1e-8)

    def test_against_exact_solution(self):
        traj = integrate(launch_on_axis(1.0, 0.0), 0.0, duration=1.3)
        t = traj.t
        exact = -1j * np.cos(2 * t) + math.sqrt(2.0) * np.sin(2 * t)
        npt.assert_allclose(traj.x, exact, atol=1e-8)
        self.assertIsNone(traj.terminal)
        npt.assert_allclose(traj.t[-1], 1.3)


class Test_Integration(unittest.TestCase):
    def test_energy_drift(self):
        for eps in (EPS_PI, 0.5, 1.0):
            traj = integrate(launch_on_axis(0.5, eps), eps)
            self.assertIsInstance(traj.terminal, Closure)
            self.assertLessEqual(float(traj.energy_err.max()), 1e-8)

    def test_polar_cross_check(self):
        eps = EPS_PI
        launch = launch_on_axis(0.5, eps)
        config = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-12)
        traj = integrate(launch, eps, config, duration=0.5)
        polar = integrate_polar(launch, eps, 0.5)
        r, theta, a, alpha = polar.y[:, -1]
        npt.assert_allclose(abs(traj.x[-1]), r, atol=1e-8)
        npt.assert_allclose(traj.theta[-1], theta, atol=1e-8)
        npt.assert_allclose(traj.p[-1], a * np.exp(1j * alpha), atol=1e-8)

    def test_time_reversal(self):
        eps = EPS_PI
        launch = launch_on_axis(0.5, eps)
        forward = integrate(launch, eps, duration=1.0)
        backward = integrate(forward.state_at(-1), eps, duration=-1.0)
        npt.assert_allclose(backward.t[-1], 0.0, atol=1e-12)
        self.assertLess(abs(backward.x[-1] - launch.x), 1e-5)
        self.assertLess(abs(backward.p[-1] - launch.p), 1e-5)
        self.assertTrue(np.all(np.diff(backward.t) < 0))

    def test_dense_state(self):
        eps = EPS_PI
        traj = integrate(launch_on_axis(0.5, eps), eps, duration=1.0)
        j = len(traj) // 2
        state = dense_state(traj, float(traj.t[j]))
        npt.assert_allclose(state.x, traj.x[j], atol=1e-12)
        mid = 0.5 * float(traj.t[j] + traj.t[j + 1])
        self.assertLess(abs(dense_state(traj, mid).x - traj.x[j]), abs(traj.x[j + 1] - traj.x[j]) + 1e-12)
        with self.assertRaises(DomainError):
            dense_state(traj, 2.0)

    def test_axis_crossing_on_return(self):
        eps = EPS_PI
        traj = integrate(launch_on_axis(0.5, eps), eps)
        crossings = traj.events_of(NegativeImagAxisCrossing)
        self.assertTrue(crossings)
        self.assertTrue(all(c.sheet == 0 for c in crossings))

    def test_stop_callback(self):
        traj = integrate(launch_on_axis(1.0, 0.0), 0.0, stop=lambda e: isinstance(e, CutRayCrossing))
        self.assertIsInstance(traj.events[-1], CutRayCrossing)
        npt.assert_allclose(traj.t[-1], math.pi / 2, atol=1e-7)

    def test_budget(self):
        config = IntegratorConfig(max_time=0.5)
        traj = integrate(launch_on_axis(1.0, 0.0), 0.0, config)
        self.assertIsInstance(traj.terminal, BudgetExhausted)
        self.assertEqual(traj.terminal.reason, "max_time")
        config = IntegratorConfig(max_steps=3)
        traj = integrate(launch_on_axis(1.0, 0.0), 0.0, config)
        self.assertEqual(traj.terminal.reason, "max_steps")


class Test_Terminating(unittest.TestCase):
    def test_pair_zero_comes_to_rest(self):
        eps = EPS_PI
        tp = turning_point(0, "right", eps)
        traj = integrate(launch_from_turning_point(tp, eps), eps)
        terminal = traj.terminal
        self.assertIsInstance(terminal, TurningTermination)
        self.assertEqual((terminal.pair_n, terminal.side), (0, "left"))
        mirror = turning_point(0, "left", eps).location.x
        self.assertLess(abs(terminal.state.x - mirror), 1e-3)
        self.assertTrue(np.all(traj.sheets == 0))

    def test_slope_at_right_turning_point(self):
        eps = EPS_PI
        tp = turning_point(0, "right", eps)
        traj = integrate(launch_from_turning_point(tp, eps, delta=1e-3), eps, duration=0.01)
        direction = traj.x[-1] - tp.location.x
        # The path leaves to the left, rising towards the turning point
        self.assertLess(direction.real, 0)
        slope = math.atan(direction.imag / direction.real)
        npt.assert_allclose(slope, math.pi / (2 + 4 * math.pi), atol=1e-3)


class Test_Escape(unittest.TestCase):
    def test_cubic_escape_along_imaginary_axis(self):
        tp = turning_point(1, "right", 1.0)
        traj = integrate(launch_from_turning_point(tp, 1.0), 1.0)
        self.assertIsInstance(traj.terminal, Escape)
        self.assertTrue(np.all(np.abs(traj.x.real) < 1e-6 * np.abs(traj.x)))
        self.assertTrue(np.all(traj.x.imag > 0))

    def test_ray_launch_escapes(self):
        eps = 2.0
        traj = integrate(launch_on_ray(50.0, 0.0, eps), eps)
        self.assertIsInstance(traj.terminal, Escape)
        npt.assert_allclose(abs(traj.terminal.state.x), IntegratorConfig().escape_radius, rtol=1e-3)
        self.assertLess(abs(traj.terminal.theta), 1e-6)


class Test_ShellProjection(unittest.TestCase):
    def test_restores_energy(self):
        eps = EPS_PI
        x = 0.6 - 0.3j
        theta = cmath.phase(x)
        p = cmath.sqrt(1.0 - potential_value(abs(x), theta, eps))
        npt.assert_allclose(project_onto_shell(x, theta, p * (1 + 1e-7), eps), p, rtol=1e-12)

    def test_turning_point_untouched(self):
        location = turning_point(0, "right", EPS_PI).location
        self.assertEqual(project_onto_shell(location.x, location.theta, 1e-3 + 0j, EPS_PI), 1e-3 + 0j)

    def test_loose_steps_stay_on_shell(self):
        config = IntegratorConfig(rel_tol=1e-6, abs_tol=1e-6)
        traj = integrate(launch_on_axis(0.5, EPS_PI), EPS_PI, config, duration=3.0)
        self.assertEqual(traj.events_of(EnergyFault), [])
        self.assertLessEqual(float(traj.energy_err.max()), config.energy_tol)


class Test_Resample(unittest.TestCase):
    def test_harmonic_times(self):
        traj = integrate(launch_on_axis(0.75, 0.0), 0.0, duration=2.0)
        times = np.linspace(0.0, 2.0, 9)
        resampled = resample(traj, times)
        npt.assert_allclose(resampled.t, times)
        exact = -0.75j * np.cos(2 * times) + 1.25 * np.sin(2 * times)
        npt.assert_allclose(resampled.x, exact, atol=1e-8)
        self.assertEqual(resampled.events, traj.events)
        with self.assertRaises(DomainError):
            resample(traj, [3.0])


@unittest.skipUnless(SLOW, "set RIEMANN_FLOW_SLOW=1 for the long orbit runs")
class Test_MultiSheet(unittest.TestCase):
    def test_three_sheet_orbit(self):
        eps = EPS_PI
        traj = integrate(launch_on_axis(0.68, eps), eps)
        self.assertIsInstance(traj.terminal, Closure)
        self.assertEqual(set(int(k) for k in traj.sheets), {-1, 0, 1})
        cuts = traj.events_of(BranchCutCrossing)
        self.assertEqual([(c.sheet_from, c.sheet_to) for c in cuts], [(0, 1), (1, 0), (0, -1), (-1, 0)])
        self.assertLessEqual(float(traj.energy_err.max()), 1e-8)

    def test_crosses_near_x1(self):
        eps = EPS_PI
        traj = integrate(launch_on_axis(0.68, eps), eps)
        ys = [c.y for c in traj.events_of(NegativeImagAxisCrossing) if c.sheet == 0]
        npt.assert_allclose(max(ys), 7.389098, atol=1e-2)

    def test_long_terminating_shot_keeps_energy(self):
        eps = 1 + math.sqrt(2)
        traj = integrate(launch_from_turning_point(turning_point(1, "right", eps), eps), eps)
        self.assertIsInstance(traj.terminal, TurningTermination)
        self.assertEqual(traj.events_of(EnergyFault), [])
        self.assertLessEqual(float(traj.energy_err.max()), 1e-8)


if __name__ == "__main__":
    unittest.main()
