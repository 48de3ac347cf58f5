"""Adaptive integration of x' = 2p, p' = -(2+eps) x (ix)^eps on the Riemann surface.

The stepper is a Dormand-Prince 5(4) pair working on complex scalars. The
unwrapped angle of x is carried next to the Cartesian state: inside a step
every stage measures its angle relative to the step's starting point, and the
accepted increment is the sum of principal increments along the stage chain.
Steps whose angle increment reaches ``max_step_angle`` are rejected, so the
principal increments can never alias across the branch point.

The local error control alone lets the energy random-walk away from 1 on
long multi-sheet orbits. A step whose energy defect exceeds a tenth of
``energy_tol`` is retried with half the step, and every accepted momentum
away from a turning point is rescaled back onto the E=1 shell.
"""
import cmath
import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import minimize_scalar

from .constants import (DEFAULT_ABS_TOL, DEFAULT_CLOSURE_TOL, DEFAULT_ENERGY_TOL, DEFAULT_ESCAPE_RADIUS,
                        DEFAULT_MAX_STEP_ANGLE, DEFAULT_MAX_STEPS, DEFAULT_MAX_TIME, DEFAULT_REL_TOL,
                        DEFAULT_TURNING_TOL, EVENT_TIME_TOL, HALF_PI, TURNING_DELTA)
from .errors import ConfigError, DomainError, OffShellError, SingularityError
from .events import (BranchCutCrossing, BudgetExhausted, Closure, CutRayCrossing, EnergyFault, Escape, Event,
                     NegativeImagAxisCrossing, TurningTermination)
from .surface import (EpsilonLike, MomentumPolar, PhaseState, SurfacePoint, TurningPoint, acceleration,
                      as_epsilon, fold_angle, force_value, nearest_turning_point, potential_value, sheet_index)

logger = logging.getLogger(__name__)

# Dormand-Prince 5(4) tableau; the system is autonomous so the nodes are not needed
_A = (
    (),
    (1.0 / 5.0,),
    (3.0 / 40.0, 9.0 / 40.0),
    (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0),
    (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0),
    (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0),
    (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0),
)
# Difference between the 5th and 4th order weights
_E = (71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
_INITIAL_STEP = 1e-3
_HERMITE_SAMPLES = 16
_POLAR_SINGULAR = 1e-12
# Share of energy_tol a single step may add before it is retried
_ENERGY_STEP_SHARE = 0.1
# Largest rescaling of p accepted as a shell projection
_PROJECTION_LIMIT = 1e-4


@dataclass(frozen=True)
class IntegratorConfig:
    """Step control, event and stopping parameters of a run."""

    # Per-step relative error target
    rel_tol: float = DEFAULT_REL_TOL

    # Per-step absolute error target
    abs_tol: float = DEFAULT_ABS_TOL

    # Largest relative energy error |E-1| / max(1, |p|^2, |V|) tolerated
    energy_tol: float = DEFAULT_ENERGY_TOL

    # Time budget when no explicit duration is requested
    max_time: float = DEFAULT_MAX_TIME

    # Radius beyond which the run is declared escaping
    escape_radius: float = DEFAULT_ESCAPE_RADIUS

    # Phase-space distance to the launch that counts as closure
    closure_tol: float = DEFAULT_CLOSURE_TOL

    # |p| below which the particle is considered at rest
    turning_tol: float = DEFAULT_TURNING_TOL

    # Cap on |dtheta| per accepted step, below pi
    max_step_angle: float = DEFAULT_MAX_STEP_ANGLE

    # Cap on attempted steps
    max_steps: int = DEFAULT_MAX_STEPS

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "energy_tol", "max_time", "escape_radius",
                     "closure_tol", "turning_tol", "max_step_angle"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be a positive finite number, got {value!r}")
        if self.max_step_angle >= math.pi:
            raise ConfigError(f"max_step_angle must be below pi, got {self.max_step_angle}")
        if not (isinstance(self.max_steps, int) and self.max_steps > 0):
            raise ConfigError(f"max_steps must be a positive integer, got {self.max_steps!r}")

    def replace(self, **overrides) -> 'IntegratorConfig':
        """Copy with some fields replaced; unknown names are rejected."""
        known = {f.name for f in dataclasses.fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ConfigError(f"Unknown integrator settings: {', '.join(sorted(unknown))}")
        return dataclasses.replace(self, **overrides)


@dataclass
class Trajectory:
    """Accepted samples of one run plus its ordered event log.

    Samples are stored column-wise; ``samples`` builds the PhaseState view.
    """

    epsilon: float
    launch: PhaseState
    t: np.ndarray
    x: np.ndarray
    p: np.ndarray
    theta: np.ndarray
    energy_err: np.ndarray
    events: List[Event] = field(default_factory=list)
    config: Optional[IntegratorConfig] = None

    def __len__(self) -> int:
        return len(self.t)

    @property
    def r(self) -> np.ndarray:
        return np.abs(self.x)

    @property
    def sheets(self) -> np.ndarray:
        return np.floor((self.theta + 1.5 * math.pi) / (2.0 * math.pi)).astype(int)

    @property
    def samples(self) -> List[PhaseState]:
        return [PhaseState.from_complex(complex(x), float(th), complex(p), float(t))
                for t, x, p, th in zip(self.t, self.x, self.p, self.theta)]

    @property
    def terminal(self) -> Optional[Event]:
        """The event that ended the run, None when an explicit duration ran out."""
        if self.events and self.events[-1].terminal:
            return self.events[-1]
        return None

    @property
    def single_sheeted(self) -> bool:
        return as_epsilon(self.epsilon).is_single_sheeted

    def events_of(self, *kinds: type) -> List[Event]:
        return [e for e in self.events if isinstance(e, kinds)]

    def state_at(self, index: int) -> PhaseState:
        return PhaseState.from_complex(complex(self.x[index]), float(self.theta[index]),
                                       complex(self.p[index]), float(self.t[index]))


def _energy_error(r: float, theta: float, p: complex, eps: float) -> float:
    v = potential_value(r, theta, eps)
    return abs(p * p + v - 1.0) / max(1.0, abs(p) ** 2, abs(v))


def _force(x: complex, x_ref: complex, theta_ref: float, eps: float) -> Tuple[complex, float]:
    r = abs(x)
    if r == 0.0:
        raise SingularityError("trajectory reached the branch point x = 0")
    theta = theta_ref + cmath.phase(x / x_ref)
    return -(2.0 + eps) * force_value(r, theta, eps), theta


def _dp_step(x0: complex, p0: complex, theta0: float, f0: complex, h: float, eps: float):
    """One Dormand-Prince step from (x0, p0) with p'(x0) = f0.

    Returns:
        (x1, p1, theta1, f1, err_x, err_p) where theta1 accumulates the
        principal increments along the stage chain
    """
    kx = [2.0 * p0]
    kp = [f0]
    xs = [x0]
    p_stage = p0
    for i in range(1, 7):
        row = _A[i]
        x_stage = x0 + h * sum(a * k for a, k in zip(row, kx))
        p_stage = p0 + h * sum(a * k for a, k in zip(row, kp))
        f_stage, _ = _force(x_stage, x0, theta0, eps)
        xs.append(x_stage)
        kx.append(2.0 * p_stage)
        kp.append(f_stage)

    dtheta = 0.0
    for prev, cur in zip(xs[:-1], xs[1:]):
        dtheta += cmath.phase(cur / prev)

    err_x = h * sum(e * k for e, k in zip(_E, kx))
    err_p = h * sum(e * k for e, k in zip(_E, kp))
    return xs[6], p_stage, theta0 + dtheta, kp[6], err_x, err_p


def _crossed_boundary(theta0: float, theta1: float, offset: float) -> Optional[float]:
    """Boundary of the family offset + 2*pi*m passed between two angles, if any."""
    m0 = math.floor((theta0 - offset) / (2.0 * math.pi))
    m1 = math.floor((theta1 - offset) / (2.0 * math.pi))
    if m0 == m1:
        return None
    return offset + 2.0 * math.pi * max(m0, m1)


def derivative(state: PhaseState, eps: EpsilonLike) -> Tuple[complex, complex]:
    """Phase-space velocity (x', p') = (2p, -(2+eps) x (ix)^eps).

    Args:
        state: Position on the surface and momentum
        eps: Deformation parameter

    Returns:
        The pair (dx/dt, dp/dt)
    """
    e = float(as_epsilon(eps))
    point = state.position
    return 2.0 * state.p, -(2.0 + e) * force_value(point.r, point.theta, e)


def polar_derivative(state: PhaseState, eps: EpsilonLike) -> Tuple[float, float, float, float]:
    """The four real rates (r', theta', a', alpha') of the polar equations of motion.

    Raises:
        SingularityError: a or r is below 1e-12
    """
    e = float(as_epsilon(eps))
    return _polar_rates(state.position.r, state.position.theta, state.momentum.a, state.momentum.alpha, e)


def _polar_rates(r: float, theta: float, a: float, alpha: float, eps: float) -> Tuple[float, float, float, float]:
    if a < _POLAR_SINGULAR or r < _POLAR_SINGULAR:
        raise SingularityError(f"polar equations are singular at r={r:.3g}, a={a:.3g}")
    drive = (2.0 + eps) * r ** (1.0 + eps)
    phi = (1.0 + eps) * theta - alpha + (eps - 2.0) * HALF_PI
    return (
        2.0 * a * math.cos(alpha - theta),
        2.0 * a / r * math.sin(alpha - theta),
        drive * math.cos(phi),
        drive * math.sin(phi) / a,
    )


def integrate_polar(launch: PhaseState, eps: EpsilonLike, duration: float,
                    rtol: float = 1e-12, atol: float = 1e-12, t_eval: Optional[np.ndarray] = None):
    """Integrate the polar system with scipy's DOP853 as an independent cross-check.

    Args:
        launch: Starting state, away from r = 0 and a = 0
        eps: Deformation parameter
        duration: Signed integration time
        rtol: Relative tolerance handed to solve_ivp
        atol: Absolute tolerance handed to solve_ivp
        t_eval: Optional output times

    Returns:
        The solve_ivp result; ``y`` rows are r, theta, a, alpha
    """
    e = float(as_epsilon(eps))
    t0 = launch.time
    y0 = [launch.position.r, launch.position.theta, launch.momentum.a, launch.momentum.alpha]
    result = solve_ivp(lambda t, y: _polar_rates(y[0], y[1], y[2], y[3], e),
                       (t0, t0 + duration), y0, method="DOP853", rtol=rtol, atol=atol, t_eval=t_eval)
    if not result.success:
        raise SingularityError(f"polar integration failed: {result.message}")
    return result


def launch_on_shell(x0: SurfacePoint, direction_sign: int, eps: EpsilonLike) -> PhaseState:
    """State at x0 with p = +-sqrt(1 - x^2 (ix)^eps), so that the energy is 1.

    Args:
        x0: Launch point
        direction_sign: +1 or -1; sign of Re p, or of Im p when Re p vanishes
        eps: Deformation parameter

    Returns:
        The launch state at time 0
    """
    if direction_sign not in (1, -1):
        raise DomainError(f"direction_sign must be +1 or -1, got {direction_sign}")
    e = float(as_epsilon(eps))
    p = cmath.sqrt(1.0 - potential_value(x0.r, x0.theta, e))
    sign = (1 if p.real > 0 else -1) if p.real != 0 else (1 if p.imag >= 0 else -1)
    if sign != direction_sign:
        p = -p
    return PhaseState(x0, MomentumPolar.from_complex(p), 0.0)


def launch_on_axis(y: float, eps: EpsilonLike, direction_sign: int = 1) -> PhaseState:
    """Launch from -iy on the principal sheet."""
    if not y > 0:
        raise DomainError(f"axis launches need y > 0, got {y}")
    return launch_on_shell(SurfacePoint(y, -HALF_PI), direction_sign, eps)


def _shell_momentum(x: complex, theta: float, p_guess: complex, eps: float) -> complex:
    p = cmath.sqrt(1.0 - potential_value(abs(x), theta, eps))
    return p if abs(p - p_guess) <= abs(p + p_guess) else -p


def project_onto_shell(x: complex, theta: float, p: complex, eps: float) -> complex:
    """Rescale p so that p^2 + V(x) = 1, keeping x fixed.

    The correction is only applied when it is a small rescaling; near a
    turning point p^2 and 1 - V are both tiny and p is returned unchanged.
    """
    if p == 0:
        return p
    factor = cmath.sqrt((1.0 - potential_value(abs(x), theta, eps)) / (p * p))
    if abs(factor - 1.0) > _PROJECTION_LIMIT:
        return p
    return p * factor


def launch_from_turning_point(tp: TurningPoint, eps: EpsilonLike, delta: float = TURNING_DELTA) -> PhaseState:
    """State a time delta after rest at a turning point.

    Uses x = x_T + a_T delta^2 / 2 and p = a_T delta / 2, then puts p back on
    the energy shell by choosing the root of 1 - V nearest the Taylor value.

    Args:
        tp: Turning point to start from
        eps: Deformation parameter
        delta: Elapsed time since rest, in (0, 1e-3]

    Returns:
        The launch state at time delta
    """
    if not (0 < delta <= 1e-3):
        raise DomainError(f"delta must lie in (0, 1e-3], got {delta}")
    e = float(as_epsilon(eps))
    acc = acceleration(tp.location, e)
    x = tp.location.x + 0.5 * acc * delta * delta
    position = SurfacePoint.from_complex(x, tp.location.theta)
    p = _shell_momentum(x, position.theta, 0.5 * acc * delta, e)
    return PhaseState(position, MomentumPolar.from_complex(p), delta)


def launch_on_ray(r0: float, theta0: float, eps: EpsilonLike) -> PhaseState:
    """Outward on-shell launch at radius r0 on the unwrapped ray theta0."""
    if not r0 > 0:
        raise DomainError(f"ray launches need r0 > 0, got {r0}")
    e = float(as_epsilon(eps))
    position = SurfacePoint(r0, theta0)
    p = cmath.sqrt(1.0 - potential_value(r0, theta0, e))
    # outward means Re(p conj(x)) > 0
    if (p * position.x.conjugate()).real < 0:
        p = -p
    return PhaseState(position, MomentumPolar.from_complex(p), 0.0)


class _Run:
    """Mutable bookkeeping of a single integration."""

    def __init__(self, launch: PhaseState, eps: float, config: IntegratorConfig,
                 stop: Optional[Callable[[Event], bool]]):
        self.eps = eps
        self.config = config
        self.stop = stop
        self.single_sheeted = as_epsilon(eps).is_single_sheeted
        self.launch = launch

        self.x_launch = launch.x
        self.p_launch = launch.p
        self.theta_launch = launch.position.theta
        f_launch, _ = _force(self.x_launch, self.x_launch, self.theta_launch, eps)
        self.v_launch = (2.0 * self.p_launch, f_launch)

        self.t: List[float] = []
        self.x: List[complex] = []
        self.p: List[complex] = []
        self.theta: List[float] = []
        self.energy_err: List[float] = []
        self.events: List[Event] = []

    def record(self, t: float, x: complex, p: complex, theta: float):
        self.t.append(t)
        self.x.append(x)
        self.p.append(p)
        self.theta.append(theta)
        self.energy_err.append(_energy_error(abs(x), theta, p, self.eps))

    def closure_gap(self, x: complex, p: complex) -> float:
        vx, vp = self.v_launch
        return ((x - self.x_launch) * vx.conjugate()).real + ((p - self.p_launch) * vp.conjugate()).real

    def state(self, t: float, x: complex, p: complex, theta: float) -> PhaseState:
        if self.single_sheeted:
            theta = fold_angle(theta)
        return PhaseState.from_complex(x, theta, p, t)

    def trajectory(self) -> Trajectory:
        return Trajectory(
            epsilon=self.eps,
            launch=self.launch,
            t=np.array(self.t, dtype=float),
            x=np.array(self.x, dtype=complex),
            p=np.array(self.p, dtype=complex),
            theta=np.array(self.theta, dtype=float),
            energy_err=np.array(self.energy_err, dtype=float),
            events=self.events,
            config=self.config,
        )


def _dense(x0: complex, p0: complex, theta0: float, f0: complex, tau: float, eps: float) -> Tuple[complex, complex, float]:
    if tau == 0.0:
        return x0, p0, theta0
    x, p, theta, _, _, _ = _dp_step(x0, p0, theta0, f0, tau, eps)
    return x, p, theta


def _locate(fn: Callable[[complex, complex, float], float], start, h: float, eps: float) -> Tuple[float, complex, complex, float]:
    """Bisect the step [0, h] for the sign change of fn along the dense solution.

    Returns:
        (tau, x, p, theta) at the first point past the sign change
    """
    x0, p0, theta0, f0 = start
    sign_a = fn(x0, p0, theta0) > 0
    lo, hi = 0.0, h
    x_hi, p_hi, theta_hi = _dense(x0, p0, theta0, f0, hi, eps)
    while abs(hi - lo) > EVENT_TIME_TOL:
        mid = 0.5 * (lo + hi)
        x_mid, p_mid, theta_mid = _dense(x0, p0, theta0, f0, mid, eps)
        if (fn(x_mid, p_mid, theta_mid) > 0) == sign_a:
            lo = mid
        else:
            hi, x_hi, p_hi, theta_hi = mid, x_mid, p_mid, theta_mid
    return hi, x_hi, p_hi, theta_hi


def _hermite_min_abs(p0: complex, f0: complex, p1: complex, f1: complex, h: float) -> Tuple[float, float]:
    """Smallest |p| on a Hermite cubic through the step ends, with its fraction of the step."""

    def magnitude(s: float) -> float:
        h00 = 2 * s ** 3 - 3 * s ** 2 + 1
        h10 = s ** 3 - 2 * s ** 2 + s
        h01 = -2 * s ** 3 + 3 * s ** 2
        h11 = s ** 3 - s ** 2
        return abs(h00 * p0 + h10 * h * f0 + h01 * p1 + h11 * h * f1)

    best_s, best = 1.0, abs(p1)
    for i in range(1, _HERMITE_SAMPLES):
        s = i / _HERMITE_SAMPLES
        value = magnitude(s)
        if value < best:
            best_s, best = s, value
    # An interior dip can straddle a zero of p between grid points; refine inside the neighbouring cells
    if best < 0.5 * min(abs(p0), abs(p1)):
        width = 1.0 / _HERMITE_SAMPLES
        res = minimize_scalar(magnitude, bounds=(max(0.0, best_s - width), min(1.0, best_s + width)),
                              method="bounded", options={"xatol": 1e-6})
        if res.fun < best:
            best_s, best = float(res.x), float(res.fun)
    return best_s, best


def _step_events(run: _Run, t: float, start, end, h: float, armed: bool) -> List[Event]:
    """All events inside one accepted step, ordered along the direction of time."""
    x0, p0, theta0, f0 = start
    x1, p1, theta1, f1 = end
    eps = run.eps
    config = run.config
    found: List[Tuple[float, Event]] = []

    def make_state(tau, x, p, theta):
        return run.state(t + tau, x, p, theta)

    # Cut on the positive-imaginary axis
    boundary = _crossed_boundary(theta0, theta1, HALF_PI)
    if boundary is not None:
        tau, x, p, theta = _locate(lambda x_, p_, th: th - boundary, start, h, eps)
        direction = "up" if theta1 > theta0 else "down"
        if run.single_sheeted:
            event = CutRayCrossing(t + tau, direction, state=make_state(tau, x, p, theta))
        else:
            sheet_from, sheet_to = sheet_index(theta0), sheet_index(theta1)
            event = BranchCutCrossing(t + tau, direction, sheet_from, sheet_to,
                                      state=make_state(tau, x, p, theta))
        found.append((tau, event))

    # Negative-imaginary axis of any sheet
    boundary_axis = _crossed_boundary(theta0, theta1, -HALF_PI)
    if boundary_axis is not None:
        tau, x, p, theta = _locate(lambda x_, p_, th: th - boundary_axis, start, h, eps)
        sheet = 0 if run.single_sheeted else sheet_index(boundary_axis)
        found.append((tau, NegativeImagAxisCrossing(t + tau, sheet, abs(x), state=make_state(tau, x, p, theta))))

    # Escape
    if abs(x0) < config.escape_radius <= abs(x1):
        radius = config.escape_radius
        tau, x, p, theta = _locate(lambda x_, p_, th: abs(x_) - radius, start, h, eps)
        state = make_state(tau, x, p, theta)
        found.append((tau, Escape(t + tau, state.position.theta, state=state)))

    # Coming to rest at a turning point
    if armed:
        s_min, p_min = _hermite_min_abs(p0, f0, p1, f1, h)
        if p_min < config.turning_tol:
            tau_min = s_min * h
            x_m, p_m, theta_m = _dense(x0, p0, theta0, f0, tau_min, eps)
            if abs(p_m) < config.turning_tol:
                tol = config.turning_tol
                tau, x, p, theta = _locate(lambda x_, p_, th: abs(p_) - tol, start, tau_min, eps)
                tp = nearest_turning_point(theta, eps)
                found.append((tau, TurningTermination(t + tau, tp.index_n, tp.side,
                                                      state=make_state(tau, x, p, theta))))

    # Return to the launch state
    sign_h = 1.0 if h > 0 else -1.0
    if sign_h * run.closure_gap(x0, p0) < 0 <= sign_h * run.closure_gap(x1, p1):
        tau, x, p, theta = _locate(lambda x_, p_, th: run.closure_gap(x_, p_), start, h, eps)
        distance = math.sqrt(abs(x - run.x_launch) ** 2 + abs(p - run.p_launch) ** 2)
        dtheta = theta - run.theta_launch
        if run.single_sheeted:
            dtheta = math.remainder(dtheta, 2.0 * math.pi)
        if distance < config.closure_tol and abs(dtheta) < math.pi:
            period = t + tau - run.launch.time
            found.append((tau, Closure(t + tau, period, state=make_state(tau, x, p, theta))))
        else:
            logger.debug("closure candidate at t=%.6g rejected: distance %.3g, dtheta %.3g",
                         t + tau, distance, dtheta)

    found.sort(key=lambda item: abs(item[0]))
    return [event for _, event in found]


def integrate(launch: PhaseState, eps: EpsilonLike, config: Optional[IntegratorConfig] = None, *,
              duration: Optional[float] = None, stop: Optional[Callable[[Event], bool]] = None) -> Trajectory:
    """Integrate a launch state until a terminal event, the time budget or the requested duration.

    Args:
        launch: On-shell starting state
        eps: Deformation parameter
        config: Step control and event settings; defaults when None
        duration: Signed integration time; when given, max_time is ignored and
            reaching the end is not an event
        stop: Called with every recorded event; returning True ends the run there

    Returns:
        The trajectory with its event log

    Raises:
        OffShellError: the launch energy is off the E=1 shell
    """
    e = float(as_epsilon(eps))
    config = config or IntegratorConfig()
    launch_err = _energy_error(launch.position.r, launch.position.theta, launch.p, e)
    if launch_err > config.energy_tol:
        raise OffShellError(f"launch energy error {launch_err:.3g} exceeds energy_tol {config.energy_tol:.3g}")

    run = _Run(launch, e, config, stop)
    t = launch.time
    x, p, theta = launch.x, launch.p, launch.position.theta
    run.record(t, x, p, theta)

    direction = -1.0 if duration is not None and duration < 0 else 1.0
    span = abs(duration) if duration is not None else config.max_time
    t_end = t + direction * span
    if span == 0.0:
        return run.trajectory()

    f = _force(x, x, theta, e)[0]
    h = direction * min(_INITIAL_STEP, span)
    armed = abs(p) >= config.turning_tol
    accepted = rejected = 0
    worst_defect = 0.0
    finished = False

    for _ in range(config.max_steps):
        remaining = t_end - t
        last = abs(h) >= abs(remaining)
        if last:
            h = remaining
        if abs(h) < 1e-14 * max(1.0, abs(t)):
            logger.warning("step size underflow at t=%.6g (r=%.3g); stopping", t, abs(x))
            err_now = max(_energy_error(abs(x), theta, p, e), worst_defect)
            run.events.append(EnergyFault(t, err_now, state=run.state(t, x, p, theta)))
            finished = True
            break

        try:
            x1, p1, theta1, f1, err_x, err_p = _dp_step(x, p, theta, f, h, e)
        except (SingularityError, ZeroDivisionError, OverflowError):
            rejected += 1
            h *= 0.5
            continue

        scale_x = config.abs_tol + config.rel_tol * max(abs(x), abs(x1))
        scale_p = config.abs_tol + config.rel_tol * max(abs(p), abs(p1))
        err = math.sqrt(0.5 * ((abs(err_x) / scale_x) ** 2 + (abs(err_p) / scale_p) ** 2))
        if not math.isfinite(err) or err > 1.0:
            rejected += 1
            factor = _MIN_FACTOR if not math.isfinite(err) else max(_MIN_FACTOR, _SAFETY * err ** -0.2)
            h *= factor
            logger.debug("step rejected at t=%.6g: error %.3g", t, err)
            continue
        dtheta = theta1 - theta
        if abs(dtheta) >= config.max_step_angle:
            rejected += 1
            h *= max(_MIN_FACTOR, min(0.9, 0.5 * config.max_step_angle / abs(dtheta)))
            logger.debug("step rejected at t=%.6g: angle increment %.3g", t, dtheta)
            continue
        defect = _energy_error(abs(x1), theta1, p1, e)
        if defect > _ENERGY_STEP_SHARE * config.energy_tol:
            rejected += 1
            worst_defect = max(worst_defect, defect)
            h *= 0.5
            logger.debug("step rejected at t=%.6g: energy defect %.3g", t, defect)
            continue
        p1 = project_onto_shell(x1, theta1, p1, e)

        accepted += 1
        worst_defect = 0.0
        t1 = t_end if last else t + h
        for event in _step_events(run, t, (x, p, theta, f), (x1, p1, theta1, f1), h, armed):
            run.events.append(event)
            if event.terminal or (stop is not None and stop(event)):
                state = event.state
                run.record(event.time, state.x, state.p, state.position.theta)
                finished = True
                break
        if finished:
            break

        err_energy = _energy_error(abs(x1), theta1, p1, e)
        if err_energy > config.energy_tol:
            logger.warning("energy error %.3g exceeds tolerance at t=%.6g", err_energy, t1)
            run.events.append(EnergyFault(t1, err_energy, state=run.state(t1, x1, p1, theta1)))
            run.record(t1, x1, p1, theta1)
            finished = True
            break

        if run.single_sheeted:
            theta1 = fold_angle(theta1)
        t, x, p, theta, f = t1, x1, p1, theta1, f1
        run.record(t, x, p, theta)
        armed = armed or abs(p) >= config.turning_tol

        if last:
            if duration is None:
                run.events.append(BudgetExhausted(t, "max_time", state=run.state(t, x, p, theta)))
            finished = True
            break

        if err == 0.0:
            h *= _MAX_FACTOR
        else:
            h *= min(_MAX_FACTOR, max(_MIN_FACTOR, _SAFETY * err ** -0.2))

    if not finished:
        logger.warning("step budget of %d exhausted at t=%.6g", config.max_steps, t)
        run.events.append(BudgetExhausted(t, "max_steps", state=run.state(t, x, p, theta)))

    traj = run.trajectory()
    terminal = traj.terminal
    logger.info("eps=%.6g: %d steps accepted, %d rejected, ended by %s at t=%.6g",
                e, accepted, rejected, terminal.kind if terminal else "duration", traj.t[-1])
    return traj


def dense_state(traj: Trajectory, t: float) -> PhaseState:
    """State at an arbitrary time inside a trajectory by re-integrating from the preceding sample.

    Args:
        traj: A trajectory produced by integrate
        t: Time inside the sampled span

    Returns:
        The interpolated state on the surface
    """
    times = traj.t
    forward = len(times) < 2 or times[-1] >= times[0]
    keys = times if forward else -times
    key = t if forward else -t
    if key < keys[0] - EVENT_TIME_TOL or key > keys[-1] + EVENT_TIME_TOL:
        raise DomainError(f"time {t} lies outside the trajectory span [{times[0]}, {times[-1]}]")
    j = int(np.searchsorted(keys, key, side="right")) - 1
    j = min(max(j, 0), len(times) - 1)
    x0, p0, theta0 = complex(traj.x[j]), complex(traj.p[j]), float(traj.theta[j])
    f0 = _force(x0, x0, theta0, traj.epsilon)[0]
    x, p, theta = _dense(x0, p0, theta0, f0, t - float(times[j]), traj.epsilon)
    if traj.single_sheeted:
        theta = fold_angle(theta)
    return PhaseState.from_complex(x, theta, p, t)


def resample(traj: Trajectory, times) -> Trajectory:
    """The trajectory evaluated at the given times, keeping its launch, events and config.

    Raises:
        DomainError: a time lies outside the sampled span
    """
    states = [dense_state(traj, float(t)) for t in times]
    return Trajectory(
        epsilon=traj.epsilon,
        launch=traj.launch,
        t=np.array([s.time for s in states], dtype=float),
        x=np.array([s.x for s in states], dtype=complex),
        p=np.array([s.p for s in states], dtype=complex),
        theta=np.array([s.position.theta for s in states], dtype=float),
        energy_err=np.array([_energy_error(s.position.r, s.position.theta, s.p, traj.epsilon) for s in states],
                            dtype=float),
        events=list(traj.events),
        config=traj.config,
    )
