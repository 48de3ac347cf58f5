"""Orbit classification, periods, enclosure, separatrix search, terminating shots and escape asymptotics."""
import cmath
import logging
import math
from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, List, NamedTuple, Optional, Set, Tuple, Union

import numpy as np
from scipy.optimize import least_squares, minimize_scalar

from .constants import DEFAULT_BISECTION_TOL, TURNING_DELTA
from .errors import (BracketInvalidError, DomainError, EscapeFitError, InsufficientTailError, NoTerminationError,
                     NotClosedError, UnresolvedRunError)
from .events import (BranchCutCrossing, BudgetExhausted, Closure, CutRayCrossing, EnergyFault, Escape, Event,
                     NegativeImagAxisCrossing, TurningTermination)
from .integrator import (IntegratorConfig, Trajectory, dense_state, integrate, launch_from_turning_point,
                         launch_on_axis, launch_on_shell)
from .misc import bisect_predicate
from .special import gamma
from .surface import (EpsilonLike, PhaseState, Side, SurfacePoint, as_epsilon, sheet_index, turning_point,
                      turning_points_between)

logger = logging.getLogger(__name__)

# Launches are -iy (a positive float), a surface point, or a ready state
Launch = Union[float, SurfacePoint, PhaseState]

PT_SYMMETRY_TOL = 1e-6
PT_SAMPLES = 64
ESCAPE_FIT_RADIUS = 100.0
ESCAPE_FIT_MIN_SAMPLES = 20
ESCAPE_FIT_TOL = 1e-2
_ENCLOSURE_MAX_INCREMENT = 1.0
_SCAN_POINTS = 8
SPIRAL_GROWTH = 2.0


@dataclass(frozen=True)
class Closed:
    period: float
    sheets_visited: FrozenSet[int]
    enclosed_pairs: FrozenSet[Tuple[int, Side]]

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError(f"closed orbits have a positive period, got {self.period}")


@dataclass(frozen=True)
class Terminating:
    pair_n: int
    side: Side
    # Magnitude y of the first principal-sheet crossing -iy
    s_value: float

    def __post_init__(self):
        if not self.s_value > 0:
            raise ValueError(f"s_value must be positive, got {self.s_value}")


@dataclass(frozen=True)
class Escaping:
    theta: float
    blowup_time: Optional[float]


@dataclass(frozen=True)
class Spiraling:
    """Neither closes, rests nor escapes within the budget while its radius keeps growing."""

    # Largest radius reached
    max_radius: float
    # Radius growth between the first and last quarter of the run
    growth: float
    sheets_visited: FrozenSet[int]


@dataclass(frozen=True)
class Undetermined:
    reason: str


Verdict = Union[Closed, Terminating, Escaping, Spiraling, Undetermined]


@dataclass(frozen=True)
class OrbitClassification:
    verdict: Verdict
    pt_symmetric: bool
    pt_distance: float
    trajectory: Trajectory = field(repr=False, compare=False)


@dataclass(frozen=True)
class EscapeFit:
    """Power law r = C (t_star - t)^b fitted to the tail of an escaping run."""

    t_star: float
    fitted_exponent: float
    # Expected exponent -2/eps
    expected_exponent: float
    # RMS residual of log r
    residual: float

    @property
    def relative_error(self) -> float:
        return abs(self.fitted_exponent - self.expected_exponent) / abs(self.expected_exponent)


class EscapeRay(NamedTuple):
    n: int
    theta: float
    sheet: int


def _launch_state(x0: Launch, eps: EpsilonLike) -> PhaseState:
    if isinstance(x0, PhaseState):
        return x0
    if isinstance(x0, SurfacePoint):
        return launch_on_shell(x0, 1, eps)
    return launch_on_axis(float(x0), eps)


def analytic_period(eps: EpsilonLike) -> float:
    """Closed-form period 2 sqrt(pi) cos(pi eps/(4+2eps)) Gamma((3+eps)/(2+eps)) / Gamma((4+eps)/(4+2eps)).

    Args:
        eps: Deformation parameter, eps > -2

    Returns:
        The period shared by every closed orbit that does not cross the cut
    """
    e = float(as_epsilon(eps).require_above(-2.0))
    return (2.0 * math.sqrt(math.pi) * math.cos(math.pi * e / (4.0 + 2.0 * e))
            * gamma((3.0 + e) / (2.0 + e)) / gamma((4.0 + e) / (4.0 + 2.0 * e)))


def numeric_period(x0: Launch, eps: EpsilonLike, config: Optional[IntegratorConfig] = None) -> float:
    """Time until the orbit from x0 returns to its launch state.

    Raises:
        NotClosedError: the run ended without a Closure event
    """
    traj = integrate(_launch_state(x0, eps), eps, config)
    terminal = traj.terminal
    if not isinstance(terminal, Closure):
        ended = terminal.kind if terminal else "duration"
        raise NotClosedError(f"orbit did not close (run ended by {ended} at t={traj.t[-1]:.6g})")
    return terminal.period


def _winding(curve: np.ndarray, centre: complex) -> float:
    """Total signed angle swept by a closed polyline around a centre, in turns."""
    w = np.append(curve, curve[:1]) - centre
    return float(np.sum(np.angle(w[1:] / w[:-1]))) / (2.0 * math.pi)


def _refined_curve(traj: Trajectory, to_plane, centres: List[complex]) -> np.ndarray:
    """Closed curve in the chosen plane, with segments refined near any centre they sweep quickly."""
    points = [to_plane(traj.x[0], traj.theta[0])]
    for j in range(1, len(traj)):
        a = to_plane(traj.x[j - 1], traj.theta[j - 1])
        b = to_plane(traj.x[j], traj.theta[j])
        sweep = max((abs(cmath.phase((b - c) / (a - c))) for c in centres), default=0.0)
        if sweep > _ENCLOSURE_MAX_INCREMENT:
            n_sub = int(math.ceil(8 * sweep))
            for s in np.linspace(traj.t[j - 1], traj.t[j], n_sub + 1)[1:-1]:
                state = dense_state(traj, float(s))
                points.append(to_plane(state.x, state.position.theta))
        points.append(b)
    return np.array(points, dtype=complex)


def enclosed_turning_points(traj: Trajectory, eps: EpsilonLike) -> Set[Tuple[int, Side]]:
    """Turning points with nonzero winding number of a closed orbit.

    Multi-sheeted surfaces are handled in log coordinates log r + i theta where
    each turning point sits at (0, theta_N); single-sheeted surfaces use the
    planar winding around the distinct turning points.

    Args:
        traj: A trajectory that ended in a Closure event
        eps: Deformation parameter

    Returns:
        The set of (pair index, side) enclosed
    """
    if not isinstance(traj.terminal, Closure):
        raise NotClosedError("enclosure needs a closed orbit")
    e = as_epsilon(eps)
    if e.is_single_sheeted:
        candidates = turning_points_between(-1.5 * math.pi + 1e-12, 0.5 * math.pi, e)
        centres = [tp.location.x for tp in candidates]

        def to_plane(x, theta):
            return complex(x)
    else:
        candidates = turning_points_between(float(traj.theta.min()) - 1.0, float(traj.theta.max()) + 1.0, e)
        centres = [complex(0.0, tp.location.theta) for tp in candidates]

        def to_plane(x, theta):
            return complex(math.log(abs(x)), float(theta))

    curve = _refined_curve(traj, to_plane, centres)
    enclosed = set()
    for tp, centre in zip(candidates, centres):
        if round(_winding(curve, centre)) != 0:
            enclosed.add((tp.index_n, tp.side))
    return enclosed


def _nearest_time(traj: Trajectory, target: complex, target_theta: float) -> Optional[float]:
    """Time at which the trajectory passes closest to a target point on the same part of the surface."""
    distance = np.abs(traj.x - target)
    if not traj.single_sheeted:
        distance = np.where(np.abs(traj.theta - target_theta) < math.pi, distance, np.inf)
    j = int(np.argmin(distance))
    if not np.isfinite(distance[j]):
        return None
    lo = float(traj.t[max(j - 1, 0)])
    hi = float(traj.t[min(j + 1, len(traj) - 1)])
    if lo == hi:
        return lo
    if lo > hi:
        lo, hi = hi, lo
    res = minimize_scalar(lambda s: abs(dense_state(traj, s).x - target), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-9})
    return float(res.x)


def pt_symmetry_distance(traj: Trajectory, samples: int = PT_SAMPLES) -> float:
    """Largest distance from a PT-reflected sample to the trajectory, relative to the orbit diameter."""
    x = traj.x
    diameter = math.hypot(float(np.ptp(x.real)), float(np.ptp(x.imag)))
    if diameter == 0.0:
        return 0.0
    worst = 0.0
    for j in np.unique(np.linspace(0, len(traj) - 1, samples).astype(int)):
        target = -complex(x[j]).conjugate()
        target_theta = -math.pi - float(traj.theta[j])
        t_best = _nearest_time(traj, target, target_theta)
        if t_best is None:
            return math.inf
        worst = max(worst, abs(dense_state(traj, t_best).x - target))
    return worst / diameter


def radius_growth(traj: Trajectory) -> float:
    """Largest radius in the last quarter of a run over the largest radius in its first quarter."""
    if len(traj) < 8:
        return 1.0
    elapsed = np.abs(traj.t - traj.t[0])
    span = float(elapsed[-1])
    if span == 0.0:
        return 1.0
    r = traj.r
    early, late = r[elapsed <= 0.25 * span], r[elapsed >= 0.75 * span]
    if early.size == 0 or late.size == 0:
        return 1.0
    return float(late.max() / early.max())


def _spiraling(traj: Trajectory) -> bool:
    return len(set(traj.sheets.tolist())) > 1 and radius_growth(traj) >= SPIRAL_GROWTH


def classify(x0: Launch, eps: EpsilonLike, config: Optional[IntegratorConfig] = None) -> OrbitClassification:
    """Integrate from x0 and turn the terminal event into a verdict.

    Args:
        x0: Ordinate y of a launch at -iy, a surface point, or a launch state
        eps: Deformation parameter
        config: Integrator settings

    Returns:
        The verdict, the PT-symmetry flag and the trajectory behind them
    """
    traj = integrate(_launch_state(x0, eps), eps, config)
    terminal = traj.terminal
    verdict: Verdict
    if isinstance(terminal, Closure):
        verdict = Closed(terminal.period, frozenset(int(k) for k in traj.sheets),
                         frozenset(enclosed_turning_points(traj, eps)))
    elif isinstance(terminal, TurningTermination):
        crossings = [e for e in traj.events_of(NegativeImagAxisCrossing) if e.sheet == 0]
        if crossings:
            verdict = Terminating(terminal.pair_n, terminal.side, crossings[0].y)
        else:
            verdict = Undetermined(f"came to rest at pair {terminal.pair_n} ({terminal.side}) "
                                   "without crossing the principal negative-imaginary axis")
    elif isinstance(terminal, Escape):
        try:
            blowup = fit_escape(traj, eps).t_star
        except (InsufficientTailError, EscapeFitError, DomainError):
            blowup = None
        verdict = Escaping(terminal.theta, blowup)
    elif isinstance(terminal, (BudgetExhausted, EnergyFault)) and _spiraling(traj):
        verdict = Spiraling(float(traj.r.max()), radius_growth(traj), frozenset(int(k) for k in traj.sheets))
    elif isinstance(terminal, EnergyFault):
        verdict = Undetermined("energy fault")
    elif isinstance(terminal, BudgetExhausted):
        verdict = Undetermined(f"budget ({terminal.reason})")
    else:
        verdict = Undetermined("no terminal event")

    distance = pt_symmetry_distance(traj)
    logger.info("classified eps=%.6g launch %s: %s, PT distance %.3g",
                float(as_epsilon(eps)), traj.launch.x, type(verdict).__name__, distance)
    return OrbitClassification(verdict, distance < PT_SYMMETRY_TOL, distance, traj)


def leaves_sheet_depth(y: float, eps: float, depth: int, config: IntegratorConfig) -> bool:
    """Does the orbit from -iy go deeper than sheet +-depth before closing?

    Escapes count as leaving; closures and terminations as staying.

    Raises:
        UnresolvedRunError: the run ended by an energy fault, the budget or its
            duration before it either left or returned
    """

    def too_deep(event: Event) -> bool:
        if isinstance(event, BranchCutCrossing):
            return abs(event.sheet_to) > depth
        return isinstance(event, CutRayCrossing) and depth == 0

    traj = integrate(launch_on_axis(y, eps), eps, config, stop=too_deep)
    terminal = traj.events[-1] if traj.events else None
    if terminal is not None and too_deep(terminal):
        result = True
    elif isinstance(terminal, Escape):
        result = True
    elif isinstance(terminal, (Closure, TurningTermination)):
        result = False
    else:
        ended = terminal.kind if terminal else "duration"
        raise UnresolvedRunError(f"launch at -{y:.9g}i ended by {ended} at t={traj.t[-1]:.6g} "
                                 f"before reaching or ruling out sheet depth {depth}", terminal=terminal)
    logger.debug("sheet depth %d from y=%.9g -> %s", depth, y, result)
    return result


def region_beyond(y: float, eps: float, n: int, config: IntegratorConfig) -> bool:
    """Does the closed orbit from -iy encircle turning points of a pair above n?

    The region of an orbit is the largest pair index among the turning
    points it encloses. Escapes count as beyond every region.

    Raises:
        UnresolvedRunError: the orbit neither closed nor escaped, or closed
            around no turning point
    """
    traj = integrate(launch_on_axis(y, eps), eps, config)
    terminal = traj.terminal
    if isinstance(terminal, Escape):
        return True
    if not isinstance(terminal, Closure):
        ended = terminal.kind if terminal else "duration"
        raise UnresolvedRunError(f"launch at -{y:.9g}i ended by {ended} at t={traj.t[-1]:.6g} without closing",
                                 terminal=terminal)
    enclosed = enclosed_turning_points(traj, eps)
    if not enclosed:
        raise UnresolvedRunError(f"closed orbit from -{y:.9g}i encloses no turning point", terminal=terminal)
    region = max(m for m, _ in enclosed)
    logger.debug("orbit from y=%.9g encloses pairs up to %d", y, region)
    return region > n


def critical_point(eps: EpsilonLike, pair_boundary: int, y_lo: float, y_hi: float,
                   tol: float = DEFAULT_BISECTION_TOL, config: Optional[IntegratorConfig] = None) -> float:
    """Ordinate y of the separatrix x_n = -iy between orbits of region n and orbits beyond it.

    For n = 0 the test is whether the orbit leaves the principal sheet, which
    stops each run at its first cut crossing. Above 0 several regions share
    the same sheets, so each orbit is closed and the largest enclosed pair
    index decides.

    Args:
        eps: Deformation parameter, eps >= 0
        pair_boundary: Region index n; 0 gives x_0, the last orbit that does not cross the cut
        y_lo: One end of the search bracket
        y_hi: Other end of the search bracket
        tol: Width of the final bracket in y
        config: Integrator settings

    Returns:
        The transition ordinate y

    Raises:
        BracketInvalidError: both bracket ends classify alike
        UnresolvedRunError: a launch inside the bracket could not be classified
    """
    e = as_epsilon(eps).require_unbroken()
    if pair_boundary < 0:
        raise DomainError(f"pair boundary must be >= 0, got {pair_boundary}")
    if e.is_single_sheeted and pair_boundary > 0:
        raise DomainError(f"eps={e.value} is single-sheeted; only boundary 0 exists")
    if not 0 < y_lo < y_hi:
        raise DomainError(f"need 0 < y_lo < y_hi, got [{y_lo}, {y_hi}]")
    config = config or IntegratorConfig()

    def pred(y: float) -> bool:
        if pair_boundary == 0:
            return leaves_sheet_depth(y, e.value, 0, config)
        return region_beyond(y, e.value, pair_boundary, config)

    value_lo, value_hi = pred(y_lo), pred(y_hi)
    if value_lo == value_hi:
        raise BracketInvalidError(f"launches at -{y_lo}i and -{y_hi}i classify alike ({value_lo})")

    grid = np.linspace(y_lo, y_hi, _SCAN_POINTS + 2)
    values = [value_lo] + [pred(float(y)) for y in grid[1:-1]] + [value_hi]
    first = next(i for i, v in enumerate(values) if v != value_lo)
    if any(v == value_lo for v in values[first:]):
        logger.warning("separatrix predicate is not monotone on [%g, %g] at eps=%g; using the first transition",
                       y_lo, y_hi, e.value)
    y_star = bisect_predicate(pred, float(grid[first - 1]), float(grid[first]), xtol=tol)
    logger.info("critical point x_%d at eps=%.6g: -%.9gi", pair_boundary, e.value, y_star)
    return y_star


def terminating_start(pair_n: int, eps: EpsilonLike, config: Optional[IntegratorConfig] = None,
                      delta: float = TURNING_DELTA) -> float:
    """Ordinate y of s_n = -iy, where the terminating path of pair n crosses the principal negative-imaginary axis.

    Args:
        pair_n: Pair index n
        eps: Deformation parameter, eps >= 0
        config: Integrator settings
        delta: Time offset of the launch from rest

    Returns:
        The crossing ordinate y

    Raises:
        NoTerminationError: the shot never crossed the principal axis
    """
    e = as_epsilon(eps).require_unbroken()
    tp = turning_point(pair_n, "right", e)
    traj = integrate(launch_from_turning_point(tp, e, delta), e, config)
    terminal = traj.terminal
    crossings = [ev for ev in traj.events_of(NegativeImagAxisCrossing) if ev.sheet == 0]
    if not crossings:
        ended = terminal.kind if terminal else "duration"
        raise NoTerminationError(f"pair {pair_n} at eps={e.value:.6g}: no principal-sheet axis crossing "
                                 f"(run ended by {ended})", terminal=terminal)
    if not (isinstance(terminal, TurningTermination) and terminal.pair_n == pair_n and terminal.side == "left"):
        logger.warning("pair %d at eps=%.6g: shot did not come to rest at the mirror turning point (ended by %s)",
                       pair_n, e.value, terminal.kind if terminal else "duration")
    y = crossings[0].y
    logger.info("s_%d at eps=%.6g: -%.9gi", pair_n, e.value, y)
    return y


def escape_angles(eps: EpsilonLike, n_range: Iterable[int]) -> List[EscapeRay]:
    """Unwrapped angles -pi/2 + (2N-1) pi/eps of the asymptotic escape rays."""
    e = as_epsilon(eps).require_above(0.0).value
    rays = []
    for n in n_range:
        theta = -0.5 * math.pi + (2 * n - 1) * math.pi / e
        rays.append(EscapeRay(int(n), theta, sheet_index(theta)))
    return rays


def escape_phase_residual(theta: float, eps: EpsilonLike) -> float:
    """Residual |1 + exp(i pi eps/2) exp(i eps theta)| of the asymptotic ray condition."""
    e = float(as_epsilon(eps))
    return abs(1.0 + cmath.exp(1j * (0.5 * math.pi * e + e * theta)))


def fit_escape(traj: Trajectory, eps: Optional[EpsilonLike] = None, r_min: float = ESCAPE_FIT_RADIUS,
               min_samples: int = ESCAPE_FIT_MIN_SAMPLES, fit_tol: float = ESCAPE_FIT_TOL) -> EscapeFit:
    """Fit log r = c + b log(t_star - t) to the tail of an escaping run.

    Args:
        traj: A trajectory ending in an Escape event
        eps: Deformation parameter; the trajectory's own by default
        r_min: Only samples beyond this radius enter the fit
        min_samples: Fewest tail samples accepted
        fit_tol: Largest RMS residual of log r accepted

    Returns:
        The fitted blowup time and exponent
    """
    e = float(as_epsilon(traj.epsilon if eps is None else eps).require_above(0.0))
    if not isinstance(traj.terminal, Escape):
        raise InsufficientTailError("run did not end in an escape")
    r = traj.r
    mask = r > r_min
    if int(mask.sum()) < min_samples:
        raise InsufficientTailError(f"only {int(mask.sum())} samples beyond r={r_min}, need {min_samples}")

    t = traj.t[mask]
    log_r = np.log(r[mask])
    direction = 1.0 if traj.t[-1] >= traj.t[0] else -1.0
    t_last = float(t[-1])
    lead = r[mask][-1] ** (-0.5 * e) / e

    def residuals(params):
        c, b, u = params
        remaining = np.exp(u) + direction * (t_last - t)
        return log_r - (c + b * np.log(remaining))

    guess = [-(2.0 / e) * math.log(e), -2.0 / e, math.log(lead)]
    result = least_squares(residuals, guess, method="lm")
    c, b, u = result.x
    rms = float(np.sqrt(np.mean(result.fun ** 2)))
    if not result.success or not np.isfinite(rms) or rms > fit_tol:
        raise EscapeFitError(f"power-law fit failed (residual {rms:.3g}): {result.message}")
    fit = EscapeFit(t_last + direction * math.exp(u), float(b), -2.0 / e, rms)
    logger.info("escape fit eps=%.6g: exponent %.6g (expected %.6g), t_star %.9g",
                e, fit.fitted_exponent, fit.expected_exponent, fit.t_star)
    return fit


def min_radius(traj: Trajectory) -> float:
    """Closest sampled approach to the branch point."""
    return float(traj.r.min())
