"""Parameter sweeps over epsilon: the x0 and s0 curves, the s0 minimum and the gap table above eps = 2."""
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Literal, Optional, Tuple

from scipy.optimize import minimize_scalar

from .analysis import classify, critical_point, leaves_sheet_depth, terminating_start
from .constants import DEFAULT_BISECTION_TOL, THREADS_ENV, TURNING_DELTA, X0_BRACKET_CAP
from .errors import BracketInvalidError, ConfigError, DomainError, NoTerminationError, RiemannFlowError
from .integrator import IntegratorConfig, launch_from_turning_point
from .surface import as_epsilon, turning_point

logger = logging.getLogger(__name__)

CurveKind = Literal["x0", "s0", "xn", "sn"]
_BRACKET_FLOOR = 1e-6
_S0_MINIMUM_TOL = 1e-3


@dataclass(frozen=True)
class CriticalCurveSample:
    epsilon: float
    # The curve point is -i * value_y
    value_y: float
    kind: CurveKind
    tolerance: float
    # Pair or boundary index for the xn / sn kinds
    n: int = 0

    def __post_init__(self):
        if not self.value_y > 0:
            raise ValueError(f"value_y must be positive, got {self.value_y}")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")


@dataclass
class SweepResult:
    samples: List[CriticalCurveSample] = field(default_factory=list)
    failures: List[Tuple[float, str]] = field(default_factory=list)

    def values(self) -> List[Tuple[float, float]]:
        return [(s.epsilon, s.value_y) for s in self.samples]


@dataclass(frozen=True)
class GapEntry:
    n: int
    # Crossing ordinate y of s_n = -iy; None when the shot does not terminate
    y: Optional[float]
    reason: Optional[str] = None
    # Lower-cased verdict name of a non-terminating shot, e.g. "spiraling"
    verdict: Optional[str] = None


@dataclass
class GapTable:
    epsilon: float
    entries: List[GapEntry]
    # Upper edge of region R0, None if the search failed
    edge: Optional[float]
    edge_failure: Optional[str] = None

    def in_gap_order(self) -> List[int]:
        """Pair indices of the crossings inside the gap, listed from the bottom of the axis upward."""
        inside = [e for e in self.entries if e.y is not None and (self.edge is None or e.y < self.edge)]
        if self.edge is None:
            inside = [e for e in inside if e.n != 0]
        return [e.n for e in sorted(inside, key=lambda e: -e.y)]

    def failures(self) -> List[int]:
        return [e.n for e in self.entries if e.y is None]


def worker_count(requested: Optional[int] = None) -> int:
    """Worker processes for a sweep, capped by the RIEMANN_FLOW_THREADS environment variable."""
    count = requested if requested is not None else (os.cpu_count() or 1)
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            cap_value = int(cap)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {cap!r}")
        if cap_value < 1:
            raise ConfigError(f"{THREADS_ENV} must be at least 1, got {cap_value}")
        count = min(count, cap_value)
    return max(1, count)


def _run_tasks(task: Callable, items: list, workers: Optional[int]) -> list:
    """Map a module-level task over items, in order, serially or on a process pool."""
    count = min(worker_count(workers), len(items)) if items else 1
    if count <= 1:
        return [task(item) for item in items]
    with ProcessPoolExecutor(max_workers=count) as executor:
        return list(executor.map(task, items))


def _x0_bracket(eps: float, config: IntegratorConfig) -> Tuple[float, float]:
    """Bracket the x0 transition by doubling up from y=1 and halving down."""
    y_hi = 1.0
    while not leaves_sheet_depth(y_hi, eps, 0, config):
        y_hi *= 2.0
        if y_hi > X0_BRACKET_CAP:
            raise BracketInvalidError(f"Diverged: no sheet-leaving launch below y={X0_BRACKET_CAP:g}")
    y_lo = y_hi / 2.0
    while leaves_sheet_depth(y_lo, eps, 0, config):
        y_hi = y_lo
        y_lo /= 2.0
        if y_lo < _BRACKET_FLOOR:
            raise BracketInvalidError(f"every launch down to y={_BRACKET_FLOOR:g} leaves the principal sheet")
    return y_lo, y_hi


def _x0_task(args) -> Tuple[float, Optional[float], Optional[str]]:
    eps, config, tol = args
    try:
        y_lo, y_hi = _x0_bracket(eps, config)
        return eps, critical_point(eps, 0, y_lo, y_hi, tol, config), None
    except RiemannFlowError as exc:
        return eps, None, str(exc)


def _s0_task(args) -> Tuple[float, Optional[float], Optional[str]]:
    eps, config = args
    try:
        return eps, terminating_start(0, eps, config), None
    except RiemannFlowError as exc:
        return eps, None, str(exc)


def _sn_task(args) -> Tuple[int, Optional[float], Optional[str], Optional[str]]:
    n, eps, config = args
    try:
        return n, terminating_start(n, eps, config), None, None
    except NoTerminationError as exc:
        state = launch_from_turning_point(turning_point(n, "right", eps), eps)
        verdict = classify(state, eps, config).verdict
        return n, None, str(exc), type(verdict).__name__.lower()


def _collect(outcomes, kind: CurveKind, tolerance: float) -> SweepResult:
    result = SweepResult()
    for eps, value, reason in outcomes:
        if value is None:
            logger.warning("%s sweep failed at eps=%.6g: %s", kind, eps, reason)
            result.failures.append((eps, reason))
        else:
            result.samples.append(CriticalCurveSample(eps, value, kind, tolerance))
    return result


def _grid(eps_grid: Iterable[float]) -> List[float]:
    return sorted(set(float(e) for e in eps_grid))


def sweep_x0(eps_grid: Iterable[float], config: Optional[IntegratorConfig] = None,
             tol: float = DEFAULT_BISECTION_TOL, workers: Optional[int] = None) -> SweepResult:
    """The critical curve x0(eps) on a grid inside (0, 2).

    Args:
        eps_grid: Epsilon values; duplicates are dropped and the rest sorted
        config: Integrator settings
        tol: Bisection tolerance in y
        workers: Worker processes; defaults to the CPU count

    Returns:
        One sample per epsilon that converged, failures for the rest
    """
    grid = _grid(eps_grid)
    for eps in grid:
        if not 0 < eps < 2:
            raise DomainError(f"x0 sweeps need 0 < eps < 2, got {eps}")
    config = config or IntegratorConfig()
    outcomes = _run_tasks(_x0_task, [(eps, config, tol) for eps in grid], workers)
    return _collect(outcomes, "x0", tol)


def sweep_s0(eps_grid: Iterable[float], config: Optional[IntegratorConfig] = None,
             workers: Optional[int] = None) -> SweepResult:
    """The curve s0(eps) of terminating starts of pair 0."""
    grid = _grid(eps_grid)
    for eps in grid:
        if not eps > 0:
            raise DomainError(f"s0 sweeps need eps > 0, got {eps}")
    config = config or IntegratorConfig()
    outcomes = _run_tasks(_s0_task, [(eps, config) for eps in grid], workers)
    return _collect(outcomes, "s0", TURNING_DELTA)


def find_s0_minimum(eps_lo: float, eps_hi: float, config: Optional[IntegratorConfig] = None,
                    tol: float = _S0_MINIMUM_TOL) -> Tuple[float, float]:
    """Bounded Brent search for the minimum of Im s0(eps), the point where s0 = -iy lies lowest.

    Returns:
        (eps_star, value_y_star)

    Raises:
        BracketInvalidError: Im s0 at the optimum is not below both ends
    """
    if not 0 < eps_lo < eps_hi:
        raise DomainError(f"need 0 < eps_lo < eps_hi, got [{eps_lo}, {eps_hi}]")
    config = config or IntegratorConfig()

    def imag_s0(eps: float) -> float:
        return -terminating_start(0, eps, config)

    res = minimize_scalar(imag_s0, bounds=(eps_lo, eps_hi), method="bounded", options={"xatol": tol})
    eps_star, y_star = float(res.x), -float(res.fun)
    y_lo, y_hi = -imag_s0(eps_lo), -imag_s0(eps_hi)
    if y_star < y_lo or y_star < y_hi:
        raise BracketInvalidError(f"[{eps_lo}, {eps_hi}] does not bracket a minimum of s0 "
                                  f"(ends {y_lo:.6g}, {y_hi:.6g}; interior {y_star:.6g})")
    logger.info("s0 minimum: eps=%.6g, y=%.9g", eps_star, y_star)
    return eps_star, y_star


def gap_edge(eps: float, config: Optional[IntegratorConfig] = None, tol: float = DEFAULT_BISECTION_TOL,
             s0: Optional[float] = None) -> float:
    """Upper edge of region R0 for eps > 2, below which launches leave the principal sheet."""
    as_epsilon(eps).require_above(2.0)
    config = config or IntegratorConfig()
    if s0 is None:
        s0 = terminating_start(0, eps, config)
    return critical_point(eps, 0, 0.15 * s0, 0.9 * s0, tol, config)


def gap_table(eps: float, n_max: int, config: Optional[IntegratorConfig] = None,
              workers: Optional[int] = None) -> GapTable:
    """Terminating crossings s_n for n = 0..n_max at eps > 2, together with the R0 edge.

    Args:
        eps: Deformation parameter above 2
        n_max: Largest pair index
        config: Integrator settings
        workers: Worker processes; defaults to the CPU count

    Returns:
        The table; non-terminating pairs carry their reason
    """
    as_epsilon(eps).require_above(2.0)
    if n_max < 0:
        raise DomainError(f"n_max must be >= 0, got {n_max}")
    config = config or IntegratorConfig()
    outcomes = _run_tasks(_sn_task, [(n, eps, config) for n in range(n_max + 1)], workers)
    entries = [GapEntry(n, y, reason, verdict) for n, y, reason, verdict in outcomes]

    edge, edge_failure = None, None
    s0 = entries[0].y
    if s0 is None:
        edge_failure = "pair 0 does not terminate"
    else:
        try:
            edge = gap_edge(eps, config, s0=s0)
        except RiemannFlowError as exc:
            edge_failure = str(exc)
            logger.warning("gap edge search failed at eps=%.6g: %s", eps, exc)
    return GapTable(eps, entries, edge, edge_failure)
