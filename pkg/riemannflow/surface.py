"""Points, momenta and turning points on the Riemann surface of H = p^2 + x^2 (ix)^eps.

Angles are always stored unwrapped. The sheet index is derived from the
angle and never stored on its own. Complex powers are built from the modulus
and the unwrapped angle so that they never fold back onto the principal sheet.
"""
import cmath
import math
from dataclasses import dataclass
from typing import List, Literal, Tuple, Union

from .constants import HALF_PI, TWO_PI
from .errors import DomainError

Side = Literal["left", "right"]


def sheet_index(theta: float) -> int:
    """Sheet containing an unwrapped angle; sheet 0 spans (-3pi/2, pi/2)."""
    return math.floor((theta + 1.5 * math.pi) / TWO_PI)


def fold_angle(theta: float) -> float:
    """Shift an angle onto the principal sheet by a multiple of 2pi."""
    return theta - TWO_PI * sheet_index(theta)


@dataclass(frozen=True)
class EpsilonParam:
    """The deformation parameter of the Hamiltonian."""

    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise DomainError(f"epsilon must be finite, got {self.value}")

    @property
    def is_single_sheeted(self) -> bool:
        """True for integer epsilon, where x^2 (ix)^eps is single valued."""
        return abs(self.value - round(self.value)) < 1e-12

    def require_unbroken(self) -> 'EpsilonParam':
        """Reject the broken region eps < 0.

        Returns:
            self for method chaining
        """
        if self.value < 0:
            raise DomainError(f"this analysis needs epsilon >= 0, got {self.value}")
        return self

    def require_above(self, bound: float) -> 'EpsilonParam':
        """Reject eps <= bound.

        Returns:
            self for method chaining
        """
        if self.value <= bound:
            raise DomainError(f"epsilon must exceed {bound}, got {self.value}")
        return self

    def __float__(self) -> float:
        return float(self.value)


EpsilonLike = Union[EpsilonParam, float, int]


def as_epsilon(eps: EpsilonLike) -> EpsilonParam:
    """Accept either an EpsilonParam or a bare number."""
    if isinstance(eps, EpsilonParam):
        return eps
    return EpsilonParam(float(eps))


@dataclass(frozen=True)
class SurfacePoint:
    """A point x = r exp(i theta) on the surface with an unwrapped angle."""

    # Modulus |x|; the branch point r = 0 is excluded
    r: float

    # Unwrapped argument carrying the full winding history
    theta: float

    def __post_init__(self):
        if not (self.r > 0 and math.isfinite(self.r)):
            raise DomainError(f"surface points need 0 < r < inf, got r={self.r}")
        if not math.isfinite(self.theta):
            raise DomainError(f"surface points need a finite angle, got {self.theta}")

    @property
    def sheet(self) -> int:
        return sheet_index(self.theta)

    @property
    def x(self) -> complex:
        """Cartesian projection; the winding is lost."""
        return cmath.rect(self.r, self.theta)

    @property
    def log_lift(self) -> complex:
        """The point in log coordinates, log r + i theta."""
        return complex(math.log(self.r), self.theta)

    @classmethod
    def from_complex(cls, x: complex, reference_theta: float = -HALF_PI) -> 'SurfacePoint':
        """Lift a Cartesian point using the branch nearest a reference angle.

        Args:
            x: Cartesian position
            reference_theta: Unwrapped angle the result stays within pi of

        Returns:
            The lifted point
        """
        theta = reference_theta + cmath.phase(x * cmath.exp(-1j * reference_theta))
        return cls(abs(x), theta)


def axis_point(y: float) -> SurfacePoint:
    """The point -iy on the principal sheet."""
    return SurfacePoint(y, -HALF_PI)


@dataclass(frozen=True)
class MomentumPolar:
    """Momentum p = a exp(i alpha)."""

    a: float
    alpha: float

    def __post_init__(self):
        if self.a < 0:
            raise DomainError(f"momentum modulus must be >= 0, got {self.a}")

    @property
    def p(self) -> complex:
        return cmath.rect(self.a, self.alpha)

    @classmethod
    def from_complex(cls, p: complex) -> 'MomentumPolar':
        return cls(abs(p), cmath.phase(p))


@dataclass(frozen=True)
class PhaseState:
    """Full dynamical state (x, p, t)."""

    position: SurfacePoint
    momentum: MomentumPolar
    time: float = 0.0

    @property
    def x(self) -> complex:
        return self.position.x

    @property
    def p(self) -> complex:
        return self.momentum.p

    @classmethod
    def from_complex(cls, x: complex, theta: float, p: complex, time: float = 0.0) -> 'PhaseState':
        """Build a state from Cartesian x and p plus the unwrapped angle of x."""
        return cls(SurfacePoint(abs(x), theta), MomentumPolar.from_complex(p), time)


@dataclass(frozen=True)
class TurningPoint:
    """Member of the n-th PT-symmetric pair of turning points."""

    index_n: int
    side: Side
    location: SurfacePoint

    @property
    def tower_index(self) -> int:
        return tower_index(self.index_n, self.side)


def potential_value(r: float, theta: float, eps: float) -> complex:
    """x^2 (ix)^eps evaluated on the sheet selected by the unwrapped angle."""
    return r ** (2.0 + eps) * cmath.exp(1j * ((2.0 + eps) * theta + eps * HALF_PI))


def force_value(r: float, theta: float, eps: float) -> complex:
    """x (ix)^eps on the sheet selected by the unwrapped angle."""
    return r ** (1.0 + eps) * cmath.exp(1j * ((1.0 + eps) * theta + eps * HALF_PI))


def potential(point: SurfacePoint, eps: EpsilonLike) -> complex:
    """Potential x^2 (ix)^eps at a surface point."""
    return potential_value(point.r, point.theta, float(as_epsilon(eps)))


def energy(state: PhaseState, eps: EpsilonLike) -> complex:
    """Energy p^2 + x^2 (ix)^eps of a state.

    Args:
        state: The phase-space state
        eps: Deformation parameter

    Returns:
        The complex energy; 1 for every state the integrator produces
    """
    return state.p ** 2 + potential(state.position, eps)


def acceleration(point: SurfacePoint, eps: EpsilonLike) -> complex:
    """Newton-form acceleration -2(2+eps) x (ix)^eps at a surface point."""
    e = float(as_epsilon(eps))
    return -2.0 * (2.0 + e) * force_value(point.r, point.theta, e)


def turning_point_slope(eps: EpsilonLike) -> float:
    """Angle above the real axis at which the terminating curve leaves the right turning point."""
    e = float(as_epsilon(eps).require_above(-2.0))
    return math.pi * e / (4.0 + 2.0 * e)


def tower_angle(tower_n: int, eps: float) -> float:
    """Unwrapped angle (4N - eps) pi / (2 eps + 4) of the N-th turning point."""
    return (4.0 * tower_n - eps) * math.pi / (2.0 * eps + 4.0)


def tower_index(pair_n: int, side: Side) -> int:
    """Tower index N of a pair member: right is N = n, left is N = -n-1."""
    return pair_n if side == "right" else -pair_n - 1


def pair_of(tower_n: int) -> Tuple[int, Side]:
    """Inverse of tower_index."""
    if tower_n >= 0:
        return tower_n, "right"
    return -tower_n - 1, "left"


def turning_point(pair_n: int, side: Side, eps: EpsilonLike) -> TurningPoint:
    """One member of the n-th pair of turning points.

    Args:
        pair_n: Pair index n >= 0
        side: "right" (N = n) or "left" (N = -n-1)
        eps: Deformation parameter, eps > -2

    Returns:
        The turning point on the unit circle with its unwrapped angle
    """
    e = float(as_epsilon(eps).require_above(-2.0))
    if pair_n < 0 or int(pair_n) != pair_n:
        raise DomainError(f"pair index must be a non-negative integer, got {pair_n}")
    if side not in ("left", "right"):
        raise DomainError(f"side must be 'left' or 'right', got {side!r}")
    theta = tower_angle(tower_index(int(pair_n), side), e)
    return TurningPoint(int(pair_n), side, SurfacePoint(1.0, theta))


def turning_points_between(theta_lo: float, theta_hi: float, eps: EpsilonLike) -> List[TurningPoint]:
    """Every turning point whose unwrapped angle lies in [theta_lo, theta_hi]."""
    e = float(as_epsilon(eps).require_above(-2.0))
    scale = (2.0 * e + 4.0) / math.pi
    n_lo = math.ceil((scale * theta_lo + e) / 4.0)
    n_hi = math.floor((scale * theta_hi + e) / 4.0)
    points = []
    for tower_n in range(n_lo, n_hi + 1):
        pair_n, side = pair_of(tower_n)
        points.append(TurningPoint(pair_n, side, SurfacePoint(1.0, tower_angle(tower_n, e))))
    return points


def nearest_turning_point(theta: float, eps: EpsilonLike) -> TurningPoint:
    """The turning point whose unwrapped angle is closest to theta."""
    e = float(as_epsilon(eps).require_above(-2.0))
    tower_n = round(((2.0 * e + 4.0) * theta / math.pi + e) / 4.0)
    pair_n, side = pair_of(tower_n)
    return TurningPoint(pair_n, side, SurfacePoint(1.0, tower_angle(tower_n, e)))


def pt_reflect(point: SurfacePoint) -> SurfacePoint:
    """PT reflection x -> -x*, which maps sheet k to sheet -k."""
    return SurfacePoint(point.r, -math.pi - point.theta)
