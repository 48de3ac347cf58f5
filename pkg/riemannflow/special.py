"""Special functions needed by the closed-form period."""
import math

from .errors import DomainError

# Lanczos approximation, g = 7 with 9 coefficients. Relative error stays
# below 1e-14 for real arguments of moderate size.
LANCZOS_G = 7
LANCZOS_COEFFICIENTS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def gamma(x: float) -> float:
    """Gamma function of a real argument.

    Args:
        x: Real argument, not a non-positive integer

    Returns:
        Gamma(x)

    Raises:
        DomainError: x is a pole or not finite
    """
    if not math.isfinite(x):
        raise DomainError(f"gamma needs a finite argument, got {x}")
    if x <= 0 and x == math.floor(x):
        raise DomainError(f"gamma has a pole at {x}")

    # Reflection formula for the left half line
    if x < 0.5:
        return math.pi / (math.sin(math.pi * x) * gamma(1.0 - x))

    z = x - 1.0
    series = LANCZOS_COEFFICIENTS[0]
    for i, coefficient in enumerate(LANCZOS_COEFFICIENTS[1:], start=1):
        series += coefficient / (z + i)

    t = z + LANCZOS_G + 0.5
    # exp/log form keeps t**(z+0.5) from overflowing before exp(-t) cancels it
    return math.sqrt(2.0 * math.pi) * math.exp((z + 0.5) * math.log(t) - t) * series
