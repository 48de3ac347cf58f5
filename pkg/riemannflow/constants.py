import math
from typing import Dict, Tuple


class Colors:
    RED = (231, 76, 60)
    PURPLE = (155, 89, 182)
    DARK_BLUE = (41, 128, 185)
    BLUE = (52, 152, 219)
    CYAN = (26, 188, 156)
    LIME = (139, 195, 74)
    YELLOW = (241, 196, 15)
    BROWN = (141, 85, 36)
    WHITE = (255, 255, 255)
    BLACK = (0, 0, 0)
    BLACK_A = (44, 62, 80)


# Sheets -3..+3: purple on the principal
# sheet, red above it, blue below it, greens on +-2, brown on -3.
SHEET_COLORS: Dict[int, Tuple[int, int, int]] = {
    -3: Colors.BROWN,
    -2: Colors.CYAN,
    -1: Colors.BLUE,
    0: Colors.PURPLE,
    1: Colors.RED,
    2: Colors.LIME,
    3: Colors.YELLOW,
}


def sheet_color(sheet: int) -> str:
    """Hex color of a Riemann sheet; the 7-color cycle repeats beyond +-3."""
    folded = (sheet + 3) % 7 - 3
    return "#%02x%02x%02x" % SHEET_COLORS[folded]


HALF_PI = 0.5 * math.pi
TWO_PI = 2.0 * math.pi

# Integrator defaults
DEFAULT_REL_TOL = 1e-10
DEFAULT_ABS_TOL = 1e-10
DEFAULT_ENERGY_TOL = 1e-8
DEFAULT_MAX_TIME = 100.0
DEFAULT_ESCAPE_RADIUS = 1e6
DEFAULT_CLOSURE_TOL = 1e-6
DEFAULT_TURNING_TOL = 1e-3
DEFAULT_MAX_STEP_ANGLE = 0.5
DEFAULT_MAX_STEPS = 2_000_000

# Searches
DEFAULT_BISECTION_TOL = 1e-6
EVENT_TIME_TOL = 1e-10
X0_BRACKET_CAP = 1e3
TURNING_DELTA = 1e-4

EPSILON_TOKENS = {
    "1/pi": 1.0 / math.pi,
    "1+sqrt2": 1.0 + math.sqrt(2.0),
}

THREADS_ENV = "RIEMANN_FLOW_THREADS"
