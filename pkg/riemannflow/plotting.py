from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .constants import Colors, sheet_color
from .errors import OutputError
from .integrator import Trajectory
from .surface import EpsilonLike, as_epsilon, turning_points_between

_SVG_SALT = "riemannflow"


def _hex(color: Tuple[int, int, int]) -> str:
    return "#%02x%02x%02x" % color


class SheetPlot:
    """A static figure of trajectories on the Riemann surface, or of critical curves.

    Content is collected with the add_* methods, laid out by compose() and
    written by render().
    """

    def __init__(self,
                 size: Tuple[float, float] = (6.0, 6.0),
                 bgcolor=Colors.WHITE,
                 title: Optional[str] = None,
                 name: str = "sheet_plot"):
        """Initialize an empty plot.

        Args:
            size: Figure size (width, height) in inches
            bgcolor: Background color
            title: Optional title
            name: A descriptive name for this plot
        """
        self.name = name
        self.size = size
        self.bgcolor = bgcolor
        self.title = title
        self.trajectories: List[Trajectory] = []
        self.turning_points: List[Tuple[complex, int]] = []
        self.markers: List[Tuple[complex, str, str]] = []
        self.curves: List[Tuple[np.ndarray, np.ndarray, str, str]] = []
        self.axis_labels = ("Re x", "Im x")

        # Figure (set after compose())
        self._fig = None

    def add_trajectory(self, traj: Trajectory) -> 'SheetPlot':
        """Add a trajectory, drawn in the color of the sheet each sample lies on.

        Returns:
            self for method chaining
        """
        if len(traj) == 0:
            raise ValueError("Trajectory must have at least one sample")
        self.trajectories.append(traj)
        return self

    def add_turning_points(self, eps: EpsilonLike, theta_lo: float, theta_hi: float) -> 'SheetPlot':
        """Add every turning point with unwrapped angle in [theta_lo, theta_hi] as a filled dot.

        Returns:
            self for method chaining
        """
        for tp in turning_points_between(theta_lo, theta_hi, as_epsilon(eps)):
            self.turning_points.append((tp.location.x, tp.location.sheet))
        return self

    def add_marker(self, point: complex, label: str, color=Colors.BLACK) -> 'SheetPlot':
        """Add a labelled point, e.g. a critical point on the negative-imaginary axis.

        Returns:
            self for method chaining
        """
        self.markers.append((complex(point), label, _hex(color)))
        return self

    def add_curve(self, xs: Sequence[float], ys: Sequence[float], label: str = "",
                  color=Colors.DARK_BLUE) -> 'SheetPlot':
        """Add an (epsilon, value) polyline for sweep plots.

        Returns:
            self for method chaining
        """
        if len(xs) != len(ys):
            raise ValueError("Curve needs as many x values as y values")
        self.curves.append((np.asarray(xs, dtype=float), np.asarray(ys, dtype=float), label, _hex(color)))
        self.axis_labels = ("epsilon", "|y|")
        return self

    def compose(self) -> 'SheetPlot':
        """Lay out everything added so far.

        Returns:
            self for method chaining
        """
        if not (self.trajectories or self.curves or self.markers):
            raise ValueError("SheetPlot must have at least one trajectory, curve or marker")

        fig, ax = plt.subplots(figsize=self.size)
        fig.patch.set_facecolor(_hex(self.bgcolor))

        for traj in self.trajectories:
            sheets = traj.sheets
            breaks = np.flatnonzero(np.diff(sheets)) + 1
            start = 0
            for stop in list(breaks) + [len(traj)]:
                # Overlap one sample so consecutive pieces join
                piece = traj.x[start:min(stop + 1, len(traj))]
                ax.plot(piece.real, piece.imag, color=sheet_color(int(sheets[start])), lw=1.2)
                start = stop

        if self.trajectories:
            # Branch cut along the positive-imaginary axis
            top = max(float(np.max(np.abs(t.x))) for t in self.trajectories)
            ax.plot([0.0, 0.0], [0.0, 1.1 * top], color=_hex(Colors.BLACK_A), lw=2.0)
            ax.set_aspect("equal", adjustable="datalim")

        for point, sheet in self.turning_points:
            ax.plot([point.real], [point.imag], "o", color=sheet_color(sheet), ms=6)

        for point, label, color in self.markers:
            ax.plot([point.real], [point.imag], "s", color=color, ms=5)
            ax.annotate(label, (point.real, point.imag), textcoords="offset points", xytext=(6, 4))

        for xs, ys, label, color in self.curves:
            ax.plot(xs, ys, color=color, lw=1.5, marker="o", ms=3, label=label or None)
        if any(label for _, _, label, _ in self.curves):
            ax.legend()

        ax.set_xlabel(self.axis_labels[0])
        ax.set_ylabel(self.axis_labels[1])
        ax.grid(True, alpha=0.3)
        if self.title:
            ax.set_title(self.title)
        fig.tight_layout()
        self._fig = fig
        return self

    def render(self, filename: Union[str, Path]) -> None:
        """Write the composed figure as SVG; identical input gives byte-identical files.

        Args:
            filename: Output filename
        """
        if self._ensure_ready():
            try:
                with plt.rc_context({"svg.hashsalt": _SVG_SALT}):
                    self._fig.savefig(filename, format="svg", metadata={"Date": None})
            except OSError as exc:
                raise OutputError(f"cannot write plot to {filename}: {exc}")
            finally:
                plt.close(self._fig)
                self._fig = None

    def _ensure_ready(self) -> bool:
        """Check if the plot is ready for output.

        Returns:
            True if ready, otherwise raises an exception
        """
        if self._fig is None:
            raise RuntimeError("SheetPlot must be prepared with compose() first.")
        return True


def emit_svg_plot(source: Union[Trajectory, Sequence[Trajectory], Dict[str, Any]], path: Union[str, Path],
                  title: Optional[str] = None, markers: Sequence[Tuple[complex, str]] = ()) -> None:
    """Render trajectories, a sweep summary or a gap table summary to SVG.

    Args:
        source: One trajectory, several, or a dict from sweep_to_dict / gap_table_to_dict
        path: Output filename
        title: Optional title
        markers: Extra labelled points
    """
    plot = SheetPlot(title=title)
    if isinstance(source, dict):
        if source.get("type") == "gap":
            rows = [e for e in source["entries"] if e["y"] is not None]
            plot.add_curve([e["n"] for e in rows], [e["y"] for e in rows], label=f"s_n at eps={source['epsilon']:.6g}")
            plot.axis_labels = ("n", "|s_n|")
        else:
            by_kind: Dict[str, List[Tuple[float, float]]] = {}
            for s in source["samples"]:
                by_kind.setdefault(s["kind"], []).append((s["epsilon"], s["value_y"]))
            for kind, points in sorted(by_kind.items()):
                plot.add_curve([p[0] for p in points], [p[1] for p in points], label=kind)
    else:
        trajectories = [source] if isinstance(source, Trajectory) else list(source)
        for traj in trajectories:
            plot.add_trajectory(traj)
        if trajectories:
            eps = trajectories[0].epsilon
            if as_epsilon(eps).is_single_sheeted:
                plot.add_turning_points(eps, -1.5 * np.pi + 1e-12, 0.5 * np.pi)
            else:
                lo = min(float(t.theta.min()) for t in trajectories)
                hi = max(float(t.theta.max()) for t in trajectories)
                plot.add_turning_points(eps, lo - 0.5, hi + 0.5)
    for point, label in markers:
        plot.add_marker(point, label)
    plot.compose().render(path)
