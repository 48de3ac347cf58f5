"""Trajectory CSV files and JSON summaries.

Trajectory CSV layout::

    t,re_x,im_x,r,theta,sheet,re_p,im_p,energy_err
    <one row per sample, 12 significant digits>
    # event,<kind>,<t>,<field=value;field=value>
    # epsilon,<eps>
"""
import csv
import json
import math
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np

from .errors import OutputError
from .events import Event
from .integrator import Trajectory
from .surface import PhaseState, sheet_index

CSV_COLUMNS = ("t", "re_x", "im_x", "r", "theta", "sheet", "re_p", "im_p", "energy_err")
PathLike = Union[str, Path]


def format_number(value: Union[int, float, str]) -> str:
    """Numbers as written to result files: integers plainly, floats to 12 significant digits."""
    if isinstance(value, (bool, str)):
        return str(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "%.12g" % value


def _payload_text(event: Event) -> str:
    return ";".join(f"{k}={format_number(v)}" for k, v in event.payload().items())


def write_trajectory_csv(traj: Trajectory, path: PathLike) -> None:
    """Write samples and events of a trajectory.

    Args:
        traj: The trajectory to write
        path: Destination file

    Raises:
        OutputError: the file could not be written
    """
    path = Path(path)
    try:
        with path.open("w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for t, x, p, theta, err in zip(traj.t, traj.x, traj.p, traj.theta, traj.energy_err):
                w.writerow([format_number(float(t)), format_number(x.real), format_number(x.imag),
                            format_number(abs(x)), format_number(float(theta)), str(sheet_index(float(theta))),
                            format_number(p.real), format_number(p.imag), format_number(float(err))])
            for event in traj.events:
                f.write(f"# event,{event.kind},{format_number(event.time)},{_payload_text(event)}\n")
            f.write(f"# epsilon,{format_number(float(traj.epsilon))}\n")
    except OSError as exc:
        raise OutputError(f"cannot write trajectory to {path}: {exc}")


def read_trajectory_csv(path: PathLike) -> Trajectory:
    """Read a trajectory written by write_trajectory_csv; events come back without states.

    Raises:
        OutputError: the file is missing or malformed
    """
    path = Path(path)
    rows: List[List[str]] = []
    events: List[Event] = []
    epsilon = None
    try:
        with path.open("r", encoding="utf-8") as f:
            lines = f.read().splitlines()
    except OSError as exc:
        raise OutputError(f"cannot read trajectory from {path}: {exc}")

    if not lines or tuple(lines[0].split(",")) != CSV_COLUMNS:
        raise OutputError(f"{path} does not start with the trajectory header")
    try:
        for line in lines[1:]:
            if line.startswith("# event,"):
                _, kind, time, payload = line[2:].split(",", 3)
                fields = dict(item.split("=", 1) for item in payload.split(";") if item)
                events.append(Event.from_payload(kind, float(time), fields))
            elif line.startswith("# epsilon,"):
                epsilon = float(line.split(",", 1)[1])
            elif line.strip():
                rows.append(next(csv.reader([line])))
    except ValueError as exc:
        raise OutputError(f"malformed line in {path}: {exc}")
    if epsilon is None:
        raise OutputError(f"{path} has no epsilon line")
    if not rows:
        raise OutputError(f"{path} holds no samples")

    data = np.array([[float(v) for v in row] for row in rows], dtype=float)
    t = data[:, 0]
    x = data[:, 1] + 1j * data[:, 2]
    theta = data[:, 4]
    p = data[:, 6] + 1j * data[:, 7]
    launch = PhaseState.from_complex(complex(x[0]), float(theta[0]), complex(p[0]), float(t[0]))
    return Trajectory(epsilon=epsilon, launch=launch, t=t, x=x, p=p, theta=theta,
                      energy_err=data[:, 8], events=events)


def _clean(value: Any) -> Any:
    """JSON-safe copy: tuples become lists, non-finite floats become None."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (np.floating, float)):
        return float(value) if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    return value


def write_json(data: Dict[str, Any], path: PathLike) -> None:
    """Write a summary as sorted, indented JSON so repeated runs give identical files."""
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8") as f:
            json.dump(_clean(data), f, indent=2, sort_keys=True)
            f.write("\n")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}")


def read_json(path: PathLike) -> Dict[str, Any]:
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise OutputError(f"cannot read {path}: {exc}")


def sweep_to_dict(result) -> Dict[str, Any]:
    """JSON form of a SweepResult."""
    return {
        "type": "sweep",
        "samples": [{"epsilon": s.epsilon, "value_y": s.value_y, "kind": s.kind, "tolerance": s.tolerance, "n": s.n}
                    for s in result.samples],
        "failures": [{"epsilon": eps, "reason": reason} for eps, reason in result.failures],
    }


def gap_table_to_dict(table) -> Dict[str, Any]:
    """JSON form of a GapTable, with the bottom-to-top order of the in-gap crossings."""
    return {
        "type": "gap",
        "epsilon": table.epsilon,
        "edge": table.edge,
        "edge_failure": table.edge_failure,
        "entries": [{"n": e.n, "y": e.y, "reason": e.reason, "verdict": e.verdict} for e in table.entries],
        "in_gap_order": table.in_gap_order(),
    }
