from typing import Callable


def bisect_predicate(pred: Callable[[float], bool], lo: float, hi: float,
                     xtol: float = 1e-6, maxiter: int = 200) -> float:
    """Locate where a boolean predicate flips between two points.

    The caller guarantees pred(lo) != pred(hi); the midpoint of the final
    interval is returned.

    Args:
        pred: Predicate with a single transition inside [lo, hi]
        lo: One end of the bracket
        hi: Other end of the bracket
        xtol: Width of the final interval
        maxiter: Maximum number of iterations

    Returns:
        The transition point
    """
    value_lo = pred(lo)
    for _ in range(maxiter):
        if abs(hi - lo) < xtol:
            break
        mid = (lo + hi) / 2
        if pred(mid) == value_lo:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def get_info(traj) -> None:
    """Print a summary of a trajectory: span, sheets, energy error and events.

    Args:
        traj: A Trajectory
    """
    n = 26
    print((n+3)*"*")
    print("* " + f'epsilon {traj.epsilon:.10g}')
    print("* " + f'launch x {traj.launch.x:.10g}')
    print("* " + f'time span {traj.t[0]:.10g} .. {traj.t[-1]:.10g}')
    print("* " + f'samples {len(traj)}')
    print("* " + f'sheets {sorted(set(int(k) for k in traj.sheets))}')
    print("* " + f'max energy error {float(traj.energy_err.max()):.3g}')

    print((n+3)*"*")
    for event in traj.events:
        details = ", ".join(f"{k}={v}" for k, v in event.payload().items())
        print("* " + " "*4 + f'{event.kind} at t={event.time:.10g} {details}')

    print((n+3)*"*")
    print("\n")
