"""Events recorded while a trajectory is integrated.

Each kind is a small frozen dataclass. The payload fields are the ones written
to the ``# event`` lines of a trajectory CSV; ``state`` is attached by the
integrator and left empty when an event is read back from a file.
"""
from dataclasses import dataclass, field, fields
from typing import ClassVar, Dict, Literal, Optional, Type, Union

from .surface import PhaseState

Direction = Literal["up", "down"]
PayloadValue = Union[int, float, str]


@dataclass(frozen=True)
class Event:
    time: float
    state: Optional[PhaseState] = field(default=None, kw_only=True, compare=False, repr=False)

    # Name used in files and logs
    kind: ClassVar[str] = "event"

    # A terminal event ends the run
    terminal: ClassVar[bool] = False

    def payload(self) -> Dict[str, PayloadValue]:
        """Kind-specific fields, in declaration order."""
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name not in ("time", "state")}

    @classmethod
    def from_payload(cls, kind: str, time: float, payload: Dict[str, str]) -> 'Event':
        """Rebuild an event from its kind and string-valued payload.

        Args:
            kind: One of the registered kind names
            time: Event time
            payload: Field name to text value

        Returns:
            An event without an attached state
        """
        if kind not in EVENT_KINDS:
            raise ValueError(f"Unknown event kind: {kind}")
        event_cls = EVENT_KINDS[kind]
        values = {}
        for f in fields(event_cls):
            if f.name in ("time", "state"):
                continue
            if f.name not in payload:
                raise ValueError(f"Event {kind} is missing field '{f.name}'")
            raw = payload[f.name]
            if f.type is int:
                values[f.name] = int(raw)
            elif f.type is float:
                values[f.name] = float(raw)
            else:
                values[f.name] = raw
        return event_cls(float(time), **values)


@dataclass(frozen=True)
class BranchCutCrossing(Event):
    """Passage through the cut on the positive-imaginary axis onto a neighbouring sheet."""

    direction: Direction
    sheet_from: int
    sheet_to: int

    kind: ClassVar[str] = "branch_cut"

    def __post_init__(self):
        if abs(self.sheet_to - self.sheet_from) != 1:
            raise ValueError(f"Cut crossings change the sheet by one, got {self.sheet_from} -> {self.sheet_to}")


@dataclass(frozen=True)
class CutRayCrossing(Event):
    """Passage through the positive-imaginary ray of a single-sheeted surface."""

    direction: Direction

    kind: ClassVar[str] = "cut_ray"


@dataclass(frozen=True)
class NegativeImagAxisCrossing(Event):
    """Passage through the point -iy of a sheet; ``y`` is the positive magnitude."""

    sheet: int
    y: float

    kind: ClassVar[str] = "neg_imag_axis"


@dataclass(frozen=True)
class Closure(Event):
    period: float

    kind: ClassVar[str] = "closure"
    terminal: ClassVar[bool] = True


@dataclass(frozen=True)
class TurningTermination(Event):
    """The particle came to rest at the turning point of pair ``pair_n``."""

    pair_n: int
    side: str

    kind: ClassVar[str] = "turning"
    terminal: ClassVar[bool] = True


@dataclass(frozen=True)
class Escape(Event):
    """The radius passed the escape radius; ``theta`` is the unwrapped angle there."""

    theta: float

    kind: ClassVar[str] = "escape"
    terminal: ClassVar[bool] = True


@dataclass(frozen=True)
class EnergyFault(Event):
    """Relative energy error ``error`` left the allowed band, or the step size underflowed."""

    error: float

    kind: ClassVar[str] = "energy_fault"
    terminal: ClassVar[bool] = True


@dataclass(frozen=True)
class BudgetExhausted(Event):
    """The run hit ``max_time`` or ``max_steps`` before any other terminal event."""

    reason: str

    kind: ClassVar[str] = "budget"
    terminal: ClassVar[bool] = True


EVENT_KINDS: Dict[str, Type[Event]] = {
    cls.kind: cls
    for cls in (
        BranchCutCrossing,
        CutRayCrossing,
        NegativeImagAxisCrossing,
        Closure,
        TurningTermination,
        Escape,
        EnergyFault,
        BudgetExhausted,
    )
}
