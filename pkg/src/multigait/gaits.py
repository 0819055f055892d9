"""Reference foot-contact schedules and gait-phase bookkeeping.

Each gait is a periodic stance schedule over a normalized phase in [0, 1):
trot alternates diagonal pairs, pace alternates lateral pairs, bound
alternates the front and rear pair with flight phases in between, and
gallop staggers single footfalls.  Fall recovery is aperiodic and has no
schedule.  Interval boundaries are configurable; the defaults below give
the qualitative patterns with conventional duty factors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

Interval = tuple[float, float]


class GaitType(Enum):
    RECOVERY = "recovery"
    TROT = "trot"
    PACE = "pace"
    BOUND = "bound"
    GALLOP = "gallop"


LOCOMOTION_GAITS = (GaitType.TROT, GaitType.PACE, GaitType.BOUND, GaitType.GALLOP)

# Expert/weight ordering used everywhere a 5-vector of skills appears.
SKILL_ORDER = (GaitType.RECOVERY, GaitType.TROT, GaitType.PACE, GaitType.BOUND, GaitType.GALLOP)


@dataclass(frozen=True)
class ContactPattern:
    """Per-foot stance intervals over one gait cycle, order (FR, FL, RR, RL)."""

    intervals: tuple[tuple[Interval, ...], ...]

    def __post_init__(self):
        if len(self.intervals) != 4:
            raise ValueError("contact pattern needs stance intervals for 4 feet")
        for foot, spans in enumerate(self.intervals):
            last_end = -1.0
            for start, end in sorted(spans):
                if not (0.0 <= start < end <= 1.0):
                    raise ValueError(f"foot {foot} interval ({start}, {end}) outside [0, 1)")
                if start < last_end:
                    raise ValueError(f"foot {foot} has overlapping stance intervals")
                last_end = end

    def stance(self, phase: float) -> tuple[bool, bool, bool, bool]:
        p = phase % 1.0
        return tuple(any(start <= p < end for start, end in spans) for spans in self.intervals)

    def duty_factors(self) -> tuple[float, float, float, float]:
        return tuple(sum(end - start for start, end in spans) for spans in self.intervals)


DEFAULT_PATTERNS: dict[GaitType, ContactPattern] = {
    GaitType.TROT: ContactPattern((
        ((0.0, 0.5),),   # FR
        ((0.5, 1.0),),   # FL
        ((0.5, 1.0),),   # RR
        ((0.0, 0.5),),   # RL
    )),
    GaitType.PACE: ContactPattern((
        ((0.0, 0.5),),
        ((0.5, 1.0),),
        ((0.0, 0.5),),
        ((0.5, 1.0),),
    )),
    GaitType.BOUND: ContactPattern((
        ((0.0, 0.4),),
        ((0.0, 0.4),),
        ((0.5, 0.9),),
        ((0.5, 0.9),),
    )),
    GaitType.GALLOP: ContactPattern((
        ((0.0, 0.25),),
        ((0.15, 0.4),),
        ((0.5, 0.75),),
        ((0.65, 0.9),),
    )),
}

# Open-loop phase clock rates, Hz.  Recovery has no clock.
DEFAULT_FREQUENCIES: dict[GaitType, float] = {
    GaitType.TROT: 2.0,
    GaitType.PACE: 2.0,
    GaitType.BOUND: 2.5,
    GaitType.GALLOP: 3.0,
}


@dataclass
class GaitTable:
    """Configured schedules + clock rates for all locomotion gaits."""

    patterns: dict[GaitType, ContactPattern] = field(default_factory=lambda: dict(DEFAULT_PATTERNS))
    frequencies: dict[GaitType, float] = field(default_factory=lambda: dict(DEFAULT_FREQUENCIES))

    def pattern(self, gait: GaitType) -> ContactPattern:
        if gait == GaitType.RECOVERY:
            raise ValueError("fall recovery has no reference contact pattern")
        return self.patterns[gait]

    def frequency(self, gait: GaitType) -> float:
        if gait == GaitType.RECOVERY:
            return 0.0
        return self.frequencies[gait]


def reference_contacts(gait: GaitType, phase: float, table: GaitTable | None = None) -> tuple[bool, bool, bool, bool]:
    """Desired stance flags (FR, FL, RR, RL) for a gait at a phase."""
    table = table or _DEFAULT_TABLE
    return table.pattern(gait).stance(phase)


def advance_phase(phase: float, frequency: float, dt: float) -> float:
    return (phase + frequency * dt) % 1.0


def phase_encoding(phase: float) -> tuple[float, float]:
    """(sin 2*pi*phase, cos 2*pi*phase) as fed to the policy observation."""
    angle = 2.0 * math.pi * phase
    return math.sin(angle), math.cos(angle)


_DEFAULT_TABLE = GaitTable()
