"""DDR4-style timing parameters and the command vocabulary.

All durations are in nanoseconds. Timestamps are nanoseconds since
simulation start.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Optional

NS = 1.0
US = 1_000.0
MS = 1_000_000.0


class SimulationError(Exception):
    """Base class for simulator errors."""


class TimingError(SimulationError):
    """A command violates a timing constraint under strict checking."""


class CommandSequenceError(SimulationError):
    """A command is illegal in the current bank state."""


@dataclass(frozen=True)
class TimingParams:
    """Bank timing constants.

    t_rc is the closed-row gap between a precharge and the next activate.
    t_read is the extra dwell per additional same-row cache-block read.
    """

    t_ras_min: float = 36 * NS
    t_refi: float = 7.8 * US
    t_ron_max_jedec: float = 70.2 * US
    t_refw: float = 64 * MS
    ref_groups: int = 8192
    t_rc: float = 15 * NS
    t_read: float = 50 * NS

    def __post_init__(self) -> None:
        if self.t_ras_min <= 0:
            raise ValueError("t_ras_min must be positive")
        if self.t_refi <= 0 or self.t_refw <= 0:
            raise ValueError("refresh timings must be positive")
        if self.t_ron_max_jedec < self.t_ras_min:
            raise ValueError("t_ron_max_jedec must be >= t_ras_min")
        if self.ref_groups < 1:
            raise ValueError("ref_groups must be >= 1")
        if self.t_rc < 0 or self.t_read <= 0:
            raise ValueError("t_rc must be >= 0 and t_read > 0")
        # All rows must be coverable within the refresh window when REF is
        # issued every t_refi (within rounding of the group count).
        if abs(self.t_refw - self.ref_groups * self.t_refi) > 0.02 * self.t_refw:
            raise ValueError(
                "t_refw, ref_groups and t_refi are inconsistent: "
                f"{self.ref_groups} groups x {self.t_refi} ns != {self.t_refw} ns"
            )


class CommandKind(enum.Enum):
    ACTIVATE = "ACT"
    PRECHARGE = "PRE"
    READ = "RD"
    WRITE = "WR"
    AUTO_REFRESH = "REF"
    NEIGHBOR_REFRESH = "NREF"


_ROW_ADDRESSED = {
    CommandKind.ACTIVATE,
    CommandKind.READ,
    CommandKind.WRITE,
    CommandKind.NEIGHBOR_REFRESH,
}


@dataclass(frozen=True)
class Command:
    kind: CommandKind
    timestamp: float
    row: Optional[int] = None

    def __post_init__(self) -> None:
        if self.timestamp < 0:
            raise ValueError("timestamp must be non-negative")
        if self.kind in _ROW_ADDRESSED and self.row is None:
            raise ValueError(f"{self.kind.value} requires a row")


def activate(row: int, t: float) -> Command:
    return Command(CommandKind.ACTIVATE, t, row)


def precharge(t: float) -> Command:
    return Command(CommandKind.PRECHARGE, t)


def read(row: int, t: float) -> Command:
    return Command(CommandKind.READ, t, row)


def auto_refresh(t: float) -> Command:
    return Command(CommandKind.AUTO_REFRESH, t)


def neighbor_refresh(row: int, t: float) -> Command:
    return Command(CommandKind.NEIGHBOR_REFRESH, t, row)


def format_trace(commands: Iterable[Command]) -> str:
    """Render a trace in the on-disk format: one command per line,
    ``<timestamp_ns> <KIND> [row]``."""
    lines = []
    for cmd in commands:
        ts = int(round(cmd.timestamp))
        if cmd.row is not None:
            lines.append(f"{ts} {cmd.kind.value} {cmd.row}")
        else:
            lines.append(f"{ts} {cmd.kind.value}")
    return "\n".join(lines) + ("\n" if lines else "")


def parse_trace(text: str) -> list[Command]:
    """Parse the on-disk trace format. Raises ValueError on malformed
    lines or non-monotonic timestamps."""
    kinds = {k.value: k for k in CommandKind}
    commands: list[Command] = []
    last_ts = -1.0
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise ValueError(f"line {lineno}: expected '<ts> <KIND> [row]', got {line!r}")
        try:
            ts = float(parts[0])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad timestamp {parts[0]!r}") from exc
        if parts[1] not in kinds:
            raise ValueError(f"line {lineno}: unknown command kind {parts[1]!r}")
        kind = kinds[parts[1]]
        row = int(parts[2]) if len(parts) == 3 else None
        if ts < last_ts:
            raise ValueError(f"line {lineno}: timestamp regression ({ts} < {last_ts})")
        last_ts = ts
        commands.append(Command(kind, ts, row))
    return commands


def write_trace(path, commands: Iterable[Command]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_trace(commands))


def read_trace(path) -> list[Command]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_trace(fh.read())
