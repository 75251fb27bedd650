"""Command-level DRAM bank model with disturbance accumulation.

The bank replays timestamped commands against a materialized device.
Disturbance bookkeeping happens at precharge time: closing a row that was
open for ``t_on`` charges every victim within the blast radius with the
profile weight for that open time. Three per-row accumulators are kept:

* ``act_count``       activation count since the row's last refresh
* ``disturbance_acc`` weighted sum over all activations (weight 1 at the
                      minimum open time, larger for longer opens)
* ``press_acc``       weighted sum over activations whose open time
                      exceeded the minimum (the open-time-driven part)

A cell flips once its class-specific accumulator reaches the row's
threshold and its stored bit opposes its flip direction. Refreshing a row
zeroes its accumulators but never repairs an already-flipped cell.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .profile import (
    CLASS_BOTH,
    CLASS_HAMMER_ONLY,
    CLASS_PRESS_ONLY,
    CLASS_RETENTION,
    DIR_ONE_TO_ZERO,
    DeviceProfile,
    Materialization,
)
from .timing import (
    Command,
    CommandKind,
    CommandSequenceError,
    TimingError,
    TimingParams,
)

# Open times within this many ns of t_ras_min count as plain hammering.
_PRESS_EPS = 1e-6


@dataclass(frozen=True)
class DataPattern:
    """Initialization pattern: victims get one repeating byte, rows in the
    aggressor set get another."""

    name: str
    victim_byte: int = 0x55
    aggressor_byte: int = 0xAA
    aggressor_rows: frozenset[int] = frozenset()

    def row_bits(self, row: int, cells: int) -> np.ndarray:
        byte = self.aggressor_byte if row in self.aggressor_rows else self.victim_byte
        j = np.arange(cells)
        return ((byte >> (7 - (j % 8))) & 1).astype(np.uint8)

    def with_aggressors(self, rows: Iterable[int]) -> "DataPattern":
        return DataPattern(self.name, self.victim_byte, self.aggressor_byte,
                           frozenset(rows))


CHECKERBOARD = DataPattern("checkerboard", 0x55, 0xAA)
INVERSE_CHECKERBOARD = DataPattern("inverse", 0xAA, 0x55)
SOLID_ONES = DataPattern("solid", 0xFF, 0xFF)


@dataclass(frozen=True)
class FlipEvent:
    row: int
    cell: int
    direction: str      # "0->1" or "1->0"
    mechanism: str      # "hammer", "press", or "retention"
    time_ns: float


@dataclass(frozen=True)
class TimingViolation:
    message: str
    time_ns: float


@dataclass(frozen=True)
class RowFlipReport:
    row: int
    count: int
    cells: tuple[int, ...]
    directions: tuple[str, ...]


class Bank:
    """Single DRAM bank: rows x cells, one open row at most, auto-refresh
    cursor over ``ref_groups`` groups."""

    def __init__(
        self,
        profile: DeviceProfile,
        materialization: Materialization,
        timing: Optional[TimingParams] = None,
        pattern: DataPattern = CHECKERBOARD,
        temperature: Optional[int] = None,
        sidedness: str = "single",
        blast_radius: int = 1,
    ) -> None:
        if blast_radius < 1:
            raise ValueError("blast_radius must be >= 1")
        self.profile = profile
        self.mat = materialization
        self.timing = timing or TimingParams()
        self.temperature = temperature
        self.sidedness = sidedness
        self.blast_radius = blast_radius
        self.rows = materialization.rows
        self.cells = materialization.cells_per_row

        # Effective per-cell threshold: base * row factor * cell multiplier.
        self._thr = (profile.base_threshold
                     * materialization.row_factor[:, None]
                     * materialization.threshold_mult)
        self._vuln = materialization.vuln_class
        self._dir = materialization.flip_direction
        self._retention = materialization.retention_ns

        self.pattern = pattern
        self.bits = np.empty((self.rows, self.cells), dtype=np.uint8)
        self.flipped = np.zeros((self.rows, self.cells), dtype=bool)
        self.act_count = np.zeros(self.rows)
        self.disturbance_acc = np.zeros(self.rows)
        self.press_acc = np.zeros(self.rows)
        self.last_refresh = np.zeros(self.rows)
        self.open_row: Optional[int] = None
        self.open_since = 0.0
        self.now = 0.0
        self.refresh_cursor = 0
        self.flip_log: list[FlipEvent] = []
        self.reset(pattern)

    # -- initialization ----------------------------------------------------

    def reset(self, pattern: Optional[DataPattern] = None) -> None:
        """Reinitialize data, accumulators, clock and flip log."""
        if pattern is not None:
            self.pattern = pattern
        for row in range(self.rows):
            self.bits[row] = self.pattern.row_bits(row, self.cells)
        self.flipped[:] = False
        self.act_count[:] = 0.0
        self.disturbance_acc[:] = 0.0
        self.press_acc[:] = 0.0
        self.last_refresh[:] = 0.0
        self.open_row = None
        self.now = 0.0
        self.refresh_cursor = 0
        self.flip_log = []

    def reset_rows(self, rows: Iterable[int]) -> None:
        """Cheap partial reset used by the characterizer between probes:
        restores data and accumulators for the given rows only."""
        for row in rows:
            self.bits[row] = self.pattern.row_bits(row, self.cells)
            self.flipped[row] = False
            self.act_count[row] = 0.0
            self.disturbance_acc[row] = 0.0
            self.press_acc[row] = 0.0
            self.last_refresh[row] = 0.0
        self.flip_log = [e for e in self.flip_log if e.row not in set(rows)]

    # -- helpers -----------------------------------------------------------

    def victims_of(self, row: int) -> list[int]:
        return [v for d in range(1, self.blast_radius + 1)
                for v in (row - d, row + d) if 0 <= v < self.rows]

    def _rows_in_group(self, group: int) -> range:
        per_group = -(-self.rows // self.timing.ref_groups)  # ceil
        start = group * per_group
        return range(start, min(start + per_group, self.rows))

    def refresh_row(self, row: int, t: float) -> None:
        """Refresh semantics shared by auto, neighbor and mitigation-issued
        refreshes: accumulators and retention clock reset, flips persist."""
        self.act_count[row] = 0.0
        self.disturbance_acc[row] = 0.0
        self.press_acc[row] = 0.0
        self.last_refresh[row] = t

    # -- command application ----------------------------------------------

    def apply(self, cmd: Command, strict_jedec: bool = False) -> list:
        """Apply one command; returns the list of events it produced
        (flips and timing-violation warnings)."""
        if cmd.timestamp < self.now:
            raise CommandSequenceError(
                f"timestamp regression: {cmd.timestamp} < {self.now}")
        kind = cmd.kind
        if kind is CommandKind.ACTIVATE:
            if self.open_row is not None:
                raise CommandSequenceError(
                    f"ACT row {cmd.row} while row {self.open_row} is open")
            if not 0 <= cmd.row < self.rows:
                raise CommandSequenceError(f"row {cmd.row} out of range")
            self.open_row = cmd.row
            self.open_since = cmd.timestamp
            self.now = cmd.timestamp
            return []
        if kind in (CommandKind.READ, CommandKind.WRITE):
            if self.open_row != cmd.row:
                raise CommandSequenceError(
                    f"{kind.value} row {cmd.row} but open row is {self.open_row}")
            self.now = cmd.timestamp
            return []
        if kind is CommandKind.PRECHARGE:
            row, t_on, events = self.close_open_row(cmd.timestamp, strict_jedec)
            events.extend(self.evaluate_flips([row], cmd.timestamp))
            return events
        if kind is CommandKind.AUTO_REFRESH:
            if self.open_row is not None:
                raise CommandSequenceError("REF with a row open")
            self.now = cmd.timestamp
            for row in self._rows_in_group(self.refresh_cursor):
                self.refresh_row(row, cmd.timestamp)
            self.refresh_cursor = (self.refresh_cursor + 1) % self.timing.ref_groups
            return []
        if kind is CommandKind.NEIGHBOR_REFRESH:
            if not 0 <= cmd.row < self.rows:
                raise CommandSequenceError(f"row {cmd.row} out of range")
            self.now = cmd.timestamp
            self.refresh_row(cmd.row, cmd.timestamp)
            return []
        raise CommandSequenceError(f"unhandled command kind {kind}")

    def close_open_row(self, t: float, strict_jedec: bool = False):
        """Close the open row, charging its victims; flip evaluation is
        separate so a mitigation can react to the same precharge first.

        Returns (closed_row, t_on, events)."""
        if self.open_row is None:
            raise CommandSequenceError("PRE with no open row")
        if t < self.now:
            raise CommandSequenceError(f"timestamp regression: {t} < {self.now}")
        row = self.open_row
        events: list = []
        t_on = t - self.open_since
        if t_on < self.timing.t_ras_min:
            t_on = self.timing.t_ras_min  # clamp short opens up to tRAS
        if t_on > self.timing.t_ron_max_jedec:
            msg = (f"row {row} open for {t_on:.0f} ns exceeds JEDEC maximum "
                   f"{self.timing.t_ron_max_jedec:.0f} ns")
            if strict_jedec:
                raise TimingError(msg)
            events.append(TimingViolation(msg, t))
        self.open_row = None
        self.now = t
        self.charge_victims(row, t_on)
        return row, t_on, events

    def charge_victims(self, row: int, t_on: float, count: int = 1) -> None:
        w = self.profile.weight(t_on, self.sidedness, self.temperature)
        is_press = t_on > self.timing.t_ras_min + _PRESS_EPS
        for victim in self.victims_of(row):
            self.act_count[victim] += count
            self.disturbance_acc[victim] += w * count
            if is_press:
                self.press_acc[victim] += w * count

    def evaluate_flips(self, around_rows: Sequence[int], t: float) -> list[FlipEvent]:
        """Check victims of the given rows for threshold crossings."""
        victims = sorted({v for r in around_rows for v in self.victims_of(r)})
        events: list[FlipEvent] = []
        for victim in victims:
            events.extend(self._flip_row(victim, t))
        return events

    def _flip_row(self, row: int, t: float) -> list[FlipEvent]:
        vuln = self._vuln[row]
        thr = self._thr[row]
        reached = np.zeros(self.cells, dtype=bool)
        act = self.act_count[row]
        if act > 0:
            reached |= (vuln == CLASS_HAMMER_ONLY) & (act >= thr)
        press = self.press_acc[row]
        if press > 0:
            reached |= (vuln == CLASS_PRESS_ONLY) & (press >= thr)
        dist = self.disturbance_acc[row]
        if dist > 0:
            reached |= (vuln == CLASS_BOTH) & (dist >= thr)
        if not reached.any():
            return []
        direction = self._dir[row]
        opposes = np.where(direction == DIR_ONE_TO_ZERO,
                           self.bits[row] == 1, self.bits[row] == 0)
        todo = reached & opposes & ~self.flipped[row]
        events: list[FlipEvent] = []
        for cell in np.nonzero(todo)[0]:
            cls = vuln[cell]
            if cls == CLASS_HAMMER_ONLY:
                mech = "hammer"
            elif cls == CLASS_PRESS_ONLY:
                mech = "press"
            else:
                mech = "hammer" if act >= thr[cell] else "press"
            dstr = "1->0" if direction[cell] == DIR_ONE_TO_ZERO else "0->1"
            self.bits[row, cell] ^= 1
            self.flipped[row, cell] = True
            ev = FlipEvent(int(row), int(cell), dstr, mech, t)
            events.append(ev)
            self.flip_log.append(ev)
        return events

    # -- bulk fast path ----------------------------------------------------

    def bulk_hammer(self, aggressors: Sequence[int], count: int, t_on: float,
                    start: float = 0.0, strict_jedec: bool = False) -> list:
        """Apply ``count`` activate/precharge cycles distributed round-robin
        over ``aggressors`` in one step.

        Equivalent to replaying the expanded trace for flip-set purposes:
        accumulators only grow between refreshes and flips are permanent, so
        evaluating once after the last precharge finds the same flipped
        cells (flip timestamps collapse to the end of the burst).
        """
        if count < 1:
            raise ValueError("count must be >= 1")
        t_on = max(t_on, self.timing.t_ras_min)
        events: list = []
        if t_on > self.timing.t_ron_max_jedec:
            msg = (f"bulk open time {t_on:.0f} ns exceeds JEDEC maximum "
                   f"{self.timing.t_ron_max_jedec:.0f} ns")
            if strict_jedec:
                raise TimingError(msg)
            events.append(TimingViolation(msg, start))
        per_row = count // len(aggressors)
        extras = count % len(aggressors)
        for i, row in enumerate(aggressors):
            n = per_row + (1 if i < extras else 0)
            if n:
                self.charge_victims(row, t_on, count=n)
        end = start + count * (t_on + self.timing.t_rc)
        self.now = max(self.now, end)
        events.extend(self.evaluate_flips(list(aggressors), end))
        return events


# ---------------------------------------------------------------------------
# Module-level operations mirroring the bank's contract


def apply_command(bank: Bank, cmd: Command, profile: Optional[DeviceProfile] = None,
                  strict_jedec: bool = False) -> list:
    if profile is not None and profile is not bank.profile:
        raise ValueError("command applied with a profile other than the bank's")
    return bank.apply(cmd, strict_jedec)


def auto_refresh(bank: Bank, t: Optional[float] = None) -> list:
    """Issue an auto-refresh at time ``t`` (default: current clock)."""
    t = bank.now if t is None else t
    if bank.open_row is not None:
        raise CommandSequenceError("auto_refresh requires no open row")
    for row in bank._rows_in_group(bank.refresh_cursor):
        bank.refresh_row(row, t)
    bank.refresh_cursor = (bank.refresh_cursor + 1) % bank.timing.ref_groups
    bank.now = t
    return []


def check_retention(bank: Bank, at: float) -> list[FlipEvent]:
    """Flip retention-tail cells whose time since last refresh exceeds
    their retention time."""
    vuln = bank._vuln
    elapsed = at - bank.last_refresh[:, None]
    expired = (vuln == CLASS_RETENTION) & (elapsed > bank._retention)
    direction = bank._dir
    opposes = np.where(direction == DIR_ONE_TO_ZERO, bank.bits == 1, bank.bits == 0)
    todo = expired & opposes & ~bank.flipped
    events: list[FlipEvent] = []
    for row, cell in zip(*np.nonzero(todo)):
        dstr = "1->0" if direction[row, cell] == DIR_ONE_TO_ZERO else "0->1"
        bank.bits[row, cell] ^= 1
        bank.flipped[row, cell] = True
        ev = FlipEvent(int(row), int(cell), dstr, "retention", at)
        events.append(ev)
        bank.flip_log.append(ev)
    return events


def snapshot_bitflips(bank: Bank, pattern: Optional[DataPattern] = None
                      ) -> list[RowFlipReport]:
    """Per-row report of cells that differ from the initialization pattern.
    Read-only; errors if the reference pattern does not match the one the
    bank was initialized with."""
    pattern = pattern or bank.pattern
    if pattern != bank.pattern:
        raise ValueError(
            f"unknown reference pattern {pattern.name!r}; bank was initialized "
            f"with {bank.pattern.name!r}")
    reports = []
    for row in range(bank.rows):
        expected = pattern.row_bits(row, bank.cells)
        diff = np.nonzero(bank.bits[row] != expected)[0]
        if diff.size == 0:
            reports.append(RowFlipReport(row, 0, (), ()))
            continue
        directions = tuple(
            "1->0" if expected[c] == 1 else "0->1" for c in diff)
        reports.append(RowFlipReport(row, int(diff.size),
                                     tuple(int(c) for c in diff), directions))
    return reports


def flip_report_csv(flips: Iterable[FlipEvent]) -> str:
    """Flip events in the interchange CSV schema."""
    lines = ["row,cell,direction,mechanism,time_ns"]
    for ev in flips:
        lines.append(f"{ev.row},{ev.cell},{ev.direction},{ev.mechanism},"
                     f"{ev.time_ns:.0f}")
    return "\n".join(lines) + "\n"
