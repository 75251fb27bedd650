"""Trace replay: wires a command trace to a bank, an optional mitigation,
an optional row-open-time cap, and a periodic auto-refresh schedule.

Controller conveniences applied during replay (matching how a real
controller would issue commands):

* an implied precharge is inserted before an activate or auto-refresh that
  arrives while a row is open, and its open-time effect is still charged;
* with a cap, a row open longer than ``t_on_cap`` is force-precharged at
  the cap boundary and re-activated if a later command still needs it (the
  re-activation counts as a real activation, disturbance included);
* mitigation refreshes issued in reaction to a precharge land before that
  precharge's flip evaluation (same-instant refresh takes precedence).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .bank import Bank, FlipEvent, TimingViolation
from .mitigations import MitigationBase
from .timing import Command, CommandKind


@dataclass
class ReplayResult:
    flips: list[FlipEvent] = field(default_factory=list)
    violations: list[TimingViolation] = field(default_factory=list)
    commands_applied: int = 0
    mitigation_refreshes: int = 0
    forced_precharges: int = 0
    auto_refreshes: int = 0
    end_time: float = 0.0

    @property
    def flipped_rows(self) -> set[int]:
        return {ev.row for ev in self.flips}


class Replayer:
    def __init__(self, bank: Bank, mitigation: Optional[MitigationBase] = None,
                 t_on_cap: Optional[float] = None,
                 refresh_interval: Optional[float] = None,
                 strict_jedec: bool = False) -> None:
        if t_on_cap is not None and t_on_cap < bank.timing.t_ras_min:
            raise ValueError("t_on_cap below t_ras_min")
        self.bank = bank
        self.mitigation = mitigation
        self.t_on_cap = t_on_cap
        self.refresh_interval = refresh_interval
        self.strict_jedec = strict_jedec
        self.result = ReplayResult()
        self._next_ref = refresh_interval if refresh_interval else None

    # -- internals ---------------------------------------------------------

    def _apply_mitigation_refreshes(self, rows: Sequence[int], t: float) -> None:
        for row in rows:
            if 0 <= row < self.bank.rows:
                self.bank.refresh_row(row, t)
                self.result.mitigation_refreshes += 1

    def _precharge(self, t: float) -> None:
        bank = self.bank
        row, t_on, events = bank.close_open_row(t, self.strict_jedec)
        if self.mitigation is not None:
            refreshes = self.mitigation.on_precharge(row, t_on, t)
            self._apply_mitigation_refreshes(refreshes, t)
        events.extend(bank.evaluate_flips([row], t))
        self._record(events)

    def _activate(self, row: int, t: float) -> None:
        bank = self.bank
        if bank.open_row is not None:
            self._precharge(t)  # implied close
        bank.apply(Command(CommandKind.ACTIVATE, t, row), self.strict_jedec)
        if self.mitigation is not None:
            refreshes = self.mitigation.on_activate(row, t)
            self._apply_mitigation_refreshes(refreshes, t)

    def _auto_refresh(self, t: float) -> None:
        bank = self.bank
        if bank.open_row is not None:
            self._precharge(t)
        bank.apply(Command(CommandKind.AUTO_REFRESH, t), self.strict_jedec)
        self.result.auto_refreshes += 1
        if self.mitigation is not None:
            refreshes = self.mitigation.on_auto_refresh(t)
            self._apply_mitigation_refreshes(refreshes, t)

    def _enforce_cap(self, upto: float) -> None:
        """Force-close an open row whose dwell would exceed the cap before
        time ``upto``."""
        bank = self.bank
        if self.t_on_cap is None or bank.open_row is None:
            return
        deadline = bank.open_since + self.t_on_cap
        if upto > deadline:
            self.result.forced_precharges += 1
            # In-flight reads may already have advanced the clock past the
            # cap boundary; never move time backwards.
            self._precharge(max(deadline, bank.now))

    def _run_schedule(self, upto: float) -> None:
        """Issue pending auto-refreshes and cap closures up to ``upto``."""
        while self._next_ref is not None and self._next_ref <= upto:
            t_ref = self._next_ref
            self._enforce_cap(t_ref)
            self._auto_refresh(t_ref)
            self._next_ref = t_ref + self.refresh_interval
        self._enforce_cap(upto)

    def _record(self, events: Sequence) -> None:
        for ev in events:
            if isinstance(ev, FlipEvent):
                self.result.flips.append(ev)
            elif isinstance(ev, TimingViolation):
                self.result.violations.append(ev)

    # -- public ------------------------------------------------------------

    def feed(self, cmd: Command) -> None:
        bank = self.bank
        self._run_schedule(cmd.timestamp)
        kind = cmd.kind
        if kind is CommandKind.ACTIVATE:
            self._activate(cmd.row, cmd.timestamp)
        elif kind is CommandKind.PRECHARGE:
            if bank.open_row is None:
                bank.now = max(bank.now, cmd.timestamp)  # already force-closed
            else:
                self._precharge(cmd.timestamp)
        elif kind in (CommandKind.READ, CommandKind.WRITE):
            if bank.open_row is None or bank.open_row != cmd.row:
                # Re-activate: the row was (force-)closed but is still needed.
                self._activate(cmd.row, cmd.timestamp)
            self._record(bank.apply(cmd, self.strict_jedec))
        elif kind is CommandKind.AUTO_REFRESH:
            self._auto_refresh(cmd.timestamp)
        elif kind is CommandKind.NEIGHBOR_REFRESH:
            if bank.open_row is not None:
                self._precharge(cmd.timestamp)
            self._record(bank.apply(cmd, self.strict_jedec))
        self.result.commands_applied += 1

    def finish(self, at: Optional[float] = None) -> ReplayResult:
        """Close any open row and flush the refresh schedule."""
        t = self.bank.now if at is None else max(at, self.bank.now)
        self._run_schedule(t)
        if self.bank.open_row is not None:
            self._precharge(max(t, self.bank.now))
        self.result.end_time = self.bank.now
        return self.result


def replay(bank: Bank, trace: Sequence[Command],
           mitigation: Optional[MitigationBase] = None,
           t_on_cap: Optional[float] = None,
           refresh_interval: Optional[float] = None,
           strict_jedec: bool = False,
           finish_at: Optional[float] = None) -> ReplayResult:
    """Replay a whole trace and return the aggregated result."""
    rp = Replayer(bank, mitigation, t_on_cap, refresh_interval, strict_jedec)
    for cmd in trace:
        rp.feed(cmd)
    return rp.finish(finish_at)
