"""Performance cost of a row-open-time cap.

A minimal open-page controller timing model: requests are served in
arrival order, a row hit costs ``t_read``, a row miss costs
``t_rc + t_read`` (close the old row and activate the new one). With a
cap, a row open longer than ``t_on_cap`` is considered closed, so a later
same-row request pays the miss penalty again. The reported metric is the
trace completion-time ratio of the capped policy to the uncapped one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .timing import TimingParams
from .tracegen import Request


@dataclass(frozen=True)
class ControllerRun:
    completion_time_ns: float
    busy_time_ns: float
    row_hits: int
    row_misses: int
    forced_closures: int


def simulate_controller(requests: Sequence[Request],
                        timing: Optional[TimingParams] = None,
                        t_on_cap: Optional[float] = None) -> ControllerRun:
    timing = timing or TimingParams()
    if t_on_cap is not None and t_on_cap < timing.t_ras_min:
        raise ValueError("t_on_cap below t_ras_min")
    busy_until = 0.0
    busy = 0.0
    open_row: Optional[int] = None
    opened_at = 0.0
    hits = misses = forced = 0
    for req in requests:
        start = max(req.time_ns, busy_until)
        if (open_row == req.row and t_on_cap is not None
                and start - opened_at > t_on_cap):
            open_row = None  # cap expired; the controller already closed it
            forced += 1
        if open_row == req.row:
            service = timing.t_read
            hits += 1
        else:
            service = timing.t_rc + timing.t_read
            misses += 1
            open_row = req.row
            opened_at = start
        busy_until = start + service
        busy += service
    return ControllerRun(busy_until, busy, hits, misses, forced)


@dataclass(frozen=True)
class OverheadResult:
    t_on_cap: float
    capped: ControllerRun
    baseline: ControllerRun

    @property
    def overhead(self) -> float:
        """Fractional completion-time increase of the capped policy."""
        return (self.capped.completion_time_ns
                / self.baseline.completion_time_ns) - 1.0


def measure_overhead(requests: Sequence[Request], t_on_cap: float,
                     timing: Optional[TimingParams] = None) -> OverheadResult:
    timing = timing or TimingParams()
    baseline = simulate_controller(requests, timing, None)
    capped = simulate_controller(requests, timing, t_on_cap)
    return OverheadResult(t_on_cap, capped, baseline)


def overhead_sweep(requests: Sequence[Request], caps: Sequence[float],
                   timing: Optional[TimingParams] = None) -> list[OverheadResult]:
    timing = timing or TimingParams()
    return [measure_overhead(requests, cap, timing) for cap in sorted(caps)]


def overhead_csv(results: Sequence[OverheadResult]) -> str:
    lines = ["t_on_cap_ns,overhead,completion_capped_ns,completion_uncapped_ns,"
             "forced_closures"]
    for res in results:
        lines.append(f"{res.t_on_cap:.0f},{res.overhead:.8f},"
                     f"{res.capped.completion_time_ns:.0f},"
                     f"{res.baseline.completion_time_ns:.0f},"
                     f"{res.capped.forced_closures}")
    return "\n".join(lines) + "\n"
