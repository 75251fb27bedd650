"""Synthetic command-trace generators.

Covers conventional hammering (single/double-sided), open-time sweeps, the
user-level proof-of-concept access patterns (read bursts that keep the
aggressor row open, with two flush orderings), bounded adversarial
pattern families for exhaustive mitigation checks, and seeded random
traffic for overhead measurement.
"""

from __future__ import annotations

import enum
import itertools
import random
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Sequence

from .timing import Command, TimingParams, activate, precharge, read

FILL_REFRESH_WINDOW = "fill-refresh-window"


class PocOrder(enum.Enum):
    # All cache flushes after all reads of the burst vs. a flush directly
    # after each read. The latter keeps the row open longer per read on the
    # systems this mimics; modeled as extra per-read dwell.
    FLUSH_AFTER_ALL = "flush-after-all"
    FLUSH_EACH_ACCESS = "flush-each-access"


@dataclass(frozen=True)
class PocParams:
    num_reads: int
    num_aggr_acts: int
    num_iter: int
    order: PocOrder = PocOrder.FLUSH_AFTER_ALL
    dummy_rows: int = 0
    victim_rows: tuple[int, ...] = ()
    dummy_row_base: int = 0
    flush_overhead_ns: float = 150.0

    def __post_init__(self) -> None:
        if self.num_reads < 1 or self.num_aggr_acts < 1 or self.num_iter < 1:
            raise ValueError("num_reads, num_aggr_acts and num_iter must be >= 1")
        if self.flush_overhead_ns < 0:
            raise ValueError("flush_overhead_ns must be >= 0")


@dataclass(frozen=True)
class SweepSpec:
    t_on_values: tuple[float, ...]
    sidedness: str = "single"
    activation_budget: object = FILL_REFRESH_WINDOW  # count or sentinel
    data_pattern: str = "checkerboard"

    def __post_init__(self) -> None:
        if list(self.t_on_values) != sorted(self.t_on_values):
            raise ValueError("t_on_values must be sorted ascending")
        if self.sidedness not in ("single", "double"):
            raise ValueError(f"unknown sidedness {self.sidedness!r}")


def activations_in_window(t_on: float, timing: TimingParams) -> int:
    """Activations of dwell t_on that fit in one refresh window."""
    return int(timing.t_refw // (t_on + timing.t_rc))


def gen_hammer(aggressors: Sequence[int], sidedness: str, count,
               t_on: Optional[float] = None,
               timing: Optional[TimingParams] = None,
               start: float = 0.0) -> list[Command]:
    """Alternating activate/precharge pairs with exact dwell t_on,
    round-robin over the aggressors for the double-sided pattern."""
    timing = timing or TimingParams()
    t_on = timing.t_ras_min if t_on is None else max(t_on, timing.t_ras_min)
    if sidedness == "single":
        if len(aggressors) != 1:
            raise ValueError("single-sided pattern takes exactly one aggressor")
    elif sidedness == "double":
        if len(aggressors) != 2 or abs(aggressors[0] - aggressors[1]) != 2:
            raise ValueError(
                "double-sided pattern needs two aggressors sandwiching a victim")
    else:
        raise ValueError(f"unknown sidedness {sidedness!r}")
    if count == FILL_REFRESH_WINDOW:
        count = activations_in_window(t_on, timing)
    if count < 1:
        raise ValueError(f"no activation of {t_on} ns fits the budget")
    trace: list[Command] = []
    t = start
    for i in range(count):
        row = aggressors[i % len(aggressors)]
        trace.append(activate(row, t))
        trace.append(precharge(t + t_on))
        t += t_on + timing.t_rc
    return trace


def gen_rowpress_sweep(spec: SweepSpec, aggressors: Sequence[int],
                       timing: Optional[TimingParams] = None
                       ) -> list[list[Command]]:
    """One trace per t_on value, each strictly within the refresh window."""
    timing = timing or TimingParams()
    traces = []
    for t_on in spec.t_on_values:
        if t_on < timing.t_ras_min:
            raise ValueError(f"t_on {t_on} ns below t_ras_min")
        budget = spec.activation_budget
        if budget == FILL_REFRESH_WINDOW:
            budget = activations_in_window(t_on, timing)
        if budget < 1:
            raise ValueError(
                f"t_on {t_on} ns cannot fit a single activation in the window")
        traces.append(gen_hammer(aggressors, spec.sidedness, budget, t_on, timing))
    return traces


def default_mapping(victim: int) -> tuple[int, int]:
    return victim - 1, victim + 1


def _poc_burst(row: int, t: float, params: PocParams,
               timing: TimingParams) -> tuple[list[Command], float]:
    """One aggressor activation with its read burst; returns the commands
    and the time after the closing precharge."""
    per_read = timing.t_read
    if params.order is PocOrder.FLUSH_EACH_ACCESS:
        per_read += params.flush_overhead_ns
    cmds = [activate(row, t)]
    for j in range(params.num_reads):
        cmds.append(read(row, t + j * per_read))
    dwell = max(timing.t_ras_min, params.num_reads * per_read)
    cmds.append(precharge(t + dwell))
    return cmds, t + dwell + timing.t_rc


def gen_poc(params: PocParams,
            mapping: Callable[[int], tuple[int, int]] = default_mapping,
            timing: Optional[TimingParams] = None,
            start: float = 0.0) -> list[Command]:
    """Model of the demonstration program's memory-side behavior: per
    aggressor activation one activate, ``num_reads`` same-row reads, then a
    precharge; dummy-row activations appended per iteration."""
    timing = timing or TimingParams()
    if not params.victim_rows:
        raise ValueError("victim_rows must not be empty")
    dummies = [params.dummy_row_base + k for k in range(params.dummy_rows)]
    trace: list[Command] = []
    t = start
    for victim in params.victim_rows:
        agg1, agg2 = mapping(victim)
        if abs(agg1 - victim) != 1 or abs(agg2 - victim) != 1 or agg1 == agg2:
            raise ValueError(
                f"mapping failure: rows {agg1}, {agg2} do not sandwich {victim}")
        for _ in range(params.num_iter):
            for _ in range(params.num_aggr_acts):
                for agg in (agg1, agg2):
                    cmds, t = _poc_burst(agg, t, params, timing)
                    trace.extend(cmds)
            for dummy in dummies:
                trace.append(activate(dummy, t))
                trace.append(precharge(t + timing.t_ras_min))
                t += timing.t_ras_min + timing.t_rc
    return trace


@dataclass(frozen=True)
class Request:
    time_ns: float
    row: int


def gen_random_traffic(row_count: int, request_rate: float, duration: float,
                       locality: float, seed: int) -> list[Request]:
    """Seeded open-page request stream.

    ``request_rate`` is requests per ns (inter-arrival times are
    exponential with mean 1/rate); ``locality`` is the probability that a
    request stays on the current row.
    """
    if request_rate <= 0 or duration <= 0:
        raise ValueError("request_rate and duration must be > 0")
    if not 0.0 <= locality <= 1.0:
        raise ValueError("locality must be in [0, 1]")
    rng = random.Random(seed)
    t = 0.0
    row = rng.randrange(row_count)
    requests: list[Request] = []
    while True:
        t += rng.expovariate(request_rate)
        if t >= duration:
            break
        if rng.random() >= locality:
            row = rng.randrange(row_count)
        requests.append(Request(t, row))
    return requests


def gen_adversarial_traces(aggressor_rows: Sequence[int],
                           t_on_choices: Sequence[float],
                           max_len: int,
                           timing: Optional[TimingParams] = None
                           ) -> Iterator[list[Command]]:
    """Exhaustively enumerate every access pattern of up to ``max_len``
    activations drawn from (aggressor row x open time), serialized
    back-to-back. Traces that would overrun the refresh window are
    skipped."""
    timing = timing or TimingParams()
    choices = list(itertools.product(aggressor_rows, t_on_choices))
    for length in range(1, max_len + 1):
        for combo in itertools.product(choices, repeat=length):
            total = sum(t_on + timing.t_rc for _, t_on in combo)
            if total > timing.t_refw:
                continue
            trace: list[Command] = []
            t = 0.0
            for row, t_on in combo:
                trace.append(activate(row, t))
                trace.append(precharge(t + t_on))
                t += t_on + timing.t_rc
            yield trace


def handcrafted_worst_cases(aggressor_rows: Sequence[int], t_on_cap: float,
                            base_threshold: float,
                            timing: Optional[TimingParams] = None
                            ) -> list[list[Command]]:
    """Targeted stress patterns for mitigation safety checks: saturating
    bursts at the cap, alternation between sandwiching aggressors, and a
    short-dwell flood."""
    timing = timing or TimingParams()
    cases = []
    n_cap = min(int(2 * base_threshold),
                activations_in_window(t_on_cap, timing))
    cases.append(gen_hammer([aggressor_rows[0]], "single", n_cap, t_on_cap, timing))
    if len(aggressor_rows) >= 2:
        pair = [aggressor_rows[0], aggressor_rows[0] + 2]
        cases.append(gen_hammer(pair, "double", n_cap, t_on_cap, timing))
    n_short = min(int(4 * base_threshold),
                  activations_in_window(timing.t_ras_min, timing))
    cases.append(gen_hammer([aggressor_rows[0]], "single", n_short,
                            timing.t_ras_min, timing))
    # Alternate cap-dwell and minimum-dwell activations on the same row.
    mixed: list[Command] = []
    t = 0.0
    for i in range(n_cap):
        dwell = t_on_cap if i % 2 == 0 else timing.t_ras_min
        mixed.append(activate(aggressor_rows[0], t))
        mixed.append(precharge(t + dwell))
        t += dwell + timing.t_rc
    cases.append(mixed)
    return cases
