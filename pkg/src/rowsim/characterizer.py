"""Closed-loop measurement of the simulated device.

Re-derives the minimum activation count to flip (per row, open time,
sidedness, temperature) by probing fresh bank state with an
exponential-then-binary search, sweeps open-time values over row blocks,
and computes overlap/directionality/crossover statistics.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .bank import Bank, CHECKERBOARD, check_retention
from .profile import DeviceProfile, Materialization, materialize_rows
from .timing import TimingParams
from .tracegen import activations_in_window


class NotVulnerableError(RuntimeError):
    """Even a window-filling activation burst produced no flip."""


@dataclass(frozen=True)
class AcminResult:
    row: int
    t_on: float
    sidedness: str
    temperature: int
    acmin: int
    repetitions: int
    bitflip_count_at_acmin: int


def _aggressors_for(victim: int, sidedness: str, rows: int) -> list[int]:
    if sidedness == "double":
        if not 0 < victim < rows - 1:
            raise ValueError(f"double-sided probe needs interior victim, got {victim}")
        return [victim - 1, victim + 1]
    return [victim - 1] if victim > 0 else [victim + 1]


def analytic_acmin(profile: DeviceProfile, row_factor: float, t_on: float,
                   sidedness: str = "single",
                   temperature: Optional[int] = None) -> int:
    """Model-side prediction: smallest activation count whose accumulated
    weight reaches the row threshold, using the same float comparison the
    bank applies."""
    w = profile.weight(t_on, sidedness, temperature)
    thr = profile.base_threshold * row_factor
    k = max(1, math.floor(thr / w))
    while k * w < thr:
        k += 1
    while k > 1 and (k - 1) * w >= thr:
        k -= 1
    return k


def measure_acmin(bank: Bank, row: int, t_on: float,
                  sidedness: str = "single",
                  temperature: Optional[int] = None,
                  reps: int = 5) -> AcminResult:
    """Probe the minimum activation count that flips at least one bit in
    ``row``; each probe starts from fresh state and stays within one
    refresh window. Reports the minimum across ``reps`` repetitions."""
    timing = bank.timing
    if temperature is not None:
        bank.temperature = temperature
    bank.sidedness = sidedness
    aggressors = _aggressors_for(row, sidedness, bank.rows)
    touched = sorted({row, *aggressors,
                      *(v for a in aggressors for v in bank.victims_of(a))})
    max_count = activations_in_window(t_on, timing)
    if max_count < 1:
        raise ValueError(f"t_on {t_on} ns does not fit one activation in the window")

    def probe(count: int) -> int:
        bank.reset_rows(touched)
        events = bank.bulk_hammer(aggressors, count, t_on)
        return sum(1 for ev in events
                   if getattr(ev, "row", None) == row)

    best: Optional[tuple[int, int]] = None
    for _ in range(max(1, reps)):
        # Exponential probe up to the window budget, then bisect.
        k = 1
        flips = probe(k)
        while flips == 0 and k < max_count:
            k = min(2 * k, max_count)
            flips = probe(k)
        if flips == 0:
            raise NotVulnerableError(
                f"row {row} not vulnerable at t_on = {t_on} ns within the window")
        lo = k // 2 if k > 1 else 0  # lo: no flip, k: flip
        hi = k
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if probe(mid) > 0:
                hi = mid
            else:
                lo = mid
        flips_at = probe(hi)
        if best is None or hi < best[0]:
            best = (hi, flips_at)
    bank.reset_rows(touched)
    temp = bank.temperature if bank.temperature is not None \
        else bank.profile.reference_temperature
    return AcminResult(row, t_on, sidedness, int(temp), best[0],
                       max(1, reps), best[1])


def select_rows(total_rows: int, probed: int) -> list[int]:
    """First/middle/last row blocks, ``probed`` rows in total."""
    if probed >= total_rows:
        return list(range(total_rows))
    per = probed // 3
    sizes = [per + (1 if i < probed - 3 * per else 0) for i in range(3)]
    starts = [0, (total_rows - sizes[1]) // 2, total_rows - sizes[2]]
    rows: list[int] = []
    for start, size in zip(starts, sizes):
        rows.extend(range(start, start + size))
    return sorted(set(rows))


@dataclass
class SweepTable:
    results: list[AcminResult]

    def summary(self) -> list[tuple[float, float, int, int]]:
        """(t_on, mean, min, max) per open-time value."""
        by_t: dict[float, list[int]] = {}
        for res in self.results:
            by_t.setdefault(res.t_on, []).append(res.acmin)
        return [(t_on, float(np.mean(vals)), min(vals), max(vals))
                for t_on, vals in sorted(by_t.items())]

    def results_csv(self) -> str:
        lines = ["row,t_on_ns,sidedness,temp_c,acmin,reps,flips"]
        for r in sorted(self.results, key=lambda r: (r.row, r.t_on)):
            lines.append(f"{r.row},{r.t_on:.0f},{r.sidedness},{r.temperature},"
                         f"{r.acmin},{r.repetitions},{r.bitflip_count_at_acmin}")
        return "\n".join(lines) + "\n"

    def summary_csv(self) -> str:
        lines = ["t_on_ns,mean,min,max"]
        for t_on, mean, mn, mx in self.summary():
            lines.append(f"{t_on:.0f},{mean:.6g},{mn},{mx}")
        return "\n".join(lines) + "\n"


def sweep(profile: DeviceProfile, t_on_values: Sequence[float],
          row_count: int = 256, cells_per_row: int = 1024,
          probed_rows: int = 64, sidedness: str = "single",
          temperature: Optional[int] = None, seed: int = 0,
          reps: int = 5, timing: Optional[TimingParams] = None,
          threads: int = 1,
          rows: Optional[Sequence[int]] = None) -> SweepTable:
    """Measure acmin for first/middle/last row blocks across the given
    open-time values. Probes are independent; rows fan out across worker
    threads, each with its own bank."""
    timing = timing or TimingParams()
    mat = materialize_rows(profile, row_count, cells_per_row, seed)
    probe_rows = list(rows) if rows is not None else select_rows(row_count, probed_rows)
    if sidedness == "double":
        # double-sided probes need a victim with neighbors on both sides
        probe_rows = [r if 0 < r < row_count - 1 else min(max(r, 1), row_count - 2)
                      for r in probe_rows]
        probe_rows = sorted(set(probe_rows))

    def run_chunk(chunk: list[int]) -> list[AcminResult]:
        bank = Bank(profile, mat, timing, CHECKERBOARD,
                    temperature=temperature, sidedness=sidedness)
        out = []
        for row in chunk:
            for t_on in t_on_values:
                out.append(measure_acmin(bank, row, t_on, sidedness,
                                         temperature, reps))
        return out

    if threads <= 1 or len(probe_rows) < 2:
        results = run_chunk(probe_rows)
    else:
        chunks = [probe_rows[i::threads] for i in range(threads)]
        chunks = [c for c in chunks if c]
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            results = [r for part in pool.map(run_chunk, chunks) for r in part]
    results.sort(key=lambda r: (r.row, r.t_on))
    return SweepTable(results)


# ---------------------------------------------------------------------------
# Overlap and direction statistics


@dataclass(frozen=True)
class OverlapReport:
    press_cells: int
    hammer_cells: int
    retention_cells: int
    press_hammer_overlap: float     # |press n hammer| / |press|
    press_retention_overlap: float  # |press n retention| / |press|
    press_direction_1to0: float
    hammer_direction_0to1: float

    def csv(self) -> str:
        lines = ["metric,value"]
        for name in ("press_cells", "hammer_cells", "retention_cells",
                     "press_hammer_overlap", "press_retention_overlap",
                     "press_direction_1to0", "hammer_direction_0to1"):
            lines.append(f"{name},{getattr(self, name):.8g}")
        return "\n".join(lines) + "\n"


def overlap_and_direction(materialization: Materialization,
                          hammer_flips: Iterable, press_flips: Iterable,
                          retention_flips: Iterable,
                          expected_profile: Optional[str] = None) -> OverlapReport:
    """Combine three flip logs taken on the same materialization and data
    pattern into overlap fractions and direction histograms."""
    if expected_profile is not None and materialization.profile_name != expected_profile:
        raise ValueError(
            f"mismatched materialization: expected profile {expected_profile!r}, "
            f"got {materialization.profile_name!r}")
    press = {(ev.row, ev.cell): ev.direction for ev in press_flips}
    hammer = {(ev.row, ev.cell): ev.direction for ev in hammer_flips}
    retention = {(ev.row, ev.cell) for ev in retention_flips}
    n_press = len(press)
    n_hammer = len(hammer)
    both = len(press.keys() & hammer.keys())
    ret_overlap = len(press.keys() & retention)
    press_1to0 = sum(1 for d in press.values() if d == "1->0")
    hammer_0to1 = sum(1 for d in hammer.values() if d == "0->1")
    return OverlapReport(
        press_cells=n_press,
        hammer_cells=n_hammer,
        retention_cells=len(retention),
        press_hammer_overlap=both / n_press if n_press else 0.0,
        press_retention_overlap=ret_overlap / n_press if n_press else 0.0,
        press_direction_1to0=press_1to0 / n_press if n_press else 0.0,
        hammer_direction_0to1=hammer_0to1 / n_hammer if n_hammer else 0.0,
    )


def run_overlap_experiment(profile: DeviceProfile, row_count: int = 1024,
                           cells_per_row: int = 1024, seed: int = 0,
                           temperature: Optional[int] = None,
                           press_t_on: Optional[float] = None,
                           retention_wait: float = 4e9,
                           timing: Optional[TimingParams] = None) -> OverlapReport:
    """Three full-bank runs on one materialization: a minimum-dwell hammer
    run, a long-open press run, and a refresh-disabled retention soak."""
    timing = timing or TimingParams()
    press_t_on = timing.t_refi if press_t_on is None else press_t_on
    mat = materialize_rows(profile, row_count, cells_per_row, seed)
    bank = Bank(profile, mat, timing, CHECKERBOARD, temperature=temperature)
    max_factor = profile.row_variation.max_factor

    def saturate(t_on: float) -> list:
        bank.reset()
        w = profile.weight(t_on, bank.sidedness, temperature)
        count = int(math.ceil(profile.base_threshold * max_factor / w)) + 1
        flips: list = []
        for agg in range(row_count):
            flips.extend(ev for ev in bank.bulk_hammer([agg], count, t_on)
                         if hasattr(ev, "row"))
        return flips

    hammer_flips = saturate(timing.t_ras_min)
    press_flips = saturate(press_t_on)
    bank.reset()
    retention_flips = check_retention(bank, retention_wait)
    return overlap_and_direction(mat, hammer_flips, press_flips, retention_flips)


# ---------------------------------------------------------------------------
# Single- vs double-sided crossover


@dataclass(frozen=True)
class CrossoverResult:
    t_on: Optional[float]
    sign_changes: int
    initial_sign: int  # sign of acmin(single) - acmin(double) at range start

    def csv(self) -> str:
        t = f"{self.t_on:.6g}" if self.t_on is not None else ""
        return ("crossover_t_on_ns,sign_changes,initial_sign\n"
                f"{t},{self.sign_changes},{self.initial_sign}\n")


def crossover_scan(profile: DeviceProfile,
                   t_on_range: Optional[tuple[float, float]] = None,
                   temperature: Optional[int] = None,
                   samples: int = 512) -> CrossoverResult:
    """Locate where acmin(single) - acmin(double) changes sign, by scanning
    a log-spaced grid and bisecting the bracketing interval. Returns no
    crossover (a valid outcome) when the sign never changes."""
    single = profile.curve("single", temperature)
    double = profile.curve("double", temperature)
    lo = max(single.t_min, double.t_min)
    hi = max(single.anchors[-1][0], double.anchors[-1][0])
    if t_on_range is not None:
        lo, hi = max(lo, t_on_range[0]), min(hi, t_on_range[1])

    def diff(t: float) -> float:
        return single.acmin_at(t) - double.acmin_at(t)

    grid = np.geomspace(lo, hi, samples)
    signs = [int(np.sign(diff(t))) for t in grid]
    initial = next((s for s in signs if s != 0), 0)
    changes = 0
    cross_at = None
    prev_sign, prev_t = signs[0], grid[0]
    for t, s in zip(grid[1:], signs[1:]):
        if s != 0 and prev_sign != 0 and s != prev_sign:
            changes += 1
            if cross_at is None:
                a, b = prev_t, t
                for _ in range(80):
                    mid = math.sqrt(a * b)
                    if int(np.sign(diff(mid))) == prev_sign:
                        a = mid
                    else:
                        b = mid
                cross_at = math.sqrt(a * b)
        if s != 0:
            prev_sign, prev_t = s, t
        else:
            prev_t = t
    if changes == 0:
        return CrossoverResult(None, 0, initial)
    return CrossoverResult(cross_at, changes, initial)
