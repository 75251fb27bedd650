"""Read-disturbance mitigation engines.

All engines observe the command stream through three hooks and return row
indices to refresh immediately (the replay engine turns them into
neighbor-refresh commands at the same timestamp):

* ``on_activate(row, t)``   called for every activation
* ``on_precharge(row, t_on, t)``  called when a row closes, with its open time
* ``on_auto_refresh(t)``    called at every auto-refresh boundary

Engines are deterministic given their seed and the event order, and each
instance belongs to exactly one simulation.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Optional

from .profile import DeviceProfile
from .timing import TimingParams


@dataclass(frozen=True)
class ParaConfig:
    """Probabilistic neighbor refresh on row close."""

    p: float
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.p <= 1.0:
            raise ValueError("PARA probability must be in (0, 1]")


@dataclass(frozen=True)
class GrapheneConfig:
    """Frequent-items counter table with a refresh threshold.

    With ``weighted_increments`` the table accumulates the open-time weight
    of each activation instead of 1, so long row opens are charged in
    proportion to the disturbance they cause.
    """

    table_size: int
    threshold: float
    weighted_increments: bool = True

    def __post_init__(self) -> None:
        if self.table_size < 1:
            raise ValueError("table_size must be >= 1")
        if self.threshold <= 0:
            raise ValueError("threshold must be > 0")


@dataclass(frozen=True)
class TrrConfig:
    """In-DRAM sampler: probabilistically records activations and refreshes
    the neighbors of the most-sampled row at auto-refresh time. Small
    tables are intentionally easy to dilute with dummy-row activations."""

    sample_rate: float
    table_size: int = 1
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.sample_rate <= 1.0:
            raise ValueError("sample_rate must be in (0, 1]")
        if self.table_size < 1:
            raise ValueError("table_size must be >= 1")


@dataclass(frozen=True)
class AdaptationConfig:
    """Row-open-time cap plus rescaling of the wrapped mitigation."""

    t_on_cap: float


class MitigationBase:
    def on_activate(self, row: int, t: float) -> list[int]:
        return []

    def on_precharge(self, row: int, t_on: float, t: float) -> list[int]:
        return []

    def on_auto_refresh(self, t: float) -> list[int]:
        return []

    def neighbor_rows(self, row: int, radius: int = 1) -> list[int]:
        return [row - d for d in range(1, radius + 1)] + \
               [row + d for d in range(1, radius + 1)]


class Para(MitigationBase):
    """On each precharge, refresh one uniformly chosen neighbor with
    probability p. The coin is flipped at close time so open-time-aware
    variants see the actual t_on."""

    def __init__(self, config: ParaConfig, blast_radius: int = 1) -> None:
        self.config = config
        self.blast_radius = blast_radius
        self._rng = random.Random(config.rng_seed)

    def on_precharge(self, row: int, t_on: float, t: float) -> list[int]:
        if self._rng.random() < self.config.p:
            neighbors = self.neighbor_rows(row, self.blast_radius)
            return [self._rng.choice(neighbors)]
        return []


def para_on_precharge(para: Para, row: int, t_on: float, t: float) -> list[int]:
    return para.on_precharge(row, t_on, t)


class MisraGries:
    """Weighted Misra-Gries summary: any key whose true weighted count
    exceeds total_weight / table_size is guaranteed to be tracked, and a
    tracked count underestimates the true count by at most that amount."""

    def __init__(self, table_size: int) -> None:
        self.table_size = table_size
        self.table: dict[int, float] = {}
        self.total_weight = 0.0

    def update(self, key: int, w: float = 1.0) -> None:
        self.total_weight += w
        table = self.table
        if key in table:
            table[key] += w
            return
        while w > 0:
            if len(table) < self.table_size:
                table[key] = table.get(key, 0.0) + w
                return
            m = min(table.values())
            d = min(m, w)
            w -= d
            for k in list(table):
                table[k] -= d
                if table[k] <= 1e-12:
                    del table[k]

    def estimate(self, key: int) -> float:
        return self.table.get(key, 0.0)


class Graphene(MitigationBase):
    """Counter-table mitigation: when a row's (possibly weighted) count
    reaches the threshold, refresh its neighbors and reset the counter."""

    def __init__(self, config: GrapheneConfig, profile: Optional[DeviceProfile] = None,
                 blast_radius: int = 1, sidedness: str = "single",
                 temperature: Optional[int] = None) -> None:
        if config.weighted_increments and profile is None:
            raise ValueError("weighted increments need a device profile")
        self.config = config
        self.profile = profile
        self.blast_radius = blast_radius
        self.sidedness = sidedness
        self.temperature = temperature
        self.counters = MisraGries(config.table_size)
        self.triggered_rows: set[int] = set()

    def _bump(self, row: int, inc: float) -> list[int]:
        self.counters.update(row, inc)
        if self.counters.estimate(row) >= self.config.threshold:
            self.counters.table[row] = 0.0
            self.triggered_rows.add(row)
            return self.neighbor_rows(row, self.blast_radius)
        return []

    def on_activate(self, row: int, t: float) -> list[int]:
        if self.config.weighted_increments:
            return []  # charged at close time, when t_on is known
        return self._bump(row, 1.0)

    def on_precharge(self, row: int, t_on: float, t: float) -> list[int]:
        if not self.config.weighted_increments:
            return []
        w = self.profile.weight(t_on, self.sidedness, self.temperature)
        return self._bump(row, w)


def graphene_on_activate(graphene: Graphene, row: int,
                         t_on_of_last_close: Optional[float] = None) -> list[int]:
    """Single-event entry point: unweighted tables count the activation
    itself; weighted tables charge the previous open interval."""
    if graphene.config.weighted_increments:
        if t_on_of_last_close is None:
            return []
        return graphene.on_precharge(row, t_on_of_last_close, 0.0)
    return graphene.on_activate(row, 0.0)


class TrrSampler(MitigationBase):
    """Sampling tracker with FIFO eviction. At each auto-refresh the
    most-sampled tracked row's neighbors are refreshed and its entry
    evicted. Recency-biased small tables are easily diluted by dummy-row
    activation bursts, which the proof-of-concept traces exploit."""

    def __init__(self, config: TrrConfig, blast_radius: int = 1) -> None:
        self.config = config
        self.blast_radius = blast_radius
        self._rng = random.Random(config.rng_seed)
        self.table: dict[int, int] = {}   # row -> sample count, insertion-ordered

    def on_activate(self, row: int, t: float) -> list[int]:
        if self._rng.random() >= self.config.sample_rate:
            return []
        if row in self.table:
            self.table[row] += 1
        else:
            if len(self.table) >= self.config.table_size:
                oldest = next(iter(self.table))
                del self.table[oldest]
            self.table[row] = 1
        return []

    def on_auto_refresh(self, t: float) -> list[int]:
        if not self.table:
            return []
        target = max(self.table, key=self.table.__getitem__)
        del self.table[target]
        return self.neighbor_rows(target, self.blast_radius)


def trr_on_refresh(trr: TrrSampler, t: float) -> list[int]:
    return trr.on_auto_refresh(t)


@dataclass
class AdaptedMitigation:
    """Result of adapting a mitigation for open-time-driven disturbance:
    the controller cap, the rescaled config, and an audit trail of how the
    parameters were derived."""

    t_on_cap: float
    scale: float
    config: object
    metadata: dict = field(default_factory=dict)

    def build(self, profile: DeviceProfile, blast_radius: int = 1,
              sidedness: str = "single",
              temperature: Optional[int] = None) -> MitigationBase:
        if isinstance(self.config, ParaConfig):
            return Para(self.config, blast_radius)
        if isinstance(self.config, GrapheneConfig):
            return Graphene(self.config, profile, blast_radius, sidedness,
                            temperature)
        raise TypeError(f"cannot build mitigation from {type(self.config)}")


def adapt(config, adaptation: AdaptationConfig, profile: DeviceProfile,
          timing: Optional[TimingParams] = None, sidedness: str = "single",
          temperature: Optional[int] = None) -> AdaptedMitigation:
    """Rescale a PARA or Graphene config for a controller that force-closes
    rows after ``t_on_cap``.

    The cap bounds the per-activation weight at scale = weight(t_on_cap),
    so the effective flip threshold shrinks to N' = N / scale:

    * Graphene, unweighted: threshold' = floor(threshold / scale).
    * Graphene, weighted: threshold unchanged (the table already counts in
      weight units).
    * PARA: p' = 2 * (1 - (1 - p/2)**scale), which makes the per-window
      miss probability at N' events, (1 - p'/2)**N', equal to the original
      miss probability (1 - p/2)**N.
    """
    timing = timing or TimingParams()
    if not timing.t_ras_min <= adaptation.t_on_cap <= timing.t_ron_max_jedec:
        raise ValueError(
            f"t_on_cap {adaptation.t_on_cap} ns outside "
            f"[{timing.t_ras_min}, {timing.t_ron_max_jedec}] ns")
    scale = profile.weight(adaptation.t_on_cap, sidedness, temperature)
    if scale < 1.0:
        raise ValueError(f"cap weight {scale} < 1")
    meta = {
        "t_on_cap_ns": adaptation.t_on_cap,
        "scale": scale,
        "original": repr(config),
    }
    if isinstance(config, GrapheneConfig):
        if config.weighted_increments:
            adapted = config
            meta["formula"] = ("weighted increments: threshold kept at "
                               f"{config.threshold} (counted in weight units)")
        else:
            new_threshold = max(1.0, math.floor(config.threshold / scale))
            adapted = GrapheneConfig(config.table_size, new_threshold, False)
            meta["formula"] = (f"threshold' = floor(threshold / scale) = "
                              f"floor({config.threshold} / {scale:.6g}) = "
                              f"{new_threshold}")
    elif isinstance(config, ParaConfig):
        miss_base = 1.0 - config.p / 2.0
        p_new = min(1.0, 2.0 * (1.0 - miss_base ** scale))
        adapted = ParaConfig(p_new, config.rng_seed)
        meta["formula"] = (
            "p' = 2*(1-(1-p/2)**scale) so that (1-p'/2)**(N/scale) "
            f"<= (1-p/2)**N; p' = {p_new:.6g}")
    else:
        raise TypeError(f"cannot adapt mitigation config of type {type(config)}")
    meta["adapted"] = repr(adapted)
    return AdaptedMitigation(adaptation.t_on_cap, scale, adapted, meta)
