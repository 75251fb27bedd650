"""Synthetic device vulnerability profiles.

A profile holds, per (sidedness, temperature) pair, a curve of the minimum
activation count needed to flip a bit as a function of how long the
aggressor row stays open (``acmin`` vs ``t_on``), plus the statistical
knobs that drive per-row and per-cell variation: mechanism overlap
fractions, flip-direction biases, and a retention-failure tail.

Curves are anchored at a handful of (t_on, acmin) points and interpolated
piecewise-linearly in log-log space, so anchor values are reproduced
exactly.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .timing import MS, NS, US

PROFILE_SCHEMA_VERSION = 1

# Cell vulnerability classes (codes used in materialized arrays).
CLASS_NONE = 0
CLASS_HAMMER_ONLY = 1
CLASS_PRESS_ONLY = 2
CLASS_BOTH = 3
CLASS_RETENTION = 4

# Flip directions.
DIR_ZERO_TO_ONE = 0
DIR_ONE_TO_ZERO = 1


class ProfileError(ValueError):
    """Invalid profile data or an unsupported lookup."""


@dataclass(frozen=True)
class AcminCurve:
    """Piecewise log-log-linear acmin(t_on) curve.

    Anchors are (t_on_ns, acmin) pairs with strictly increasing t_on and
    non-increasing acmin >= 1. The first anchor sits at the minimum legal
    row-open time; lookups below it are errors, lookups beyond the last
    anchor clamp to the final value.
    """

    anchors: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if len(self.anchors) < 1:
            raise ProfileError("curve needs at least one anchor")
        prev_t, prev_a = None, None
        for t_on, acmin in self.anchors:
            if t_on <= 0:
                raise ProfileError("anchor t_on must be positive")
            if acmin < 1.0:
                raise ProfileError(f"anchor acmin {acmin} below 1")
            if prev_t is not None:
                if t_on <= prev_t:
                    raise ProfileError("anchor t_on values must increase")
                if acmin > prev_a:
                    raise ProfileError("acmin must be non-increasing across anchors")
            prev_t, prev_a = t_on, acmin

    @property
    def t_min(self) -> float:
        return self.anchors[0][0]

    @property
    def base(self) -> float:
        return self.anchors[0][1]

    def acmin_at(self, t_on: float) -> float:
        """Interpolated acmin; exact at anchors, clamped past the last."""
        if t_on < self.t_min - 1e-9:
            raise ProfileError(f"t_on {t_on} ns below curve minimum {self.t_min} ns")
        anchors = self.anchors
        if t_on >= anchors[-1][0]:
            return anchors[-1][1]
        for (t0, a0), (t1, a1) in zip(anchors, anchors[1:]):
            if t_on <= t1:
                if t_on <= t0:
                    return a0
                if t_on == t1:  # anchors are exact, no interpolation fuzz
                    return a1
                frac = (math.log(t_on) - math.log(t0)) / (math.log(t1) - math.log(t0))
                return math.exp(math.log(a0) + frac * (math.log(a1) - math.log(a0)))
        return anchors[-1][1]  # unreachable

    def scaled(self, factor: float) -> "AcminCurve":
        """Scale every anchor past the first by ``factor`` (identity at the
        minimum t_on), clamping into [1, base]."""
        base_t, base_a = self.anchors[0]
        scaled = [(base_t, base_a)]
        for t_on, acmin in self.anchors[1:]:
            scaled.append((t_on, min(base_a, max(1.0, acmin * factor))))
        # Re-impose monotonicity in case clamping flattened the head.
        for i in range(1, len(scaled)):
            if scaled[i][1] > scaled[i - 1][1]:
                scaled[i] = (scaled[i][0], scaled[i - 1][1])
        return AcminCurve(tuple(scaled))


@dataclass(frozen=True)
class RowVariation:
    """Bounded log-uniform spread of per-row threshold factors."""

    min_factor: float = 1.0
    max_factor: float = 1.0

    def __post_init__(self) -> None:
        if self.min_factor <= 0 or self.max_factor < self.min_factor:
            raise ProfileError("need 0 < min_factor <= max_factor")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.min_factor == self.max_factor:
            return np.full(n, self.min_factor)
        lo, hi = math.log(self.min_factor), math.log(self.max_factor)
        return np.exp(rng.uniform(lo, hi, size=n))


@dataclass(frozen=True)
class RetentionTail:
    fraction: float = 0.005
    min_retention_ns: float = 1e9  # 1 s
    max_retention_ns: float = 8e9


@dataclass(frozen=True)
class DeviceProfile:
    name: str
    base_threshold: float
    curves: dict[tuple[str, int], AcminCurve]
    reference_temperature: int = 50
    temp_scale: dict[int, float] = field(default_factory=dict)
    row_variation: RowVariation = RowVariation()
    press_fraction: float = 0.02
    hammer_fraction: float = 0.02
    overlap_rh: float = 0.00013
    overlap_ret: float = 0.0034
    press_direction_bias: float = 1.0
    hammer_direction_bias: float = 1.0
    retention_tail: RetentionTail = RetentionTail()

    def __post_init__(self) -> None:
        if self.base_threshold < 1:
            raise ProfileError("base_threshold must be >= 1")
        for frac in (self.overlap_rh, self.overlap_ret, self.press_fraction,
                     self.hammer_fraction, self.press_direction_bias,
                     self.hammer_direction_bias, self.retention_tail.fraction):
            if not 0.0 <= frac <= 1.0:
                raise ProfileError(f"fraction {frac} outside [0, 1]")
        for (sidedness, temp), curve in self.curves.items():
            if sidedness not in ("single", "double"):
                raise ProfileError(f"unknown sidedness {sidedness!r}")

    def curve(self, sidedness: str = "single", temperature: Optional[int] = None) -> AcminCurve:
        temp = self.reference_temperature if temperature is None else temperature
        try:
            return self.curves[(sidedness, temp)]
        except KeyError:
            raise ProfileError(
                f"profile {self.name!r} has no curve for ({sidedness}, {temp} C)"
            ) from None

    @property
    def temperatures(self) -> list[int]:
        return sorted({temp for _, temp in self.curves})

    def acmin_at(self, t_on: float, sidedness: str = "single",
                 temperature: Optional[int] = None) -> float:
        return self.curve(sidedness, temperature).acmin_at(t_on)

    def weight(self, t_on: float, sidedness: str = "single",
               temperature: Optional[int] = None) -> float:
        """Per-activation disturbance weight, normalized to 1 at the curve's
        minimum t_on."""
        curve = self.curve(sidedness, temperature)
        return curve.acmin_at(curve.t_min) / curve.acmin_at(t_on)

    def without_variation(self) -> "DeviceProfile":
        return dataclasses.replace(self, row_variation=RowVariation(1.0, 1.0))


def acmin_at(profile: DeviceProfile, t_on: float, sidedness: str = "single",
             temperature: Optional[int] = None) -> float:
    return profile.acmin_at(t_on, sidedness, temperature)


def weight(profile: DeviceProfile, t_on: float, sidedness: str = "single",
           temperature: Optional[int] = None) -> float:
    return profile.weight(t_on, sidedness, temperature)


def scale_temperature(profile: DeviceProfile, from_temp: int, to_temp: int) -> DeviceProfile:
    """Derive a profile with curves at ``to_temp`` from those at
    ``from_temp`` using the profile's temperature factor.

    The factor (measured at t_on = tREFI in the source data) is applied
    multiplicatively across the curve tail beyond the minimum t_on and is
    identity at the minimum.
    """
    if from_temp == to_temp:
        return profile
    if to_temp in profile.temp_scale and from_temp == profile.reference_temperature:
        factor = profile.temp_scale[to_temp]
    elif from_temp in profile.temp_scale and to_temp == profile.reference_temperature:
        factor = 1.0 / profile.temp_scale[from_temp]
    else:
        raise ProfileError(
            f"profile {profile.name!r} has no temperature factor for "
            f"{from_temp} C -> {to_temp} C"
        )
    new_curves = dict(profile.curves)
    for (sidedness, temp), curve in profile.curves.items():
        if temp == from_temp:
            new_curves[(sidedness, to_temp)] = curve.scaled(factor)
    return dataclasses.replace(profile, curves=new_curves)


@dataclass
class Materialization:
    """Seeded per-row / per-cell vulnerability assignment.

    Arrays are (rows, cells) unless noted. ``vuln_class`` holds the CLASS_*
    codes, ``threshold_mult`` the per-cell multiplier over the row's base
    threshold, ``flip_direction`` the DIR_* codes, and ``retention_ns`` the
    retention time (inf for non-retention cells).
    """

    profile_name: str
    seed: int
    row_factor: np.ndarray          # (rows,)
    vuln_class: np.ndarray          # int8
    threshold_mult: np.ndarray      # float64
    flip_direction: np.ndarray      # int8
    retention_ns: np.ndarray        # float64

    @property
    def rows(self) -> int:
        return self.row_factor.shape[0]

    @property
    def cells_per_row(self) -> int:
        return self.vuln_class.shape[1]


def materialize_rows(profile: DeviceProfile, row_count: int, cells_per_row: int,
                     seed: int) -> Materialization:
    """Deterministically assign vulnerability classes, thresholds,
    directions and retention times for a bank of the given geometry."""
    if row_count < 1 or cells_per_row < 1:
        raise ProfileError("row_count and cells_per_row must be >= 1")
    rng = np.random.default_rng(seed)
    shape = (row_count, cells_per_row)

    row_factor = profile.row_variation.sample(rng, row_count)

    u = rng.random(shape)
    vuln = np.full(shape, CLASS_NONE, dtype=np.int8)
    p_press = profile.press_fraction
    p_hammer = profile.hammer_fraction
    p_ret = profile.retention_tail.fraction
    # Disjoint draw: press band first, then hammer, then the retention tail.
    press = u < p_press
    hammer = (u >= p_press) & (u < p_press + p_hammer)
    retention = (u >= p_press + p_hammer) & (u < p_press + p_hammer + p_ret)
    vuln[press] = CLASS_PRESS_ONLY
    vuln[hammer] = CLASS_HAMMER_ONLY
    vuln[retention] = CLASS_RETENTION
    # A small fraction of press-vulnerable cells also respond to hammering.
    # Exact-count allotment keeps the Both/(PressOnly u Both) ratio at or
    # below overlap_rh regardless of sampling luck.
    press_idx = np.flatnonzero(press.ravel())
    n_both = int(press_idx.size * profile.overlap_rh)
    if n_both:
        chosen = rng.choice(press_idx, size=n_both, replace=False)
        vuln.ravel()[chosen] = CLASS_BOTH

    threshold_mult = np.ones(shape)

    direction = np.full(shape, DIR_ZERO_TO_ONE, dtype=np.int8)
    dirs = rng.random(shape)
    press_like = (vuln == CLASS_PRESS_ONLY) | (vuln == CLASS_BOTH)
    direction[press_like & (dirs < profile.press_direction_bias)] = DIR_ONE_TO_ZERO
    hammer_only = vuln == CLASS_HAMMER_ONLY
    direction[hammer_only & (dirs >= profile.hammer_direction_bias)] = DIR_ONE_TO_ZERO
    ret_mask = vuln == CLASS_RETENTION
    direction[ret_mask & (dirs < 0.5)] = DIR_ONE_TO_ZERO

    retention_ns = np.full(shape, np.inf)
    tail = profile.retention_tail
    n_ret = int(ret_mask.sum())
    if n_ret:
        retention_ns[ret_mask] = rng.uniform(tail.min_retention_ns,
                                             tail.max_retention_ns, size=n_ret)

    return Materialization(
        profile_name=profile.name,
        seed=seed,
        row_factor=row_factor,
        vuln_class=vuln,
        threshold_mult=threshold_mult,
        flip_direction=direction,
        retention_ns=retention_ns,
    )


# ---------------------------------------------------------------------------
# Serialization


def profile_to_dict(profile: DeviceProfile) -> dict:
    return {
        "schema": PROFILE_SCHEMA_VERSION,
        "name": profile.name,
        "base_threshold": profile.base_threshold,
        "reference_temperature": profile.reference_temperature,
        "curves": [
            {
                "sidedness": sidedness,
                "temperature": temp,
                "anchors": [[t, a] for t, a in curve.anchors],
            }
            for (sidedness, temp), curve in sorted(profile.curves.items())
        ],
        "temp_scale": {str(t): f for t, f in sorted(profile.temp_scale.items())},
        "row_variation": {
            "min_factor": profile.row_variation.min_factor,
            "max_factor": profile.row_variation.max_factor,
        },
        "press_fraction": profile.press_fraction,
        "hammer_fraction": profile.hammer_fraction,
        "overlap_rh": profile.overlap_rh,
        "overlap_ret": profile.overlap_ret,
        "press_direction_bias": profile.press_direction_bias,
        "hammer_direction_bias": profile.hammer_direction_bias,
        "retention_tail": {
            "fraction": profile.retention_tail.fraction,
            "min_retention_ns": profile.retention_tail.min_retention_ns,
            "max_retention_ns": profile.retention_tail.max_retention_ns,
        },
    }


def profile_from_dict(data: dict) -> DeviceProfile:
    if data.get("schema") != PROFILE_SCHEMA_VERSION:
        raise ProfileError(f"unsupported profile schema: {data.get('schema')!r}")
    curves = {}
    for entry in data["curves"]:
        key = (entry["sidedness"], int(entry["temperature"]))
        curves[key] = AcminCurve(tuple((float(t), float(a)) for t, a in entry["anchors"]))
    rv = data.get("row_variation", {})
    rt = data.get("retention_tail", {})
    return DeviceProfile(
        name=data["name"],
        base_threshold=float(data["base_threshold"]),
        curves=curves,
        reference_temperature=int(data.get("reference_temperature", 50)),
        temp_scale={int(t): float(f) for t, f in data.get("temp_scale", {}).items()},
        row_variation=RowVariation(float(rv.get("min_factor", 1.0)),
                                   float(rv.get("max_factor", 1.0))),
        press_fraction=float(data.get("press_fraction", 0.02)),
        hammer_fraction=float(data.get("hammer_fraction", 0.02)),
        overlap_rh=float(data.get("overlap_rh", 0.00013)),
        overlap_ret=float(data.get("overlap_ret", 0.0034)),
        press_direction_bias=float(data.get("press_direction_bias", 1.0)),
        hammer_direction_bias=float(data.get("hammer_direction_bias", 1.0)),
        retention_tail=RetentionTail(
            float(rt.get("fraction", 0.005)),
            float(rt.get("min_retention_ns", 1e9)),
            float(rt.get("max_retention_ns", 8e9)),
        ),
    )


def save_profile(profile: DeviceProfile, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(profile_to_dict(profile), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_profile(path) -> DeviceProfile:
    with open(path, "r", encoding="utf-8") as fh:
        return profile_from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# Builtin profiles

T_RAS = 36 * NS
T_REFI = 7.8 * US
T_RON_MAX = 70.2 * US
T_30MS = 30 * MS

_BASE = 32_000.0


def _curve(base: float, r1: float, r2: float, final: float = 1.0) -> AcminCurve:
    """Anchor a curve at tRAS / tREFI / 9xtREFI / 30 ms given the reduction
    factors at the middle anchors and the final acmin value."""
    return AcminCurve((
        (T_RAS, base),
        (T_REFI, base / r1),
        (T_RON_MAX, base / r2),
        (T_30MS, max(1.0, final)),
    ))


def _mean_profile_50() -> DeviceProfile:
    single = _curve(_BASE, 21.0, 190.0, final=1.2)
    double = _curve(_BASE * 0.8, 21.0, 190.0, final=1.2)
    return DeviceProfile(
        name="paper-mean-50C",
        base_threshold=_BASE,
        reference_temperature=50,
        curves={("single", 50): single, ("double", 50): double},
        row_variation=RowVariation(0.5, 1.0),
    )


def _mean_profile_80() -> DeviceProfile:
    single = _curve(_BASE, 17.6, 159.4, final=1.0)
    double = _curve(_BASE * 0.8, 17.6, 159.4, final=1.0)
    return DeviceProfile(
        name="paper-mean-80C",
        base_threshold=_BASE,
        reference_temperature=80,
        curves={("single", 80): single, ("double", 80): double},
        # Variation only weakens rows so the 30 ms single-activation
        # extreme holds for every row, not just the weakest.
        row_variation=RowVariation(0.5, 1.0),
    )


def _mfr_profile(mfr: str, temp_factor: float) -> DeviceProfile:
    single = _curve(_BASE, 21.0, 190.0, final=1.2)
    double = _curve(_BASE * 0.8, 21.0, 190.0, final=1.2)
    base = DeviceProfile(
        name=f"paper-mfr{mfr}-50C",
        base_threshold=_BASE,
        reference_temperature=50,
        curves={("single", 50): single, ("double", 50): double},
        temp_scale={80: temp_factor},
        row_variation=RowVariation(0.5, 1.0),
    )
    return scale_temperature(base, 50, 80)


def _crossover_profile() -> DeviceProfile:
    # Sign of acmin(single) - acmin(double) flips exactly once between
    # tREFI and 9xtREFI: negative at the short-open end, positive at 30 ms.
    single = AcminCurve(((T_RAS, 30_000.0), (T_REFI, 1_800.0),
                         (T_RON_MAX, 300.0), (T_30MS, 2.0)))
    double = AcminCurve(((T_RAS, 32_000.0), (T_REFI, 1_900.0),
                         (T_RON_MAX, 250.0), (T_30MS, 1.0)))
    return DeviceProfile(
        name="crossover",
        base_threshold=30_000.0,
        reference_temperature=80,
        curves={("single", 80): single, ("double", 80): double},
    )


def _desk16_profile() -> DeviceProfile:
    # Tiny bank for exhaustive mitigation checks: base threshold 64,
    # weight 16 at the tREFI open-time cap.
    single = AcminCurve(((T_RAS, 64.0), (T_REFI, 4.0), (T_RON_MAX, 2.0), (T_30MS, 1.0)))
    return DeviceProfile(
        name="desk-16",
        base_threshold=64.0,
        reference_temperature=80,
        curves={("single", 80): single, ("double", 80): single},
        press_fraction=0.25,
        hammer_fraction=0.25,
    )


def _poc_desk_profile() -> DeviceProfile:
    # Desk-scale device for the proof-of-concept runs: steep press curve so
    # a few long-open activations beat the sampler-style in-DRAM mitigation
    # while plain hammering cannot.
    single = AcminCurve(((T_RAS, 4096.0), (T_REFI, 4.0), (T_RON_MAX, 2.0), (T_30MS, 1.0)))
    return DeviceProfile(
        name="poc-desk",
        base_threshold=4096.0,
        reference_temperature=80,
        curves={("single", 80): single, ("double", 80): single},
        press_fraction=0.1,
        hammer_fraction=0.1,
    )


def builtin_profiles() -> dict[str, DeviceProfile]:
    profiles = [
        _mean_profile_50(),
        _mean_profile_80(),
        _mfr_profile("S", 0.55),
        _mfr_profile("H", 0.32),
        _mfr_profile("M", 0.59),
        _crossover_profile(),
        _desk16_profile(),
        _poc_desk_profile(),
    ]
    return {p.name: p for p in profiles}


def get_profile(name: str) -> DeviceProfile:
    profiles = builtin_profiles()
    if name not in profiles:
        raise ProfileError(
            f"unknown profile {name!r}; available: {', '.join(sorted(profiles))}"
        )
    return profiles[name]
