"""Command-line entry point.

``rowsim run <spec.json>`` executes one experiment described by a
declarative JSON spec and writes CSV artifacts plus reproduction metadata
into the spec's output directory. ``rowsim profiles`` lists and shows the
builtin device profiles.

Exit codes: 0 success, 1 spec/validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .bank import Bank, CHECKERBOARD, flip_report_csv
from .characterizer import (
    SweepTable,
    crossover_scan,
    run_overlap_experiment,
    sweep,
)
from .engine import replay
from .mitigations import (
    AdaptationConfig,
    GrapheneConfig,
    Graphene,
    Para,
    ParaConfig,
    TrrConfig,
    TrrSampler,
    adapt,
)
from .profile import (
    DeviceProfile,
    builtin_profiles,
    get_profile,
    load_profile,
    materialize_rows,
    profile_to_dict,
)
from .timing import TimingParams
from .tracegen import (
    PocOrder,
    PocParams,
    gen_hammer,
    gen_poc,
    gen_random_traffic,
    handcrafted_worst_cases,
)
from .overhead import measure_overhead, overhead_csv, overhead_sweep

SPEC_SCHEMA = 1
KINDS = ("sweep", "poc", "mitigation-eval", "overhead", "overlap", "crossover")


class SpecError(ValueError):
    """Invalid experiment spec; the message names the offending field."""


def _require(spec: dict, field: str, typ=None):
    if field not in spec:
        raise SpecError(f"missing required field {field!r}")
    value = spec[field]
    if typ is not None and not isinstance(value, typ):
        raise SpecError(f"field {field!r} has wrong type "
                        f"{type(value).__name__}")
    return value


def _resolve_profile(name: str) -> DeviceProfile:
    if name in builtin_profiles():
        return get_profile(name)
    path = Path(name)
    if path.suffix == ".json" and path.exists():
        return load_profile(path)
    raise SpecError(f"field 'profile': unknown profile {name!r}")


def validate_spec(spec: dict) -> dict:
    if not isinstance(spec, dict):
        raise SpecError("spec must be a JSON object")
    schema = spec.get("schema")
    if schema != SPEC_SCHEMA:
        raise SpecError(f"field 'schema': expected {SPEC_SCHEMA}, got {schema!r}")
    kind = _require(spec, "kind", str)
    if kind not in KINDS:
        raise SpecError(f"field 'kind': must be one of {', '.join(KINDS)}")
    _require(spec, "profile", str)
    seeds = _require(spec, "seeds", list)
    if not seeds or not all(isinstance(s, int) for s in seeds):
        raise SpecError("field 'seeds': must be a non-empty list of integers")
    _require(spec, "output_dir", str)
    return spec


def _output_dir(spec: dict) -> Path:
    override = os.environ.get("ROWSIM_OUT")
    return Path(override) if override else Path(spec["output_dir"])


def _write(out_dir: Path, name: str, text: str) -> None:
    target = (out_dir / name).resolve()
    if out_dir.resolve() not in target.parents and target != out_dir.resolve():
        raise SpecError(f"artifact {name!r} escapes the output directory")
    target.write_text(text)


def _mitigation_from_spec(block: dict, profile: DeviceProfile,
                          timing: TimingParams, sidedness: str,
                          temperature: Optional[int]):
    """Build (mitigation, t_on_cap, metadata) from the spec's mitigation
    block, applying the open-time adaptation when one is configured."""
    mtype = _require(block, "type", str)
    if mtype == "para":
        config = ParaConfig(_require(block, "p", (int, float)),
                            int(block.get("rng_seed", 0)))
    elif mtype == "graphene":
        config = GrapheneConfig(_require(block, "table_size", int),
                                _require(block, "threshold", (int, float)),
                                bool(block.get("weighted_increments", True)))
    elif mtype == "trr":
        config = TrrConfig(_require(block, "sample_rate", (int, float)),
                           int(block.get("table_size", 1)),
                           int(block.get("rng_seed", 0)))
    else:
        raise SpecError(f"field 'mitigation.type': unknown type {mtype!r}")

    adaptation = block.get("adaptation")
    if adaptation is not None:
        if mtype == "trr":
            raise SpecError("field 'mitigation.adaptation': "
                            "not supported for the trr sampler")
        cap_ns = _require(adaptation, "t_on_cap_ns", (int, float))
        adapted = adapt(config, AdaptationConfig(float(cap_ns)), profile,
                        timing, sidedness, temperature)
        mit = adapted.build(profile, sidedness=sidedness, temperature=temperature)
        return mit, adapted.t_on_cap, adapted.metadata
    if mtype == "para":
        return Para(config), None, {"original": repr(config)}
    if mtype == "trr":
        return TrrSampler(config), None, {"original": repr(config)}
    return (Graphene(config, profile, sidedness=sidedness,
                     temperature=temperature),
            None, {"original": repr(config)})


# ---------------------------------------------------------------------------
# Experiment kinds


def run_sweep(spec: dict, profile: DeviceProfile, out_dir: Path,
              threads: int) -> dict:
    t_on_values = [float(t) for t in _require(spec, "t_on_values_ns", list)]
    sidedness = spec.get("sidedness", "single")
    temperature = spec.get("temperature")
    row_count = int(spec.get("row_count", 256))
    cells = int(spec.get("cells_per_row", 1024))
    probed = int(spec.get("probed_rows", 64))
    reps = int(spec.get("reps", 5))
    all_results = []
    for seed in spec["seeds"]:
        table = sweep(profile, t_on_values, row_count, cells, probed,
                      sidedness, temperature, seed, reps, threads=threads)
        _write(out_dir, f"results-{seed}.csv", table.results_csv())
        all_results.extend(table.results)
    combined = SweepTable(sorted(all_results, key=lambda r: (r.row, r.t_on)))
    _write(out_dir, "summary.csv", combined.summary_csv())
    return {"rows_measured": len(all_results)}


def run_poc(spec: dict, profile: DeviceProfile, out_dir: Path,
            strict_jedec: bool) -> dict:
    timing = TimingParams()
    temperature = spec.get("temperature")
    row_count = int(spec.get("row_count", 64))
    cells = int(spec.get("cells_per_row", 256))
    refresh_interval = float(spec.get("refresh_interval_ns",
                                      timing.t_refw / timing.ref_groups))
    variants = _require(spec, "variants", list)
    trr_block = spec.get("trr", {"sample_rate": 0.2, "table_size": 1})
    lines = ["label,num_reads,order,flipped_rows,flips"]
    for seed in spec["seeds"]:
        mat = materialize_rows(profile, row_count, cells, seed)
        for var in variants:
            label = _require(var, "label", str)
            order = PocOrder(var.get("order", "flush-after-all"))
            params = PocParams(
                num_reads=_require(var, "num_reads", int),
                num_aggr_acts=int(var.get("num_aggr_acts", 2)),
                num_iter=int(var.get("num_iter", 64)),
                order=order,
                dummy_rows=int(var.get("dummy_rows", 8)),
                victim_rows=tuple(spec.get("victim_rows", [row_count // 2])),
                dummy_row_base=int(spec.get("dummy_row_base", 4)),
            )
            aggressors = {v + d for v in params.victim_rows for d in (-1, 1)}
            pattern = CHECKERBOARD.with_aggressors(aggressors)
            bank = Bank(profile, mat, timing, pattern,
                        temperature=temperature, sidedness="double")
            trr = TrrSampler(TrrConfig(
                float(trr_block.get("sample_rate", 0.2)),
                int(trr_block.get("table_size", 1)),
                seed))
            trace = gen_poc(params, timing=timing)
            result = replay(bank, trace, trr,
                            refresh_interval=refresh_interval,
                            strict_jedec=strict_jedec)
            _write(out_dir, f"flips-{label}-{seed}.csv",
                   flip_report_csv(result.flips))
            lines.append(f"{label},{params.num_reads},{order.value},"
                         f"{len(result.flipped_rows)},{len(result.flips)}")
    _write(out_dir, "poc_summary.csv", "\n".join(lines) + "\n")
    return {"variants": len(variants)}


def run_mitigation_eval(spec: dict, profile: DeviceProfile, out_dir: Path,
                        strict_jedec: bool) -> dict:
    timing = TimingParams()
    temperature = spec.get("temperature")
    sidedness = spec.get("sidedness", "single")
    row_count = int(spec.get("row_count", 16))
    cells = int(spec.get("cells_per_row", 64))
    block = _require(spec, "mitigation", dict)
    attack_t_on = float(spec.get("attack_t_on_ns", timing.t_ron_max_jedec))
    meta: dict = {}
    lines = ["trace,seed,mitigated_flips,unmitigated_flips"]
    for seed in spec["seeds"]:
        mat = materialize_rows(profile, row_count, cells, seed)
        agg = row_count // 2
        traces = {"long-open": gen_hammer(
            [agg], "single",
            int(spec.get("attack_activations", 256)), attack_t_on, timing)}
        for i, t in enumerate(handcrafted_worst_cases(
                [agg], timing.t_refi, profile.base_threshold, timing)):
            traces[f"worst-{i}"] = t
        for name, trace in traces.items():
            mit, cap, mit_meta = _mitigation_from_spec(
                dict(block, **({"rng_seed": seed}
                               if block.get("type") == "para" else {})),
                profile, timing, sidedness, temperature)
            meta.setdefault("mitigation", mit_meta)
            bank = Bank(profile, mat, timing, CHECKERBOARD,
                        temperature=temperature, sidedness=sidedness)
            mitigated = replay(bank, trace, mit, t_on_cap=cap,
                               strict_jedec=strict_jedec)
            bank = Bank(profile, mat, timing, CHECKERBOARD,
                        temperature=temperature, sidedness=sidedness)
            bare = replay(bank, trace, None, strict_jedec=strict_jedec)
            lines.append(f"{name},{seed},{len(mitigated.flips)},"
                         f"{len(bare.flips)}")
    _write(out_dir, "safety.csv", "\n".join(lines) + "\n")

    traffic_block = spec.get("traffic")
    if traffic_block is not None and block.get("adaptation") is not None:
        cap = float(block["adaptation"]["t_on_cap_ns"])
        over_lines = ["seed,t_on_cap_ns,overhead"]
        for seed in spec["seeds"]:
            requests = gen_random_traffic(
                int(traffic_block.get("row_count", 256)),
                float(traffic_block.get("request_rate_per_ns", 1 / 60)),
                float(traffic_block.get("duration_ns", 1e7)),
                float(traffic_block.get("locality", 0.9)), seed)
            res = measure_overhead(requests, cap, timing)
            over_lines.append(f"{seed},{cap:.0f},{res.overhead:.8f}")
        _write(out_dir, "slowdown.csv", "\n".join(over_lines) + "\n")
    return meta


def run_overhead(spec: dict, profile: DeviceProfile, out_dir: Path) -> dict:
    timing = TimingParams()
    caps = [float(c) for c in _require(spec, "t_on_caps_ns", list)]
    row_count = int(spec.get("row_count", 256))
    rate = float(spec.get("request_rate_per_ns", 1 / 60))
    duration = float(spec.get("duration_ns", 1e7))
    locality = float(spec.get("locality", 0.9))
    per_cap: dict[float, list[float]] = {c: [] for c in sorted(caps)}
    for seed in spec["seeds"]:
        requests = gen_random_traffic(row_count, rate, duration, locality, seed)
        results = overhead_sweep(requests, caps, timing)
        _write(out_dir, f"overhead-{seed}.csv", overhead_csv(results))
        for res in results:
            per_cap[res.t_on_cap].append(res.overhead)
    lines = ["t_on_cap_ns,mean_overhead"]
    for cap, vals in per_cap.items():
        lines.append(f"{cap:.0f},{float(np.mean(vals)):.8f}")
    _write(out_dir, "overhead.csv", "\n".join(lines) + "\n")
    return {"caps": len(caps)}


def run_overlap(spec: dict, profile: DeviceProfile, out_dir: Path) -> dict:
    timing = TimingParams()
    temperature = spec.get("temperature")
    row_count = int(spec.get("row_count", 1024))
    cells = int(spec.get("cells_per_row", 1024))
    press_t_on = float(spec.get("press_t_on_ns", timing.t_refi))
    wait = float(spec.get("retention_wait_ns", 4e9))
    for seed in spec["seeds"]:
        report = run_overlap_experiment(profile, row_count, cells, seed,
                                        temperature, press_t_on, wait, timing)
        _write(out_dir, f"overlap-{seed}.csv", report.csv())
    return {"cells": row_count * cells}


def run_crossover(spec: dict, profile: DeviceProfile, out_dir: Path) -> dict:
    temperature = spec.get("temperature")
    samples = int(spec.get("samples", 512))
    rng = spec.get("t_on_range_ns")
    t_on_range = (float(rng[0]), float(rng[1])) if rng else None
    result = crossover_scan(profile, t_on_range, temperature, samples)
    _write(out_dir, "crossover.csv", result.csv())
    return {"sign_changes": result.sign_changes}


# ---------------------------------------------------------------------------


def run_experiment(spec_path: str, threads: int = 1,
                   strict_jedec: bool = False) -> int:
    try:
        raw = Path(spec_path).read_text()
    except OSError as exc:
        print(f"error: cannot read spec file: {exc}", file=sys.stderr)
        return 1
    try:
        spec = validate_spec(json.loads(raw))
        profile = _resolve_profile(spec["profile"])
    except (json.JSONDecodeError, SpecError) as exc:
        print(f"error: invalid spec: {exc}", file=sys.stderr)
        return 1

    out_dir = _output_dir(spec)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        kind = spec["kind"]
        if kind == "sweep":
            extra = run_sweep(spec, profile, out_dir, threads)
        elif kind == "poc":
            extra = run_poc(spec, profile, out_dir, strict_jedec)
        elif kind == "mitigation-eval":
            extra = run_mitigation_eval(spec, profile, out_dir, strict_jedec)
        elif kind == "overhead":
            extra = run_overhead(spec, profile, out_dir)
        elif kind == "overlap":
            extra = run_overlap(spec, profile, out_dir)
        else:
            extra = run_crossover(spec, profile, out_dir)
        metadata = {
            "schema": SPEC_SCHEMA,
            "version": __version__,
            "spec": spec,
            "profile": profile_to_dict(profile),
            "threads": threads,
            "strict_jedec": strict_jedec,
            "result": extra,
        }
        _write(out_dir, "metadata.json",
               json.dumps(metadata, indent=2, sort_keys=True) + "\n")
    except SpecError as exc:
        print(f"error: invalid spec: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure after validation
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote artifacts to {out_dir}")
    return 0


def cmd_profiles(args: argparse.Namespace) -> int:
    names = sorted(builtin_profiles())
    if args.profiles_cmd == "list":
        for name in names:
            print(name)
        return 0
    name = args.name
    if name not in names:
        print(f"error: unknown profile {name!r}", file=sys.stderr)
        return 1
    print(json.dumps(profile_to_dict(get_profile(name)), indent=2,
                     sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rowsim",
        description="Trace-driven DRAM read-disturbance simulator")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    run_p = sub.add_parser("run", help="run an experiment spec")
    run_p.add_argument("spec", help="path to the experiment spec (JSON)")
    run_p.add_argument("--threads", type=int, default=1,
                       help="parallel probe workers for sweeps")
    run_p.add_argument("--strict-jedec", action="store_true",
                       help="treat JEDEC open-time violations as errors")

    prof_p = sub.add_parser("profiles", help="builtin device profiles")
    prof_sub = prof_p.add_subparsers(dest="profiles_cmd", required=True)
    prof_sub.add_parser("list", help="list builtin profile names")
    show_p = prof_sub.add_parser("show", help="print a profile as JSON")
    show_p.add_argument("name")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.cmd == "run":
        return run_experiment(args.spec, args.threads, args.strict_jedec)
    return cmd_profiles(args)


if __name__ == "__main__":
    sys.exit(main())
