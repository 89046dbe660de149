"""Command-line front end: validate scenarios, run single simulations,
compare policies over seed sweeps, fit energy-model parameters, and export
tidy plot data.

Exit codes: 0 success, 2 input/validation error (file missing or a scenario
field out of range, reported as one JSON line on stderr naming the field),
3 run abort. Output files are deterministic for identical inputs: keys are
sorted, floats use repr, and nothing records wall-clock time. Every output
embeds the scenario hash, seed, and schema version.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np

from ecolane.energy import EnergyModelParams, PowerSample, fit_params, stage_cost
from ecolane.harness import DT, RunResult, run
from ecolane.world import SCHEMA_VERSION, ScenarioConfig, ScenarioError, load_scenario, scenario_hash


def _fail(code: int, kind: str, **fields) -> int:
    sys.stderr.write(json.dumps({"error": kind, **fields}, sort_keys=True) + "\n")
    return code


def _load(path: str) -> ScenarioConfig:
    if not Path(path).is_file():
        raise FileNotFoundError(path)
    return load_scenario(path)


def _provenance(cfg_hash: str, seed: int) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "scenario_hash": cfg_hash,
        "seed": seed,
    }


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


TRACE_COLUMNS = (
    "t", "s", "v", "e_y", "e_psi", "lane", "target_lane",
    "torque", "kappa", "power", "phase", "decisions", "in_lc", "front_gap",
)


def _write_trace(path: Path, result: RunResult, cfg_hash: str, seed: int) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# scenario_hash={cfg_hash} seed={seed} "
                 f"policy={result.metrics.policy} schema_version={SCHEMA_VERSION}\n")
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for row in result.trace:
            writer.writerow(
                ["" if row[c] is None else (int(row[c]) if c == "in_lc" else row[c])
                 for c in TRACE_COLUMNS]
            )


def _run_one(scenario: ScenarioConfig, policy: str, seed: Optional[int],
             collect_trace: bool = True) -> tuple[ScenarioConfig, RunResult]:
    if seed is not None:
        scenario = replace(scenario, rng_seed=seed)
    return scenario, run(scenario, policy, collect_trace=collect_trace)


def cmd_validate(args) -> int:
    scenario = _load(args.scenario)
    print(json.dumps({
        "valid": True,
        "lights": len(scenario.lights),
        "npcs": len(scenario.npc_spawns),
        "route_length_m": scenario.road.route_length,
        **_provenance(scenario_hash(args.scenario), scenario.rng_seed),
    }, sort_keys=True))
    return 0


def cmd_run(args) -> int:
    cfg_hash = scenario_hash(args.scenario) if Path(args.scenario).is_file() else ""
    scenario, result = _run_one(_load(args.scenario), args.policy, args.seed)
    out = Path(args.out)
    seed = scenario.rng_seed
    stem = f"{args.policy}_seed{seed}"
    payload = {**result.metrics.to_dict(), **_provenance(cfg_hash, seed),
               "events": result.events}
    _write_json(out / f"metrics_{stem}.json", payload)
    _write_trace(out / f"trace_{stem}.csv", result, cfg_hash, seed)
    print(json.dumps(payload, sort_keys=True))
    if not result.metrics.completed:
        return _fail(3, "run-abort", reason="route not completed within run_duration")
    return 0


def _mean_block(metrics_list) -> dict:
    done = [m for m in metrics_list if m.completed]
    block = {"n_runs": len(metrics_list), "n_completed": len(done)}
    if done:
        block["energy_j"] = float(np.mean([m.energy_j for m in done]))
        block["travel_time_s"] = float(np.mean([m.travel_time for m in done]))
        block["stops"] = float(np.mean([m.stops for m in done]))
        block["mpge"] = float(np.mean([m.mpge for m in done if m.mpge is not None])) \
            if any(m.mpge is not None for m in done) else None
    return block


def _pair_report(base, prop) -> dict:
    report = {"energy_saving_pct": None, "travel_time_change_pct": None}
    if base.completed and prop.completed:
        if base.energy_j > 0:
            report["energy_saving_pct"] = (base.energy_j - prop.energy_j) / base.energy_j * 100.0
        if base.travel_time:
            report["travel_time_change_pct"] = (
                (base.travel_time - prop.travel_time) / base.travel_time * 100.0
            )
    return report


def cmd_compare(args) -> int:
    if args.reps < 1:
        return _fail(2, "bad-argument", field="--reps", reason="must be >= 1")
    scenario = _load(args.scenario)
    cfg_hash = scenario_hash(args.scenario)
    base_seed = scenario.rng_seed if args.seed is None else args.seed
    out = Path(args.out)

    rows = []
    per_policy = {"baseline": [], "proposed": []}
    for seed in range(base_seed, base_seed + args.reps):
        row = {"seed": seed, "trace_files": {}}
        for policy in ("baseline", "proposed"):
            sc, result = _run_one(scenario, policy, seed)
            trace_path = out / f"trace_{policy}_seed{seed}.csv"
            _write_trace(trace_path, result, cfg_hash, seed)
            row[policy] = result.metrics.to_dict()
            row["trace_files"][policy] = trace_path.name
            per_policy[policy].append(result.metrics)
        row.update(_pair_report(per_policy["baseline"][-1], per_policy["proposed"][-1]))
        rows.append(row)

    mean = {p: _mean_block(ms) for p, ms in per_policy.items()}
    report = {"energy_saving_pct": None, "travel_time_change_pct": None}
    mb, mp = mean["baseline"], mean["proposed"]
    if mb["n_completed"] == mb["n_runs"] and mp["n_completed"] == mp["n_runs"]:
        if mb.get("energy_j", 0) > 0:
            report["energy_saving_pct"] = (mb["energy_j"] - mp["energy_j"]) / mb["energy_j"] * 100.0
        if mb.get("travel_time_s"):
            report["travel_time_change_pct"] = (
                (mb["travel_time_s"] - mp["travel_time_s"]) / mb["travel_time_s"] * 100.0
            )

    payload = {
        **_provenance(cfg_hash, base_seed),
        "reps": args.reps,
        "rows": rows,
        "mean": mean,
        "report": report,
    }
    _write_json(out / "compare.json", payload)

    hdr = f"{'seed':>5} {'E_base[kJ]':>11} {'E_prop[kJ]':>11} {'save%':>7} " \
          f"{'t_base[s]':>10} {'t_prop[s]':>10} {'stops b/p':>10} {'mpge b/p':>12}"
    print(hdr)
    for row in rows:
        b, p = row["baseline"], row["proposed"]
        save = row["energy_saving_pct"]
        print(f"{row['seed']:>5} {b['energy_j'] / 1e3:>11.1f} {p['energy_j'] / 1e3:>11.1f} "
              f"{'--' if save is None else format(save, '.1f'):>7} "
              f"{_fmt(b['travel_time']):>10} {_fmt(p['travel_time']):>10} "
              f"{b['stops']:>4}/{p['stops']:<5} "
              f"{_fmt(b['mpge']):>5}/{_fmt(p['mpge']):<6}")
    save = report["energy_saving_pct"]
    print(f"{'mean':>5} {mb.get('energy_j', 0) / 1e3:>11.1f} {mp.get('energy_j', 0) / 1e3:>11.1f} "
          f"{'--' if save is None else format(save, '.1f'):>7} "
          f"{_fmt(mb.get('travel_time_s')):>10} {_fmt(mp.get('travel_time_s')):>10} "
          f"{_fmt(mb.get('stops')):>4}/{_fmt(mp.get('stops')):<5} "
          f"{_fmt(mb.get('mpge')):>5}/{_fmt(mp.get('mpge')):<6}")
    return 0


def _fmt(value) -> str:
    return "--" if value is None else f"{value:.1f}"


def _read_samples(path: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Samples are CSV with a torque,speed,power header or a JSON list of
    [torque, speed, power] triples."""
    text = Path(path).read_text()
    if text.lstrip().startswith("["):
        arr = np.asarray(json.loads(text), dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ScenarioError("samples", "expected rows of [torque, speed, power]")
        return arr[:, 0], arr[:, 1], arr[:, 2]
    reader = csv.DictReader(
        line for line in text.splitlines() if not line.startswith("#")
    )
    cols = {"torque": [], "speed": [], "power": []}
    for record in reader:
        try:
            for key in cols:
                cols[key].append(float(record[key]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError("samples", "need numeric torque,speed,power columns") from exc
    if not cols["torque"]:
        raise ScenarioError("samples", "no rows")
    return tuple(np.asarray(cols[k]) for k in ("torque", "speed", "power"))


def cmd_fit_energy(args) -> int:
    if not Path(args.samples).is_file():
        raise FileNotFoundError(args.samples)
    torque, speed, power = _read_samples(args.samples)
    params = fit_params([PowerSample(*row) for row in zip(torque, speed, power)])
    residual = power - stage_cost(params, torque, speed)
    payload = {
        "c1": params.c1,
        "c2": params.c2,
        "n_samples": int(torque.size),
        "residual_rms_w": float(np.sqrt(np.mean(residual ** 2))),
    }
    if args.out:
        _write_json(Path(args.out), payload)
    print(json.dumps(payload, sort_keys=True))
    return 0


def cmd_export_plot(args) -> int:
    cfg_hash = scenario_hash(args.scenario) if Path(args.scenario).is_file() else ""
    scenario, result = _run_one(_load(args.scenario), args.policy, args.seed)
    seed = scenario.rng_seed
    params = EnergyModelParams(**scenario.planner.get("energy", {}))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"plot_{args.policy}_seed{seed}.csv"
    with open(path, "w", newline="") as fh:
        fh.write(f"# scenario_hash={cfg_hash} seed={seed} "
                 f"policy={args.policy} schema_version={SCHEMA_VERSION}\n")
        writer = csv.writer(fh)
        writer.writerow(["distance_m", "speed_mps", "cum_energy_j"])
        s0 = scenario.ego_initial.s
        cum = 0.0
        for row in result.trace:
            cum += max(stage_cost(params, row["torque"], row["v"]), 0.0) * DT
            writer.writerow([row["s"] - s0, row["v"], cum])
    print(json.dumps({"written": path.name, **_provenance(cfg_hash, seed)}, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ecolane",
        description="SPaT-informed lane selection and trajectory planning simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scenario file against the schema")
    p.add_argument("--scenario", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="simulate one policy on a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--policy", choices=("baseline", "proposed"), default="proposed")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run both policies over a seed sweep")
    p.add_argument("--scenario", required=True)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--seed", type=int, default=None, help="sweep base seed")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("fit-energy", help="fit power-model coefficients to samples")
    p.add_argument("--samples", required=True, help="CSV or JSON of torque,speed,power")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_fit_energy)

    p = sub.add_parser("export-plot", help="export tidy speed/energy-vs-distance data")
    p.add_argument("--scenario", required=True)
    p.add_argument("--policy", choices=("baseline", "proposed"), default="proposed")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_export_plot)

    return parser


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        return _fail(2, "file-not-found", path=str(exc))
    except ScenarioError as exc:
        return _fail(2, "schema", field=exc.field, reason=exc.reason)
    except ValueError as exc:
        return _fail(2, "bad-input", reason=str(exc))
    except Exception as exc:  # planner/runtime failures
        return _fail(3, "run-abort", reason=f"{type(exc).__name__}: {exc}")


if __name__ == "__main__":
    sys.exit(main())
