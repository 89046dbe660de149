"""CLI behaviour: exit codes, the one-line JSON error contract on stderr,
output file layout, and byte-level determinism of repeated invocations.

Everything goes through main(argv) so the argparse wiring and the exception
mapping are exercised together. Scenarios are written to tmp_path; a short
light-free road keeps each simulated run around a second.
"""

import json
from pathlib import Path

import numpy as np
import pytest

from ecolane.cli import main
from ecolane.energy import C1_DEFAULT, C2_DEFAULT


def small_scenario_dict(**overrides):
    cfg = {
        "schema_version": 1,
        "road": {
            "lane_count": 2,
            "lane_width": 3.5,
            "route_length": 150.0,
            "curvature": 0.0,
            "legal_speed": 13.4,
        },
        "lights": [],
        "ego": {"s": 0.0, "v": 13.0, "lane": 0},
        "npcs": [],
        "rng_seed": 1,
        "run_duration": 30.0,
        "planner": {},
    }
    cfg.update(overrides)
    return cfg


def write_scenario(tmp_path, name="scene.json", **overrides):
    path = tmp_path / name
    path.write_text(json.dumps(small_scenario_dict(**overrides)))
    return str(path)


def stderr_payload(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1, err
    return json.loads(err[0])


def stdout_payload(capsys):
    return json.loads(capsys.readouterr().out.strip().splitlines()[-1])


# ---------------------------------------------------------------- validate

def test_validate_ok(tmp_path, capsys):
    path = write_scenario(tmp_path)
    assert main(["validate", "--scenario", path]) == 0
    out = stdout_payload(capsys)
    assert out["valid"] is True
    assert out["lights"] == 0 and out["npcs"] == 0
    assert out["route_length_m"] == 150.0
    assert out["schema_version"] == 1
    assert out["seed"] == 1
    # content hash: 16 lowercase hex chars
    assert len(out["scenario_hash"]) == 16
    int(out["scenario_hash"], 16)


def test_validate_missing_file(tmp_path, capsys):
    missing = str(tmp_path / "nope.json")
    assert main(["validate", "--scenario", missing]) == 2
    err = stderr_payload(capsys)
    assert err["error"] == "file-not-found"
    assert "nope.json" in err["path"]


def test_validate_not_json(tmp_path, capsys):
    path = tmp_path / "garbage.json"
    path.write_text("this is not json {")
    assert main(["validate", "--scenario", str(path)]) == 2
    err = stderr_payload(capsys)
    assert err["error"] == "schema"
    assert err["field"] == "<file>"


def test_validate_schema_error_names_field(tmp_path, capsys):
    cfg = small_scenario_dict()
    cfg["road"]["lane_width"] = -1.0
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(cfg))
    assert main(["validate", "--scenario", str(path)]) == 2
    err = stderr_payload(capsys)
    assert err["error"] == "schema"
    assert err["field"] == "road.lane_width"
    assert err["reason"]


def test_validate_missing_required_field(tmp_path, capsys):
    cfg = small_scenario_dict()
    del cfg["ego"]
    path = tmp_path / "noego.json"
    path.write_text(json.dumps(cfg))
    assert main(["validate", "--scenario", str(path)]) == 2
    err = stderr_payload(capsys)
    assert err["field"] == "ego"
    assert err["reason"] == "missing required field"


def test_validate_ego_lane_out_of_range(tmp_path, capsys):
    cfg = small_scenario_dict()
    cfg["ego"]["lane"] = 5
    path = tmp_path / "lane5.json"
    path.write_text(json.dumps(cfg))
    assert main(["validate", "--scenario", str(path)]) == 2
    assert stderr_payload(capsys)["field"] == "ego.lane"


# --------------------------------------------------------------------- run

def test_run_writes_metrics_and_trace(tmp_path, capsys):
    path = write_scenario(tmp_path)
    out = tmp_path / "out"
    assert main(["run", "--scenario", path, "--policy", "proposed",
                 "--out", str(out)]) == 0

    metrics_path = out / "metrics_proposed_seed1.json"
    trace_path = out / "trace_proposed_seed1.csv"
    assert metrics_path.is_file() and trace_path.is_file()

    metrics = json.loads(metrics_path.read_text())
    assert metrics["policy"] == "proposed"
    assert metrics["completed"] is True
    assert metrics["energy_j"] > 0
    assert metrics["schema_version"] == 1
    assert metrics["seed"] == 1
    assert isinstance(metrics["events"], list)

    lines = trace_path.read_text().splitlines()
    assert lines[0].startswith("# scenario_hash=")
    assert "seed=1" in lines[0] and "policy=proposed" in lines[0]
    assert lines[1] == ("t,s,v,e_y,e_psi,lane,target_lane,torque,kappa,"
                        "power,phase,decisions,in_lc,front_gap")
    # one row per simulated tick
    assert len(lines) - 2 == round(metrics["sim_time"] / 0.1)

    # the stdout line mirrors the metrics file
    assert stdout_payload(capsys)["energy_j"] == metrics["energy_j"]


def test_run_seed_override_names_outputs(tmp_path, capsys):
    path = write_scenario(tmp_path)
    out = tmp_path / "out"
    assert main(["run", "--scenario", path, "--policy", "baseline",
                 "--seed", "42", "--out", str(out)]) == 0
    assert (out / "metrics_baseline_seed42.json").is_file()
    assert (out / "trace_baseline_seed42.csv").is_file()
    assert json.loads((out / "metrics_baseline_seed42.json").read_text())["seed"] == 42
    capsys.readouterr()


def test_run_byte_identical_across_invocations(tmp_path, capsys):
    path = write_scenario(tmp_path)
    for d in ("a", "b"):
        assert main(["run", "--scenario", path, "--out", str(tmp_path / d)]) == 0
    capsys.readouterr()
    for name in ("metrics_proposed_seed1.json", "trace_proposed_seed1.csv"):
        blob_a = (tmp_path / "a" / name).read_bytes()
        blob_b = (tmp_path / "b" / name).read_bytes()
        assert blob_a == blob_b, name


def test_run_abort_exits_3(tmp_path, capsys):
    # 3 s of budget cannot cover 150 m
    path = write_scenario(tmp_path, run_duration=3.0)
    out = tmp_path / "out"
    assert main(["run", "--scenario", path, "--out", str(out)]) == 3
    err = stderr_payload(capsys)
    assert err["error"] == "run-abort"
    # partial outputs are still written for inspection
    metrics = json.loads((out / "metrics_proposed_seed1.json").read_text())
    assert metrics["completed"] is False


def test_run_missing_scenario_exits_2(tmp_path, capsys):
    assert main(["run", "--scenario", str(tmp_path / "gone.json"),
                 "--out", str(tmp_path / "out")]) == 2
    assert stderr_payload(capsys)["error"] == "file-not-found"


# ----------------------------------------------------------------- compare

def test_compare_single_rep(tmp_path, capsys):
    path = write_scenario(tmp_path)
    out = tmp_path / "cmp"
    assert main(["compare", "--scenario", path, "--reps", "1",
                 "--out", str(out)]) == 0
    table = capsys.readouterr().out
    assert "E_base[kJ]" in table and "mean" in table

    payload = json.loads((out / "compare.json").read_text())
    assert payload["reps"] == 1
    assert payload["schema_version"] == 1
    assert len(payload["rows"]) == 1

    row = payload["rows"][0]
    assert row["seed"] == payload["seed"] == 1
    assert row["baseline"]["policy"] == "baseline"
    assert row["proposed"]["policy"] == "proposed"
    assert "energy_saving_pct" in row

    for policy in ("baseline", "proposed"):
        assert payload["mean"][policy]["n_runs"] == 1
        assert payload["mean"][policy]["n_completed"] == 1
        # single rep: the mean equals the row value
        assert payload["mean"][policy]["energy_j"] == pytest.approx(
            row[policy]["energy_j"], rel=1e-12)
        assert (out / row["trace_files"][policy]).is_file()

    assert "energy_saving_pct" in payload["report"]
    assert "travel_time_change_pct" in payload["report"]


def test_compare_sweep_seed_base(tmp_path, capsys):
    path = write_scenario(tmp_path)
    out = tmp_path / "cmp"
    assert main(["compare", "--scenario", path, "--reps", "2",
                 "--seed", "10", "--out", str(out)]) == 0
    capsys.readouterr()
    payload = json.loads((out / "compare.json").read_text())
    assert [r["seed"] for r in payload["rows"]] == [10, 11]
    assert (out / "trace_baseline_seed11.csv").is_file()
    assert (out / "trace_proposed_seed10.csv").is_file()


def test_compare_rejects_nonpositive_reps(tmp_path, capsys):
    path = write_scenario(tmp_path)
    assert main(["compare", "--scenario", path, "--reps", "0",
                 "--out", str(tmp_path / "x")]) == 2
    err = stderr_payload(capsys)
    assert err["error"] == "bad-argument"
    assert err["field"] == "--reps"


def test_compare_byte_identical(tmp_path, capsys):
    path = write_scenario(tmp_path)
    for d in ("c1", "c2"):
        assert main(["compare", "--scenario", path, "--reps", "1",
                     "--out", str(tmp_path / d)]) == 0
    capsys.readouterr()
    names = [p.name for p in sorted((tmp_path / "c1").iterdir())]
    assert names == [p.name for p in sorted((tmp_path / "c2").iterdir())]
    for name in names:
        assert (tmp_path / "c1" / name).read_bytes() == \
            (tmp_path / "c2" / name).read_bytes(), name


# -------------------------------------------------------------- fit-energy

def fit_rows(rng, n):
    torque = rng.uniform(-300.0, 600.0, n)
    speed = rng.uniform(0.5, 25.0, n)
    power = C1_DEFAULT * torque * speed + C2_DEFAULT * speed
    return torque, speed, power


def test_fit_energy_from_csv(tmp_path, capsys):
    torque, speed, power = fit_rows(np.random.default_rng(0), 40)
    lines = ["torque,speed,power"]
    lines += [f"{float(t)!r},{float(s)!r},{float(p)!r}"
              for t, s, p in zip(torque, speed, power)]
    samples = tmp_path / "samples.csv"
    samples.write_text("\n".join(lines) + "\n")

    out = tmp_path / "fit.json"
    assert main(["fit-energy", "--samples", str(samples), "--out", str(out)]) == 0
    payload = stdout_payload(capsys)
    assert payload["c1"] == pytest.approx(C1_DEFAULT, rel=1e-9)
    assert payload["c2"] == pytest.approx(C2_DEFAULT, rel=1e-9)
    assert payload["n_samples"] == 40
    assert payload["residual_rms_w"] == pytest.approx(0.0, abs=1e-6)
    assert json.loads(out.read_text()) == payload


def test_fit_energy_from_json(tmp_path, capsys):
    torque, speed, power = fit_rows(np.random.default_rng(1), 25)
    samples = tmp_path / "samples.json"
    samples.write_text(json.dumps(
        [[t, s, p] for t, s, p in zip(torque, speed, power)]))
    assert main(["fit-energy", "--samples", str(samples)]) == 0
    payload = stdout_payload(capsys)
    assert payload["c1"] == pytest.approx(C1_DEFAULT, rel=1e-9)
    assert payload["c2"] == pytest.approx(C2_DEFAULT, rel=1e-9)


def test_fit_energy_missing_file(tmp_path, capsys):
    assert main(["fit-energy", "--samples", str(tmp_path / "no.csv")]) == 2
    assert stderr_payload(capsys)["error"] == "file-not-found"


def test_fit_energy_bad_columns(tmp_path, capsys):
    samples = tmp_path / "cols.csv"
    samples.write_text("torque,speed\n100,10\n200,12\n")
    assert main(["fit-energy", "--samples", str(samples)]) == 2
    err = stderr_payload(capsys)
    assert err["error"] == "schema"
    assert err["field"] == "samples"


def test_fit_energy_degenerate_exits_2(tmp_path, capsys):
    # one sample is not enough to identify two coefficients
    samples = tmp_path / "one.csv"
    samples.write_text("torque,speed,power\n100,10,19692.3\n")
    assert main(["fit-energy", "--samples", str(samples)]) == 2
    assert stderr_payload(capsys)["error"] == "bad-input"


def test_fit_energy_bad_json_shape(tmp_path, capsys):
    samples = tmp_path / "pairs.json"
    samples.write_text(json.dumps([[1.0, 2.0], [3.0, 4.0]]))
    assert main(["fit-energy", "--samples", str(samples)]) == 2
    assert stderr_payload(capsys)["error"] == "schema"


# ------------------------------------------------------------- export-plot

def test_export_plot(tmp_path, capsys):
    path = write_scenario(tmp_path)
    out = tmp_path / "plots"
    assert main(["export-plot", "--scenario", path, "--policy", "proposed",
                 "--out", str(out)]) == 0
    payload = stdout_payload(capsys)
    plot = out / "plot_proposed_seed1.csv"
    assert payload["written"] == plot.name
    lines = plot.read_text().splitlines()
    assert lines[0].startswith("# scenario_hash=")
    assert lines[1] == "distance_m,speed_mps,cum_energy_j"

    rows = [tuple(float(x) for x in line.split(",")) for line in lines[2:]]
    assert rows[0][0] == 0.0
    dist = [r[0] for r in rows]
    cum = [r[2] for r in rows]
    assert all(b >= a for a, b in zip(dist, dist[1:]))
    assert all(b >= a for a, b in zip(cum, cum[1:]))
    assert cum[-1] > 0.0


def test_export_plot_energy_matches_run_metrics(tmp_path, capsys):
    path = write_scenario(tmp_path)
    assert main(["export-plot", "--scenario", path, "--out",
                 str(tmp_path / "p")]) == 0
    assert main(["run", "--scenario", path, "--out", str(tmp_path / "r")]) == 0
    capsys.readouterr()
    last = (tmp_path / "p" / "plot_proposed_seed1.csv").read_text().splitlines()[-1]
    cum_energy = float(last.split(",")[2])
    metrics = json.loads((tmp_path / "r" / "metrics_proposed_seed1.json").read_text())
    assert cum_energy == pytest.approx(metrics["energy_j"], rel=1e-9)
