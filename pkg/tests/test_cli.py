import json
import math
import os
import subprocess
import sys
from pathlib import Path

import jsonschema
import pytest
import yaml

from mrqsim.cli import main
from mrqsim.cli.results import load_schema
from mrqsim.cli.scenario import scenario_json_schema

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"
COMMANDS = ("field", "gate", "purify", "bell", "t1had")

SMALL = {
    "name": "small",
    "magnet": {
        "b0": "3 T",
        "main_gradient": {"slope": "10 mT/m"},
        "sites": [{"index": 1, "z_center": "0.5 m", "half_width": "5 mm",
                   "reverse_gradient": {"slope": "10 mT/m"}}],
    },
    "ensemble": {"size": 2000, "t1": "1 s", "t2": "0.1 s", "spread": "50 Hz", "seed": 3},
    "purify": {"ledger": {"epsilon0": 0.25, "factor": 1e-6, "steps": 3},
               "compensation": {"shifts": ["0 rad/s", "10 rad/s", "20 rad/s",
                                           "40 rad/s", "80 rad/s"]}},
    "t1had": {"coincidence": 0.693},
    "output": {"sample_dt": "100 ms"},
}


def write_yaml(tmp_path, data, name="s.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data, sort_keys=False))
    return p


def run(capsys, *argv):
    code = main(list(map(str, argv)))
    out, err = capsys.readouterr()
    return code, out, err


def ok(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


def failure(capsys, expected_code, *argv):
    code, out, err = run(capsys, *argv)
    assert code == expected_code
    assert out == ""
    rec = json.loads(err)
    jsonschema.validate(rec, load_schema("error"))
    assert rec["exit_code"] == expected_code
    return rec


# -- every command on a small scenario, validated against its schema --------------

@pytest.mark.parametrize("command", COMMANDS)
def test_command_output_matches_published_schema(command, tmp_path, capsys):
    scen = write_yaml(tmp_path, SMALL)
    out_dir = tmp_path / "out"
    doc = ok(capsys, command, "--scenario", scen, "--out", out_dir)
    jsonschema.validate(doc, load_schema(command))
    assert doc["schema"] == "mrqsim.run/1"
    assert doc["command"] == command
    assert doc["input_digest"].startswith("sha256:")
    assert doc["seed"] == 3
    on_disk = json.loads((out_dir / f"{command}.json").read_text())
    assert on_disk == doc
    for name in doc["artifacts"]:
        assert (out_dir / name).is_file()


def test_published_scenario_schema_is_current():
    text = (ROOT / "src/mrqsim/cli/schemas/scenario.schema.json").read_text()
    assert json.loads(text) == json.loads(json.dumps(scenario_json_schema(), allow_nan=False))


@pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.yaml")), ids=lambda p: p.stem)
def test_shipped_scenarios_validate_against_scenario_schema(path):
    jsonschema.validate(yaml.safe_load(path.read_text()), load_schema("scenario"))


def test_seed_override_changes_digest(tmp_path, capsys):
    scen = write_yaml(tmp_path, SMALL)
    a = ok(capsys, "t1had", "--scenario", scen)
    b = ok(capsys, "t1had", "--scenario", scen, "--seed", 99)
    assert b["seed"] == 99
    assert a["input_digest"] != b["input_digest"]


# -- field ---------------------------------------------------------------------------

def test_field_28_tesla(capsys):
    doc = ok(capsys, "field", "--scenario", SCENARIOS / "ultra_high_field.yaml")
    f = doc["result"]["center_frequency_hz"]
    assert abs(f - 1.192e9) / 1.192e9 < 1e-3
    assert abs(f - 1.2e9) / 1.2e9 < 0.01


def test_field_canceling_gradients_have_zero_spread(capsys):
    doc = ok(capsys, "field", "--scenario", SCENARIOS / "default.yaml")
    sites = doc["result"]["report"]["sites"]
    assert len(sites) == 2
    assert all(s["frequency_spread_rad_s"] == 0.0 for s in sites)
    assert all(s["qubit_grade"] for s in sites)


def test_field_two_site_separation(tmp_path, capsys):
    data = {"name": "sep", "magnet": {
        "b0": "3 T", "main_gradient": {"slope": "0 T/m"},
        "sites": [{"index": 1, "z_center": "0 m", "half_width": "1 cm",
                   "reverse_gradient": {"slope": "0 T/m", "offset": "-5 mT"}},
                  {"index": 2, "z_center": "0.1 m", "half_width": "1 cm",
                   "reverse_gradient": {"slope": "0 T/m", "offset": "-10 mT"}}]}}
    doc = ok(capsys, "field", "--scenario", write_yaml(tmp_path, data))
    s1 = doc["result"]["report"]["sites"][0]
    gamma = doc["result"]["gamma_rad_s_T"]
    assert s1["neighbor_separation_next_rad_s"] == pytest.approx(gamma * 0.005, rel=1e-9)


def test_field_without_magnet_is_config_error(tmp_path, capsys):
    rec = failure(capsys, 2, "field", "--scenario", write_yaml(tmp_path, {"name": "x"}))
    assert rec["key"] == "magnet"


# -- gate, purify, bell, t1had ---------------------------------------------------------

def test_gate_amplitudes(capsys):
    r = ok(capsys, "gate", "--scenario", SCENARIOS / "default.yaml")["result"]["hadamard"]
    h = math.sqrt(0.5)
    assert [complex(*a) for a in r["h0_amplitudes"]] == pytest.approx([h, h], abs=1e-12)
    assert [complex(*a) for a in r["h1_amplitudes"]] == pytest.approx([h, -h], abs=1e-12)
    assert r["canonical_max_deviation"] <= 1e-12


def test_purify_ledger_and_compensation(tmp_path, capsys):
    data = dict(SMALL, purify=dict(SMALL["purify"], ledger={"epsilon0": 0.0,
                                                           "factor": 1e-6, "steps": 3}))
    r = ok(capsys, "purify", "--scenario", write_yaml(tmp_path, data))["result"]
    assert r["ledger"]["final_impure_fraction"] == "1/1000000000000000000"
    assert r["ledger"]["closed_form_exact"] is True
    comp = r["compensation"]
    assert comp["max_abs_phase_change_with_echoes"] <= 1e-9
    assert comp["slope_without_echoes_s"] == pytest.approx(
        comp["expected_slope_without_echoes_s"], rel=1e-9)


def test_purify_open_window_keeps_everything(tmp_path, capsys):
    data = dict(SMALL, purify={"window": "1 pi"})
    r = ok(capsys, "purify", "--scenario", write_yaml(tmp_path, data))["result"]
    assert r["trace"]["cumulative_factor"] == pytest.approx(1.0, abs=1e-12)


def test_bell_default_fidelities(capsys):
    r = ok(capsys, "bell", "--scenario", SCENARIOS / "default.yaml")["result"]
    for rec in r["four_inputs"].values():
        assert rec["fidelity"] >= 1 - 1e-12
        assert rec["substitution_delta"] <= 1e-12
    assert r["assembly_orthonormality_max_deviation"] <= 1e-12


def test_bell_program_error_is_surfaced(tmp_path, capsys):
    data = dict(SMALL, bell={"program": "control=|0>; target=|0>; gates=H,SWAP"})
    rec = failure(capsys, 2, "bell", "--scenario", write_yaml(tmp_path, data))
    assert rec["key"] == "bell.program"
    assert "SWAP" in rec["message"]


def test_t1had_relaxation_scenario_matches_oracle(capsys):
    r = ok(capsys, "t1had", "--scenario", SCENARIOS / "relaxation.yaml")["result"]
    assert r["report"]["mz_coincidence"] == pytest.approx(0.5, abs=1e-3)
    assert r["oracle"]["max_gap"] <= 1e-6


def test_t1had_coarse_oracle_is_invariant_violation(tmp_path, capsys):
    data = yaml.safe_load((SCENARIOS / "relaxation.yaml").read_text())
    data["t1had"]["oracle_steps"] = 10
    rec = failure(capsys, 3, "t1had", "--scenario", write_yaml(tmp_path, data),
                  "--out", tmp_path / "out")
    assert rec["kind"] == "numerical_invariant_violation"
    assert rec["details"]["max_gap"] > 1e-6
    assert not (tmp_path / "out").exists()


def test_t1had_infinite_t1_needs_delay(tmp_path, capsys):
    data = {"name": "inf", "ensemble": {"size": 4, "t1": "inf s", "t2": "inf s"}}
    rec = failure(capsys, 2, "t1had", "--scenario", write_yaml(tmp_path, data))
    assert rec["key"] == "ensemble.t1"
    data["t1had"] = {"delay": "0.693 s"}
    r = ok(capsys, "t1had", "--scenario", write_yaml(tmp_path, data))["result"]
    # no recovery: the two 90y pulses compose to a 180y inversion
    assert r["report"]["final_magnetization"] == pytest.approx([0.0, 0.0, -1.0], abs=1e-12)


# -- configuration errors ------------------------------------------------------------------

@pytest.mark.parametrize("mutate,key,line", [
    (lambda d: d["ensemble"].update(t1="1"), "ensemble.t1", "  t1: "),
    (lambda d: d["ensemble"].update(t1="1 furlong"), "ensemble.t1", "  t1: "),
    (lambda d: d["ensemble"].update(colour="red"), "ensemble.colour", None),
    (lambda d: d["purify"].update(t_a=["2 ms", "3 ms", "2.5 ms", "3 ms"]), "purify.t_a", None),
])
def test_config_errors_carry_key_and_line(mutate, key, line, tmp_path, capsys):
    data = json.loads(json.dumps(SMALL))
    mutate(data)
    out_dir = tmp_path / "out"
    scen = write_yaml(tmp_path, data)
    rec = failure(capsys, 2, "purify", "--scenario", scen, "--out", out_dir)
    assert rec["kind"] == "configuration_error"
    assert rec["key"] == key
    assert isinstance(rec["line"], int)
    if line is not None:
        lines = scen.read_text().splitlines()
        assert lines[rec["line"] - 1].startswith(line)
    assert not out_dir.exists()


def test_timing_violation_message(tmp_path, capsys):
    data = json.loads(json.dumps(SMALL))
    data["purify"]["t_a"] = ["2 ms", "3 ms", "2.5 ms", "3 ms"]
    rec = failure(capsys, 2, "purify", "--scenario", write_yaml(tmp_path, data))
    assert "t_a1 == t_a3" in rec["message"]


def test_missing_scenario_file(tmp_path, capsys):
    rec = failure(capsys, 2, "gate", "--scenario", tmp_path / "nope.yaml")
    assert rec["kind"] == "configuration_error"


def test_malformed_yaml(tmp_path, capsys):
    p = tmp_path / "bad.yaml"
    p.write_text("name: [unclosed\n")
    failure(capsys, 2, "gate", "--scenario", p)


@pytest.mark.parametrize("argv", [
    ["teleport", "--scenario", "x.yaml"],
    ["gate"],
    ["gate", "--scenario", "x.yaml", "--seed", "-1"],
    ["gate", "--scenario", "x.yaml", "--seed", str(2**64)],
    ["gate", "--scenario", "x.yaml", "--threads", "0"],
])
def test_usage_errors_exit_2(argv, capsys):
    rec = failure(capsys, 2, *argv)
    assert rec["kind"] == "usage_error"


def test_json_scenario_accepted(tmp_path, capsys):
    p = tmp_path / "s.json"
    p.write_text(json.dumps(SMALL))
    assert ok(capsys, "gate", "--scenario", p)["scenario"] == "small"


# -- determinism across processes and thread counts -----------------------------------

def _cli(args, cwd):
    env = dict(os.environ)
    env.pop("NUMBA_NUM_THREADS", None)
    return subprocess.run([sys.executable, "-m", "mrqsim", *map(str, args)], cwd=cwd,
                          env=env, capture_output=True, text=True)


@pytest.mark.slow
def test_thread_count_does_not_change_bytes(tmp_path):
    scen = write_yaml(tmp_path, dict(SMALL, ensemble=dict(SMALL["ensemble"], size=20000)))
    outputs = []
    for n in (1, 2, 8):
        out = tmp_path / f"t{n}"
        proc = _cli(["purify", "--scenario", scen, "--out", out, "--threads", n], tmp_path)
        assert proc.returncode == 0, proc.stderr
        outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert outputs[0] == outputs[1] == outputs[2]
    assert "purify_trajectory.csv" in outputs[0]
