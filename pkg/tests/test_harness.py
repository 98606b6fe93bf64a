"""Scenario harness: verdicts, negative controls, transcript determinism."""

import copy
import json
from pathlib import Path

import pytest

from mcpcell.harness.runner import (
    InfraError,
    ScenarioScript,
    builtin_scenarios,
    run_all,
    run_scenario,
    summarize,
)
from mcpcell.orchestrator.llm import LLM_BASE_URL_ENV, LlmConfig

PLAYBACK = Path(__file__).parent / "data" / "llm_scenario1_playback.json"


def test_builtin_scenarios_load():
    scenarios = builtin_scenarios()
    assert list(scenarios) == ["scenario-1", "scenario-2", "scenario-3", "scenario-4"]
    assert scenarios["scenario-2"].clarifier_answers == {"unsupported_diameter": 8}


@pytest.mark.parametrize("name", ["scenario-1", "scenario-2", "scenario-3", "scenario-4"])
def test_each_builtin_scenario_passes(name, tmp_path):
    verdict = run_scenario(builtin_scenarios()[name], out_dir=tmp_path)
    assert verdict.status == "pass", verdict.failures
    transcript = tmp_path / f"{name}.ndjson"
    assert transcript.exists()
    events = [json.loads(line) for line in transcript.read_text().splitlines()]
    assert events[-1]["type"] == "done"


def test_negative_control_drill_server_disabled(tmp_path):
    verdict = run_scenario(builtin_scenarios()["scenario-1"], out_dir=tmp_path, disable=("drill",))
    assert verdict.status == "fail"
    assert any("tool_missing" in failure for failure in verdict.failures)


def test_negative_control_wrong_material():
    script = copy.deepcopy(builtin_scenarios()["scenario-4"])
    script.task["material"] = "steel"  # no unknown_material error will occur
    verdict = run_scenario(script)
    assert verdict.status == "fail"
    assert any("unknown_material" in failure for failure in verdict.failures)


def test_negative_control_missing_clarifier_answer():
    script = copy.deepcopy(builtin_scenarios()["scenario-2"])
    script.clarifier_answers = {}
    verdict = run_scenario(script)
    assert verdict.status == "fail"
    assert any("needs_user" in failure for failure in verdict.failures)


def test_negative_control_workpiece_already_in_place():
    script = copy.deepcopy(builtin_scenarios()["scenario-3"])
    script.plant["workpieces"]["wp1"]["location"] = "drill_station"
    verdict = run_scenario(script)
    assert verdict.status == "fail"  # the asserted pre-drill transport never happens


def test_infra_error_distinct_from_assertion_failure():
    script = copy.deepcopy(builtin_scenarios()["scenario-1"])
    script.plant["workpieces"]["wp1"]["location"] = "not_a_station"
    with pytest.raises(InfraError):
        run_scenario(script)
    verdicts = run_all([script])
    assert verdicts[0].status == "infra_error"


def test_transcripts_byte_identical_across_runs(tmp_path):
    script = builtin_scenarios()["scenario-2"]
    run_scenario(script, out_dir=tmp_path / "a")
    run_scenario(script, out_dir=tmp_path / "b")
    first = (tmp_path / "a" / "scenario-2.ndjson").read_bytes()
    second = (tmp_path / "b" / "scenario-2.ndjson").read_bytes()
    assert first == second


def test_run_all_parallel(tmp_path):
    scripts = list(builtin_scenarios().values())
    verdicts = run_all(scripts, out_dir=tmp_path, parallel=True)
    assert [v.status for v in verdicts] == ["pass"] * 4


def test_run_all_empty_set():
    assert run_all([]) == []


def test_llm_without_credentials_is_skipped(monkeypatch):
    monkeypatch.delenv(LLM_BASE_URL_ENV, raising=False)
    verdict = run_scenario(builtin_scenarios()["scenario-1"], planner="llm")
    assert verdict.status == "skipped_no_llm"


def test_llm_playback_through_harness(tmp_path):
    verdict = run_scenario(
        builtin_scenarios()["scenario-1"],
        planner="llm",
        out_dir=tmp_path,
        llm_config=LlmConfig(base_url=f"file://{PLAYBACK}"),
    )
    assert verdict.status == "pass", verdict.failures


def test_summary_table_mentions_every_scenario():
    scripts = [builtin_scenarios()["scenario-1"]]
    table = summarize(run_all(scripts))
    assert "scenario-1" in table
    assert "pass" in table


def test_cli_exit_codes(tmp_path, capsys):
    from mcpcell.harness import cli

    passing = tmp_path / "ok.yaml"
    passing.write_text(
        "name: ok\n"
        "task: {workpiece: wp1, material: steel, diameter_mm: 10, target_station: storage}\n"
        "plant: {workpieces: {wp1: {location: drill_station, material: steel}}}\n"
        "assertions: {terminal: done}\n"
    )
    failing = tmp_path / "bad.yaml"
    failing.write_text(
        "name: bad\n"
        "task: {workpiece: wp1, material: steel, diameter_mm: 10, target_station: storage}\n"
        "plant: {workpieces: {wp1: {location: drill_station, material: steel}}}\n"
        "assertions: {terminal: failed}\n"
    )
    assert cli.main(["run", "--scenario", str(passing), "--out", str(tmp_path / "o1")]) == 0
    assert cli.main(["run", "--scenario", str(failing), "--out", str(tmp_path / "o2")]) == 1
    summary = json.loads((tmp_path / "o2" / "summary.json").read_text())
    assert summary[0]["status"] == "fail"
    capsys.readouterr()


def test_scenario_script_from_path(tmp_path):
    path = tmp_path / "custom.yaml"
    path.write_text(
        "name: custom\n"
        "task: {workpiece: wp1, material: steel, diameter_mm: 10, target_station: storage}\n"
        "plant: {workpieces: {wp1: {location: drill_station, material: steel}}}\n"
        "assertions: {terminal: done}\n"
    )
    verdict = run_scenario(ScenarioScript.load(path))
    assert verdict.status == "pass", verdict.failures
