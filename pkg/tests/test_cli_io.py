import csv
import json
import math
import warnings

import numpy as np
import pytest
import yaml

from fdris.cli import EXIT_INVALID, EXIT_OK, EXIT_SOLVER, main
from fdris.config import UNEQUAL_WEIGHTS, paper_preset
from fdris.experiments import (
    SweepRun,
    export_results,
    load_summary,
    run_sweep,
    summarize,
    write_results_csv,
)
from fdris.scenario import (
    Experiment,
    ScenarioError,
    apply_axis,
    load_scenario,
    preset_scenario,
    scenario_from_dict,
    scenario_to_dict,
)

SMALL = {
    "seed": 3,
    "system": {
        "R": 1, "S": 2, "M": 2, "N": 2, "n_tx": 3, "p_max_dbm": 20,
        "users": [
            {"distance": 40, "azimuth_deg": 90, "elevation_deg": 30},
            {"distance": 60, "azimuth_deg": 90, "elevation_deg": 100},
        ],
    },
    "solver": {"max_iter": 3},
}


def write(tmp_path, data, name="scn.yaml"):
    path = tmp_path / name
    path.write_text(json.dumps(data) if name.endswith(".json") else yaml.safe_dump(data))
    return path


def small(**experiment):
    data = json.loads(json.dumps(SMALL))
    if experiment:
        data["experiment"] = experiment
    return scenario_from_dict(data)


class TestScenario:
    def test_preset(self):
        scn = preset_scenario("paper-sec5")
        assert scn.config == paper_preset()
        assert scn.seed == 0

    def test_units_converted(self, tmp_path):
        scn = load_scenario(write(tmp_path, SMALL))
        cfg = scn.config
        assert cfg.p_max == pytest.approx(0.1)
        assert cfg.K == 2 and cfg.weights == (0.5, 0.5)
        assert cfg.users[0].elevation == pytest.approx(math.radians(30))
        assert cfg.L == 2 and cfg.n_tx == 3 and cfg.seed == 3
        assert scn.solver.max_iter == 3

    def test_json_files(self, tmp_path):
        scn = load_scenario(write(tmp_path, SMALL, "scn.json"))
        assert scn.config.n_tx == 3

    def test_frequency_order_rejected(self, tmp_path):
        data = dict(SMALL, system={"f_min_hz": 30e6, "f_max_hz": 20e6})
        with pytest.raises(ScenarioError, match="f_min"):
            load_scenario(write(tmp_path, data))

    def test_missing_seed_warns(self):
        with pytest.warns(UserWarning, match="no seed"):
            scn = scenario_from_dict({"system": {"n_tx": 4}})
        assert scn.seed == 0

    @pytest.mark.parametrize("data", [
        {"seed": 0, "sytem": {}},
        {"seed": 0, "system": {"ntx": 4}},
        {"seed": 0, "system": {"bs": {"distance": 1, "azimuth_deg": 0, "elevation_deg": 0, "x": 1}}},
        {"seed": 0, "solver": {"tolerance": 1}},
        {"seed": 0, "experiment": {"axis": "L", "vals": [1]}},
    ])
    def test_unknown_keys_rejected(self, data):
        with pytest.raises(ScenarioError, match="unknown key"):
            scenario_from_dict(data)

    def test_invalid_values(self):
        with pytest.raises(ScenarioError):
            scenario_from_dict({"seed": 0, "system": {"n_tx": "many"}})
        with pytest.raises(ScenarioError):
            scenario_from_dict({"seed": 0, "experiment": {"axis": "L", "values": [0]}})
        with pytest.raises(ScenarioError):
            scenario_from_dict({"seed": 0, "experiment": {"axis": "colour", "values": [1]}})
        with pytest.raises(ScenarioError):
            scenario_from_dict({"seed": 0, "preset": "nope"})

    def test_yaml_parse_error_has_line(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("seed: 1\nsystem:\n  n_tx: [1, 2\n  R: 3\n")
        with pytest.raises(ScenarioError, match=r"bad\.yaml:\d+:\d+"):
            load_scenario(path)

    def test_json_parse_error_has_line(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"seed": 1,\n "system": {,}}')
        with pytest.raises(ScenarioError, match=r"bad\.json:2:"):
            load_scenario(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ScenarioError, match="cannot read"):
            load_scenario(tmp_path / "nope.yaml")

    def test_round_trip(self):
        scn = small(axis="weights", values=[[0.3, 0.7]], replicates=2)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            back = scenario_from_dict(scenario_to_dict(scn))
        assert back.config == scn.config
        assert back.experiment == scn.experiment
        assert back.solver == scn.solver

    def test_preset_round_trip(self):
        scn = preset_scenario()
        assert scenario_from_dict(scenario_to_dict(scn)).config == scn.config

    def test_apply_axis(self):
        cfg = paper_preset()
        assert apply_axis(cfg, "L", 8).L == 8
        assert apply_axis(cfg, "n_tx", 6).n_tx == 6
        assert apply_axis(cfg, "p_max_dbm", 20).p_max == pytest.approx(0.1)
        assert apply_axis(cfg, "weights", list(UNEQUAL_WEIGHTS)).weights == UNEQUAL_WEIGHTS
        assert apply_axis(cfg, None, None) is cfg

    def test_experiment_validation(self):
        with pytest.raises(ScenarioError):
            Experiment(axis="L", values=())
        with pytest.raises(ScenarioError):
            Experiment(schemes=("sdr",))
        assert Experiment().points() == [None]


class TestExperiments:
    def test_empty_run_writes_header_only(self, tmp_path):
        write_results_csv([], tmp_path / "r.csv")
        rows = list(csv.reader(open(tmp_path / "r.csv")))
        assert rows == [["axis", "value", "point", "replicate", "scheme", "wsr", "iterations",
                         "final_delta", "wall_time", "error"]]

    def test_paired_channels_and_traces(self, tmp_path):
        scn = small(axis="p_max_dbm", values=[10, 20], replicates=2)
        run = run_sweep(scn, schemes=("fdris", "ris", "zf"))
        assert len(run.records) == 2 * 2 * 3
        assert [(r.point, r.replicate, r.scheme) for r in run.records[:3]] == [
            (0, 0, "fdris"), (0, 0, "ris"), (0, 0, "zf")]
        assert all(not r.error for r in run.records)
        paths = export_results(run, tmp_path)
        assert len(paths["traces"]) == 2 * 3
        rec = run.records[0]
        rows = list(csv.reader(open(tmp_path / "trace_p0_fdris.csv")))
        assert rows[0] == ["iteration", "wsr", "surrogate", "rate_1", "rate_2", "mu"]
        assert len(rows) - 1 == rec.iterations
        results = list(csv.DictReader(open(paths["results"])))
        assert len(results) == 12 and results[0]["axis"] == "p_max_dbm"
        assert float(results[0]["wsr"]) == rec.wsr

    def test_summary_round_trip(self, tmp_path):
        scn = small(axis="L", values=[1, 2], replicates=2)
        run = run_sweep(scn)
        export_results(run, tmp_path)
        loaded = load_summary(tmp_path / "summary.json")
        assert loaded == json.loads(json.dumps(run.summary))
        entry = loaded["points"][0]["schemes"]
        assert entry["fdris"]["n"] == 2
        gap = [r.wsr for r in run.records if r.point == 0 and r.scheme == "fdris"]
        base = [r.wsr for r in run.records if r.point == 0 and r.scheme == "ris"]
        assert entry["ris"]["paired_gap_mean"] == pytest.approx(np.mean(np.subtract(gap, base)))
        assert loaded["format"] == "fdris-summary/1" and loaded["seed"] == 3

    def test_failures_are_recorded(self, monkeypatch):
        def boom(*a, **k):
            raise RuntimeError("no luck")

        monkeypatch.setattr("fdris.experiments.solve_scheme", boom)
        run = run_sweep(small(axis="n_tx", values=[2, 3]))
        assert all(r.error == "RuntimeError: no luck" for r in run.records)
        assert run.summary["points"][0]["schemes"]["fdris"]["failures"] == 1
        assert run.summary["points"][0]["schemes"]["fdris"]["wsr_mean"] is None

    def test_summary_independent_of_record_order(self):
        scn = small(axis="n_tx", values=[2, 3], replicates=2)
        run = run_sweep(scn)
        shuffled = list(reversed(run.records))
        assert summarize(scn, shuffled, ("fdris", "ris"))["points"] == run.summary["points"]

    def test_parallel_matches_serial(self):
        scn = small(axis="n_tx", values=[2, 3], replicates=1)
        a = run_sweep(scn, workers=1)
        b = run_sweep(scn, workers=2)
        assert [r.wsr for r in a.records] == [r.wsr for r in b.records]

    def test_unwritable_output(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        run = SweepRun(small(), [], {"points": []})
        with pytest.raises(OSError, match="cannot write results"):
            export_results(run, blocker / "sub")


class TestCli:
    def test_validate(self, tmp_path, capsys):
        assert main(["validate", "--scenario", str(write(tmp_path, SMALL))]) == EXIT_OK
        assert "valid" in capsys.readouterr().out

    def test_validate_preset(self, capsys):
        assert main(["validate", "--preset", "paper-sec5"]) == EXIT_OK
        assert "L=16" in capsys.readouterr().out

    def test_invalid_scenario_exit_code(self, tmp_path, capsys):
        bad = write(tmp_path, {"seed": 0, "system": {"f_min_hz": 3e7}})
        assert main(["validate", "--scenario", str(bad)]) == EXIT_INVALID
        assert "error" in capsys.readouterr().err

    def test_unknown_preset_exit_code(self):
        assert main(["validate", "--preset", "nope"]) == EXIT_INVALID

    def test_solve_writes_outputs(self, tmp_path):
        scn = write(tmp_path, SMALL)
        out = tmp_path / "out"
        assert main(["solve", "--scenario", str(scn), "--out", str(out)]) == EXIT_OK
        sol = json.loads((out / "solution_fdris.json").read_text())
        assert len(sol["rates"]) == 2 and sol["iterations"] >= 1
        assert (out / "trace_fdris.csv").exists()

    def test_solver_failure_exit_code(self, tmp_path, monkeypatch):
        def boom(*a, **k):
            raise FloatingPointError("bad")

        monkeypatch.setattr("fdris.solver.solve_delays", boom)
        scn = write(tmp_path, SMALL)
        assert main(["solve", "--scenario", str(scn), "--out", str(tmp_path)]) == EXIT_SOLVER

    def test_pattern_and_baselines(self, tmp_path):
        scn = write(tmp_path, SMALL)
        assert main(["pattern", "--scenario", str(scn), "--out", str(tmp_path),
                     "--n-dist", "5", "--n-angle", "4"]) == EXIT_OK
        assert len((tmp_path / "pattern_fdris.csv").read_text().splitlines()) == 2 + 20
        assert main(["baselines", "--scenario", str(scn), "--out", str(tmp_path)]) == EXIT_OK
        rows = list(csv.reader(open(tmp_path / "baselines.csv")))
        assert [r[0] for r in rows[1:]] == ["fdris", "ris", "zf"]

    def test_sweep(self, tmp_path):
        data = dict(SMALL, experiment={"axis": "n_tx", "values": [2, 3], "replicates": 1})
        scn = write(tmp_path, data)
        assert main(["sweep", "--scenario", str(scn), "--out", str(tmp_path / "s"),
                     "--seed", "5"]) == EXIT_OK
        assert load_summary(tmp_path / "s" / "summary.json")["seed"] == 5
