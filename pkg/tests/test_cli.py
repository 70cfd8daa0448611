import json
import math

import pytest

from gcilab import cli
from gcilab.errors import NoSeries


def write_spec(tmp_path, name, spec):
    p = tmp_path / name
    p.write_text(json.dumps(spec))
    return p


def read_report(tmp_path, stem):
    return json.loads((tmp_path / f"{stem}.report.json").read_text())


STRIPES_SPEC = {
    "kind": "verify-gci",
    "seed": 7,
    "budget": 10**6,
    "method": "quadrature",
    "params": {
        "sets": [
            {"type": "slab", "u": [1.0, 0.0], "lo": -1.0, "hi": 1.0},
            {"type": "slab", "u": [0.0, 1.0], "lo": -0.5, "hi": 0.5},
        ]
    },
}


class TestRunExperiment:
    def test_stripes_equality_exit_zero(self, tmp_path):
        p = write_spec(tmp_path, "stripes.json", STRIPES_SPEC)
        assert cli.run_experiment(p) == 0
        rep = read_report(tmp_path, "stripes")
        assert rep["results"]["verdict"] == "equality_within_noise"

    def test_infinite_direction_datum(self, tmp_path):
        spec = {
            "kind": "bl-constant",
            "seed": 0,
            "params": {
                "datum": {
                    "N": 2,
                    "B": [[[0.0, 1.0]], [[0.0, 1.0]]],
                    "c": [1.0, 1.0],
                    "Q": [[0.0, 0.0], [0.0, -1.0]],
                }
            },
        }
        p = write_spec(tmp_path, "inf.json", spec)
        cli.run_experiment(p)
        rep = read_report(tmp_path, "inf")
        assert rep["results"]["classification"] == "infinite_constant"

    def test_flow_csv(self, tmp_path):
        p = write_spec(tmp_path, "flow.json", {"kind": "flow", "seed": 0, "params": {"steps": 6}})
        assert cli.run_experiment(p) == 0
        lines = (tmp_path / "flow.csv").read_text().strip().split("\n")
        assert lines[0] == "k,bl_value,l1,mass"
        l1 = [float(row.split(",")[2]) for row in lines[1:]]
        assert all(b < a for a, b in zip(l1, l1[1:]))
        assert l1[-1] < 0.01

    def test_counterexample_sweep_csv(self, tmp_path):
        spec = {
            "kind": "counterexample",
            "seed": 0,
            "params": {"r2": [float(r) for r in range(1, 11)]},
        }
        p = write_spec(tmp_path, "ce.json", spec)
        assert cli.run_experiment(p) == 0
        lines = (tmp_path / "ce.csv").read_text().strip().split("\n")
        assert lines[0] == "r2,value"
        vals = [float(row.split(",")[1]) for row in lines[1:]]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_violated_counterexample_still_informational(self, tmp_path):
        p = write_spec(
            tmp_path, "one.json", {"kind": "counterexample", "seed": 0, "params": {"r2": 3.0}}
        )
        assert cli.run_experiment(p) == 0
        rep = read_report(tmp_path, "one")
        assert rep["results"]["points"][0]["violated"]

    def test_center_exit_code(self, tmp_path):
        spec = {
            "kind": "center",
            "seed": 3,
            "budget": 10**5,
            "method": "quadrature",
            "params": {"set": {"type": "polytope", "normals": [[1.0], [-1.0]], "offsets": [2.0, 0.0]}},
        }
        p = write_spec(tmp_path, "center.json", spec)
        assert cli.run_experiment(p) == 0
        rep = read_report(tmp_path, "center")
        assert rep["results"]["converged"]
        assert abs(rep["results"]["b0"][0] - 1.0) < 1e-4

    def test_measure(self, tmp_path):
        spec = {
            "kind": "measure",
            "seed": 1,
            "budget": 10**6,
            "method": "quadrature",
            "params": {"set": {"type": "slab", "u": [1.0, 0.0], "lo": -1.0, "hi": 1.0}},
        }
        p = write_spec(tmp_path, "m.json", spec)
        assert cli.run_experiment(p) == 0
        rep = read_report(tmp_path, "m")
        assert rep["results"]["measure"]["value"] == pytest.approx(0.6826894921, abs=1e-6)

    def test_schema_violation_message(self, tmp_path):
        from gcilab.errors import InvalidInput

        p = write_spec(tmp_path, "bad.json", {"kind": "verify-gci", "params": {}})
        with pytest.raises(InvalidInput, match="seed"):
            cli.run_experiment(p)

    def test_main_returns_one_on_error(self, tmp_path):
        p = write_spec(tmp_path, "bad.json", {"kind": "verify-gci", "params": {}})
        assert cli.main(["run", str(p)]) == 1


class TestDeterminism:
    def test_byte_identical_reports(self, tmp_path):
        p = write_spec(tmp_path, "stripes.json", STRIPES_SPEC)
        cli.run_experiment(p, tmp_path / "a")
        cli.run_experiment(p, tmp_path / "b")
        ra = json.loads((tmp_path / "a.report.json").read_text())
        rb = json.loads((tmp_path / "b.report.json").read_text())
        ra.pop("wall_clock_seconds")
        rb.pop("wall_clock_seconds")
        assert json.dumps(ra, sort_keys=True) == json.dumps(rb, sort_keys=True)


class TestPlotData:
    def test_flow_series(self, tmp_path):
        p = write_spec(tmp_path, "flow.json", {"kind": "flow", "seed": 0, "params": {"steps": 2}})
        cli.run_experiment(p)
        written = cli.emit_plot_data(tmp_path / "flow.report.json")
        names = sorted(w.name for w in written)
        assert names == ["flow.density.csv", "flow.flow.csv"]
        density = (tmp_path / "flow.density.csv").read_text()
        assert density.startswith("x,f\n")
        assert "\r" not in density

    def test_no_series_raises(self, tmp_path):
        p = write_spec(
            tmp_path, "one.json", {"kind": "counterexample", "seed": 0, "params": {"r2": 2.0}}
        )
        cli.run_experiment(p)
        with pytest.raises(NoSeries):
            cli.emit_plot_data(tmp_path / "one.report.json")

    def test_full_precision(self, tmp_path):
        p = write_spec(
            tmp_path, "s.json", {"kind": "counterexample", "seed": 0, "params": {"r2": [3.0]}}
        )
        cli.run_experiment(p)
        row = (tmp_path / "s.csv").read_text().strip().split("\n")[1]
        value = float(row.split(",")[1])
        rep = read_report(tmp_path, "s")
        assert value == rep["results"]["points"][0]["lhs"]


class TestSubcommands:
    def test_kind_subcommand_with_flags(self, tmp_path):
        params = tmp_path / "params.json"
        params.write_text(json.dumps({"r2": 3.0}))
        code = cli.main(
            ["counterexample", str(params), "--seed", "0", "--out", str(tmp_path / "ce1")]
        )
        assert code == 0
        rep = read_report(tmp_path, "ce1")
        assert rep["seed"] == 0 and rep["kind"] == "counterexample"

    def test_seed_mandatory(self, tmp_path):
        params = tmp_path / "params.json"
        params.write_text(json.dumps({"r2": 3.0}))
        assert cli.main(["counterexample", str(params)]) == 1

    def test_report_schema_validates(self, tmp_path):
        p = write_spec(tmp_path, "flow.json", {"kind": "flow", "seed": 0, "params": {"steps": 1}})
        cli.run_experiment(p)
        import jsonschema

        rep = read_report(tmp_path, "flow")
        jsonschema.validate(rep, cli.load_schema("report"))
