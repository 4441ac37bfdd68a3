import csv
import io
import json
import os
import tempfile
import unittest
from contextlib import redirect_stderr

import numpy as np
from click.testing import CliRunner

from distnorm.cli import EXIT_DATAERR, EXIT_INVALID, EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, cli, run
from distnorm.config import get_settings, set_settings
from distnorm.designs import WeightedDesign
from distnorm.errors import AuditViolation, ConfigError
from distnorm.formats import design_doc, load_operator
from distnorm.log import configure_logging
from distnorm.operators import trace_norm
from distnorm.report import Report, RunConfig, emit, to_csv, to_json


class CliTestCase(unittest.TestCase):
    def setUp(self):
        self.settings = get_settings()
        self.tmp = tempfile.TemporaryDirectory()
        self.out = os.path.join(self.tmp.name, "report.json")

    def tearDown(self):
        set_settings(self.settings)
        self.tmp.cleanup()

    def invoke(self, *args):
        return run(["--out", self.out, *args])

    def report(self):
        with open(self.out, "r", encoding="utf-8") as handle:
            return json.load(handle)


class TestCommands(CliTestCase):
    def test_lambda_uniform(self):
        self.assertEqual(self.invoke("lambda-uniform", "--d", "4"), EXIT_OK)
        data = self.report()
        self.assertAlmostEqual(data["lambda"], 0.375, places=14)
        self.assertEqual(data["argmin_split"], [2, 2])
        self.assertAlmostEqual(data["even_form"], 0.375, places=14)
        self.assertEqual(data["command"], "lambda-uniform")
        self.assertEqual(data["violations"], 0)
        self.assertEqual(data["seed"], 0)

    def test_hiding_round_trip(self):
        self.assertEqual(self.invoke("hiding", "--d", "2"), EXIT_OK)
        self.assertAlmostEqual(self.report()["ppt_bias"], 2 / 3, places=12)
        direction = load_operator(self.out)
        self.assertEqual(direction.shape, (2, 2))
        self.assertAlmostEqual(trace_norm(direction), 1.0)

    def test_perm_audit(self):
        self.assertEqual(self.invoke("perm-audit", "--trials", "2"), EXIT_OK)
        data = self.report()
        self.assertEqual(data["classes"], 43)
        self.assertEqual(data["burnside"], 43)
        self.assertEqual(data["members"], 576)
        self.assertEqual(data["violations"], 0)

    def test_chain_csv(self):
        path = os.path.join(self.tmp.name, "chain.csv")
        code = run(["--out", path, "--output", "csv", "--samples", "2000", "chain", "--d", "2"])
        self.assertEqual(code, EXIT_OK)
        with open(path, newline="", encoding="utf-8") as handle:
            rows = list(csv.DictReader(handle))
        self.assertEqual(len(rows), 6)
        self.assertEqual(rows[0]["bound_name"], "local_uniform_floor")
        self.assertTrue(all(row["seed"] == "0" and row["samples"] == "2000" for row in rows))
        values = [float(row["value"]) for row in rows]
        self.assertAlmostEqual(values[-1], 2 / 3)

    def test_deterministic_output(self):
        outputs = []
        for name in ("a.json", "b.json"):
            path = os.path.join(self.tmp.name, name)
            self.assertEqual(run(["--seed", "5", "--samples", "1000", "--out", path, "mc-bias", "--d", "3"]),
                             EXIT_OK)
            with open(path, "rb") as handle:
                outputs.append(handle.read())
        self.assertEqual(outputs[0], outputs[1])

    def test_mc_bias_split(self):
        self.assertEqual(self.invoke("--samples", "5000", "mc-bias", "--d", "4", "--split", "1,3"), EXIT_OK)
        data = self.report()
        self.assertAlmostEqual(data["closed_form"], 0.421875)
        self.assertEqual(data["samples"], 5000)

    def test_design_violation(self):
        loose = WeightedDesign([0.7, 0.3], [[1, 0], [0, 1]], strict=False)
        path = os.path.join(self.tmp.name, "loose.json")
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(design_doc(loose), handle)
        self.assertEqual(self.invoke("design-check", "--design", path), EXIT_VIOLATION)
        self.assertGreater(self.report()["violations"], 0)
        self.assertEqual(self.invoke("design-check", "--mub", "3"), EXIT_OK)

    def test_json_logs(self):
        self.addCleanup(configure_logging)
        buffer = io.StringIO()
        with redirect_stderr(buffer):
            code = self.invoke("--json-logs", "--log-level", "INFO", "lambda-uniform", "--d", "2")
        self.assertEqual(code, EXIT_OK)
        events = [json.loads(line) for line in buffer.getvalue().splitlines() if line.startswith("{")]
        audits = [e for e in events if e.get("event") == "audit"]
        self.assertEqual(len(audits), 1)
        self.assertEqual(audits[0]["command"], "lambda-uniform")
        self.assertEqual(audits[0]["level"], "info")

    def test_small_commands(self):
        commands = [
            ["mub", "--d", "3", "--trials", "20"],
            ["two-design-audit", "--mub", "2", "--trials", "20"],
            ["certainty", "--d", "3", "--states", "5"],
            ["l1-sweep", "--n", "100", "--n", "1000", "--pairs", "50"],
            ["--samples", "5000", "accinfo", "--d", "2", "--size", "2"],
            ["--samples", "5000", "moments", "--d", "2", "--mub"],
        ]
        for args in commands:
            self.assertEqual(self.invoke(*args), EXIT_OK, args)


class TestExitCodes(CliTestCase):
    def test_usage_errors(self):
        self.assertEqual(self.invoke("no-such-command"), EXIT_USAGE)
        self.assertEqual(self.invoke("lambda-uniform"), EXIT_USAGE)
        self.assertEqual(self.invoke("mc-bias"), EXIT_USAGE)
        self.assertEqual(self.invoke("--output", "xml", "hiding", "--d", "2"), EXIT_USAGE)

    def test_invalid_input(self):
        self.assertEqual(self.invoke("lambda-uniform", "--d", "1"), EXIT_INVALID)
        self.assertEqual(self.invoke("mub", "--d", "4"), EXIT_INVALID)
        self.assertEqual(self.invoke("--tol", "1e-13", "hiding", "--d", "2"), EXIT_INVALID)

    def test_malformed_file(self):
        path = os.path.join(self.tmp.name, "bad.json")
        with open(path, "w", encoding="utf-8") as handle:
            handle.write("[1, 2")
        self.assertEqual(self.invoke("mc-bias", "--operator", path), EXIT_DATAERR)
        with open(path, "w", encoding="utf-8") as handle:
            json.dump({"dim": 2}, handle)
        self.assertEqual(self.invoke("moments", "--operator", path), EXIT_DATAERR)

    def test_unwritable_output(self):
        path = os.path.join(self.tmp.name, "missing", "report.json")
        self.assertEqual(run(["--out", path, "hiding", "--d", "2"]), EXIT_INVALID)


class TestStdout(unittest.TestCase):
    def setUp(self):
        self.settings = get_settings()

    def tearDown(self):
        set_settings(self.settings)

    def test_json_on_stdout(self):
        result = CliRunner().invoke(cli, ["lambda-uniform", "--d", "3"], standalone_mode=False)
        self.assertIsNone(result.exception)
        self.assertEqual(result.return_value, EXIT_OK)
        data = json.loads(result.output)
        self.assertAlmostEqual(data["lambda"], 4 / 9, places=14)
        self.assertEqual(data["params"], {"d": 3})


class TestReport(unittest.TestCase):
    def test_checks(self):
        report = Report("demo", {"x": 1.0})
        self.assertTrue(report.check("fine", True))
        self.assertTrue(report.ok)
        self.assertFalse(report.check("bound", False, value=2.0))
        self.assertEqual(report.violations, [{"check": "bound", "value": 2.0}])
        with self.assertRaises(AuditViolation):
            report.raise_for_violations()

    def test_merge(self):
        outer = Report("outer")
        inner = Report("inner", {"y": 2})
        inner.check("inner_bound", False)
        outer.merge(inner)
        self.assertEqual(outer.data["inner"], {"y": 2})
        self.assertEqual(outer.violations[0]["source"], "inner")
        self.assertEqual(outer.as_dict()["violations"], 1)

    def test_json_encoding(self):
        text = to_json({"b": 0.1, "a": [1, np.float64(2.5)], "c": np.nan, "d": np.arange(2)})
        self.assertEqual(text, '{"a": [1, 2.5], "b": 0.10000000000000001, "c": "nan", "d": [0, 1]}\n')

    def test_csv_encoding(self):
        text = to_csv([{"b": 1.5, "a": "x"}, {"a": "y", "c": None}])
        self.assertEqual(text, "a,b,c\nx,1.5,\ny,,\n")

    def test_emit(self):
        report = Report("demo", {"value": 0.25, "nested": {"k": 1}})
        cfg = RunConfig("demo", {"d": 2}, seed=3, samples=10, output="csv")
        self.assertEqual(emit(report, cfg), b"samples,seed,value,violations\n10,3,0.25,0\n")
        payload = json.loads(emit(report, RunConfig("demo", seed=3)))
        self.assertEqual(payload["nested"], {"k": 1})
        self.assertEqual(payload["command"], "demo")

    def test_run_config(self):
        with self.assertRaises(ConfigError):
            RunConfig("demo", output="xml")
