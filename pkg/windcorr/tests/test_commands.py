import json
from io import StringIO

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase
from openpyxl import load_workbook

from windcorr.core import Observable, read_panel
from windcorr.tests.helpers import SIMULATION_CFG, TempDirMixin
from windcorr.utils.cleaning import read_labels


class CommandTestCase(TempDirMixin, SimpleTestCase):
    def call(self, name, *args):
        out, err = StringIO(), StringIO()
        call_command(name, *[str(a) for a in args], stdout=out, stderr=err)
        return out.getvalue(), err.getvalue()

    def simulate(self):
        config = self.write("sim.cfg", SIMULATION_CFG)
        self.call("simulate", "--config", config, "--out-dir", self.tmp / "sim")
        return self.tmp / "sim"


class SimulateCommandTests(CommandTestCase):
    def test_writes_panels_and_truth(self):
        sim = self.simulate()
        for name in ("power", "wind_speed", "wind_direction", "labels_truth", "layout", "raw"):
            self.assertTrue((sim / f"{name}.csv").is_file(), name)
        self.assertEqual(read_panel(sim / "power.csv").n_steps, 576)

    def test_layout_preset_override(self):
        self.call("simulate", "--layout", "thanet", "--seed", 2, "--out-dir", self.tmp / "thanet")
        self.assertEqual(read_panel(self.tmp / "thanet" / "power.csv").n_turbines, 100)


class IngestCommandTests(CommandTestCase):
    def test_raw_export_to_panels(self):
        sim = self.simulate()
        report = self.tmp / "speed.json"
        out, _ = self.call(
            "ingest", "--in", sim / "raw.csv", "--out", self.tmp / "speed.csv",
            "--observable", "speed", "--clean", "riffgat", "--report", report,
        )
        self.assertIn("written to", out)
        speed = read_panel(self.tmp / "speed.csv", Observable.WIND_SPEED)
        self.assertEqual(speed.shape, (30, 576))
        self.assertIn("removed_by_rule", json.loads(report.read_text()))

        self.call(
            "ingest", "--in", sim / "raw.csv", "--out", self.tmp / "direction.csv",
            "--observable", "direction", "--step", "1h",
        )
        direction = read_panel(self.tmp / "direction.csv", Observable.WIND_DIRECTION)
        self.assertEqual((direction.step, direction.n_steps), (3600.0, 96))

    def test_errors_become_command_errors(self):
        with self.assertRaises(CommandError):
            self.call("ingest", "--in", self.tmp / "missing.csv", "--out", self.tmp / "x.csv")
        bad = self.write("bad.csv", "timestamp,turbine,observable,value\n2014-03-01T00:00:00Z,1,torque,1\n")
        with self.assertRaisesRegex(CommandError, "bad.csv:2"):
            self.call("ingest", "--in", bad, "--out", self.tmp / "x.csv")


class AnalysisCommandTests(CommandTestCase):
    def setUp(self):
        super().setUp()
        self.sim = self.simulate()

    def classify(self):
        self.call(
            "classify", "--power", self.sim / "power.csv", "--wind", self.sim / "wind_speed.csv",
            "--labels-out", self.tmp / "labels.csv", "--filled-out", self.tmp / "filled.csv",
            "--report", self.tmp / "report.json",
        )
        return self.tmp / "filled.csv"

    def corr(self):
        self.call(
            "corr", "--panel", self.classify(), "--window", "12h", "--stride", "12h",
            "--mode", "reduced", "--out-dir", self.tmp / "mats",
        )
        return self.tmp / "mats"

    def test_classify(self):
        self.classify()
        self.assertTrue(read_panel(self.tmp / "filled.csv").is_complete)
        self.assertEqual(read_labels(self.tmp / "labels.csv").codes.shape, (30, 576))
        report = json.loads((self.tmp / "report.json").read_text())
        self.assertEqual(report["total_points"], 30 * 576)

    def test_classify_rejects_bad_thresholds(self):
        thresholds = self.write("t.cfg", "[thresholds]\npsi_window = 7m\n")
        with self.assertRaises(CommandError):
            self.call("classify", "--power", self.sim / "power.csv", "--wind", self.sim / "wind_speed.csv",
                      "--config", thresholds)

    def test_corr_eigen_heatmap(self):
        mats = self.corr()
        matrices = sorted(mats.glob("window_*.csv"))
        self.assertEqual(len(matrices), 8)

        out, _ = self.call(
            "eigen", "--matrix", matrices[0], "--out", self.tmp / "spectrum.csv", "--summary", self.tmp / "s.json"
        )
        self.assertIn("30 eigenvalues", out)
        summary = json.loads((self.tmp / "s.json").read_text())
        self.assertGreaterEqual(summary["zero"], 1)

        self.call("heatmap", "--matrix", matrices[0], "--out", self.tmp / "h.csv", "--png", self.tmp / "h.png")
        self.assertEqual(len((self.tmp / "h.csv").read_text().splitlines()), 901)
        self.assertTrue((self.tmp / "h.png").is_file())

    def test_corr_takes_the_observable_from_the_panel(self):
        filled = self.classify()
        with self.assertRaisesRegex(CommandError, "active_power"):
            self.call("corr", "--panel", filled, "--observable", "speed", "--window", "12h",
                      "--out-dir", self.tmp / "m")
        out, _ = self.call("corr", "--panel", filled, "--observable", "power", "--window", "12h",
                           "--out-dir", self.tmp / "m")
        self.assertIn("8 matrix file(s)", out)

    def test_corr_needs_a_complete_panel(self):
        holey = self.write("holey.csv", "timestamp,1,2\n2014-03-01T00:00:00Z,1,NA\n2014-03-01T00:10:00Z,2,3\n")
        with self.assertRaisesRegex(CommandError, "masked"):
            self.call("corr", "--panel", holey, "--window", "20m", "--out-dir", self.tmp / "m")

    def test_binavg(self):
        mats = self.corr()
        out, _ = self.call(
            "binavg", "--mats", mats, "--wind-dir", self.sim / "wind_direction.csv",
            "--wind-speed", self.sim / "wind_speed.csv", "--layout", self.sim / "layout.csv",
            "--out", self.tmp / "bins",
        )
        self.assertIn("8 window(s) binned", out)
        self.assertTrue((self.tmp / "bins" / "NE.csv").is_file())
        with self.assertRaisesRegex(CommandError, "--layout"):
            self.call("binavg", "--mats", mats, "--wind-dir", self.sim / "wind_direction.csv", "--out", self.tmp / "b")


class PipelineCommandTests(CommandTestCase):
    def test_pipeline_then_report(self):
        self.write("sim.cfg", SIMULATION_CFG)
        run_cfg = self.write("run.cfg", "[run]\nsimulate = sim.cfg\nout_dir = out\n")
        out, _ = self.call("pipeline", "--config", run_cfg, "--jobs", 2)
        self.assertIn("8 window(s) (0 failed)", out)

        out, _ = self.call("report", "--run-dir", self.tmp / "out")
        self.assertIn("missing_raw", out)
        book = load_workbook(self.tmp / "out" / "report.xlsx")
        self.assertIn("bins", book.sheetnames)
        self.assertIn("manifest", book.sheetnames)

    def test_report_needs_a_run_directory(self):
        with self.assertRaises(CommandError):
            self.call("report", "--run-dir", self.tmp / "nothing")
