import json

from django.test import SimpleTestCase

from windcorr.core import read_matrix, read_panel
from windcorr.tests.helpers import SIMULATION_CFG, TempDirMixin
from windcorr.utils.direction import COMPASS_LABELS
from windcorr.utils.pipeline import (
    MANIFEST_NAME,
    RunConfig,
    StageError,
    load_manifest,
    parse_center0,
    read_window_matrices,
    run_pipeline,
)
from windcorr.utils.simulator import SimulationConfig, simulate, write_simulation


class RunConfigTests(TempDirMixin, SimpleTestCase):
    def test_exactly_one_source(self):
        with self.assertRaises(ValueError):
            RunConfig(self.tmp / "out")
        with self.assertRaises(ValueError):
            RunConfig(self.tmp / "out", raw="a.csv", simulate="b.cfg")
        with self.assertRaises(ValueError):
            RunConfig(self.tmp / "out", power="p.csv")

    def test_normalizes_values(self):
        config = RunConfig(self.tmp / "out", raw="raw.csv", window="30m", stride="10m", mode="reduced:2,1", step="10s")
        self.assertEqual((config.window, config.stride, config.step), (1800.0, 600.0, 10.0))
        self.assertEqual(config.mode, "reduced:1,2")
        self.assertEqual(config.parameters()["center0"], "auto")
        with self.assertRaises(ValueError):
            RunConfig(self.tmp / "out", raw="raw.csv", clean="aggressive")

    def test_from_file_resolves_relative_paths(self):
        path = self.write(
            "runs/run.cfg",
            "[run]\nraw = data/raw.csv\nlayout = /srv/farm.csv\nout_dir = out\nheatmaps = yes\ncenter0 = 45\n",
        )
        config = RunConfig.from_file(path, jobs=3, seed=None)
        base = path.parent.resolve()
        self.assertEqual(config.raw, base / "data" / "raw.csv")
        self.assertEqual(str(config.layout), "/srv/farm.csv")
        self.assertEqual(config.out_dir, base / "out")
        self.assertTrue(config.heatmaps)
        self.assertEqual((config.center0, config.jobs), (45.0, 3))
        self.assertIn("layout_cfg", config.inputs())

    def test_from_file_errors_name_the_config_stage(self):
        for text in ("[run]\nwindow_size = 12h\n", "[run]\nraw = r.csv\nout_dir = o\neigen = maybe\n", "[other]\n"):
            with self.subTest(text=text):
                with self.assertRaises(StageError) as ctx:
                    RunConfig.from_file(self.write("bad.cfg", text))
                self.assertEqual(ctx.exception.stage, "config")

    def test_center0(self):
        self.assertIsNone(parse_center0("auto"))
        self.assertEqual(parse_center0("405"), 45.0)
        with self.assertRaises(ValueError):
            parse_center0("north")


class SimulatedRunTests(TempDirMixin, SimpleTestCase):
    def setUp(self):
        super().setUp()
        self.write("sim.cfg", SIMULATION_CFG)
        self.run_cfg = self.write("run.cfg", "[run]\nsimulate = sim.cfg\nout_dir = out\nwindow = 12h\nstride = 12h\n")

    def test_full_run(self):
        result = run_pipeline(RunConfig.from_file(self.run_cfg))
        out = self.tmp / "out"
        self.assertEqual(result.out_dir, out.resolve())
        self.assertEqual((result.windows, result.failed_windows), (8, 0))
        self.assertEqual(len(read_window_matrices(out / "matrices")), 8)

        bins = sorted(p.stem for p in (out / "bins").glob("*.csv") if p.stem != "summary")
        self.assertEqual(bins, sorted(COMPASS_LABELS))
        self.assertEqual(read_matrix(out / "bins" / "N.csv").source.value, "reduced")
        self.assertTrue(read_panel(out / "cleaning" / "filled_power.csv").is_complete)
        self.assertEqual(len(list((out / "spectra").glob("window_*.csv"))), 8)

        manifest = load_manifest(out)
        self.assertEqual(list(manifest["inputs"]), ["simulate"])
        self.assertIn("cleaning/labels.csv", manifest["artifacts"])
        self.assertIn("simulation/raw.csv", manifest["artifacts"])
        self.assertNotIn(MANIFEST_NAME, manifest["artifacts"])
        self.assertEqual(manifest["parameters"]["mode"], "reduced")
        self.assertEqual(list(self.tmp.glob(".out.*")), [])

    def test_identical_runs_identical_manifests(self):
        first = run_pipeline(RunConfig.from_file(self.run_cfg, out_dir=self.tmp / "a"))
        second = run_pipeline(RunConfig.from_file(self.run_cfg, out_dir=self.tmp / "b"))
        self.assertEqual(first.manifest, second.manifest)
        self.assertEqual(
            (self.tmp / "a" / MANIFEST_NAME).read_bytes(),
            (self.tmp / "b" / MANIFEST_NAME).read_bytes(),
        )
        third = run_pipeline(RunConfig.from_file(self.run_cfg, out_dir=self.tmp / "a", seed=8))
        self.assertNotEqual(third.manifest["artifacts"], first.manifest["artifacts"])

    def test_failed_stage_keeps_previous_output(self):
        run_pipeline(RunConfig.from_file(self.run_cfg))
        before = (self.tmp / "out" / MANIFEST_NAME).read_bytes()
        thresholds = self.write("thresholds.cfg", "[thresholds]\ndens_min = 2\n")
        with self.assertRaises(StageError) as ctx:
            run_pipeline(RunConfig.from_file(self.run_cfg, thresholds=thresholds))
        self.assertEqual(ctx.exception.stage, "classify")
        self.assertEqual((self.tmp / "out" / MANIFEST_NAME).read_bytes(), before)
        self.assertEqual(list(self.tmp.glob(".out.*")), [])

    def test_missing_input(self):
        with self.assertRaises(StageError) as ctx:
            run_pipeline(RunConfig(self.tmp / "out", raw=self.tmp / "nowhere.csv"))
        self.assertEqual(ctx.exception.stage, "config")
        self.assertIn("nowhere.csv", str(ctx.exception))
        self.assertFalse((self.tmp / "out").exists())


class PanelRunTests(TempDirMixin, SimpleTestCase):
    def setUp(self):
        super().setUp()
        config = SimulationConfig.from_config(self.write("sim.cfg", SIMULATION_CFG))
        self.paths = write_simulation(simulate(config), self.tmp / "sim")

    def test_panels_with_fixed_bins(self):
        config = RunConfig(
            self.tmp / "out",
            power=self.paths["power"],
            wind_speed=self.paths["wind_speed"],
            wind_direction=self.paths["wind_direction"],
            layout=self.paths["layout"],
            mode="deviation",
            eigen=False,
            center0=0.0,
        )
        result = run_pipeline(config)
        self.assertEqual(
            sorted(result.manifest["inputs"]),
            ["layout", "layout_cfg", "power", "wind_direction", "wind_speed"],
        )
        self.assertFalse((self.tmp / "out" / "spectra").exists())
        summary = (self.tmp / "out" / "bins" / "summary.csv").read_text().splitlines()
        self.assertEqual(len(summary), 9)
        self.assertEqual(result.manifest["parameters"]["center0"], 0.0)

    def test_binning_needs_directions(self):
        config = RunConfig(self.tmp / "out", power=self.paths["power"], wind_speed=self.paths["wind_speed"])
        with self.assertRaises(StageError) as ctx:
            run_pipeline(config)
        self.assertEqual(ctx.exception.stage, "binavg")

    def test_cleaning_report_is_json(self):
        config = RunConfig(
            self.tmp / "out", power=self.paths["power"], wind_speed=self.paths["wind_speed"], binavg=False
        )
        run_pipeline(config)
        report = json.loads((self.tmp / "out" / "cleaning" / "cleaning_report.json").read_text())
        self.assertEqual(report["total_points"], 30 * 576)
