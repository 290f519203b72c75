import numpy as np
import pandas as pd
from django.test import SimpleTestCase

from windcorr.core import (
    CleaningReport,
    CorrelationMatrix,
    FarmLayout,
    InvalidPanel,
    LayoutError,
    MatrixSource,
    Observable,
    PanelFormatError,
    SignalPanel,
    format_timestamps,
    parse_duration,
    read_layout,
    read_matrix,
    read_panel,
    require_valid,
    steps_of,
    validate_panel,
    write_layout,
    write_matrix,
    write_panel,
)
from windcorr.tests.helpers import T0, TempDirMixin, panel


class ObservableTests(SimpleTestCase):
    def test_aliases(self):
        self.assertIs(Observable.parse("power"), Observable.ACTIVE_POWER)
        self.assertIs(Observable.parse("speed"), Observable.WIND_SPEED)
        self.assertIs(Observable.parse("direction"), Observable.WIND_DIRECTION)
        self.assertIs(Observable.parse("Wind_Direction"), Observable.WIND_DIRECTION)

    def test_unknown_tag(self):
        with self.assertRaises(ValueError):
            Observable.parse("rotor_rpm")


class DurationTests(SimpleTestCase):
    def test_units(self):
        self.assertEqual(parse_duration("30m"), 1800.0)
        self.assertEqual(parse_duration("12h"), 43200.0)
        self.assertEqual(parse_duration("10s"), 10.0)
        self.assertEqual(parse_duration("1d"), 86400.0)
        self.assertEqual(parse_duration(600), 600.0)
        self.assertEqual(parse_duration("600"), 600.0)

    def test_rejects_nonpositive_and_garbage(self):
        for text in ("0", "-5m", "soon"):
            with self.assertRaises(ValueError):
                parse_duration(text)

    def test_steps_of(self):
        self.assertEqual(steps_of(43200, 600), 72)
        with self.assertRaises(ValueError):
            steps_of(900, 600)


class SignalPanelTests(SimpleTestCase):
    def test_masked_cells_hold_nan_and_arrays_are_read_only(self):
        p = panel([[1.0, None, 3.0]])
        self.assertTrue(np.isnan(p.values[0, 1]))
        self.assertFalse(p.mask[0, 1])
        with self.assertRaises(ValueError):
            p.values[0, 0] = 5.0

    def test_shape_helpers(self):
        p = panel([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]], step=10.0)
        self.assertEqual((p.n_turbines, p.n_steps), (2, 3))
        self.assertEqual(p.duration, 30.0)
        self.assertEqual(p.time_at(2), pd.Timestamp(T0) + pd.Timedelta(seconds=20))
        self.assertTrue(p.is_complete)

    def test_window_and_select(self):
        p = panel([[1.0, 2.0, 3.0, 4.0], [5.0, 6.0, 7.0, 8.0]])
        w = p.window(1, 2)
        np.testing.assert_array_equal(w.values, [[2.0, 3.0], [6.0, 7.0]])
        self.assertEqual(w.t0, p.time_at(1))
        s = p.select(["2"])
        self.assertEqual(s.turbine_ids, ("2",))
        with self.assertRaises(IndexError):
            p.window(3, 2)
        with self.assertRaises(KeyError):
            p.select(["9"])

    def test_equality_is_bitwise(self):
        a = panel([[0.1 + 0.2, None]])
        b = panel([[0.3, None]])
        self.assertNotEqual(a, b)
        self.assertEqual(a, panel([[0.1 + 0.2, None]]))

    def test_validation_reports_every_problem(self):
        p = SignalPanel(("a", "a"), T0, 0.0, np.ones((2, 3)), np.ones((2, 3), dtype=bool))
        codes = {v.code for v in validate_panel(p)}
        self.assertEqual(codes, {"duplicate_id", "nonpositive_step"})
        with self.assertRaises(InvalidPanel):
            require_valid(p)

    def test_present_infinite_value_is_a_violation(self):
        p = SignalPanel(("a",), T0, 600, [[1.0, np.inf]], [[True, True]])
        self.assertEqual([v.code for v in validate_panel(p)], ["non_finite_value"])


class PanelCsvTests(TempDirMixin, SimpleTestCase):
    def test_round_trip_is_bit_exact(self):
        rng = np.random.default_rng(3)
        values = rng.normal(1500.0, 400.0, (3, 5))
        values[1, 2] = np.nan
        p = SignalPanel.from_values(("7", "8", "9"), T0, 600, values)
        path = self.tmp / "p.csv"
        write_panel(p, path)
        again = read_panel(path)
        self.assertTrue(again.equals(p))
        self.assertIn("NA", path.read_text().splitlines()[3])

    def test_single_row_keeps_its_step(self):
        p = SignalPanel.from_values(("1", "2"), T0, 10, [[5.0], [np.nan]])
        path = self.tmp / "one.csv"
        write_panel(p, path)
        again = read_panel(path)
        self.assertEqual(again.step, 10.0)
        self.assertTrue(again.equals(p))

    def test_single_row_without_metadata_needs_a_step(self):
        path = self.write("bare.csv", "timestamp,1\n2014-03-01T00:00:00Z,1\n")
        with self.assertRaisesRegex(PanelFormatError, "explicit step"):
            read_panel(path)
        self.assertEqual(read_panel(path, step=30).step, 30.0)

    def test_observable_round_trip(self):
        p = SignalPanel.from_values(("1", "2"), T0, 600, [[350.0, 10.5], [0.25, np.nan]], Observable.WIND_DIRECTION)
        path = self.tmp / "direction.csv"
        write_panel(p, path)
        self.assertEqual(path.read_text().splitlines()[0], "timestamp,1,2")
        again = read_panel(path)
        self.assertIs(again.observable, Observable.WIND_DIRECTION)
        self.assertTrue(again.equals(p))
        with self.assertRaisesRegex(PanelFormatError, "wind_direction"):
            read_panel(path, Observable.ACTIVE_POWER)
        with self.assertRaisesRegex(PanelFormatError, "differs"):
            read_panel(path, step=10)

    def test_header_and_timestamp_errors(self):
        bad_header = self.write("a.csv", "time,1\n2014-03-01T00:00:00Z,1\n")
        with self.assertRaises(PanelFormatError):
            read_panel(bad_header)
        bad_stamp = self.write("b.csv", "timestamp,1\n2014-03-01T00:00:00Z,1\nyesterday,2\n")
        with self.assertRaisesRegex(PanelFormatError, ":3:"):
            read_panel(bad_stamp)

    def test_irregular_spacing_is_rejected(self):
        path = self.write(
            "c.csv",
            "timestamp,1\n2014-03-01T00:00:00Z,1\n2014-03-01T00:10:00Z,2\n2014-03-01T00:30:00Z,3\n",
        )
        with self.assertRaisesRegex(PanelFormatError, "uniformly"):
            read_panel(path)

    def test_non_numeric_cell_names_its_location(self):
        path = self.write("d.csv", "timestamp,1,2\n2014-03-01T00:00:00Z,1,abc\n")
        with self.assertRaisesRegex(PanelFormatError, ":2:3"):
            read_panel(path)

    def test_timestamps_format(self):
        stamps = [pd.Timestamp("2014-03-01T00:00:00Z"), pd.Timestamp("2014-03-01T00:00:10Z")]
        self.assertEqual(format_timestamps(stamps), ["2014-03-01T00:00:00Z", "2014-03-01T00:00:10Z"])


class FarmLayoutTests(TempDirMixin, SimpleTestCase):
    def test_validation(self):
        with self.assertRaises(LayoutError):
            FarmLayout(("1", "2"), [[0, 0], [0, 0]], 120.0, (0, 0))
        with self.assertRaises(LayoutError):
            FarmLayout(("1", "1"), [[0, 0], [1, 0]], 120.0, (0, 0))
        with self.assertRaises(LayoutError):
            FarmLayout(("1", "2"), [[0, 0], [1, 0]], 0.0, (0, 0))
        with self.assertRaises(LayoutError):
            FarmLayout(("1", "2"), [[0, 0], [1, 0]], 120.0, (0, 2))

    def test_rows_and_round_trip(self):
        layout = FarmLayout(("1", "2", "3"), [[0, 0], [500, 0], [0, -600]], 120.0, (0, 0, 1), 90.0)
        self.assertEqual(layout.rows(), [("1", "2"), ("3",)])
        path = self.tmp / "farm.csv"
        write_layout(layout, path)
        again = read_layout(path)
        self.assertEqual(again.turbine_ids, layout.turbine_ids)
        np.testing.assert_array_equal(again.positions, layout.positions)
        self.assertEqual(again.rotor_diameter, 120.0)
        self.assertEqual(again.row_orthogonal_bearing, 90.0)


class CorrelationMatrixTests(TempDirMixin, SimpleTestCase):
    def test_violations(self):
        good = CorrelationMatrix(("a", "b"), [[1.0, 0.5], [0.5, 1.0]], T0, 600.0)
        self.assertEqual(good.violations(), [])
        bad = CorrelationMatrix(
            ("a", "b", "c"),
            [[1.0, 0.9, -0.9], [0.9, 1.0, 0.9], [-0.9, 0.9, 1.0]],
            T0,
            600.0,
        )
        self.assertTrue(any("positive semi-definite" in p for p in bad.violations()))
        skew = CorrelationMatrix(("a", "b"), [[1.0, 0.5], [0.4, 1.0]], T0, 600.0)
        self.assertIn("not symmetric", skew.violations())

    def test_matrix_file_keeps_metadata(self):
        m = CorrelationMatrix(("1", "2"), [[1.0, 1 / 3], [1 / 3, 1.0]], T0, 43200.0, MatrixSource.REDUCED, 2, 72)
        path = self.tmp / "m.csv"
        write_matrix(m, path)
        again = read_matrix(path)
        self.assertEqual(again.ids, ("1", "2"))
        self.assertAlmostEqual(again.entries[0, 1], 1 / 3, places=14)
        self.assertIs(again.source, MatrixSource.REDUCED)
        self.assertEqual((again.rank, again.n_samples, again.window_len), (2, 72, 43200.0))
        self.assertEqual(again.window_start, m.window_start)


class CleaningReportTests(SimpleTestCase):
    def test_partition_identity_is_enforced(self):
        with self.assertRaises(ValueError):
            CleaningReport(total_points=10, missing_raw=3, classified_failure=1, unassigned=1)

    def test_json_round_trip(self):
        report = CleaningReport(
            total_points=200,
            missing_raw=20,
            classified_failure=8,
            classified_shutdown=10,
            unassigned=2,
            failure_overrides=1,
        )
        self.assertEqual(report.percentages["missing_raw"], 10.0)
        again = CleaningReport.from_dict(__import__("json").loads(report.to_json()))
        self.assertEqual(again, report)
