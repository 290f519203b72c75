import numpy as np
from django.test import SimpleTestCase

from windcorr.core import CorrelationMatrix, MatrixSource, Observable
from windcorr.tests.helpers import T0, panel
from windcorr.utils.direction import (
    DegenerateMean,
    DirectedMatrix,
    DirectionBins,
    DirectionError,
    MixedTurbineSets,
    NoDirectionData,
    angular_difference,
    bin_average,
    bin_of,
    bin_summary,
    circular_mean,
    circular_mean_along,
    directed_matrices,
    front_line,
    mean_block_correlation,
    window_direction,
)
from windcorr.utils.simulator import riffgat_like_layout, thanet_like_layout


def matrix(rho, ids=("1", "2"), start=T0, length=1200.0, source=MatrixSource.RAW):
    entries = np.full((len(ids), len(ids)), float(rho))
    np.fill_diagonal(entries, 1.0)
    return CorrelationMatrix(ids, entries, start, length, source)


class CircularMeanTests(SimpleTestCase):
    def assertBearing(self, actual, expected, tol=1e-9):
        self.assertLess(abs(angular_difference(actual, expected)), tol, actual)

    def test_wraps_across_north(self):
        self.assertBearing(circular_mean([350.0, 10.0]).direction, 0.0)
        self.assertBearing(circular_mean([340.0, 350.0, 0.0]).direction, 350.0)
        self.assertBearing(circular_mean([90.0, 180.0]).direction, 135.0)

    def test_weights(self):
        result = circular_mean([0.0, 90.0], weights=[1.0, 0.0])
        self.assertBearing(result.direction, 0.0)
        self.assertAlmostEqual(result.resultant_length, 1.0)
        with self.assertRaises(ValueError):
            circular_mean([0.0, 90.0], weights=[1.0])

    def test_degenerate_and_empty(self):
        with self.assertRaises(DegenerateMean):
            circular_mean([0.0, 180.0])
        with self.assertRaises(DegenerateMean):
            circular_mean([0.0, 120.0, 240.0])
        with self.assertRaises(NoDirectionData):
            circular_mean([])

    def test_result_lies_in_compass_range(self):
        for angles in ([359.9, 359.95], [-10.0, -20.0], [720.0, 721.0]):
            direction = circular_mean(angles).direction
            self.assertGreaterEqual(direction, 0.0)
            self.assertLess(direction, 360.0)

    def test_vectorized_mean(self):
        values = np.array([[350.0, 10.0], [0.0, 180.0], [0.0, 0.0]])
        mask = np.array([[True, True], [True, True], [False, False]])
        direction, resultant = circular_mean_along(values, mask, axis=1)
        self.assertLess(min(direction[0], 360.0 - direction[0]), 1e-9)
        self.assertTrue(np.isnan(direction[1]))
        self.assertTrue(np.isnan(direction[2]))
        self.assertAlmostEqual(resultant[0], np.cos(np.deg2rad(10.0)))

    def test_angular_difference(self):
        self.assertEqual(angular_difference(10.0, 350.0), 20.0)
        self.assertEqual(angular_difference(350.0, 10.0), -20.0)
        self.assertEqual(angular_difference(180.0, 0.0), -180.0)

    def test_rotating_every_angle_rotates_the_mean(self):
        rng = np.random.default_rng(23)
        checked = 0
        for trial in range(1000):
            angles = rng.uniform(0.0, 360.0, rng.integers(1, 12))
            weights = rng.uniform(0.1, 2.0, angles.size)
            offset = rng.uniform(-720.0, 720.0)
            try:
                before = circular_mean(angles, weights)
            except DegenerateMean:
                continue
            if before.resultant_length < 1e-3:
                continue
            with self.subTest(trial=trial):
                after = circular_mean(angles + offset, weights)
                self.assertBearing(after.direction, before.direction + offset)
                self.assertAlmostEqual(after.resultant_length, before.resultant_length, places=9)
                checked += 1
        self.assertGreater(checked, 900)

    def test_antipodal_pairs_are_degenerate(self):
        for angle in (0.0, 12.5, 90.0, 271.3):
            with self.subTest(angle=angle), self.assertRaises(DegenerateMean):
                circular_mean([angle, angle + 180.0])


class WindowDirectionTests(SimpleTestCase):
    def test_pools_turbines_and_time(self):
        p = panel([[350.0, 355.0, None], [5.0, None, 10.0]], observable=Observable.WIND_DIRECTION)
        direction = window_direction(p)
        self.assertLess(abs(angular_difference(direction, 0.0)), 1e-9)

    def test_empty_window(self):
        p = panel([[None, 10.0]], observable=Observable.WIND_DIRECTION)
        with self.assertRaises(NoDirectionData):
            window_direction(p, 0, 1)
        with self.assertRaises(IndexError):
            window_direction(p, 1, 2)


class BinTests(SimpleTestCase):
    def test_edges_are_half_open(self):
        bins = DirectionBins()
        self.assertEqual(bin_of(0.0, bins), 0)
        self.assertEqual(bin_of(22.4, bins), 0)
        self.assertEqual(bin_of(22.5, bins), 1)
        self.assertEqual(bin_of(337.4, bins), 7)
        self.assertEqual(bin_of(337.5, bins), 0)
        self.assertEqual(bin_of(359.99, bins), 0)
        self.assertEqual(bins.edges(0), (337.5, 22.5))

    def test_bins_follow_the_layout_rows(self):
        bins = DirectionBins.from_layout(thanet_like_layout())
        self.assertEqual(bins.center0, 45.0)
        self.assertEqual(bin_of(45.0, bins), 0)
        self.assertEqual(bin_of(67.5, bins), 1)
        self.assertEqual(bins.center(7), 0.0)
        self.assertEqual(DirectionBins.from_layout(thanet_like_layout(), center0=0.0).center0, 0.0)

    def test_bins_partition_the_circle(self):
        with self.assertRaises(ValueError):
            DirectionBins(width=40.0)

    def test_moving_the_first_center_by_one_width_shifts_every_index(self):
        rng = np.random.default_rng(29)
        for center0 in (0.0, 22.5, 45.0, 301.0):
            moved = DirectionBins(center0 + 45.0)
            bins = DirectionBins(center0)
            for angle in rng.uniform(-360.0, 720.0, 200):
                with self.subTest(center0=center0, angle=angle):
                    self.assertEqual(bin_of(angle, bins), (bin_of(angle, moved) + 1) % 8)


class DirectedMatrixTests(SimpleTestCase):
    def setUp(self):
        self.direction = panel(
            [[350.0, 10.0, None, None, 90.0, 90.0], [0.0, 0.0, None, None, 92.0, 88.0]],
            observable=Observable.WIND_DIRECTION,
        )
        self.speed = panel([[4.0, 6.0, 1.0, 1.0, 9.0, 9.0]] * 2, observable=Observable.WIND_SPEED)

    def test_windows_get_direction_and_speed(self):
        matrices = [matrix(0.5, start=self.direction.time_at(k)) for k in (0, 2, 4)]
        directed = directed_matrices(matrices, self.direction, self.speed)
        self.assertLess(abs(angular_difference(directed[0].direction, 0.0)), 1e-9)
        self.assertEqual(directed[0].wind_speed, 5.0)
        self.assertIsNone(directed[1].direction)
        self.assertEqual(directed[1].wind_speed, 1.0)
        self.assertLess(abs(directed[2].direction - 90.0), 1e-9)

    def test_window_off_the_grid(self):
        with self.assertRaises(DirectionError):
            directed_matrices([matrix(0.5, length=900.0)], self.direction)


class BinAverageTests(SimpleTestCase):
    def test_average_per_bin(self):
        items = [
            DirectedMatrix(matrix(0.2), 350.0, 6.0),
            DirectedMatrix(matrix(0.4), 10.0, 8.0),
            DirectedMatrix(matrix(0.9), 180.0, None),
            DirectedMatrix(matrix(0.1), None, 5.0),
        ]
        binned = bin_average(items, DirectionBins(), jobs=2)
        north = binned.by_label("N")
        self.assertEqual(north.window_count, 2)
        self.assertAlmostEqual(north.matrix.entries[0, 1], 0.3)
        self.assertEqual(north.mean_wind_speed, 7.0)
        self.assertLess(abs(angular_difference(north.mean_direction, 0.0)), 1e-9)
        south = binned.by_label("S")
        self.assertEqual(south.matrix.entries[0, 1], 0.9)
        self.assertIsNone(south.mean_wind_speed)
        self.assertTrue(binned.by_label("E").is_empty)
        self.assertIsNone(binned.by_label("E").matrix)
        self.assertEqual((binned.assigned, binned.excluded), (3, 1))

        rows = bin_summary(binned)
        self.assertEqual([r["bin"] for r in rows], ["N", "NE", "E", "SE", "S", "SW", "W", "NW"])
        self.assertEqual(rows[4]["center_deg"], 180.0)

    def test_mixed_inputs_are_rejected(self):
        with self.assertRaises(MixedTurbineSets):
            bin_average(
                [DirectedMatrix(matrix(0.2), 0.0), DirectedMatrix(matrix(0.2, ids=("1", "3")), 0.0)],
                DirectionBins(),
            )
        with self.assertRaises(MixedTurbineSets):
            bin_average(
                [DirectedMatrix(matrix(0.2), 0.0), DirectedMatrix(matrix(0.2, source=MatrixSource.REDUCED), 0.0)],
                DirectionBins(),
            )

    def test_no_windows(self):
        binned = bin_average([], DirectionBins())
        self.assertTrue(all(a.is_empty for a in binned.averages))


class LayoutGeometryTests(SimpleTestCase):
    def test_front_line_of_riffgat(self):
        layout = riffgat_like_layout()
        self.assertEqual(front_line(layout, 0.0), frozenset(str(i) for i in range(1, 11)))
        self.assertEqual(front_line(layout, 180.0), frozenset(str(i) for i in range(21, 31)))
        self.assertEqual(front_line(layout, 270.0), frozenset({"1", "11", "21"}))
        self.assertEqual(front_line(layout, 90.0), frozenset({"10", "20", "30"}))

    def test_mean_block_correlation(self):
        m = CorrelationMatrix(("a", "b", "c"), [[1, 0.8, 0.1], [0.8, 1, 0.3], [0.1, 0.3, 1]], T0, 600)
        self.assertAlmostEqual(mean_block_correlation(m, ["a", "b"], ["a", "b"]), 0.8)
        self.assertAlmostEqual(mean_block_correlation(m, ["a", "b"], ["c"]), 0.2)
        with self.assertRaises(ValueError):
            mean_block_correlation(m, ["a"], ["a"])
