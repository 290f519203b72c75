import numpy as np
import pandas as pd
from django.test import SimpleTestCase
from openpyxl import load_workbook

from windcorr.core import CorrelationMatrix
from windcorr.tests.helpers import T0, TempDirMixin
from windcorr.utils.correlation import eigen
from windcorr.utils.export import (
    COLOR_BINS,
    bin_color,
    color_bin,
    diverging_rgb,
    export_heatmap_data,
    heatmap_frame,
    heatmap_pixels,
    spectrum_frame,
    write_report_workbook,
    write_spectrum,
)


def identity(n):
    return CorrelationMatrix(tuple(str(i + 1) for i in range(n)), np.eye(n), T0, 600.0)


class HeatmapTests(TempDirMixin, SimpleTestCase):
    def test_long_format(self):
        frame = heatmap_frame(identity(2))
        self.assertEqual(list(frame.columns), ["row_id", "col_id", "value"])
        self.assertEqual(frame["value"].tolist(), [1.0, 0.0, 0.0, 1.0])
        self.assertEqual(frame["row_id"].tolist(), ["1", "1", "2", "2"])
        self.assertEqual(frame["col_id"].tolist(), ["1", "2", "1", "2"])
        self.assertEqual(len(heatmap_frame(identity(30))), 900)

    def test_color_bins(self):
        self.assertEqual(color_bin(-1.0), 0)
        self.assertEqual(color_bin(1.0), COLOR_BINS - 1)
        self.assertEqual(color_bin(0.0), COLOR_BINS // 2)
        self.assertEqual(color_bin(-3.0), 0)
        self.assertEqual(diverging_rgb(-1.0), (0, 0, 255))
        self.assertEqual(diverging_rgb(0.0), (255, 255, 255))
        self.assertEqual(diverging_rgb(1.0), (255, 0, 0))
        self.assertEqual(bin_color(COLOR_BINS // 2), (255, 255, 255))

    def test_pixels(self):
        pixels = heatmap_pixels(identity(3))
        self.assertEqual(pixels.shape, (3, 3, 3))
        self.assertEqual(pixels.dtype, np.uint8)
        np.testing.assert_array_equal(pixels[0, 0], bin_color(COLOR_BINS - 1))
        np.testing.assert_array_equal(pixels[0, 1], [255, 255, 255])

    def test_export_files(self):
        csv_path, png_path = self.tmp / "m.csv", self.tmp / "m.png"
        export_heatmap_data(identity(4), csv_path, bitmap=png_path, scale=2)
        again = pd.read_csv(csv_path, dtype={"row_id": str, "col_id": str})
        self.assertEqual(len(again), 16)
        self.assertEqual(png_path.read_bytes()[:8], b"\x89PNG\r\n\x1a\n")


class SpectrumFileTests(TempDirMixin, SimpleTestCase):
    def test_rows_follow_descending_eigenvalues(self):
        m = CorrelationMatrix(("a", "b"), [[1.0, 0.5], [0.5, 1.0]], T0, 600.0)
        frame = spectrum_frame(eigen(m), m.ids)
        self.assertEqual(list(frame.columns), ["k", "eigenvalue", "a", "b"])
        np.testing.assert_allclose(frame["eigenvalue"], [1.5, 0.5])
        path = self.tmp / "spectrum.csv"
        write_spectrum(eigen(m), m.ids, path)
        self.assertEqual(pd.read_csv(path)["k"].tolist(), [1, 2])


class WorkbookTests(TempDirMixin, SimpleTestCase):
    def test_sheets(self):
        path = self.tmp / "report.xlsx"
        write_report_workbook(
            path,
            manifest={"version": "1.0.0", "parameters": {"window": "12h"}, "inputs": {"power": "ab"}, "artifacts": {}},
            cleaning={"total_points": 10, "missing_raw": 2, "percentages": {"missing_raw": 20.0},
                      "per_turbine": {"1": {"missing": 2}}},
            bins=[{"bin": "N", "window_count": 3}],
            spectra={"window_a": {"n": 2, "largest": [1.5, 0.5]}},
        )
        book = load_workbook(path)
        self.assertEqual(book.sheetnames, ["manifest", "cleaning", "cleaning_per_turbine", "bins", "spectra"])
        rows = list(book["manifest"].iter_rows(values_only=True))
        self.assertEqual(rows[0], ("key", "value"))
        self.assertIn(("parameter.window", "12h"), rows)
        self.assertIn(("inputs.power", "ab"), rows)
        self.assertTrue(book["bins"]["A1"].font.bold)
        self.assertEqual(book["spectra"]["B2"].value, "[1.5, 0.5]")

    def test_empty_workbook(self):
        path = self.tmp / "empty.xlsx"
        write_report_workbook(path)
        self.assertEqual(load_workbook(path).sheetnames, ["empty"])
