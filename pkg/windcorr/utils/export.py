"""Heatmap data, bitmaps and the ``.xlsx`` run report.

Color mapping for correlation heatmaps is linear and diverging: -1 is pure
blue ``(0, 0, 255)``, 0 is white, +1 is pure red ``(255, 0, 0)``. Bitmaps
quantize the value range into ``COLOR_BINS`` equal bins before coloring.
"""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd
from openpyxl import Workbook
from openpyxl.styles import Font

from windcorr.core import CorrelationMatrix, EigenDecomposition, PathLike

logger = logging.getLogger(__name__)

COLOR_BINS = 21


def heatmap_frame(matrix: CorrelationMatrix) -> pd.DataFrame:
    """Long format: one ``(row_id, col_id, value)`` row per matrix entry."""
    n = matrix.n
    return pd.DataFrame(
        {
            "row_id": np.repeat(matrix.ids, n),
            "col_id": np.tile(matrix.ids, n),
            "value": matrix.entries.ravel(),
        }
    )


def color_bin(value: float, bins: int = COLOR_BINS) -> int:
    """Index of the color bin of ``value``; -1 is bin 0 and +1 the last bin."""
    clipped = min(max(float(value), -1.0), 1.0)
    return min(int((clipped + 1.0) / 2.0 * bins), bins - 1)


def bin_color(index: int, bins: int = COLOR_BINS) -> tuple:
    """RGB of the bin center on the blue-white-red ramp."""
    center = -1.0 + (index + 0.5) * 2.0 / bins
    return diverging_rgb(center)


def diverging_rgb(value: float) -> tuple:
    v = min(max(float(value), -1.0), 1.0)
    if v < 0:
        fade = int(round(255 * (1.0 + v)))
        return fade, fade, 255
    fade = int(round(255 * (1.0 - v)))
    return 255, fade, fade


def heatmap_pixels(matrix: CorrelationMatrix, bins: int = COLOR_BINS) -> np.ndarray:
    """N x N x 3 ``uint8`` image of the binned matrix."""
    palette = np.array([bin_color(k, bins) for k in range(bins)], dtype=np.uint8)
    clipped = np.clip(matrix.entries, -1.0, 1.0)
    index = np.minimum(((clipped + 1.0) / 2.0 * bins).astype(int), bins - 1)
    return palette[index]


def export_heatmap_data(
    matrix: CorrelationMatrix,
    path: PathLike,
    bitmap: Optional[PathLike] = None,
    scale: int = 8,
) -> pd.DataFrame:
    """Write the long CSV (and a PNG when ``bitmap`` is given)."""
    frame = heatmap_frame(matrix)
    frame.to_csv(path, index=False, float_format="%.15g", lineterminator="\n")
    if bitmap is not None:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        pixels = np.repeat(np.repeat(heatmap_pixels(matrix), scale, axis=0), scale, axis=1)
        plt.imsave(bitmap, pixels, format="png", metadata={"Software": None})
        logger.debug("Rendered %dx%d heatmap to %s", matrix.n, matrix.n, bitmap)
    logger.info("Exported %d heatmap cell(s) to %s", len(frame), path)
    return frame


def _write_rows(sheet, header: Sequence[str], rows: Iterable[Sequence[object]]) -> None:
    sheet.append(list(header))
    for cell in sheet[1]:
        cell.font = Font(bold=True)
    for row in rows:
        sheet.append([_cell(v) for v in row])


def _cell(value):
    if isinstance(value, (list, tuple, dict)):
        return json.dumps(value)
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


def write_report_workbook(
    path: PathLike,
    manifest: Optional[Mapping[str, object]] = None,
    cleaning: Optional[Mapping[str, object]] = None,
    bins: Optional[List[Mapping[str, object]]] = None,
    spectra: Optional[Mapping[str, Mapping[str, object]]] = None,
) -> Path:
    """Collect the parts of a run directory into one workbook, one sheet each."""
    workbook = Workbook()
    workbook.remove(workbook.active)

    if manifest:
        sheet = workbook.create_sheet("manifest")
        params = manifest.get("parameters", {}) or {}
        rows: List[Sequence[object]] = [("version", manifest.get("version"))]
        rows += [(f"parameter.{k}", params[k]) for k in sorted(params)]
        for section in ("inputs", "artifacts"):
            entries: Dict[str, str] = manifest.get(section, {}) or {}
            rows += [(f"{section}.{name}", digest) for name, digest in sorted(entries.items())]
        _write_rows(sheet, ("key", "value"), rows)

    if cleaning:
        sheet = workbook.create_sheet("cleaning")
        percentages = cleaning.get("percentages", {}) or {}
        keys = ("total_points", "missing_raw", "classified_failure", "classified_shutdown",
                "unassigned", "failure_overrides", "all_failure_steps")
        _write_rows(sheet, ("count", "cells", "percent"), ((k, cleaning.get(k), percentages.get(k)) for k in keys))
        per_turbine = cleaning.get("per_turbine", {}) or {}
        if per_turbine:
            sheet = workbook.create_sheet("cleaning_per_turbine")
            columns = sorted({c for counts in per_turbine.values() for c in counts})
            _write_rows(
                sheet,
                ["turbine", *columns],
                ([tid, *(counts.get(c, 0) for c in columns)] for tid, counts in per_turbine.items()),
            )

    if bins:
        sheet = workbook.create_sheet("bins")
        header = list(bins[0].keys())
        _write_rows(sheet, header, ([row.get(h) for h in header] for row in bins))

    if spectra:
        sheet = workbook.create_sheet("spectra")
        keys = sorted({k for summary in spectra.values() for k in summary})
        _write_rows(sheet, ["matrix", *keys], ([name, *(s.get(k) for k in keys)] for name, s in sorted(spectra.items())))

    if not workbook.sheetnames:
        workbook.create_sheet("empty")
    workbook.save(path)
    logger.info("Wrote report workbook %s (%s)", path, ", ".join(workbook.sheetnames))
    return Path(path)


def spectrum_frame(decomposition: EigenDecomposition, ids: Sequence[str]) -> pd.DataFrame:
    """One row per eigenvalue (descending) followed by its eigenvector components."""
    frame = pd.DataFrame(decomposition.eigenvectors.T, columns=list(ids))
    frame.insert(0, "eigenvalue", decomposition.eigenvalues)
    frame.insert(0, "k", np.arange(1, len(frame) + 1))
    return frame


def write_spectrum(decomposition: EigenDecomposition, ids: Sequence[str], path: PathLike, digits: int = 15) -> None:
    spectrum_frame(decomposition, ids).to_csv(path, index=False, float_format=f"%.{digits}g", lineterminator="\n")
