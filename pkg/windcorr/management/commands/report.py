import json
from pathlib import Path

import pandas as pd

from windcorr.core import CleaningReport
from windcorr.management.base import WindcorrCommand
from windcorr.utils.export import write_report_workbook
from windcorr.utils.pipeline import MANIFEST_NAME


class Command(WindcorrCommand):
    help = "Collect a pipeline run directory into one .xlsx workbook and print the cleaning summary."

    def add_arguments(self, parser):
        parser.add_argument("--run-dir", required=True, help="output folder of the pipeline command")
        parser.add_argument("--out", default=None, help="workbook path (default: <run-dir>/report.xlsx)")

    def run(self, run_dir, out, **options):
        root = Path(run_dir)
        if not root.is_dir():
            raise ValueError(f"run directory {root} does not exist")
        manifest = self._json(root / MANIFEST_NAME)
        cleaning = self._json(root / "cleaning" / "cleaning_report.json")
        spectra = self._json(root / "spectra" / "spectra.json")
        bins = None
        summary = root / "bins" / "summary.csv"
        if summary.is_file():
            frame = pd.read_csv(summary)
            bins = frame.astype(object).where(frame.notna(), None).to_dict(orient="records")

        path = write_report_workbook(out or root / "report.xlsx", manifest, cleaning, bins, spectra)

        if cleaning:
            report = CleaningReport.from_dict(cleaning)
            shares = report.percentages
            self.stdout.write(f"points            {report.total_points}")
            for key in ("missing_raw", "classified_failure", "classified_shutdown", "unassigned", "failure_overrides"):
                self.stdout.write(f"{key:<18}{getattr(report, key):>10} {shares[key]:8.2f}%")
        self.done(f"report written to {path}")

    @staticmethod
    def _json(path: Path):
        if not path.is_file():
            return None
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
