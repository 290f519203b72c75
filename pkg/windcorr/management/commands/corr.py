from pathlib import Path

from windcorr.conf import get_setting
from windcorr.core import read_panel
from windcorr.management.base import WindcorrCommand
from windcorr.utils import correlation
from windcorr.utils.export import export_heatmap_data
from windcorr.utils.pipeline import window_name, write_window_matrices


class Command(WindcorrCommand):
    help = "Sliding-window correlation matrices of a complete panel."

    def add_arguments(self, parser):
        parser.add_argument("--panel", required=True, help="filled panel CSV (no NA cells)")
        parser.add_argument(
            "--observable",
            help="observable of the panel (power, speed, direction or deviation); default: from the panel sidecar",
        )
        parser.add_argument("--window", default=get_setting("WINDOW"), help="window length, e.g. 30m or 12h")
        parser.add_argument("--stride", default=get_setting("STRIDE"), help="distance between window starts")
        parser.add_argument(
            "--mode",
            default=get_setting("MODE"),
            help="raw, deviation, reduced (drop the first singular value) or reduced:1,2",
        )
        parser.add_argument("--out-dir", required=True, help="folder for the matrix CSVs and sidecars")
        parser.add_argument("--heatmaps", action="store_true", help="also write long-format heatmap CSVs and PNGs")
        self.add_jobs_argument(parser)

    def run(self, panel, observable, window, stride, mode, out_dir, heatmaps, jobs, **options):
        data = read_panel(panel, observable)
        spec = correlation.WindowSpec(window, stride)
        results = correlation.sliding_correlations(data, spec, mode, jobs)
        written = write_window_matrices(results, out_dir)
        if heatmaps:
            for result in results:
                if isinstance(result, correlation.WindowFailure):
                    continue
                name = Path(out_dir) / window_name(result)
                export_heatmap_data(result, f"{name}_heatmap.csv", f"{name}.png")
        failed = len(results) - len(written)
        if failed:
            self.stderr.write(self.style.WARNING(f"{failed} window(s) had zero-variance turbines, see failures.json"))
        self.done(f"{len(written)} matrix file(s) written to {out_dir}")
