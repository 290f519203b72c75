from windcorr.core import Observable, read_layout, read_panel
from windcorr.management.base import WindcorrCommand
from windcorr.utils import direction
from windcorr.utils.pipeline import parse_center0, read_window_matrices, write_bins


class Command(WindcorrCommand):
    help = "Average window correlation matrices per 45 degree wind direction bin."

    def add_arguments(self, parser):
        parser.add_argument("--mats", required=True, help="folder written by the corr command")
        parser.add_argument("--wind-dir", required=True, help="wind direction panel CSV")
        parser.add_argument("--wind-speed", default=None, help="wind speed panel CSV for the per-bin mean speed")
        parser.add_argument("--layout", default=None, help="layout CSV (needed for --center0 auto)")
        parser.add_argument(
            "--center0",
            default="auto",
            help="bearing of the centre of bin N in degrees, or auto for the layout's row-orthogonal bearing",
        )
        parser.add_argument("--out", required=True, help="folder for the bin matrices and summary.csv")
        parser.add_argument("--heatmaps", action="store_true", help="also write heatmap CSVs and PNGs per bin")
        self.add_jobs_argument(parser)

    def run(self, mats, wind_dir, wind_speed, layout, center0, out, heatmaps, jobs, **options):
        center = parse_center0(center0)
        if center is None:
            if not layout:
                raise ValueError("--center0 auto needs --layout")
            bins = direction.DirectionBins.from_layout(read_layout(layout))
        else:
            bins = direction.DirectionBins(center)
        matrices = read_window_matrices(mats)
        if not matrices:
            raise ValueError(f"no window matrices found in {mats}")
        directions = read_panel(wind_dir, Observable.WIND_DIRECTION)
        speeds = read_panel(wind_speed, Observable.WIND_SPEED) if wind_speed else None
        binned = direction.bin_average(direction.directed_matrices(matrices, directions, speeds), bins, jobs)
        write_bins(binned, out, heatmaps=heatmaps)
        counts = ", ".join(f"{a.label}={a.window_count}" for a in binned.averages)
        self.done(f"{binned.assigned} window(s) binned ({counts}), {binned.excluded} excluded")
