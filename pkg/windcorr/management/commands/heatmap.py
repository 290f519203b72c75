from windcorr.core import read_matrix
from windcorr.management.base import WindcorrCommand
from windcorr.utils.export import export_heatmap_data


class Command(WindcorrCommand):
    help = "Export a correlation matrix as long-format heatmap data, optionally as PNG."

    def add_arguments(self, parser):
        parser.add_argument("--matrix", required=True, help="matrix CSV")
        parser.add_argument("--out", required=True, help="long CSV with row_id, col_id, value")
        parser.add_argument("--png", default=None, help="also render a bitmap (-1 blue, 0 white, +1 red)")
        parser.add_argument("--scale", type=int, default=8, help="pixels per matrix cell in the bitmap")

    def run(self, matrix, out, png, scale, **options):
        frame = export_heatmap_data(read_matrix(matrix), out, png, scale)
        self.done(f"{len(frame)} cell(s) written to {out}")
