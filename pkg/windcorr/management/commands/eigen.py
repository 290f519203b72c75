import json

from windcorr.core import read_matrix
from windcorr.management.base import WindcorrCommand
from windcorr.utils import correlation
from windcorr.utils.export import write_spectrum


class Command(WindcorrCommand):
    help = "Eigenvalues and eigenvectors of a correlation matrix."

    def add_arguments(self, parser):
        parser.add_argument("--matrix", required=True, help="matrix CSV")
        parser.add_argument("--out", required=True, help="spectrum CSV: k, eigenvalue, eigenvector components")
        parser.add_argument("--summary", default=None, help="JSON with eigenvalue counts and the largest eigenvalues")

    def run(self, matrix, out, summary, **options):
        data = read_matrix(matrix)
        decomposition = correlation.eigen(data)
        write_spectrum(decomposition, data.ids, out)
        overview = correlation.spectrum_summary(decomposition)
        if summary:
            with open(summary, "w", encoding="utf-8") as handle:
                json.dump(overview, handle, indent=2, sort_keys=True)
                handle.write("\n")
        largest = ", ".join(f"{v:.3f}" for v in overview["largest"][:3])
        self.done(f"{overview['n']} eigenvalues, {overview['zero']} zero; largest {largest}")
