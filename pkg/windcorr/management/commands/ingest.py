from windcorr.conf import get_setting
from windcorr.core import CleaningReport, Observable, parse_duration, write_panel
from windcorr.management.base import WindcorrCommand
from windcorr.utils import ingest


class Command(WindcorrCommand):
    help = "Turn a raw SCADA export into a panel CSV of one observable."

    def add_arguments(self, parser):
        parser.add_argument("--in", dest="source", required=True, help="raw export CSV")
        parser.add_argument("--out", required=True, help="panel CSV to write")
        parser.add_argument(
            "--observable",
            default=Observable.ACTIVE_POWER.value,
            help="power, speed, direction or a full observable tag",
        )
        parser.add_argument("--step", default=None, help="resample to this step, e.g. 10s or 10m (default: keep)")
        parser.add_argument("--clean", choices=("none", "riffgat"), default="none", help="sanity filters to apply")
        parser.add_argument(
            "--max-wind-speed",
            type=float,
            default=get_setting("MAX_WIND_SPEED"),
            help="wind speeds above this value are discarded by the riffgat filters (m/s)",
        )
        parser.add_argument(
            "--event-driven",
            action="store_true",
            help="records are sent on change; carry the last value forward onto the grid",
        )
        parser.add_argument("--report", default=None, help="JSON report of removed and missing cells")

    def run(self, source, out, observable, step, clean, max_wind_speed, event_driven, report, **options):
        observable = Observable.parse(observable)
        stream = ingest.read_raw_records(source)
        panel = ingest.parse_scada(stream, observable, event_driven=event_driven)
        if clean == "riffgat":
            stddev = ingest.parse_scada(stream, observable, channel="stddev", step=panel.step, event_driven=event_driven)
            if stddev.shape != panel.shape or stddev.turbine_ids != panel.turbine_ids or stddev.t0 != panel.t0:
                stddev = None
            panel, cleaning_report = ingest.riffgat_clean(panel, stddev, max_wind_speed)
        else:
            missing = int((~panel.mask).sum())
            cleaning_report = CleaningReport(total_points=int(panel.mask.size), missing_raw=missing, unassigned=missing)

        if step is not None:
            target = parse_duration(step)
            if observable is Observable.WIND_DIRECTION:
                panel = ingest.resample_circular_mean(panel, target)
            else:
                panel = ingest.resample_mean(panel, target)

        write_panel(panel, out)
        if report:
            with open(report, "w", encoding="utf-8") as handle:
                handle.write(cleaning_report.to_json())
        self.done(f"{panel!r} written to {out}")
