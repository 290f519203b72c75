from windcorr.core import Observable, read_panel, write_panel
from windcorr.management.base import WindcorrCommand
from windcorr.utils import cleaning


class Command(WindcorrCommand):
    help = "Label missing power data as failure, shutdown or unassigned and fill the gaps."

    def add_arguments(self, parser):
        parser.add_argument("--power", required=True, help="active power panel CSV")
        parser.add_argument("--wind", required=True, help="wind speed panel CSV on the same grid")
        parser.add_argument(
            "--thresholds",
            "--config",
            dest="thresholds",
            default=None,
            help="INI file with a [thresholds] section (default: settings)",
        )
        parser.add_argument(
            "--fill",
            choices=[s.value for s in cleaning.FillStrategy],
            default=cleaning.FillStrategy.LAST_VALUE.value,
            help="how shutdown and unassigned gaps are filled",
        )
        parser.add_argument("--labels-out", default=None, help="labels CSV (codes P, F, S, U)")
        parser.add_argument("--filled-out", default=None, help="filled power panel CSV")
        parser.add_argument("--report", default=None, help="cleaning report JSON")

    def run(self, power, wind, thresholds, fill, labels_out, filled_out, report, **options):
        power_panel = read_panel(power, Observable.ACTIVE_POWER)
        wind_panel = read_panel(wind, Observable.WIND_SPEED)
        limits = cleaning.Thresholds.from_config(thresholds) if thresholds else cleaning.Thresholds.default()

        labels = cleaning.classify(power_panel, wind_panel, thresholds=limits)
        summary = cleaning.build_report(power_panel, labels)
        if labels_out:
            cleaning.write_labels(labels, labels_out)
        if filled_out:
            filled, _ = cleaning.fill_failures(cleaning.fill_shutdowns(power_panel, labels, fill), labels)
            write_panel(filled, filled_out)
        if report:
            with open(report, "w", encoding="utf-8") as handle:
                handle.write(summary.to_json())

        shares = summary.percentages
        self.done(
            f"missing {shares['missing_raw']:.2f}%: failure {shares['classified_failure']:.2f}%, "
            f"shutdown {shares['classified_shutdown']:.2f}%, unassigned {shares['unassigned']:.2f}%"
        )
