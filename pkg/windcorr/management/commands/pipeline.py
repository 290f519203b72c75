from windcorr.management.base import WindcorrCommand
from windcorr.utils.pipeline import RunConfig, run_pipeline


class Command(WindcorrCommand):
    help = "Run simulate/ingest, classify and fill, corr, eigen and binavg from one run config."

    def add_arguments(self, parser):
        parser.add_argument("--config", required=True, help="INI file with a [run] section")
        parser.add_argument("--out-dir", default=None, help="output folder, overriding the config file")
        parser.add_argument("--seed", type=int, default=None, help="simulation seed, overriding the config file")
        parser.add_argument("--jobs", type=int, default=None, help="worker threads, overriding the config file")

    def run(self, config, out_dir, seed, jobs, **options):
        run_config = RunConfig.from_file(config, out_dir=out_dir, seed=seed, jobs=jobs)
        result = run_pipeline(run_config)
        self.done(
            f"{result.windows} window(s) ({result.failed_windows} failed), "
            f"{len(result.manifest['artifacts'])} artifact(s) in {result.out_dir}"
        )
