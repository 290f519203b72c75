import dataclasses

from windcorr.management.base import WindcorrCommand
from windcorr.utils import simulator


class Command(WindcorrCommand):
    help = "Generate synthetic SCADA panels with ground-truth labels."

    def add_arguments(self, parser):
        parser.add_argument("--config", default=None, help="INI file with a [simulation] section (default: built-in)")
        parser.add_argument(
            "--layout",
            choices=sorted(simulator.LAYOUT_PRESETS),
            default=None,
            help="layout preset, overriding the config file",
        )
        parser.add_argument("--seed", type=int, default=None, help="random seed, overriding the config file")
        parser.add_argument("--out-dir", required=True, help="folder for the generated files")

    def run(self, config, layout, seed, out_dir, **options):
        if config:
            settings = simulator.SimulationConfig.from_config(config, seed=seed)
        else:
            settings = simulator.SimulationConfig(seed=0 if seed is None else seed)
        if layout:
            settings = dataclasses.replace(settings, layout=simulator.LAYOUT_PRESETS[layout]())
        result = simulator.simulate(settings)
        paths = simulator.write_simulation(result, out_dir)
        self.done(f"{result.power!r} and ground truth written to {paths['power'].parent}")
