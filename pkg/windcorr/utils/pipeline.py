"""End-to-end runs: simulate, ingest, classify and fill, correlate, spectra, bins.

Every run writes into a staging directory next to ``out_dir`` and moves it
into place only when all stages succeeded. ``manifest.json`` lists the
SHA-256 of every input and artifact together with the run parameters; it
holds no wall-clock data so identical runs produce identical bytes.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
import shutil
import tempfile
from pathlib import Path
from typing import Dict, List, Optional, Union

import pandas as pd

from windcorr import __version__
from windcorr.conf import ConfigFileError, get_setting, read_ini_section
from windcorr.core import (
    CorrelationMatrix,
    FarmLayout,
    Observable,
    PathLike,
    SignalPanel,
    format_timestamps,
    parse_duration,
    read_layout,
    read_matrix,
    read_panel,
    write_matrix,
    write_panel,
)
from windcorr.utils import cleaning, correlation, direction, ingest
from windcorr.utils.export import export_heatmap_data, write_spectrum
from windcorr.utils.simulator import SimulationConfig, simulate, write_simulation

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
CLEAN_METHODS = ("none", "riffgat")


class StageError(RuntimeError):
    """A pipeline stage failed; names the stage and the offending input."""

    def __init__(self, stage: str, source: Optional[PathLike], message: str) -> None:
        self.stage = stage
        self.source = None if source is None else str(source)
        where = f" ({self.source})" if self.source else ""
        super().__init__(f"[{stage}]{where} {message}")


def sha256_of(path: PathLike, chunk_size: int = 1 << 20) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(chunk_size), b""):
            digest.update(block)
    return digest.hexdigest()


def parse_center0(text: Union[str, float, None]) -> Optional[float]:
    """``auto`` (or empty) means the layout's row-orthogonal bearing."""
    if text is None:
        return None
    if isinstance(text, (int, float)):
        return float(text) % 360.0
    value = str(text).strip().lower()
    if value in ("", "auto"):
        return None
    try:
        return float(value) % 360.0
    except ValueError:
        raise ValueError(f"center0 must be 'auto' or degrees, got {text!r}") from None


def _flag(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Inputs, analysis parameters and the output directory of one run.

    Inputs are either a raw export (``raw``), wide panels (``power``,
    ``wind_speed``, ``wind_direction``) or a simulation config (``simulate``).
    """

    out_dir: Path
    raw: Optional[Path] = None
    power: Optional[Path] = None
    wind_speed: Optional[Path] = None
    wind_direction: Optional[Path] = None
    simulate: Optional[Path] = None
    layout: Optional[Path] = None
    thresholds: Optional[Path] = None
    step: Optional[float] = None
    clean: str = "none"
    fill: str = cleaning.FillStrategy.LAST_VALUE.value
    window: float = dataclasses.field(default_factory=lambda: parse_duration(get_setting("WINDOW")))
    stride: float = dataclasses.field(default_factory=lambda: parse_duration(get_setting("STRIDE")))
    mode: str = dataclasses.field(default_factory=lambda: str(get_setting("MODE")))
    eigen: bool = True
    binavg: bool = True
    center0: Optional[float] = None
    heatmaps: bool = False
    seed: Optional[int] = None
    jobs: int = dataclasses.field(default_factory=lambda: int(get_setting("JOBS")))

    PATH_KEYS = ("out_dir", "raw", "power", "wind_speed", "wind_direction", "simulate", "layout", "thresholds")

    def __post_init__(self) -> None:
        for key in self.PATH_KEYS:
            value = getattr(self, key)
            if value is not None:
                object.__setattr__(self, key, Path(value))
        object.__setattr__(self, "window", parse_duration(self.window))
        object.__setattr__(self, "stride", parse_duration(self.stride))
        if self.step is not None:
            object.__setattr__(self, "step", parse_duration(self.step))
        object.__setattr__(self, "mode", str(correlation.CorrelationMode.parse(self.mode)))
        object.__setattr__(self, "fill", cleaning.FillStrategy(self.fill).value)
        if self.clean not in CLEAN_METHODS:
            raise ValueError(f"clean must be one of {CLEAN_METHODS}, got {self.clean!r}")
        sources = [self.raw is not None, self.power is not None, self.simulate is not None]
        if sum(sources) != 1:
            raise ValueError("exactly one of raw, power or simulate must be given")
        if self.power is not None and self.wind_speed is None:
            raise ValueError("power panels need a wind_speed panel")
        if self.jobs < 1:
            raise ValueError(f"jobs must be at least 1, got {self.jobs}")

    @classmethod
    def from_file(cls, path: PathLike, **overrides) -> "RunConfig":
        """Read ``[run]``; relative paths are resolved against the file's folder."""
        known = [f.name for f in dataclasses.fields(cls)]
        try:
            items = read_ini_section(path, "run", known)
        except ConfigFileError as exc:
            raise StageError("config", path, str(exc)) from exc
        base = Path(path).resolve().parent
        kwargs: Dict[str, object] = {}
        try:
            for key, text in items.items():
                if key in cls.PATH_KEYS:
                    candidate = Path(text.strip())
                    kwargs[key] = candidate if candidate.is_absolute() else base / candidate
                elif key in ("eigen", "binavg", "heatmaps"):
                    kwargs[key] = _flag(text)
                elif key in ("seed", "jobs"):
                    kwargs[key] = int(text)
                elif key == "center0":
                    kwargs[key] = parse_center0(text)
                else:
                    kwargs[key] = text.strip()
            kwargs.update({k: v for k, v in overrides.items() if v is not None})
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise StageError("config", path, str(exc)) from exc

    def inputs(self) -> Dict[str, Path]:
        names = ("raw", "power", "wind_speed", "wind_direction", "simulate", "layout", "thresholds")
        found = {name: getattr(self, name) for name in names if getattr(self, name) is not None}
        if self.layout is not None:
            cfg = self.layout.with_suffix(".cfg")
            found["layout_cfg"] = cfg
        return found

    def check_inputs(self) -> None:
        for name, path in self.inputs().items():
            if not path.is_file():
                raise StageError("config", path, f"{name} input does not exist")

    def parameters(self) -> Dict[str, object]:
        return {
            "step": self.step,
            "clean": self.clean,
            "fill": self.fill,
            "window_s": self.window,
            "stride_s": self.stride,
            "mode": self.mode,
            "eigen": self.eigen,
            "binavg": self.binavg,
            "center0": "auto" if self.center0 is None else self.center0,
            "heatmaps": self.heatmaps,
            "seed": self.seed,
        }


@dataclasses.dataclass(frozen=True)
class PipelineResult:
    out_dir: Path
    manifest: Dict[str, object]
    windows: int
    failed_windows: int


class _Run:
    """Mutable state of one run inside the staging directory."""

    def __init__(self, config: RunConfig, staging: Path) -> None:
        self.config = config
        self.staging = staging
        self.inputs: Dict[str, Path] = dict(config.inputs())
        self.layout: Optional[FarmLayout] = None
        self.power: Optional[SignalPanel] = None
        self.wind_speed: Optional[SignalPanel] = None
        self.wind_direction: Optional[SignalPanel] = None
        self.filled: Optional[SignalPanel] = None
        self.matrices: List[CorrelationMatrix] = []
        self.windows = 0
        self.failed = 0

    def folder(self, name: str) -> Path:
        path = self.staging / name
        path.mkdir(parents=True, exist_ok=True)
        return path

    def stage_simulate(self) -> None:
        config = SimulationConfig.from_config(self.config.simulate, seed=self.config.seed)
        paths = write_simulation(simulate(config), self.folder("simulation"))
        self.inputs["raw"] = paths["raw"]
        self.layout = config.layout
        if self.config.layout is None:
            self.inputs["layout"] = paths["layout"]

    def stage_ingest(self) -> None:
        if self.config.power is not None:
            self.power = read_panel(self.config.power, Observable.ACTIVE_POWER)
            self.wind_speed = read_panel(self.config.wind_speed, Observable.WIND_SPEED)
            if self.config.wind_direction is not None:
                self.wind_direction = read_panel(self.config.wind_direction, Observable.WIND_DIRECTION)
        else:
            stream = ingest.read_raw_records(self.inputs["raw"])
            self.power = self._ingest_one(stream, Observable.ACTIVE_POWER)
            self.wind_speed = self._ingest_one(stream, Observable.WIND_SPEED)
            if Observable.WIND_DIRECTION in stream.observables:
                self.wind_direction = self._ingest_one(stream, Observable.WIND_DIRECTION)
        panels = self.folder("panels")
        write_panel(self.power, panels / "power.csv")
        write_panel(self.wind_speed, panels / "wind_speed.csv")
        if self.wind_direction is not None:
            write_panel(self.wind_direction, panels / "wind_direction.csv")

    def _ingest_one(self, stream: ingest.RawRecordStream, observable: Observable) -> SignalPanel:
        panel = ingest.parse_scada(stream, observable)
        if self.config.clean == "riffgat" and observable is not Observable.WIND_DIRECTION:
            stddev = ingest.parse_scada(stream, observable, channel="stddev", step=panel.step)
            if stddev.turbine_ids != panel.turbine_ids or stddev.shape != panel.shape or stddev.t0 != panel.t0:
                stddev = None
            panel, report = ingest.riffgat_clean(panel, stddev)
            report_path = self.folder("panels") / f"riffgat_{observable.value}.json"
            report_path.write_text(report.to_json(), encoding="utf-8")
        if self.config.step is not None and self.config.step != panel.step:
            if observable is Observable.WIND_DIRECTION:
                panel = ingest.resample_circular_mean(panel, self.config.step)
            else:
                panel = ingest.resample_mean(panel, self.config.step)
        return panel

    def stage_classify(self) -> None:
        thresholds = (
            cleaning.Thresholds.from_config(self.config.thresholds)
            if self.config.thresholds is not None
            else cleaning.Thresholds.default()
        )
        labels = cleaning.classify(self.power, self.wind_speed, thresholds=thresholds)
        report = cleaning.build_report(self.power, labels)
        shutdowns = cleaning.fill_shutdowns(self.power, labels, self.config.fill)
        self.filled, _ = cleaning.fill_failures(shutdowns, labels)
        folder = self.folder("cleaning")
        cleaning.write_labels(labels, folder / "labels.csv")
        write_panel(self.filled, folder / "filled_power.csv")
        (folder / "cleaning_report.json").write_text(report.to_json(), encoding="utf-8")

    def stage_corr(self) -> None:
        spec = correlation.WindowSpec(self.config.window, self.config.stride)
        results = correlation.sliding_correlations(self.filled, spec, self.config.mode, self.config.jobs)
        write_window_matrices(results, self.folder("matrices"))
        self.matrices = [r for r in results if isinstance(r, CorrelationMatrix)]
        self.windows = len(results)
        self.failed = len(results) - len(self.matrices)

    def stage_eigen(self) -> None:
        folder = self.folder("spectra")
        summaries: Dict[str, Dict[str, object]] = {}
        for matrix in self.matrices:
            name = window_name(matrix)
            decomposition = correlation.eigen(matrix)
            write_spectrum(decomposition, matrix.ids, folder / f"{name}.csv")
            summaries[name] = correlation.spectrum_summary(decomposition)
        (folder / "spectra.json").write_text(json.dumps(summaries, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def stage_binavg(self) -> None:
        if self.wind_direction is None:
            raise StageError("binavg", None, "no wind direction data to bin by")
        center0 = self.config.center0
        if center0 is None:
            layout = self.layout
            if layout is None and "layout" in self.inputs:
                layout = read_layout(self.inputs["layout"])
            if layout is None:
                raise StageError("binavg", None, "center0 'auto' needs a layout")
            bins = direction.DirectionBins.from_layout(layout)
        else:
            bins = direction.DirectionBins(center0)
        items = direction.directed_matrices(self.matrices, self.wind_direction, self.wind_speed)
        binned = direction.bin_average(items, bins, self.config.jobs)
        write_bins(binned, self.folder("bins"), heatmaps=self.config.heatmaps)


def window_name(matrix: CorrelationMatrix) -> str:
    stamp = format_timestamps([matrix.window_start])[0].replace("-", "").replace(":", "")
    return f"window_{stamp}"


def write_window_matrices(results: List[correlation.WindowResult], out_dir: PathLike) -> List[Path]:
    """One CSV (+ sidecar) per matrix; undefined windows go to ``failures.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written, failures = [], []
    for result in results:
        if isinstance(result, correlation.WindowFailure):
            failures.append(
                {
                    "index": result.index,
                    "window_start": format_timestamps([result.window_start])[0],
                    "window_len_s": result.window_len,
                    "turbines": list(result.turbines),
                    "reason": result.reason,
                }
            )
            continue
        path = out / f"{window_name(result)}.csv"
        write_matrix(result, path)
        written.append(path)
    if failures:
        (out / "failures.json").write_text(json.dumps(failures, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return written


def read_window_matrices(folder: PathLike) -> List[CorrelationMatrix]:
    return [read_matrix(path) for path in sorted(Path(folder).glob("window_*.csv"))]


def write_bins(binned: direction.BinnedMatrices, out_dir: PathLike, heatmaps: bool = False) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for average in binned.averages:
        if average.matrix is None:
            continue
        write_matrix(average.matrix, out / f"{average.label}.csv")
        if heatmaps:
            export_heatmap_data(average.matrix, out / f"{average.label}_heatmap.csv", out / f"{average.label}.png")
    rows = direction.bin_summary(binned)
    pd.DataFrame(rows).to_csv(out / "summary.csv", index=False, float_format="%.10g", lineterminator="\n")
    if binned.excluded:
        logger.warning("%d window(s) had no meaningful direction", binned.excluded)


def _hash_tree(root: Path) -> Dict[str, str]:
    hashes = {}
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        hashes[path.relative_to(root).as_posix()] = sha256_of(path)
    return hashes


def run_pipeline(config: RunConfig) -> PipelineResult:
    """Run every configured stage and publish ``config.out_dir`` atomically."""
    config.check_inputs()
    out_dir = config.out_dir.resolve()
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=f".{out_dir.name}.", suffix=".staging", dir=out_dir.parent)).resolve()
    run = _Run(config, staging)
    stages = []
    if config.simulate is not None:
        stages.append(("simulate", run.stage_simulate, config.simulate))
    stages.append(("ingest", run.stage_ingest, config.raw or config.power or config.simulate))
    stages.append(("classify", run.stage_classify, config.thresholds))
    stages.append(("corr", run.stage_corr, None))
    if config.eigen:
        stages.append(("eigen", run.stage_eigen, None))
    if config.binavg:
        stages.append(("binavg", run.stage_binavg, config.wind_direction or config.raw or config.simulate))

    try:
        for name, stage, source in stages:
            logger.info("Stage %s", name)
            try:
                stage()
            except StageError:
                raise
            except (ValueError, OSError, KeyError) as exc:
                raise StageError(name, source, str(exc)) from exc
        manifest = {
            "version": __version__,
            "parameters": config.parameters(),
            "inputs": {
                name: sha256_of(path)
                for name, path in sorted(run.inputs.items())
                if not Path(path).resolve().is_relative_to(staging)
            },
            "artifacts": _hash_tree(staging),
        }
        (staging / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        if out_dir.exists():
            shutil.rmtree(out_dir)
        os.replace(staging, out_dir)
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    logger.info(
        "Run finished: %d window(s), %d failed, %d artifact(s) in %s",
        run.windows,
        run.failed,
        len(manifest["artifacts"]),
        out_dir,
    )
    return PipelineResult(out_dir, manifest, run.windows, run.failed)


def load_manifest(run_dir: PathLike) -> Dict[str, object]:
    with open(Path(run_dir) / MANIFEST_NAME, "r", encoding="utf-8") as handle:
        return json.load(handle)
