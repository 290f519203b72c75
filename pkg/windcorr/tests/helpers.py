import shutil
import tempfile
from pathlib import Path

import numpy as np

from windcorr.core import Observable, SignalPanel

T0 = "2014-03-01T00:00:00Z"


def panel(rows, step=600.0, observable=Observable.ACTIVE_POWER, ids=None, t0=T0):
    """Panel from nested lists; ``None`` or NaN cells are masked."""
    values = np.array([[np.nan if v is None else v for v in row] for row in rows], dtype=np.float64)
    ids = ids or tuple(str(i + 1) for i in range(values.shape[0]))
    return SignalPanel.from_values(ids, t0, step, values, observable)


def random_panel(n, t, seed=0, step=600.0):
    rng = np.random.default_rng(seed)
    return SignalPanel.from_values(tuple(str(i + 1) for i in range(n)), T0, step, rng.normal(size=(n, t)))


class TempDirMixin:
    def setUp(self):
        super().setUp()
        self.tmp = Path(tempfile.mkdtemp(prefix="windcorr-test-"))
        self.addCleanup(shutil.rmtree, self.tmp, ignore_errors=True)

    def write(self, name, text):
        path = self.tmp / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        return path


# four days on the three-row layout, half a day per 45 degree sector
SIMULATION_CFG = """\
[simulation]
layout = riffgat
duration = 4d
step = 10m
mean_speed = 9
direction_episodes = 0:12h; 45:12h; 90:12h; 135:12h; 180:12h; 225:12h; 270:12h; 315:12h
seed = 7
"""
