import json

import numpy as np
import pytest

from gustvqa.grid import random_storm_spec, save_wgf, synth_grid


def storm_grid(seed: int, nlat: int = 90, nlon: int = 180):
    """A busy storm field: enough red/yellow area to name 10+ places."""
    rng = np.random.default_rng(100 + seed)
    spec = random_storm_spec(rng, nlat=nlat, nlon=nlon, n_blobs=(10, 14), peak_range=(22, 40), sigma_range=(5, 12))
    return synth_grid(spec, 0)


def write_pipeline_fixture(root, n_grids: int = 3, width: int = 720, height: int = 360, seed: int = 3, extra: dict | None = None):
    grids = root / "grids"
    grids.mkdir(parents=True, exist_ok=True)
    for i in range(n_grids):
        save_wgf(storm_grid(i), grids / f"g{i}.wgf")
    cfg = {"paths": {"grids": "grids", "output": "out"}, "render": {"width": width, "height": height}, "seed": seed}
    cfg.update(extra or {})
    path = root / "config.json"
    path.write_text(json.dumps(cfg))
    return path


@pytest.fixture
def pipeline_fixture(tmp_path):
    return write_pipeline_fixture(tmp_path)
