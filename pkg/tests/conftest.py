import os

import numpy as np
import pytest

from mros.config import build_config
from mros.data import generate_synthetic, synthetic_spec

# Small geometry: 24 x 12 input -> T3 8 x 6 x 3, T4 16 x 3 x 1, s = 3.
TINY = {
    "seed": 0,
    "s": 3,
    "input_height": 24,
    "input_width": 12,
    "stem_channels": 4,
    "c3": 8,
    "c4": 16,
    "P": 2,
    "K": 2,
    "epochs": 1,
    "eval_every": 1,
    "warmup_epochs": 1,
    "num_identities": 4,
    "images_per_identity": 8,
    "num_cameras": 2,
    "pad": 2,
    "max_rank": 10,
}


def pytest_collection_modifyitems(config, items):
    if os.getenv("MROS_RUN_SLOW") == "1":
        return
    skip = pytest.mark.skip(reason="set MROS_RUN_SLOW=1 to run end-to-end training checks")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(autouse=True)
def isolated_logs(tmp_path, monkeypatch):
    """Keep run logs and worker settings out of the repository."""
    monkeypatch.setenv("MROS_LOG_DIR", str(tmp_path / "logs"))
    monkeypatch.setenv("MROS_WORKERS", "1")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config(tmp_path):
    return build_config({**TINY, "data_root": str(tmp_path / "no-dataset"), "out_dir": str(tmp_path / "run")})


@pytest.fixture
def tiny_dataset(tiny_config):
    return generate_synthetic(synthetic_spec(tiny_config), K=tiny_config.K)


def gradient_check(fn, inputs, tol=1e-4):
    """Assert analytic and central-difference gradients agree."""
    from mros.autodiff import check_gradients

    errors = check_gradients(fn, inputs)
    for index, err in errors.items():
        assert err < tol, f"input {index}: relative error {err:.3e}"
