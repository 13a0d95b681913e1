import os
from pathlib import Path

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def dataset_path(name: str) -> Path | None:
    """Locate a benchmark dataset file, honoring ZIVR_DATA_DIR."""
    candidates = []
    env = os.environ.get("ZIVR_DATA_DIR")
    if env:
        candidates.append(Path(env) / name)
    here = Path(__file__).parent
    candidates += [here / "data" / name, here.parent / "data" / name]
    for c in candidates:
        if c.exists():
            return c
    return None


def require_dataset(name: str) -> Path:
    path = dataset_path(name)
    if path is None:
        pytest.skip(
            f"dataset file {name!r} not available (place it in tests/data/ or "
            f"point ZIVR_DATA_DIR at it; see `zivr datasets` for the source URL)"
        )
    return path
