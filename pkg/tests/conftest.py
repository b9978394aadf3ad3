import numpy as np
import pytest

N14 = 2**14
SEEDS = range(10)


def seed_mean(fn, seeds=SEEDS):
    """Mean of ``fn(seed)`` over seeds (arrays averaged elementwise)."""
    return np.mean([fn(s) for s in seeds], axis=0)


@pytest.fixture
def tmp_cwd(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path
