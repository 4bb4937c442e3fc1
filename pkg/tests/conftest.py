import numpy as np
import pytest

from ginicascade.features import FeatureTable


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_table(X, y, era=None, t=None):
    """FeatureTable from plain arrays; era defaults to 0, t to row order."""
    X = np.asarray(X, dtype=int)
    y = np.asarray(y, dtype=int)
    n = len(y)
    return FeatureTable(
        names=[f"f{j}" for j in range(X.shape[1])],
        era=np.asarray(era if era is not None else np.zeros(n), dtype=int),
        t=np.asarray(t if t is not None else np.arange(n), dtype=int),
        series_idx=np.zeros(n, dtype=int),
        X=X,
        y=y,
    )


@pytest.fixture
def toy_table(rng):
    """Linearly separable 2-feature toy set: class = f0 bin."""
    n = 120
    y = rng.integers(0, 5, size=n)
    X = np.column_stack([y, rng.integers(0, 5, size=n)])
    return make_table(X, y)
