import numpy as np
import pytest

from puckit.data import PUDataset, ScarConfig, generate_scar


class TableClassifier:
    """Stand-in for f: returns ``table[int(x[0])]``, so feature 0 holds a row key."""

    def __init__(self, table):
        self.table = np.asarray(table, dtype=np.float64)

    def predict_proba(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return self.table[X[:, 0].astype(int)]


def keyed_dataset(s, truth=None):
    """Dataset whose single feature is the row id."""
    s = np.asarray(s)
    X = np.arange(s.size, dtype=np.float64)[:, None]
    return PUDataset(X=X, s=s, truth=truth)


@pytest.fixture
def scar_small():
    return generate_scar(ScarConfig(n=400, prior=0.5, label_freq=0.6, seed=11))


@pytest.fixture(scope="session")
def scar_5000():
    cfg = ScarConfig(n=5000, prior=0.5, label_freq=0.7, seed=21)
    return cfg, generate_scar(cfg)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
