import numpy as np
import pytest

from vmbench.dataset import FeatureMeta, make_dataset


def random_dataset(rng, n=60, m=6, missing=0.3, n_tools=2, normalized=True):
    """Small continuous dataset with MCAR gaps, values in [0, 1] when normalized."""
    values = rng.random((n, m)) if normalized else rng.normal(size=(n, m)) * 5
    mask = rng.random((n, m)) >= missing
    tools = np.array([f"T{i % n_tools}" for i in range(n)], dtype=object)
    ts = np.arange(n, dtype=float)
    target = values[:, 0] + rng.normal(size=n) * 0.1
    return make_dataset(values, [f"f{j}" for j in range(m)], tools, ts, target, mask=mask)


def series_dataset(columns, tools=None):
    """Dataset from explicit columns (None = missing), one tool by default."""
    arr = np.array([[np.nan if v is None else v for v in col] for col in columns], dtype=float).T
    n = arr.shape[0]
    tools = np.array(tools if tools is not None else ["A"] * n, dtype=object)
    return make_dataset(arr, [FeatureMeta(f"f{j}") for j in range(arr.shape[1])], tools,
                        np.arange(n, dtype=float), np.linspace(0, 1, n))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
