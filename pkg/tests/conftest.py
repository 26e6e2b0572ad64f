import numpy as np
import pytest

from flowquant.flow_model import FlowTable


def make_table(numeric, labels=None, groups=None, clients=None, names=None):
    numeric = np.asarray(numeric, dtype=float)
    if numeric.ndim == 1:
        numeric = numeric[:, None]
    n, d = numeric.shape
    return FlowTable(
        names or [f"c{j}" for j in range(d)],
        numeric,
        labels if labels is not None else ["x"] * n,
        groups if groups is not None else ["A"] * n,
        clients if clients is not None else [f"cl{i}" for i in range(n)],
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance outcomes, printed once at the end of the run
ACCEPTANCE: dict = {}


def record(criterion: int, ok: bool, detail: str):
    ACCEPTANCE[criterion] = (ok, detail)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
