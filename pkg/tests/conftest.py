import numpy as np
import pytest
import scipy.sparse as sp

from firmnet.model import GrowthPanel
from firmnet.network import PanelNetwork, adjacency


def random_adjacency(rng, n, density):
    a = sp.random(n, n, density=density, random_state=rng, format="coo")
    keep = a.row != a.col
    return adjacency(a.row[keep], a.col[keep], n)


def random_panel(rng, n=60, n_years=4, density=0.05, start=2003):
    yearly = {start + t: (random_adjacency(rng, n, density), random_adjacency(rng, n, density)) for t in range(n_years)}
    return PanelNetwork.from_edges(n, yearly)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_panel(rng):
    panel = random_panel(rng)
    growth = GrowthPanel(panel.years, rng.normal(0, 0.3, size=(len(panel.years), panel.firm_count)))
    return panel, growth


ACCEPTANCE_LINES = []


def record_criterion(name, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'}  {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
