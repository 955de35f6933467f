import math

import numpy as np
import pytest

from scoutsim.config import SimParams
from scoutsim.mapping import OccupancyGrid


@pytest.fixture
def params():
    return SimParams()


def make_grid(width=20, height=20, resolution=0.1, **kw):
    return OccupancyGrid(width, height, resolution, **kw)


def grid_from_ascii(art, resolution=0.1, free_logodds=-2.0, occ_logodds=3.0):
    """Build an estimated grid from ASCII rows (bottom row last in the
    list renders as y=0 first): '#'=occupied, '.'=free, '?'=unknown."""
    rows = [r for r in art if r.strip() != ""]
    h = len(rows)
    w = len(rows[0])
    g = OccupancyGrid(w, h, resolution)
    for iy, row in enumerate(rows):
        assert len(row) == w, "ragged ascii grid"
        for ix, ch in enumerate(row):
            if ch == "#":
                g.logodds[iy, ix] = occ_logodds
                g.touched[iy, ix] = 1
            elif ch == ".":
                g.logodds[iy, ix] = free_logodds
                g.touched[iy, ix] = 1
            elif ch == "?":
                pass
            else:
                raise ValueError(f"bad ascii cell {ch!r}")
    g.rebuild_entropy_cache()
    return g


def random_occ(rng, n=30, fill=0.2):
    occ = (rng.random((n, n)) < fill).astype(np.uint8)
    occ[0, :] = occ[-1, :] = occ[:, 0] = occ[:, -1] = 1
    return occ


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
