import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from maxplus import Grid, GridFn, Kernel

NEG = float("-inf")
POS = float("inf")


def dyadic(rng, size, scale=8.0, denom=8):
    """Random multiples of 1/denom: lattice values whose float sums are exact."""
    return rng.integers(-scale * denom, scale * denom + 1, size=size) / denom


def random_kernel_and_g(rng, max_nodes=8, dyadic_values=True):
    """Random dense-table kernel plus g, with sprinkled infinities."""
    while True:
        nx = int(rng.integers(1, max_nodes + 1))
        ny = int(rng.integers(1, max_nodes + 1))
        if dyadic_values:
            b = dyadic(rng, (nx, ny))
            g = dyadic(rng, nx)
        else:
            b = rng.uniform(-8, 8, (nx, ny))
            g = rng.uniform(-8, 8, nx)
        b = b.astype(np.float64)
        b[rng.random((nx, ny)) < 0.15] = NEG
        fin = np.isfinite(b)
        if not (fin.any(axis=1).all() and fin.any(axis=0).all()):
            continue
        g = g.astype(np.float64)
        g[rng.random(nx) < 0.1] = POS
        g[rng.random(nx) < 0.05] = NEG
        xg = Grid.line(0.0, 1.0, nx) if nx > 1 else Grid.line(0.0, 0.0, 1)
        yg = Grid.line(0.0, 1.0, ny) if ny > 1 else Grid.line(0.0, 0.0, 1)
        return Kernel.from_table(xg, yg, b), GridFn(xg, g)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
