import pathlib

import pytest

FIXTURES = pathlib.Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir():
    return FIXTURES


def grid_roads(n=3, spacing=0.001, tag="residential", origin=(0.0, 0.0)):
    """An n x n orthogonal street grid: n vertical + n horizontal ways with
    shared vertices at every crossing."""
    ox, oy = origin
    roads = []
    for i in range(n):
        x = ox + i * spacing
        roads.append(([(x, oy + j * spacing) for j in range(n)], tag))
    for j in range(n):
        y = oy + j * spacing
        roads.append(([(ox + i * spacing, y) for i in range(n)], tag))
    return roads


def cross_roads(n=3, spacing=0.001, tag="residential", origin=(0.0, 0.0)):
    """n + n crossing streets that overhang the outermost crossings, so all
    n*n crossings are genuine intersections (degree 4)."""
    ox, oy = origin
    over = spacing / 2.0
    roads = []
    for i in range(n):
        x = ox + i * spacing
        ys = [oy - over] + [oy + j * spacing for j in range(n)] + \
             [oy + (n - 1) * spacing + over]
        roads.append(([(x, y) for y in ys], tag))
    for j in range(n):
        y = oy + j * spacing
        xs = [ox - over] + [ox + i * spacing for i in range(n)] + \
             [ox + (n - 1) * spacing + over]
        roads.append(([(x, y) for x in xs], tag))
    return roads
