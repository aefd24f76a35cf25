"""Shared fixtures: the one-cell lattice sample and its filtered kink points.

Both the analysis unit tests and the acceptance suite measure slope jumps
across the gas-potential locus; the lattice scan that locates the locus is
the expensive part, so it is computed once per session.
"""

import numpy as np
import pytest

from huflow.analysis import OneCellProblem, locus_fields, velocity_surface
from huflow.flux import SchemeConfig

ONE_CELL = OneCellProblem()
PPU_SCHEME = SchemeConfig.from_label("ppu")


def filter_locus_points(problem, points, companion="phase_w"):
    """Interior locus crossings with real mobility contrast.

    Points hugging the domain edge clip the one-sided sampling stencil, and
    points near the matched saturation have identical mobilities on both
    sides, so even a pick scheme is smooth there; both are excluded.  The
    named companion potential must be away from zero so its pick is
    unambiguous at the crossing.
    """
    pts = np.asarray(points)
    p_lo, p_hi = problem.p_range
    s_lo, s_hi = problem.s_range
    keep = (
        (pts[:, 0] > p_lo + 0.5)
        & (pts[:, 0] < p_hi - 0.5)
        & (pts[:, 1] > s_lo + 0.079)
        & (pts[:, 1] < s_hi - 0.079)
        & (np.abs(pts[:, 1] - problem.s_w_right) > 0.1)
    )
    pts = pts[keep]
    fields = locus_fields(problem, PPU_SCHEME, pts[:, 0], pts[:, 1])
    return pts[np.abs(np.asarray(fields[companion])) > 0.5]


@pytest.fixture(scope="session")
def one_cell_surface():
    # shared lattice: values plus refined locus point sets at resolution 96
    return velocity_surface(ONE_CELL, PPU_SCHEME, resolution=96)


@pytest.fixture(scope="session")
def phase_g_points(one_cell_surface):
    pts = filter_locus_points(ONE_CELL, one_cell_surface.loci["phase_g"])
    assert len(pts) >= 20
    return pts
