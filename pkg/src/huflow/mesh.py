"""Structured grids, two-point transmissibilities and flow barriers.

Cells are axis-aligned boxes on a regular lattice.  Tilting the lattice by an
angle rotates it in the x-z plane, which only changes the depth assigned to
each cell centre: depth = cos(tilt) * z_box + sin(tilt) * x_box, with z
positive downward.  At 90 degrees the lattice x-axis aligns with gravity.

Grids are immutable after construction; solvers treat them as shared
read-only data.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Connection",
    "Grid",
    "build_structured_grid",
    "transmissibility",
    "grid_to_text",
]

MILLIDARCY = 9.869233e-16  # m^2


@dataclass(frozen=True)
class Connection:
    """Interior face between two cells."""

    cell_i: int
    cell_j: int
    trans: float  # transmissibility, m^3 (permeability times area over distance)
    delta_z: float  # depth_i - depth_j, m
    barrier: bool = False


@dataclass(frozen=True)
class Grid:
    """Cell table plus connection table for a finite-volume mesh."""

    volumes: np.ndarray
    porosities: np.ndarray
    permeabilities: np.ndarray
    depths: np.ndarray
    connections: tuple[Connection, ...]
    shape: tuple[int, int, int] = (0, 0, 0)
    _conn_arrays: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        n = self.volumes.shape[0]
        for name in ("porosities", "permeabilities", "depths"):
            if getattr(self, name).shape[0] != n:
                raise ValueError(f"{name} length does not match cell count {n}")
        if np.any(self.volumes <= 0):
            raise ValueError("cell volumes must be positive")
        if np.any((self.porosities <= 0) | (self.porosities > 1)):
            raise ValueError("porosities must lie in (0, 1]")
        if np.any(self.permeabilities <= 0):
            raise ValueError("cell permeabilities must be positive")
        seen = set()
        for c in self.connections:
            if not (0 <= c.cell_i < n and 0 <= c.cell_j < n) or c.cell_i == c.cell_j:
                raise ValueError(f"connection ({c.cell_i},{c.cell_j}) is invalid")
            key = (min(c.cell_i, c.cell_j), max(c.cell_i, c.cell_j))
            if key in seen:
                raise ValueError(f"duplicate connection between cells {key}")
            seen.add(key)
            if c.trans < 0:
                raise ValueError("transmissibility must be non-negative")
            if c.barrier and c.trans != 0.0:
                raise ValueError("barrier connections must carry zero transmissibility")
            if not c.barrier and c.trans == 0.0:
                raise ValueError("zero transmissibility on a non-barrier connection")

    @property
    def cell_count(self) -> int:
        return self.volumes.shape[0]

    def connection_arrays(self):
        """Columnar (cell_i, cell_j, trans, delta_z) view, cached."""
        if not self._conn_arrays:
            self._conn_arrays["i"] = np.array([c.cell_i for c in self.connections])
            self._conn_arrays["j"] = np.array([c.cell_j for c in self.connections])
            self._conn_arrays["t"] = np.array([c.trans for c in self.connections])
            self._conn_arrays["dz"] = np.array([c.delta_z for c in self.connections])
        a = self._conn_arrays
        return a["i"], a["j"], a["t"], a["dz"]


def transmissibility(k_i: float, k_j: float, area: float, dist_i: float, dist_j: float) -> float:
    """Two-point transmissibility from half-cell contributions.

    Harmonic combination of the half transmissibilities k*area/dist; returns
    zero when either side is impermeable.
    """
    if k_i <= 0.0 or k_j <= 0.0:
        return 0.0
    return area * k_i * k_j / (k_i * dist_j + k_j * dist_i)


def build_structured_grid(
    nx: int,
    ny: int,
    nz: int,
    dx: float,
    dy: float,
    dz: float,
    tilt_deg: float = 0.0,
    perm=1.0,
    phi=0.3,
    barriers: list[tuple[int, set[int]]] | None = None,
) -> Grid:
    """Build a regular box grid, optionally tilted and with flow barriers.

    Cells are indexed x-fastest: index = ix + nx*(iy + ny*iz).  ``barriers``
    lists (iz, open_ix) pairs: the z-face between layers iz and iz+1 is
    sealed (zero transmissibility) except at the listed open ix columns.
    """
    if min(nx, ny, nz) < 1 or min(dx, dy, dz) <= 0:
        raise ValueError("grid dimensions must be positive")
    n = nx * ny * nz
    perm = np.broadcast_to(np.asarray(perm, dtype=float), (n,)).copy()
    phi = np.broadcast_to(np.asarray(phi, dtype=float), (n,)).copy()

    ix, iy, iz = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    order = (ix + nx * (iy + ny * iz)).ravel()
    xc = np.empty(n)
    zc = np.empty(n)
    xc[order] = ((ix + 0.5) * dx).ravel()
    zc[order] = ((iz + 0.5) * dz).ravel()

    theta = math.radians(tilt_deg)
    depths = math.cos(theta) * zc + math.sin(theta) * xc

    sealed = {int(layer): {int(c) for c in cols} for layer, cols in (barriers or [])}
    for layer in sealed:
        if not 0 <= layer < nz - 1:
            raise ValueError(f"barrier layer {layer} outside grid")

    def cid(a, b, c):
        return a + nx * (b + ny * c)

    conns: list[Connection] = []
    for c in range(nz):
        for b in range(ny):
            for a in range(nx):
                i = cid(a, b, c)
                if a + 1 < nx:
                    j = cid(a + 1, b, c)
                    t = transmissibility(perm[i], perm[j], dy * dz, dx / 2, dx / 2)
                    conns.append(Connection(i, j, t, depths[i] - depths[j]))
                if b + 1 < ny:
                    j = cid(a, b + 1, c)
                    t = transmissibility(perm[i], perm[j], dx * dz, dy / 2, dy / 2)
                    conns.append(Connection(i, j, t, depths[i] - depths[j]))
                if c + 1 < nz:
                    j = cid(a, b, c + 1)
                    blocked = c in sealed and a not in sealed[c]
                    t = 0.0 if blocked else transmissibility(perm[i], perm[j], dx * dy, dz / 2, dz / 2)
                    conns.append(Connection(i, j, t, depths[i] - depths[j], barrier=blocked))

    volumes = np.full(n, dx * dy * dz)
    return Grid(volumes, phi, perm, depths, tuple(conns), shape=(nx, ny, nz))


def grid_to_text(grid: Grid, path: str) -> None:
    """Dump cell and connection tables as plain columnar text."""
    with open(path, "w") as f:
        f.write("# cells: index volume porosity permeability depth\n")
        for i in range(grid.cell_count):
            f.write(
                f"{i} {grid.volumes[i]:.17e} {grid.porosities[i]:.17e} "
                f"{grid.permeabilities[i]:.17e} {grid.depths[i]:.17e}\n"
            )
        f.write("# connections: cell_i cell_j trans delta_z barrier\n")
        for c in grid.connections:
            f.write(f"{c.cell_i} {c.cell_j} {c.trans:.17e} {c.delta_z:.17e} {int(c.barrier)}\n")
