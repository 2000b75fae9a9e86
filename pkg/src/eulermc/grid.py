"""Periodic structured mesh and its discrete difference operators.

The mesh covers a rectangular box with uniform square cells, periodic in
both directions.  Cells are indexed row-major (y outer, x inner):
``cell = iy * nx + ix``.  Every cell owns two faces, one x-face between it
and its east neighbour (normal +x) and one y-face to its north neighbour
(normal +y), so there are ``2 * nx * ny`` faces and each face joins exactly
two cells through the periodic wrap.

Orientation conventions used everywhere in the package:

* jump across a face: ``out - in`` (along the stored normal),
* average: plain arithmetic mean of the two adjacent cells,
* the discrete gradient lives on faces, ``jump / h`` times the normal,
* the discrete divergence lives on cells,
  ``(1/|K|) * sum_faces |sigma| * <v> . n_outward``.

The vectorised operators work on fields stored flat (length ``ncells``) and
return flat arrays; face-indexed arrays are laid out like the owning cell.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Grid",
    "FaceView",
    "average",
    "jump",
    "face_average",
    "face_jump",
    "discrete_gradient",
    "discrete_divergence",
]


@dataclass(frozen=True)
class Grid:
    """Uniform square-cell periodic mesh on ``[0, lx] x [0, ly]``."""

    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError(f"need at least 2 cells per axis, got {self.nx}x{self.ny}")
        if self.lx <= 0.0 or self.ly <= 0.0:
            raise ValueError("box side lengths must be positive")
        if self.lx / self.nx != self.ly / self.ny:
            raise ValueError(
                f"cells must be square: lx/nx = {self.lx / self.nx!r} "
                f"but ly/ny = {self.ly / self.ny!r}"
            )

    @property
    def h(self):
        """Mesh parameter: the cell side length."""
        return self.lx / self.nx

    @property
    def ncells(self):
        return self.nx * self.ny

    @property
    def nfaces(self):
        return 2 * self.nx * self.ny

    @property
    def cell_area(self):
        return self.h * self.h

    @property
    def shape(self):
        """2-d array shape ``(ny, nx)`` of a cell field."""
        return (self.ny, self.nx)

    def cell_centers(self):
        """Coordinates of cell centers as two ``(ny, nx)`` arrays (x1, x2)."""
        x1 = (np.arange(self.nx) + 0.5) * self.h
        x2 = (np.arange(self.ny) + 0.5) * self.h
        return np.broadcast_to(x1, self.shape).copy(), np.broadcast_to(
            x2[:, None], self.shape
        ).copy()

    def face(self, k):
        """Return the ``FaceView`` for face index ``k``.

        Faces ``0 .. ncells-1`` are the x-faces (owned by the like-indexed
        cell, normal +x); faces ``ncells .. 2*ncells-1`` are the y-faces.
        """
        n = self.ncells
        if not 0 <= k < 2 * n:
            raise IndexError(f"face index {k} out of range [0, {2 * n})")
        if k < n:
            ix, iy = k % self.nx, k // self.nx
            out = iy * self.nx + (ix + 1) % self.nx
            return FaceView(in_cell=k, out_cell=out, normal=(1.0, 0.0), area=self.h)
        c = k - n
        ix, iy = c % self.nx, c // self.nx
        out = ((iy + 1) % self.ny) * self.nx + ix
        return FaceView(in_cell=c, out_cell=out, normal=(0.0, 1.0), area=self.h)

    def as2d(self, field):
        """View a flat cell field as ``(ny, nx)``."""
        return np.asarray(field).reshape(self.shape)


@dataclass(frozen=True)
class FaceView:
    """One oriented face: two adjacent cells, unit normal from in to out."""

    in_cell: int
    out_cell: int
    normal: tuple
    area: float


def average(face, field):
    """Arithmetic mean of ``field`` across ``face``."""
    f = np.asarray(field).ravel()
    return 0.5 * (f[face.in_cell] + f[face.out_cell])


def jump(face, field):
    """Oriented jump ``field[out] - field[in]`` across ``face``."""
    f = np.asarray(field).ravel()
    return f[face.out_cell] - f[face.in_cell]


def face_average(grid, field):
    """Vectorised face averages, returned as ``(avg_x, avg_y)`` flat arrays."""
    f = grid.as2d(field)
    ax = 0.5 * (f + np.roll(f, -1, axis=1))
    ay = 0.5 * (f + np.roll(f, -1, axis=0))
    return ax.ravel(), ay.ravel()


def face_jump(grid, field):
    """Vectorised oriented jumps, returned as ``(jump_x, jump_y)`` flat arrays."""
    f = grid.as2d(field)
    jx = np.roll(f, -1, axis=1) - f
    jy = np.roll(f, -1, axis=0) - f
    return jx.ravel(), jy.ravel()


def discrete_gradient(grid, field):
    """Facewise gradient: jump over h along the face normal.

    Returns ``(gx, gy)``: the +x component on x-faces and the +y component
    on y-faces (the tangential components are zero by construction).
    """
    jx, jy = face_jump(grid, field)
    return jx / grid.h, jy / grid.h


def discrete_divergence(grid, vec):
    """Cellwise divergence of a cellwise vector field ``vec`` of shape (2, ncells).

    Per cell: ``(1/|K|) * sum over its four faces of |sigma| <vec>.n_out``,
    which on this mesh reduces to central differences of face averages.
    """
    vec = np.asarray(vec)
    if vec.shape != (2, grid.ncells):
        raise ValueError(f"expected vector field of shape (2, {grid.ncells})")
    vx, vy = grid.as2d(vec[0]), grid.as2d(vec[1])
    ax = 0.5 * (vx + np.roll(vx, -1, axis=1))
    ay = 0.5 * (vy + np.roll(vy, -1, axis=0))
    div = (ax - np.roll(ax, 1, axis=1)) + (ay - np.roll(ay, 1, axis=0))
    return (div / grid.h).ravel()
