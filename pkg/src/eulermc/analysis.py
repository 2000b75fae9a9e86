"""Norms, weak-form defect functionals, and transfers between nested grids.

Conventions fixed here:

* ``lq_norm`` integrates with the cell-midpoint rule,
  ``(sum |K| |f_K|**q)**(1/q)``.
* ``dual_sobolev_norm`` works on the discrete Fourier coefficients of the
  piecewise-constant field with Plancherel normalisation, so order zero
  reproduces the L2 norm; wavenumbers are ``2*pi*k/side`` for the physical
  box side, and the weight on mode k is ``(1 + |kappa|**2)**(-ell)``.
* weak-form time integrals use the right-endpoint rule matching the
  backward-Euler structure, with the time-derivative term telescoped
  exactly through test-function differences; spatial integrals use cell
  centers.
* transfers between dyadically nested grids: constant injection going
  fine-ward, cell averaging going coarse-ward (an exact left inverse of
  injection).  Cesaro averages across a mesh ladder are formed on the
  finest grid present.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import TopologyError
from .fields import FieldSet, cell_energy
from .grid import Grid

__all__ = [
    "TestFunction",
    "MeshLadder",
    "lq_norm",
    "dual_sobolev_norm",
    "inject_to_fine",
    "restrict_to_coarse",
    "cesaro_average",
    "consistency_residuals",
]


@dataclass(frozen=True)
class TestFunction:
    """Smooth scalar test function with an analytic gradient.

    ``value(t, x1, x2)`` and ``grad(t, x1, x2) -> (d/dx1, d/dx2)`` must
    accept numpy arrays for the spatial arguments.  The caller guarantees
    smoothness and that the function vanishes at the final time.
    """

    value: callable
    grad: callable

    __test__ = False  # not a pytest class despite the name


@dataclass(frozen=True)
class MeshLadder:
    """Dyadically nested grids on a common box, coarse to fine."""

    grids: tuple

    def __post_init__(self):
        gs = tuple(self.grids)
        if not gs:
            raise ValueError("mesh ladder must contain at least one grid")
        object.__setattr__(self, "grids", gs)
        for a, b in zip(gs, gs[1:]):
            if (a.lx, a.ly) != (b.lx, b.ly):
                raise TopologyError("ladder grids must share the box")
            if b.nx != 2 * a.nx or b.ny != 2 * a.ny:
                raise TopologyError(
                    f"ladder must refine dyadically: {a.nx}x{a.ny} then {b.nx}x{b.ny}"
                )

    def __len__(self):
        return len(self.grids)

    def __iter__(self):
        return iter(self.grids)

    @property
    def finest(self):
        return self.grids[-1]

    @staticmethod
    def from_nx(nx_list, lx=1.0, ly=1.0):
        ratio = ly / lx
        return MeshLadder(tuple(Grid(nx=n, ny=round(n * ratio), lx=lx, ly=ly) for n in nx_list))


def lq_norm(grid, f, q):
    """L^q norm of a cellwise field (vector fields: Euclidean magnitude)."""
    if q < 1.0:
        raise ValueError(f"exponent must be at least 1, got {q}")
    f = np.asarray(f, dtype=np.float64)
    mag = np.abs(f) if f.ndim == 1 else np.sqrt(np.sum(f * f, axis=0))
    return float(np.sum(mag**q) * grid.cell_area) ** (1.0 / q)


def dual_sobolev_norm(grid, f, ell):
    """Negative-order Sobolev norm of a scalar field on the periodic box."""
    if ell < 0:
        raise ValueError(f"order must be non-negative, got {ell}")
    f2 = grid.as2d(np.asarray(f, dtype=np.float64))
    fhat = np.fft.fft2(f2) * (math.sqrt(grid.lx * grid.ly) / grid.ncells)
    kx = 2.0 * np.pi * np.fft.fftfreq(grid.nx, d=grid.lx / grid.nx)
    ky = 2.0 * np.pi * np.fft.fftfreq(grid.ny, d=grid.ly / grid.ny)
    k2 = ky[:, None] ** 2 + kx[None, :] ** 2
    weights = (1.0 + k2) ** (-float(ell))
    return math.sqrt(float(np.sum(weights * np.abs(fhat) ** 2)))


# ---------------------------------------------------------------------------
# Transfers between nested grids


def _ratio(coarse, fine):
    if (coarse.lx, coarse.ly) != (fine.lx, fine.ly):
        raise TopologyError("transfer requires grids on the same box")
    r, rem = divmod(fine.nx, coarse.nx)
    if rem or r < 1 or (r & (r - 1)) or fine.ny != r * coarse.ny:
        raise TopologyError(
            f"grids are not dyadically nested: {coarse.nx}x{coarse.ny} "
            f"vs {fine.nx}x{fine.ny}"
        )
    return r


def inject_to_fine(state, fine_grid):
    """Copy each coarse cell value into its descendant fine cells."""
    r = _ratio(state.grid, fine_grid)
    if r == 1:
        return state.copy()

    def up(a):
        a2 = state.grid.as2d(a)
        return np.repeat(np.repeat(a2, r, axis=0), r, axis=1).ravel()

    return FieldSet(fine_grid, up(state.rho), np.stack([up(state.mom[0]), up(state.mom[1])]))


def _halve(a2):
    # pairwise grouping keeps the average of equal values exact
    return 0.25 * (
        (a2[0::2, 0::2] + a2[0::2, 1::2]) + (a2[1::2, 0::2] + a2[1::2, 1::2])
    )


def restrict_to_coarse(state, coarse_grid):
    """Average descendant fine cells onto each coarse cell."""
    r = _ratio(coarse_grid, state.grid)
    if r == 1:
        return state.copy()

    def down(a):
        a2 = state.grid.as2d(a)
        while a2.shape[0] > coarse_grid.ny:
            a2 = _halve(a2)
        return a2.ravel()

    return FieldSet(
        coarse_grid, down(state.rho), np.stack([down(state.mom[0]), down(state.mom[1])])
    )


def cesaro_average(states):
    """Arithmetic mean of states, formed on the finest grid present.

    Every member is injected to the finest grid in the list first, so the
    mean of piecewise-constant fields is exact.  A single member is
    returned unchanged.
    """
    states = list(states)
    if not states:
        raise ValueError("cesaro average of an empty list")
    if len(states) == 1:
        return states[0].copy()
    finest = max(states, key=lambda s: s.grid.nx).grid
    lifted = [inject_to_fine(s, finest) for s in states]
    rho = np.mean([s.rho for s in lifted], axis=0)
    mom = np.mean([s.mom for s in lifted], axis=0)
    return FieldSet(finest, rho, mom)


# ---------------------------------------------------------------------------
# Weak-form consistency functionals


def consistency_residuals(traj, initial, gas, sp, phi, phivec):
    """Defects of the discrete trajectory in the weak continuity, momentum
    and energy forms, evaluated against one scalar and one vector test
    function.

    ``traj`` must hold the state at every time node (``solve`` with
    ``keep_all=True``).  Returns ``(e1, e2, e3)``: the absolute continuity
    defect, the max over components of the momentum defect, and the largest
    positive part of the energy gain over the initial energy.
    """
    if len(traj.times) != len(traj.states):
        raise ValueError("trajectory must carry a state per time node")
    grid = traj.states[0].grid
    x1, x2 = grid.cell_centers()
    area = grid.cell_area
    times = traj.times

    def space_int(cellvals):
        return float(np.sum(cellvals) * area)

    # continuity: rho d_t phi + m . grad phi, plus the data term
    e1 = 0.0
    phi_vals = [np.asarray(phi.value(t, x1, x2), dtype=np.float64) for t in times]
    for k in range(len(times) - 1):
        rho = grid.as2d(traj.states[k].rho)
        e1 += space_int(rho * (phi_vals[k + 1] - phi_vals[k]))
    for k in range(1, len(times)):
        dtk = times[k] - times[k - 1]
        g1, g2 = phi.grad(times[k], x1, x2)
        m = traj.states[k].mom
        e1 += dtk * space_int(grid.as2d(m[0]) * g1 + grid.as2d(m[1]) * g2)
    e1 += space_int(grid.as2d(initial.rho) * phi_vals[0])

    # momentum: m_i d_t phi_i + (m_i u) . grad phi_i + p d_i phi_i, per component
    e2 = 0.0
    for i, tf in enumerate(phivec):
        defect = 0.0
        tf_vals = [np.asarray(tf.value(t, x1, x2), dtype=np.float64) for t in times]
        for k in range(len(times) - 1):
            mi = grid.as2d(traj.states[k].mom[i])
            defect += space_int(mi * (tf_vals[k + 1] - tf_vals[k]))
        for k in range(1, len(times)):
            dtk = times[k] - times[k - 1]
            g1, g2 = tf.grad(times[k], x1, x2)
            st = traj.states[k]
            rho = grid.as2d(st.rho)
            mi = grid.as2d(st.mom[i])
            conv = mi * (grid.as2d(st.mom[0]) * g1 + grid.as2d(st.mom[1]) * g2) / rho
            pres = gas.a * rho**gas.gamma * (g1 if i == 0 else g2)
            defect += dtk * space_int(conv + pres)
        defect += space_int(grid.as2d(initial.mom[i]) * tf_vals[0])
        e2 = max(e2, abs(defect))

    # energy: largest positive excess over the initial energy
    e0 = space_int(grid.as2d(cell_energy(initial, gas)))
    gain = max(
        space_int(grid.as2d(cell_energy(st, gas))) - e0 for st in traj.states
    )
    e3 = max(0.0, gain)

    return abs(e1), e2, e3
