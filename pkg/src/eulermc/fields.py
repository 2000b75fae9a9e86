"""Cellwise flow state, total energy, data metric, random shear-layer data.

State is stored in conservative variables: density ``rho`` (flat, length
ncells) and momentum ``mom`` (shape ``(2, ncells)``).  Density is strictly
positive by construction; the solver maintains that invariant and the
``FieldSet`` constructor enforces it.

Randomness: per-sample streams come from the counter-based Philox generator
keyed by ``SeedSequence((master_seed, sample_id))``, so every sample is
reproducible on its own, independent of scheduling or worker count.  The
Kelvin-Helmholtz draw order is fixed: for each interface j = 1, 2 draw the
``n_modes`` cosine amplitudes from U[0,1], then the phases from U[-pi,pi];
amplitudes are rescaled to unit sum afterwards.
"""

import math
from dataclasses import dataclass

import numpy as np

from .grid import Grid

__all__ = [
    "FieldSet",
    "GasParams",
    "KHDataSpec",
    "KHCoefficients",
    "energy_density",
    "cell_energy",
    "total_energy",
    "data_metric",
    "sample_stream",
    "kh_coefficients",
    "kh_field",
    "sample_kh_data",
    "write_efld",
    "read_efld",
]

EFLD_MAGIC = "EFLD1"


@dataclass(frozen=True)
class GasParams:
    """Isentropic pressure law p = a * rho**gamma."""

    gamma: float = 1.4
    a: float = 1.0

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        if not self.a > 0.0:
            raise ValueError(f"pressure coefficient a must be positive, got {self.a}")


@dataclass(frozen=True)
class KHDataSpec:
    """Randomised two-band shear layer (Kelvin-Helmholtz) initial data.

    Two interfaces at mean heights ``j1`` and ``j2`` separate an inner band
    (rho=2, u=(-0.5, 0)) from the outer state (rho=1, u=(0.5, 0)).  Each
    interface is perturbed by ``eps_perturb`` times a random cosine series
    with ``n_modes`` modes whose amplitudes are normalised to unit sum.
    """

    j1: float = 0.25
    j2: float = 0.75
    eps_perturb: float = 0.01
    n_modes: int = 10
    inner: tuple = (2.0, -0.5, 0.0)
    outer: tuple = (1.0, 0.5, 0.0)

    def __post_init__(self):
        if not 0.0 < self.j1 < self.j2 < 1.0:
            raise ValueError(f"need 0 < j1 < j2 < 1, got j1={self.j1}, j2={self.j2}")
        if self.eps_perturb < 0.0:
            raise ValueError("perturbation amplitude must be non-negative")
        if self.n_modes < 1:
            raise ValueError("need at least one perturbation mode")


@dataclass(eq=False)
class FieldSet:
    """Piecewise-constant state: rho (ncells,), mom (2, ncells)."""

    grid: Grid
    rho: np.ndarray
    mom: np.ndarray

    def __post_init__(self):
        self.rho = np.ascontiguousarray(self.rho, dtype=np.float64)
        self.mom = np.ascontiguousarray(self.mom, dtype=np.float64)
        n = self.grid.ncells
        if self.rho.shape != (n,):
            raise ValueError(f"rho must have shape ({n},), got {self.rho.shape}")
        if self.mom.shape != (2, n):
            raise ValueError(f"mom must have shape (2, {n}), got {self.mom.shape}")
        if not np.all(self.rho > 0.0):
            raise ValueError("density must be strictly positive in every cell")

    def copy(self):
        return FieldSet(self.grid, self.rho.copy(), self.mom.copy())

    def velocity(self):
        """Cellwise velocity m / rho, shape (2, ncells)."""
        return self.mom / self.rho

    @staticmethod
    def constant(grid, rho, u1=0.0, u2=0.0):
        """Uniform state with density ``rho`` and velocity ``(u1, u2)``."""
        r = np.full(grid.ncells, float(rho))
        m = np.stack([r * float(u1), r * float(u2)])
        return FieldSet(grid, r, m)


def energy_density(rho, mom, gas):
    """Convex total-energy integrand of a single (rho, m) pair.

    ``0.5*|m|^2/rho + a/(gamma-1)*rho**gamma`` for positive density, zero at
    the vacuum state (0, 0), infinite for zero density with momentum.
    """
    if rho < 0.0:
        raise ValueError(f"density must be non-negative, got {rho}")
    m1, m2 = float(mom[0]), float(mom[1])
    if rho == 0.0:
        return 0.0 if m1 == 0.0 and m2 == 0.0 else math.inf
    return 0.5 * (m1 * m1 + m2 * m2) / rho + gas.a / (gas.gamma - 1.0) * rho**gas.gamma


def cell_energy(state, gas):
    """Vectorised energy integrand per cell (density is positive here)."""
    kin = 0.5 * (state.mom[0] ** 2 + state.mom[1] ** 2) / state.rho
    return kin + gas.a / (gas.gamma - 1.0) * state.rho**gas.gamma


def total_energy(state, gas):
    """Integral of the energy integrand over the box (midpoint rule)."""
    return float(state.grid.cell_area * np.sum(cell_energy(state, gas)))


def data_metric(d1, d2, gas):
    """Distance between two data sets.

    L^gamma distance of the densities plus the L^2 distance of m/sqrt(rho);
    densities are strictly positive here so no vacuum indicator is needed.
    """
    if d1.grid != d2.grid:
        raise ValueError("data metric requires both states on the same grid")
    area = d1.grid.cell_area
    g = gas.gamma
    drho = float(np.sum(np.abs(d1.rho - d2.rho) ** g) * area) ** (1.0 / g)
    v1 = d1.mom / np.sqrt(d1.rho)
    v2 = d2.mom / np.sqrt(d2.rho)
    dv = math.sqrt(float(np.sum((v1 - v2) ** 2) * area))
    return drho + dv


# ---------------------------------------------------------------------------
# Random Kelvin-Helmholtz initial data


def sample_stream(master_seed, sample_id):
    """Independent reproducible stream for one sample.

    Philox (counter-based) keyed by ``SeedSequence((master_seed, sample_id))``;
    the same pair always yields the same stream, in any process.
    """
    if sample_id < 0:
        raise ValueError(f"sample id must be non-negative, got {sample_id}")
    seq = np.random.SeedSequence(entropy=(int(master_seed), int(sample_id)))
    return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class KHCoefficients:
    """One realisation of the interface perturbation coefficients."""

    amp1: np.ndarray
    phase1: np.ndarray
    amp2: np.ndarray
    phase2: np.ndarray


def kh_coefficients(spec, rng):
    """Draw one realisation of the perturbation coefficients from ``rng``.

    Amplitudes a_j^i ~ U[0,1] rescaled so sum_i a_j^i = 1; phases b_j^i ~
    U[-pi, pi].  Draw order (a1, b1, a2, b2) is part of the format contract.
    """
    m = spec.n_modes
    parts = []
    for _ in range(2):
        a = rng.uniform(0.0, 1.0, size=m)
        b = rng.uniform(-math.pi, math.pi, size=m)
        parts.append((a / a.sum(), b))
    (a1, b1), (a2, b2) = parts
    return KHCoefficients(a1, b1, a2, b2)


def _interface(mean, eps, amp, phase, x1):
    modes = np.arange(1, len(amp) + 1)
    series = np.cos(phase[:, None] + 2.0 * np.pi * modes[:, None] * x1[None, :])
    return mean + eps * (amp @ series)


def kh_field(spec, coeffs, grid):
    """Project one interface realisation onto a grid by cell-center lookup."""
    x1c, x2c = grid.cell_centers()
    x1 = x1c[0]  # interface height depends on x1 only
    i1 = _interface(spec.j1, spec.eps_perturb, coeffs.amp1, coeffs.phase1, x1)
    i2 = _interface(spec.j2, spec.eps_perturb, coeffs.amp2, coeffs.phase2, x1)
    inner = (i1[None, :] < x2c) & (x2c < i2[None, :])

    rho_in, u1_in, u2_in = spec.inner
    rho_out, u1_out, u2_out = spec.outer
    rho = np.where(inner, rho_in, rho_out)
    m1 = np.where(inner, rho_in * u1_in, rho_out * u1_out)
    m2 = np.where(inner, rho_in * u2_in, rho_out * u2_out)
    return FieldSet(grid, rho.ravel(), np.stack([m1.ravel(), m2.ravel()]))


def sample_kh_data(spec, grid, rng):
    """Draw coefficients from ``rng`` and project the realisation onto ``grid``."""
    return kh_field(spec, kh_coefficients(spec, rng), grid)


# ---------------------------------------------------------------------------
# EFLD1 field dump format


def write_efld(path, state):
    """Write a field dump: one ASCII header line, then the binary payload.

    Header: ``EFLD1 <nx> <ny> <lx> <ly> <nvars=3>``.  Payload: row-major,
    variable-major (rho, m1, m2), 64-bit little-endian floats.
    """
    g = state.grid
    header = (
        f"{EFLD_MAGIC} {g.nx} {g.ny} {g.lx:.17g} {g.ly:.17g} 3\n".encode("ascii")
    )
    payload = np.concatenate([state.rho, state.mom[0], state.mom[1]])
    with open(path, "wb") as f:
        f.write(header)
        f.write(payload.astype("<f8").tobytes())


def read_efld(path):
    """Read a field dump written by :func:`write_efld`."""
    with open(path, "rb") as f:
        header = f.readline().decode("ascii").split()
        if len(header) != 6 or header[0] != EFLD_MAGIC:
            raise ValueError(f"{path}: not an {EFLD_MAGIC} field dump")
        nx, ny = int(header[1]), int(header[2])
        lx, ly = float(header[3]), float(header[4])
        nvars = int(header[5])
        if nvars != 3:
            raise ValueError(f"{path}: expected 3 variables, header says {nvars}")
        data = np.frombuffer(f.read(), dtype="<f8")
    n = nx * ny
    if data.size != 3 * n:
        raise ValueError(f"{path}: payload has {data.size} values, expected {3 * n}")
    grid = Grid(nx=nx, ny=ny, lx=lx, ly=ly)
    return FieldSet(grid, data[:n].copy(), np.stack([data[n : 2 * n], data[2 * n :]]))
