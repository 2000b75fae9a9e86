"""Implicit finite volume stepper for the 2D isentropic Euler system.

Space discretisation: face fluxes combine a central part with a diffusive
term proportional to ``h**eps_flux + |<u>.n|/2`` times the jump, plus a
momentum viscosity of size ``h**alpha`` acting on the velocity jumps.  Time
discretisation: backward Euler, so every step solves a nonlinear system for
the new state.

The nonlinear system is solved by a lagged-coefficient fixed point: the
full residual is evaluated at the current iterate and corrected by the
inverse of a constant-coefficient approximation of the linearised operator,
which is diagonal in Fourier space on the periodic grid, so one sweep costs
a few FFTs.  Anderson mixing over a short history accelerates the
contraction, and the starting iterate is extrapolated from the two previous
time levels when the driver has them.  Convergence requires both the
relative max-norm increment and the scaled residual to drop below
``picard_tol``.  The iteration order is fixed, so a run is reproducible bit
for bit.

Residual scaling: every cell equation is multiplied by ``dt / |K|`` so the
entries carry the units of a per-step state change and ``picard_tol`` acts
as a dimensionless tolerance.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import NonConvergence, PositivityLoss
from .fields import FieldSet, total_energy

__all__ = [
    "SchemeParams",
    "ParamVerdict",
    "StepReport",
    "Trajectory",
    "upwind_flux",
    "validate_params",
    "residual",
    "step",
    "solve",
]

_ANDERSON_DEPTH = 5
_MAX_DT_HALVINGS = 5


@dataclass
class SchemeParams:
    """Knobs of the viscous flux scheme and its implicit solver."""

    alpha: float = 0.8
    eps_flux: float = 0.0
    dt: float | None = None  # None: use h/2 for the grid at hand
    t_final: float = 0.5
    picard_tol: float = 1e-10
    picard_max: int = 200

    def __post_init__(self):
        if self.alpha <= 0.0:
            raise ValueError(f"viscosity exponent alpha must be positive, got {self.alpha}")
        if self.eps_flux <= -1.0:
            raise ValueError(f"flux-diffusion exponent must exceed -1, got {self.eps_flux}")
        if self.dt is not None and self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.t_final <= 0.0:
            raise ValueError("t_final must be positive")
        if self.picard_tol <= 0.0 or self.picard_max < 1:
            raise ValueError("solver tolerances must be positive")

    def dt_for(self, grid):
        """Effective time step on ``grid``: explicit dt or the h/2 default."""
        return self.dt if self.dt is not None else 0.5 * grid.h


@dataclass(frozen=True)
class ParamVerdict:
    """Outcome of the (eps, alpha) admissibility check."""

    admissible: bool
    alpha_max: float
    reason: str = ""

    def __bool__(self):
        return self.admissible


def validate_params(gas, sp, dim=2):
    """Check (eps_flux, alpha) against the admissible band.

    For gamma in (1, 2) the bound is ``alpha < 2 - (dim/3 + 1 + eps)/gamma``;
    for gamma >= 2 it is ``alpha < 2 - dim/gamma``.  Returns a verdict, never
    raises.
    """
    if gas.gamma >= 2.0:
        amax = 2.0 - dim / gas.gamma
    else:
        amax = 2.0 - (dim / 3.0 + 1.0 + sp.eps_flux) / gas.gamma
    if sp.eps_flux <= -1.0:
        return ParamVerdict(False, amax, f"eps_flux must exceed -1, got {sp.eps_flux}")
    if not 0.0 < sp.alpha < amax:
        return ParamVerdict(
            False, amax, f"alpha={sp.alpha} outside admissible band (0, {amax:.6g})"
        )
    return ParamVerdict(True, amax)


def upwind_flux(face, r, u, h, eps_flux):
    """Diffusive upwind flux through one face.

    ``<r><u>.n - (h**eps + |<u>.n|/2) * [r]`` with the face's stored
    orientation.  The vector analogue is the same formula applied to each
    component of the transported quantity.
    """
    r = np.asarray(r).ravel()
    u = np.asarray(u)
    i, o = face.in_cell, face.out_cell
    un = u[0] * face.normal[0] + u[1] * face.normal[1]
    vn = 0.5 * (un[i] + un[o])
    ravg = 0.5 * (r[i] + r[o])
    rjump = r[o] - r[i]
    return ravg * vn - (h**eps_flux + 0.5 * abs(vn)) * rjump


# ---------------------------------------------------------------------------
# Residual assembly on the stacked state (3, ny, nx): rho, m1, m2.
# Axis 1 is y, axis 2 is x.


def _residual_stack(grid, gas, sp, dt, uo, u):
    """Scaled residual of the implicit step equations, shape (3, ny, nx).

    Every flux, pressure and viscosity term is evaluated at the new state
    ``u`` (backward Euler); ``uo`` is the previous time level.
    """
    h = grid.h
    c = dt / h
    heps = h**sp.eps_flux

    ue = np.roll(u, -1, axis=2)
    un = np.roll(u, -1, axis=1)
    v1 = u[1] / u[0]
    v2 = u[2] / u[0]
    vnx = 0.5 * (v1 + ue[1] / ue[0])
    vny = 0.5 * (v2 + un[2] / un[0])
    dcx = heps + 0.5 * np.abs(vnx)
    dcy = heps + 0.5 * np.abs(vny)

    fx = 0.5 * (u + ue) * vnx - dcx * (ue - u)
    fy = 0.5 * (u + un) * vny - dcy * (un - u)
    r = (u - uo) + c * (
        fx - np.roll(fx, 1, axis=2) + fy - np.roll(fy, 1, axis=1)
    )

    p = gas.a * u[0] ** gas.gamma
    r[1] += (0.5 * c) * (np.roll(p, -1, axis=1) - np.roll(p, 1, axis=1))
    r[2] += (0.5 * c) * (np.roll(p, -1, axis=0) - np.roll(p, 1, axis=0))

    cvis = dt * h ** (sp.alpha - 2.0)
    for i, v in ((1, v1), (2, v2)):
        # sum of inward jumps; differences of equal values cancel exactly
        r[i] += cvis * (
            ((v - np.roll(v, -1, axis=1)) + (v - np.roll(v, 1, axis=1)))
            + ((v - np.roll(v, -1, axis=0)) + (v - np.roll(v, 1, axis=0)))
        )
    return r


def residual(state_new, state_old, gas, sp, dt=None):
    """Scaled cellwise residual of the implicit step, shape (ncells, 3).

    Columns are (continuity, momentum-1, momentum-2); a converged step has
    max-norm at most ``picard_tol`` in these units.
    """
    grid = state_new.grid
    if state_old.grid != grid:
        raise ValueError("residual requires both states on the same grid")
    if not np.all(state_new.rho > 0.0):
        raise PositivityLoss("non-positive density in trial state")
    dt = sp.dt_for(grid) if dt is None else dt
    uo = _stack_state(state_old)
    u = _stack_state(state_new)
    r = _residual_stack(grid, gas, sp, dt, uo, u)
    return r.reshape(3, grid.ncells).T.copy()


def _stack_state(state):
    shape = state.grid.shape
    return np.stack(
        [state.rho.reshape(shape), state.mom[0].reshape(shape), state.mom[1].reshape(shape)]
    )


# ---------------------------------------------------------------------------
# Implicit step: preconditioned fixed point with Anderson mixing

_symbol_cache = {}


def _laplacian_symbol(nx, ny):
    """Fourier symbols of the one-dimensional jump Laplacians (x row, y col)."""
    key = (nx, ny)
    sym = _symbol_cache.get(key)
    if sym is None:
        tx = 2.0 - 2.0 * np.cos(2.0 * np.pi * np.fft.rfftfreq(nx))
        ty = 2.0 - 2.0 * np.cos(2.0 * np.pi * np.fft.fftfreq(ny))
        sym = (tx[None, :], ty[:, None])
        _symbol_cache[key] = sym
    return sym


class _AndersonMixer:
    """Anderson mixing of the fixed-point map ``x -> x + f``.

    Histories of iterate and residual-direction differences feed a small
    regularised normal-equation solve; anything suspicious falls back to
    the plain update.  Deterministic: fixed depth, fixed order.
    """

    def __init__(self, depth=_ANDERSON_DEPTH):
        self.depth = depth
        self.reset()

    def reset(self):
        self.last_x = None
        self.last_f = None
        self.dxs = []
        self.dfs = []
        self.gram = np.zeros((0, 0))

    def update(self, x, f):
        if self.last_x is not None:
            dx = x - self.last_x
            df = f - self.last_f
            m = len(self.dfs) + 1
            gram = np.empty((m, m))
            gram[: m - 1, : m - 1] = self.gram
            for j, prev in enumerate(self.dfs):
                gram[m - 1, j] = gram[j, m - 1] = float(prev @ df)
            gram[m - 1, m - 1] = float(df @ df)
            self.dxs.append(dx)
            self.dfs.append(df)
            self.gram = gram
            if m > self.depth:
                self.dxs.pop(0)
                self.dfs.pop(0)
                self.gram = self.gram[1:, 1:].copy()
        self.last_x = x
        self.last_f = f

        m = len(self.dfs)
        if m == 0:
            return x + f
        b = np.array([df @ f for df in self.dfs])
        reg = 1e-12 * np.trace(self.gram) / m + 1e-300
        try:
            gamma = np.linalg.solve(self.gram + reg * np.eye(m), b)
        except np.linalg.LinAlgError:
            return x + f
        if not np.all(np.isfinite(gamma)):
            return x + f
        out = x + f
        for g, dx, df in zip(gamma, self.dxs, self.dfs):
            out -= g * (dx + df)
        return out


@dataclass
class StepReport:
    """Per-step diagnostics of the implicit solver."""

    picard_iters: int
    residual: float  # final relative max-norm increment
    mass_drift: float
    energy_change: float
    energy: float = 0.0
    step: int = 0
    t: float = 0.0
    dt: float = 0.0


def step(state, gas, sp, dt=None, guess=None):
    """Advance one backward-Euler step; returns (new state, report).

    ``guess`` (internal) is an optional stacked (3, ny, nx) starting
    iterate, e.g. an extrapolation from earlier time levels.  Raises
    :class:`NonConvergence` when the iteration budget is exhausted and
    :class:`PositivityLoss` when an inner iterate loses positivity; the
    caller may retry with a smaller dt in either case.
    """
    grid = state.grid
    dt = sp.dt_for(grid) if dt is None else dt
    h = grid.h
    shape = grid.shape
    n = grid.ncells

    uo = _stack_state(state)
    u = uo.copy() if guess is None or guess[0].min() <= 0.0 else guess.copy()

    # Constant-coefficient preconditioner from the old state: identity plus
    # mid-range diffusion/viscosity Laplacians, diagonal in Fourier space.
    vel = state.velocity()
    dbar_x = h**sp.eps_flux + 0.25 * float(np.max(np.abs(vel[0])))
    dbar_y = h**sp.eps_flux + 0.25 * float(np.max(np.abs(vel[1])))
    wbar = 0.5 * float(1.0 / state.rho.min() + 1.0 / state.rho.max())
    tx, ty = _laplacian_symbol(grid.nx, grid.ny)
    p_cont = 1.0 + (dt / h) * (dbar_x * tx + dbar_y * ty)
    p_mom = p_cont + dt * h ** (sp.alpha - 2.0) * wbar * (tx + ty)
    phat = np.stack([p_cont, p_mom, p_mom])

    mixer = _AndersonMixer()
    rel_incr = 0.0
    iters = 0

    for k in range(sp.picard_max + 1):
        if u[0].min() <= 0.0:
            raise PositivityLoss("inner iterate lost density positivity")
        r = _residual_stack(grid, gas, sp, dt, uo, u)
        res = float(np.max(np.abs(r)))
        if not np.isfinite(res):
            raise NonConvergence("inner iteration diverged", residual=res)
        if res <= sp.picard_tol and (k == 0 or rel_incr <= sp.picard_tol):
            break
        if k == sp.picard_max:
            raise NonConvergence(
                f"no convergence in {sp.picard_max} iterations "
                f"(residual {res:.3e}, increment {rel_incr:.3e})",
                residual=res,
            )

        fhat = np.fft.rfft2(r, axes=(1, 2))
        fhat /= phat
        fcorr = np.fft.irfft2(fhat, s=shape, axes=(1, 2))
        x = u.reshape(-1)
        f = -fcorr.reshape(-1)
        x_new = mixer.update(x, f)
        if x_new[:n].min() <= 0.0:
            # accelerated update overshot; fall back to the plain sweep
            mixer.reset()
            x_new = x + f

        scale = max(float(np.max(np.abs(x_new))), 1e-300)
        rel_incr = float(np.max(np.abs(x_new - x))) / scale
        u = x_new.reshape(3, *shape)
        iters = k + 1

    new = FieldSet(grid, u[0].reshape(-1).copy(), u[1:].reshape(2, -1).copy())
    area = grid.cell_area
    mass_drift = abs(float(np.sum(new.rho) - np.sum(state.rho)) * area)
    e_old = total_energy(state, gas)
    e_new = total_energy(new, gas)
    report = StepReport(
        picard_iters=iters,
        residual=rel_incr,
        mass_drift=mass_drift,
        energy_change=e_new - e_old,
        energy=e_new,
        dt=dt,
    )
    return new, report


# ---------------------------------------------------------------------------
# Time marching


@dataclass
class Trajectory:
    """Snapshots at requested times plus the full per-step report series."""

    times: list
    states: list
    reports: list = field(default_factory=list)

    @property
    def final(self):
        return self.states[-1]


def _advance(state, gas, sp, dt, depth, step_index, guess=None):
    """One step of size dt, halving dt on solver failures (up to a limit)."""
    try:
        return [step(state, gas, sp, dt=dt, guess=guess)]
    except (NonConvergence, PositivityLoss) as err:
        if depth >= _MAX_DT_HALVINGS:
            err.step = step_index
            raise
        first = _advance(state, gas, sp, 0.5 * dt, depth + 1, step_index)
        second = _advance(first[-1][0], gas, sp, 0.5 * dt, depth + 1, step_index)
        return first + second


def solve(initial, gas, sp, snapshot_times=None, keep_all=False):
    """March from t=0 to ``sp.t_final`` and collect snapshots.

    The step size is ``sp.dt`` (default h/2), clipped so that every
    requested snapshot time and the final time are hit exactly.  With
    ``keep_all`` the trajectory stores the state at every time node
    (including t=0), which the weak-form defect functionals need.
    """
    grid = initial.grid
    dt0 = sp.dt_for(grid)
    t_final = sp.t_final
    teps = 1e-12 * max(1.0, t_final)

    requested = sorted(set(float(t) for t in (snapshot_times or [t_final])))
    for t in requested:
        if t < -teps or t > t_final + teps:
            raise ValueError(f"snapshot time {t} outside [0, {t_final}]")
    targets = sorted(set(requested) | {t_final})

    times, states = [], []
    if keep_all or (requested and requested[0] <= teps):
        times.append(0.0)
        states.append(initial.copy())

    traj = Trajectory(times=times, states=states)
    state = initial
    prev = None  # (state, dt) of the last accepted step, for extrapolation
    t = 0.0
    step_index = 0
    for target in targets:
        while t < target - teps:
            dt = min(dt0, target - t)
            guess = None
            if prev is not None and prev[1] == dt:
                guess = 2.0 * _stack_state(state) - _stack_state(prev[0])
            for new_state, rep in _advance(state, gas, sp, dt, 0, step_index + 1, guess):
                step_index += 1
                t = min(t + rep.dt, target)
                if target - t < teps:
                    t = target
                rep.step = step_index
                rep.t = t
                traj.reports.append(rep)
                prev = (state, rep.dt)
                state = new_state
            if keep_all:
                traj.times.append(t)
                traj.states.append(state)
        if not keep_all and target > teps and target in requested:
            traj.times.append(t)
            traj.states.append(state)
    return traj
