"""Sample orchestration, empirical means, and statistical error tables.

Stream layout: the sample-id space of a plan is split into a reference
block ``[0, n_ref)`` and an evaluation block of ``l_reps`` contiguous
chunks of ``max(n_list)`` ids each, starting at ``n_ref``.  Repetition
``ell`` owns ``[n_ref + ell*maxN, n_ref + (ell+1)*maxN)`` and an N-run uses
the first N ids of each chunk, so growing N only adds samples (the error
curve stays comparable across N) and reference and evaluation draws never
overlap.

Every sample id maps to its own counter-based random stream, so samples
can be computed in any order, on any number of workers, with bit-identical
results; aggregation always reduces in ascending id order.
"""

import math
import multiprocessing
from dataclasses import dataclass, field

import numpy as np

from .analysis import MeshLadder, cesaro_average, inject_to_fine
from .errors import PlanError
from .fields import FieldSet, GasParams, KHDataSpec, kh_coefficients, kh_field, sample_stream
from .scheme import SchemeParams, solve

__all__ = [
    "SamplePlan",
    "ErrorTable",
    "TableRow",
    "VARIABLES",
    "run_sample",
    "run_sample_cesaro",
    "solve_samples",
    "empirical_mean",
    "evaluation_ids",
    "e1_from_batches",
    "statistical_error_e1",
    "statistical_error_e2",
    "observed_order",
    "e1_study",
    "e2_study",
    "total_error_study",
]

VARIABLES = ("rho", "m1", "m2")


@dataclass(frozen=True)
class SamplePlan:
    """Everything a statistical study needs besides the evaluation grid."""

    master_seed: int
    ladder: MeshLadder
    gas: GasParams = field(default_factory=GasParams)
    scheme: SchemeParams = field(default_factory=SchemeParams)
    kh: KHDataSpec = field(default_factory=KHDataSpec)
    n_list: tuple = (5, 10, 20, 40, 80)
    l_reps: int = 20
    n_ref: int = 100

    def __post_init__(self):
        if not self.n_list or any(n < 1 for n in self.n_list):
            raise PlanError(f"sample counts must all be at least 1: {self.n_list}")
        if list(self.n_list) != sorted(set(self.n_list)):
            raise PlanError(f"sample counts must be strictly increasing: {self.n_list}")
        if self.l_reps < 1:
            raise PlanError(f"repetition count must be at least 1, got {self.l_reps}")
        if self.n_ref < max(self.n_list):
            raise PlanError(
                f"n_ref={self.n_ref} must be at least max(n_list)={max(self.n_list)}"
            )

    @property
    def max_n(self):
        return max(self.n_list)

    def reference_ids(self):
        return np.arange(self.n_ref)

    def all_evaluation_ids(self):
        return np.arange(self.n_ref, self.n_ref + self.l_reps * self.max_n)


def evaluation_ids(plan, n, ell):
    """Ids of the n-sample batch of repetition ``ell`` (disjoint from reference)."""
    if n not in plan.n_list:
        raise PlanError(f"N={n} is not in the plan's sample counts {plan.n_list}")
    if not 0 <= ell < plan.l_reps:
        raise PlanError(f"repetition {ell} outside [0, {plan.l_reps})")
    start = plan.n_ref + ell * plan.max_n
    ids = np.arange(start, start + n)
    if ids[0] < plan.n_ref:
        raise PlanError("evaluation ids overlap the reference block")
    return ids


def run_sample(plan, sample_id, grid):
    """Generate the sample's initial data and solve to the final time.

    Bit-identical for a fixed (master_seed, sample_id) pair regardless of
    execution order or worker count.
    """
    rng = sample_stream(plan.master_seed, sample_id)
    data = kh_field(plan.kh, kh_coefficients(plan.kh, rng), grid)
    return solve(data, plan.gas, plan.scheme).final


def run_sample_cesaro(plan, sample_id, ladder):
    """Solve one realisation on every ladder grid and average on the finest."""
    rng = sample_stream(plan.master_seed, sample_id)
    coeffs = kh_coefficients(plan.kh, rng)
    finals = []
    for grid in ladder:
        data = kh_field(plan.kh, coeffs, grid)
        finals.append(solve(data, plan.gas, plan.scheme).final)
    return cesaro_average(finals)


def _sample_task(args):
    plan, sample_id, target, cesaro = args
    if cesaro:
        return run_sample_cesaro(plan, sample_id, target)
    return run_sample(plan, sample_id, target)


def solve_samples(plan, target, ids, workers=1, cesaro=False):
    """Solve the listed sample ids; returns ``{id: FieldSet}``.

    ``target`` is a grid (plain mode) or a mesh ladder (cesaro mode).  The
    result does not depend on ``workers``.
    """
    ids = [int(i) for i in ids]
    tasks = [(plan, i, target, cesaro) for i in ids]
    if workers <= 1:
        results = [_sample_task(t) for t in tasks]
    else:
        with multiprocessing.Pool(processes=workers) as pool:
            results = pool.map(_sample_task, tasks, chunksize=1)
    return dict(zip(ids, results))


def empirical_mean(states):
    """Cellwise arithmetic mean of a non-empty list of states on one grid."""
    states = list(states)
    if not states:
        raise ValueError("empirical mean of an empty list")
    grid = states[0].grid
    if any(s.grid != grid for s in states):
        raise ValueError("empirical mean requires a common grid")
    rho = np.mean([s.rho for s in states], axis=0)
    mom = np.mean([s.mom for s in states], axis=0)
    return FieldSet(grid, rho, mom)


def _l1_per_variable(grid, drho, dmom):
    area = grid.cell_area
    return {
        "rho": float(np.sum(np.abs(drho)) * area),
        "m1": float(np.sum(np.abs(dmom[0])) * area),
        "m2": float(np.sum(np.abs(dmom[1])) * area),
    }


def e1_from_batches(batches, reference):
    """Statistical error of batch means against a reference expectation.

    ``batches`` is one list of states per repetition; the result is the
    repetition average of the per-variable L1 distances between each batch
    mean and the reference.
    """
    acc = dict.fromkeys(VARIABLES, 0.0)
    for batch in batches:
        mean = empirical_mean(batch)
        errs = _l1_per_variable(
            reference.grid, mean.rho - reference.rho, mean.mom - reference.mom
        )
        for v in VARIABLES:
            acc[v] += errs[v]
    return {v: acc[v] / len(batches) for v in VARIABLES}


def statistical_error_e1(plan, grid, reference, n, samples):
    """E1 at sample count ``n`` from precomputed evaluation samples."""
    batches = [
        [samples[i] for i in evaluation_ids(plan, n, ell)]
        for ell in range(plan.l_reps)
    ]
    return e1_from_batches(batches, reference)


def statistical_error_e2(plan, reference, n, cesaro_samples):
    """E2 at sample count ``n``; samples are already ladder-averaged."""
    batches = [
        [cesaro_samples[i] for i in evaluation_ids(plan, n, ell)]
        for ell in range(plan.l_reps)
    ]
    return e1_from_batches(batches, reference)


def observed_order(err_coarse, err_fine):
    """Convergence order between consecutive rows where N doubles."""
    if err_coarse <= 0.0 or err_fine <= 0.0:
        raise ValueError("observed order needs positive errors")
    return math.log2(err_coarse / err_fine)


# ---------------------------------------------------------------------------
# Error tables


@dataclass(frozen=True)
class TableRow:
    n: int
    err: dict
    order: dict  # per-variable order vs the previous row; None on the first
    h: float | None = None


@dataclass
class ErrorTable:
    """Per-variable errors and observed orders, one row per sample count."""

    rows: list
    meta: dict = field(default_factory=dict)

    @property
    def with_h(self):
        return any(r.h is not None for r in self.rows)

    def column(self, var):
        return [r.err[var] for r in self.rows]

    def to_csv(self):
        cols = ["N"] if not self.with_h else ["h", "N"]
        for v in VARIABLES:
            cols += [f"err_{v}", f"ord_{v}"]
        lines = [",".join(cols)]
        for r in self.rows:
            cells = [] if r.h is None else [f"{r.h:.17g}"]
            cells.append(str(r.n))
            for v in VARIABLES:
                cells.append(f"{r.err[v]:.17g}")
                o = r.order.get(v) if r.order else None
                cells.append("" if o is None else f"{o:.17g}")
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def plot_csv(self):
        """Log-log companion data with N**-1/2 and N**-1 reference slopes."""
        cols = ["N"] if not self.with_h else ["h", "N"]
        cols += [f"err_{v}" for v in VARIABLES] + ["ref_halfslope", "ref_slope1"]
        lines = [",".join(cols)]
        n0 = self.rows[0].n
        e0 = self.rows[0].err["rho"]
        for r in self.rows:
            cells = [] if r.h is None else [f"{r.h:.17g}"]
            cells.append(str(r.n))
            cells += [f"{r.err[v]:.17g}" for v in VARIABLES]
            cells.append(f"{e0 * math.sqrt(n0 / r.n):.17g}")
            cells.append(f"{e0 * (n0 / r.n):.17g}")
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


def _rows_from_errors(keyed_errors):
    """Build table rows with order columns from [(n, h, errdict), ...]."""
    rows = []
    prev = None
    for n, h, err in keyed_errors:
        order = {}
        if prev is not None:
            for v in VARIABLES:
                try:
                    order[v] = observed_order(prev[v], err[v])
                except ValueError:
                    order[v] = None
        rows.append(TableRow(n=n, err=err, order=order or None, h=h))
        prev = err
    return rows


def e1_study(plan, grid, workers=1):
    """Reference mean plus the E1 error table over the plan's sample counts."""
    ref_samples = solve_samples(plan, grid, plan.reference_ids(), workers)
    reference = empirical_mean([ref_samples[i] for i in plan.reference_ids()])
    samples = solve_samples(plan, grid, plan.all_evaluation_ids(), workers)
    keyed = [
        (n, None, statistical_error_e1(plan, grid, reference, n, samples))
        for n in plan.n_list
    ]
    meta = {"mode": "e1", "nx": grid.nx, "ny": grid.ny, "master_seed": plan.master_seed,
            "l_reps": plan.l_reps, "n_ref": plan.n_ref}
    return ErrorTable(_rows_from_errors(keyed), meta), reference


def e2_study(plan, workers=1):
    """E1 analogue built from ladder-averaged solutions (the plan's ladder)."""
    ladder = plan.ladder
    ref_samples = solve_samples(plan, ladder, plan.reference_ids(), workers, cesaro=True)
    reference = empirical_mean([ref_samples[i] for i in plan.reference_ids()])
    samples = solve_samples(plan, ladder, plan.all_evaluation_ids(), workers, cesaro=True)
    keyed = [
        (n, None, statistical_error_e2(plan, reference, n, samples))
        for n in plan.n_list
    ]
    meta = {"mode": "e2", "ladder": [g.nx for g in ladder],
            "master_seed": plan.master_seed, "l_reps": plan.l_reps, "n_ref": plan.n_ref}
    return ErrorTable(_rows_from_errors(keyed), meta), reference


def total_error_study(plan, pairs, ref_grid, workers=1, cesaro=False):
    """Combined discretisation/statistical error over (h, N) pairs.

    Every pair's batch means are formed on the pair grid, injected to the
    reference grid and compared there against the reference expectation
    computed from ``n_ref`` dedicated samples.  In cesaro mode each
    evaluation sample is first averaged over the dyadic ladder running from
    the coarsest pair grid up to its own grid.
    """
    if not pairs:
        raise PlanError("total-error study needs at least one (grid, N) pair")
    for (ga, _), (gb, _) in zip(pairs, pairs[1:]):
        if gb.nx <= ga.nx:
            raise PlanError("pairs must be sorted by decreasing h (increasing nx)")
    if ref_grid.nx < pairs[-1][0].nx:
        raise PlanError("reference mesh must be at least as fine as every pair")
    for _, n in pairs:
        if n not in plan.n_list:
            raise PlanError(f"pair sample count {n} missing from plan n_list")

    ref_samples = solve_samples(plan, ref_grid, plan.reference_ids(), workers)
    reference = empirical_mean([ref_samples[i] for i in plan.reference_ids()])

    keyed = []
    for k, (grid, n) in enumerate(pairs):
        if cesaro:
            ladder = MeshLadder(tuple(g for g, _ in pairs[: k + 1]))
            target, ces = ladder, True
        else:
            target, ces = grid, False
        samples = solve_samples(
            plan,
            target,
            np.concatenate([evaluation_ids(plan, n, ell) for ell in range(plan.l_reps)]),
            workers,
            cesaro=ces,
        )
        acc = dict.fromkeys(VARIABLES, 0.0)
        for ell in range(plan.l_reps):
            mean = empirical_mean([samples[i] for i in evaluation_ids(plan, n, ell)])
            lifted = inject_to_fine(mean, ref_grid)
            errs = _l1_per_variable(
                ref_grid, lifted.rho - reference.rho, lifted.mom - reference.mom
            )
            for v in VARIABLES:
                acc[v] += errs[v]
        keyed.append((n, grid.h, {v: acc[v] / plan.l_reps for v in VARIABLES}))

    meta = {"mode": "total-e2" if cesaro else "total-e1",
            "ref_nx": ref_grid.nx, "master_seed": plan.master_seed,
            "l_reps": plan.l_reps, "n_ref": plan.n_ref}
    return ErrorTable(_rows_from_errors(keyed), meta), reference
