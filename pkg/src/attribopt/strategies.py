"""Constraint assembly and daily solves for strategies P0 through P8.

Each strategy minimizes scenario expected tail loss on the long-only simplex
subject to a menu of attribution constraints against the benchmark:

    P0  unconstrained simplex
    P1  total allocation effect bounded
    P2  P1 plus total selection effect (two-step)
    P3  total allocation and total combined selection
    P4  per-class allocation effects bounded
    P5  P4 plus per-class selection effects (two-step)
    P6  per-class allocation and combined selection effects
    P7  total allocation plus per-class selection (two-step)
    P8  per-class allocation plus total selection (two-step)

Allocation and combined-selection constraints are linear in asset weights.
Plain selection constraints divide by the portfolio class weight, so the
two-step strategies first solve the allocation-constrained problem (P1 for
P2/P7, P4 for P5/P8), freeze the optimal class totals, and re-minimize tail
loss with the totals pinned, which makes the selection rows linear.  Any
infeasible stage falls back to the previous day's weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .attribution import attribute
from .cvar import SolveOutcome, WeightConstraint, build_etl_lp, solve_lp
from .market_data import WeightVector

__all__ = [
    "STRATEGY_IDS",
    "TWO_STEP_STAGE_ONE",
    "StrategySpec",
    "DailySolve",
    "ConstraintAudit",
    "AuditEntry",
    "build_constraints",
    "solve_day",
    "verify_constraints",
]

STRATEGY_IDS = ("P0", "P1", "P2", "P3", "P4", "P5", "P6", "P7", "P8")

_ALLOCATION_TOTAL = frozenset({"P1", "P2", "P3", "P7"})
_ALLOCATION_CLASS = frozenset({"P4", "P5", "P6", "P8"})
_SELECTION_TOTAL = frozenset({"P2", "P8"})
_SELECTION_CLASS = frozenset({"P5", "P7"})
_COMBINED_TOTAL = frozenset({"P3"})
_COMBINED_CLASS = frozenset({"P6"})

# Stage-1 problem solved to fix class totals before selection rows turn linear.
TWO_STEP_STAGE_ONE = {"P2": "P1", "P5": "P4", "P7": "P1", "P8": "P4"}

# Class totals below this are treated as empty when pinning stage-2 weights.
EMPTY_CLASS_TOL = 1e-9


def _check_bounds(bounds: tuple[float, float], label: str) -> tuple[float, float]:
    lo, hi = float(bounds[0]), float(bounds[1])
    if math.isnan(lo) or math.isnan(hi) or lo > hi:
        raise ValueError(f"{label} bounds must satisfy lower <= upper")
    return lo, hi


@dataclass(frozen=True)
class StrategySpec:
    """One strategy configuration: id, tail level, constraint bounds.

    Bounds apply to whichever constraint families the strategy uses; the
    per-class variants apply the same interval to every class.  Defaults
    reproduce the canonical one-sided form, lower 0 and no upper bound.
    """

    strategy: str
    alpha: float = 0.95
    allocation_bounds: tuple[float, float] = (0.0, math.inf)
    selection_bounds: tuple[float, float] = (0.0, math.inf)
    combined_bounds: tuple[float, float] = (0.0, math.inf)

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGY_IDS:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie strictly between 0 and 1")
        object.__setattr__(
            self, "allocation_bounds", _check_bounds(self.allocation_bounds, "allocation")
        )
        object.__setattr__(
            self, "selection_bounds", _check_bounds(self.selection_bounds, "selection")
        )
        object.__setattr__(
            self, "combined_bounds", _check_bounds(self.combined_bounds, "combined selection")
        )

    @property
    def is_two_step(self) -> bool:
        return self.strategy in TWO_STEP_STAGE_ONE


@dataclass
class DailySolve:
    """Outcome of one day's optimization."""

    status: str  # optimal | no_solution_fallback
    weights: WeightVector
    objectives: tuple[float, ...]  # tail loss per completed stage
    stages: int  # stages attempted
    outcomes: tuple[SolveOutcome, ...]

    @property
    def is_fallback(self) -> bool:
        return self.status == "no_solution_fallback"

    @property
    def objective(self) -> float | None:
        """Final-stage tail loss, None on fallback days."""
        return self.objectives[-1] if self.status == "optimal" else None


def _check_mu(mu: np.ndarray, n_assets: int) -> np.ndarray:
    mu = np.asarray(mu, dtype=np.float64)
    if mu.shape != (n_assets,):
        raise ValueError("expected-return vector length must match the assets")
    if not np.all(np.isfinite(mu)):
        raise ValueError("expected returns must be finite")
    return mu


def _benchmark_stats(benchmark: WeightVector, mu: np.ndarray):
    """Per-class benchmark weights and returns plus the total return."""
    part = benchmark.partition
    wb = benchmark.class_totals()
    if (wb <= 0.0).any():
        raise ValueError("benchmark must give positive weight to every class")
    rb_class = (
        np.bincount(part.class_of, weights=benchmark.weights * mu, minlength=part.n_classes)
        / wb
    )
    rb = float(benchmark.weights @ mu)
    return wb, rb_class, rb


def _allocation_rows(
    spec: StrategySpec, benchmark: WeightVector, wb, rb_class, rb
) -> list[WeightConstraint]:
    part = benchmark.partition
    lo, hi = spec.allocation_bounds
    excess = rb_class - rb
    rows: list[WeightConstraint] = []
    if spec.strategy in _ALLOCATION_TOTAL:
        # AA = sum_i (w_i - b_i) (Rb_i - Rb); the benchmark term is zero in
        # exact arithmetic but is kept so the row matches the definition.
        const = float(wb @ excess)
        rows.append(
            WeightConstraint(excess[part.class_of], lo + const, hi + const, name="AA.TOTAL")
        )
    elif spec.strategy in _ALLOCATION_CLASS:
        for c in range(part.n_classes):
            coeffs = np.zeros(part.n_assets)
            coeffs[part.members(c)] = excess[c]
            const = float(wb[c] * excess[c])
            rows.append(
                WeightConstraint(coeffs, lo + const, hi + const, name=f"AA.C{part.labels[c]}")
            )
    return rows


def _combined_rows(
    spec: StrategySpec, benchmark: WeightVector, mu, rb_class, rb
) -> list[WeightConstraint]:
    part = benchmark.partition
    lo, hi = spec.combined_bounds
    rows: list[WeightConstraint] = []
    # combined selection of class i = sum_j w_ij mu_ij - w_i Rb_i, linear in w.
    coeffs = mu - rb_class[part.class_of]
    if spec.strategy in _COMBINED_TOTAL:
        rows.append(WeightConstraint(coeffs, lo, hi, name="CSE.TOTAL"))
    elif spec.strategy in _COMBINED_CLASS:
        for c in range(part.n_classes):
            masked = np.zeros(part.n_assets)
            members = part.members(c)
            masked[members] = coeffs[members]
            rows.append(WeightConstraint(masked, lo, hi, name=f"CSE.C{part.labels[c]}"))
    return rows


def _selection_rows(
    spec: StrategySpec,
    benchmark: WeightVector,
    mu,
    wb,
    rb_class,
    rb,
    fixed_class_weights: np.ndarray,
) -> list[WeightConstraint]:
    part = benchmark.partition
    lo, hi = spec.selection_bounds
    totals = np.asarray(fixed_class_weights, dtype=np.float64)
    if totals.shape != (part.n_classes,):
        raise ValueError("fixed class weights must give one total per class")
    occupied = totals > 0.0
    rows: list[WeightConstraint] = []
    if spec.strategy in _SELECTION_TOTAL:
        # SE = sum_i b_i (sum_j w_ij mu_ij / t_i - Rb_i); empty classes
        # contribute the constant -b_i Rb_i, so the constant term is the
        # full benchmark return either way.
        coeffs = np.where(
            occupied[part.class_of],
            wb[part.class_of] * mu / np.where(occupied, totals, 1.0)[part.class_of],
            0.0,
        )
        rows.append(WeightConstraint(coeffs, lo + rb, hi + rb, name="SE.TOTAL"))
    elif spec.strategy in _SELECTION_CLASS:
        # Rows only for classes that hold weight; empty classes have no
        # selection constraint by convention.
        for c in range(part.n_classes):
            if not occupied[c]:
                continue
            coeffs = np.zeros(part.n_assets)
            members = part.members(c)
            coeffs[members] = wb[c] * mu[members] / totals[c]
            const = float(wb[c] * rb_class[c])
            rows.append(
                WeightConstraint(coeffs, lo + const, hi + const, name=f"SE.C{part.labels[c]}")
            )
    return rows


def _pin_rows(partition, totals: np.ndarray) -> list[WeightConstraint]:
    rows = []
    for c in range(partition.n_classes):
        coeffs = np.zeros(partition.n_assets)
        coeffs[partition.members(c)] = 1.0
        t = float(totals[c])
        rows.append(WeightConstraint(coeffs, t, t, name=f"PIN.C{partition.labels[c]}"))
    return rows


def build_constraints(
    spec: StrategySpec,
    benchmark: WeightVector,
    mu: np.ndarray,
    fixed_class_weights: np.ndarray | None = None,
) -> list[WeightConstraint]:
    """Attribution constraint rows for one strategy.

    Simplex rows (non-negativity, unit budget) live in the LP builder, so P0
    yields no rows here.  Selection rows require ``fixed_class_weights``
    because they are linear only once class totals are pinned.
    """
    mu = _check_mu(mu, benchmark.partition.n_assets)
    wb, rb_class, rb = _benchmark_stats(benchmark, mu)
    rows = _allocation_rows(spec, benchmark, wb, rb_class, rb)
    rows += _combined_rows(spec, benchmark, mu, rb_class, rb)
    if spec.strategy in _SELECTION_TOTAL or spec.strategy in _SELECTION_CLASS:
        if fixed_class_weights is None:
            raise ValueError(
                "selection rows need fixed class totals; "
                "solve the allocation stage first"
            )
        rows += _selection_rows(spec, benchmark, mu, wb, rb_class, rb, fixed_class_weights)
    return rows


def _fallback(
    previous_weights: WeightVector,
    objectives: tuple[float, ...],
    stages: int,
    outcomes: tuple[SolveOutcome, ...],
) -> DailySolve:
    held = WeightVector(
        weights=previous_weights.weights.copy(), partition=previous_weights.partition
    )
    return DailySolve(
        status="no_solution_fallback",
        weights=held,
        objectives=objectives,
        stages=stages,
        outcomes=outcomes,
    )


def solve_day(
    spec: StrategySpec,
    scenarios: np.ndarray,
    benchmark: WeightVector,
    mu: np.ndarray,
    previous_weights: WeightVector,
    tol: float = 1e-7,
) -> DailySolve:
    """Solve one day's optimization, falling back to yesterday's weights.

    Single-stage strategies solve one LP.  Two-step strategies solve the
    stage-1 allocation problem, freeze its class totals (totals below
    ``EMPTY_CLASS_TOL`` count as empty), and re-minimize tail loss jointly
    over within-class weights and the tail threshold with selection rows
    attached.  If any stage is infeasible the previous weights are returned
    with status ``no_solution_fallback``.
    """
    part = benchmark.partition
    scenarios = np.asarray(scenarios, dtype=np.float64)
    if scenarios.ndim != 2 or scenarios.shape[1] != part.n_assets:
        raise ValueError("scenario matrix must be (S, n_assets)")
    mu = _check_mu(mu, part.n_assets)
    if previous_weights.partition.n_assets != part.n_assets:
        raise ValueError("previous weights do not match the partition")

    stage1_id = TWO_STEP_STAGE_ONE.get(spec.strategy)
    stage1_spec = spec if stage1_id is None else replace(spec, strategy=stage1_id)

    rows = build_constraints(stage1_spec, benchmark, mu)
    out1 = solve_lp(
        build_etl_lp(scenarios, spec.alpha, rows),
        tol=tol,
        seed_weights=previous_weights.weights,
    )
    if not out1.is_optimal:
        return _fallback(previous_weights, (), 1, (out1,))
    if stage1_id is None:
        weights = WeightVector.from_solver(out1.weights, part)
        return DailySolve("optimal", weights, (out1.objective,), 1, (out1,))

    stage1_weights = WeightVector.from_solver(out1.weights, part)
    totals = stage1_weights.class_totals()
    totals[totals < EMPTY_CLASS_TOL] = 0.0
    totals /= totals.sum()

    wb, rb_class, rb = _benchmark_stats(benchmark, mu)
    rows2 = _selection_rows(spec, benchmark, mu, wb, rb_class, rb, totals)
    rows2 += _pin_rows(part, totals)
    out2 = solve_lp(
        build_etl_lp(scenarios, spec.alpha, rows2),
        tol=tol,
        seed_weights=stage1_weights.weights,
    )
    if not out2.is_optimal:
        return _fallback(previous_weights, (out1.objective,), 2, (out1, out2))

    # Classes pinned to zero must hold exactly zero weight downstream.
    cleaned = out2.weights.copy()
    cleaned[(totals == 0.0)[part.class_of]] = 0.0
    weights = WeightVector.from_solver(cleaned, part)
    return DailySolve(
        "optimal", weights, (out1.objective, out2.objective), 2, (out1, out2)
    )


# ---------------------------------------------------------------------------
# auditing
# ---------------------------------------------------------------------------


@dataclass
class AuditEntry:
    name: str
    value: float
    lower: float
    upper: float

    @property
    def violation(self) -> float:
        return max(self.lower - self.value, self.value - self.upper, 0.0)


@dataclass
class ConstraintAudit:
    """Recomputed constraint values for one day's solution."""

    entries: list[AuditEntry]
    audited: bool  # False when the day fell back; entries are informational

    @property
    def max_violation(self) -> float:
        return max((e.violation for e in self.entries), default=0.0)

    def passed(self, tol: float = 1e-6) -> bool:
        return self.max_violation <= tol


def verify_constraints(
    spec: StrategySpec,
    solve: DailySolve,
    benchmark: WeightVector,
    mu: np.ndarray,
) -> ConstraintAudit:
    """Recompute every constrained quantity from the solved weights.

    The attribution module is the referee here, not the LP rows: effects are
    rebuilt from the weight vector and compared against the strategy bounds.
    Per-class selection constraints apply only to classes holding weight.
    """
    mu = _check_mu(mu, benchmark.partition.n_assets)
    report = attribute(solve.weights, benchmark, mu)
    labels = benchmark.partition.labels
    entries = [
        AuditEntry("budget", float(solve.weights.weights.sum()), 1.0, 1.0),
        AuditEntry("non_negative", float(solve.weights.weights.min()), 0.0, math.inf),
    ]

    sid = spec.strategy
    lo, hi = spec.allocation_bounds
    if sid in _ALLOCATION_TOTAL:
        entries.append(AuditEntry("AA.TOTAL", report.allocation_total, lo, hi))
    elif sid in _ALLOCATION_CLASS:
        entries += [
            AuditEntry(f"AA.C{labels[c]}", float(report.allocation[c]), lo, hi)
            for c in range(len(labels))
        ]

    lo, hi = spec.selection_bounds
    if sid in _SELECTION_TOTAL:
        entries.append(AuditEntry("SE.TOTAL", report.selection_total, lo, hi))
    elif sid in _SELECTION_CLASS:
        entries += [
            AuditEntry(f"SE.C{labels[c]}", float(report.selection[c]), lo, hi)
            for c in range(len(labels))
            if report.weight_portfolio[c] > 0.0
        ]

    lo, hi = spec.combined_bounds
    if sid in _COMBINED_TOTAL:
        entries.append(AuditEntry("CSE.TOTAL", report.combined_selection_total, lo, hi))
    elif sid in _COMBINED_CLASS:
        entries += [
            AuditEntry(f"CSE.C{labels[c]}", float(report.combined_selection[c]), lo, hi)
            for c in range(len(labels))
        ]

    return ConstraintAudit(entries=entries, audited=solve.status == "optimal")
