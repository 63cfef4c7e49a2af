"""Empirical tail-loss measures and their linear-programming form.

Scenario returns enter as an (S, N) array with equal scenario probability.
The optimization follows the standard scenario reformulation: minimizing

    zeta + 1 / ((1 - alpha) * S) * sum_s u_s
    s.t.  u_s >= -(w . r_s) - zeta,  u_s >= 0

over (w, zeta, u) yields the minimal expected tail loss at level alpha.  The
LP value is the canonical optimization objective; ``empirical_etl`` is the
ceiling-rank sample statistic used for reporting.  The two coincide when
(1 - alpha) * S lands on an integer sample rank (distinct samples) and the
LP value is otherwise the larger of the two, because the sample statistic
averages a full extra tail observation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

__all__ = [
    "empirical_var",
    "empirical_etl",
    "WeightConstraint",
    "LinearProgram",
    "SolveOutcome",
    "build_etl_lp",
    "solve_lp",
    "lp_to_mps",
]

# Rank arithmetic: (1 - alpha) * S may sit a few ulps above an integer, which
# would push the ceiling one rank too far.
RANK_EPS = 1e-9
# A left-out scenario row counts as violated above this slack.
ACTIVATION_TOL = 1e-11
# Scenario counts at or below this are solved directly, no activation loop.
ACTIVATION_MIN_SCENARIOS = 96


def _check_samples(samples: np.ndarray) -> np.ndarray:
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 1 or samples.size == 0:
        raise ValueError("samples must be a non-empty 1-d array")
    if not np.all(np.isfinite(samples)):
        raise ValueError("samples must be finite")
    return samples


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly between 0 and 1")
    return alpha


def tail_rank(n_samples: int, alpha: float) -> int:
    """1-based order-statistic rank defining the alpha tail boundary."""
    raw = (1.0 - alpha) * n_samples
    k = math.ceil(raw - RANK_EPS)
    return min(max(k, 1), n_samples)


def empirical_var(samples: np.ndarray, alpha: float) -> float:
    """Empirical value at risk: the negated ceil((1-alpha)S)-th smallest sample."""
    samples = _check_samples(samples)
    alpha = _check_alpha(alpha)
    k = tail_rank(samples.size, alpha)
    return float(-np.partition(samples, k - 1)[k - 1])


def empirical_etl(samples: np.ndarray, alpha: float) -> float:
    """Empirical expected tail loss: negated mean of the k smallest samples.

    k is the ceiling rank of (1-alpha)S, so a degenerate (1-alpha)S < 1
    level reduces to the single worst observation.  Samples tied at the
    boundary rank all carry the boundary value; the mean cannot depend on
    which tied copies the selection keeps.
    """
    samples = _check_samples(samples)
    alpha = _check_alpha(alpha)
    k = tail_rank(samples.size, alpha)
    tail = np.partition(samples, k - 1)[:k]
    return float(-tail.mean())


# ---------------------------------------------------------------------------
# linear program assembly
# ---------------------------------------------------------------------------


@dataclass
class WeightConstraint:
    """One linear row over the weight variables: lower <= coeffs . w <= upper."""

    coeffs: np.ndarray
    lower: float = -np.inf
    upper: float = np.inf
    name: str = ""

    def __post_init__(self) -> None:
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if self.coeffs.ndim != 1:
            raise ValueError("constraint coefficients must be 1-d")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("constraint coefficients must be finite")
        if math.isnan(self.lower) or math.isnan(self.upper):
            raise ValueError("constraint bounds cannot be NaN")
        if self.lower > self.upper:
            raise ValueError("constraint lower bound exceeds upper bound")
        if self.lower == self.upper and math.isinf(self.lower):
            raise ValueError("constraint bounds cannot pin a row at infinity")

    @property
    def is_equality(self) -> bool:
        return self.lower == self.upper


@dataclass
class LinearProgram:
    """Assembled scenario LP in scipy form plus its structural description.

    Variables are ordered [w_0..w_{N-1}, zeta, u_0..u_{S-1}].  ``scenarios``
    and ``extra`` keep the originating structure so the solver can reduce the
    scenario set without changing the optimum.
    """

    c: np.ndarray
    A_ub: sparse.csr_matrix
    b_ub: np.ndarray
    A_eq: sparse.csr_matrix
    b_eq: np.ndarray
    bounds: list[tuple[float | None, float | None]]
    var_names: list[str]
    row_names_ub: list[str]
    row_names_eq: list[str]
    n_weights: int
    n_scenarios: int
    alpha: float
    scenarios: np.ndarray | None = None
    extra: tuple[WeightConstraint, ...] = ()

    @property
    def n_variables(self) -> int:
        return self.c.size


@dataclass
class SolveOutcome:
    """Solver verdict for one LP."""

    status: str  # optimal | infeasible | unbounded | numerical_failure
    weights: np.ndarray | None = None
    objective: float | None = None
    zeta: float | None = None
    n_subproblems: int = 1
    message: str = ""

    @property
    def is_optimal(self) -> bool:
        return self.status == "optimal"


def _extra_rows_dense(
    extra: tuple[WeightConstraint, ...], n_weights: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Weight-only rows split into stacked inequality and equality blocks."""
    ub_rows: list[np.ndarray] = []
    ub_rhs: list[float] = []
    eq_rows: list[np.ndarray] = []
    eq_rhs: list[float] = []
    for row in extra:
        if row.coeffs.size != n_weights:
            raise ValueError("constraint length must match the weight count")
        if row.is_equality:
            eq_rows.append(row.coeffs)
            eq_rhs.append(row.lower)
            continue
        if np.isfinite(row.upper):
            ub_rows.append(row.coeffs)
            ub_rhs.append(row.upper)
        if np.isfinite(row.lower):
            ub_rows.append(-row.coeffs)
            ub_rhs.append(-row.lower)
    shape = (len(ub_rows), n_weights)
    ub_block = np.asarray(ub_rows) if ub_rows else np.empty(shape)
    shape = (len(eq_rows), n_weights)
    eq_block = np.asarray(eq_rows) if eq_rows else np.empty(shape)
    return ub_block, np.asarray(ub_rhs), eq_block, np.asarray(eq_rhs)


def _scenario_parts(
    scenarios: np.ndarray, tail_coeff: float, extra: tuple[WeightConstraint, ...]
) -> tuple:
    """scipy linprog inputs for a scenario block plus weight-only rows."""
    n_scen, n_w = scenarios.shape
    c = np.concatenate([np.zeros(n_w), [1.0], np.full(n_scen, tail_coeff)])

    tail = sparse.hstack(
        [
            sparse.csr_matrix(-scenarios),
            sparse.csr_matrix(-np.ones((n_scen, 1))),
            -sparse.identity(n_scen, format="csr"),
        ],
        format="csr",
    )
    ub_blocks = [tail]
    b_ub = [np.zeros(n_scen)]
    ub_names = [f"TAIL{s}" for s in range(n_scen)]

    pad = sparse.csr_matrix((1, 1 + n_scen))
    eq_blocks = [sparse.hstack([sparse.csr_matrix(np.ones((1, n_w))), pad], format="csr")]
    b_eq = [1.0]
    eq_names = ["BUDGET"]

    for m, row in enumerate(extra):
        if row.coeffs.size != n_w:
            raise ValueError("constraint length must match the weight count")
        base = sparse.hstack([sparse.csr_matrix(row.coeffs[None, :]), pad], format="csr")
        label = row.name or f"EXTRA{m}"
        if row.is_equality:
            eq_blocks.append(base)
            b_eq.append(row.lower)
            eq_names.append(label)
            continue
        if np.isfinite(row.upper):
            ub_blocks.append(base)
            b_ub.append(np.array([row.upper]))
            ub_names.append(f"{label}.UB")
        if np.isfinite(row.lower):
            ub_blocks.append(-base)
            b_ub.append(np.array([-row.lower]))
            ub_names.append(f"{label}.LB")

    A_ub = sparse.vstack(ub_blocks, format="csr")
    A_eq = sparse.vstack(eq_blocks, format="csr")
    bounds = [(0.0, None)] * n_w + [(None, None)] + [(0.0, None)] * n_scen
    names = [f"W{j}" for j in range(n_w)] + ["ZETA"] + [f"U{s}" for s in range(n_scen)]
    return (
        c,
        A_ub,
        np.concatenate(b_ub),
        A_eq,
        np.asarray(b_eq, dtype=np.float64),
        bounds,
        names,
        ub_names,
        eq_names,
    )


def build_etl_lp(
    scenarios: np.ndarray,
    alpha: float,
    extra: tuple[WeightConstraint, ...] | list[WeightConstraint] = (),
) -> LinearProgram:
    """Assemble the scenario tail-loss LP with optional weight-only rows.

    Rows in ``extra`` act on the weight variables alone; two-sided rows
    become a pair of inequalities and lower == upper becomes an equality.
    """
    scenarios = np.asarray(scenarios, dtype=np.float64)
    if scenarios.ndim != 2 or scenarios.size == 0:
        raise ValueError("scenarios must be a non-empty (S, N) array")
    if not np.all(np.isfinite(scenarios)):
        raise ValueError("scenarios must be finite")
    alpha = _check_alpha(alpha)
    extra = tuple(extra)
    n_scen = scenarios.shape[0]
    tail_coeff = 1.0 / ((1.0 - alpha) * n_scen)
    parts = _scenario_parts(scenarios, tail_coeff, extra)
    return LinearProgram(
        c=parts[0],
        A_ub=parts[1],
        b_ub=parts[2],
        A_eq=parts[3],
        b_eq=parts[4],
        bounds=parts[5],
        var_names=parts[6],
        row_names_ub=parts[7],
        row_names_eq=parts[8],
        n_weights=scenarios.shape[1],
        n_scenarios=n_scen,
        alpha=alpha,
        scenarios=scenarios,
        extra=extra,
    )


_STATUS = {
    0: "optimal",
    1: "numerical_failure",
    2: "infeasible",
    3: "unbounded",
    4: "numerical_failure",
}


def _run_linprog(c, A_ub, b_ub, A_eq, b_eq, bounds, tol: float):
    return linprog(
        c,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=bounds,
        method="highs-ds",
        options={
            "presolve": False,
            "primal_feasibility_tolerance": tol,
            "dual_feasibility_tolerance": tol,
        },
    )


def _outcome(res, n_weights: int, n_subproblems: int) -> SolveOutcome:
    status = _STATUS.get(res.status, "numerical_failure")
    if status != "optimal":
        return SolveOutcome(
            status=status, n_subproblems=n_subproblems, message=str(res.message)
        )
    return SolveOutcome(
        status="optimal",
        weights=res.x[:n_weights].copy(),
        objective=float(res.fun),
        zeta=float(res.x[n_weights]),
        n_subproblems=n_subproblems,
        message=str(res.message),
    )


def _reduced_inputs(
    scen_active: np.ndarray,
    tail_coeff: float,
    extra_dense: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray],
) -> tuple:
    """Dense linprog inputs for an active-subset problem (small by design)."""
    ub_block, ub_rhs, eq_block, eq_rhs = extra_dense
    m, n_w = scen_active.shape
    n_var = n_w + 1 + m
    c = np.concatenate([np.zeros(n_w), [1.0], np.full(m, tail_coeff)])
    A_ub = np.zeros((m + ub_block.shape[0], n_var))
    A_ub[:m, :n_w] = -scen_active
    A_ub[:m, n_w] = -1.0
    A_ub[np.arange(m), n_w + 1 + np.arange(m)] = -1.0
    A_ub[m:, :n_w] = ub_block
    b_ub = np.concatenate([np.zeros(m), ub_rhs])
    A_eq = np.zeros((1 + eq_block.shape[0], n_var))
    A_eq[0, :n_w] = 1.0
    A_eq[1:, :n_w] = eq_block
    b_eq = np.concatenate([[1.0], eq_rhs])
    bounds = [(0.0, None)] * n_w + [(None, None)] + [(0.0, None)] * m
    return c, A_ub, b_ub, A_eq, b_eq, bounds


def solve_lp(
    lp: LinearProgram, tol: float = 1e-7, seed_weights: np.ndarray | None = None
) -> SolveOutcome:
    """Solve an assembled LP to the requested feasibility tolerance.

    Large scenario blocks are solved by activation: only scenarios that can
    enter the tail get explicit rows, and the reduced optimum is certified
    against every left-out row before it is accepted.  A certified solution
    is an exact optimum of the full LP (left-out slack variables are zero),
    so this changes nothing but the running time.  ``seed_weights`` orders
    the initial scenario subset by that portfolio's losses; a nearby optimum
    (yesterday's solution, an earlier stage) cuts the number of rounds.
    """
    scen = lp.scenarios
    n_scen = lp.n_scenarios
    seed_size = math.ceil(2.0 * (1.0 - lp.alpha) * n_scen) + 8
    if scen is None or n_scen <= max(ACTIVATION_MIN_SCENARIOS, 2 * seed_size):
        res = _run_linprog(lp.c, lp.A_ub, lp.b_ub, lp.A_eq, lp.b_eq, lp.bounds, tol)
        return _outcome(res, lp.n_weights, 1)

    tail_coeff = 1.0 / ((1.0 - lp.alpha) * n_scen)
    if seed_weights is None:
        seed_weights = np.full(lp.n_weights, 1.0 / lp.n_weights)
    else:
        seed_weights = np.asarray(seed_weights, dtype=np.float64)
        if seed_weights.shape != (lp.n_weights,):
            raise ValueError("seed weights must have one entry per weight variable")
    extra_dense = _extra_rows_dense(lp.extra, lp.n_weights)
    order = np.argsort(scen @ seed_weights, kind="stable")
    active = np.sort(order[:seed_size])
    n_solved = 0
    for _ in range(60):
        inputs = _reduced_inputs(scen[active], tail_coeff, extra_dense)
        res = _run_linprog(*inputs, tol)
        n_solved += 1
        if res.status != 0:
            # Weight-only rows are all present, so subset infeasibility is
            # full-problem infeasibility; anything else falls through to a
            # full solve below.
            if res.status == 2:
                return _outcome(res, lp.n_weights, n_solved)
            break
        w = res.x[: lp.n_weights]
        zeta = res.x[lp.n_weights]
        slack = -scen @ w - zeta
        slack[active] = -np.inf
        violated = np.where(slack > ACTIVATION_TOL)[0]
        if violated.size == 0:
            out = _outcome(res, lp.n_weights, n_solved)
            return out
        active = np.unique(np.concatenate([active, violated]))
    res = _run_linprog(lp.c, lp.A_ub, lp.b_ub, lp.A_eq, lp.b_eq, lp.bounds, tol)
    return _outcome(res, lp.n_weights, n_solved + 1)


# ---------------------------------------------------------------------------
# interchange dump
# ---------------------------------------------------------------------------


def lp_to_mps(lp: LinearProgram, name: str = "ETL_LP") -> str:
    """Render the LP as free-format MPS text.

    Default variable bounds in MPS are [0, inf), which matches the weight
    and slack variables; only the free tail threshold needs a BOUNDS entry.
    """
    lines = [f"NAME          {name}", "ROWS", " N  COST"]
    for row in lp.row_names_ub:
        lines.append(f" L  {row}")
    for row in lp.row_names_eq:
        lines.append(f" E  {row}")

    lines.append("COLUMNS")
    ub_csc = lp.A_ub.tocsc()
    eq_csc = lp.A_eq.tocsc()
    for j, var in enumerate(lp.var_names):
        entries: list[tuple[str, float]] = []
        if lp.c[j] != 0.0:
            entries.append(("COST", float(lp.c[j])))
        start, end = ub_csc.indptr[j], ub_csc.indptr[j + 1]
        for pos in range(start, end):
            entries.append((lp.row_names_ub[ub_csc.indices[pos]], float(ub_csc.data[pos])))
        start, end = eq_csc.indptr[j], eq_csc.indptr[j + 1]
        for pos in range(start, end):
            entries.append((lp.row_names_eq[eq_csc.indices[pos]], float(eq_csc.data[pos])))
        for row, value in entries:
            lines.append(f"    {var}  {row}  {value!r}")

    lines.append("RHS")
    for row, rhs in zip(lp.row_names_ub, lp.b_ub):
        if rhs != 0.0:
            lines.append(f"    RHS  {row}  {float(rhs)!r}")
    for row, rhs in zip(lp.row_names_eq, lp.b_eq):
        if rhs != 0.0:
            lines.append(f"    RHS  {row}  {float(rhs)!r}")

    lines.append("BOUNDS")
    for var, (lo, hi) in zip(lp.var_names, lp.bounds):
        if lo is None and hi is None:
            lines.append(f" FR BND  {var}")
        elif lo == 0.0 and hi is None:
            continue
        else:
            if lo is not None:
                lines.append(f" LO BND  {var}  {float(lo)!r}")
            if hi is not None:
                lines.append(f" UP BND  {var}  {float(hi)!r}")
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"
