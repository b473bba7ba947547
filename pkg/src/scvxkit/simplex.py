"""Dense two-phase simplex for small box-constrained linear programs.

Solves  min c @ x  s.t.  a_ub @ x <= b_ub,  lb <= x <= ub  on a dense
tableau.  Lower bounds must be finite (the caller shifts variables so this
holds by construction); upper bounds may be +inf.  Pivoting starts with
Dantzig's rule and falls back to Bland's rule after a stall, which
guarantees termination on degenerate problems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Absolute-plus-relative tolerances. Feasibility guards right-hand sides,
# optimality guards reduced costs, and the pivot tolerance rejects
# near-singular pivot elements.
FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-9
STALL_LIMIT = 30
ITERATIONS_PER_VARIABLE = 50


class SimplexError(Exception):
    """Base class for simplex failures."""


class InfeasibleError(SimplexError):
    pass


class SimplexIterationLimitError(SimplexError):
    """Iteration cap hit; carries the best feasible point seen, if any."""

    def __init__(self, message: str, x_best=None, objective_best=None, iterations: int = 0):
        self.x_best = x_best
        self.objective_best = objective_best
        self.iterations = iterations
        super().__init__(message)


@dataclass(frozen=True)
class BoxLpSolution:
    x: np.ndarray
    objective: float
    status: str  # "optimal" | "unbounded"
    iterations: int


class _IterationBudget(Exception):
    pass


def _pivot(tableau: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    piv_row = tableau[row] / tableau[row, col]
    col_vals = tableau[:, col].copy()
    tableau -= np.outer(col_vals, piv_row)
    tableau[row] = piv_row
    basis[row] = col


def _run(tableau: np.ndarray, basis: np.ndarray, allowed: np.ndarray, budget: list) -> str:
    """Drive the tableau to optimality over the allowed columns.

    budget is a single-element list holding the remaining pivot count so it
    survives across phases.  Returns "optimal" or "unbounded".
    """
    m = tableau.shape[0] - 1
    bland = False
    stall = 0
    last_obj = -tableau[-1, -1]
    cost_scale = 1.0 + float(np.max(np.abs(tableau[-1, :-1]))) if tableau.shape[1] > 1 else 1.0
    rc_tol = OPT_TOL * cost_scale

    while True:
        reduced = np.where(allowed, tableau[-1, :-1], np.inf)
        if bland:
            eligible = np.flatnonzero(reduced < -rc_tol)
            if eligible.size == 0:
                return "optimal"
            col = int(eligible[0])
        else:
            col = int(np.argmin(reduced))
            if reduced[col] >= -rc_tol:
                return "optimal"

        column = tableau[:m, col]
        col_scale = 1.0 + (float(np.max(np.abs(column))) if column.size else 0.0)
        positive = np.flatnonzero(column > PIVOT_TOL * col_scale)
        if positive.size == 0:
            return "unbounded"

        rhs = tableau[:m, -1]
        ratios = rhs[positive] / column[positive]
        best = float(np.min(ratios))
        tie = positive[ratios <= best + 1e-12 * (1.0 + abs(best))]
        if bland:
            row = int(tie[np.argmin(basis[tie])])
        else:
            # among ratio ties prefer the largest pivot element for stability
            row = int(tie[np.argmax(column[tie])])

        _pivot(tableau, basis, row, col)

        rhs = tableau[:m, -1]
        rhs_scale = 1.0 + (float(np.max(np.abs(rhs))) if rhs.size else 0.0)
        rhs[(rhs < 0.0) & (rhs > -FEAS_TOL * rhs_scale)] = 0.0

        budget[0] -= 1
        if budget[0] <= 0:
            raise _IterationBudget()

        obj = -tableau[-1, -1]
        if obj < last_obj - 1e-12 * (1.0 + abs(last_obj)):
            stall = 0
        else:
            stall += 1
            if stall >= STALL_LIMIT:
                bland = True
        last_obj = obj


def _basic_solution(tableau: np.ndarray, basis: np.ndarray, n_cols: int) -> np.ndarray:
    full = np.zeros(n_cols)
    m = tableau.shape[0] - 1
    full[basis] = tableau[:m, -1]
    return full


def solve_box_lp(c, a_ub, b_ub, lb, ub, max_iter: int | None = None) -> BoxLpSolution:
    """Solve min c@x s.t. a_ub@x <= b_ub, lb <= x <= ub.

    All lower bounds must be finite.  Raises InfeasibleError when the
    constraints are inconsistent and SimplexIterationLimitError when the
    pivot budget (50 per tableau column by default) runs out.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    if not np.all(np.isfinite(lb)):
        raise ValueError("solve_box_lp requires finite lower bounds")
    if np.any(ub < lb):
        raise InfeasibleError("empty box: some ub < lb")

    a_ub = np.asarray(a_ub, dtype=float).reshape(-1, n) if np.size(a_ub) else np.zeros((0, n))
    b_ub = np.asarray(b_ub, dtype=float).reshape(-1) if np.size(b_ub) else np.zeros(0)

    # Shift to y = x - lb >= 0 and turn finite upper bounds into rows.
    rows = [a_ub]
    rhs = [b_ub - a_ub @ lb]
    finite_ub = np.flatnonzero(np.isfinite(ub))
    if finite_ub.size:
        ub_rows = np.zeros((finite_ub.size, n))
        ub_rows[np.arange(finite_ub.size), finite_ub] = 1.0
        rows.append(ub_rows)
        rhs.append(ub[finite_ub] - lb[finite_ub])
    a_all = np.vstack(rows)
    b_all = np.concatenate(rhs)
    m = a_all.shape[0]

    flip = b_all < 0.0
    a_all = np.where(flip[:, None], -a_all, a_all)
    b_all = np.where(flip, -b_all, b_all)
    slack_sign = np.where(flip, -1.0, 1.0)
    art_rows = np.flatnonzero(flip)
    n_art = art_rows.size
    n_cols = n + m + n_art

    tableau = np.zeros((m + 1, n_cols + 1))
    tableau[:m, :n] = a_all
    tableau[np.arange(m), n + np.arange(m)] = slack_sign
    if n_art:
        tableau[art_rows, n + m + np.arange(n_art)] = 1.0
    tableau[:m, -1] = b_all

    basis = np.empty(m, dtype=int)
    basis[~flip] = n + np.flatnonzero(~flip)
    basis[flip] = n + m + np.arange(n_art)

    if max_iter is None:
        max_iter = ITERATIONS_PER_VARIABLE * n_cols
    budget = [max_iter]
    iterations_used = lambda: max_iter - budget[0]

    allowed = np.ones(n_cols, dtype=bool)

    # Phase 1: minimize the sum of artificials.
    if n_art:
        tableau[-1, :] = 0.0
        tableau[-1, n + m:n_cols] = 1.0
        for r in art_rows:
            tableau[-1] -= tableau[r]
        try:
            status = _run(tableau, basis, allowed, budget)
        except _IterationBudget:
            raise SimplexIterationLimitError(
                "pivot budget exhausted before a feasible point was found",
                iterations=iterations_used(),
            )
        if status == "unbounded":  # cannot happen: phase-1 objective is bounded below
            raise SimplexError("phase 1 reported unbounded")
        feas_scale = 1.0 + float(np.max(np.abs(b_all)))
        if -tableau[-1, -1] > FEAS_TOL * feas_scale:
            raise InfeasibleError("constraints are inconsistent")

        # Drive leftover artificials out of the basis; drop redundant rows.
        drop = []
        for r in range(m):
            if basis[r] < n + m:
                continue
            row_entries = np.abs(tableau[r, :n + m])
            j = int(np.argmax(row_entries))
            if row_entries[j] > PIVOT_TOL:
                _pivot(tableau, basis, r, j)
            else:
                drop.append(r)
        if drop:
            keep = np.setdiff1d(np.arange(m), np.array(drop, dtype=int))
            tableau = np.vstack([tableau[keep], tableau[-1:]])
            basis = basis[keep]
            m = basis.size
        allowed[n_cols - n_art:] = False  # artificial columns stay out of phase 2

    # Phase 2: original objective.
    full_c = np.zeros(n_cols + 1)
    full_c[:n] = c
    tableau[-1, :] = full_c
    for r in range(m):
        coef = tableau[-1, basis[r]]
        if coef != 0.0:
            tableau[-1] -= coef * tableau[r]

    try:
        status = _run(tableau, basis, allowed, budget)
    except _IterationBudget:
        y = _basic_solution(tableau, basis, n_cols)
        x_best = y[:n] + lb
        raise SimplexIterationLimitError(
            "pivot budget exhausted in phase 2",
            x_best=x_best,
            objective_best=float(c @ x_best),
            iterations=iterations_used(),
        )

    y = _basic_solution(tableau, basis, n_cols)
    x = y[:n] + lb
    if status == "unbounded":
        return BoxLpSolution(x=x, objective=-np.inf, status="unbounded", iterations=iterations_used())
    return BoxLpSolution(x=x, objective=float(c @ x), status="optimal", iterations=iterations_used())
