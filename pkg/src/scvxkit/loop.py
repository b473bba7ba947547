"""Trust-region outer iteration on a composite exact-penalty objective.

Each iteration linearizes the smooth inner map, minimizes the convex model
over an inf-norm ball, and accepts or rejects the candidate by comparing
actual to predicted decrease.  After a rejection the linearization is kept
and only the radius shrinks, so rejected iterations never re-evaluate the
Jacobian (standard practice; a config knob restores re-linearization for
comparison runs).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .composite import (
    CompositeObjective,
    as_decision_vector,
    evaluate_objective,
    linearize,
)
from .subproblem import SubproblemError, TrustRegionSubproblem, solve_subproblem

# Acceptance at the low ratio threshold additionally requires a strictly
# positive actual decrease at this relative scale, which keeps the accepted
# objective sequence strictly decreasing even when rho0 = 0.
MIN_ACTUAL_DECREASE = 1e-12

# Small accepted steps must repeat this many times before the loop spends an
# extra subproblem solve confirming stationarity at the probe radius.
SMALL_STEP_STREAK = 3

STATUS_CONVERGED = "converged-stationary"
STATUS_ITERATIONS = "iteration-limit"
STATUS_LEVEL_SET = "level-set-violation"
STATUS_SUBPROBLEM = "subproblem-failure"


@dataclass(frozen=True)
class TrustRegionParams:
    """Ratio thresholds, radius update factors, and stopping controls."""

    rho0: float = 0.0
    rho1: float = 0.25
    rho2: float = 0.7
    shrink_factor: float = 2.0
    grow_factor: float = 3.2
    r_init: float = 1.0
    r_min: float = 1e-10
    r_max: float = 1e3
    stop_predicted_decrease: float = 1e-8
    stop_step_norm: float = 1e-9
    max_iterations: int = 200
    norm_budget: float = 1e4
    relinearize_after_reject: bool = False

    def __post_init__(self):
        if not (0.0 <= self.rho0 < self.rho1 < self.rho2 < 1.0):
            raise ValueError("need 0 <= rho0 < rho1 < rho2 < 1")
        if self.shrink_factor <= 1.0 or self.grow_factor <= 1.0:
            raise ValueError("shrink_factor and grow_factor must exceed 1")
        if not (0.0 < self.r_min <= self.r_init <= self.r_max):
            raise ValueError("need 0 < r_min <= r_init <= r_max")
        if self.stop_predicted_decrease <= 0.0 or self.stop_step_norm <= 0.0:
            raise ValueError("stopping tolerances must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.norm_budget <= 0.0:
            raise ValueError("norm_budget must be positive")


@dataclass
class IterationRecord:
    """Outcome of one outer iteration.

    z and J are the iterate and objective after the accept/reject decision,
    so over accepted records J is strictly decreasing.  rho is None when the
    predicted decrease fell below the stopping tolerance, which is a
    stationarity signal rather than a ratio.
    """

    k: int
    z: np.ndarray
    J: float
    step_norm: float
    model_value: float
    predicted_decrease: float
    actual_decrease: float
    rho: Optional[float]
    radius: float
    accepted: bool


@dataclass
class SolveResult:
    final_z: np.ndarray
    status: str
    trace: List[IterationRecord] = field(default_factory=list)
    J_final: float = np.nan
    message: str = ""

    @property
    def iterations(self) -> int:
        return len(self.trace)

    @property
    def accepted_count(self) -> int:
        return sum(1 for rec in self.trace if rec.accepted)


def trust_region_ratio(J_current: float, J_candidate: float,
                       predicted_decrease: float,
                       min_predicted: Optional[float] = None) -> Optional[float]:
    """Ratio of actual to predicted decrease, or None below the tolerance.

    min_predicted defaults to 1e-8 * (1 + |J_current|); a predicted decrease
    at or below it means the model sees no progress worth measuring, so no
    ratio is defined.
    """
    if min_predicted is None:
        min_predicted = 1e-8 * (1.0 + abs(J_current))
    if predicted_decrease <= min_predicted:
        return None
    return (J_current - J_candidate) / predicted_decrease


def update_radius(rho: float, radius: float, params: TrustRegionParams) -> tuple[bool, float]:
    """Apply the four-way accept/reject and radius update rule."""
    if rho < params.rho0:
        return False, max(radius / params.shrink_factor, params.r_min)
    if rho < params.rho1:
        return True, max(radius / params.shrink_factor, params.r_min)
    if rho < params.rho2:
        return True, radius
    return True, min(radius * params.grow_factor, params.r_max)


def check_stationarity(objective: CompositeObjective, z, probe_radius: float = 1.0) -> float:
    """Predicted decrease of the model over a ball of the given radius.

    Zero exactly when no model descent exists within the ball; strictly
    positive otherwise.
    """
    if probe_radius <= 0:
        raise ValueError("probe_radius must be positive")
    lin = linearize(objective, z)
    sol = solve_subproblem(TrustRegionSubproblem(lin, probe_radius))
    return sol.predicted_decrease


def run_scvx(objective: CompositeObjective, z0,
             params: Optional[TrustRegionParams] = None) -> SolveResult:
    """Run the trust-region iteration from z0 until a stopping condition.

    Statuses: converged-stationary (predicted decrease at radius
    min(r, 1) fell below stop_predicted_decrease * (1 + |J|)),
    iteration-limit, level-set-violation (an iterate left the norm budget or
    the objective rose above its starting value), subproblem-failure (the LP
    solver gave up; the partial trace is attached).
    """
    if params is None:
        params = TrustRegionParams()
    z = as_decision_vector(z0, objective.n_z).copy()
    J = evaluate_objective(objective, z)
    J0 = J
    radius = params.r_init
    lin = None
    trace: List[IterationRecord] = []
    small_streak = 0

    def stop_tol(value: float) -> float:
        return params.stop_predicted_decrease * (1.0 + abs(value))

    def terminal_record(sol, rad) -> IterationRecord:
        return IterationRecord(
            k=len(trace), z=z.copy(), J=J,
            step_norm=float(np.max(np.abs(sol.step), initial=0.0)),
            model_value=sol.model_value,
            predicted_decrease=sol.predicted_decrease,
            actual_decrease=0.0, rho=None, radius=rad, accepted=False,
        )

    while len(trace) < params.max_iterations:
        if lin is None:
            lin = linearize(objective, z)
        try:
            sol = solve_subproblem(TrustRegionSubproblem(lin, radius))
        except SubproblemError as exc:
            return SolveResult(final_z=z, status=STATUS_SUBPROBLEM, trace=trace,
                               J_final=J, message=str(exc))

        if sol.predicted_decrease <= stop_tol(J):
            trace.append(terminal_record(sol, radius))
            return SolveResult(final_z=z, status=STATUS_CONVERGED, trace=trace, J_final=J)

        candidate = z + sol.step
        J_candidate = evaluate_objective(objective, candidate)
        actual = J - J_candidate
        rho = trust_region_ratio(J, J_candidate, sol.predicted_decrease,
                                 min_predicted=stop_tol(J))
        accepted, next_radius = update_radius(rho, radius, params)
        if accepted and not (actual > MIN_ACTUAL_DECREASE * (1.0 + abs(J))):
            # ratio cleared rho0 only through rounding; treat as a rejection
            accepted = False
            next_radius = max(radius / params.shrink_factor, params.r_min)

        if accepted:
            z = candidate
            J = J_candidate
            lin = None
        elif params.relinearize_after_reject:
            lin = None

        step_norm = float(np.max(np.abs(sol.step), initial=0.0))
        trace.append(IterationRecord(
            k=len(trace), z=z.copy(), J=J, step_norm=step_norm,
            model_value=sol.model_value,
            predicted_decrease=sol.predicted_decrease,
            actual_decrease=actual, rho=rho, radius=radius, accepted=accepted,
        ))

        if accepted:
            if float(np.max(np.abs(z))) > params.norm_budget:
                return SolveResult(final_z=z, status=STATUS_LEVEL_SET, trace=trace, J_final=J,
                                   message="iterate norm exceeded the budget; "
                                           "initial level set looks unbounded")
            if J > J0 + 1e-12 * (1.0 + abs(J0)):
                return SolveResult(final_z=z, status=STATUS_LEVEL_SET, trace=trace, J_final=J,
                                   message="objective rose above its starting value")
            small_streak = small_streak + 1 if step_norm <= params.stop_step_norm else 0
        radius = min(max(next_radius, params.r_min), params.r_max)

        if small_streak >= SMALL_STEP_STREAK and len(trace) < params.max_iterations:
            small_streak = 0
            probe_radius = min(radius, 1.0)
            lin = linearize(objective, z)
            try:
                probe = solve_subproblem(TrustRegionSubproblem(lin, probe_radius))
            except SubproblemError as exc:
                return SolveResult(final_z=z, status=STATUS_SUBPROBLEM, trace=trace,
                                   J_final=J, message=str(exc))
            if probe.predicted_decrease <= stop_tol(J):
                trace.append(terminal_record(probe, probe_radius))
                return SolveResult(final_z=z, status=STATUS_CONVERGED, trace=trace, J_final=J)

    return SolveResult(final_z=z, status=STATUS_ITERATIONS, trace=trace, J_final=J)
