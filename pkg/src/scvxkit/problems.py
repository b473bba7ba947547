"""Discrete-time optimal control problems and their penalty transcription.

A problem is N state nodes and N-1 control nodes under a one-step dynamics
map.  Transcription stacks the decision vector as all states then all
controls and emits one smooth component per stage cost, dynamics defect,
boundary-condition residual, path inequality, and control-bound residual.
Dynamics and boundary conditions become 1-norm penalty terms, inequalities
become hinge penalty terms, so a single weight converts the whole problem
into an unconstrained composite objective.

Control bounds are deliberately transcribed as penalized inequality
components rather than hard bounds on the decision vector: that keeps every
constraint visible to the active-set diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np

from .composite import (
    CompositeObjective,
    ConvexOuter,
    NonFiniteError,
    SmoothMap,
    as_decision_vector,
)

BUILTIN_NAMES = (
    "convex-lqr-box",
    "double-integrator-obstacle",
    "dubins-car",
    "toy-sharp-1d",
    "toy-sharp-2d",
    "noncompact-levelset",
)


@dataclass(frozen=True)
class PathConstraint:
    """Scalar smooth inequality fun(x, u) <= 0 enforced at control nodes."""

    fun: Callable[[np.ndarray, np.ndarray], float]
    grad: Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]
    name: str = "path"


@dataclass(frozen=True)
class OptimalControlProblem:
    """Problem data: dynamics, boundary conditions, costs, and bounds.

    dynamics maps (x_k, u_k) to x_{k+1}; dynamics_jac returns the pair of
    Jacobians with respect to state and control.  stage_cost applies at
    nodes 0..N-2 together with the control; terminal_cost, when present,
    applies to the last state.  control_bounds gives one (lo, hi) interval
    per control component; either side may be infinite.
    """

    n_x: int
    n_u: int
    n_nodes: int
    dynamics: Callable[[np.ndarray, np.ndarray], np.ndarray]
    dynamics_jac: Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]
    initial_state: np.ndarray
    stage_cost: Callable[[np.ndarray, np.ndarray], float]
    stage_cost_grad: Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]
    final_state: Optional[np.ndarray] = None
    terminal_cost: Optional[Callable[[np.ndarray], float]] = None
    terminal_cost_grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    path_inequalities: Tuple[PathConstraint, ...] = ()
    control_bounds: Optional[Tuple[Tuple[float, float], ...]] = None
    name: str = "ocp"

    def __post_init__(self):
        if self.n_x < 1 or self.n_u < 1:
            raise ValueError("n_x and n_u must be positive")
        if self.n_nodes < 2:
            raise ValueError("need at least two nodes")
        if np.asarray(self.initial_state, dtype=float).shape != (self.n_x,):
            raise ValueError("initial_state must have length n_x")
        if self.final_state is not None:
            if np.asarray(self.final_state, dtype=float).shape != (self.n_x,):
                raise ValueError("final_state must have length n_x")
        if (self.terminal_cost is None) != (self.terminal_cost_grad is None):
            raise ValueError("terminal_cost and terminal_cost_grad go together")
        if self.control_bounds is not None:
            if len(self.control_bounds) != self.n_u:
                raise ValueError("control_bounds needs one interval per control")
            for lo, hi in self.control_bounds:
                if not lo < hi:
                    raise ValueError("control bounds must be nonempty intervals")

    @property
    def n_z(self) -> int:
        return self.n_x * self.n_nodes + self.n_u * (self.n_nodes - 1)

    def split(self, z) -> Tuple[np.ndarray, np.ndarray]:
        """Decision vector -> states (N, n_x) and controls (N-1, n_u)."""
        z = as_decision_vector(z, self.n_z)
        n_state = self.n_x * self.n_nodes
        states = z[:n_state].reshape(self.n_nodes, self.n_x)
        controls = z[n_state:].reshape(self.n_nodes - 1, self.n_u)
        return states, controls

    def join(self, states: np.ndarray, controls: np.ndarray) -> np.ndarray:
        return np.concatenate([np.asarray(states, dtype=float).ravel(),
                               np.asarray(controls, dtype=float).ravel()])


@dataclass(frozen=True)
class DiscretizedProblem:
    """Transcribed problem: the composite objective plus the index map back.

    labels names each component of the inner map in order, so reports can
    speak about defects and bounds instead of raw indices.
    """

    composite: CompositeObjective
    ocp: OptimalControlProblem
    labels: Tuple[str, ...]
    penalty_weight: float

    @property
    def active_set_threshold(self) -> int:
        """Inequality count that full control authority would activate."""
        return self.ocp.n_u * (self.ocp.n_nodes - 1)


def transcribe(ocp: OptimalControlProblem, penalty_weight: float) -> DiscretizedProblem:
    """Stack the problem into a composite exact-penalty objective."""
    n_x, n_u, N = ocp.n_x, ocp.n_u, ocp.n_nodes
    n_z = ocp.n_z
    x_init = np.asarray(ocp.initial_state, dtype=float)
    x_final = None if ocp.final_state is None else np.asarray(ocp.final_state, dtype=float)

    bounds = []
    if ocp.control_bounds is not None:
        for j, (lo, hi) in enumerate(ocp.control_bounds):
            if np.isfinite(hi):
                bounds.append((j, "upper", float(hi)))
            if np.isfinite(lo):
                bounds.append((j, "lower", float(lo)))

    labels = []
    for k in range(N - 1):
        labels.append(f"stage_cost[{k}]")
    labels.append("terminal_cost")
    for k in range(N - 1):
        for i in range(n_x):
            labels.append(f"dynamics_defect[{k}][{i}]")
    for i in range(n_x):
        labels.append(f"initial_state[{i}]")
    if x_final is not None:
        for i in range(n_x):
            labels.append(f"final_state[{i}]")
    for k in range(N - 1):
        for pc in ocp.path_inequalities:
            labels.append(f"{pc.name}[{k}]")
        for j, side, _ in bounds:
            labels.append(f"control_{side}[{k}][{j}]")

    n_cost = N
    n_eq = n_x * (N - 1) + n_x + (n_x if x_final is not None else 0)
    per_node_ineq = len(ocp.path_inequalities) + len(bounds)
    n_ineq = per_node_ineq * (N - 1)
    dim = n_cost + n_eq + n_ineq
    assert len(labels) == dim

    def state_cols(k: int) -> slice:
        return slice(k * n_x, (k + 1) * n_x)

    def control_cols(k: int) -> slice:
        base = N * n_x + k * n_u
        return slice(base, base + n_u)

    def evaluate(z: np.ndarray) -> np.ndarray:
        states, controls = ocp.split(z)
        out = np.empty(dim)
        for k in range(N - 1):
            out[k] = ocp.stage_cost(states[k], controls[k])
        out[N - 1] = ocp.terminal_cost(states[-1]) if ocp.terminal_cost is not None else 0.0
        pos = n_cost
        for k in range(N - 1):
            out[pos:pos + n_x] = states[k + 1] - ocp.dynamics(states[k], controls[k])
            pos += n_x
        out[pos:pos + n_x] = states[0] - x_init
        pos += n_x
        if x_final is not None:
            out[pos:pos + n_x] = states[-1] - x_final
            pos += n_x
        for k in range(N - 1):
            for pc in ocp.path_inequalities:
                out[pos] = pc.fun(states[k], controls[k])
                pos += 1
            for j, side, bound in bounds:
                if side == "upper":
                    out[pos] = controls[k][j] - bound
                else:
                    out[pos] = bound - controls[k][j]
                pos += 1
        return out

    def jacobian(z: np.ndarray) -> np.ndarray:
        states, controls = ocp.split(z)
        jac = np.zeros((dim, n_z))
        for k in range(N - 1):
            gx, gu = ocp.stage_cost_grad(states[k], controls[k])
            jac[k, state_cols(k)] = gx
            jac[k, control_cols(k)] = gu
        if ocp.terminal_cost is not None:
            jac[N - 1, state_cols(N - 1)] = ocp.terminal_cost_grad(states[-1])
        pos = n_cost
        eye = np.eye(n_x)
        for k in range(N - 1):
            a_mat, b_mat = ocp.dynamics_jac(states[k], controls[k])
            rows = slice(pos, pos + n_x)
            jac[rows, state_cols(k + 1)] = eye
            jac[rows, state_cols(k)] = -np.asarray(a_mat, dtype=float)
            jac[rows, control_cols(k)] = -np.asarray(b_mat, dtype=float)
            pos += n_x
        jac[pos:pos + n_x, state_cols(0)] = eye
        pos += n_x
        if x_final is not None:
            jac[pos:pos + n_x, state_cols(N - 1)] = eye
            pos += n_x
        for k in range(N - 1):
            for pc in ocp.path_inequalities:
                gx, gu = pc.grad(states[k], controls[k])
                jac[pos, state_cols(k)] = gx
                jac[pos, control_cols(k)] = gu
                pos += 1
            for j, side, _ in bounds:
                col = N * n_x + k * n_u + j
                jac[pos, col] = 1.0 if side == "upper" else -1.0
                pos += 1
        return jac

    smooth = SmoothMap(input_dim=n_z, output_dim=dim, evaluate=evaluate, jacobian=jacobian)
    outer = ConvexOuter(
        cost_range=range(0, n_cost),
        eq_range=range(n_cost, n_cost + n_eq),
        ineq_range=range(n_cost + n_eq, dim),
        penalty_weight=float(penalty_weight),
    )
    composite = CompositeObjective(g=smooth, psi=outer)
    return DiscretizedProblem(composite=composite, ocp=ocp, labels=tuple(labels),
                              penalty_weight=float(penalty_weight))


def simulate_rollout(ocp: OptimalControlProblem, controls) -> np.ndarray:
    """Forward-simulate the dynamics and stack the result.

    The returned decision vector satisfies every dynamics defect and the
    initial condition by construction; only a declared final state can be
    violated.
    """
    controls = np.asarray(controls, dtype=float).reshape(ocp.n_nodes - 1, ocp.n_u)
    states = np.empty((ocp.n_nodes, ocp.n_x))
    states[0] = np.asarray(ocp.initial_state, dtype=float)
    for k in range(ocp.n_nodes - 1):
        nxt = np.asarray(ocp.dynamics(states[k], controls[k]), dtype=float)
        if not np.all(np.isfinite(nxt)):
            raise NonFiniteError(f"rollout state at node {k + 1}", int(np.argmin(np.isfinite(nxt))))
        states[k + 1] = nxt
    return ocp.join(states, controls)


@dataclass(frozen=True)
class Benchmark:
    """A named instance plus everything needed to run it unattended."""

    name: str
    problem: Union[OptimalControlProblem, CompositeObjective]
    default_penalty_weight: float
    default_start: np.ndarray
    notes: str = ""
    composite_factory: Optional[Callable[[float], CompositeObjective]] = None

    @property
    def kind(self) -> str:
        return "ocp" if isinstance(self.problem, OptimalControlProblem) else "composite"

    def build(self, penalty_weight: Optional[float] = None
              ) -> Tuple[CompositeObjective, Optional[DiscretizedProblem]]:
        """Materialize the composite objective, optionally reweighted."""
        weight = self.default_penalty_weight if penalty_weight is None else float(penalty_weight)
        if isinstance(self.problem, OptimalControlProblem):
            disc = transcribe(self.problem, weight)
            return disc.composite, disc
        if penalty_weight is None or self.composite_factory is None:
            return self.problem, None
        return self.composite_factory(weight), None


def _convex_lqr_box(n_nodes: int = 6, dt: float = 0.25, control_limit: float = 1.0) -> OptimalControlProblem:
    a_mat = np.array([[1.0, dt], [0.0, 1.0]])
    b_mat = np.array([[0.0], [dt]])
    c_x = np.array([0.2, 0.0])
    c_u = np.array([0.1])

    def dynamics(x, u):
        return a_mat @ x + b_mat @ u

    def dynamics_jac(x, u):
        return a_mat, b_mat

    def stage_cost(x, u):
        return float(c_x @ x + c_u @ u)

    def stage_cost_grad(x, u):
        return c_x, c_u

    def terminal_cost(x):
        return float(c_x @ x)

    def terminal_cost_grad(x):
        return c_x

    return OptimalControlProblem(
        n_x=2, n_u=1, n_nodes=n_nodes,
        dynamics=dynamics, dynamics_jac=dynamics_jac,
        initial_state=np.array([1.0, 0.0]),
        stage_cost=stage_cost, stage_cost_grad=stage_cost_grad,
        terminal_cost=terminal_cost, terminal_cost_grad=terminal_cost_grad,
        control_bounds=((-control_limit, control_limit),),
        name="convex-lqr-box",
    )


def _double_integrator_obstacle(n_nodes: int = 8, dt: float = 0.6,
                                obstacle_center: Tuple[float, float] = (2.5, 0.3),
                                obstacle_radius: float = 1.0,
                                control_limit: float = 2.0,
                                target: Tuple[float, float] = (5.0, 0.0)) -> OptimalControlProblem:
    center = np.asarray(obstacle_center, dtype=float)
    r2 = float(obstacle_radius) ** 2
    effort = 0.05 * dt

    def dynamics(x, u):
        return np.concatenate([x[:2] + dt * x[2:], x[2:] + dt * u])

    def dynamics_jac(x, u):
        a_mat = np.eye(4)
        a_mat[0, 2] = dt
        a_mat[1, 3] = dt
        b_mat = np.zeros((4, 2))
        b_mat[2, 0] = dt
        b_mat[3, 1] = dt
        return a_mat, b_mat

    def stage_cost(x, u):
        return float(effort * (u @ u))

    def stage_cost_grad(x, u):
        return np.zeros(4), 2.0 * effort * u

    def keep_out(x, u):
        diff = x[:2] - center
        return r2 - float(diff @ diff)

    def keep_out_grad(x, u):
        gx = np.zeros(4)
        gx[:2] = -2.0 * (x[:2] - center)
        return gx, np.zeros(2)

    return OptimalControlProblem(
        n_x=4, n_u=2, n_nodes=n_nodes,
        dynamics=dynamics, dynamics_jac=dynamics_jac,
        initial_state=np.zeros(4),
        final_state=np.array([target[0], target[1], 0.0, 0.0]),
        stage_cost=stage_cost, stage_cost_grad=stage_cost_grad,
        path_inequalities=(PathConstraint(keep_out, keep_out_grad, name="keep_out"),),
        control_bounds=((-control_limit, control_limit), (-control_limit, control_limit)),
        name="double-integrator-obstacle",
    )


def _dubins_car(n_nodes: int = 6, dt: float = 0.5,
                speed_limit: float = 1.0, turn_limit: float = 1.5) -> OptimalControlProblem:
    effort = 0.05 * dt

    def dynamics(x, u):
        return np.array([
            x[0] + dt * u[0] * math.cos(x[2]),
            x[1] + dt * u[0] * math.sin(x[2]),
            x[2] + dt * u[1],
        ])

    def dynamics_jac(x, u):
        s, c = math.sin(x[2]), math.cos(x[2])
        a_mat = np.array([
            [1.0, 0.0, -dt * u[0] * s],
            [0.0, 1.0, dt * u[0] * c],
            [0.0, 0.0, 1.0],
        ])
        b_mat = np.array([
            [dt * c, 0.0],
            [dt * s, 0.0],
            [0.0, dt],
        ])
        return a_mat, b_mat

    def stage_cost(x, u):
        return float(effort * (u @ u))

    def stage_cost_grad(x, u):
        return np.zeros(3), 2.0 * effort * u

    ocp = OptimalControlProblem(
        n_x=3, n_u=2, n_nodes=n_nodes,
        dynamics=dynamics, dynamics_jac=dynamics_jac,
        initial_state=np.zeros(3),
        stage_cost=stage_cost, stage_cost_grad=stage_cost_grad,
        control_bounds=((0.0, speed_limit), (-turn_limit, turn_limit)),
        name="dubins-car",
    )
    # Reachable target pose: endpoint of a constant-rate arc at 80% speed.
    nominal = np.tile([0.8 * speed_limit, 0.4 * turn_limit], (n_nodes - 1, 1))
    states, _ = ocp.split(simulate_rollout(ocp, nominal))
    return OptimalControlProblem(
        n_x=3, n_u=2, n_nodes=n_nodes,
        dynamics=dynamics, dynamics_jac=dynamics_jac,
        initial_state=np.zeros(3),
        final_state=states[-1].copy(),
        stage_cost=stage_cost, stage_cost_grad=stage_cost_grad,
        control_bounds=((0.0, speed_limit), (-turn_limit, turn_limit)),
        name="dubins-car",
    )


def _toy_sharp_1d_composite(weight: float) -> CompositeObjective:
    smooth = SmoothMap(
        input_dim=1, output_dim=2,
        evaluate=lambda z: np.array([z[0] ** 2, z[0] - 1.0]),
        jacobian=lambda z: np.array([[2.0 * z[0]], [1.0]]),
    )
    outer = ConvexOuter(range(0, 1), range(1, 2), range(2, 2), weight)
    return CompositeObjective(g=smooth, psi=outer)


def _toy_sharp_2d_composite(weight: float) -> CompositeObjective:
    smooth = SmoothMap(
        input_dim=2, output_dim=3,
        evaluate=lambda z: np.array([z[0] ** 2 + z[1] ** 2, z[0] - 1.0, z[1] - 1.0]),
        jacobian=lambda z: np.array([[2.0 * z[0], 2.0 * z[1]], [1.0, 0.0], [0.0, 1.0]]),
    )
    outer = ConvexOuter(range(0, 1), range(1, 3), range(3, 3), weight)
    return CompositeObjective(g=smooth, psi=outer)


def _noncompact_composite(weight: float) -> CompositeObjective:
    # J(z) = -z + exp(-z).  The slope stays at or below -1, so the model
    # always predicts at least a full trust-region radius of decrease and a
    # stationarity stop can never fire; every sublevel set is unbounded.
    smooth = SmoothMap(
        input_dim=1, output_dim=2,
        evaluate=lambda z: np.array([-z[0], math.exp(-z[0])]),
        jacobian=lambda z: np.array([[-1.0], [-math.exp(-z[0])]]),
    )
    outer = ConvexOuter(range(0, 2), range(2, 2), range(2, 2), weight)
    return CompositeObjective(g=smooth, psi=outer)


def builtin(name: str, **overrides) -> Benchmark:
    """Return a named builtin instance.

    Overrides feed the instance factory (node count, limits, geometry); the
    penalty weight is not an override here since it belongs to the
    transcription step.
    """
    try:
        if name == "convex-lqr-box":
            ocp = _convex_lqr_box(**overrides)
            start = simulate_rollout(ocp, np.zeros((ocp.n_nodes - 1, ocp.n_u)))
            return Benchmark(
                name=name, problem=ocp, default_penalty_weight=10.0, default_start=start,
                notes="Affine dynamics, linear cost, box on the control. The "
                      "model is exact, so every defined ratio is 1 and the "
                      "solve matches a direct LP on the stacked problem.",
            )
        if name == "double-integrator-obstacle":
            ocp = _double_integrator_obstacle(**overrides)
            start = simulate_rollout(ocp, np.zeros((ocp.n_nodes - 1, ocp.n_u)))
            return Benchmark(
                name=name, problem=ocp, default_penalty_weight=50.0, default_start=start,
                notes="Planar double integrator steering around one circular "
                      "keep-out region to a pinned final state. Nonconvex "
                      "through the keep-out components only. Weights of 5 and "
                      "up already recover the constrained optimum here; the "
                      "default 50 leaves a wide margin.",
            )
        if name == "dubins-car":
            ocp = _dubins_car(**overrides)
            controls = np.tile([0.5, 0.0], (ocp.n_nodes - 1, 1))
            start = simulate_rollout(ocp, controls)
            return Benchmark(
                name=name, problem=ocp, default_penalty_weight=10.0, default_start=start,
                notes="Unicycle kinematics with speed and turn-rate bounds; "
                      "the target pose is the endpoint of a feasible arc, so "
                      "an exact-penalty minimizer reaches it exactly.",
            )
        if name == "toy-sharp-1d":
            if overrides:
                raise TypeError(f"unexpected overrides {sorted(overrides)}")
            return Benchmark(
                name=name, problem=_toy_sharp_1d_composite(10.0),
                default_penalty_weight=10.0, default_start=np.array([3.0]),
                composite_factory=_toy_sharp_1d_composite,
                notes="J(z) = z^2 + 10|z - 1|. Minimizer z = 1 for any weight "
                      "above 2, J(1) = 1. One-sided slopes at the minimizer "
                      "are 8 (left) and 12 (right): sharp with constant 8, "
                      "and the model growth constant there is also 8.",
            )
        if name == "toy-sharp-2d":
            if overrides:
                raise TypeError(f"unexpected overrides {sorted(overrides)}")
            return Benchmark(
                name=name, problem=_toy_sharp_2d_composite(10.0),
                default_penalty_weight=10.0, default_start=np.array([3.0, -2.0]),
                composite_factory=_toy_sharp_2d_composite,
                notes="J(z) = |z|^2 + 10(|z1 - 1| + |z2 - 1|). Minimizer "
                      "(1, 1) for any weight above 2, J = 2. Sharp and model "
                      "growth constants both 8 in the inf norm; the worst "
                      "direction is a single signed axis.",
            )
        if name == "noncompact-levelset":
            if overrides:
                raise TypeError(f"unexpected overrides {sorted(overrides)}")
            return Benchmark(
                name=name, problem=_noncompact_composite(1.0),
                default_penalty_weight=1.0, default_start=np.array([0.0]),
                composite_factory=_noncompact_composite,
                notes="J(z) = -z + exp(-z): unbounded below with slope at "
                      "most -1 everywhere, so every sublevel set is unbounded "
                      "and the predicted decrease never falls under the stop "
                      "tolerance. Runs end by exhausting the iterate norm "
                      "budget, never by claiming convergence.",
            )
    except TypeError as exc:
        raise ValueError(f"bad overrides for builtin '{name}': {exc}") from None
    raise ValueError(f"unknown builtin '{name}'; choose from {BUILTIN_NAMES}")
