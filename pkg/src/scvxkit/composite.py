"""Composite objectives of the form J(z) = psi(G(z)).

G is a smooth vector map (value plus dense Jacobian) and psi is a convex
piecewise-linear outer function: a plain sum over designated cost components,
plus a weighted 1-norm over equality components and a weighted hinge over
inequality components.  Keeping psi structural (index ranges plus one weight)
is what lets the trust-region subproblem be rebuilt as an LP downstream.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


class CompositeError(Exception):
    """Base class for objective evaluation failures."""


class DimensionMismatchError(CompositeError):
    def __init__(self, what: str, expected, got):
        self.what = what
        self.expected = expected
        self.got = got
        super().__init__(f"{what}: expected {expected}, got {got}")


class NonFiniteError(CompositeError):
    def __init__(self, what: str, index: int):
        self.what = what
        self.index = index
        super().__init__(f"{what}: non-finite entry at component {index}")


def as_decision_vector(values, n: Optional[int] = None, what: str = "decision vector") -> np.ndarray:
    """Coerce to a finite 1-D float array, checking length when n is given."""
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1:
        raise DimensionMismatchError(what, "1-D array", f"{arr.ndim}-D array")
    if n is not None and arr.size != n:
        raise DimensionMismatchError(what, n, arr.size)
    finite = np.isfinite(arr)
    if not finite.all():
        raise NonFiniteError(what, int(np.argmin(finite)))
    return arr


@dataclass(frozen=True)
class SmoothMap:
    """Differentiable map R^n -> R^m given by value and Jacobian callables."""

    input_dim: int
    output_dim: int
    evaluate: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]

    def value(self, z) -> np.ndarray:
        z = as_decision_vector(z, self.input_dim)
        out = np.atleast_1d(np.asarray(self.evaluate(z), dtype=float))
        if out.shape != (self.output_dim,):
            raise DimensionMismatchError("map value", (self.output_dim,), out.shape)
        finite = np.isfinite(out)
        if not finite.all():
            raise NonFiniteError("map value", int(np.argmin(finite)))
        return out

    def jac(self, z) -> np.ndarray:
        z = as_decision_vector(z, self.input_dim)
        out = np.asarray(self.jacobian(z), dtype=float)
        if out.shape != (self.output_dim, self.input_dim):
            raise DimensionMismatchError("map jacobian", (self.output_dim, self.input_dim), out.shape)
        finite = np.isfinite(out)
        if not finite.all():
            row = int(np.argmin(np.all(finite, axis=1)))
            raise NonFiniteError("map jacobian row", row)
        return out


@dataclass(frozen=True)
class ConvexOuter:
    """Structural convex outer function.

    psi(v) = sum(v[cost]) + penalty_weight * (sum |v[eq]| + sum max(0, v[ineq])).

    The three ranges must partition [0, output_dim) with unit step, so every
    component of the inner map has exactly one role.  psi is convex and
    globally Lipschitz with constant max(1, penalty_weight) in the 1-norm.
    """

    cost_range: range
    eq_range: range
    ineq_range: range
    penalty_weight: float

    def __post_init__(self):
        for name, r in (("cost_range", self.cost_range),
                        ("eq_range", self.eq_range),
                        ("ineq_range", self.ineq_range)):
            if r.step != 1:
                raise ValueError(f"{name} must have unit step")
        dim = len(self.cost_range) + len(self.eq_range) + len(self.ineq_range)
        covered = sorted(list(self.cost_range) + list(self.eq_range) + list(self.ineq_range))
        if covered != list(range(dim)):
            raise ValueError("cost/eq/ineq ranges must partition the output index set")
        if not (np.isfinite(self.penalty_weight) and self.penalty_weight > 0):
            raise ValueError("penalty_weight must be positive and finite")

    @property
    def output_dim(self) -> int:
        return len(self.cost_range) + len(self.eq_range) + len(self.ineq_range)

    @property
    def n_cost(self) -> int:
        return len(self.cost_range)

    @property
    def n_eq(self) -> int:
        return len(self.eq_range)

    @property
    def n_ineq(self) -> int:
        return len(self.ineq_range)

    @property
    def lipschitz_constant(self) -> float:
        return max(1.0, self.penalty_weight)

    def apply(self, values) -> float:
        v = np.asarray(values, dtype=float)
        if v.shape != (self.output_dim,):
            raise DimensionMismatchError("outer argument", (self.output_dim,), v.shape)
        cost = float(np.sum(v[self.cost_range.start:self.cost_range.stop]))
        eq = float(np.sum(np.abs(v[self.eq_range.start:self.eq_range.stop])))
        ineq = float(np.sum(np.maximum(v[self.ineq_range.start:self.ineq_range.stop], 0.0)))
        return cost + self.penalty_weight * (eq + ineq)

    def apply_many(self, values: np.ndarray) -> np.ndarray:
        """Vectorized apply over rows of a (m, output_dim) array."""
        v = np.asarray(values, dtype=float)
        if v.ndim != 2 or v.shape[1] != self.output_dim:
            raise DimensionMismatchError("outer argument rows", (None, self.output_dim), v.shape)
        cost = v[:, self.cost_range.start:self.cost_range.stop].sum(axis=1)
        eq = np.abs(v[:, self.eq_range.start:self.eq_range.stop]).sum(axis=1)
        ineq = np.maximum(v[:, self.ineq_range.start:self.ineq_range.stop], 0.0).sum(axis=1)
        return cost + self.penalty_weight * (eq + ineq)


@dataclass(frozen=True)
class CompositeObjective:
    """J(z) = psi(G(z)) with G smooth and psi a structural ConvexOuter."""

    g: SmoothMap
    psi: ConvexOuter

    def __post_init__(self):
        if self.g.output_dim != self.psi.output_dim:
            raise DimensionMismatchError("outer/inner dimensions", self.psi.output_dim, self.g.output_dim)

    @property
    def n_z(self) -> int:
        return self.g.input_dim

    def value(self, z) -> float:
        return self.psi.apply(self.g.value(z))

    def smooth_cost(self, z) -> float:
        """Sum of the cost components alone, without penalty terms."""
        v = self.g.value(z)
        return float(np.sum(v[self.psi.cost_range.start:self.psi.cost_range.stop]))

    def max_equality_violation(self, z) -> float:
        v = self.g.value(z)
        eq = v[self.psi.eq_range.start:self.psi.eq_range.stop]
        return float(np.max(np.abs(eq))) if eq.size else 0.0

    def max_inequality_violation(self, z) -> float:
        v = self.g.value(z)
        ineq = v[self.psi.ineq_range.start:self.psi.ineq_range.stop]
        return float(np.max(np.maximum(ineq, 0.0))) if ineq.size else 0.0


@dataclass(frozen=True)
class Linearization:
    """First-order surrogate data for a composite objective at a base point.

    The convex model is L(d) = psi(g_value + g_jacobian @ d).  Evaluated at
    d = 0 it reproduces the objective at the base point through the identical
    arithmetic path, so L(0) == J(base_point) holds exactly, not just to
    rounding.
    """

    base_point: np.ndarray
    g_value: np.ndarray
    g_jacobian: np.ndarray
    psi: ConvexOuter

    @property
    def n_z(self) -> int:
        return self.base_point.size

    @property
    def base_value(self) -> float:
        """J at the base point, computed through the model's code path."""
        return self.psi.apply(self.g_value)

    def model_value(self, d) -> float:
        d = as_decision_vector(d, self.n_z, what="step")
        return self.psi.apply(self.g_value + self.g_jacobian @ d)

    def model_value_many(self, steps: np.ndarray) -> np.ndarray:
        """Vectorized model over rows of a (m, n_z) step array."""
        steps = np.asarray(steps, dtype=float)
        return self.psi.apply_many(self.g_value[None, :] + steps @ self.g_jacobian.T)


def evaluate_objective(objective: CompositeObjective, z) -> float:
    """Evaluate J(z) = psi(G(z)), rejecting bad dimensions and non-finite values."""
    return objective.value(z)


def linearize(objective: CompositeObjective, z) -> Linearization:
    """Freeze G(z) and its Jacobian at z for use in the convex model."""
    z = as_decision_vector(z, objective.n_z)
    return Linearization(
        base_point=z.copy(),
        g_value=objective.g.value(z),
        g_jacobian=objective.g.jac(z),
        psi=objective.psi,
    )


def evaluate_model(lin: Linearization, d) -> float:
    """Evaluate the convex model L(d) = psi(G(z) + dG(z) d)."""
    return lin.model_value(d)


def fd_check_jacobian(smooth_map: SmoothMap, z, step: float = 1e-6) -> float:
    """Compare the analytic Jacobian against central differences.

    Per-coordinate step is step * (1 + |z_i|).  Returns the worst entry of
    |analytic - numeric| / (1 + |analytic|).
    """
    z = as_decision_vector(z, smooth_map.input_dim)
    jac = smooth_map.jac(z)
    worst = 0.0
    for i in range(smooth_map.input_dim):
        h = step * (1.0 + abs(z[i]))
        zp = z.copy()
        zp[i] += h
        zm = z.copy()
        zm[i] -= h
        col = (smooth_map.value(zp) - smooth_map.value(zm)) / (2.0 * h)
        err = np.max(np.abs(col - jac[:, i]) / (1.0 + np.abs(jac[:, i])))
        worst = max(worst, float(err))
    return worst
