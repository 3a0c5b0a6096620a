"""Backward-characteristic flow maps for the mollified velocity.

Trajectories are integrated with the classical fourth-order one-step method
from the evaluation time back to the slice time; velocities at the stage
points come from the pruned trigonometric interpolant, so there is no spatial
interpolation error on top of the time stepping.
"""

from __future__ import annotations

import numpy as np

from .grid import VectorField, vector_gradient
from .mollify import mollify
from .timefield import TimeField
from .trig import TrigPolynomial


class StepCountTooSmall(RuntimeError):
    """Doubling the substep count moved the flow by more than the tolerance."""


class VelocityModel:
    """Mollified stage velocity, sampled on or off the grid.

    Separable fields (sum of g_j(t) * V_j(x), the form every seed stage has)
    reuse one trigonometric interpolant per term; general fields fall back to
    an interpolant per requested time, memoised on exact time keys.
    """

    def __init__(self, velocity: TimeField, ell: float, prune_tol: float = 1e-14):
        self.velocity = velocity
        self.ell = float(ell)
        self._prune_tol = prune_tol
        self._per_time = {}
        self._grid_cache = {}
        if velocity.terms is not None:
            self._terms = [(fn, TrigPolynomial.from_field(mollify(f, ell), prune_tol))
                           for fn, f in velocity.terms]
        else:
            self._terms = None

    def sample(self, points: np.ndarray, s: float, gradient: bool = False):
        if self._terms is not None:
            npts = points.shape[1]
            v = np.zeros((3, npts))
            jac = np.zeros((3, 3, npts)) if gradient else None
            for fn, poly in self._terms:
                c = fn(s)
                if c == 0.0:
                    continue
                if gradient:
                    val, grad = poly.evaluate(points, gradient=True)
                    v += c * val
                    jac += c * grad
                else:
                    v += c * poly.evaluate(points)
            return (v, jac) if gradient else v
        poly = self._poly_at(s)
        if gradient:
            val, grad = poly.evaluate(points, gradient=True)
            return val, grad
        return poly.evaluate(points)

    def _poly_at(self, s: float) -> TrigPolynomial:
        key = np.float64(s).tobytes()
        if key not in self._per_time:
            self._per_time[key] = TrigPolynomial.from_field(
                self.grid_field(s), self._prune_tol)
            if len(self._per_time) > 256:
                self._per_time.pop(next(iter(self._per_time)))
        return self._per_time[key]

    def grid_field(self, s: float) -> VectorField:
        key = np.float64(s).tobytes()
        if key not in self._grid_cache:
            self._grid_cache[key] = mollify(self.velocity(s), self.ell)
            if len(self._grid_cache) > 8:
                self._grid_cache.pop(next(iter(self._grid_cache)))
        return self._grid_cache[key]

    def grid_gradient(self, s: float) -> np.ndarray:
        return vector_gradient(self.grid_field(s))


def _rk4(model: VelocityModel, points, s0: float, s1: float, substeps: int,
         jacobian: bool):
    x = points.copy()
    jac = None
    if jacobian:
        jac = np.zeros((3, 3, points.shape[1]))
        for a in range(3):
            jac[a, a] = 1.0
    h = (s1 - s0) / substeps
    s = s0
    for _ in range(substeps):
        if jacobian:
            k1, g1 = model.sample(x, s, gradient=True)
            j1 = np.einsum("abn,bcn->acn", g1, jac)
            k2, g2 = model.sample(x + 0.5 * h * k1, s + 0.5 * h, gradient=True)
            j2 = np.einsum("abn,bcn->acn", g2, jac + 0.5 * h * j1)
            k3, g3 = model.sample(x + 0.5 * h * k2, s + 0.5 * h, gradient=True)
            j3 = np.einsum("abn,bcn->acn", g3, jac + 0.5 * h * j2)
            k4, g4 = model.sample(x + h * k3, s + h, gradient=True)
            j4 = np.einsum("abn,bcn->acn", g4, jac + h * j3)
            jac = jac + (h / 6.0) * (j1 + 2.0 * j2 + 2.0 * j3 + j4)
        else:
            k1 = model.sample(x, s)
            k2 = model.sample(x + 0.5 * h * k1, s + 0.5 * h)
            k3 = model.sample(x + 0.5 * h * k2, s + 0.5 * h)
            k4 = model.sample(x + h * k3, s + h)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        s += h
    return x, jac


def flow_map(model: VelocityModel, l: int, mu: float, t: float,
             points: np.ndarray, substeps: int = 16, jacobian: bool = True,
             check: bool = True, check_tol: float = 1e-8):
    """Foot points (and Jacobian) of backward characteristics through `points`.

    Integrates dX/ds = v(X, s) from s = t to the slice time l / mu.  With
    `check`, the integration is repeated at doubled resolution on a subsample
    and must agree to `check_tol`, else StepCountTooSmall.
    """
    s0, s1 = float(t), l / mu
    if substeps < 1:
        raise ValueError("substeps must be positive")
    if s0 == s1:
        jac = None
        if jacobian:
            jac = np.zeros((3, 3, points.shape[1]))
            for a in range(3):
                jac[a, a] = 1.0
        return points.copy(), jac
    x, jac = _rk4(model, points, s0, s1, substeps, jacobian)
    if check:
        sample = points[:, :: max(1, points.shape[1] // 512)]
        coarse, _ = _rk4(model, sample, s0, s1, substeps, False)
        fine, _ = _rk4(model, sample, s0, s1, 2 * substeps, False)
        drift = float(np.abs(fine - coarse).max())
        if drift > check_tol:
            raise StepCountTooSmall(
                f"substep doubling moved the flow by {drift:.3g} > {check_tol:.1g}; "
                f"increase substeps from {substeps}")
    return x, jac
