"""Hölder and C^N norm estimators for periodic grid fields.

The Hölder seminorm is estimated from axis-aligned dyadic lags only, which
bounds the true seminorm from below and is exact in the grid limit; the
estimates feed measured ledgers, never proofs.
"""

from __future__ import annotations

import numpy as np

from .grid import ScalarField, TensorField, VectorField, spectral_derivative


def _component_list(field):
    if isinstance(field, ScalarField):
        return [field.data]
    return list(field.data)


def holder_seminorm(field, theta: float) -> float:
    """Sup over dyadic axis-aligned lags h of |f(x+h) - f(x)| / h^theta."""
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"Hölder exponent must lie in (0, 1], got {theta}")
    n = field.grid.n
    comps = _component_list(field)
    best = 0.0
    j = 1
    while n // 2 ** j >= 1:
        shift = n // 2 ** j
        h = shift * field.grid.spacing
        for axis in range(3):
            for c in comps:
                diff = np.abs(np.roll(c, -shift, axis=axis) - c).max()
                best = max(best, diff / h ** theta)
        j += 1
    return best


def holder_norm(field, alpha: float) -> float:
    """C^alpha norm for alpha in (0, 1): sup norm plus the alpha seminorm."""
    comps = _component_list(field)
    sup = max(float(np.abs(c).max()) for c in comps)
    return sup + holder_seminorm(field, alpha)


def _scalar_views(field):
    if isinstance(field, ScalarField):
        yield field
    else:
        for c in range(field.data.shape[0]):
            yield ScalarField(field.grid, field.data[c], check=False)


def derivative_sup(field, order: int) -> float:
    """Max over multi-indices of the given total order of the sup norm of the derivative."""
    if order == 0:
        if isinstance(field, VectorField) or isinstance(field, TensorField):
            return field.c0()
        return field.c0()
    best = 0.0
    for f in _scalar_views(field):
        for combo in _multi_indices(order):
            g = f
            for axis, o in enumerate(combo):
                if o:
                    g = spectral_derivative(g, axis, o)
            best = max(best, float(np.abs(g.data).max()))
    return best


def _multi_indices(order: int):
    for o1 in range(order + 1):
        for o2 in range(order - o1 + 1):
            yield (o1, o2, order - o1 - o2)


def cn_norm(field, n_order: int) -> float:
    """Sum over m <= N of the sup norms of order-m spectral derivatives (N <= 4)."""
    if n_order > 4:
        raise ValueError("cn_norm supports orders up to 4")
    return sum(derivative_sup(field, m) for m in range(n_order + 1))


def c1_norm(field) -> float:
    return derivative_sup(field, 0) + derivative_sup(field, 1)
