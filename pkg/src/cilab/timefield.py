"""Time-evaluable fields: deterministic maps t -> grid field with compact support."""

from __future__ import annotations

import threading
from collections import OrderedDict

import numpy as np

from .grid import ScalarField, TensorField, VectorField

_KINDS = {"scalar": ScalarField, "vector": VectorField, "tensor": TensorField}


class TimeField:
    """A field of time, evaluated lazily and memoised on exact t keys.

    Outside the closed support interval the evaluator is never called and the
    zero field is returned.  Memoisation is LRU-bounded and lock-protected so
    evaluators can be shared across threads; identical t always yields the
    identical (read-only) array object or a bit-identical recomputation.
    """

    def __init__(self, grid, kind: str, evaluate, support, dt_evaluate=None,
                 terms=None, cache_size: int = 4):
        if kind not in _KINDS:
            raise ValueError(f"unknown field kind {kind!r}")
        self.grid = grid
        self.kind = kind
        self.support = (float(support[0]), float(support[1]))
        self._evaluate = evaluate
        self._dt_evaluate = dt_evaluate
        self.terms = terms          # optional [(coeff_fn, Field)] separable form
        self._cache = OrderedDict()
        self._cache_size = cache_size
        self._lock = threading.Lock()
        self._zero = None

    def zero_field(self):
        if self._zero is None:
            self._zero = _KINDS[self.kind].zero(self.grid)
        return self._zero

    def in_support(self, t: float) -> bool:
        return self.support[0] <= t <= self.support[1]

    def __call__(self, t: float):
        t = float(t)
        if not self.in_support(t):
            return self.zero_field()
        key = np.float64(t).tobytes()
        with self._lock:
            if key in self._cache:
                self._cache.move_to_end(key)
                return self._cache[key]
        field = self._evaluate(t)
        with self._lock:
            self._cache[key] = field
            while len(self._cache) > self._cache_size:
                self._cache.popitem(last=False)
        return field

    def dt(self, t: float):
        """Analytic time derivative when available, else None."""
        if self._dt_evaluate is None:
            return None
        t = float(t)
        if not self.in_support(t):
            return self.zero_field()
        return self._dt_evaluate(t)

    def dt_fd(self, t: float, step: float = 1e-5):
        """Centered finite-difference time derivative of the evaluator."""
        lo, hi = self(t - step), self(t + step)
        return type(lo)(self.grid, (hi.data - lo.data) / (2.0 * step), check=False)


def separable(grid, kind: str, terms, support, dterms=None, cache_size: int = 2) -> TimeField:
    """TimeField of the form sum_j g_j(t) * F_j(x); dterms supplies g_j'."""
    cls = _KINDS[kind]

    def evaluate(t):
        acc = np.zeros_like(terms[0][1].data)
        for fn, field in terms:
            acc += fn(t) * field.data
        return cls(grid, acc, check=False)

    dt_evaluate = None
    if dterms is not None:
        def dt_evaluate(t):
            acc = np.zeros_like(terms[0][1].data)
            for fn, field in dterms:
                acc += fn(t) * field.data
            return cls(grid, acc, check=False)

    return TimeField(grid, kind, evaluate, support, dt_evaluate=dt_evaluate,
                     terms=terms, cache_size=cache_size)
