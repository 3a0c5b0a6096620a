"""Pruned trigonometric-polynomial evaluation at arbitrary points.

Grid fields built by this laboratory keep almost all of their energy in a
handful of Fourier modes, so off-grid evaluation (flow feet, transported
slices) runs as a direct sum over the active modes of the trigonometric
interpolant.  This is exact up to the pruning threshold, with no
interpolation error on top.
"""

from __future__ import annotations

import numpy as np

from .grid import ScalarField


class TrigPolynomial:
    """Real trigonometric polynomial with C components.

    Stores one representative per conjugate mode pair; evaluation accumulates
    2*Re(c e^{i m.x}) per pair plus the real zero-mode term.
    """

    def __init__(self, modes: np.ndarray, coeffs: np.ndarray, const: np.ndarray):
        self.modes = np.asarray(modes, dtype=float)          # (P, 3)
        self.coeffs = np.asarray(coeffs, dtype=complex)      # (C, P)
        self.const = np.asarray(const, dtype=float)          # (C,)

    @property
    def n_components(self) -> int:
        return self.const.shape[0]

    @property
    def n_modes(self) -> int:
        return self.modes.shape[0]

    @classmethod
    def from_field(cls, field, rel_tol: float = 1e-14) -> "TrigPolynomial":
        # two passes, one component spectrum in memory at a time
        comps = field.data if field.data.ndim == 4 else field.data[None]
        n = field.grid.n
        k = np.fft.fftfreq(n, d=1.0 / n).astype(int)
        mags = None
        const = np.empty(len(comps))
        for c in comps:
            spec = np.abs(np.fft.fftn(c)) / n ** 3
            mags = spec if mags is None else np.maximum(mags, spec)
        top = mags.max()
        keep = [tuple(idx) for idx in np.argwhere(mags > rel_tol * max(top, 1e-300))]
        del mags
        modes = []
        for idx in keep:
            m = (k[idx[0]], k[idx[1]], k[idx[2]])
            if m != (0, 0, 0) and _is_representative(m):
                modes.append((m, idx))
        coeffs = np.zeros((len(comps), len(modes)), dtype=complex)
        for ci, c in enumerate(comps):
            spec = np.fft.fftn(c) / n ** 3
            const[ci] = spec[0, 0, 0].real
            for p, (_, idx) in enumerate(modes):
                coeffs[ci, p] = spec[idx]
            del spec
        if modes:
            modes_arr = np.array([m for m, _ in modes], dtype=float)
        else:
            modes_arr = np.zeros((0, 3))
        return cls(modes_arr, coeffs, const)

    def scaled(self, factor: float) -> "TrigPolynomial":
        return TrigPolynomial(self.modes, self.coeffs * factor, self.const * factor)

    def evaluate(self, points: np.ndarray, gradient: bool = False):
        """Evaluate at points (3, N); returns (C, N) and optionally (C, 3, N)."""
        npts = points.shape[1]
        ncomp = self.n_components
        out = np.repeat(self.const[:, None], npts, axis=1)
        grad = np.zeros((ncomp, 3, npts)) if gradient else None
        for p in range(self.n_modes):
            m = self.modes[p]
            theta = np.zeros(npts)
            for a in range(3):
                if m[a] != 0.0:
                    theta += m[a] * points[a]
            c, s = np.cos(theta), np.sin(theta)
            for comp in range(ncomp):
                re, im = self.coeffs[comp, p].real, self.coeffs[comp, p].imag
                out[comp] += 2.0 * (re * c - im * s)
                if gradient:
                    h = -2.0 * (re * s + im * c)
                    for a in range(3):
                        if m[a] != 0.0:
                            grad[comp, a] += m[a] * h
        if gradient:
            return out, grad
        return out


def _is_representative(m) -> bool:
    for v in m:
        if v > 0:
            return True
        if v < 0:
            return False
    return False


def evaluate_scalar_at(field: ScalarField, points: np.ndarray,
                       rel_tol: float = 1e-14) -> np.ndarray:
    return TrigPolynomial.from_field(field, rel_tol).evaluate(points)[0]
