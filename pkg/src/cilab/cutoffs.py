"""Smooth time cutoffs: the partition-of-unity family for the inductive step
and the plateau bump that confines the seed stage to |t| <= 1/4.

The step function s is the normalised integral of the flat-topped bump
exp(-sigma/(u(1-u))) with sigma = 1/10; the flat top keeps the measured
first-derivative constant of the cutoffs under 4.  Squared cutoffs sum to one
exactly because neighbouring edges evaluate cos and sin of the same angle.
"""

from __future__ import annotations

import numpy as np

BUMP_FLATNESS = 0.1
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)
_PANELS = 16


def edge_bump(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = (u > 0.0) & (u < 1.0)
    ui = u[inside]
    out[inside] = np.exp(-BUMP_FLATNESS / (ui * (1.0 - ui)))
    return out


def _integral_to(u):
    """Composite Gauss-Legendre integral of edge_bump over [0, u], vectorised."""
    u = np.asarray(u, dtype=float)
    width = u / _PANELS
    starts = np.arange(_PANELS).reshape(-1, 1) * width[None, ...]
    half = 0.5 * width
    acc = np.zeros_like(u)
    for p in range(_PANELS):
        centers = starts[p] + half
        for node, weight in zip(_GL_NODES, _GL_WEIGHTS):
            acc = acc + weight * edge_bump(centers + node * half)
    return acc * half


_TOTAL = None


def _total_mass() -> float:
    # defined through the half integral so s(1/2) = 1/2 holds exactly
    global _TOTAL
    if _TOTAL is None:
        _TOTAL = 2.0 * float(_integral_to(np.asarray([0.5]))[0])
    return _TOTAL


def smoothstep(u):
    """C-infinity step: 0 below 0, 1 above 1, symmetric (s(1-u) = 1 - s(u))."""
    u = np.asarray(u, dtype=float)
    scalar = u.ndim == 0
    u = np.atleast_1d(u)
    out = np.empty_like(u)
    lo = u <= 0.0
    hi = u >= 1.0
    lower = (~lo) & (~hi) & (u <= 0.5)
    upper = (~lo) & (~hi) & (u > 0.5)
    out[lo] = 0.0
    out[hi] = 1.0
    if lower.any():
        out[lower] = _integral_to(u[lower]) / _total_mass()
    if upper.any():
        out[upper] = 1.0 - _integral_to(1.0 - u[upper]) / _total_mass()
    return float(out[0]) if scalar else out


def smoothstep_derivative(u):
    return edge_bump(u) / _total_mass()


class CutoffFamily:
    """chi_l(t) = chi(mu t - l): squared partition of unity over unit windows.

    chi is 1 on |x| <= 1/2 - h, supported on |x| < 1/2 + h with
    h = lam_next^(-eps1) / 4; on the edges chi = cos(pi/2 s(u)) so that
    chi^2(x) + chi^2(x - 1) = 1 holds exactly on overlaps.
    """

    def __init__(self, mu: float, eps1: float, lam_next: float,
                 min_overlap: float = 4e-5):
        if mu <= 0:
            raise ValueError("mu must be positive")
        self.mu = float(mu)
        self.eps1 = float(eps1)
        self.lam_next = float(lam_next)
        self.half_edge = 0.25 * self.lam_next ** (-self.eps1)
        overlap_t = 2.0 * self.half_edge / self.mu
        if overlap_t < min_overlap:
            raise ValueError(
                f"cutoff overlap {overlap_t:.3g} is below the resolvable width "
                f"{min_overlap:.3g}")

    def _edge_value(self, x):
        """chi at scaled coordinate x (array), via the even edge profile."""
        x = np.abs(np.asarray(x, dtype=float))
        h = self.half_edge
        out = np.zeros_like(x)
        out[x <= 0.5 - h] = 1.0
        edge = (x > 0.5 - h) & (x < 0.5 + h)
        if edge.any():
            u = (x[edge] - (0.5 - h)) / (2.0 * h)
            out[edge] = np.cos(0.5 * np.pi * smoothstep(u))
        return out

    def _edge_derivative(self, x):
        x = np.asarray(x, dtype=float)
        h = self.half_edge
        ax = np.abs(x)
        out = np.zeros_like(x)
        edge = (ax > 0.5 - h) & (ax < 0.5 + h)
        if edge.any():
            u = (ax[edge] - (0.5 - h)) / (2.0 * h)
            s = smoothstep(u)
            ds = smoothstep_derivative(u) / (2.0 * h)
            out[edge] = -0.5 * np.pi * np.sin(0.5 * np.pi * s) * ds * np.sign(x[edge])
        return out

    def value(self, l: int, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        res = self._edge_value(np.atleast_1d(self.mu * t - l))
        return float(res[0]) if scalar else res

    def derivative(self, l: int, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        res = self.mu * self._edge_derivative(np.atleast_1d(self.mu * t - l))
        return float(res[0]) if scalar else res

    def active_indices(self, t: float):
        """Integer windows with chi_l(t) != 0 (at most two)."""
        x = self.mu * float(t)
        lo = int(np.ceil(x - 0.5 - self.half_edge))
        hi = int(np.floor(x + 0.5 + self.half_edge))
        return [l for l in range(lo, hi + 1) if abs(x - l) < 0.5 + self.half_edge]

    def sum_of_squares(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        tt = np.atleast_1d(t)
        acc = np.zeros_like(tt)
        for offset in range(-2, 3):
            l = np.round(self.mu * tt).astype(int) + offset
            x = self.mu * tt - l
            acc += self._edge_value(x) ** 2
        return float(acc[0]) if scalar else acc

    def slice_time(self, l: int) -> float:
        return l / self.mu

    def window(self, l: int):
        """Support of chi_l in t."""
        w = (0.5 + self.half_edge) / self.mu
        return (l / self.mu - w, l / self.mu + w)


def build_cutoffs(mu: float, eps1: float, lam_next: float,
                  min_overlap: float = 4e-5) -> CutoffFamily:
    return CutoffFamily(mu, eps1, lam_next, min_overlap)


class SeedBump:
    """Plateau bump for the seed stage: 1 on [-1/8, 1/8], supported in [-1/4, 1/4]."""

    PLATEAU = 0.125
    SUPPORT = 0.25

    def value(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        scalar = t.ndim == 0
        tt = np.atleast_1d(t)
        out = np.zeros_like(tt)
        out[tt <= self.PLATEAU] = 1.0
        edge = (tt > self.PLATEAU) & (tt < self.SUPPORT)
        if edge.any():
            u = (tt[edge] - self.PLATEAU) / (self.SUPPORT - self.PLATEAU)
            out[edge] = 1.0 - smoothstep(u)
        return float(out[0]) if scalar else out

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        tt = np.atleast_1d(t)
        at = np.abs(tt)
        out = np.zeros_like(tt)
        edge = (at > self.PLATEAU) & (at < self.SUPPORT)
        if edge.any():
            width = self.SUPPORT - self.PLATEAU
            u = (at[edge] - self.PLATEAU) / width
            out[edge] = -smoothstep_derivative(u) / width * np.sign(tt[edge])
        return float(out[0]) if scalar else out

    def __call__(self, t):
        return self.value(t)
