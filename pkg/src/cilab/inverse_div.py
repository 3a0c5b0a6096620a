"""Order -1 inverse of the divergence on mean-free vector fields.

For each mode k != 0 the output tensor is assembled from the closed-form
algebra of u = -v/|k|^2, its Leray projection and gradient symmetrisations;
the k = 0 mode is dropped, matching the subtraction of the space average.
The result is symmetric by storage, trace-free per mode, and satisfies
div o R = Id - mean exactly on the grid.
"""

from __future__ import annotations

import csv
import io

import numpy as np

from .grid import (CapacityError, ScalarField, TensorField, VectorField,
                   SYM_SLOTS, _phys_of, _spec_of)
from .norms import holder_norm


def inverse_divergence(v: VectorField) -> TensorField:
    g = v.grid
    k1, k2, k3 = g.wavenumbers()
    kvec = (k1, k2, k3)
    spec = np.stack([_spec_of(v.data[a]) for a in range(3)])
    k2sum = k1 ** 2 + k2 ** 2 + k3 ** 2
    nonzero = k2sum > 0
    inv_k2 = np.where(nonzero, 1.0 / np.where(nonzero, k2sum, 1.0), 0.0)

    u = -spec * inv_k2                       # Laplace solve, zero mean
    kdotu = k1 * u[0] + k2 * u[1] + k3 * u[2]
    pu = np.empty_like(u)
    for a in range(3):
        pu[a] = u[a] - kvec[a] * kdotu * inv_k2
        pu[a][~nonzero] = 0.0
    div_u = 1j * kdotu

    out = np.empty((6,) + v.data.shape[1:])
    for s, (i, j) in enumerate(SYM_SLOTS):
        sym_pu = 1j * (kvec[j] * pu[i] + kvec[i] * pu[j])
        sym_u = 1j * (kvec[j] * u[i] + kvec[i] * u[j])
        entry = 0.25 * sym_pu + 0.75 * sym_u
        if i == j:
            entry = entry - 0.5 * div_u
        out[s] = _phys_of(entry, g.n)
    return TensorField(g, out, check=False)


class OscillatoryProbe:
    """Amplitude-modulated plane wave a(x) exp(i lam k.x) for scaling probes."""

    def __init__(self, amplitude: VectorField, k, lam: int, alpha: float):
        if not 0.0 < alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        self.amplitude = amplitude
        self.k = tuple(int(v) for v in k)
        if self.k == (0, 0, 0):
            raise ValueError("direction k must be nonzero")
        self.lam = int(lam)
        self.alpha = float(alpha)

    def field(self, lam: int) -> VectorField:
        g = self.amplitude.grid
        x1, x2, x3 = g.meshgrid()
        theta = lam * (self.k[0] * x1 + self.k[1] * x2 + self.k[2] * x3)
        data = self.amplitude.data * np.cos(theta)
        return VectorField(g, data, check=False)


def _check_capacity(probe: OscillatoryProbe, lams):
    g = probe.amplitude.grid
    kmax = max(abs(v) for v in probe.k)
    need = max(lams) * kmax + 4
    if need > g.max_mode - 1:
        raise CapacityError(f"probe frequencies up to {need} exceed the grid range")


def schauder_scaling_probe(probe: OscillatoryProbe, doublings: int = 2):
    """Measured ||R(F)||_alpha across lam, 2 lam, 4 lam with consecutive ratios."""
    lams = [probe.lam * 2 ** j for j in range(doublings + 1)]
    _check_capacity(probe, lams)
    rows = []
    prev = None
    for lam in lams:
        norm = holder_norm(inverse_divergence(probe.field(lam)), probe.alpha)
        ratio = norm / prev if prev else float("nan")
        rows.append({"lambda": lam, "norm_alpha": norm, "ratio": ratio})
        prev = norm
    return rows


def commutator_scaling_probe(b: ScalarField, probe: OscillatoryProbe,
                             doublings: int = 2):
    """Measured ||b R(F) - R(b F)||_alpha across the same doubling ladder."""
    lams = [probe.lam * 2 ** j for j in range(doublings + 1)]
    _check_capacity(probe, lams)
    rows = []
    prev = None
    for lam in lams:
        f = probe.field(lam)
        rf = inverse_divergence(f)
        bf = VectorField(f.grid, f.data * b.data, check=False)
        comm = TensorField(f.grid, rf.data * b.data - inverse_divergence(bf).data,
                           check=False)
        norm = holder_norm(comm, probe.alpha)
        ratio = norm / prev if prev else float("nan")
        rows.append({"lambda": lam, "norm_alpha": norm, "ratio": ratio})
        prev = norm
    return rows


def probe_table_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["lambda", "norm_alpha", "ratio"])
    for r in rows:
        writer.writerow([r["lambda"], f"{r['norm_alpha']:.17g}", f"{r['ratio']:.17g}"])
    return buf.getvalue()
