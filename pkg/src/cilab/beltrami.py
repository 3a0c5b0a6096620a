"""Beltrami building blocks: frequency families, polarization vectors, and the
positive amplitude functions that decompose a near-identity stress.

Two disjoint 12-member families are drawn from the 24 integer vectors with
|k|^2 = 5.  Each family is symmetric under k -> -k, isotropic
(sum of khat (x) khat = 4 Id) and spans the symmetric 3x3 matrices through
{Id - khat (x) khat}, which makes the amplitude solve a plain 6x6 linear
system with gamma_k(Id) = 1/2 exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .grid import CapacityError, VectorField

SQUARED_MODULUS = 5
_VEC6 = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))


class OutOfBallError(ValueError):
    """Stress outside the certified positivity ball."""


class NegativeCoefficientError(RuntimeError):
    """Amplitude solve produced a nonpositive coefficient inside the certified ball."""


class FamilyInvariantError(RuntimeError):
    """A hard-coded frequency family failed its construction checks."""


def _vec6(mat: np.ndarray) -> np.ndarray:
    return np.array([mat[i, j] for i, j in _VEC6])


def _mat_from_vec6(v: np.ndarray) -> np.ndarray:
    m = np.empty((3, 3))
    for s, (i, j) in enumerate(_VEC6):
        m[i, j] = v[s]
        m[j, i] = v[s]
    return m


def operator_norm(mat: np.ndarray) -> float:
    return float(np.abs(np.linalg.eigvalsh(0.5 * (mat + mat.T))).max())


def _canonical(k) -> tuple:
    for v in k:
        if v > 0:
            return tuple(int(x) for x in k)
        if v < 0:
            return tuple(-int(x) for x in k)
    raise ValueError("zero vector has no canonical representative")


@dataclass(frozen=True)
class FrequencyFamily:
    """One symmetric, isotropic family of wavevectors with polarization data."""

    parity: str
    members: tuple                      # 12 wavevectors, closed under k -> -k
    polarization: dict = field(repr=False)        # k -> A_k (real, shared by +-k)
    complex_polarization: dict = field(repr=False)  # k -> B_k = A_k + i khat x A_k
    solve_matrix: np.ndarray = field(repr=False)  # 6x6 inverse of the span map
    pair_index: dict = field(repr=False)          # k -> row of solve output
    pairs: tuple = ()                   # canonical representatives, one per +-pair
    safe_radius: float = 0.0

    @property
    def modulus(self) -> float:
        return float(np.sqrt(SQUARED_MODULUS))

    def with_radius(self, r0: float) -> "FrequencyFamily":
        return FrequencyFamily(self.parity, self.members, self.polarization,
                               self.complex_polarization, self.solve_matrix,
                               self.pair_index, self.pairs, r0)

    def projector_complement(self, k) -> np.ndarray:
        kv = np.asarray(k, dtype=float)
        khat = kv / np.linalg.norm(kv)
        return np.eye(3) - np.outer(khat, khat)


def _orbit():
    """The 24 integer vectors with |k|^2 = 5 (permutations of (+-1, +-2, 0))."""
    vecs = []
    for zero_axis in range(3):
        others = [a for a in range(3) if a != zero_axis]
        for two_axis in others:
            one_axis = others[0] if others[1] == two_axis else others[1]
            for s2 in (1, -1):
                for s1 in (1, -1):
                    k = [0, 0, 0]
                    k[two_axis] = 2 * s2
                    k[one_axis] = 1 * s1
                    vecs.append(tuple(k))
    return vecs


def _split_orbit():
    """Deterministic 12/12 split; sign classes alternate between the two
    nonzero-axis patterns of each zero-axis so both halves come out isotropic."""
    even, odd = [], []
    for k in _orbit():
        zero_axis = k.index(0)
        others = [a for a in range(3) if a != zero_axis]
        a, b = others
        first_pattern = abs(k[a]) == 2
        same_sign = np.sign(k[a]) == np.sign(k[b])
        take_even = same_sign if first_pattern else not same_sign
        (even if take_even else odd).append(k)
    return tuple(even), tuple(odd)


def _polarizations(members):
    pol, cpol = {}, {}
    for k in members:
        rep = _canonical(k)
        cross = np.array([0.0, rep[2], -rep[1]])  # rep x e1, never zero on this orbit
        a = cross / (np.linalg.norm(cross) * np.sqrt(2.0))
        pol[k] = a
        khat = np.asarray(k, dtype=float) / np.sqrt(SQUARED_MODULUS)
        cpol[k] = a + 1j * np.cross(khat, a)
    return pol, cpol


def _solve_matrix(pairs):
    cols = []
    for k in pairs:
        kv = np.asarray(k, dtype=float)
        khat = kv / np.linalg.norm(kv)
        cols.append(_vec6(np.eye(3) - np.outer(khat, khat)))
    span = np.array(cols).T
    if abs(np.linalg.det(span)) < 1e-12:
        raise FamilyInvariantError("family fails the span condition")
    return np.linalg.inv(span)


def _verify_family(parity, members):
    mem = set(members)
    if len(mem) != 12:
        raise FamilyInvariantError(f"{parity}: expected 12 members")
    iso = np.zeros((3, 3))
    for k in members:
        if tuple(-np.asarray(k)) not in mem:
            raise FamilyInvariantError(f"{parity}: not symmetric under negation")
        if sum(v * v for v in k) != SQUARED_MODULUS:
            raise FamilyInvariantError(f"{parity}: member off the |k|^2 = 5 orbit")
        kv = np.asarray(k, dtype=float)
        iso += np.outer(kv, kv) / SQUARED_MODULUS
    if not np.allclose(iso, 4.0 * np.eye(3), atol=1e-12):
        raise FamilyInvariantError(f"{parity}: family is not isotropic")


def _build_family(parity, members) -> FrequencyFamily:
    _verify_family(parity, members)
    pol, cpol = _polarizations(members)
    for k in members:
        a = pol[k]
        if abs(np.dot(a, k)) > 1e-13 or abs(np.dot(a, a) - 0.5) > 1e-13:
            raise FamilyInvariantError(f"{parity}: polarization invariant broken at {k}")
        if not np.allclose(pol[k], pol[tuple(-np.asarray(k))]):
            raise FamilyInvariantError(f"{parity}: A_k != A_-k at {k}")
    pairs = tuple(sorted({_canonical(k) for k in members}))
    inv = _solve_matrix(pairs)
    pair_index = {}
    for k in members:
        pair_index[k] = pairs.index(_canonical(k))
    fam = FrequencyFamily(parity, tuple(members), pol, cpol, inv, pair_index, pairs)
    return fam.with_radius(certify_radius(fam))


def build_families():
    """The even and odd frequency families, radius-certified at construction."""
    even, odd = _split_orbit()
    fam_e = _build_family("even", even)
    fam_o = _build_family("odd", odd)
    if set(fam_e.members) & set(fam_o.members):
        raise FamilyInvariantError("parity families are not disjoint")
    return fam_e, fam_o


def solve_coefficients(mat: np.ndarray, family: FrequencyFamily) -> np.ndarray:
    """Coefficients c (one per +-pair) with mat = sum_p c_p (Id - khat khat^T)."""
    return family.solve_matrix @ _vec6(0.5 * (mat + mat.T))


def stress_amplitudes(mat: np.ndarray, family: FrequencyFamily) -> dict:
    """gamma_k(mat) = sqrt(c_k) for |mat - Id| inside the certified ball."""
    dist = operator_norm(np.asarray(mat, dtype=float) - np.eye(3))
    if dist >= family.safe_radius:
        raise OutOfBallError(
            f"|R - Id| = {dist:.6g} >= certified radius {family.safe_radius:.6g}")
    c = solve_coefficients(mat, family)
    if np.any(c <= 0.0):
        raise NegativeCoefficientError(
            "nonpositive amplitude inside the certified ball; radius certificate is wrong")
    return {k: float(np.sqrt(c[family.pair_index[k]])) for k in family.members}


def reconstruct(gamma: dict, family: FrequencyFamily) -> np.ndarray:
    """0.5 * sum_k gamma_k^2 (Id - khat khat^T); inverse of stress_amplitudes."""
    acc = np.zeros((3, 3))
    for k, g in gamma.items():
        acc += 0.5 * g * g * family.projector_complement(k)
    return acc


def _halton(index: int, base: int) -> float:
    out, f = 0.0, 1.0
    i = index
    while i > 0:
        f /= base
        out += f * (i % base)
        i //= base
    return out


def _direction_sample(count: int = 500):
    """Deterministic quasi-random directions on the operator-norm unit sphere."""
    bases = (2, 3, 5, 7, 11, 13)
    dirs = []
    i = 1
    while len(dirs) < count:
        v = np.array([2.0 * _halton(i, b) - 1.0 for b in bases])
        i += 1
        mat = _mat_from_vec6(v)
        nrm = operator_norm(mat)
        if nrm < 1e-3:
            continue
        dirs.append(mat / nrm)
    return dirs


def certify_radius(family: FrequencyFamily, samples: int = 500,
                   safety: float = 0.9, iterations: int = 60) -> float:
    """Largest r (bisected per sampled direction, then shrunk by the safety
    factor) with all coefficients positive on |R - Id| = r."""
    worst = 2.0
    for direction in _direction_sample(samples):
        lo, hi = 0.0, 2.0
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            c = solve_coefficients(np.eye(3) + mid * direction, family)
            if np.all(c > 0.0):
                lo = mid
            else:
                hi = mid
        worst = min(worst, lo)
    r0 = safety * worst
    if r0 < 1e-3:
        raise FamilyInvariantError(f"certified radius {r0:.3g} below usability floor")
    return r0


def _check_conjugate_symmetry(amplitudes: dict, family: FrequencyFamily):
    for k in family.members:
        a = complex(amplitudes.get(k, 0.0))
        b = complex(amplitudes.get(tuple(-np.asarray(k)), 0.0))
        if abs(np.conj(a) - b) > 1e-13 * max(1.0, abs(a)):
            raise ValueError(f"amplitudes are not conjugate-symmetric at {k}")


def beltrami_field(amplitudes: dict, family: FrequencyFamily, scale: int,
                   grid) -> VectorField:
    """W(x) = sum_k a_k B_k exp(i scale k.x), real and divergence-free.

    Accumulated as a complex sum so the realness defect is observable; the
    imaginary residue is required to stay below 1e-13 of the field size.
    """
    if scale < 1 or int(scale) != scale:
        raise ValueError("scale must be a positive integer")
    if 2 * scale > grid.max_mode - 1:
        raise CapacityError(f"scale {scale} puts modes past the grid Nyquist range")
    _check_conjugate_symmetry(amplitudes, family)
    x1, x2, x3 = grid.meshgrid()
    acc = np.zeros((3,) + x1.shape, dtype=complex)
    for k in family.members:
        a = complex(amplitudes.get(k, 0.0))
        if a == 0.0:
            continue
        theta = scale * (k[0] * x1 + k[1] * x2 + k[2] * x3)
        phase = np.cos(theta) + 1j * np.sin(theta)
        b = family.complex_polarization[k]
        for comp in range(3):
            acc[comp] += a * b[comp] * phase
    resid = float(np.abs(acc.imag).max())
    size = float(np.abs(acc.real).max())
    if resid > 1e-13 * max(size, 1.0):
        raise ValueError(f"imaginary residue {resid:.3g} exceeds tolerance")
    return VectorField(grid, np.ascontiguousarray(acc.real), check=False)


def beltrami_average(amplitudes: dict, family: FrequencyFamily) -> np.ndarray:
    """Closed-form space average of W (x) W: 0.5 sum |a_k|^2 (Id - khat khat^T)."""
    acc = np.zeros((3, 3))
    for k in family.members:
        a = complex(amplitudes.get(k, 0.0))
        if a == 0.0:
            continue
        acc += 0.5 * abs(a) ** 2 * family.projector_complement(k)
    return acc


def export_family_json(family: FrequencyFamily) -> str:
    payload = {
        "parity": family.parity,
        "squared_modulus": SQUARED_MODULUS,
        "members": [list(k) for k in family.members],
        "polarization": {",".join(map(str, k)): list(map(float, family.polarization[k]))
                         for k in family.members},
        "safe_radius": family.safe_radius,
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def verify_family_json(text: str) -> FrequencyFamily:
    """Rebuild a family from its JSON export and re-run every invariant."""
    payload = json.loads(text)
    members = tuple(tuple(k) for k in payload["members"])
    fam = _build_family(payload["parity"], members)
    for key, a in payload["polarization"].items():
        k = tuple(int(v) for v in key.split(","))
        if not np.allclose(fam.polarization[k], np.asarray(a), atol=1e-12):
            raise FamilyInvariantError(f"polarization mismatch at {k}")
    if abs(fam.safe_radius - payload["safe_radius"]) > 1e-9:
        raise FamilyInvariantError("safe radius mismatch")
    return fam
