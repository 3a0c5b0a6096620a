"""Periodic scalar/vector/symmetric-tensor fields on the 3-torus with spectral calculus.

All fields live on a uniform n^3 lattice over [0, 2*pi)^3 and are stored as
real float64 samples indexed [i1, i2, i3].  Derivatives, projections and
inverse operators act on the trigonometric interpolant, so they are exact for
band-limited data.  Symmetric tensors use 6-component storage in the order
(11, 22, 33, 12, 13, 23).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi

# storage order for symmetric 3x3 tensors
SYM_SLOTS = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))
SYM_INDEX = {(0, 0): 0, (1, 1): 1, (2, 2): 2,
             (0, 1): 3, (1, 0): 3, (0, 2): 4, (2, 0): 4, (1, 2): 5, (2, 1): 5}


class CapacityError(ValueError):
    """Requested frequencies do not fit on the grid."""


@dataclass(frozen=True)
class GridSpec:
    """Cubic periodic grid: n points per axis, period 2*pi, dealias fraction for products."""

    n: int
    dealias_fraction: float = 2.0 / 3.0

    def __post_init__(self):
        if self.n < 8 or (self.n & (self.n - 1)) != 0:
            raise ValueError(f"grid size must be a power of two >= 8, got {self.n}")
        if not 0.0 < self.dealias_fraction <= 1.0:
            raise ValueError("dealias_fraction must lie in (0, 1]")

    @property
    def length(self) -> float:
        return TWO_PI

    @property
    def spacing(self) -> float:
        return TWO_PI / self.n

    @property
    def max_mode(self) -> int:
        return self.n // 2

    def axes(self):
        x = np.arange(self.n) * self.spacing
        return x, x, x

    def meshgrid(self):
        x1, x2, x3 = self.axes()
        return np.meshgrid(x1, x2, x3, indexing="ij")

    def points(self) -> np.ndarray:
        """All lattice points as a (3, n^3) array."""
        g = self.meshgrid()
        return np.stack([c.ravel() for c in g])

    def wavenumbers(self):
        """Integer frequencies (k1, k2, k3) matching rfftn layout on axes (0, 1, 2)."""
        n = self.n
        k = np.fft.fftfreq(n, d=1.0 / n)
        kr = np.arange(n // 2 + 1, dtype=float)
        return (k.reshape(-1, 1, 1), k.reshape(1, -1, 1), kr.reshape(1, 1, -1))

    def require_modes(self, mmax: float, context: str = "operation"):
        if mmax > self.max_mode - 1:
            raise CapacityError(
                f"{context} needs modes up to {mmax:.1f} but the {self.n}^3 grid "
                f"resolves only |k| <= {self.max_mode - 1}")


def _check_finite(a: np.ndarray, what: str):
    if not np.isfinite(a).all():
        raise ValueError(f"{what} contains non-finite values")


class _Field:
    _ncomp = None

    def __init__(self, grid: GridSpec, data: np.ndarray, check: bool = True):
        data = np.asarray(data, dtype=np.float64)
        if self._ncomp is None:
            expected = (grid.n,) * 3
        else:
            expected = (self._ncomp,) + (grid.n,) * 3
        if data.shape != expected:
            raise ValueError(f"expected shape {expected}, got {data.shape}")
        if check:
            _check_finite(data, type(self).__name__)
        data.setflags(write=False)
        self.grid = grid
        self.data = data
        self._spec = None

    def spectrum(self) -> np.ndarray:
        """Cached rfftn coefficients (normalised so coefficient = Fourier coefficient)."""
        if self._spec is None:
            self._spec = np.fft.rfftn(self.data, axes=self._axes()) / self.grid.n ** 3
        return self._spec

    def _axes(self):
        return (0, 1, 2) if self._ncomp is None else (1, 2, 3)

    def __add__(self, other):
        return type(self)(self.grid, self.data + other.data, check=False)

    def __sub__(self, other):
        return type(self)(self.grid, self.data - other.data, check=False)

    def __mul__(self, c: float):
        return type(self)(self.grid, self.data * c, check=False)

    __rmul__ = __mul__

    def __neg__(self):
        return type(self)(self.grid, -self.data, check=False)


class ScalarField(_Field):
    _ncomp = None

    @classmethod
    def zero(cls, grid):
        return cls(grid, np.zeros((grid.n,) * 3), check=False)

    def mean(self) -> float:
        return float(self.data.mean())

    def c0(self) -> float:
        return float(np.abs(self.data).max())


class VectorField(_Field):
    _ncomp = 3

    @classmethod
    def zero(cls, grid):
        return cls(grid, np.zeros((3,) + (grid.n,) * 3), check=False)

    def component(self, i: int) -> ScalarField:
        return ScalarField(self.grid, self.data[i], check=False)

    def mean(self) -> np.ndarray:
        return self.data.mean(axis=(1, 2, 3))

    def c0(self) -> float:
        """Sup of the pointwise Euclidean norm."""
        return float(np.sqrt((self.data ** 2).sum(axis=0)).max())


class TensorField(_Field):
    """Symmetric 3x3 tensor field, 6-slot storage (11, 22, 33, 12, 13, 23)."""

    _ncomp = 6

    @classmethod
    def zero(cls, grid):
        return cls(grid, np.zeros((6,) + (grid.n,) * 3), check=False)

    @classmethod
    def from_constant(cls, grid, mat: np.ndarray):
        mat = np.asarray(mat, dtype=float)
        if not np.allclose(mat, mat.T, atol=1e-14):
            raise ValueError("constant tensor must be symmetric")
        data = np.empty((6,) + (grid.n,) * 3)
        for s, (i, j) in enumerate(SYM_SLOTS):
            data[s] = mat[i, j]
        return cls(grid, data, check=False)

    def slot(self, i: int, j: int) -> np.ndarray:
        return self.data[SYM_INDEX[(i, j)]]

    def trace(self) -> ScalarField:
        return ScalarField(self.grid, self.data[0] + self.data[1] + self.data[2], check=False)

    def deviatoric(self) -> "TensorField":
        t = (self.data[0] + self.data[1] + self.data[2]) / 3.0
        out = self.data.copy()
        out[0] -= t
        out[1] -= t
        out[2] -= t
        return TensorField(self.grid, out, check=False)

    def mean(self) -> np.ndarray:
        m6 = self.data.mean(axis=(1, 2, 3))
        mat = np.empty((3, 3))
        for s, (i, j) in enumerate(SYM_SLOTS):
            mat[i, j] = m6[s]
            mat[j, i] = m6[s]
        return mat

    def c0(self) -> float:
        """Sup over x of the matrix operator norm (largest |eigenvalue|)."""
        return sym_opnorm_sup(self.data)


def sym_opnorm_sup(data6: np.ndarray, chunk: int = 2 ** 21) -> float:
    """Sup of the pointwise operator norm of a 6-slot field, chunked so the
    eigenvalue temporaries stay flat on large grids."""
    flat = data6.reshape(6, -1)
    worst = 0.0
    for start in range(0, flat.shape[1], chunk):
        block = flat[:, start:start + chunk]
        worst = max(worst, float(np.abs(sym_eigenvalues(block)).max()))
    return worst


def sym_eigenvalues(data6: np.ndarray) -> np.ndarray:
    """Eigenvalues of a symmetric-6-slot tensor array, shape (3,) + data6.shape[1:].

    Closed-form (trigonometric) solution, vectorised; accurate to ~1e-14 for
    the O(1) matrices this code handles.
    """
    a11, a22, a33, a12, a13, a23 = [np.asarray(c, dtype=float) for c in data6]
    q = (a11 + a22 + a33) / 3.0
    b11, b22, b33 = a11 - q, a22 - q, a33 - q
    p2 = (b11 ** 2 + b22 ** 2 + b33 ** 2) / 6.0 + (a12 ** 2 + a13 ** 2 + a23 ** 2) / 3.0
    p = np.sqrt(np.maximum(p2, 0.0))
    # det(B)/2 with B the deviatoric part
    detb = (b11 * (b22 * b33 - a23 ** 2)
            - a12 * (a12 * b33 - a23 * a13)
            + a13 * (a12 * a23 - b22 * a13))
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(p > 0.0, detb / (2.0 * np.where(p > 0.0, p, 1.0) ** 3), 0.0)
    r = np.clip(r, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    e1 = q + 2.0 * p * np.cos(phi)
    e3 = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    e2 = 3.0 * q - e1 - e3
    return np.stack([e1, e2, e3])


# ---------------------------------------------------------------------------
# spectral calculus


def _spec_of(values: np.ndarray) -> np.ndarray:
    return np.fft.rfftn(values, axes=(0, 1, 2))


def _phys_of(spec: np.ndarray, n: int) -> np.ndarray:
    return np.fft.irfftn(spec, s=(n, n, n), axes=(0, 1, 2))


def _derivative_multiplier(grid: GridSpec, axis: int, order: int) -> np.ndarray:
    k1, k2, k3 = grid.wavenumbers()
    k = (k1, k2, k3)[axis]
    if order % 2 == 1:
        # zero the Nyquist plane so odd derivatives of real data stay real
        k = k.copy()
        k[k == -grid.max_mode] = 0.0
    return (1j * k) ** order


def spectral_derivative(f: ScalarField, axis: int, order: int = 1) -> ScalarField:
    """Exact derivative of the trigonometric interpolant along axis (0, 1 or 2)."""
    if axis not in (0, 1, 2):
        raise ValueError("axis must be 0, 1 or 2")
    if order < 0:
        raise ValueError("order must be nonnegative")
    if order == 0:
        return f
    if order * np.log(float(f.grid.max_mode)) > 690.0:
        raise CapacityError(f"derivative order {order} overflows spectral multipliers")
    spec = _spec_of(f.data) * _derivative_multiplier(f.grid, axis, order)
    return ScalarField(f.grid, _phys_of(spec, f.grid.n), check=False)


def gradient(f: ScalarField) -> VectorField:
    spec = _spec_of(f.data)
    out = np.empty((3,) + f.data.shape)
    for a in range(3):
        out[a] = _phys_of(spec * _derivative_multiplier(f.grid, a, 1), f.grid.n)
    return VectorField(f.grid, out, check=False)


def divergence(u):
    """Divergence: VectorField -> ScalarField, TensorField -> VectorField (row divergence)."""
    if isinstance(u, VectorField):
        acc = np.zeros(u.data.shape[1:])
        for a in range(3):
            spec = _spec_of(u.data[a]) * _derivative_multiplier(u.grid, a, 1)
            acc += _phys_of(spec, u.grid.n)
        return ScalarField(u.grid, acc, check=False)
    if isinstance(u, TensorField):
        out = np.zeros((3,) + u.data.shape[1:])
        for i in range(3):
            for j in range(3):
                spec = _spec_of(u.slot(i, j)) * _derivative_multiplier(u.grid, j, 1)
                out[i] += _phys_of(spec, u.grid.n)
        return VectorField(u.grid, out, check=False)
    raise TypeError("divergence expects a VectorField or TensorField")


def curl(u: VectorField) -> VectorField:
    g = u.grid
    spec = [_spec_of(u.data[a]) for a in range(3)]
    d = [_derivative_multiplier(g, a, 1) for a in range(3)]
    out = np.empty_like(u.data)
    out[0] = _phys_of(d[1] * spec[2] - d[2] * spec[1], g.n)
    out[1] = _phys_of(d[2] * spec[0] - d[0] * spec[2], g.n)
    out[2] = _phys_of(d[0] * spec[1] - d[1] * spec[0], g.n)
    return VectorField(g, out, check=False)


def vector_gradient(u: VectorField) -> np.ndarray:
    """Jacobian entries J[i, j] = d u_i / d x_j as a (3, 3, n, n, n) array."""
    g = u.grid
    out = np.empty((3, 3) + u.data.shape[1:])
    for i in range(3):
        spec = _spec_of(u.data[i])
        for j in range(3):
            out[i, j] = _phys_of(spec * _derivative_multiplier(g, j, 1), g.n)
    return out


def leray_project(u: VectorField) -> VectorField:
    """Projection onto divergence-free fields with zero mean (per-mode Id - khat khat^T)."""
    g = u.grid
    k1, k2, k3 = g.wavenumbers()
    spec = np.stack([_spec_of(u.data[a]) for a in range(3)])
    k2sum = k1 ** 2 + k2 ** 2 + k3 ** 2
    inv = np.where(k2sum > 0, 1.0 / np.where(k2sum > 0, k2sum, 1.0), 0.0)
    kdot = k1 * spec[0] + k2 * spec[1] + k3 * spec[2]
    out = np.empty_like(u.data)
    for a, ka in enumerate((k1, k2, k3)):
        proj = spec[a] - ka * kdot * inv
        out[a] = _phys_of(proj, g.n)
    out -= out.mean(axis=(1, 2, 3), keepdims=True)
    return VectorField(g, out, check=False)


def low_pass(field, cutoff: float):
    """Keep spectral modes with max_i |k_i| < cutoff (sharp truncation)."""
    g = field.grid
    k1, k2, k3 = g.wavenumbers()
    mask = (np.abs(k1) < cutoff) & (np.abs(k2) < cutoff) & (np.abs(k3) < cutoff)
    if isinstance(field, ScalarField):
        return ScalarField(g, _phys_of(_spec_of(field.data) * mask, g.n), check=False)
    out = np.empty_like(field.data)
    for c in range(field.data.shape[0]):
        out[c] = _phys_of(_spec_of(field.data[c]) * mask, g.n)
    return type(field)(g, out, check=False)


def spectral_band(field, rel_tol: float = 1e-13) -> int:
    """Largest max_i |k_i| carrying a coefficient above rel_tol * max coefficient."""
    comps = field.data if field.data.ndim == 4 else field.data[None]
    g = field.grid
    k1, k2, k3 = g.wavenumbers()
    kinf = np.maximum(np.abs(k1), np.maximum(np.abs(k2), np.abs(k3)))
    band = 0
    for c in comps:
        spec = np.abs(_spec_of(c))
        m = spec.max()
        if m == 0.0:
            continue
        active = kinf[spec > rel_tol * m]
        if active.size:
            band = max(band, int(active.max()))
    return band


# ---------------------------------------------------------------------------
# pointwise algebra (products are formed on the grid; callers that need
# alias-free products of near-full-band data use dealiased_product)


def multiply(f: ScalarField, g: ScalarField) -> ScalarField:
    return ScalarField(f.grid, f.data * g.data, check=False)


def dot(u: VectorField, v: VectorField) -> ScalarField:
    return ScalarField(u.grid, (u.data * v.data).sum(axis=0), check=False)


def outer(u: VectorField, v: VectorField) -> TensorField:
    """Symmetrised outer product (u (x) v + v (x) u) / 2 in 6-slot storage."""
    d = np.empty((6,) + u.data.shape[1:])
    for s, (i, j) in enumerate(SYM_SLOTS):
        d[s] = 0.5 * (u.data[i] * v.data[j] + u.data[j] * v.data[i])
    return TensorField(u.grid, d, check=False)


def tensor_apply(t: TensorField, v: VectorField) -> VectorField:
    out = np.zeros((3,) + v.data.shape[1:])
    for i in range(3):
        for j in range(3):
            out[i] += t.slot(i, j) * v.data[j]
    return VectorField(v.grid, out, check=False)


def advect(v: VectorField, w: VectorField) -> VectorField:
    """(v . grad) w computed with spectral gradients and pointwise products."""
    g = w.grid
    out = np.zeros_like(w.data)
    for i in range(3):
        spec = _spec_of(w.data[i])
        for j in range(3):
            dj = _phys_of(spec * _derivative_multiplier(g, j, 1), g.n)
            out[i] += v.data[j] * dj
    return VectorField(g, out, check=False)


def dealiased_product(f: ScalarField, g: ScalarField) -> ScalarField:
    """Pointwise product evaluated on a zero-padded grid so retained modes are alias-free.

    The padded size is ceil(n / dealias_fraction) rounded up to even, i.e. the
    3/2 rule for the default fraction 2/3.
    """
    grid = f.grid
    n = grid.n
    m = int(np.ceil(n / grid.dealias_fraction))
    m += m % 2
    fa = _pad_spectrum(f.spectrum(), n, m)
    ga = _pad_spectrum(g.spectrum(), n, m)
    fpad = np.fft.irfftn(fa, s=(m, m, m), axes=(0, 1, 2)) * m ** 3
    gpad = np.fft.irfftn(ga, s=(m, m, m), axes=(0, 1, 2)) * m ** 3
    prod_spec = np.fft.rfftn(fpad * gpad, axes=(0, 1, 2)) / m ** 3
    out_spec = _crop_spectrum(prod_spec, m, n)
    return ScalarField(grid, np.fft.irfftn(out_spec, s=(n, n, n), axes=(0, 1, 2)) * n ** 3,
                       check=False)


def _pad_spectrum(spec: np.ndarray, n: int, m: int) -> np.ndarray:
    out = np.zeros((m, m, m // 2 + 1), dtype=complex)
    h = n // 2
    sl = [slice(0, h), slice(m - h, m)]
    src = [slice(0, h), slice(n - h, n)]
    for a in range(2):
        for b in range(2):
            out[sl[a], sl[b], :h] = spec[src[a], src[b], :h]
    return out


def _crop_spectrum(spec: np.ndarray, m: int, n: int) -> np.ndarray:
    out = np.zeros((n, n, n // 2 + 1), dtype=complex)
    h = n // 2
    sl = [slice(0, h), slice(m - h, m)]
    dst = [slice(0, h), slice(n - h, n)]
    for a in range(2):
        for b in range(2):
            out[dst[a], dst[b], :h] = spec[sl[a], sl[b], :h]
    return out


def energy(v: VectorField) -> float:
    """Kinetic energy: half the integral of |v|^2 over the torus (exact for trig data)."""
    return 0.5 * float((v.data ** 2).sum(axis=0).mean()) * TWO_PI ** 3
