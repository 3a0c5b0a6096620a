import numpy as np
import pytest

from cilab.grid import GridSpec, VectorField
from cilab.timefield import separable
from cilab.transport import StepCountTooSmall, VelocityModel, flow_map
from cilab.cutoffs import SeedBump


def shear_model(grid, ell=0.25):
    amp = 0.5 * 4 ** (-0.15)
    _, _, x3 = grid.meshgrid()
    shear = VectorField(grid, np.stack([amp * np.cos(4 * x3),
                                        amp * np.sin(4 * x3),
                                        np.zeros_like(x3)]))
    bump = SeedBump()
    vf = separable(grid, "vector", [(bump.value, shear)], (-0.25, 0.25),
                   dterms=[(bump.derivative, shear)])
    return VelocityModel(vf, ell)


def test_zero_velocity_identity(grid32):
    vf = separable(grid32, "vector", [(lambda t: 0.0, VectorField.zero(grid32))],
                   (-1, 1))
    model = VelocityModel(vf, 0.5)
    pts = grid32.points()[:, :500]
    phi, jac = flow_map(model, 1, 12.0, 0.14, pts, substeps=4)
    assert np.abs(phi - pts).max() == 0.0
    assert np.abs(jac - np.eye(3).reshape(3, 3, 1)).max() == 0.0


def test_slice_time_is_identity(grid32):
    model = shear_model(grid32)
    pts = grid32.points()[:, :500]
    phi, jac = flow_map(model, 2, 12.0, 2.0 / 12.0, pts)
    assert np.abs(phi - pts).max() == 0.0
    assert np.abs(jac - np.eye(3).reshape(3, 3, 1)).max() == 0.0


def test_constant_velocity_exact(grid32):
    c = np.array([0.3, -0.2, 0.1])
    cf = VectorField(grid32, np.stack([np.full((32,) * 3, v) for v in c]))
    vf = separable(grid32, "vector", [(lambda t: 1.0, cf)], (-1, 1))
    model = VelocityModel(vf, 0.5)
    pts = grid32.points()[:, :200]
    t, l, mu = 0.21, 2, 12.0
    phi, _ = flow_map(model, l, mu, t, pts, substeps=8)
    expected = pts - c.reshape(3, 1) * (t - l / mu)
    assert np.abs(phi - expected).max() < 1e-12


def test_variational_jacobian_matches_fd(grid32):
    model = shear_model(grid32)
    pts = grid32.points()[:, :300]
    phi, jac = flow_map(model, 2, 12.0, 0.21, pts, substeps=8, check=False)
    eps = 1e-6
    for axis in range(3):
        shifted = pts.copy()
        shifted[axis] += eps
        phi_s, _ = flow_map(model, 2, 12.0, 0.21, shifted, substeps=8, check=False)
        fd = (phi_s - phi) / eps
        assert np.abs(jac[:, axis, :] - fd).max() < 1e-6


def test_step_count_guard(grid32):
    model = shear_model(grid32, ell=0.01)  # below-resolution: unsmoothed seed
    pts = grid32.points()[:, :600]
    with pytest.raises(StepCountTooSmall):
        flow_map(model, 2, 12.0, 0.104, pts, substeps=1)
    phi, _ = flow_map(model, 2, 12.0, 0.104, pts, substeps=24)
    assert np.isfinite(phi).all()


def test_deformation_scale(grid32):
    # |DPhi - Id| stays well under the runtime cap on the cutoff window
    model = shear_model(grid32)
    pts = grid32.points()[:, ::7]
    _, jac = flow_map(model, 2, 12.0, 2.0 / 12.0 + 0.0625, pts, substeps=16)
    dev = jac.copy()
    for a in range(3):
        dev[a, a] -= 1.0
    assert np.abs(dev).max() < 0.2
