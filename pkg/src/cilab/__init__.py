"""Numerical laboratory for iterated oscillatory constructions of weak Euler
flows on the periodic 3-torus: spectral field calculus, Beltrami frequency
families, an inverse divergence operator, the inductive perturbation step,
stage parameter ledgers, and measurement/reporting tools."""

__version__ = "0.1.0"

from .beltrami import build_families                                    # noqa: F401
from .grid import GridSpec, ScalarField, TensorField, VectorField       # noqa: F401
from .iteration import EulerReynoldsTriple, initial_triple, iterate     # noqa: F401
from .parameters import make_schedule                                   # noqa: F401
