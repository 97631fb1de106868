"""hodgecloud: geometric and topological invariants from finite point clouds.

Reconstructs tangent bundles, extrinsic curvature, Hodge spectra on k-forms,
Betti numbers, Pontryagin numbers, and the cup-product structure constants of
a smooth submanifold of R^d from uniform samples, and validates the estimators
against a zoo of analytic test manifolds.
"""

__version__ = "0.1.0"

from hodgecloud import errors  # noqa: F401
