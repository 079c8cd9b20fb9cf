"""Exact solver behind the same fit/predict surface as :class:`NPLICRegressor`."""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from nplic._validation import check_alphas, check_features
from nplic.exact import DEFAULT_TOL, solve_c_exact_batch
from nplic.geometry import MeshType, angles_to_normal, canonical_cell
from nplic.model import LAYOUTS, NetworkConfig


class ExactPLIC(RegressorMixin, BaseEstimator):
    """Root-finding PLIC on a canonical cell.

    ``predict`` takes feature rows in the network layout of ``mesh_type``
    (``(alpha0, theta)`` in 2D, ``(alpha0, phi, theta)`` in 3D) so it can be
    scored side by side with a trained surrogate. Nothing is learned; ``fit``
    only validates the input width.
    """

    def __init__(self, mesh_type="square", tol=DEFAULT_TOL):
        self.mesh_type = mesh_type
        self.tol = tol

    def _layout(self):
        return NetworkConfig.for_meshes(self.mesh_type, 0).layout

    def fit(self, X, y=None):
        self.mesh_type_ = MeshType.parse(self.mesh_type)
        self.n_features_in_ = check_features(X, len(LAYOUTS[self._layout()])).shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "mesh_type_")
        X = check_features(X, self.n_features_in_)
        cols = dict(zip(LAYOUTS[self._layout()], X.T))
        if self.mesh_type_.dim == 2:
            normals = angles_to_normal(cols["theta"])
        else:
            normals = angles_to_normal(cols["theta"], cols["phi"])
        return self.solve(normals, cols["alpha0"])

    def solve(self, normals, alphas):
        """C for raw (normal, alpha0) queries."""
        mt = getattr(self, "mesh_type_", None) or MeshType.parse(self.mesh_type)
        return solve_c_exact_batch(canonical_cell(mt), np.atleast_2d(normals), check_alphas(alphas), self.tol)
