"""scikit-learn compatible wrappers around the network trainers.

``MlpRegressor`` fits value approximators, ``VertexPolicyRegressor`` fits a
softmax network over the vertices of a polytope so that every prediction is
a convex combination of those vertices. Both support ``get_params``,
``set_params``, ``clone`` and pipelines.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .geometry import VPolytope, barycentric_coords
from .network import input_jacobian, predict
from .pipeline import Dataset, TrainConfig, fit_regression


def _train_config(est):
    return TrainConfig(
        method=est.solver,
        max_epochs=est.max_epochs,
        target_mse=est.target_mse,
        validation_fraction=est.validation_fraction,
        seed=est.random_state,
        step=est.learning_rate,
        patience=est.patience,
    )


class MlpRegressor(RegressorMixin, BaseEstimator):
    """tanh MLP fitted by Levenberg-Marquardt (``solver="lm"``) or gradient descent."""

    def __init__(self, hidden_layer_sizes=(50,), solver="lm", max_epochs=200, target_mse=1e-8,
                 validation_fraction=0.2, patience=20, learning_rate=1e-2, random_state=0):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.solver = solver
        self.max_epochs = max_epochs
        self.target_mse = target_mse
        self.validation_fraction = validation_fraction
        self.patience = patience
        self.learning_rate = learning_rate
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, multi_output=True, y_numeric=True)
        self._y_1d = y.ndim == 1
        Y = y.reshape(len(y), -1)
        sizes = [X.shape[1], *self.hidden_layer_sizes, Y.shape[1]]
        self.net_, self.train_mse_, self.val_mse_ = fit_regression(
            sizes, "linear", Dataset(X, Y), _train_config(self)
        )
        self.n_features_in_ = X.shape[1]
        return self

    def _check(self, X):
        check_is_fitted(self, "net_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X

    def predict(self, X):
        X = self._check(X)
        out = predict(self.net_, X)
        return out[:, 0] if self._y_1d else out

    def input_gradient(self, X):
        """Gradient of a single-output fit with respect to each row of ``X``."""
        X = self._check(X)
        if self.net_.n_out != 1:
            raise ValueError("input_gradient needs a single-output fit")
        return np.array([input_jacobian(self.net_, x)[0] for x in X])


class VertexPolicyRegressor(RegressorMixin, BaseEstimator):
    """Maps states to convex combinations of fixed vertices.

    ``fit(X, U)`` converts every target input to barycentric weights and fits
    a softmax network to them with a squared loss; ``predict`` therefore
    always returns points of the convex hull of ``vertices``.
    """

    def __init__(self, vertices=None, hidden_layer_sizes=(50,), coords="auto", solver="lm",
                 max_epochs=200, target_mse=1e-8, validation_fraction=0.2, patience=20,
                 learning_rate=1e-2, random_state=0):
        self.vertices = vertices
        self.hidden_layer_sizes = hidden_layer_sizes
        self.coords = coords
        self.solver = solver
        self.max_epochs = max_epochs
        self.target_mse = target_mse
        self.validation_fraction = validation_fraction
        self.patience = patience
        self.learning_rate = learning_rate
        self.random_state = random_state

    def _coords_method(self, V):
        if self.coords != "auto":
            return self.coords
        return "wachspress" if V.n == 2 and V.n_v >= 3 else "frank_wolfe"

    def fit(self, X, U):
        if self.vertices is None:
            raise ValueError("vertices must be given")
        X, U = check_X_y(X, U, multi_output=True, y_numeric=True)
        V = VPolytope(self.vertices)
        U = U.reshape(len(U), -1)
        if U.shape[1] != V.n:
            raise ValueError(f"targets have dimension {U.shape[1]}, vertices {V.n}")
        method = self._coords_method(V)
        lam = np.array([barycentric_coords(V, u, method=method) for u in U])
        return self.fit_weights(X, lam)

    def fit_weights(self, X, lam):
        """Fit directly to barycentric weight targets."""
        X, lam = check_X_y(X, lam, multi_output=True, y_numeric=True)
        self.V_ = VPolytope(self.vertices)
        sizes = [X.shape[1], *self.hidden_layer_sizes, self.V_.n_v]
        self.net_, self.train_mse_, self.val_mse_ = fit_regression(
            sizes, "softmax", Dataset(X, lam), _train_config(self)
        )
        self.n_features_in_ = X.shape[1]
        return self

    def predict_weights(self, X):
        check_is_fitted(self, "net_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return predict(self.net_, X)

    def predict(self, X):
        return self.predict_weights(X) @ self.V_.vertices
