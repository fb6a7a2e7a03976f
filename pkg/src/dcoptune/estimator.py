"""Scikit-learn estimator facade over the tuning pipeline.

X rows are per-bus active demand profiles, y rows the machine setpoints
a full AC solve produced for them.  fit() tunes the DC model so that
predict(X) tracks y.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .dcopf import solve_dcopf
from .network import NetworkModel
from .scenarios import Label, Scenario
from .training import TrainConfig, train


class DispatchTuner(BaseEstimator, RegressorMixin):
    """Tunes flow coefficients and bias terms against labelled dispatches.

    Parameters mirror TrainConfig; `network` carries the grid the demand
    columns refer to.  Everything is validated in fit, per estimator
    convention.
    """

    def __init__(self, network: NetworkModel = None, init: str = "cold",
                 cold_mode: str = "susceptance", tol: float = 1e-6,
                 max_iter: int = 100, cg_max_iter: int = 12,
                 act_tol: float = 1e-7, qp_tol: float = 1e-9):
        self.network = network
        self.init = init
        self.cold_mode = cold_mode
        self.tol = tol
        self.max_iter = max_iter
        self.cg_max_iter = cg_max_iter
        self.act_tol = act_tol
        self.qp_tol = qp_tol

    def _check_network(self) -> NetworkModel:
        if self.network is None:
            raise ValueError("network must be set before fit or predict")
        return self.network

    def _config(self) -> TrainConfig:
        return TrainConfig(init=self.init, cold_mode=self.cold_mode,
                           tol=self.tol, max_iter=self.max_iter,
                           cg_max_iter=self.cg_max_iter,
                           act_tol=self.act_tol, qp_tol=self.qp_tol)

    def _scenarios(self, X: np.ndarray) -> list[Scenario]:
        net = self._check_network()
        if X.shape[1] != net.n_bus:
            raise ValueError(f"X has {X.shape[1]} columns, network has "
                             f"{net.n_bus} buses")
        return [Scenario(id=k, pd=row.copy(), qd=np.zeros(net.n_bus))
                for k, row in enumerate(X)]

    def fit(self, X, y):
        net = self._check_network()
        X = check_array(X, dtype=np.float64)
        y = check_array(y, dtype=np.float64, ensure_2d=True)
        if y.shape[0] != X.shape[0]:
            raise ValueError("X and y disagree on the number of samples")
        if y.shape[1] != net.n_gen:
            raise ValueError(f"y has {y.shape[1]} columns, network has "
                             f"{net.n_gen} machines")
        scenarios = self._scenarios(X)
        labels = [Label(scenario_id=s.id, status="optimal",
                        objective=float("nan"), pg=row.copy())
                  for s, row in zip(scenarios, y)]
        self.report_ = train(net, scenarios, labels, self._config())
        self.params_ = self.report_.params
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=np.float64)
        net = self._check_network()
        scenarios = self._scenarios(X)
        out = np.empty((len(scenarios), net.n_gen))
        for k, s in enumerate(scenarios):
            out[k] = solve_dcopf(net, self.params_, pd=s.pd,
                                 tol=self.qp_tol).pg
        return out

    def mse(self, X, y) -> float:
        """Mean squared setpoint error, the quantity fit minimizes."""
        y = check_array(y, dtype=np.float64, ensure_2d=True)
        e = self.predict(X) - y
        return float((e * e).sum() / e.size)
