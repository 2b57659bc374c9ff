"""Estimator-style wrapper around the solver.

Customers play the role of samples and drivers the role of cluster labels:
``fit`` learns a customer-to-driver assignment, ``predict`` routes a new
period or day against it and returns each customer's driver.
"""
from __future__ import annotations

import time

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .construction import ConstructionParams
from .elimination import EliminationParams
from .model import Instance, validate_instance
from .report import RunReport
from .rolling import RollingResult, assignment_by_label, daily_plan, update_solution
from .solver import solve


def check_instance(instance) -> Instance:
    """Validate the estimator input; returns it unchanged."""
    if not isinstance(instance, Instance):
        raise TypeError(f"expected an Instance, got {type(instance).__name__}")
    validate_instance(instance)
    return instance


class ConsistentRoutingSolver(BaseEstimator):
    """Minimum-vehicle consistent routing as a fit/predict estimator.

    With ``warm_start=True`` a second ``fit`` on a new period starts from
    the previous assignment instead of solving from scratch.
    """

    def __init__(self, ic: int = 1, mu: float = 1.0, lam: float = 2.0, alpha1: float = 0.5,
                 k_max: int = 3, ct_max: float = 60.0, seed: int = 0, portfolio: int = 1,
                 warm_start: bool = False):
        self.ic = ic
        self.mu = mu
        self.lam = lam
        self.alpha1 = alpha1
        self.k_max = k_max
        self.ct_max = ct_max
        self.seed = seed
        self.portfolio = portfolio
        self.warm_start = warm_start

    def _construction(self) -> ConstructionParams:
        return ConstructionParams(ic=self.ic, mu=self.mu, lam=self.lam,
                                  alpha1=self.alpha1, alpha2=1 - self.alpha1)

    def _elimination(self) -> EliminationParams:
        return EliminationParams(k_max=self.k_max, ct_max=self.ct_max, rng_seed=self.seed)

    def fit(self, X: Instance, y=None) -> "ConsistentRoutingSolver":
        instance = check_instance(X)
        if self.warm_start and hasattr(self, "assignment_"):
            clock = time.perf_counter()
            result = update_solution(instance, self.assignment_, self._elimination(),
                                     self._construction())
            self.update_ = result
            self.solution_ = result.solution
            extra = {"command": "update", "ic": result.percent_changed}
            cpu = time.perf_counter() - clock
        else:
            result = solve(instance, self._construction(), self._elimination(),
                           portfolio=self.portfolio)
            self.solution_ = result.solution
            extra = {"command": "solve"}
            cpu = result.cpu_seconds
        self.instance_ = instance
        self.assignment_ = assignment_by_label(instance, self.solution_)
        self.n_vehicles_ = self.solution_.n_vehicles
        self.report_ = RunReport.from_solution(instance, self.solution_, cpu, self.seed,
                                               params=self.get_params(), **extra)
        return self

    def _labels(self, instance: Instance, assignment) -> np.ndarray:
        return np.array([assignment[instance.labels[v]] for v in instance.customers])

    def fit_predict(self, X: Instance, y=None) -> np.ndarray:
        """Driver id of each customer, in customer order."""
        return self.fit(X)._labels(X, self.assignment_)

    def plan(self, X: Instance) -> RollingResult:
        """Route a one-day instance against the fitted assignment."""
        check_is_fitted(self, "assignment_")
        instance = check_instance(X)
        return daily_plan(instance, self.assignment_, self._elimination(), self._construction())

    def predict(self, X: Instance) -> np.ndarray:
        """Driver of each customer of a one-day instance under the fitted assignment."""
        result = self.plan(X)
        return self._labels(X, assignment_by_label(X, result.solution))
