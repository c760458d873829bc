"""Estimator-style wrapper around the mean-squared-displacement fit."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .langevin import estimate_diffusion
from .thermal import EnsembleStats


class DiffusionRegressor(RegressorMixin, BaseEstimator):
    """Fit ``MSD(tau) = c + 2 D tau + B tau^2`` by weighted least squares.

    Parameters
    ----------
    fit_window : tuple of float, optional
        ``(tau_min, tau_max)``; lags outside are ignored.
    intercept : bool
        Fit the constant ``c`` (absorbs the ballistic offset at short lags).

    Attributes
    ----------
    diffusion_ : float
        ``D``, with standard error ``diffusion_err_``.
    quadratic_coef_ : float
        ``B``, with standard error ``quadratic_err_``.
    intercept_ : float
    fit_ : DiffusionFit
    """

    def __init__(self, fit_window=None, intercept=True):
        self.fit_window = fit_window
        self.intercept = intercept

    def fit(self, X, y, y_err=None):
        """``X`` holds lags (shape ``(n,)`` or ``(n, 1)``), ``y`` the MSD, ``y_err`` its errors."""
        tau = np.asarray(X, dtype=float).reshape(-1)
        y = np.asarray(y, dtype=float)
        msd = y if y_err is None else EnsembleStats(y, np.asarray(y_err, dtype=float), 0)
        fit = estimate_diffusion(tau, msd, self.fit_window, self.intercept)
        self.fit_ = fit
        self.diffusion_ = fit.D
        self.diffusion_err_ = fit.D_err
        self.quadratic_coef_ = fit.quadratic_coef
        self.quadratic_err_ = fit.quadratic_err
        self.intercept_ = fit.intercept
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "fit_")
        tau = np.asarray(X, dtype=float).reshape(-1)
        return self.intercept_ + 2 * self.diffusion_ * tau + self.quadratic_coef_ * tau**2
