import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from pwbrownian.estimators import DiffusionRegressor


def test_recovers_coefficients():
    tau = np.linspace(0, 10, 21)
    msd = 0.3 + 2 * 1.7 * tau + 0.05 * tau**2
    reg = DiffusionRegressor().fit(tau[:, None], msd)
    assert reg.diffusion_ == pytest.approx(1.7)
    assert reg.quadratic_coef_ == pytest.approx(0.05)
    assert reg.intercept_ == pytest.approx(0.3)
    assert np.allclose(reg.predict(tau), msd)
    assert reg.score(tau[:, None], msd) == pytest.approx(1.0)


def test_weighted_fit_and_window():
    rng = np.random.default_rng(0)
    tau = np.linspace(0, 10, 41)
    err = 0.01 * (1 + tau)
    msd = 2 * 0.8 * tau + rng.normal(0, err)
    reg = DiffusionRegressor(fit_window=(1, 10), intercept=False).fit(tau, msd, y_err=err)
    assert reg.diffusion_ == pytest.approx(0.8, abs=4 * reg.diffusion_err_)
    assert reg.intercept_ == 0.0


def test_params_and_clone():
    reg = DiffusionRegressor(fit_window=(2, 5))
    assert reg.get_params() == {"fit_window": (2, 5), "intercept": True}
    assert clone(reg).fit_window == (2, 5)
    with pytest.raises(NotFittedError):
        reg.predict([1.0])
