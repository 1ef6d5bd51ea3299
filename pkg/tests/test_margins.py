import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import lognorm, weibull_min

from cchr.margins import (
    CensoringModel,
    ParametricBaseline,
    PHParams,
    cchr,
    cens_cdf,
    cens_log_density,
    cens_quantile,
    ph_cdf,
    ph_cdf_from_lambda,
    ph_quantile,
)

Z = np.array([1.0, 0.0, 1.0])
X = np.array([[0.0, 0.3], [1.0, 0.7], [1.0, 0.1]])
PH = PHParams(alpha=-0.6, beta=np.array([1.0, 0.9]))
BASE = ParametricBaseline(0.5, 0.75)


def test_ph_cdf_quantile_round_trip():
    p = np.array([0.05, 0.4, 0.95])
    t = ph_quantile(p, Z, X, PH, BASE)
    assert np.max(np.abs(ph_cdf(t, Z, X, PH, BASE) - p)) < 1e-12


def test_ph_cdf_matches_weibull_special_case():
    # with z=0, beta=0 the model is Weibull(shape rho, scale (1/c)^(1/rho))
    base = ParametricBaseline(0.5, 0.75)
    ph = PHParams(alpha=0.0, beta=np.array([0.0]))
    t = np.linspace(0.1, 8.0, 50)
    ours = ph_cdf(t, np.zeros(50), np.zeros((50, 1)), ph, base)
    ref = weibull_min.cdf(t, 0.75, scale=(1 / 0.5) ** (1 / 0.75))
    assert np.max(np.abs(ours - ref)) < 1e-12


def test_ph_cdf_from_lambda_consistency():
    t = np.array([0.5, 1.0, 2.0])
    lp = np.array([0.2, -0.1, 0.4])
    direct = -np.expm1(-BASE.cumulative(t) * np.exp(lp))
    assert np.allclose(ph_cdf_from_lambda(BASE.cumulative(t), lp), direct)


def test_cchr_is_exp_alpha():
    assert abs(cchr(PH) - np.exp(-0.6)) < 1e-15


@pytest.mark.parametrize("family", ["weibull", "lognormal", "loglogistic"])
def test_cens_cdf_quantile_round_trip(family):
    model = CensoringModel(family, np.array([1.5, -0.8, -2.0, 0.9]), 1.2)
    p = np.array([0.01, 0.3, 0.6, 0.99])
    for z, x in ((0.0, np.array([[0.0, 0.2]])), (1.0, np.array([[1.0, 0.8]]))):
        c = cens_quantile(p, z, x, model)
        assert np.max(np.abs(cens_cdf(c, z, x, model) - p)) < 1e-12


@pytest.mark.parametrize("family", ["weibull", "lognormal", "loglogistic"])
def test_cens_density_matches_cdf_derivative(family):
    model = CensoringModel(family, np.array([0.5, -0.3, 0.4]), 0.8)
    z, x = 1.0, np.array([[0.6]])
    c = np.linspace(0.2, 6.0, 25)
    eps = 1e-6
    fd = (cens_cdf(c + eps, z, x, model) - cens_cdf(c - eps, z, x, model)) / (2 * eps)
    ours = np.exp(cens_log_density(c, z, x, model))
    assert np.max(np.abs(ours - fd)) < 1e-7


@pytest.mark.parametrize("family", ["weibull", "lognormal", "loglogistic"])
def test_cens_density_integrates_to_one(family):
    model = CensoringModel(family, np.array([0.4, -0.2]), 1.1)
    z, x = 0.0, np.empty((1, 0))
    val, _ = quad(lambda c: float(np.exp(cens_log_density(c, z, x, model))[0]), 1e-12, np.inf, limit=300)
    assert abs(val - 1.0) < 1e-8


def test_lognormal_matches_scipy():
    model = CensoringModel("lognormal", np.array([0.7, 0.0]), 0.9)
    c = np.linspace(0.2, 8.0, 30)
    ref = lognorm.cdf(c, 0.9, scale=np.exp(0.7))
    ours = cens_cdf(c, np.zeros(30), np.empty((30, 0)), model)
    assert np.max(np.abs(ours - ref)) < 1e-12


def test_baseline_inverse():
    lam = BASE.cumulative(np.array([0.3, 1.0, 4.0]))
    assert np.allclose(BASE.inverse(lam), [0.3, 1.0, 4.0])


def test_invalid_parameters_rejected():
    with pytest.raises(ValueError):
        ParametricBaseline(-1.0, 0.5)
    with pytest.raises(ValueError):
        CensoringModel("weibull", np.array([0.0, 0.0]), -1.0)
    with pytest.raises(ValueError):
        CensoringModel("gamma", np.array([0.0, 0.0]), 1.0)
    with pytest.raises(ValueError):
        cens_cdf(np.array([-1.0]), 0.0, np.empty((1, 0)), CensoringModel("weibull", np.array([0.0, 0.0]), 1.0))
