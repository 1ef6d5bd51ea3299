"""Conditional marginal models for the event and censoring times.

The event time follows a proportional hazards model
F_T(t | z, x) = 1 - exp{-Lambda(t) exp(z*alpha + x'beta)} with an arbitrary
baseline cumulative hazard (a parametric power baseline for simulation, a
step function when estimated). The censoring time follows a log-location-scale
model log C = xtilde'eta + nu * eps with xtilde = (1, z, x) and eps standard
extreme-value (weibull), normal (lognormal) or logistic (loglogistic).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, ndtr, ndtri

CENSORING_FAMILIES = ("weibull", "lognormal", "loglogistic")


@dataclass(frozen=True)
class PHParams:
    """Treatment log-hazard-ratio and covariate coefficients."""

    alpha: float
    beta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "beta", np.atleast_1d(np.asarray(self.beta, dtype=float)))
        if not np.isfinite(self.alpha) or not np.all(np.isfinite(self.beta)):
            raise ValueError("PH parameters must be finite")


@dataclass(frozen=True)
class ParametricBaseline:
    """Power baseline Lambda(t) = c * t**rho, used by the simulation engine."""

    c: float
    rho: float

    def __post_init__(self):
        if self.c <= 0 or self.rho <= 0:
            raise ValueError("baseline requires c > 0 and rho > 0")

    def cumulative(self, t):
        t = np.asarray(t, dtype=float)
        return self.c * np.where(t > 0, t, 0.0) ** self.rho

    def inverse(self, lam):
        lam = np.asarray(lam, dtype=float)
        return (lam / self.c) ** (1.0 / self.rho)


@dataclass(frozen=True)
class CensoringModel:
    """Log-location-scale censoring family with linear predictor xtilde'eta."""

    family: str
    eta: np.ndarray
    nu: float

    def __post_init__(self):
        if self.family not in CENSORING_FAMILIES:
            raise ValueError(f"unknown censoring family {self.family!r}")
        object.__setattr__(self, "eta", np.atleast_1d(np.asarray(self.eta, dtype=float)))
        if self.nu <= 0:
            raise ValueError("scale nu must be positive")


def _ev_cdf(w):
    return -np.expm1(-np.exp(w))


def _ev_logpdf(w):
    return w - np.exp(w)


def _ev_quantile(p):
    return np.log(-np.log1p(-p))


def _logistic_cdf(w):
    return expit(w)


def _logistic_logpdf(w):
    return w - 2.0 * np.logaddexp(0.0, w)


def _logistic_quantile(p):
    return np.log(p) - np.log1p(-p)


def _normal_logpdf(w):
    return -0.5 * w * w - 0.5 * np.log(2.0 * np.pi)


_ERROR_LAWS = {
    "weibull": (_ev_cdf, _ev_logpdf, _ev_quantile),
    "lognormal": (ndtr, _normal_logpdf, ndtri),
    "loglogistic": (_logistic_cdf, _logistic_logpdf, _logistic_quantile),
}


def linear_predictor(z, x, params):
    z = np.asarray(z, dtype=float)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return params.alpha * z + x @ params.beta


def _xtilde_eta(z, x, model):
    z = np.asarray(z, dtype=float)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return model.eta[0] + model.eta[1] * z + x @ model.eta[2:]


def ph_cdf(t, z, x, params, base):
    """F_T(t | z, x) under the proportional hazards model."""
    t = np.asarray(t, dtype=float)
    lam = base.cumulative(t)
    return ph_cdf_from_lambda(lam, linear_predictor(z, x, params))


def ph_cdf_from_lambda(lam, lp):
    """F_T expressed directly through the cumulative hazard value."""
    return -np.expm1(-np.asarray(lam, dtype=float) * np.exp(lp))


def cchr(params):
    """Complier causal hazard ratio exp(alpha)."""
    return float(np.exp(params.alpha))


def ph_quantile(p, z, x, params, base):
    """Inverse of ph_cdf in t; requires a parametric baseline."""
    p = np.asarray(p, dtype=float)
    lp = linear_predictor(z, x, params)
    lam = -np.log1p(-p) * np.exp(-lp)
    return base.inverse(lam)


def cens_cdf(c, z, x, model):
    """F_C(c | z, x), strictly increasing in c on (0, inf)."""
    c = np.asarray(c, dtype=float)
    if np.any(c <= 0):
        raise ValueError("censoring time must be positive")
    w = (np.log(c) - _xtilde_eta(z, x, model)) / model.nu
    return _ERROR_LAWS[model.family][0](w)


def cens_log_density(c, z, x, model):
    """log f_C(c | z, x)."""
    c = np.asarray(c, dtype=float)
    if np.any(c <= 0):
        raise ValueError("censoring time must be positive")
    w = (np.log(c) - _xtilde_eta(z, x, model)) / model.nu
    return _ERROR_LAWS[model.family][1](w) - np.log(model.nu) - np.log(c)


def cens_quantile(p, z, x, model):
    """Inverse of cens_cdf in c."""
    p = np.asarray(p, dtype=float)
    wq = _ERROR_LAWS[model.family][2](p)
    return np.exp(_xtilde_eta(z, x, model) + model.nu * wq)
