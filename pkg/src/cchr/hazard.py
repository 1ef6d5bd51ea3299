"""Weighted forward-recursion estimator of the baseline cumulative hazard.

For a fixed parameter vector theta the baseline cumulative hazard of the
compliers is estimated as a nondecreasing step function with jumps at the
observed event times t_1 < ... < t_K:

    dLambda(t_k) = sum_i kappa_i dI_i(t_k)
                   / sum_i kappa_i 1{Y_i >= t_k} exp(psi_i(theta, Lambda(t_{k-1})))

evaluated left to right, so a single pass replaces the K-dimensional
fixed-point system. Under the independence copula exp(psi) reduces to the
usual relative risk exp(z*alpha + x'beta) and the recursion collapses to a
weighted Breslow estimator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import copulas, margins

_MAX_INCREMENT = 1e3
_S_FLOOR = 1e-300


class HazardError(RuntimeError):
    pass


@dataclass(frozen=True)
class StepHazard:
    """Right-continuous nondecreasing step function with Lambda(0) = 0."""

    times: np.ndarray
    increments: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        incs = np.asarray(self.increments, dtype=float)
        if times.shape != incs.shape or times.ndim != 1:
            raise ValueError("times and increments must be aligned 1-D arrays")
        if np.any(np.diff(times) <= 0):
            raise ValueError("jump times must be strictly increasing")
        if np.any(incs < 0):
            raise ValueError("increments must be nonnegative")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "increments", incs)
        object.__setattr__(self, "_cum", np.concatenate([[0.0], np.cumsum(incs)]))

    def cumulative(self, t):
        """Lambda(t) = sum of increments at jump times <= t."""
        idx = np.searchsorted(self.times, np.asarray(t, dtype=float), side="right")
        return self._cum[idx]

    def jump_at(self, t):
        """Increment at exactly t (0 if t is not a jump time)."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.times, t)
        idx = np.clip(idx, 0, len(self.times) - 1)
        hit = self.times[idx] == t
        return np.where(hit, self.increments[idx], 0.0)


@dataclass(frozen=True)
class Theta:
    """Finite-dimensional parameter block (mu, eta, xi)."""

    ph: margins.PHParams
    cens: margins.CensoringModel
    copula: copulas.CopulaSpec


def psi(theta, lam, y, z, x):
    """Log relative crude hazard psi_i(theta, Lambda(y)) at follow-up y.

    psi = z*alpha + x'beta - Lambda*exp(..) - log S + log{1 - zeta_1(F_T, F_C)}
    with S = 1 - F_T - F_C + C(F_T, F_C). Vectorized over rows.
    """
    lp = margins.linear_predictor(z, x, theta.ph)
    lam = np.asarray(lam, dtype=float)
    if theta.copula.family == "independence":
        # S = (1-F_T)(1-F_C) and zeta_1 = F_C, so everything but the linear
        # predictor cancels exactly
        return np.broadcast_to(lp, np.broadcast_shapes(lp.shape, lam.shape)).copy()
    ft = np.clip(margins.ph_cdf_from_lambda(lam, lp), 1e-12, 1.0 - 1e-12)
    fc = np.clip(margins.cens_cdf(y, z, x, theta.cens), 1e-12, 1.0 - 1e-12)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore", under="ignore"):
        surv = 1.0 - ft - fc + copulas.cdf(theta.copula, ft, fc)
        surv = np.maximum(surv, _S_FLOOR)
        zeta1 = copulas.partial_u(theta.copula, ft, fc)
        out = lp - lam * np.exp(lp) - np.log(surv) + np.log1p(-np.minimum(zeta1, 1.0 - 1e-16))
    if not np.all(np.isfinite(out)):
        bad = int(np.nonzero(~np.isfinite(np.atleast_1d(out)))[0][0])
        raise HazardError(
            f"non-finite psi at row {bad}: y={np.atleast_1d(y)[bad] if np.ndim(y) else y}"
        )
    return out


def fit_step_hazard(theta, dataset, weights, tau_bar=None):
    """One forward pass of the weighted recursion over the ordered event times.

    Jumps are placed at the distinct Y with Delta1 = 1 and Y <= tau_bar; ties
    are merged into a single jump. Rows beyond tau_bar stay in the risk sets.
    """
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (dataset.n,):
        raise ValueError("weights must align with dataset rows")
    if tau_bar is None:
        tau_bar = float(np.max(dataset.y))
    event = (dataset.delta1 == 1) & (dataset.y <= tau_bar)
    if not np.any(event):
        raise HazardError("no observed events within tau_bar")

    times = np.unique(dataset.y[event])
    # weighted numerator per jump time
    order_ev = np.searchsorted(times, dataset.y[event])
    numerators = np.bincount(order_ev, weights=weights[event], minlength=len(times))

    # rows sorted by y ascending; at-risk set at t_k is a suffix
    sort_idx = np.argsort(dataset.y, kind="stable")
    y_s = dataset.y[sort_idx]
    z_s = dataset.z[sort_idx]
    x_s = dataset.x[sort_idx]
    w_s = weights[sort_idx]

    increments = np.zeros(len(times))
    cum = 0.0
    for k, tk in enumerate(times):
        if numerators[k] <= 0.0:
            continue
        start = np.searchsorted(y_s, tk, side="left")
        psi_k = psi(theta, cum, tk, z_s[start:], x_s[start:], )
        den = float(np.sum(w_s[start:] * np.exp(psi_k)))
        if den <= 0.0 or not np.isfinite(den):
            raise HazardError(f"vanishing risk-set denominator at event time {tk}")
        inc = numerators[k] / den
        if inc > _MAX_INCREMENT:
            raise HazardError(f"cumulative hazard increment exploded at event time {tk}")
        increments[k] = inc
        cum += inc
    return StepHazard(times=times, increments=increments)


def eval_hazard(step_hazard, t):
    """Cumulative hazard at time t (0 before the first jump)."""
    return step_hazard.cumulative(t)
