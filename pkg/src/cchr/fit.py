"""Weighted profile likelihood: two-step estimator, bootstrap, model selection.

The finite-dimensional parameter is theta = (alpha, beta, eta, nu, xi). For a
candidate theta the baseline cumulative hazard is profiled out by the forward
recursion (hazard module); the weighted log-likelihood is then maximized over
theta by Nelder-Mead on an unconstrained scale (log nu; a family-specific
monotone transform for xi), from J random starts, alternating hazard refits
and maximizations until the parameter vector settles.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import copulas, margins, weights as weights_mod
from .copulas import CopulaSpec, TAU_RANGE
from .hazard import HazardError, StepHazard, Theta, fit_step_hazard
from .margins import CensoringModel, PHParams

_LOG_FLOOR = math.log(1e-300)
_CLIP = 1e-12

MODEL_COPULAS = (
    "frank",
    "gumbel",
    "joe",
    "gaussian",
    "clayton90",
    "clayton180",
    "clayton270",
)
MODEL_CENSORING = ("weibull", "lognormal", "loglogistic")


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class OptimizerConfig:
    n_starts: int = 100
    max_outer_iters: int = 120
    outer_tol: float = 1e-6
    start_maxiter: int = 300
    refine_maxiter: int = 1000
    coef_range: tuple = (-2.0, 2.0)
    nu_range: tuple = (0.2, 3.0)
    tau_frac: float = 0.9
    #: compact bound on |Kendall tau| during maximization; near the frank/
    #: gumbel/joe boundary the profiled-hazard likelihood develops spurious
    #: ridges (the hazard estimate degenerates toward the censoring margin),
    #: so the search is kept inside a compact association space
    tau_bound: float = 0.85

    def __post_init__(self):
        if self.n_starts < 1 or self.max_outer_iters < 1 or self.outer_tol <= 0:
            raise ValueError("invalid optimizer configuration")
        if not 0.0 < self.tau_bound < 1.0:
            raise ValueError("invalid optimizer configuration")


#: cheap settings for smoke runs and interactive use on small datasets
DESK_OPTIMIZER = OptimizerConfig(
    n_starts=10,
    max_outer_iters=20,
    outer_tol=1e-4,
    start_maxiter=150,
    refine_maxiter=600,
)

#: settings for desk-scale Monte Carlo studies: the full complement of 100
#: starts with moderate per-pass budgets; the large multi-start is what keeps
#: the selected basin stable across replicates
STUDY_OPTIMIZER = OptimizerConfig(
    n_starts=100,
    max_outer_iters=30,
    outer_tol=1e-4,
    start_maxiter=120,
    refine_maxiter=600,
)


@dataclass(frozen=True)
class FitResult:
    theta_hat: Theta
    hazard: StepHazard
    loglik: float
    converged: bool
    n_outer: int
    weights_used: np.ndarray

    def params(self):
        """Named parameter estimates with the association on the tau scale."""
        out = {"alpha": self.theta_hat.ph.alpha}
        for i, b in enumerate(self.theta_hat.ph.beta, start=1):
            out[f"beta{i}"] = float(b)
        for i, e in enumerate(self.theta_hat.cens.eta):
            out[f"eta{i}"] = float(e)
        out["nu"] = float(self.theta_hat.cens.nu)
        out["tau"] = float(copulas.tau_from_xi(self.theta_hat.copula))
        return out

    def to_report(self):
        return {
            "theta": self.params(),
            "copula_family": self.theta_hat.copula.family,
            "censoring_family": self.theta_hat.cens.family,
            "loglik": float(self.loglik),
            "converged": bool(self.converged),
            "n_outer": int(self.n_outer),
            "hazard": {
                "times": self.hazard.times.tolist(),
                "increments": self.hazard.increments.tolist(),
            },
        }


@dataclass(frozen=True)
class BootstrapResult:
    n_resamples: int
    estimates: dict
    standard_errors: dict
    p_values: dict
    n_failed: int
    degenerate: bool
    unreliable: bool


# ---------------------------------------------------------------------------
# unconstrained parameterization


def _xi_to_t(family, xi):
    if family == "frank":
        return float(xi)
    if family in ("gumbel", "joe"):
        return math.log(xi - 1.0)
    if family == "gaussian":
        return math.atanh(xi)
    return math.log(xi)  # clayton rotations


def _t_to_xi(family, t):
    if family == "frank":
        xi = float(np.clip(t, -300.0, 300.0))
        return xi if xi != 0.0 else 1e-10
    if family in ("gumbel", "joe"):
        return 1.0 + math.exp(float(np.clip(t, -30.0, 8.0)))
    if family == "gaussian":
        return math.tanh(float(np.clip(t, -18.0, 18.0)))
    return math.exp(float(np.clip(t, -30.0, 8.0)))


def _n_params(m, copula_family):
    base = 1 + m + (m + 2) + 1
    return base if copula_family == "independence" else base + 1


def _unpack(vec, m, copula_family, censoring_family):
    alpha = float(vec[0])
    beta = np.asarray(vec[1 : 1 + m], dtype=float)
    eta = np.asarray(vec[1 + m : 3 + 2 * m], dtype=float)
    nu = math.exp(float(np.clip(vec[3 + 2 * m], -20.0, 20.0)))
    if copula_family == "independence":
        spec = CopulaSpec("independence")
    else:
        spec = CopulaSpec(copula_family, _t_to_xi(copula_family, vec[4 + 2 * m]))
    return Theta(
        ph=PHParams(alpha=alpha, beta=beta),
        cens=CensoringModel(family=censoring_family, eta=eta, nu=nu),
        copula=spec,
    )


def _pack(theta):
    vec = [theta.ph.alpha, *theta.ph.beta, *theta.cens.eta, math.log(theta.cens.nu)]
    if theta.copula.family != "independence":
        vec.append(_xi_to_t(theta.copula.family, theta.copula.xi))
    return np.asarray(vec, dtype=float)


def _tau_box(copula_family, config):
    """Compact Kendall-tau interval searched for the association parameter."""
    tlo, thi = TAU_RANGE[copula_family]
    return max(tlo, -config.tau_bound), min(thi, config.tau_bound)


def _assoc_bounds(copula_family, config):
    """Bounds for the unconstrained association coordinate (monotone map)."""
    if copula_family == "independence":
        return None
    tlo, thi = _tau_box(copula_family, config)
    pad = 1e-6
    lo = _xi_to_t(copula_family, copulas.xi_from_tau(copula_family, tlo + pad).xi)
    hi = _xi_to_t(copula_family, copulas.xi_from_tau(copula_family, thi - pad).xi)
    return lo, hi


def _sample_start(rng, m, copula_family, censoring_family, config):
    lo, hi = config.coef_range
    vec = list(rng.uniform(lo, hi, size=1 + m + m + 2))
    vec.append(math.log(rng.uniform(*config.nu_range)))
    if copula_family != "independence":
        tlo, thi = _tau_box(copula_family, config)
        mid = 0.5 * (tlo + thi)
        half = 0.5 * (thi - tlo) * config.tau_frac
        tau = rng.uniform(mid - half, mid + half)
        if abs(tau) < 1e-3:
            tau = 1e-3 if tau >= 0 else -1e-3
        vec.append(_xi_to_t(copula_family, copulas.xi_from_tau(copula_family, tau).xi))
    return np.asarray(vec, dtype=float)


# ---------------------------------------------------------------------------
# likelihood


def loglik_contrib(y, delta1, delta2, z, x, theta, hazard):
    """Per-observation log-likelihood contribution (vectorized over rows).

    Event rows use the jump of the profiled hazard at their time; dependent
    censoring rows use the parametric censoring density; administrative rows
    use the joint survival. Contributions are floored at log(1e-300).
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    delta1 = np.atleast_1d(np.asarray(delta1))
    delta2 = np.atleast_1d(np.asarray(delta2))
    lp = margins.linear_predictor(z, x, theta.ph)
    lam = hazard.cumulative(y)
    ft = np.clip(margins.ph_cdf_from_lambda(lam, lp), _CLIP, 1.0 - _CLIP)
    fc = np.clip(margins.cens_cdf(y, z, x, theta.cens), _CLIP, 1.0 - _CLIP)

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        zeta1 = np.minimum(copulas.partial_u(theta.copula, ft, fc), 1.0 - 1e-16)
        zeta2 = np.minimum(copulas.partial_v(theta.copula, ft, fc), 1.0 - 1e-16)
        surv = 1.0 - ft - fc + copulas.cdf(theta.copula, ft, fc)
        surv = np.maximum(surv, 1e-300)

        jump = hazard.jump_at(y)
        event_term = (
            np.log(np.maximum(jump, 1e-300))
            + lp
            - lam * np.exp(lp)
            + np.log1p(-zeta1)
        )
        cens_term = margins.cens_log_density(y, z, x, theta.cens) + np.log1p(-zeta2)
        admin_term = np.log(surv)

    out = np.where(delta1 == 1, event_term, np.where(delta2 == 1, cens_term, admin_term))
    return np.maximum(np.nan_to_num(out, nan=_LOG_FLOOR, neginf=_LOG_FLOOR), _LOG_FLOOR)


def weighted_loglik(dataset, weights, theta, hazard):
    """Sum of kappa-weighted per-observation contributions."""
    contrib = loglik_contrib(
        dataset.y, dataset.delta1, dataset.delta2, dataset.z, dataset.x, theta, hazard
    )
    return float(np.dot(np.asarray(weights, dtype=float), contrib))


def _neg_objective(vec, dataset, weights, m, copula_family, censoring_family, assoc_bounds, hazard):
    if assoc_bounds is not None:
        t = vec[-1]
        if t < assoc_bounds[0] or t > assoc_bounds[1]:
            return 1e300
    try:
        theta = _unpack(vec, m, copula_family, censoring_family)
    except (ValueError, copulas.CopulaError):
        return 1e300
    val = weighted_loglik(dataset, weights, theta, hazard)
    if not np.isfinite(val):
        return 1e300
    return -val


def _nm(fun, x0, maxiter):
    return minimize(
        fun,
        x0,
        method="Nelder-Mead",
        options={"maxiter": maxiter, "xatol": 1e-5, "fatol": 1e-7, "adaptive": True},
    )


def maximize(dataset, weights, copula_family, censoring_family, config=None, seed=0):
    """Multi-start maximization of the weighted profile log-likelihood.

    For each of J random starts the hazard is profiled at the start value and
    theta maximized at that fixed hazard; the best start then alternates
    hazard refits and maximizations until the relative sup-norm change of the
    parameter vector drops below the outer tolerance.
    """
    config = config or OptimizerConfig()
    weights = np.asarray(weights, dtype=float)
    m = dataset.schema.m
    rng = np.random.default_rng(seed)
    args = (dataset, weights, m, copula_family, censoring_family, _assoc_bounds(copula_family, config))

    best_fun = np.inf
    best_x = None
    for _ in range(config.n_starts):
        x0 = _sample_start(rng, m, copula_family, censoring_family, config)
        theta0 = _unpack(x0, m, copula_family, censoring_family)
        try:
            hz = fit_step_hazard(theta0, dataset, weights)
        except HazardError:
            continue
        res = _nm(lambda v: _neg_objective(v, *args, hz), x0, config.start_maxiter)
        if res.fun < best_fun:
            best_fun, best_x = res.fun, res.x
    if best_x is None or not np.isfinite(best_fun):
        raise FitError("all starting values produced non-finite objectives")

    x = best_x
    converged = False
    n_outer = 0
    for n_outer in range(1, config.max_outer_iters + 1):
        theta = _unpack(x, m, copula_family, censoring_family)
        try:
            hz = fit_step_hazard(theta, dataset, weights)
        except HazardError:
            break
        res = _nm(lambda v: _neg_objective(v, *args, hz), x, config.refine_maxiter)
        rel = np.max(np.abs(res.x - x)) / max(1.0, np.max(np.abs(x)))
        x = res.x
        if rel < config.outer_tol:
            converged = True
            break

    theta = _unpack(x, m, copula_family, censoring_family)
    hz = fit_step_hazard(theta, dataset, weights)
    loglik = weighted_loglik(dataset, weights, theta, hz)
    return FitResult(
        theta_hat=theta,
        hazard=hz,
        loglik=loglik,
        converged=converged,
        n_outer=n_outer,
        weights_used=weights,
    )


def resolve_weights(dataset, mode, kernel_config=None, bounds=None, oracle_groups=None, cv_seed=0):
    """Weight vector for one of the estimator variants.

    proposed: truncated nonparametric kappa estimate (CV bandwidths when no
    kernel config is supplied); naive: all ones; oracle: complier indicator.
    """
    if mode == "naive":
        return np.ones(dataset.n)
    if mode == "oracle":
        if oracle_groups is None:
            raise FitError("oracle weights require the latent group labels")
        return np.asarray(oracle_groups, dtype=float)
    if mode != "proposed":
        raise FitError(f"unknown weights mode {mode!r}")
    if kernel_config is None:
        grid = tuple(np.round(np.arange(0.01, 1.001, 0.01), 10))
        kernel_config = weights_mod.cross_validate_bandwidths(dataset, grid, seed=cv_seed)
    return weights_mod.estimate_kappa(dataset, kernel_config, bounds)


def fit_two_step(
    dataset,
    copula_family,
    censoring_family,
    kernel_config=None,
    optimizer_config=None,
    seed=0,
    weights_mode="proposed",
    bounds=None,
    oracle_groups=None,
):
    """First-stage weights, then weighted maximum likelihood."""
    w = resolve_weights(
        dataset, weights_mode, kernel_config, bounds, oracle_groups, cv_seed=seed
    )
    return maximize(dataset, w, copula_family, censoring_family, optimizer_config, seed=seed)


def bootstrap_pvalue(boot_vals, estimate, null):
    """p = B^-1 sum 1{|theta_b - theta_hat| > |theta_hat - null|}."""
    boot_vals = np.asarray(boot_vals, dtype=float)
    return float(np.mean(np.abs(boot_vals - estimate) > abs(estimate - null)))


def bootstrap(
    dataset,
    copula_family,
    censoring_family,
    n_resamples,
    seed=0,
    kernel_config=None,
    optimizer_config=None,
    weights_mode="proposed",
    bounds=None,
    oracle_groups=None,
    nulls=None,
):
    """Naive nonparametric bootstrap: resample rows, refit end to end.

    Null values default to 0 for every parameter except nu, tested against 1.
    Failed resample fits are counted; the result is flagged unreliable when
    more than 5% fail.
    """
    if n_resamples < 1:
        raise FitError("need at least one bootstrap resample")
    rng = np.random.default_rng(seed)
    base = fit_two_step(
        dataset,
        copula_family,
        censoring_family,
        kernel_config,
        optimizer_config,
        seed=seed,
        weights_mode=weights_mode,
        bounds=bounds,
        oracle_groups=oracle_groups,
    )
    names = list(base.params())
    draws = {name: [] for name in names}
    n_failed = 0
    for b in range(n_resamples):
        idx = rng.integers(0, dataset.n, size=dataset.n)
        sub = dataset.subset(idx)
        sub_groups = None if oracle_groups is None else np.asarray(oracle_groups)[idx]
        try:
            res = fit_two_step(
                sub,
                copula_family,
                censoring_family,
                kernel_config,
                optimizer_config,
                seed=int(rng.integers(0, 2**31 - 1)),
                weights_mode=weights_mode,
                bounds=bounds,
                oracle_groups=sub_groups,
            )
        except (FitError, HazardError, weights_mod.WeightError):
            n_failed += 1
            continue
        for name, val in res.params().items():
            draws[name].append(val)

    n_ok = n_resamples - n_failed
    if n_ok == 0:
        raise FitError("every bootstrap resample failed to fit")
    est = base.params()
    if nulls is None:
        nulls = {}
    ses, pvals = {}, {}
    for name in names:
        vals = np.asarray(draws[name])
        ses[name] = float(np.std(vals, ddof=1)) if n_ok > 1 else 0.0
        null = nulls.get(name, 1.0 if name == "nu" else 0.0)
        pvals[name] = bootstrap_pvalue(vals, est[name], null)
    return BootstrapResult(
        n_resamples=n_resamples,
        estimates={name: np.asarray(draws[name]) for name in names},
        standard_errors=ses,
        p_values=pvals,
        n_failed=n_failed,
        degenerate=n_ok == 1,
        unreliable=n_failed > 0.05 * n_resamples,
    )


def select_model(
    dataset,
    kernel_config=None,
    optimizer_config=None,
    seed=0,
    weights_mode="proposed",
    bounds=None,
    oracle_groups=None,
):
    """Fit all 21 copula x censoring combinations; rank by log-likelihood.

    Every combination has the same number of parameters, so the raw weighted
    log-likelihood is the ranking criterion. Failed combinations are returned
    separately.
    """
    w = resolve_weights(dataset, weights_mode, kernel_config, bounds, oracle_groups, cv_seed=seed)
    ranked = []
    failures = []
    for cop, cens in itertools.product(MODEL_COPULAS, MODEL_CENSORING):
        try:
            res = maximize(dataset, w, cop, cens, optimizer_config, seed=seed)
        except (FitError, HazardError) as exc:
            failures.append((cop, cens, str(exc)))
            continue
        ranked.append((cop, cens, res))
    ranked.sort(key=lambda rec: rec[2].loglik, reverse=True)
    return ranked, failures
