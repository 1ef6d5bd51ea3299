"""First-stage nonparametric estimation of the complier probability weights.

pi(x) = P(W=1 | X=x) and nu_{j,l,k}(r) = P(W=1 | R=r, Delta1=j, Delta2=l, Z=k)
are estimated by Nadaraya-Watson regression with a multiplicative sixth-order
Epanechnikov kernel over the continuous coordinates, stratified exactly on the
discrete covariates. The complier probability
kappa(S) = 1 - Z(1-nu)/(1-pi) - (1-Z)nu/pi is clamped into [a_l, a_u].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset


class WeightError(ValueError):
    pass


@dataclass(frozen=True)
class KernelConfig:
    """Bandwidths for the two kernel regressions.

    h1 smooths the continuous covariates in the pi-hat regression; h2 smooths
    R = (Y, X_continuous) in the nu-hat regressions. Either may be a single
    number (shared across coordinates) or a tuple with one bandwidth per
    continuous coordinate of the respective regressor.
    """

    h1: float | tuple
    h2: float | tuple
    grid: tuple = ()
    folds: int = 10

    def __post_init__(self):
        for h in (self.h1, self.h2):
            if np.any(np.asarray(h, dtype=float) <= 0):
                raise WeightError("bandwidths must be positive")
        if self.folds < 2:
            raise WeightError("need at least 2 CV folds")


@dataclass(frozen=True)
class TruncationBounds:
    a_l: float
    a_u: float

    def __post_init__(self):
        if not 0.0 < self.a_l < self.a_u < 1.0:
            raise WeightError("need 0 < a_l < a_u < 1")

    @classmethod
    def default(cls, n):
        return cls(10.0 / n, 1.0 - 10.0 / n)


def kernel6(u):
    """Multiplicative sixth-order Epanechnikov kernel.

    Per coordinate k(t) = (105/256)(1-t^2)(5-30t^2+33t^4) on |t| <= 1;
    integrates to one with vanishing second and fourth moments. For 2-D and
    higher input the product is taken over the last axis.
    """
    u = np.asarray(u, dtype=float)
    t2 = u * u
    k = (105.0 / 256.0) * (1.0 - t2) * (33.0 * t2 * t2 - 30.0 * t2 + 5.0)
    k = np.where(np.abs(u) <= 1.0, k, 0.0)
    if u.ndim == 0:
        return k[()]
    return np.prod(k, axis=-1)


def _product_kernel(points, sample, h):
    """(p, d) x (n, d) -> (p, n) product kernel weights.

    h is a scalar bandwidth shared by all coordinates or a length-d vector of
    per-coordinate bandwidths.
    """
    points = np.atleast_2d(points)
    sample = np.atleast_2d(sample)
    if points.shape[1] == 0:
        return np.ones((points.shape[0], sample.shape[0]))
    h = np.broadcast_to(np.asarray(h, dtype=float), (points.shape[1],))
    t = (points[:, None, :] - sample[None, :, :]) / h
    t2 = t * t
    k = (105.0 / 256.0) * (1.0 - t2) * (33.0 * t2 * t2 - 30.0 * t2 + 5.0)
    k = np.where(np.abs(t) <= 1.0, k, 0.0)
    return np.prod(k, axis=-1)


def _discrete_match(points_d, sample_d):
    """(p, q) x (n, q) -> (p, n) boolean exact-match mask on discrete codes."""
    if points_d.shape[1] == 0:
        return np.ones((points_d.shape[0], sample_d.shape[0]), dtype=bool)
    return np.all(points_d[:, None, :] == sample_d[None, :, :], axis=-1)


def _nw(kmat, response, fallback=None):
    """Row-wise Nadaraya-Watson ratio clamped to [0, 1].

    Rows whose denominator is not strictly positive get `fallback` (an array
    of per-row values) or raise if no fallback is given.
    """
    den = kmat.sum(axis=1)
    num = kmat @ response
    bad = den <= 0.0
    if np.any(bad):
        if fallback is None:
            idx = int(np.nonzero(bad)[0][0])
            raise WeightError(f"kernel denominator vanished at evaluation point {idx}")
        out = np.where(bad, fallback, np.divide(num, np.where(bad, 1.0, den)))
    else:
        out = num / den
    return np.clip(out, 0.0, 1.0)


def estimate_pi(x, dataset, h1):
    """pi-hat at covariate point(s) x; stratified on discrete covariates."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    sch = dataset.schema
    xc = dataset.x[:, sch.continuous_idx]
    xd = dataset.x[:, sch.discrete_idx]
    match = _discrete_match(x[:, sch.discrete_idx], xd)
    if not np.all(match.any(axis=1)):
        idx = int(np.nonzero(~match.any(axis=1))[0][0])
        raise WeightError(f"empty discrete stratum for evaluation point {idx}")
    kmat = _product_kernel(x[:, sch.continuous_idx], xc, h1) * match
    return _nw(kmat, dataset.w)


def estimate_nu(r, j, l, k, dataset, h2, x_discrete=None):
    """nu-hat_{j,l,k} at point(s) r = (y, x_continuous).

    If the (Delta1=j, Delta2=l, Z=k) stratum (within the discrete-covariate
    cell) is empty, falls back to the stratum-free regression of W on R.
    """
    r = np.atleast_2d(np.asarray(r, dtype=float))
    sch = dataset.schema
    rc = np.column_stack([dataset.y, dataset.x[:, sch.continuous_idx]])
    xd = dataset.x[:, sch.discrete_idx]
    if x_discrete is None:
        x_discrete = np.zeros((r.shape[0], 0))
    match = _discrete_match(np.atleast_2d(x_discrete), xd)
    stratum = (dataset.delta1 == j) & (dataset.delta2 == l) & (dataset.z == k)
    kmat_free = _product_kernel(r, rc, h2) * match
    fallback = _nw(kmat_free, dataset.w, fallback=np.full(r.shape[0], np.mean(dataset.w)))
    kmat = kmat_free * stratum
    return _nw(kmat, dataset.w, fallback=fallback)


def estimate_kappa(dataset, config, bounds=None):
    """Truncated complier-probability weights kappa-tilde for every row."""
    if bounds is None:
        bounds = TruncationBounds.default(dataset.n)
    sch = dataset.schema
    pi = estimate_pi(dataset.x, dataset, config.h1)
    pi = np.clip(pi, bounds.a_l, bounds.a_u)

    nu = np.empty(dataset.n)
    rc = np.column_stack([dataset.y, dataset.x[:, sch.continuous_idx]])
    xd = dataset.x[:, sch.discrete_idx]
    for j in (0, 1):
        for l in (0, 1):
            for k in (0, 1):
                cell = (dataset.delta1 == j) & (dataset.delta2 == l) & (dataset.z == k)
                if not np.any(cell):
                    continue
                nu[cell] = estimate_nu(
                    rc[cell], j, l, k, dataset, config.h2, x_discrete=xd[cell]
                )
    z = dataset.z
    kappa = 1.0 - z * (1.0 - nu) / (1.0 - pi) - (1.0 - z) * nu / pi
    return np.clip(kappa, bounds.a_l, bounds.a_u)


def _fold_assignment(n, folds, rng):
    idx = rng.permutation(n)
    assignment = np.empty(n, dtype=int)
    for f, part in enumerate(np.array_split(idx, folds)):
        assignment[part] = f
    return assignment


def cross_validate_bandwidths(dataset, grid, folds=10, seed=0):
    """Select (h1, h2) by K-fold out-of-fold squared error of W predictions.

    h1 targets pi-hat, h2 targets nu-hat within the (Delta1, Delta2, Z)
    strata; the two selections are independent. Ties break toward the larger
    bandwidth.
    """
    grid = tuple(sorted(grid))
    if not grid:
        raise WeightError("bandwidth grid is empty")
    rng = np.random.default_rng(seed)
    fold_of = _fold_assignment(dataset.n, folds, rng)
    sch = dataset.schema
    xc = dataset.x[:, sch.continuous_idx]
    xd = dataset.x[:, sch.discrete_idx]
    rc = np.column_stack([dataset.y, xc])
    w = dataset.w

    err1 = np.zeros(len(grid))
    err2 = np.zeros(len(grid))
    for f in range(folds):
        test = fold_of == f
        train = ~test
        if not np.any(test) or not np.any(train):
            continue
        match = _discrete_match(xd[test], xd[train])
        w_train = w[train]
        train_mean = np.full(test.sum(), np.mean(w_train))
        stratum_train = (
            (dataset.delta1[test][:, None] == dataset.delta1[train][None, :])
            & (dataset.delta2[test][:, None] == dataset.delta2[train][None, :])
            & (dataset.z[test][:, None] == dataset.z[train][None, :])
        )
        d1 = (xc[test][:, None, :] - xc[train][None, :, :]) if xc.shape[1] else None
        d2 = rc[test][:, None, :] - rc[train][None, :, :]
        for g, h in enumerate(grid):
            if d1 is not None:
                k1 = kernel6(d1 / h) * match
            else:
                k1 = np.ones((test.sum(), train.sum())) * match
            pred1 = _nw(k1, w_train, fallback=train_mean)
            err1[g] += np.sum((w[test] - pred1) ** 2)

            k2_free = kernel6(d2 / h) * match
            fb = _nw(k2_free, w_train, fallback=train_mean)
            pred2 = _nw(k2_free * stratum_train, w_train, fallback=fb)
            err2[g] += np.sum((w[test] - pred2) ** 2)

    # argmin with ties toward larger bandwidth: scan from the largest down
    def _pick(err):
        best = len(grid) - 1
        for g in range(len(grid) - 2, -1, -1):
            if err[g] < err[best]:
                best = g
        return grid[best]

    return KernelConfig(h1=_pick(err1), h2=_pick(err2), grid=grid, folds=folds)
