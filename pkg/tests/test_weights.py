import numpy as np
import pytest
from scipy.integrate import quad

from cchr.data import CovariateSchema, Dataset
from cchr.weights import (
    KernelConfig,
    TruncationBounds,
    WeightError,
    cross_validate_bandwidths,
    estimate_kappa,
    estimate_nu,
    estimate_pi,
    kernel6,
)

SCHEMA = CovariateSchema(names=("x1", "x2"), kinds=("discrete", "continuous"))


def _toy_dataset(n=600, seed=0):
    """W depends on X through a smooth stratified signal."""
    rng = np.random.default_rng(seed)
    x1 = rng.integers(0, 2, n).astype(float)
    x2 = rng.uniform(size=n)
    p = 0.2 + 0.5 * x2 + 0.15 * x1
    w = (rng.uniform(size=n) < p).astype(float)
    y = rng.gamma(2.0, size=n) + 0.05
    d1 = (rng.uniform(size=n) < 0.5).astype(float)
    d2 = np.where(d1 == 1, 0.0, (rng.uniform(size=n) < 0.6).astype(float))
    z = rng.integers(0, 2, n).astype(float)
    return Dataset(
        y=y, delta1=d1, delta2=d2, z=z, w=w, x=np.column_stack([x1, x2]), schema=SCHEMA
    ), p


def test_kernel_integrates_to_one():
    val, _ = quad(lambda t: float(kernel6(t)), -1.0, 1.0, epsabs=1e-12)
    assert abs(val - 1.0) < 1e-10


def test_kernel_higher_order_moments_vanish():
    for k in (1, 2, 3, 4, 5):
        val, _ = quad(lambda t: t**k * float(kernel6(t)), -1.0, 1.0, epsabs=1e-12)
        assert abs(val) < 1e-10, k
    val, _ = quad(lambda t: t**6 * float(kernel6(t)), -1.0, 1.0)
    assert abs(val) > 1e-3  # genuinely sixth order, not higher


def test_kernel_compact_support_and_center():
    assert kernel6(1.5) == 0.0
    assert kernel6(-1.0001) == 0.0
    assert abs(kernel6(0.0) - 525.0 / 256.0) < 1e-15


def test_kernel_product_form():
    pts = np.array([[0.1, -0.2], [0.5, 0.5]])
    expected = [kernel6(0.1) * kernel6(-0.2), kernel6(0.5) * kernel6(0.5)]
    assert np.allclose(kernel6(pts), expected)


def test_pi_hat_recovers_smooth_signal():
    ds, p = _toy_dataset(n=4000, seed=1)
    pi = estimate_pi(ds.x, ds, h1=0.2)
    interior = (ds.x[:, 1] > 0.2) & (ds.x[:, 1] < 0.8)
    assert np.mean(np.abs(pi[interior] - p[interior])) < 0.05


def test_pi_hat_respects_discrete_strata():
    # a pure level shift in x1 must be reproduced exactly at matched x2
    rng = np.random.default_rng(3)
    n = 2000
    x1 = (np.arange(n) % 2).astype(float)
    x2 = np.full(n, 0.5)
    w = x1.copy()  # W = X1 deterministically
    ds = Dataset(
        y=np.ones(n),
        delta1=np.ones(n),
        delta2=np.zeros(n),
        z=rng.integers(0, 2, n).astype(float),
        w=w,
        x=np.column_stack([x1, x2]),
        schema=SCHEMA,
    )
    pi = estimate_pi(np.array([[0.0, 0.5], [1.0, 0.5]]), ds, h1=0.5)
    assert abs(pi[0] - 0.0) < 1e-12
    assert abs(pi[1] - 1.0) < 1e-12


def test_pi_hat_empty_stratum_raises():
    ds, _ = _toy_dataset(n=100, seed=2)
    with pytest.raises(WeightError, match="stratum"):
        estimate_pi(np.array([[2.0, 0.5]]), ds, h1=0.2)


def test_nu_hat_within_stratum_constant_signal():
    # inside the (delta1, delta2, z) cell W has mean 1; nu-hat must say so
    rng = np.random.default_rng(4)
    n = 500
    d1 = (np.arange(n) % 2).astype(float)
    ds = Dataset(
        y=rng.gamma(2.0, size=n) + 0.05,
        delta1=d1,
        delta2=np.zeros(n),
        z=np.zeros(n),
        w=d1.copy(),  # W perfectly tied to the stratum
        x=np.column_stack([np.zeros(n), rng.uniform(size=n)]),
        schema=SCHEMA,
    )
    r = np.column_stack([ds.y[:5], ds.x[:5, 1:]])
    nu1 = estimate_nu(r, 1, 0, 0, ds, h2=5.0, x_discrete=ds.x[:5, :1])
    nu0 = estimate_nu(r, 0, 0, 0, ds, h2=5.0, x_discrete=ds.x[:5, :1])
    assert np.max(np.abs(nu1 - 1.0)) < 1e-12
    assert np.max(np.abs(nu0 - 0.0)) < 1e-12


def test_kappa_bounds_and_shape():
    ds, _ = _toy_dataset(n=400, seed=5)
    config = KernelConfig(h1=0.3, h2=0.5)
    kappa = estimate_kappa(ds, config)
    bounds = TruncationBounds.default(ds.n)
    assert kappa.shape == (ds.n,)
    assert np.all(kappa >= bounds.a_l - 1e-15)
    assert np.all(kappa <= bounds.a_u + 1e-15)


def test_kappa_oracle_direction():
    # construct a sample where W = Z (all compliers): kappa should be high
    # wherever the regressions can see that, versus an anti-complier sample
    rng = np.random.default_rng(6)
    n = 800
    x1 = rng.integers(0, 2, n).astype(float)
    x2 = rng.uniform(size=n)
    w = (rng.uniform(size=n) < 0.5).astype(float)
    base = dict(
        y=rng.gamma(2.0, size=n) + 0.05,
        delta1=np.zeros(n),
        delta2=np.zeros(n),
        x=np.column_stack([x1, x2]),
        schema=SCHEMA,
    )
    complier = Dataset(z=w.copy(), w=w, **{k: v.copy() if hasattr(v, "copy") else v for k, v in base.items()})
    config = KernelConfig(h1=0.3, h2=0.5)
    kap_co = estimate_kappa(complier, config)
    assert np.mean(kap_co) > 0.9


def test_per_coordinate_h2_equals_rescaled_shared_bandwidth():
    # a per-coordinate bandwidth vector must act like rescaling each
    # coordinate before applying a shared unit bandwidth
    ds, _ = _toy_dataset(n=400, seed=9)
    hvec = (3.0, 1.0)
    kap_vec = estimate_kappa(ds, KernelConfig(h1=0.3, h2=hvec))
    scaled = Dataset(
        y=ds.y / hvec[0],
        delta1=ds.delta1,
        delta2=ds.delta2,
        z=ds.z,
        w=ds.w,
        x=np.column_stack([ds.x[:, 0], ds.x[:, 1] / hvec[1]]),
        schema=SCHEMA,
    )
    kap_shared = estimate_kappa(scaled, KernelConfig(h1=0.3 / hvec[1], h2=1.0))
    assert np.allclose(kap_vec, kap_shared, atol=1e-12)


def test_kernel_config_rejects_nonpositive_vector_bandwidth():
    with pytest.raises(WeightError):
        KernelConfig(h1=0.3, h2=(0.5, 0.0))


def test_truncation_bounds_validation():
    with pytest.raises(WeightError):
        TruncationBounds(0.6, 0.4)
    b = TruncationBounds.default(1000)
    assert b.a_l == 0.01 and b.a_u == 0.99


def test_cv_returns_config_from_grid():
    ds, _ = _toy_dataset(n=300, seed=7)
    grid = (0.1, 0.3, 0.6, 1.0)
    cfg = cross_validate_bandwidths(ds, grid, folds=5, seed=0)
    assert cfg.h1 in grid and cfg.h2 in grid
    assert cfg.folds == 5


def test_cv_prefers_signal_bandwidth():
    # strongly smooth truth: tiny bandwidths overfit, CV should avoid the
    # smallest grid point
    ds, _ = _toy_dataset(n=800, seed=8)
    cfg = cross_validate_bandwidths(ds, (0.01, 0.5), folds=5, seed=0)
    assert cfg.h1 == 0.5


def test_cv_deterministic_in_seed():
    ds, _ = _toy_dataset(n=300, seed=9)
    a = cross_validate_bandwidths(ds, (0.1, 0.4, 0.8), folds=4, seed=11)
    b = cross_validate_bandwidths(ds, (0.1, 0.4, 0.8), folds=4, seed=11)
    assert (a.h1, a.h2) == (b.h1, b.h2)
