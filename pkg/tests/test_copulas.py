import numpy as np
import pytest

from cchr import copulas
from cchr.copulas import CopulaSpec, cdf, density, partial_u, partial_v, sample_pair, tau_from_xi, xi_from_tau

PARAMETRIC = ("frank", "gumbel", "joe", "gaussian", "clayton90", "clayton180", "clayton270")

# representative specs with moderate dependence
SPECS = [
    CopulaSpec("independence"),
    xi_from_tau("frank", 0.25),
    xi_from_tau("frank", -0.4),
    xi_from_tau("gumbel", 0.3),
    xi_from_tau("joe", 0.35),
    xi_from_tau("gaussian", 0.5),
    xi_from_tau("gaussian", -0.3),
    xi_from_tau("clayton90", -0.25),
    xi_from_tau("clayton180", 0.25),
    xi_from_tau("clayton270", -0.25),
]


def _interior_grid(k=9):
    g = np.linspace(0.08, 0.92, k)
    u, v = np.meshgrid(g, g)
    return u.ravel(), v.ravel()


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"{s.family}")
def test_partials_match_finite_differences(spec):
    u, v = _interior_grid()
    eps = 1e-6
    fd_u = (cdf(spec, u + eps, v) - cdf(spec, u - eps, v)) / (2 * eps)
    fd_v = (cdf(spec, u, v + eps) - cdf(spec, u, v - eps)) / (2 * eps)
    assert np.max(np.abs(partial_u(spec, u, v) - fd_u)) < 1e-6
    assert np.max(np.abs(partial_v(spec, u, v) - fd_v)) < 1e-6


def _graded_rule(n=32):
    # panels graded toward the corners; several densities blow up there
    edges = np.array([0, 1e-8, 1e-6, 1e-4, 1e-2, 0.1, 0.5, 0.9, 0.99, 1 - 1e-4, 1 - 1e-6, 1 - 1e-8, 1])
    nodes, weights = np.polynomial.legendre.leggauss(n)
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        xs.append(0.5 * (b - a) * (nodes + 1) + a)
        ws.append(0.5 * (b - a) * weights)
    return np.concatenate(xs), np.concatenate(ws)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"{s.family}")
def test_density_integrates_to_one(spec):
    x, w = _graded_rule()
    u, v = np.meshgrid(x, x)
    dens = density(spec, u.ravel(), v.ravel()).reshape(u.shape)
    total = w @ dens @ w
    assert abs(total - 1.0) < 1e-6


def test_density_matches_mixed_finite_difference():
    # second oracle: c = d2C/du dv by central differences
    spec = xi_from_tau("frank", 0.3)
    u, v = _interior_grid(5)
    eps = 1e-4
    fd = (
        cdf(spec, u + eps, v + eps)
        - cdf(spec, u + eps, v - eps)
        - cdf(spec, u - eps, v + eps)
        + cdf(spec, u - eps, v - eps)
    ) / (4 * eps * eps)
    assert np.max(np.abs(density(spec, u, v) - fd)) < 1e-5


def test_rotation_identities():
    u, v = _interior_grid()
    xi = 1.7
    c90 = cdf(CopulaSpec("clayton90", xi), u, v)
    c180 = cdf(CopulaSpec("clayton180", xi), u, v)
    c270 = cdf(CopulaSpec("clayton270", xi), u, v)
    assert np.max(np.abs(c90 - (v - copulas._clayton_cdf(xi, 1 - u, v)))) < 1e-12
    assert np.max(np.abs(c180 - (u + v - 1 + copulas._clayton_cdf(xi, 1 - u, 1 - v)))) < 1e-12
    assert np.max(np.abs(c270 - (u - copulas._clayton_cdf(xi, u, 1 - v)))) < 1e-12


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"{s.family}")
def test_frechet_bounds_on_grid(spec):
    g = np.linspace(0.0, 1.0, 50)
    u, v = np.meshgrid(g, g)
    c = cdf(spec, u.ravel(), v.ravel())
    lower = np.maximum(u.ravel() + v.ravel() - 1.0, 0.0)
    upper = np.minimum(u.ravel(), v.ravel())
    assert np.all(c >= lower - 1e-12)
    assert np.all(c <= upper + 1e-12)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"{s.family}")
def test_boundary_values(spec):
    g = np.linspace(0.0, 1.0, 11)
    assert np.max(np.abs(cdf(spec, g, np.ones_like(g)) - g)) < 1e-12
    assert np.max(np.abs(cdf(spec, np.ones_like(g), g) - g)) < 1e-12
    assert np.max(np.abs(cdf(spec, g, np.zeros_like(g)))) < 1e-12
    assert np.max(np.abs(cdf(spec, np.zeros_like(g), g))) < 1e-12


@pytest.mark.parametrize("family", PARAMETRIC)
def test_tau_xi_round_trip(family):
    lo, hi = copulas.TAU_RANGE[family]
    pad = 0.02
    taus = np.linspace(lo + pad, hi - pad, 25)
    taus = taus[np.abs(taus) > 5e-3]
    for tau in taus:
        spec = xi_from_tau(family, tau)
        assert abs(tau_from_xi(spec) - tau) < 1e-8, (family, tau)


def _tau_by_quadrature(spec, n=120):
    # tau = 4 E[C(U,V)] - 1 with (U,V) ~ C, i.e. 4 * integral of C * c - 1
    nodes, weights = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (nodes + 1.0)
    w = 0.5 * weights
    u, v = np.meshgrid(x, x)
    val = cdf(spec, u.ravel(), v.ravel()) * density(spec, u.ravel(), v.ravel())
    return 4.0 * float(w @ val.reshape(u.shape) @ w) - 1.0


@pytest.mark.parametrize(
    "family,tau",
    [("frank", 0.25), ("gumbel", 0.3), ("joe", 0.3), ("gaussian", 0.4), ("clayton180", 0.35), ("clayton90", -0.3)],
)
def test_tau_map_against_quadrature(family, tau):
    spec = xi_from_tau(family, tau)
    assert abs(_tau_by_quadrature(spec) - tau) < 2e-3


def test_clayton180_closed_form():
    for tau in np.linspace(0.05, 0.85, 9):
        spec = xi_from_tau("clayton180", tau)
        assert abs(spec.xi - 2 * tau / (1 - tau)) < 1e-10


def _empirical_tau(u, v):
    from scipy.stats import kendalltau

    return kendalltau(u, v).statistic


@pytest.mark.parametrize(
    "family,tau",
    [("frank", 0.25), ("clayton90", -0.25), ("gaussian", 0.5), ("gumbel", 0.4), ("joe", 0.4), ("clayton270", -0.4)],
)
def test_sampler_kendall_tau(family, tau):
    rng = np.random.default_rng(7)
    u, v = sample_pair(xi_from_tau(family, tau), rng, size=100_000)
    assert np.all((u > 0) & (u < 1) & (v > 0) & (v < 1))
    assert abs(_empirical_tau(u, v) - tau) < 0.02


def test_sampler_uniform_marginals():
    rng = np.random.default_rng(11)
    u, v = sample_pair(xi_from_tau("frank", 0.6), rng, size=50_000)
    qs = np.linspace(0.1, 0.9, 9)
    assert np.max(np.abs(np.quantile(v, qs) - qs)) < 0.01


def test_sampler_conditional_inversion():
    # v returned by the sampler solves partial_u(u, v) = p
    spec = xi_from_tau("joe", 0.45)
    rng = np.random.default_rng(3)
    u, v = sample_pair(spec, rng, size=2_000)
    # recompute the conditional probability and check it is uniform-consistent
    p = partial_u(spec, u, v)
    assert np.all((p >= 0) & (p <= 1))
    from scipy.stats import kstest

    assert kstest(p, "uniform").statistic < 0.03


def test_spec_rejects_out_of_domain_xi():
    with pytest.raises(copulas.CopulaError):
        CopulaSpec("gumbel", 0.9)
    with pytest.raises(copulas.CopulaError):
        CopulaSpec("gaussian", 1.2)
    with pytest.raises(copulas.CopulaError):
        CopulaSpec("clayton90", -0.5)


def test_bvn_cdf_against_quadrature():
    from scipy.stats import multivariate_normal

    for rho in (-0.9, -0.3, 0.0, 0.55, 0.95):
        mvn = multivariate_normal(mean=[0, 0], cov=[[1, rho], [rho, 1]])
        for h, k in ((0.0, 0.0), (-1.2, 0.7), (2.0, 2.0), (-2.5, -0.5)):
            assert abs(copulas.bvn_cdf(h, k, rho) - mvn.cdf([h, k])) < 5e-7
