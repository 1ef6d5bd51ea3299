"""Bivariate parametric copulas: CDF, h-functions, density, Kendall tau, sampling.

Shipped families: independence, frank, gumbel, joe, gaussian and the 90/180/270
degree rotations of the strict Clayton copula. The non-rotated Clayton is
deliberately absent (its lower tail breaks the vanishing h-function limit that
the identification argument needs).

All evaluators are vectorized over (u, v). Inputs to density and the partial
derivatives are clamped to [1e-12, 1 - 1e-12] so that likelihood code never
sees non-finite values at extreme observations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri

FAMILIES = (
    "independence",
    "frank",
    "gumbel",
    "joe",
    "gaussian",
    "clayton90",
    "clayton180",
    "clayton270",
)

# Admissible open Kendall-tau interval per parametric family.
TAU_RANGE = {
    "frank": (-1.0, 1.0),
    "gumbel": (0.0, 1.0),
    "joe": (0.0, 1.0),
    "gaussian": (-1.0, 1.0),
    "clayton90": (-1.0, 0.0),
    "clayton180": (0.0, 1.0),
    "clayton270": (-1.0, 0.0),
}

_CLAMP = 1e-12


class CopulaError(ValueError):
    pass


def _check_xi(family, xi):
    if family == "independence":
        if xi is not None:
            raise CopulaError("independence copula takes no parameter")
        return
    if xi is None or not np.isfinite(xi):
        raise CopulaError(f"{family} copula requires a finite parameter")
    if family == "frank" and xi == 0.0:
        raise CopulaError("frank copula requires xi != 0")
    if family in ("gumbel", "joe") and xi < 1.0:
        raise CopulaError(f"{family} copula requires xi >= 1")
    if family == "gaussian" and not -1.0 < xi < 1.0:
        raise CopulaError("gaussian copula requires xi in (-1, 1)")
    if family.startswith("clayton") and xi <= 0.0:
        raise CopulaError("rotated clayton copulas require xi > 0")


@dataclass(frozen=True)
class CopulaSpec:
    """Family tag plus association parameter (None for independence)."""

    family: str
    xi: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise CopulaError(f"unknown copula family {self.family!r}")
        _check_xi(self.family, self.xi)


def _clamp(a):
    return np.clip(np.asarray(a, dtype=float), _CLAMP, 1.0 - _CLAMP)


# ---------------------------------------------------------------------------
# base (unrotated) building blocks, evaluated on clamped interior points


def _frank_cdf(xi, u, v):
    # expm1/log1p keep this stable down to |xi| ~ 1e-10
    gu = np.expm1(-xi * u)
    gv = np.expm1(-xi * v)
    g1 = np.expm1(-xi)
    return -np.log1p(gu * gv / g1) / xi


def _frank_h1(xi, u, v):
    gu = np.expm1(-xi * u)
    gv = np.expm1(-xi * v)
    g1 = np.expm1(-xi)
    return np.exp(-xi * u) * gv / (g1 + gu * gv)


def _frank_density(xi, u, v):
    gu = np.expm1(-xi * u)
    gv = np.expm1(-xi * v)
    g1 = np.expm1(-xi)
    denom = g1 + gu * gv
    return -xi * np.exp(-xi * (u + v)) * g1 / denom**2


def _gumbel_parts(xi, u, v):
    s = -np.log(u)
    t = -np.log(v)
    a = s**xi + t**xi
    cdf = np.exp(-(a ** (1.0 / xi)))
    return s, t, a, cdf


def _gumbel_cdf(xi, u, v):
    return _gumbel_parts(xi, u, v)[3]


def _gumbel_h1(xi, u, v):
    s, t, a, cdf = _gumbel_parts(xi, u, v)
    return cdf * a ** (1.0 / xi - 1.0) * s ** (xi - 1.0) / u


def _gumbel_density(xi, u, v):
    s, t, a, cdf = _gumbel_parts(xi, u, v)
    return (
        cdf
        * (s * t) ** (xi - 1.0)
        * a ** (1.0 / xi - 2.0)
        * (a ** (1.0 / xi) + xi - 1.0)
        / (u * v)
    )


def _joe_parts(xi, u, v):
    x = (1.0 - u) ** xi
    y = (1.0 - v) ** xi
    a = x + y - x * y
    return x, y, a


def _joe_cdf(xi, u, v):
    _, _, a = _joe_parts(xi, u, v)
    return 1.0 - a ** (1.0 / xi)


def _joe_h1(xi, u, v):
    x, y, a = _joe_parts(xi, u, v)
    return a ** (1.0 / xi - 1.0) * (1.0 - u) ** (xi - 1.0) * (1.0 - y)


def _joe_density(xi, u, v):
    x, y, a = _joe_parts(xi, u, v)
    return (
        a ** (1.0 / xi - 2.0)
        * ((1.0 - u) * (1.0 - v)) ** (xi - 1.0)
        * (xi - 1.0 + a)
    )


def _clayton_cdf(xi, u, v):
    return (u ** (-xi) + v ** (-xi) - 1.0) ** (-1.0 / xi)


def _clayton_h1(xi, u, v):
    return u ** (-xi - 1.0) * (u ** (-xi) + v ** (-xi) - 1.0) ** (-1.0 / xi - 1.0)


def _clayton_density(xi, u, v):
    return (
        (1.0 + xi)
        * (u * v) ** (-xi - 1.0)
        * (u ** (-xi) + v ** (-xi) - 1.0) ** (-1.0 / xi - 2.0)
    )


# ---------------------------------------------------------------------------
# bivariate standard normal CDF (Drezner-Wesolowsky/Genz algorithm, in-repo)

_GL_NODES = {
    6: (
        np.array([0.1713244923791705, 0.3607615730481384, 0.4679139345726904]),
        np.array([0.9324695142031522, 0.6612093864662647, 0.2386191860831970]),
    ),
    12: (
        np.array(
            [
                0.04717533638651177,
                0.1069393259953183,
                0.1600783285433464,
                0.2031674267230659,
                0.2334925365383547,
                0.2491470458134029,
            ]
        ),
        np.array(
            [
                0.9815606342467191,
                0.9041172563704750,
                0.7699026741943050,
                0.5873179542866171,
                0.3678314989981802,
                0.1252334085114692,
            ]
        ),
    ),
    20: (
        np.array(
            [
                0.01761400713915212,
                0.04060142980038694,
                0.06267204833410906,
                0.08327674157670475,
                0.1019301198172404,
                0.1181945319615184,
                0.1316886384491766,
                0.1420961093183821,
                0.1491729864726037,
                0.1527533871307259,
            ]
        ),
        np.array(
            [
                0.9931285991850949,
                0.9639719272779138,
                0.9122344282513259,
                0.8391169718222188,
                0.7463319064601508,
                0.6360536807265150,
                0.5108670019508271,
                0.3737060887154196,
                0.2277858511416451,
                0.07652652113349734,
            ]
        ),
    ),
}


def bvn_cdf(h, k, rho):
    """P(X <= h, Y <= k) for standard bivariate normal with correlation rho.

    Vectorized over (h, k); rho is a scalar in (-1, 1). Absolute accuracy is
    well below 1e-10 (Gauss-Legendre rule after Drezner & Wesolowsky, in the
    arrangement popularized by Genz).
    """
    h = np.asarray(h, dtype=float)
    k = np.asarray(k, dtype=float)
    h, k = np.broadcast_arrays(h, k)
    return _bvnu(-h, -k, float(rho))


def _bvnu(dh, dk, r):
    # P(X > dh, Y > dk)
    if abs(r) < 0.3:
        w, x = _GL_NODES[6]
    elif abs(r) < 0.75:
        w, x = _GL_NODES[12]
    else:
        w, x = _GL_NODES[20]

    h = np.array(dh, dtype=float, copy=True)
    k = np.array(dk, dtype=float, copy=True)
    hk = h * k
    bvn = np.zeros_like(h)
    if abs(r) < 0.925:
        hs = (h * h + k * k) / 2.0
        asr = np.arcsin(r)
        for wi, xi in zip(w, x):
            for sn in (np.sin(asr * (1.0 - xi) / 2.0), np.sin(asr * (1.0 + xi) / 2.0)):
                bvn += wi * np.exp((sn * hk - hs) / (1.0 - sn * sn))
        bvn = bvn * asr / (4.0 * np.pi) + ndtr(-h) * ndtr(-k)
    else:
        if r < 0.0:
            k = -k
            hk = -hk
        if abs(r) < 1.0:
            a_s = (1.0 - r) * (1.0 + r)
            a = np.sqrt(a_s)
            bs = (h - k) ** 2
            c = (4.0 - hk) / 8.0
            d = (12.0 - hk) / 16.0
            asr = -(bs / a_s + hk) / 2.0
            bvn = np.where(
                asr > -100.0,
                a * np.exp(asr) * (1.0 - c * (bs - a_s) * (1.0 - d * bs / 5.0) / 3.0 + c * d * a_s * a_s / 5.0),
                0.0,
            )
            b = np.sqrt(bs)
            sp = np.sqrt(2.0 * np.pi) * ndtr(-b / a)
            bvn = bvn - np.where(
                -hk < 100.0,
                np.exp(-hk / 2.0) * sp * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0),
                0.0,
            )
            a = a / 2.0
            for wi, xi in zip(w, x):
                for sign in (-1.0, 1.0):
                    xs = (a * (sign * xi + 1.0)) ** 2
                    rs = np.sqrt(1.0 - xs)
                    asr1 = -(bs / xs + hk) / 2.0
                    term = np.where(
                        asr1 > -100.0,
                        a
                        * wi
                        * np.exp(asr1)
                        * (
                            np.exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs
                            - (1.0 + c * xs * (1.0 + d * xs))
                        ),
                        0.0,
                    )
                    bvn = bvn + term
            bvn = -bvn / (2.0 * np.pi)
        if r > 0.0:
            bvn = bvn + ndtr(-np.maximum(h, k))
        else:
            bvn = -bvn
            bvn = bvn + np.where(k > h, ndtr(k) - ndtr(h), 0.0)
    return np.clip(bvn, 0.0, 1.0)


def _gaussian_cdf(rho, u, v):
    return bvn_cdf(ndtri(u), ndtri(v), rho)


def _gaussian_h1(rho, u, v):
    a = ndtri(u)
    b = ndtri(v)
    return ndtr((b - rho * a) / np.sqrt(1.0 - rho * rho))


def _gaussian_density(rho, u, v):
    a = ndtri(u)
    b = ndtri(v)
    r2 = 1.0 - rho * rho
    expo = -(rho * rho * (a * a + b * b) - 2.0 * rho * a * b) / (2.0 * r2)
    return np.exp(expo) / np.sqrt(r2)


_BASE = {
    "frank": (_frank_cdf, _frank_h1, _frank_density),
    "gumbel": (_gumbel_cdf, _gumbel_h1, _gumbel_density),
    "joe": (_joe_cdf, _joe_h1, _joe_density),
    "gaussian": (_gaussian_cdf, _gaussian_h1, _gaussian_density),
    "clayton": (_clayton_cdf, _clayton_h1, _clayton_density),
}


def _base_family(family):
    if family.startswith("clayton"):
        return "clayton", int(family[7:])
    return family, 0


# ---------------------------------------------------------------------------
# public surface


def cdf(spec, u, v):
    """Copula CDF C(u, v). Exact on the boundary of the unit square."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any((u < 0) | (u > 1) | (v < 0) | (v > 1)):
        raise CopulaError("u, v must lie in [0, 1]")
    if spec.family == "independence":
        return u * v
    base, rot = _base_family(spec.family)
    base_cdf = _BASE[base][0]
    uc, vc = _clamp(u), _clamp(v)
    if rot == 0:
        out = base_cdf(spec.xi, uc, vc)
    elif rot == 90:
        out = vc - base_cdf(spec.xi, 1.0 - uc, vc)
    elif rot == 180:
        out = uc + vc - 1.0 + base_cdf(spec.xi, 1.0 - uc, 1.0 - vc)
    else:
        out = uc - base_cdf(spec.xi, uc, 1.0 - vc)
    # the Frechet clip also pins the boundary values exactly
    out = np.clip(np.asarray(out), np.maximum(u + v - 1.0, 0.0), np.minimum(u, v))
    return out[()] if out.ndim == 0 else out


def partial_u(spec, u, v):
    """h-function zeta_1(u, v) = dC/du, the conditional CDF of V given U=u."""
    u, v = _clamp(u), _clamp(v)
    if spec.family == "independence":
        res = np.broadcast_arrays(u, v)[1].copy()
        return res[()] if res.ndim == 0 else res
    base, rot = _base_family(spec.family)
    h1 = _BASE[base][1]
    if rot == 0:
        out = h1(spec.xi, u, v)
    elif rot == 90:
        out = h1(spec.xi, 1.0 - u, v)
    elif rot == 180:
        out = 1.0 - h1(spec.xi, 1.0 - u, 1.0 - v)
    else:
        out = 1.0 - h1(spec.xi, u, 1.0 - v)
    return np.clip(out, 0.0, 1.0)


def partial_v(spec, u, v):
    """h-function zeta_2(u, v) = dC/dv; by symmetry of the shipped families."""
    # every base family here is exchangeable, so dC/dv(u,v) = dC/du(v,u)
    # with rotations mapped accordingly
    u, v = _clamp(u), _clamp(v)
    if spec.family == "independence":
        res = np.broadcast_arrays(u, v)[0].copy()
        return res[()] if res.ndim == 0 else res
    base, rot = _base_family(spec.family)
    h1 = _BASE[base][1]
    if rot == 0:
        out = h1(spec.xi, v, u)
    elif rot == 90:
        # C90(u,v) = v - C(1-u, v) => dC90/dv = 1 - C_2(1-u, v)
        out = 1.0 - h1(spec.xi, v, 1.0 - u)
    elif rot == 180:
        out = 1.0 - h1(spec.xi, 1.0 - v, 1.0 - u)
    else:
        # C270(u,v) = u - C(u, 1-v) => dC270/dv = C_2(u, 1-v)
        out = h1(spec.xi, 1.0 - v, u)
    return np.clip(out, 0.0, 1.0)


def density(spec, u, v):
    """Copula density c(u, v), strictly positive on the open unit square."""
    u, v = _clamp(u), _clamp(v)
    if spec.family == "independence":
        out = np.ones(np.broadcast_shapes(u.shape, v.shape))
        return out[()] if out.ndim == 0 else out
    base, rot = _base_family(spec.family)
    dens = _BASE[base][2]
    if rot == 0:
        out = dens(spec.xi, u, v)
    elif rot == 90:
        out = dens(spec.xi, 1.0 - u, v)
    elif rot == 180:
        out = dens(spec.xi, 1.0 - u, 1.0 - v)
    else:
        out = dens(spec.xi, u, 1.0 - v)
    return np.maximum(out, 0.0)


# ---------------------------------------------------------------------------
# Kendall tau


_DEBYE_NODES = np.polynomial.legendre.leggauss(60)


def _debye1(x):
    """D1(x) = (1/x) * int_0^x t/(e^t - 1) dt for x > 0."""
    if x > 35.0:
        # the integrand's tail beyond 35 is below 1e-13
        return (np.pi**2 / 6.0) / x
    nodes, weights = _DEBYE_NODES
    t = 0.5 * x * (nodes + 1.0)
    integrand = np.where(t > 1e-12, t / np.expm1(t), 1.0 - t / 2.0)
    return float(0.5 * np.sum(weights * integrand))


def _frank_tau_exact(xi):
    s = 1.0 if xi > 0 else -1.0
    x = abs(xi)
    if x < 1e-10:
        return xi / 9.0
    d1 = _debye1(x)
    return s * (1.0 - 4.0 / x * (1.0 - d1))


def _joe_tau(xi):
    if xi == 1.0:
        return 0.0
    # Joe (1997): tau = 1 - 4 * sum_{k>=1} 1 / (k (xi k + 2) (xi (k-1) + 2))
    k = np.arange(1, 200001, dtype=float)
    terms = 1.0 / (k * (xi * k + 2.0) * (xi * (k - 1.0) + 2.0))
    return float(1.0 - 4.0 * np.sum(terms))


def tau_from_xi(spec):
    """Kendall's tau of the copula (closed form or fast convergent series)."""
    family, xi = spec.family, spec.xi
    if family == "independence":
        return 0.0
    if family == "frank":
        return _frank_tau_exact(xi)
    if family == "gumbel":
        return 1.0 - 1.0 / xi
    if family == "joe":
        return _joe_tau(xi)
    if family == "gaussian":
        return 2.0 / np.pi * np.arcsin(xi)
    if family == "clayton180":
        return xi / (xi + 2.0)
    # 90/270 rotations flip the sign of the base Clayton tau
    return -xi / (xi + 2.0)


def xi_from_tau(family, tau):
    """Invert the tau mapping; the returned spec satisfies tau_from_xi to 1e-10."""
    if family == "independence":
        if tau != 0.0:
            raise CopulaError("independence copula has tau = 0")
        return CopulaSpec("independence")
    lo, hi = TAU_RANGE[family]
    if not lo < tau < hi or tau == 0.0:
        raise CopulaError(f"tau={tau} is not admissible for family {family!r}")
    if family == "gumbel":
        return CopulaSpec(family, 1.0 / (1.0 - tau))
    if family == "gaussian":
        return CopulaSpec(family, float(np.sin(np.pi * tau / 2.0)))
    if family == "clayton180":
        return CopulaSpec(family, 2.0 * tau / (1.0 - tau))
    if family in ("clayton90", "clayton270"):
        return CopulaSpec(family, -2.0 * tau / (1.0 + tau))
    if family == "frank":
        s = 1.0 if tau > 0 else -1.0
        xi = s * brentq(lambda x: _frank_tau_exact(s * x) - tau, 1e-9, 1e7, xtol=1e-13)
        return CopulaSpec(family, float(xi))
    if family == "joe":
        xi = brentq(lambda x: _joe_tau(x) - tau, 1.0 + 1e-12, 1e6, xtol=1e-12)
        return CopulaSpec(family, float(xi))
    raise CopulaError(f"unknown family {family!r}")


# ---------------------------------------------------------------------------
# sampling (conditional distribution method)


def sample_pair(spec, rng, size=1):
    """Draw `size` pairs from the copula by inverting the h-function.

    u and an auxiliary uniform p are drawn; v solves partial_u(u, v) = p by
    bracketed bisection to 1e-10. Returns arrays (u, v) of shape (size,).
    """
    u = rng.uniform(size=size)
    p = rng.uniform(size=size)
    if spec.family == "independence":
        return u, p
    if spec.family == "gaussian":
        a = ndtri(u)
        v = ndtr(spec.xi * a + np.sqrt(1.0 - spec.xi**2) * ndtri(p))
        return u, np.clip(v, _CLAMP, 1.0 - _CLAMP)
    lo = np.full(size, _CLAMP)
    hi = np.full(size, 1.0 - _CLAMP)
    flo = partial_u(spec, u, lo) - p
    fhi = partial_u(spec, u, hi) - p
    if np.any(flo > 1e-6) or np.any(fhi < -1e-6):
        raise CopulaError("h-function failed to bracket the conditional quantile")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        fm = partial_u(spec, u, mid) - p
        take_hi = fm >= 0.0
        hi = np.where(take_hi, mid, hi)
        lo = np.where(take_hi, lo, mid)
    return u, 0.5 * (lo + hi)
