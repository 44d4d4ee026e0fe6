"""Real-order modified Bessel functions, Kummer's function and the
Yordanov--Zhang sphere integral.

All routines work on Python floats and are pure.  The exponentially scaled
variants ``bessel_i_scaled`` (``e^{-z} I_nu(z)``) and ``bessel_k_scaled``
(``e^{z} K_nu(z)``) are what the kernel code builds on; the unscaled
functions just multiply the scale factor back in and raise
:class:`OverflowSignal` when that is not representable.

Methods
-------
``I_nu``
    Ascending power series for ``z <= max(25, nu**2)``, large-argument
    Hankel expansion beyond.
``K_nu``
    Temme's method: the order is split as ``nu = mu + m`` with
    ``|mu| <= 1/2``, ``K_mu`` and ``K_{mu+1}`` come from Temme's series
    (``z < 2``) or Steed's continued fraction (``z >= 2``), and upward
    recurrence finishes the job.  This is smooth in ``nu`` across integers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "SpecialEvalConfig",
    "DomainError",
    "ConvergenceError",
    "OverflowSignal",
    "bessel_i",
    "bessel_i_scaled",
    "bessel_k",
    "bessel_k_scaled",
    "bessel_i_deriv",
    "bessel_k_deriv",
    "kummer_m",
    "sphere_area",
    "yz_phi",
    "yz_phi_scaled",
    "yz_phi_closed_form",
]


class DomainError(ValueError):
    """Argument outside the domain of the function."""


class ConvergenceError(RuntimeError):
    """A series, continued fraction or quadrature did not converge."""


class OverflowSignal(OverflowError):
    """The result is not representable as a float; use the scaled variant."""


@dataclass(frozen=True)
class SpecialEvalConfig:
    series_tolerance: float = 1e-16
    max_terms: int = 2000
    # Kept for interface completeness; Temme's method does not need a guard.
    order_integer_guard: float = 1e-3

    def __post_init__(self):
        if not (0.0 < self.series_tolerance <= 1e-6):
            raise ValueError("series_tolerance must lie in (0, 1e-6]")
        if self.max_terms < 50:
            raise ValueError("max_terms must be >= 50")


DEFAULT_CONFIG = SpecialEvalConfig()

_LOG_MAX = math.log(np.finfo(float).max)

# Taylor coefficients of 1/Gamma(1 + x) about x = 0.
_RGAMMA1P = (
    1.0,
    0.57721566490153286061,
    -0.65587807152025388108,
    -0.042002635034095235529,
    0.1665386113822914895,
    -0.042197734555544336748,
    -0.0096219715278769735621,
    0.0072189432466630995424,
    -0.0011651675918590651121,
    -0.00021524167411495097282,
    0.00012805028238811618615,
    -0.000020134854780788238656,
    -1.2504934821426706573e-6,
    1.1330272319816958824e-6,
    -2.0563384169776071035e-7,
    6.1160951044814158179e-9,
    5.0020076444692229301e-9,
    -1.1812745704870201446e-9,
    1.0434267116911005105e-10,
    7.782263439905071254e-12,
    -3.6968056186422057082e-12,
    5.100370287454475979e-13,
    -2.0583260535665067832e-14,
    -5.3481225394230179824e-15,
    1.2267786282382607902e-15,
    -1.1812593016974587695e-16,
    1.1866922547516003326e-18,
    1.4123806553180317816e-18,
)

# Sign applied to the power-series terms of I_nu.  Only ever changed by the
# fault-injection path of the verification driver.
_series_sign = 1.0


def _series_switch(nu: float) -> float:
    return max(25.0, min(nu * nu, 500.0))


def _i_series_scaled(nu: float, z: float, cfg: SpecialEvalConfig) -> float:
    # sum_m (z/2)^(2m+nu) / (m! Gamma(m+nu+1)), times e^{-z}
    if nu + 1.0 <= 0.0 and float(nu).is_integer():
        nu = -nu  # I_{-m} = I_m
    log_lead = nu * math.log(0.5 * z) - math.lgamma(nu + 1.0) - z
    lead_sign = 1.0 if nu + 1.0 > 0 else math.copysign(1.0, math.gamma(nu + 1.0))
    quarter_z2 = 0.25 * z * z
    total = 1.0
    term = 1.0
    small = 0
    for m in range(1, cfg.max_terms + 1):
        term *= _series_sign * quarter_z2 / (m * (m + nu))
        total += term
        if abs(term) < cfg.series_tolerance * abs(total):
            small += 1
            if small == 3:
                return lead_sign * math.exp(log_lead) * total
        else:
            small = 0
    raise ConvergenceError(f"I_nu series: max_terms exhausted (nu={nu}, z={z})")


def _i_asymptotic_scaled(nu: float, z: float, cfg: SpecialEvalConfig) -> float:
    # e^{-z} I_nu(z) ~ (2 pi z)^{-1/2} sum_k (-1)^k a_k(nu) / z^k
    mu4 = 4.0 * nu * nu
    total = 1.0
    term = 1.0
    prev = math.inf
    for k in range(1, cfg.max_terms + 1):
        term *= -(mu4 - (2 * k - 1) ** 2) / (8.0 * k * z)
        if term == 0.0:
            break
        if abs(term) > prev:
            break  # past the smallest term of the divergent expansion
        total += term
        prev = abs(term)
        if prev < cfg.series_tolerance * abs(total):
            break
    return total / math.sqrt(2.0 * math.pi * z)


def bessel_i_scaled(nu: float, z: float, cfg: SpecialEvalConfig = DEFAULT_CONFIG) -> float:
    """Return ``e^{-z} I_nu(z)`` for ``z >= 0``."""
    nu = float(nu)
    z = float(z)
    if z < 0 or not math.isfinite(z):
        raise DomainError(f"bessel_i requires finite z >= 0, got {z}")
    if z == 0.0:
        if nu == 0.0:
            return 1.0
        if nu > 0.0 or float(nu).is_integer():
            return 0.0
        raise DomainError("I_nu(0) is infinite for negative non-integer nu")
    if z <= _series_switch(nu):
        return _i_series_scaled(nu, z, cfg)
    return _i_asymptotic_scaled(nu, z, cfg)


def bessel_i(nu: float, z: float, cfg: SpecialEvalConfig = DEFAULT_CONFIG) -> float:
    """Modified Bessel function of the first kind ``I_nu(z)``, ``z >= 0``.

    Raises :class:`OverflowSignal` once ``e^z`` leaves the float range.
    """
    scaled = bessel_i_scaled(nu, z, cfg)
    if z > _LOG_MAX:
        raise OverflowSignal(f"I_nu({z}) overflows; use bessel_i_scaled")
    return scaled * math.exp(z)


def _gamma_pieces(mu: float) -> tuple[float, float, float, float]:
    """Temme's gam1, gam2 and 1/Gamma(1 +- mu) for ``|mu| <= 1/2``."""
    even = 0.0
    odd = 0.0
    power = 1.0
    for j, c in enumerate(_RGAMMA1P):
        if j % 2 == 0:
            even += c * power
        else:
            odd += c * power
        power *= mu
    # odd = sum_{j odd} c_j mu^j ; gam1 = -odd/mu
    gam2 = even
    if mu == 0.0:
        gam1 = -_RGAMMA1P[1]
    else:
        gam1 = -odd / mu
    gampl = gam2 - mu * gam1
    gammi = gam2 + mu * gam1
    return gam1, gam2, gampl, gammi


def _k_pair_scaled(mu: float, x: float, cfg: SpecialEvalConfig) -> tuple[float, float]:
    """``e^x K_mu(x)`` and ``e^x K_{mu+1}(x)`` for ``|mu| <= 1/2``."""
    eps = 1e-17
    mu2 = mu * mu
    xi = 1.0 / x
    if x < 2.0:
        x2 = 0.5 * x
        pimu = math.pi * mu
        fact = 1.0 if abs(pimu) < 1e-16 else pimu / math.sin(pimu)
        d = -math.log(x2)
        e = mu * d
        fact2 = 1.0 if abs(e) < 1e-16 else math.sinh(e) / e
        gam1, gam2, gampl, gammi = _gamma_pieces(mu)
        ff = fact * (gam1 * math.cosh(e) + gam2 * fact2 * d)
        total = ff
        e = math.exp(e)
        p = 0.5 * e / gampl
        q = 0.5 / (e * gammi)
        c = 1.0
        d = x2 * x2
        total1 = p
        for i in range(1, cfg.max_terms + 1):
            ff = (i * ff + p + q) / (i * i - mu2)
            c *= d / i
            p /= i - mu
            q /= i + mu
            delta = c * ff
            total += delta
            total1 += c * (p - i * ff)
            if abs(delta) < abs(total) * eps:
                break
        else:
            raise ConvergenceError(f"Temme series for K did not converge (x={x})")
        scale = math.exp(x)
        return total * scale, total1 * 2.0 * xi * scale
    # Steed's continued fraction
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = delh = d
    q1, q2 = 0.0, 1.0
    a1 = 0.25 - mu2
    q = c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, cfg.max_terms + 1):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) < eps:
            break
    else:
        raise ConvergenceError(f"continued fraction for K did not converge (x={x})")
    h = a1 * h
    kmu = math.sqrt(math.pi / (2.0 * x)) / s
    return kmu, kmu * (mu + x + 0.5 - h) * xi


def bessel_k_scaled(nu: float, z: float, cfg: SpecialEvalConfig = DEFAULT_CONFIG) -> float:
    """Return ``e^{z} K_nu(z)`` for ``z > 0``."""
    z = float(z)
    if not (z > 0) or not math.isfinite(z):
        raise DomainError(f"bessel_k requires finite z > 0, got {z}")
    nu = abs(float(nu))
    m = int(nu + 0.5)
    mu = nu - m
    k0, k1 = _k_pair_scaled(mu, z, cfg)
    two_over_z = 2.0 / z
    for i in range(m):
        k0, k1 = k1, (mu + i + 1) * two_over_z * k1 + k0
    return k0


def bessel_k(nu: float, z: float, cfg: SpecialEvalConfig = DEFAULT_CONFIG) -> float:
    """Modified Bessel function of the second kind ``K_nu(z)``, ``z > 0``."""
    scaled = bessel_k_scaled(nu, z, cfg)
    value = scaled * math.exp(-z)
    if not math.isfinite(value):
        raise OverflowSignal(f"K_nu({z}) overflows for nu={nu}")
    return value


def bessel_i_deriv(nu: float, z: float, cfg: SpecialEvalConfig = DEFAULT_CONFIG) -> float:
    """``I_nu'(z) = I_{nu-1}(z) - (nu/z) I_nu(z)``."""
    return bessel_i(nu - 1.0, z, cfg) - nu / z * bessel_i(nu, z, cfg)


def bessel_k_deriv(nu: float, z: float, cfg: SpecialEvalConfig = DEFAULT_CONFIG) -> float:
    """``K_nu'(z) = -K_{nu-1}(z) - (nu/z) K_nu(z)``."""
    return -bessel_k(nu - 1.0, z, cfg) - nu / z * bessel_k(nu, z, cfg)


def kummer_m(a: float, c: float, z: float, cfg: SpecialEvalConfig = DEFAULT_CONFIG,
             transform: bool = True) -> float:
    """Kummer's confluent hypergeometric function ``M(z; a, c)``.

    The series ``sum_h (a)_h / ((c)_h h!) z^h`` is summed with running
    Pochhammer products.  For ``z < 0`` the Kummer transformation
    ``M(z; a, c) = e^z M(-z; c - a, c)`` is applied first unless
    ``transform=False``; that keeps the series free of cancellation.
    """
    if c <= 0 and float(c).is_integer():
        raise DomainError("c must not be a nonpositive integer")
    if transform and z < 0:
        return math.exp(z) * kummer_m(c - a, c, -z, cfg, transform=False)
    total = 1.0
    term = 1.0
    small = 0
    for h in range(cfg.max_terms):
        term *= (a + h) / ((c + h) * (h + 1)) * z
        total += term
        if abs(term) < cfg.series_tolerance * abs(total) or term == 0.0:
            small += 1
            if small == 3:
                return total
        else:
            small = 0
    raise ConvergenceError(f"Kummer series: max_terms exhausted (z={z})")


def sphere_area(dim: int) -> float:
    """Surface measure of the unit sphere ``S^dim`` in ``R^{dim+1}``."""
    return 2.0 * math.pi ** ((dim + 1) / 2.0) / math.gamma((dim + 1) / 2.0)


@lru_cache(maxsize=None)
def _gl_theta(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(nodes)
    theta = 0.5 * np.pi * (x + 1.0)
    return theta, 0.5 * np.pi * w


def yz_phi_scaled(n: int, r, rtol: float = 1e-10, max_nodes: int = 1 << 15):
    """``e^{-r} phi(r)`` for the radial profile of the Yordanov--Zhang function.

    ``phi(x) = cosh|x|`` for ``n = 1`` and the sphere integral
    ``int_{S^{n-1}} e^{x.omega} d sigma`` for ``n >= 2``.  Accepts scalars or
    arrays; the angular integral uses Gauss--Legendre nodes doubled from 64
    until two successive results agree to ``rtol``.
    """
    if n < 1:
        raise DomainError("dimension n must be >= 1")
    r_arr = np.abs(np.asarray(r, dtype=float))
    if n == 1:
        out = 0.5 * (1.0 + np.exp(-2.0 * r_arr))
        return float(out) if np.ndim(r) == 0 else out
    flat = r_arr.reshape(-1)
    area = sphere_area(n - 2)

    def quad(nodes):
        theta, w = _gl_theta(nodes)
        weight = w * np.sin(theta) ** (n - 2)
        return area * (np.exp(np.outer(flat, np.cos(theta) - 1.0)) @ weight)

    nodes = 64
    prev = quad(nodes)
    while True:
        nodes *= 2
        cur = quad(nodes)
        if np.all(np.abs(cur - prev) <= rtol * np.abs(cur)):
            break
        if nodes >= max_nodes:
            raise ConvergenceError("sphere integral did not converge")
        prev = cur
    out = cur.reshape(r_arr.shape)
    return float(out) if np.ndim(r) == 0 else out


def yz_phi(n: int, r, rtol: float = 1e-10):
    """Radial profile ``phi(|x| = r)`` of the Yordanov--Zhang function."""
    r_arr = np.abs(np.asarray(r, dtype=float))
    if np.any(r_arr > _LOG_MAX):
        raise OverflowSignal("phi overflows; use yz_phi_scaled")
    scaled = yz_phi_scaled(n, r_arr, rtol)
    out = scaled * np.exp(r_arr)
    return float(out) if np.ndim(r) == 0 else out


def yz_phi_closed_form(n: int, r: float) -> float:
    """``(2 pi)^{n/2} r^{1-n/2} I_{n/2-1}(r)``, with the ``r = 0`` limit.

    An independent route to ``phi`` through the Bessel function, used as a
    cross-check of the sphere quadrature.
    """
    if r == 0.0:
        return sphere_area(n - 1)
    if n == 1:
        return math.cosh(r)
    return (2 * math.pi) ** (n / 2) * r ** (1 - n / 2) * bessel_i(n / 2 - 1, r)
