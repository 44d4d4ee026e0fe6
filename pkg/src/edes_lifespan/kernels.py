"""Geometric functions, the ODE kernel pair ``y0``/``y1`` and the auxiliary
test functions ``xi_q``/``eta_q``.

The kernels solve

    d^2 y / dt^2 - lam^2 t^{-2k} y = 0,  t > s,

with data ``(1, 0)`` (``y0``) or ``(0, 1)`` (``y1``) at ``t = s``.  Three
representations are available:

* ``bessel`` -- products of ``I_nu``/``K_nu`` at ``lam*phi_k``, valid for every
  ``k`` in ``[0, 1)``;
* ``elementary_2_3`` -- cosh/sinh closed forms, ``k = 2/3`` only;
* ``hypergeometric_2_3`` -- the fundamental pair
  ``V0~ = e^{-lam phi}(lam phi + 1)``, ``V1~ = e^{lam phi}(lam phi - 1)``
  whose Wronskian is ``18 lam^3``, ``k = 2/3`` only.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import roots_jacobi

from . import special
from .special import ConvergenceError, DomainError, OverflowSignal

__all__ = [
    "SpacetimeParams",
    "KernelEval",
    "AuxFnConfig",
    "angle",
    "phi_k",
    "light_cone_A",
    "kernel_y0",
    "kernel_y1",
    "kernel_y0_elementary",
    "kernel_y1_elementary",
    "kernel_pair_2_3_hypergeometric",
    "vtilde",
    "vtilde_wronskian",
    "vtilde0_via_kummer",
    "ode_residual",
    "identity_residuals",
    "xi_q",
    "eta_q",
    "fit_lower_bound_constants",
    "fit_upper_bound_constant",
    "kernel_sweep",
    "write_kernel_csv",
]

TWO_THIRDS = 2.0 / 3.0


@dataclass(frozen=True)
class SpacetimeParams:
    """Metric exponent ``k`` and spatial dimension ``n``."""

    k: float
    n: int = 3

    def __post_init__(self):
        if not (0.0 <= self.k < 1.0):
            raise DomainError(f"k must lie in [0, 1), got {self.k}")
        if self.n < 1:
            raise DomainError(f"n must be >= 1, got {self.n}")

    @property
    def nu(self) -> float:
        return 1.0 / (2.0 * (1.0 - self.k))

    @property
    def c_k(self) -> float:
        return (1.0 - self.k) ** (self.k / (1.0 - self.k))

    @property
    def gamma_k(self) -> float:
        # t^{1-k} >= gamma_k <A_k(t)> for t >= 1
        return 1.0 / 3.0 if self.k <= TWO_THIRDS else 1.0 - self.k

    @property
    def is_two_thirds(self) -> bool:
        return abs(self.k - TWO_THIRDS) < 1e-12


@dataclass(frozen=True)
class KernelEval:
    t: float
    s: float
    lam: float
    value: float
    representation: str
    ode_residual: float = math.nan


@dataclass(frozen=True)
class AuxFnConfig:
    """Parameters of the lambda-integral defining ``xi_q`` and ``eta_q``.

    ``quadrature_nodes`` is the starting Gauss--Jacobi order; it is doubled
    until successive results agree to ``rtol``.
    """

    q: float
    lambda0: float = 1.0
    R: float = 1.0
    quadrature_nodes: int = 32
    rtol: float = 1e-12
    max_nodes: int = 4096

    def __post_init__(self):
        if not self.q > -1.0:
            raise DomainError(f"q must exceed -1, got {self.q}")
        if not self.lambda0 > 0:
            raise DomainError("lambda0 must be positive")
        if self.R < 0:
            raise DomainError("R must be nonnegative")


def angle(y):
    """The bracket ``<y> = 3 + |y|``."""
    return 3.0 + np.abs(y)


def phi_k(t, params: SpacetimeParams):
    """Distance function ``t^{1-k}/(1-k)``."""
    k = params.k
    return np.power(t, 1.0 - k) / (1.0 - k)


def light_cone_A(t, params: SpacetimeParams):
    """Light-cone amplitude ``A_k(t) = phi_k(t) - phi_k(1)``."""
    return phi_k(t, params) - phi_k(1.0, params)


# ---------------------------------------------------------------------------
# kernel values


def _check_times(t, s, lam):
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    if s < 1.0 - 1e-12:
        raise DomainError(f"s must be >= 1, got {s}")


def _y0_bessel(t: float, s: float, lam: float, params: SpacetimeParams) -> float:
    nu = params.nu
    zs = lam * phi_k(s, params)
    zt = lam * phi_k(t, params)
    delta = zt - zs
    if abs(delta) > 700.0:
        raise OverflowSignal(f"y0 overflows: lam*(phi(t)-phi(s)) = {delta}")
    ip = special.bessel_i_scaled(nu - 1.0, zs) * special.bessel_k_scaled(nu, zt)
    kp = special.bessel_k_scaled(nu - 1.0, zs) * special.bessel_i_scaled(nu, zt)
    pref = lam * math.sqrt(t / s) * phi_k(s, params)
    return pref * (ip * math.exp(-delta) + kp * math.exp(delta))


def _y1_bessel(t: float, s: float, lam: float, params: SpacetimeParams) -> float:
    nu = params.nu
    zs = lam * phi_k(s, params)
    zt = lam * phi_k(t, params)
    delta = zt - zs
    if abs(delta) > 700.0:
        raise OverflowSignal(f"y1 overflows: lam*(phi(t)-phi(s)) = {delta}")
    grow = special.bessel_k_scaled(nu, zs) * special.bessel_i_scaled(nu, zt)
    decay = special.bessel_i_scaled(nu, zs) * special.bessel_k_scaled(nu, zt)
    pref = math.sqrt(s * t) / (1.0 - params.k)
    return pref * (grow * math.exp(delta) - decay * math.exp(-delta))


def _y0_elementary(t: float, s: float, lam: float) -> float:
    d = t ** (1 / 3) - s ** (1 / 3)
    arg = 3.0 * lam * d
    return (t / s) ** (1 / 3) * math.cosh(arg) - math.sinh(arg) / (3.0 * lam * s ** (1 / 3))


def _y1_elementary(t: float, s: float, lam: float) -> float:
    d = t ** (1 / 3) - s ** (1 / 3)
    arg = 3.0 * lam * d
    return ((s * t) ** (1 / 3) / lam - 1.0 / (9.0 * lam ** 3)) * math.sinh(arg) \
        + d / (3.0 * lam ** 2) * math.cosh(arg)


def _require_two_thirds(params: SpacetimeParams | None):
    if params is not None and not params.is_two_thirds:
        raise DomainError("this representation exists only for k = 2/3")


def ode_residual(fn, t: float, h: float = 1e-3, lam: float = 1.0, k: float = 0.0) -> float:
    """``|y'' - lam^2 t^{-2k} y|`` at ``t`` for a callable ``fn(t)``.

    Five-point central differences at steps ``h`` and ``h/2`` combined by
    Richardson extrapolation.
    """
    def d2(step):
        f = [fn(t + j * step) for j in (-2, -1, 0, 1, 2)]
        return (-f[0] + 16 * f[1] - 30 * f[2] + 16 * f[3] - f[4]) / (12 * step * step)

    second = (16.0 * d2(h / 2) - d2(h)) / 15.0
    return abs(second - lam * lam * t ** (-2 * k) * fn(t))


def _d1(fn, x: float, h: float) -> float:
    def d(step):
        f = [fn(x + j * step) for j in (-2, -1, 1, 2)]
        return (f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * step)

    return (16.0 * d(h / 2) - d(h)) / 15.0


def identity_residuals(t: float, s: float, lam: float, params: SpacetimeParams,
                       h: float = 1e-3) -> dict:
    """Relative residuals of the kernel identities at one point.

    Keys: ``y0_initial`` and ``y1_initial`` (absolute deviation from 1 and 0
    at ``t = s``), ``ode_y0``, ``ode_y1``, ``ds_y1_plus_y0`` (``d/ds y1 + y0``),
    ``adjoint_y1`` (``d^2/ds^2 y1 - lam^2 s^{-2k} y1``), ``dt_y1_initial``
    (``d/dt y1`` at ``t = s`` minus 1), and ``min_y0``/``min_y1``, the margins
    ``y0 - cosh(lam dphi)`` and ``y1 - (st)^{k/2} sinh(lam dphi)/lam``
    (relative, should be >= 0).
    """
    k = params.k
    y0t = lambda tt: _y0_bessel(tt, s, lam, params)  # noqa: E731
    y1t = lambda tt: _y1_bessel(tt, s, lam, params)  # noqa: E731
    y1s = lambda ss: _y1_bessel(t, ss, lam, params)  # noqa: E731
    y0 = y0t(t)
    y1 = y1t(t)
    sc0, sc1 = max(1.0, abs(y0)), max(1.0, abs(y1))
    dphi = float(phi_k(t, params) - phi_k(s, params))
    adj = lambda ss: y1s(ss)  # noqa: E731
    return {
        "y0_initial": abs(_y0_bessel(s, s, lam, params) - 1.0),
        "y1_initial": abs(_y1_bessel(s, s, lam, params)),
        "dt_y1_initial": abs(_d1(lambda tt: _y1_bessel(tt, s, lam, params), s, h) - 1.0),
        "ode_y0": ode_residual(y0t, t, h, lam, k) / sc0,
        "ode_y1": ode_residual(y1t, t, h, lam, k) / sc1,
        "ds_y1_plus_y0": abs(_d1(y1s, s, h) + y0) / sc0,
        "adjoint_y1": ode_residual(adj, s, h, lam, k) / sc1,
        "min_y0": (y0 - math.cosh(lam * dphi)) / sc0,
        "min_y1": (y1 - (s * t) ** (k / 2) * math.sinh(lam * dphi) / lam) / sc1,
    }


def _evaluate(kind: str, t, s, lam, params, representation, with_residual):
    _check_times(t, s, lam)
    if t < s:
        raise DomainError("kernels are defined for t >= s")
    if representation == "bessel":
        fn = (lambda tt: _y0_bessel(tt, s, lam, params)) if kind == "y0" \
            else (lambda tt: _y1_bessel(tt, s, lam, params))
    elif representation == "elementary_2_3":
        _require_two_thirds(params)
        fn = (lambda tt: _y0_elementary(tt, s, lam)) if kind == "y0" \
            else (lambda tt: _y1_elementary(tt, s, lam))
    elif representation == "hypergeometric_2_3":
        _require_two_thirds(params)
        idx = 0 if kind == "y0" else 1
        fn = lambda tt: kernel_pair_2_3_hypergeometric(tt, s, lam)[idx]  # noqa: E731
    else:
        raise ValueError(f"unknown representation {representation!r}")
    value = fn(t)
    residual = ode_residual(fn, t, lam=lam, k=params.k) if with_residual else math.nan
    return KernelEval(t, s, lam, value, representation, residual)


def kernel_y0(t: float, s: float, lam: float, params: SpacetimeParams,
              representation: str = "bessel", with_residual: bool = False) -> KernelEval:
    """Solution with data ``y(s) = 1, y'(s) = 0``."""
    return _evaluate("y0", float(t), float(s), float(lam), params, representation,
                     with_residual)


def kernel_y1(t: float, s: float, lam: float, params: SpacetimeParams,
              representation: str = "bessel", with_residual: bool = False) -> KernelEval:
    """Solution with data ``y(s) = 0, y'(s) = 1``."""
    return _evaluate("y1", float(t), float(s), float(lam), params, representation,
                     with_residual)


def kernel_y0_elementary(t: float, s: float, lam: float) -> float:
    return _y0_elementary(float(t), float(s), float(lam))


def kernel_y1_elementary(t: float, s: float, lam: float) -> float:
    return _y1_elementary(float(t), float(s), float(lam))


# ---------------------------------------------------------------------------
# k = 2/3 confluent hypergeometric route


def _phi23(t):
    return 3.0 * t ** (1 / 3)


def vtilde(t: float, lam: float) -> tuple[float, float, float, float]:
    """``(V0~, dV0~/dt, V1~, dV1~/dt)`` at ``t`` for ``k = 2/3``."""
    ph = _phi23(t)
    dph = t ** (-2 / 3)
    em = math.exp(-lam * ph)
    ep = math.exp(lam * ph)
    return (em * (lam * ph + 1.0), -lam * lam * ph * dph * em,
            ep * (lam * ph - 1.0), lam * lam * ph * dph * ep)


def vtilde_wronskian(t: float, lam: float) -> float:
    """``V0~ dV1~/dt - V1~ dV0~/dt``; equals ``18 lam^3`` identically."""
    v0, dv0, v1, dv1 = vtilde(t, lam)
    return v0 * dv1 - v1 * dv0


def vtilde0_via_kummer(t: float, lam: float) -> float:
    """``V0~`` rebuilt from Kummer's function.

    With ``z = -2 lam phi(t)``, ``g1(z) = z^3 M(z; 2, 4)/6 - (z + 2)`` and
    ``V0~ = -e^{-z/2} g1(z) / 2``.  Loses roughly ``e^{|z|}`` in relative
    accuracy, so only meaningful for moderate ``lam * phi``.
    """
    z = -2.0 * lam * _phi23(t)
    g1 = z ** 3 * special.kummer_m(2.0, 4.0, z) / 6.0 - (z + 2.0)
    return -0.5 * math.exp(-z / 2.0) * g1


def kernel_pair_2_3_hypergeometric(t: float, s: float, lam: float,
                                   params: SpacetimeParams | None = None) -> tuple[float, float]:
    """``(y0, y1)`` at ``k = 2/3`` from the ``V~`` fundamental pair."""
    _require_two_thirds(params)
    _check_times(t, s, lam)
    ps, pt = _phi23(s), _phi23(t)
    dps = s ** (-2 / 3)
    delta = lam * (pt - ps)
    ep, em = math.exp(delta), math.exp(-delta)
    w = 18.0 * lam ** 3
    y0 = lam * lam * ps * dps / w * ((lam * pt + 1.0) * em + (lam * pt - 1.0) * ep)
    y1 = ((lam * ps + 1.0) * (lam * pt - 1.0) * ep - (lam * ps - 1.0) * (lam * pt + 1.0) * em) / w
    return y0, y1


# ---------------------------------------------------------------------------
# auxiliary functions xi_q, eta_q


@lru_cache(maxsize=256)
def _jacobi_nodes(nodes: int, q: float) -> tuple[np.ndarray, np.ndarray]:
    x, w = roots_jacobi(nodes, 0.0, q)
    return x, w


@lru_cache(maxsize=16)
def _yz_table(n: int, rho_max: float) -> CubicSpline:
    rho = np.linspace(0.0, rho_max, 8193)
    return CubicSpline(rho, special.yz_phi_scaled(n, rho))


def _yz_scaled(n: int, rho: np.ndarray, fast: bool) -> np.ndarray:
    if n == 1:
        return 0.5 * (1.0 + np.exp(-2.0 * rho))
    if not fast:
        return special.yz_phi_scaled(n, rho)
    top = float(np.max(rho)) if rho.size else 0.0
    rho_max = 16.0
    while rho_max < top:
        rho_max *= 2.0
    return _yz_table(n, rho_max)(rho)


def _sinhc(x):
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 + x * x / 6.0, np.sinh(safe) / safe)


def _lambda_integral(kind: str, t: float, s: float, r, params: SpacetimeParams,
                     cfg: AuxFnConfig, fast: bool):
    if t < s or s < 1.0:
        raise DomainError("auxiliary functions need t >= s >= 1")
    r_arr = np.abs(np.atleast_1d(np.asarray(r, dtype=float)))
    A_t = float(light_cone_A(t, params))
    dphi = float(phi_k(t, params) - phi_k(s, params))
    q = float(cfg.q)

    def integrate(nodes):
        x, w = _jacobi_nodes(nodes, q)
        lam = 0.5 * cfg.lambda0 * (1.0 + x)
        rho = np.outer(lam, r_arr)
        base = np.exp(-np.outer(lam, A_t + cfg.R - r_arr)) * _yz_scaled(params.n, rho, fast)
        if kind == "xi":
            factor = np.cosh(lam * dphi)
        else:
            factor = _sinhc(lam * dphi)
        vals = (w * factor) @ base
        return (0.5 * cfg.lambda0) ** (q + 1.0) * vals

    nodes = cfg.quadrature_nodes
    prev = integrate(nodes)
    while True:
        nodes *= 2
        cur = integrate(nodes)
        if np.all(np.abs(cur - prev) <= cfg.rtol * np.abs(cur)):
            break
        if nodes >= cfg.max_nodes:
            raise ConvergenceError(f"{kind}_q quadrature did not converge")
        prev = cur
    if kind == "eta":
        cur = cur * (s * t) ** (params.k / 2.0)
    return float(cur[0]) if np.ndim(r) == 0 else cur.reshape(np.shape(r))


def xi_q(t: float, s: float, r, params: SpacetimeParams, cfg: AuxFnConfig, fast: bool = False):
    """``int_0^{lam0} e^{-lam(A_k(t)+R)} cosh(lam(phi_k(t)-phi_k(s))) phi(lam r) lam^q dlam``.

    The ``lam^q`` factor is absorbed as a Gauss--Jacobi weight, so ``q`` in
    ``(-1, 0)`` needs no special treatment.  ``r`` may be an array.
    ``fast=True`` reads ``phi`` from a cached spline (relative error about
    1e-9), which is what the simulator uses.
    """
    return _lambda_integral("xi", float(t), float(s), r, params, cfg, fast)


def eta_q(t: float, s: float, r, params: SpacetimeParams, cfg: AuxFnConfig, fast: bool = False):
    """``(st)^{k/2} int_0^{lam0} e^{-lam(A_k(t)+R)} sinhc(lam(phi_k(t)-phi_k(s))) phi(lam r) lam^q dlam``

    with ``sinhc(x) = sinh(x)/x`` continued by 1 at ``x = 0``.
    """
    return _lambda_integral("eta", float(t), float(s), r, params, cfg, fast)


# ---------------------------------------------------------------------------
# fitted constants for the lower and upper bounds


@dataclass(frozen=True)
class BoundFit:
    value: float
    grid: dict = field(default_factory=dict)
    argext: tuple = ()


def _t_grid(t_max: float, points: int) -> np.ndarray:
    return np.geomspace(1.0, t_max, points)


def fit_lower_bound_constants(params: SpacetimeParams, cfg: AuxFnConfig, t_max: float = 100.0,
                              t_points: int = 9, r_points: int = 9) -> tuple[BoundFit, BoundFit]:
    """Fit ``B0``, ``B1`` as minima of the normalized ``xi_q``/``eta_q``.

    Ratios, for ``t >= s >= 1`` and ``r <= A_k(s) + R``::

        xi_q * <A(s)>^{q+1}                     >= B0
        eta_q * <A(t)> <A(s)>^q / (st)^{k/2}     >= B1
    """
    ts = _t_grid(t_max, t_points)
    b0 = (math.inf, ())
    b1 = (math.inf, ())
    for i, t in enumerate(ts):
        A_t = float(light_cone_A(t, params))
        for s in ts[: i + 1]:
            A_s = float(light_cone_A(s, params))
            r = np.linspace(0.0, A_s + cfg.R, r_points)
            xi = xi_q(t, s, r, params, cfg)
            eta = eta_q(t, s, r, params, cfg)
            ratio0 = xi * angle(A_s) ** (cfg.q + 1.0)
            ratio1 = eta * angle(A_t) * angle(A_s) ** cfg.q / (s * t) ** (params.k / 2)
            j0, j1 = int(np.argmin(ratio0)), int(np.argmin(ratio1))
            if ratio0[j0] < b0[0]:
                b0 = (float(ratio0[j0]), (t, s, float(r[j0])))
            if ratio1[j1] < b1[0]:
                b1 = (float(ratio1[j1]), (t, s, float(r[j1])))
    grid = {"t_max": t_max, "t_points": t_points, "r_points": r_points,
            "q": cfg.q, "lambda0": cfg.lambda0, "R": cfg.R, "k": params.k, "n": params.n}
    return BoundFit(b0[0], grid, b0[1]), BoundFit(b1[0], grid, b1[1])


def fit_upper_bound_constant(params: SpacetimeParams, cfg: AuxFnConfig, t_max: float = 100.0,
                             t_points: int = 9, r_points: int = 33) -> BoundFit:
    """Fit ``B2`` as the supremum of
    ``xi_q(t,t,r) <A(t)>^{(n-1)/2} <A(t) - r>^{q-(n-3)/2}`` over
    ``t in [1, t_max]``, ``r in [0, A_k(t) + R]``.  Needs ``q > (n-3)/2``.
    """
    n = params.n
    if not cfg.q > (n - 3) / 2:
        raise DomainError("upper bound requires q > (n-3)/2")
    best = (-math.inf, ())
    for t in _t_grid(t_max, t_points):
        A_t = float(light_cone_A(t, params))
        r = np.linspace(0.0, A_t + cfg.R, r_points)
        xi = xi_q(t, t, r, params, cfg)
        ratio = xi * angle(A_t) ** ((n - 1) / 2) * angle(A_t - r) ** (cfg.q - (n - 3) / 2)
        j = int(np.argmax(ratio))
        if ratio[j] > best[0]:
            best = (float(ratio[j]), (t, float(r[j])))
    grid = {"t_max": t_max, "t_points": t_points, "r_points": r_points,
            "q": cfg.q, "lambda0": cfg.lambda0, "R": cfg.R, "k": params.k, "n": n}
    return BoundFit(best[0], grid, best[1])


# ---------------------------------------------------------------------------
# sweeps and CSV export

CSV_COLUMNS = ("k", "n", "t", "s", "lambda", "y0", "y1", "ode_residual_y0",
               "ode_residual_y1", "rep_disagreement")


def kernel_sweep(params: SpacetimeParams, points: Iterable[tuple[float, float, float]]) -> list[dict]:
    """Evaluate both kernels (with ODE residuals) at each ``(t, s, lam)``.

    ``rep_disagreement`` is the largest relative gap between the Bessel form
    and the two ``k = 2/3`` forms; NaN for other ``k``.
    """
    rows = []
    for t, s, lam in points:
        e0 = kernel_y0(t, s, lam, params, with_residual=True)
        e1 = kernel_y1(t, s, lam, params, with_residual=True)
        gap = math.nan
        if params.is_two_thirds:
            h0, h1 = kernel_pair_2_3_hypergeometric(t, s, lam)
            alts = [(e0.value, _y0_elementary(t, s, lam)), (e0.value, h0),
                    (e1.value, _y1_elementary(t, s, lam)), (e1.value, h1)]
            gap = max(abs(a - b) / max(1.0, abs(a)) for a, b in alts)
        rows.append({"k": params.k, "n": params.n, "t": t, "s": s, "lambda": lam,
                     "y0": e0.value, "y1": e1.value, "ode_residual_y0": e0.ode_residual,
                     "ode_residual_y1": e1.ode_residual, "rep_disagreement": gap})
    return rows


def write_kernel_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")
