"""Radial finite-difference solver for

    u_tt - t^{-2k} Lap u = t^{1-p} |u|^p,   u(1) = eps u0,  u_t(1) = eps u1,

with blow-up detection and the functionals used by the blow-up argument.

Discretization
--------------
Two schemes share the bookkeeping below.  For ``n`` in {1, 3} the default
is a leapfrog in conformal time ``tau = phi_k(t)`` on the one-dimensional
reduction (``w = u`` or ``w = r u``) at unit Courant number, whose
numerical domain of dependence is exactly the light cone; see
``_characteristic_levels``.  Other dimensions use the Verlet scheme below.

The radial Laplacian is written in conservative (finite-volume) form on the
nodes ``r_i = i dr``: with cell volumes ``V_0 = (dr/2)^n / n`` and
``V_i = r_i^{n-1} dr``,

    (L u)_i = [r_{i+1/2}^{n-1}(u_{i+1} - u_i) - r_{i-1/2}^{n-1}(u_i - u_{i-1})] / (V_i dr).

At the origin this is ``2n (u_1 - u_0)/dr^2``, i.e. ``n u_rr`` with an even
ghost node.  ``sum_i V_i (L u)_i`` telescopes, so the discrete mass obeys the
same balance law as the continuum one.  Time stepping is kick-drift-kick
Verlet (leapfrog) with ``dt = cfl * t^k * dr``, shortened near blow-up so
the nonlinear growth rate is resolved.  Only the nodes reached by the
stencil since ``t = 1`` are updated; everything beyond is exactly zero.
"""
from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.linalg import eigh_tridiagonal

from . import kernels
from .exponents import classify_lifespan
from .kernels import AuxFnConfig, SpacetimeParams, light_cone_A
from .kernels import phi_k as _phi_k
from .special import sphere_area, yz_phi

__all__ = [
    "SimConfig",
    "SimResult",
    "ConeViolation",
    "InstabilityError",
    "InsufficientData",
    "bump",
    "functional_U",
    "functional_curlyU",
    "simulate",
    "run",
    "weak_residual",
    "second_derivative",
    "fitted_floor_U",
    "fitted_floor_curlyU",
    "fitted_log_bound",
    "fitted_differential_constant",
    "frame_check",
    "fitted_constants",
    "fit_slope",
    "sweep_and_fit",
    "write_run_csv",
]

log = logging.getLogger(__name__)

THRESHOLDS = (1e4, 1e6, 1e8)
SUPPORT_FLOOR = 1e-12


class ConeViolation(RuntimeError):
    """The numerical support reached the outer boundary."""


class InstabilityError(RuntimeError):
    """The linear part of the scheme is unstable at this CFL number."""


class InsufficientData(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    k: float
    n: int
    p: float
    eps: float
    R: float = 1.0
    data_profile: str = "bump"
    dr: float = 1.0 / 200.0
    r_max: float | None = None
    cfl: float = 0.5
    blowup_amplitude: float = 1e6
    t_max: float = 1e4
    nonlinear: bool = True
    refine: bool = True
    curly_every: int = 32
    compute_curly: bool = True
    lambda0: float = 1.0
    kernel_lambda: float | None = None
    limiter: float = 0.05
    scheme: str = "auto"

    def __post_init__(self):
        SpacetimeParams(self.k, self.n)
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if not (0 < self.cfl < 1):
            raise ValueError("cfl must lie in (0, 1)")
        if not (self.dr > 0 and self.R > 0 and self.t_max > 1):
            raise ValueError("need dr > 0, R > 0, t_max > 1")
        if self.scheme not in ("auto", "characteristic", "verlet"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.data_profile not in ("bump", "truncated_gaussian"):
            raise ValueError(f"unknown data profile {self.data_profile!r}")
        if self.r_max is not None and not self.r_max > self.R + self.cone(self.t_max):
            raise ValueError("r_max must exceed R + A_k(t_max)")

    @property
    def params(self) -> SpacetimeParams:
        return SpacetimeParams(self.k, self.n)

    def cone(self, t):
        return light_cone_A(t, self.params)

    @property
    def outer_radius(self) -> float:
        if self.r_max is not None:
            return self.r_max
        return self.R + float(self.cone(self.t_max)) + 8.0 * self.dr + 1.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "SimConfig":
        return cls.from_dict(json.loads(text))


def bump(r, R: float):
    """``(1 - (r/R)^2)^4`` on ``r < R``; C^3 with support exactly ``[0, R]``."""
    x = np.clip(1.0 - (np.asarray(r, dtype=float) / R) ** 2, 0.0, None)
    return x ** 4


def truncated_gaussian(r, R: float):
    """``exp(-8 (r/R)^2) - exp(-8)`` cut at ``R``; continuous, supported in ``[0, R]``."""
    r = np.asarray(r, dtype=float)
    return np.where(r < R, np.exp(-8.0 * (r / R) ** 2) - math.exp(-8.0), 0.0)


@dataclass
class SimResult:
    config: SimConfig
    blew_up: bool
    T_num: float | None
    T_thresholds: dict
    t: np.ndarray
    max_u: np.ndarray
    U: np.ndarray
    support_radius: np.ndarray
    momentum: np.ndarray
    source: np.ndarray
    curly_t: np.ndarray
    curly_U: np.ndarray
    cone_excess: float
    steps: int
    kernel_series: dict | None = None
    fine: "SimResult | None" = None
    refinement_agreement: float | None = None
    uncertainty: float | None = None
    final_state: dict = field(default_factory=dict)
    scheme: str = "verlet"

    @property
    def cone_ok(self) -> bool:
        return self.cone_excess <= 2.0 * self.config.dr

    def summary(self) -> dict:
        return {
            "blew_up": self.blew_up,
            "T_num": self.T_num,
            "uncertainty": self.uncertainty,
            "refinement_agreement": self.refinement_agreement,
            "T_thresholds": {f"{k:g}": v for k, v in self.T_thresholds.items()},
            "steps": self.steps,
            "cone_excess": self.cone_excess,
            "scheme": self.scheme,
            "config": self.config.to_dict(),
        }


def _radial_weights(n: int, m: int, dr: float):
    r = np.arange(m) * dr
    vol = r ** (n - 1) * dr
    vol[0] = (0.5 * dr) ** n / n
    face = ((np.arange(m - 1) + 0.5) * dr) ** (n - 1)  # between i and i+1
    return r, vol, face


def functional_U(u, r, n: int):
    """``|S^{n-1}| int u r^{n-1} dr`` by the trapezoid rule."""
    return sphere_area(n - 1) * float(np.trapezoid(u * r ** (n - 1), r))


def functional_curlyU(u, r, t: float, params: SpacetimeParams, aux: AuxFnConfig):
    """``t^{-k/2} int u(x) xi_q(t, t, x) dx`` for radial ``u``."""
    if not np.any(u):
        return 0.0
    last = int(np.nonzero(u)[0][-1]) + 1
    rr, uu = r[:last + 1], u[:last + 1]
    xi = kernels.xi_q(t, t, rr, params, aux, fast=True)
    return t ** (-params.k / 2) * sphere_area(params.n - 1) * float(
        np.trapezoid(uu * xi * rr ** (params.n - 1), rr))


def default_aux(cfg: SimConfig) -> AuxFnConfig:
    return AuxFnConfig(q=(cfg.n - 1) / 2 - 1 / cfg.p, lambda0=cfg.lambda0, R=cfg.R, rtol=1e-10)


def _laplacian(u, vol, face, dr, out):
    flux = face * (u[1:] - u[:-1])
    out[:-1] = flux
    out[-1] = 0.0
    out[1:] -= flux
    out /= vol * dr
    return out


def _check_stability(cfg: SimConfig, m: int) -> None:
    """The symmetrized Laplacian's largest eigenvalue must satisfy
    ``cfl^2 dr^2 lam_max < 4`` (leapfrog on ``u'' = -c^2 lam u``, ``dt c = cfl dr``)."""
    m = min(m, 4096)
    _, vol, face = _radial_weights(cfg.n, m, cfg.dr)
    d = np.zeros(m)
    d[:-1] += face
    d[1:] += face
    d /= vol * cfg.dr
    e = -face / (cfg.dr * np.sqrt(vol[:-1] * vol[1:]))
    lam = eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(m - 1, m - 1))[0]
    if (cfg.cfl * cfg.dr) ** 2 * lam >= 4.0:
        raise InstabilityError(
            f"cfl={cfg.cfl} unstable for n={cfg.n}: need cfl < {2 / (cfg.dr * math.sqrt(lam)):.4f}")


def _data(cfg: SimConfig, r):
    profile = bump if cfg.data_profile == "bump" else truncated_gaussian
    u0 = cfg.eps * profile(r, cfg.R)
    return u0, u0.copy()


def _verlet_levels(cfg: SimConfig, size: int):
    """Kick-drift-kick leapfrog in ``t``; yields ``(t, u, u_t, width)``."""
    n, k, p, dr = cfg.n, cfg.k, cfg.p, cfg.dr
    _check_stability(cfg, size)
    r, vol, face = _radial_weights(n, size, dr)
    u, v = _data(cfg, r)
    acc = np.zeros(size)
    # u vanishes identically on [m, size); v and the acceleration can reach
    # one node further, so every update runs over [0, m + 2).
    nz = np.nonzero(u)[0]
    m = int(nz[-1]) + 1 if nz.size else 1

    def accel(t, w):
        _laplacian(u[:w], vol[:w], face[:w - 1], dr, acc[:w])
        acc[:w] *= t ** (-2 * k)
        if cfg.nonlinear:
            acc[:w] += t ** (1 - p) * np.abs(u[:w]) ** p

    t = 1.0
    w = min(size, m + 2)
    accel(t, w)
    while True:
        yield t, u[:w], v[:w], w
        amp = float(np.max(np.abs(u[:w])))
        dt = cfg.cfl * t ** k * dr
        if cfg.nonlinear and amp > 0:
            dt = min(dt, cfg.limiter / math.sqrt(p * t ** (1 - p) * amp ** (p - 1)))
        dt = min(dt, cfg.t_max - t)
        v[:w] += 0.5 * dt * acc[:w]
        u[:w] += dt * v[:w]
        m = min(size, m + 1)
        w = min(size, m + 2)
        t += dt
        accel(t, w)
        v[:w] += 0.5 * dt * acc[:w]


def _characteristic_levels(cfg: SimConfig, size: int):
    """Leapfrog at unit Courant number in conformal time; ``n`` in {1, 3}.

    With ``tau = phi_k(t)`` and ``w = u`` (``n = 1``) or ``w = r u``
    (``n = 3``) the equation becomes the one-dimensional

        w_{tau tau} - (mu/tau) w_tau - w_rr = t^{2k+1-p} |u|^p  (times r for n = 3),

    ``mu = k/(1-k)``.  Taking
    ``d tau = dr`` makes the stencil's domain of dependence coincide with the
    light cone, and for ``k = 0`` without forcing the update is d'Alembert's
    formula.  Yields ``(t, u, u_t, width)`` for each level.
    """
    n, k, p, dr = cfg.n, cfg.k, cfg.p, cfg.dr
    r = np.arange(size) * dr
    u0, u1 = _data(cfg, r)
    mu = k / (1.0 - k)
    tau0 = 1.0 / (1.0 - k)
    odd = n == 3

    def t_of(tau):
        return ((1.0 - k) * tau) ** (1.0 / (1.0 - k))

    def to_u(wv, width):
        if not odd:
            return wv[:width].copy()
        out = np.empty(width)
        out[1:] = wv[1:width] / r[1:width]
        out[0] = (4.0 * out[1] - out[2]) / 3.0 if width > 2 else out[1]
        return out

    def rhs(wv, tau, width):
        """``w_rr + forcing`` on [0, width)."""
        out = np.zeros(width)
        out[1:width - 1] = (wv[2:width] - 2.0 * wv[1:width - 1] + wv[:width - 2]) / (dr * dr)
        if odd:
            out[0] = 0.0
        else:
            out[0] = 2.0 * (wv[1] - wv[0]) / (dr * dr)
        if cfg.nonlinear:
            t = t_of(tau)
            f = t ** (2 * k + 1 - p) * np.abs(to_u(wv, width)) ** p
            if odd:
                f *= r[:width]
                f[0] = 0.0
            out += f
        return out

    wgt = r if odd else np.ones(size)
    prev = u0 * wgt
    vel = u1 * wgt  # w_tau = t^k u_t, and t = 1 here
    nz = np.nonzero(prev)[0]
    m = int(nz[-1]) + 1 if nz.size else 1
    width = min(size, m + 2)
    tau = tau0
    cur = np.zeros(size)
    acc0 = rhs(prev, tau, width)
    cur[:width] = prev[:width] + dr * vel[:width] + 0.5 * dr * dr * (
        mu / tau * vel[:width] + acc0)
    if odd:
        cur[0] = 0.0
    level_vel = vel
    nxt = np.zeros(size)
    while True:
        # emit level ``prev`` (time tau) with its velocity
        t = t_of(tau)
        ut = t ** (-k) * to_u(level_vel, width)
        yield t, to_u(prev, width), ut, width
        m = min(size, m + 1)
        width = min(size, m + 2)
        tau_c = tau + dr
        a = mu * dr / (2.0 * tau_c)
        nxt[:width] = (2.0 * cur[:width] - (1.0 + a) * prev[:width]
                       + dr * dr * rhs(cur, tau_c, width)) / (1.0 - a)
        if odd:
            nxt[0] = 0.0
        level_vel = (nxt[:width] - prev[:width]) / (2.0 * dr)
        prev, cur, nxt = cur, nxt, prev
        tau = tau_c


def _scheme(cfg: SimConfig) -> str:
    if cfg.scheme != "auto":
        return cfg.scheme
    return "characteristic" if cfg.n in (1, 3) else "verlet"


def simulate(cfg: SimConfig) -> SimResult:
    """One run at resolution ``cfg.dr`` (no refinement)."""
    params = cfg.params
    n, p, dr = cfg.n, cfg.p, cfg.dr
    scheme = _scheme(cfg)
    if scheme == "characteristic" and n not in (1, 3):
        raise ValueError("the characteristic scheme needs n = 1 or n = 3")
    size = int(math.ceil(cfg.outer_radius / dr)) + 1
    levels = (_characteristic_levels if scheme == "characteristic" else _verlet_levels)(cfg, size)
    r_full, vol_full, _ = _radial_weights(n, size, dr)
    area = sphere_area(n - 1)
    aux = default_aux(cfg)
    phi_lam = yz_phi(n, cfg.kernel_lambda * r_full) if cfg.kernel_lambda is not None else None
    # trapezoid weights for int f r^{n-1} dr on the node grid
    trap = r_full ** (n - 1) * dr
    trap[0] *= 0.5

    ts, maxu, Us, supp, mom, src = [], [], [], [], [], []
    ct, cu = [], []
    kser = {"t": [], "w": [], "dw": [], "F": []} if phi_lam is not None else None
    thresholds = sorted(set(THRESHOLDS) | {cfg.blowup_amplitude})
    crossed: dict = {}
    cone_excess = 0.0
    n_steps = None
    if scheme == "characteristic":
        tau_end = float(_phi_k(cfg.t_max, params))
        n_steps = int(math.ceil((tau_end - 1.0 / (1.0 - cfg.k)) / dr - 1e-9))

    step = -1
    blew = False
    state = {}
    for t, u, ut, w in levels:
        step += 1
        au = np.abs(u)
        amp = float(au.max())
        tr = trap[:w]
        ts.append(t)
        maxu.append(amp)
        Us.append(area * float(tr @ u))
        big = np.nonzero(au > SUPPORT_FLOOR)[0]
        rad = float(r_full[big[-1]]) if big.size else 0.0
        supp.append(rad)
        if big.size:
            cone_excess = max(cone_excess, rad - (cfg.R + float(light_cone_A(t, params))))
        mom.append(area * float(tr @ ut))
        aup = au ** p if cfg.nonlinear else None
        src.append(area * t ** (1 - p) * float(tr @ aup) if cfg.nonlinear else 0.0)
        if kser is not None:
            wt = tr * phi_lam[:w]
            kser["t"].append(t)
            kser["w"].append(area * float(wt @ u))
            kser["dw"].append(area * float(wt @ ut))
            kser["F"].append(area * t ** (1 - p) * float(wt @ aup) if cfg.nonlinear else 0.0)
        if cfg.compute_curly and step % cfg.curly_every == 0:
            ct.append(t)
            cu.append(functional_curlyU(u, r_full[:w], t, params, aux))
        if w == size and au[-3] > SUPPORT_FLOOR:
            raise ConeViolation(f"support reached r_max={cfg.outer_radius} at t={t}")
        if len(ts) > 1:
            prev_amp = maxu[-2]
            for thr in thresholds:
                if thr not in crossed and amp > thr:
                    # log-linear interpolation of the crossing
                    a0, a1 = math.log(max(prev_amp, 1e-300)), math.log(amp)
                    frac = (math.log(thr) - a0) / (a1 - a0) if a1 > a0 else 1.0
                    crossed[thr] = ts[-2] + min(1.0, max(0.0, frac)) * (t - ts[-2])
        done = (not np.isfinite(amp) or (cfg.nonlinear and amp > thresholds[-1])
                or (n_steps is not None and step >= n_steps)
                or (n_steps is None and t >= cfg.t_max))
        if done:
            blew = cfg.nonlinear and (amp > thresholds[-1] or not np.isfinite(amp))
            state = {"t": t, "r": r_full[:w].copy(), "u": u.copy(), "ut": ut.copy()}
            break
    blew = blew or cfg.blowup_amplitude in crossed
    return SimResult(
        config=cfg, blew_up=blew, T_num=crossed.get(cfg.blowup_amplitude),
        T_thresholds={thr: crossed.get(thr) for thr in THRESHOLDS}, t=np.array(ts),
        max_u=np.array(maxu), U=np.array(Us), support_radius=np.array(supp),
        momentum=np.array(mom), source=np.array(src), curly_t=np.array(ct),
        curly_U=np.array(cu), cone_excess=cone_excess, steps=step,
        kernel_series={kk: np.array(vv) for kk, vv in kser.items()} if kser else None,
        final_state=state, scheme=scheme)


def run(cfg: SimConfig) -> SimResult:
    """Run at ``dr`` and, if ``cfg.refine``, again at ``dr/2``.

    ``blew_up`` requires the amplitude threshold to be crossed in both runs
    with blow-up times within 5%.
    """
    coarse = simulate(cfg)
    if not cfg.refine:
        coarse.uncertainty = None
        return coarse
    fine = simulate(replace(cfg, dr=cfg.dr / 2, refine=False,
                            r_max=None if cfg.r_max is None else cfg.r_max))
    coarse.fine = fine
    if coarse.T_num is not None and fine.T_num is not None:
        coarse.uncertainty = abs(coarse.T_num - fine.T_num)
        coarse.refinement_agreement = coarse.uncertainty / fine.T_num
        coarse.blew_up = coarse.blew_up and fine.blew_up and coarse.refinement_agreement <= 0.05
    else:
        coarse.blew_up = False
    return coarse


# ---------------------------------------------------------------------------
# weak-form residuals and fitted constants


def weak_residual(res: SimResult, test_choice: str = "one_on_cone") -> float:
    """Relative residual of an integral identity along the run.

    ``one_on_cone``: with ``psi = 1`` on the cone,
    ``U'(t) - U'(1) = int_1^t s^{1-p} int |u|^p dx ds`` (time integral by
    the trapezoid rule over the steps).

    ``kernel_test``: ``w(t) = int u(t) phi_lam dx`` satisfies
    ``w(t) = w(1) y0(t,1) + w'(1) y1(t,1) + int_1^t y1(t,s) F(s) ds`` with
    ``F(s) = s^{1-p} int |u|^p phi_lam dx``; checked at the final time.
    Needs ``config.kernel_lambda``.
    """
    if test_choice == "one_on_cone":
        if res.t.size < 2:
            return 0.0
        integral = float(np.trapezoid(res.source, res.t))
        lhs = res.momentum[-1] - res.momentum[0]
        scale = max(abs(res.momentum[-1]), abs(res.momentum[0]), abs(integral))
        return 0.0 if scale == 0 else abs(lhs - integral) / scale
    if test_choice == "kernel_test":
        ks = res.kernel_series
        if ks is None:
            raise ValueError("run the simulation with kernel_lambda set")
        lam = res.config.kernel_lambda
        params = res.config.params
        t_end = float(ks["t"][-1])
        s = ks["t"]
        y1 = np.array([kernels.kernel_y1(t_end, si, lam, params).value for si in s])
        y0_1 = kernels.kernel_y0(t_end, 1.0, lam, params).value
        duhamel = float(np.trapezoid(y1 * ks["F"], s))
        rhs = ks["w"][0] * y0_1 + ks["dw"][0] * y1[0] + duhamel
        lhs = ks["w"][-1]
        scale = max(abs(lhs), abs(rhs))
        return 0.0 if scale == 0 else abs(lhs - rhs) / scale
    raise ValueError(f"unknown test_choice {test_choice!r}")


def second_derivative(t, f):
    """Second divided differences on a nonuniform grid, at interior points."""
    t = np.asarray(t)
    f = np.asarray(f)
    h0 = t[1:-1] - t[:-2]
    h1 = t[2:] - t[1:-1]
    return 2.0 * (h0 * f[2:] - (h0 + h1) * f[1:-1] + h1 * f[:-2]) / (h0 * h1 * (h0 + h1))


def fitted_floor_U(res: SimResult) -> float:
    """``K`` in ``U(t) >= K eps t``."""
    return float(np.min(res.U / (res.config.eps * res.t)))


def fitted_floor_curlyU(res: SimResult) -> float:
    """Positive floor of ``curlyU(t)/eps``."""
    return float(np.min(res.curly_U / res.config.eps))


def fitted_log_bound(res: SimResult) -> float:
    """``M_fit`` in ``curlyU(t) >= M_fit eps^p log(2t/3)`` for ``t > 3/2``."""
    mask = res.curly_t > 1.5
    if not np.any(mask):
        return math.inf
    cfg = res.config
    return float(np.min(res.curly_U[mask] / (cfg.eps ** cfg.p * np.log(2 * res.curly_t[mask] / 3))))


def fitted_differential_constant(res: SimResult) -> float:
    """``c`` in ``U'' >= c (R+t)^{-((1-k)n+1)(p-1)} U^p`` along the run."""
    cfg = res.config
    q = ((1 - cfg.k) * cfg.n + 1) * (cfg.p - 1)
    upp = second_derivative(res.t, res.U)
    tt, UU = res.t[1:-1], res.U[1:-1]
    rhs = (cfg.R + tt) ** (-q) * np.abs(UU) ** cfg.p
    mask = rhs > 0
    return float(np.min(upp[mask] / rhs[mask]))


def frame_check(res: SimResult, case: str = "crit_p0"):
    """Iteration-frame constant for a run, restricted to samples before the
    solution leaves the moderate-amplitude regime (``max|u| <= 1e3``).

    ``crit_p0`` uses the weighted functional series, ``crit_p1`` the plain
    integral ``U``.
    """
    from .iteration import iteration_frame_check

    cfg = res.config
    if case == "crit_p0":
        t, f = res.curly_t, res.curly_U
        amp = np.interp(t, res.t, res.max_u)
    else:
        t, f, amp = res.t, res.U, res.max_u
    keep = amp <= 1e3
    return iteration_frame_check(t[keep], f[keep], cfg.params, cfg.p, case, cfg.R)


def fitted_constants(res: SimResult):
    """Fitted ``K``, ``M`` and ``C_frame`` of a run, tagged with the samples
    they were extracted from.  The frame case follows the dimension: the
    weighted functional above ``N(k)``, the plain integral at or below it."""
    from .exponents import threshold_N
    from .iteration import FittedConstants, FittedValue, SeriesTooShort

    cfg = res.config
    span = {"t_first": float(res.t[0]), "t_last": float(res.t[-1]), "dr": cfg.dr,
            "k": cfg.k, "n": cfg.n, "p": cfg.p, "eps": cfg.eps}
    out = FittedConstants()
    if cfg.eps > 0:
        out.K_const = FittedValue(fitted_floor_U(res), {**span, "samples": int(res.t.size)})
    if res.curly_U.size and cfg.eps > 0:
        out.M_const = FittedValue(fitted_log_bound(res),
                                  {**span, "samples": int(res.curly_t.size), "t_min": 1.5})
    case = "crit_p1" if cfg.n <= threshold_N(cfg.k) else "crit_p0"
    try:
        fr = frame_check(res, case)
        out.C_frame = FittedValue(fr.C_frame, {**span, "case": case, "samples": fr.samples,
                                               "amplitude_cap": 1e3})
    except SeriesTooShort:
        pass
    return out


# ---------------------------------------------------------------------------
# sweeps


def fit_slope(eps, T, kind: str = "power") -> dict:
    """Least-squares slope of ``log T`` (``power``) or ``log log T``
    (``exponential``) against ``log(1/eps)``."""
    x = np.log(1.0 / np.asarray(eps, dtype=float))
    y = np.log(np.asarray(T, dtype=float))
    if kind == "exponential":
        y = np.log(y)
    elif kind != "power":
        raise ValueError(f"unknown kind {kind!r}")
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return {"slope": float(coef[0]), "intercept": float(coef[1]),
            "residuals": resid.tolist()}


def _run_one(cfg: SimConfig) -> SimResult:
    return run(cfg)


def sweep_and_fit(configs: list[SimConfig], tolerance: float = 0.30,
                  workers: int | None = None) -> dict:
    """Run an eps-sweep and compare the fitted exponent with the predicted law.

    All configs must share ``(k, n, p)``.  Runs execute concurrently, capped by
    the ``EDES_THREADS`` environment variable; results are ordered by eps.
    """
    if len(configs) < 4:
        raise InsufficientData("need at least 4 eps values")
    keys = {(c.k, c.n, c.p) for c in configs}
    if len(keys) != 1:
        raise ValueError("configs must share k, n, p")
    configs = sorted(configs, key=lambda c: -c.eps)
    eps = [c.eps for c in configs]
    if max(eps) / min(eps) < 10.0 * (1 - 1e-9):
        raise InsufficientData("eps values must span at least one decade")
    if workers is None:
        workers = int(os.environ.get("EDES_THREADS", os.cpu_count() or 1))
    workers = max(1, min(workers, len(configs)))
    if workers == 1:
        results = [_run_one(c) for c in configs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, configs))
    used = [(c.eps, r) for c, r in zip(configs, results) if r.blew_up]
    for c, r in zip(configs, results):
        if not r.blew_up:
            log.warning("eps=%g did not blow up; excluded from fit", c.eps)
    if len(used) < 4:
        raise InsufficientData("fewer than 4 runs blew up")
    k, n, p = next(iter(keys))
    law = classify_lifespan(n, k, p)
    kind = "exponential" if law.kind == "exponential" else "power"
    fit = fit_slope([e for e, _ in used], [r.T_num for _, r in used], kind)
    T = [r.T_num for _, r in used]
    monotone = all(a < b for a, b in zip(T, T[1:]))
    rel = abs(fit["slope"] - law.exponent) / law.exponent if law.exponent == law.exponent else math.nan
    return {
        "k": k, "n": n, "p": p, "regime": law.regime, "predicted_exponent": law.exponent,
        "fit_kind": kind, "fitted_slope": fit["slope"], "intercept": fit["intercept"],
        "residuals": fit["residuals"], "relative_deviation": rel,
        "verdict": "consistent within tolerance" if rel <= tolerance else "inconsistent",
        "tolerance": tolerance, "monotone_in_eps": monotone,
        "runs": [{"eps": c.eps, "blew_up": r.blew_up, "T_num": r.T_num,
                  "uncertainty": r.uncertainty, "refinement_agreement": r.refinement_agreement,
                  "T_thresholds": {f"{kk:g}": vv for kk, vv in r.T_thresholds.items()},
                  "cone_excess": r.cone_excess, "dr": c.dr,
                  "cone_excess_fine": None if r.fine is None else r.fine.cone_excess}
                 for c, r in zip(configs, results)],
        "results": results,
    }


def write_run_csv(res: SimResult, path) -> None:
    """Per-step CSV ``t, max_u, U, curlyU, support_radius`` (curlyU blank
    where it was not evaluated).  ``path`` may be an open text file."""
    curly = dict(zip(res.curly_t.tolist(), res.curly_U.tolist()))
    lines = ["t,max_u,U,curlyU,support_radius"]
    for t, mu, U, sr in zip(res.t, res.max_u, res.U, res.support_radius):
        c = curly.get(float(t))
        lines.append(",".join([format(t, ".17g"), format(mu, ".17g"), format(U, ".17g"),
                               "" if c is None else format(c, ".17g"), format(sr, ".17g")]))
    text = "\n".join(lines) + "\n"
    if hasattr(path, "write"):
        path.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)
