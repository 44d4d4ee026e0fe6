"""Slicing iterations for the two critical cases, explicit lifespan
thresholds, Kato's lemma, and the iteration-frame check on simulated
functionals.

Exponent sequences are kept as exact :class:`fractions.Fraction` values so
that recursion and closed form can be compared for equality; the amplitude
sequences ``C_j``/``K_j`` underflow immediately in floating point and are
tracked through their logarithms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .kernels import SpacetimeParams, angle, light_cone_A, phi_k
from .special import DomainError

__all__ = [
    "IterationTrace",
    "KatoInput",
    "KatoResult",
    "FittedValue",
    "FittedConstants",
    "SeriesTooShort",
    "as_fraction",
    "ell",
    "alpha_closed",
    "beta_closed",
    "sigma_closed",
    "weighted_power_sum",
    "weighted_power_sum_closed",
    "slicing_sequences",
    "constants_crit_p0",
    "constants_crit_p1",
    "lifespan_threshold_crit_p0",
    "lifespan_threshold_crit_p1",
    "lifespan_threshold_crit_p1_as_printed",
    "J_function",
    "H_function",
    "t0_of_k",
    "kato_evaluate",
    "frame_rhs",
    "iteration_frame_check",
]

LOG_CAP = 700.0
MAX_BITS = 1 << 20


class SeriesTooShort(ValueError):
    """Fewer samples than the frame check needs."""


def as_fraction(p) -> Fraction:
    """``Fraction`` from an int, a ``"5/2"`` string, a Fraction or a float
    (floats are taken at their exact binary value)."""
    if isinstance(p, Fraction):
        return p
    if isinstance(p, str):
        return Fraction(p)
    return Fraction(p)


def ell(j: int) -> Fraction:
    """Slicing endpoints ``2 - 2^{-(j+1)}``."""
    return 2 - Fraction(1, 2 ** (j + 1))


def alpha_closed(p: Fraction, j: int) -> Fraction:
    return (p ** (j + 1) - 1) / (p - 1)


def beta_closed(p: Fraction, j: int) -> Fraction:
    return p ** j - 1


sigma_closed = alpha_closed


def weighted_power_sum(p: Fraction, j: int) -> Fraction:
    """``sum_{i=0}^{j-1} (j - i) p^i`` by brute force."""
    return sum(((j - i) * p ** i for i in range(j)), Fraction(0))


def weighted_power_sum_closed(p: Fraction, j: int) -> Fraction:
    return ((p ** (j + 1) - p) / (p - 1) - j) / (p - 1)


@dataclass
class IterationTrace:
    """Exponent sequences, log-amplitudes and the resulting threshold.

    For ``case == "crit_p0"`` the exponent sequences are ``alpha``/``beta`` and
    ``log_amp`` holds ``log C_j``; for ``"crit_p1"`` they are ``sigma`` and
    ``log K_j``.  ``amplitude_constant`` is ``E`` or ``N`` respectively and
    ``j_star`` is ``j0`` or ``j1``.
    """

    case: str
    p: Fraction
    j_max: int
    ell: list[Fraction]
    alpha: list[Fraction] = field(default_factory=list)
    beta: list[Fraction] = field(default_factory=list)
    sigma: list[Fraction] = field(default_factory=list)
    log_amp: list[float] = field(default_factory=list)
    closed_form_ok: bool = True
    j_reached: int = 0
    j_star: int = 0
    amplitude_constant: float = math.nan
    log_amp_floor_ok: bool = True
    constants: dict = field(default_factory=dict)

    def threshold(self, eps: float) -> tuple[float, float]:
        """``(T, log T)`` for data size ``eps``."""
        if self.case == "crit_p0":
            return lifespan_threshold_crit_p0(eps, float(self.p), self.amplitude_constant)
        return lifespan_threshold_crit_p1(eps, float(self.p), self.amplitude_constant)


def _ceil_nonneg(x: float) -> int:
    return max(0, math.ceil(x - 1e-12))


def constants_crit_p0(p: float, C: float, gamma_k: float, M: float) -> dict:
    """``D``, ``E`` and ``j0`` of the first critical iteration."""
    D = C * gamma_k * (p - 1.0) / (4.0 * p)
    logE = math.log(M) - p * math.log(2 * p) / (p - 1) ** 2 + math.log(D) / (p - 1)
    j0 = _ceil_nonneg(math.log(D) / math.log(2 * p) - p / (p - 1))
    return {"D": D, "E": math.exp(logE), "log_E": logE, "j0": j0}


def constants_crit_p1(p: float, C: float, K: float, R: float) -> dict:
    """``L``, ``N`` and ``j1`` of the second critical iteration, plus the
    seed ``K0 / eps^p``."""
    rr = (R + 1.0) ** (-(p + 1.0))
    L = C * rr * (p - 1.0) / (4.0 * p)
    seed = C * K ** p * rr / 3.0
    logN = math.log(seed) - p * math.log(2 * p) / (p - 1) ** 2 + math.log(L) / (p - 1)
    j1 = _ceil_nonneg(math.log(L) / math.log(2 * p) - p / (p - 1))
    return {"L": L, "N": math.exp(logN), "log_N": logN, "j1": j1, "K0_over_eps_p": seed}


def slicing_sequences(case: str, p, j_max: int, *, eps: float = 0.1, C: float = 1.0,
                      gamma_k: float = 1.0 / 3.0, M: float = 1.0, K: float = 1.0,
                      R: float = 1.0) -> IterationTrace:
    """Run the slicing recursion up to ``j_max`` and cross-check it.

    crit_p0: ``C_0 = M eps^p``, ``C_{j+1} = C gamma_k 2^{-(j+3)} (alpha_j p + 1)^{-1} C_j^p``.
    crit_p1: ``K_0 = C K^p (R+1)^{-(p+1)} eps^p / 3``,
    ``K_{j+1} = C (R+1)^{-(p+1)} 2^{-(j+3)} (sigma_j p + 1)^{-1} K_j^p``.

    ``log_amp_floor_ok`` records whether ``log C_j >= p^j log(E eps^p)`` (or
    the ``N`` analogue) for every ``j >= j_star`` reached.
    """
    if case not in ("crit_p0", "crit_p1"):
        raise ValueError(f"unknown case {case!r}")
    if not 0 <= j_max <= 60:
        raise DomainError("j_max must lie in [0, 60]")
    pf = as_fraction(p)
    if pf <= 1:
        raise DomainError("p must exceed 1")
    pr = float(pf)
    tr = IterationTrace(case=case, p=pf, j_max=j_max, ell=[ell(j) for j in range(j_max + 1)])

    if case == "crit_p0":
        const = constants_crit_p0(pr, C, gamma_k, M)
        log_gain = math.log(C * gamma_k)
        log_seed = math.log(M) + pr * math.log(eps)
        floor_const, j_star = const["log_E"], const["j0"]
        tr.amplitude_constant = const["E"]
    else:
        const = constants_crit_p1(pr, C, K, R)
        log_gain = math.log(C) - (pr + 1.0) * math.log(R + 1.0)
        log_seed = math.log(const["K0_over_eps_p"]) + pr * math.log(eps)
        floor_const, j_star = const["log_N"], const["j1"]
        tr.amplitude_constant = const["N"]
    tr.constants, tr.j_star = const, j_star

    a, b = Fraction(1), Fraction(0)
    log_amp = log_seed
    for j in range(j_max + 1):
        if case == "crit_p0":
            tr.alpha.append(a)
            tr.beta.append(b)
            ok = a == alpha_closed(pf, j) and b == beta_closed(pf, j)
        else:
            tr.sigma.append(a)
            ok = a == sigma_closed(pf, j)
        tr.closed_form_ok &= ok
        tr.log_amp.append(log_amp)
        if j >= j_star:
            floor = pr ** j * (floor_const + pr * math.log(eps))
            tr.log_amp_floor_ok &= log_amp >= floor - 1e-9 * max(1.0, abs(floor))
        tr.j_reached = j
        if j == j_max:
            break
        if a.numerator.bit_length() > MAX_BITS or a.denominator.bit_length() > MAX_BITS:
            break
        log_amp = log_gain - (j + 3) * math.log(2.0) - math.log(float(a) * pr + 1.0) + pr * log_amp
        a, b = 1 + pf * a, pf - 1 + pf * b
    return tr


def _exp_capped(log_t: float) -> float:
    return math.inf if log_t > LOG_CAP else math.exp(log_t)


def lifespan_threshold_crit_p0(eps: float, p: float, E: float) -> tuple[float, float]:
    """``T = exp(2^p E^{1-p} eps^{-p(p-1)})`` as ``(T, log T)``; ``T`` is
    ``inf`` once ``log T > 700``."""
    if not (eps > 0 and E > 0 and p > 1):
        raise DomainError("need eps > 0, E > 0, p > 1")
    log_t = math.exp(p * math.log(2.0) + (1.0 - p) * math.log(E) - p * (p - 1.0) * math.log(eps))
    return _exp_capped(log_t), log_t


def lifespan_threshold_crit_p1(eps: float, p: float, N_const: float) -> tuple[float, float]:
    """``T = exp(2 N^{-(p-1)/p} eps^{-(p-1)})`` as ``(T, log T)``.

    This is the time at which ``H(t, eps) = 1``.
    """
    if not (eps > 0 and N_const > 0 and p > 1):
        raise DomainError("need eps > 0, N > 0, p > 1")
    log_t = 2.0 * math.exp(-(p - 1.0) / p * math.log(N_const) - (p - 1.0) * math.log(eps))
    return _exp_capped(log_t), log_t


def lifespan_threshold_crit_p1_as_printed(eps: float, p: float, N_const: float) -> tuple[float, float]:
    """Variant with ``N^{+(p-1)/p}``; ``H`` equals ``N^2`` there, not 1."""
    log_t = 2.0 * math.exp((p - 1.0) / p * math.log(N_const) - (p - 1.0) * math.log(eps))
    return _exp_capped(log_t), log_t


def J_function(log_t: float, eps: float, p: float, E: float) -> float:
    """``2^{-p/(p-1)} E eps^p (log t)^{1/(p-1)}``, taking ``log t`` as input."""
    return 2.0 ** (-p / (p - 1.0)) * E * eps ** p * log_t ** (1.0 / (p - 1.0))


def H_function(log_t: float, eps: float, p: float, N_const: float) -> float:
    """``2^{-p/(p-1)} N eps^p (log t)^{p/(p-1)}``, taking ``log t`` as input."""
    return 2.0 ** (-p / (p - 1.0)) * N_const * eps ** p * log_t ** (p / (p - 1.0))


def t0_of_k(k: float) -> float | None:
    """``max(4, gamma_k^{-1/k})``; ``None`` for ``k = 0`` where it is undefined."""
    if k <= 0:
        return None
    gamma = SpacetimeParams(k).gamma_k
    return max(4.0, gamma ** (-1.0 / k))


# ---------------------------------------------------------------------------
# Kato's lemma


@dataclass(frozen=True)
class KatoInput:
    """Data of Kato's lemma for ``F'' >= B (t+R)^{-q} |F|^p``, ``F >= A t^a``.

    ``F_ratio`` is ``F(tau)/F'(tau)``; ``T1 = max(T0, F_ratio, R)``.
    """

    p: float
    a: float
    q: float
    A: float = 1.0
    B: float = 1.0
    R: float = 1.0
    T0: float = 1.0
    tau: float = 1.0
    F_ratio: float = 0.0

    def __post_init__(self):
        if not (self.p > 1 and self.a > 0 and self.q > 0):
            raise DomainError("Kato's lemma needs p > 1, a > 0, q > 0")
        if min(self.A, self.B, self.R, self.T0, self.tau) <= 0:
            raise DomainError("A, B, R, T0, tau must be positive")


@dataclass(frozen=True)
class KatoResult:
    M: float
    T1: float
    bound: float | None
    applicable: bool
    required_T1: float | None = None
    side_condition: bool | None = None


def kato_evaluate(inp: KatoInput, C0: float | None = None) -> KatoResult:
    """``M = (p-1)a/2 - q/2 + 1``; if ``M > 0`` the lifespan is below
    ``2^{2/M} T1``.

    The lemma needs ``T1 >= C0 A^{-(p-1)/(2M)}`` for an unspecified ``C0``;
    pass ``C0`` to have that inequality evaluated, otherwise it is left open.
    """
    M = (inp.p - 1.0) / 2.0 * inp.a - inp.q / 2.0 + 1.0
    T1 = max(inp.T0, inp.F_ratio, inp.R)
    if M <= 0:
        return KatoResult(M, T1, None, False)
    bound = 2.0 ** (2.0 / M) * T1
    if C0 is None:
        return KatoResult(M, T1, bound, True)
    req = C0 * inp.A ** (-(inp.p - 1.0) / (2.0 * M))
    return KatoResult(M, T1, bound, True, req, T1 >= req)


# ---------------------------------------------------------------------------
# fitted constants and the frame check


@dataclass(frozen=True)
class FittedValue:
    value: float
    grid: dict = field(default_factory=dict)


@dataclass
class FittedConstants:
    """Constants whose existence is asserted but whose size is not; each is
    fitted as an extremum of the relevant ratio over ``grid``."""

    B0: FittedValue | None = None
    B1: FittedValue | None = None
    B2: FittedValue | None = None
    K_const: FittedValue | None = None
    M_const: FittedValue | None = None
    C_frame: FittedValue | None = None

    def as_dict(self) -> dict:
        out = {}
        for name in ("B0", "B1", "B2", "K_const", "M_const", "C_frame"):
            v = getattr(self, name)
            if v is not None:
                out[name] = {"value": v.value, "grid": v.grid}
        return out


@dataclass(frozen=True)
class FrameReport:
    case: str
    C_frame: float
    samples: int
    degenerate: bool
    t_argmin: float | None


def frame_rhs(t: Sequence[float], values: Sequence[float], params: SpacetimeParams,
              p: float, case: str = "crit_p0", R: float = 1.0) -> np.ndarray:
    """Right-hand side of the iteration frame on a sampled series.

    crit_p0 (``values`` is the weighted functional):
        ``<A(t)>^{-1} int_1^t (phi(t)-phi(s))/s (log<A(s)>)^{-(p-1)} F(s)^p ds``
    crit_p1 (``values`` is the plain integral ``U``):
        ``int_1^t int_1^s (R+tau)^{-(p+1)} U(tau)^p dtau ds``

    Trapezoid rule on the given samples, so the series should be dense.
    """
    ts = np.asarray(t, dtype=float)
    fp = np.abs(np.asarray(values, dtype=float)) ** p
    if case == "crit_p0":
        ph = phi_k(ts, params)
        w = fp / ts / np.log(angle(light_cone_A(ts, params))) ** (p - 1.0)
        # int (phi(t) - phi(s)) w ds = phi(t) int w - int phi w
        i_w = cumulative_trapezoid(w, ts, initial=0.0)
        i_pw = cumulative_trapezoid(ph * w, ts, initial=0.0)
        return (ph * i_w - i_pw) / angle(light_cone_A(ts, params))
    if case == "crit_p1":
        inner = cumulative_trapezoid((R + ts) ** (-(p + 1.0)) * fp, ts, initial=0.0)
        return cumulative_trapezoid(inner, ts, initial=0.0)
    raise ValueError(f"unknown case {case!r}")


def iteration_frame_check(t: Sequence[float], values: Sequence[float], params: SpacetimeParams,
                          p: float, case: str = "crit_p0", R: float = 1.0,
                          min_samples: int = 16) -> FrameReport:
    """Largest ``C`` with ``values(t) >= C * frame_rhs(t)`` along a series.

    A series that is identically zero satisfies the inequality for every
    ``C``; that is reported as ``degenerate`` with ``C_frame = inf``.
    """
    ts = np.asarray(t, dtype=float)
    f = np.asarray(values, dtype=float)
    if ts.size < min_samples:
        raise SeriesTooShort(f"need at least {min_samples} samples, got {ts.size}")
    if np.all(f == 0):
        return FrameReport(case, math.inf, int(ts.size), True, None)
    rhs = frame_rhs(ts, f, params, p, case, R)
    mask = rhs > 0
    if not np.any(mask):
        return FrameReport(case, math.inf, int(ts.size), True, None)
    ratio = f[mask] / rhs[mask]
    i = int(np.argmin(ratio))
    return FrameReport(case, float(ratio[i]), int(ts.size), False, float(ts[mask][i]))
