"""Critical exponents, dimension thresholds and the lifespan-law selector.

``n`` is accepted as a real number throughout so that boundary cases such as
``n = N(k)`` can be probed exactly.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .special import DomainError

__all__ = [
    "LifespanLaw",
    "ExponentReport",
    "larger_root",
    "p_strauss",
    "critical_exponent_p0",
    "critical_exponent_p0_second_form",
    "p0_identity_residual",
    "critical_exponent_p1",
    "exponent_p2",
    "exponent_p3",
    "threshold_N",
    "threshold_N_as_printed",
    "thresholds",
    "theta",
    "kato_quantities",
    "classify_lifespan",
    "exponent_report",
]

REGIMES = ("sub_p1", "sub_p0_via_p3_left", "sub_p0_via_p3_right", "sub_p0",
           "crit_p0", "crit_p1", "supercritical_unknown")

# |n - N(k)| and |p - p_c| below this count as equality.
_EQ_TOL = 1e-12


def _check(n: float, k: float) -> None:
    if not (0.0 <= k < 1.0):
        raise DomainError(f"k must lie in [0, 1), got {k}")
    if not n > 0:
        raise DomainError(f"n must be positive, got {n}")


def larger_root(a: float, b: float, c: float) -> float:
    """Larger real root of ``a x^2 + b x + c`` (``a > 0``), cancellation free."""
    disc = b * b - 4.0 * a * c
    if disc < 0:
        raise DomainError("quadratic has no real roots")
    sq = math.sqrt(disc)
    if b <= 0:
        return (-b + sq) / (2.0 * a)
    # the other root is the large-magnitude one; recover via Vieta
    qv = -0.5 * (b + sq)
    return c / qv


def p_strauss(n: float) -> float:
    """Positive root of ``(n-1)p^2 - (n+1)p - 2``; ``+inf`` for ``n = 1``."""
    if n <= 1:
        return math.inf
    return larger_root(n - 1.0, -(n + 1.0), -2.0)


def critical_exponent_p0(n: float, k: float) -> float:
    """Positive root of ``((1-k)n+1)p^2 - ((1-k)n+3+2k)p - 2(1-k)``."""
    _check(n, k)
    m = (1.0 - k) * n
    return larger_root(m + 1.0, -(m + 3.0 + 2.0 * k), -2.0 * (1.0 - k))


def critical_exponent_p0_second_form(n: float, k: float) -> float:
    """The same exponent from the equivalent normalized quadratic

    ``a p^2 - b p - 1 = 0`` with ``a = (n-1)/2 + (2-k)/(2(1-k))`` and
    ``b = (n+1)/2 + (2+3k)/(2(1-k))``.
    """
    _check(n, k)
    a = (n - 1.0) / 2.0 + (2.0 - k) / (2.0 * (1.0 - k))
    b = (n + 1.0) / 2.0 + (2.0 + 3.0 * k) / (2.0 * (1.0 - k))
    return larger_root(a, -b, -1.0)


def p0_identity_residual(n: float, k: float) -> float:
    """``-a p + c + 1/p + 1/(1-k)`` at ``p = p0``; vanishes identically.

    ``a = (n-1)/2 + (2-k)/(2(1-k))``, ``c = (n-1)/2 + (2+k)/(2(1-k))``.
    """
    p = critical_exponent_p0(n, k)
    a = (n - 1.0) / 2.0 + (2.0 - k) / (2.0 * (1.0 - k))
    c = (n - 1.0) / 2.0 + (2.0 + k) / (2.0 * (1.0 - k))
    return -a * p + c + 1.0 / p + 1.0 / (1.0 - k)


def critical_exponent_p1(n: float, k: float) -> float:
    _check(n, k)
    return 1.0 + 2.0 / ((1.0 - k) * n)


def exponent_p2(n: float, k: float) -> float:
    _check(n, k)
    return 2.0 + 2.0 * k / ((1.0 - k) * n + 1.0)


def exponent_p3(n: float, k: float) -> float:
    """``2(1-k)/((1-k)n - 1)``; ``+inf`` when the denominator vanishes."""
    _check(n, k)
    den = (1.0 - k) * n - 1.0
    if abs(den) < _EQ_TOL:
        return math.inf
    return 2.0 * (1.0 - k) / den


def threshold_N(k: float) -> float:
    """Dimension at which ``p0`` and ``p1`` coincide.

    ``(1 - 2k + sqrt(4k^2 - 4k + 9)) / (2(1-k))``: the positive root of
    ``(1-k) n^2 - (1-2k) n - 2 = 0``, obtained by substituting ``p1`` into the
    ``p0`` quadratic.
    """
    _check(1.0, k)
    return (1.0 - 2.0 * k + math.sqrt(4.0 * k * k - 4.0 * k + 9.0)) / (2.0 * (1.0 - k))


def threshold_N_as_printed(k: float) -> float:
    """Variant with ``+8`` under the root.  Kept for comparison only: at this
    ``n`` the exponents ``p0`` and ``p1`` do not coincide."""
    _check(1.0, k)
    return (1.0 - 2.0 * k + math.sqrt(4.0 * k * k - 4.0 * k + 8.0)) / (2.0 * (1.0 - k))


def thresholds(k: float) -> tuple[float, float, float]:
    """``(N(k), N~(k), N^(k))`` with ``N~ = 1/(1-k)`` and ``N^ = 2 + 1/(1-k)``."""
    _check(1.0, k)
    return threshold_N(k), 1.0 / (1.0 - k), 2.0 + 1.0 / (1.0 - k)


def theta(p: float, n: float, k: float) -> float:
    return (1.0 - k
            + ((1.0 - k) * (n + 1.0) / 2.0 + 1.0 + 1.5 * k) * p
            - ((1.0 - k) * (n - 1.0) / 2.0 + 1.0 - 0.5 * k) * p * p)


def kato_quantities(n: float, k: float, p: float) -> dict:
    """``a1, a2, q, M1, M2, theta`` for Kato's lemma applied to ``U(t)``.

    ``M1`` uses the lower bound ``U >~ t^{a1}`` and ``M2`` the bound
    ``U >~ t^{a2}``; both share ``q = ((1-k)n+1)(p-1)``.  ``M`` is the larger
    of the two and ``a`` the growth exponent of the branch attaining it.
    Note that ``M2 > 0`` alone does not force ``a2 > 1`` (take ``n < N(k)``);
    the implication holds for the maximizing branch.
    """
    _check(n, k)
    if not p > 1:
        raise DomainError("p must exceed 1")
    m = (1.0 - k) * n
    a1 = -(m + 1.0) * (p - 1.0) + p + 2.0
    a2 = (1.0 - k) * (n - 1.0) * (1.0 - p / 2.0) + k * p / 2.0 + 3.0 - p
    q = (m + 1.0) * (p - 1.0)
    M1 = (p - 1.0) / 2.0 * a1 - q / 2.0 + 1.0
    M2 = (p - 1.0) / 2.0 * a2 - q / 2.0 + 1.0
    M, a = (M1, a1) if M1 >= M2 else (M2, a2)
    return {"a1": a1, "a2": a2, "q": q, "M1": M1, "M2": M2, "M": M, "a": a,
            "theta": theta(p, n, k)}


@dataclass(frozen=True)
class LifespanLaw:
    """``power``: ``T <~ eps^{-exponent}``; ``exponential``: ``T <= exp(C eps^{-exponent})``.

    ``regime`` is one of :data:`REGIMES`; for ``supercritical_unknown`` the
    kind is ``none`` and the exponent NaN.
    """

    kind: str
    exponent: float
    regime: str


def classify_lifespan(n: float, k: float, p: float) -> LifespanLaw:
    _check(n, k)
    if not p > 1:
        raise DomainError("p must exceed 1")
    N, _, N_hat = thresholds(k)
    p0 = critical_exponent_p0(n, k)
    p1 = critical_exponent_p1(n, k)
    m = (1.0 - k) * n

    if n <= N + _EQ_TOL:
        if abs(p - p1) <= _EQ_TOL * p1:
            return LifespanLaw("exponential", p - 1.0, "crit_p1")
        if p < p1:
            return LifespanLaw("power", 1.0 / (2.0 / (p - 1.0) - m), "sub_p1")
        return LifespanLaw("none", math.nan, "supercritical_unknown")

    if abs(p - p0) <= _EQ_TOL * p0:
        return LifespanLaw("exponential", p * (p - 1.0), "crit_p0")
    if p > p0:
        return LifespanLaw("none", math.nan, "supercritical_unknown")
    th_law = LifespanLaw("power", p * (p - 1.0) / theta(p, n, k), "sub_p0")
    if n >= N_hat - _EQ_TOL:
        return th_law
    # N < n < N^: p3 > 1 and p3 < p0 here; (p3, p0) may be empty, in which
    # case the left branch covers everything.
    p3 = exponent_p3(n, k)
    if p <= p3:
        return LifespanLaw("power", 1.0 / (2.0 / (p - 1.0) - m), "sub_p0_via_p3_left")
    return LifespanLaw("power", th_law.exponent, "sub_p0_via_p3_right")


@dataclass(frozen=True)
class ExponentReport:
    n: float
    k: float
    p: float | None
    p_strauss: float
    p0: float
    p0_second_form: float
    p1: float
    p2: float
    p3: float
    N_k: float
    N_tilde: float
    N_hat: float
    regime: str | None = None
    law_kind: str | None = None
    law_exponent: float | None = None
    theta: float | None = None
    M1: float | None = None
    M2: float | None = None
    a1: float | None = None
    a2: float | None = None

    def as_dict(self) -> dict:
        return asdict(self)


def exponent_report(n: float, k: float, p: float | None = None) -> ExponentReport:
    N, Nt, Nh = thresholds(k)
    fields = dict(n=n, k=k, p=p, p_strauss=p_strauss(n), p0=critical_exponent_p0(n, k),
                  p0_second_form=critical_exponent_p0_second_form(n, k),
                  p1=critical_exponent_p1(n, k), p2=exponent_p2(n, k), p3=exponent_p3(n, k),
                  N_k=N, N_tilde=Nt, N_hat=Nh)
    if p is not None:
        law = classify_lifespan(n, k, p)
        kq = kato_quantities(n, k, p)
        fields.update(regime=law.regime, law_kind=law.kind, law_exponent=law.exponent,
                      theta=kq["theta"], M1=kq["M1"], M2=kq["M2"], a1=kq["a1"], a2=kq["a2"])
    return ExponentReport(**fields)
