"""Closed-form average age for iid sensors under poll-``s``-then-send with MAF.

Under MAF every sensor is polled once per round (see
:mod:`gwage.coupling`).  If ``R`` other sensors are polled after sensor ``i``
before the send carrying its update, then ``L = ceil((n - R) / s)`` sends
separate consecutive fresh deliveries of ``i``.  ``R`` is taken uniform on
``{0, ..., s-1}``; the per-sensor average then follows from the renewal
ratio ``(E[YT] + E[Y^2]/2) / E[Y]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .stochastic import DistributionSpec, moments

# relative gap below which two AoI values count as tied in the s search
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class HomogeneousParams:
    n: int
    s: int
    ex: float
    varx: float
    ex0: float
    varx0: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not 1 <= self.s <= self.n:
            raise ValueError(f"s must satisfy 1 <= s <= n={self.n}, got {self.s}")
        if not (self.ex > 0 and self.ex0 > 0):
            raise ValueError("mean transmission times must be > 0")
        if self.varx < 0 or self.varx0 < 0:
            raise ValueError("variances must be >= 0")

    @classmethod
    def from_specs(cls, n: int, s: int, sensor: DistributionSpec,
                   monitor: DistributionSpec) -> "HomogeneousParams":
        ex, varx = moments(sensor)
        ex0, varx0 = moments(monitor)
        return cls(n, s, ex, varx, ex0, varx0)

    def with_s(self, s: int) -> "HomogeneousParams":
        return HomogeneousParams(self.n, s, self.ex, self.varx, self.ex0, self.varx0)

    @property
    def eta1(self) -> float:
        return self.ex0 / self.ex

    @property
    def eta2(self) -> float:
        """``Var[X0] / Var[X]``; nan or inf when the sensor law is deterministic."""
        if self.varx == 0:
            return math.nan if self.varx0 == 0 else math.inf
        return self.varx0 / self.varx


@dataclass(frozen=True)
class LMoments:
    e_l: float
    e_l2: float
    e_lr: float


def l_moments(n: int, s: int) -> LMoments:
    """``E[L]``, ``E[L^2]``, ``E[LR]`` by enumerating ``R = 0..s-1``."""
    if not 1 <= s <= n:
        raise ValueError(f"s must satisfy 1 <= s <= n={n}, got {s}")
    ls = [-(-(n - r) // s) for r in range(s)]
    return LMoments(
        sum(ls) / s,
        sum(v * v for v in ls) / s,
        sum(v * r for r, v in enumerate(ls)) / s,
    )


def _variance_term(p: HomogeneousParams) -> float:
    # Var[X] (s + eta2) == Var[X] s + Var[X0]; this form also covers Var[X] = 0
    return (p.varx * p.s + p.varx0) / (2 * p.ex * (p.s + p.eta1))


def avg_age_exact(p: HomogeneousParams) -> float:
    """Average age of every sensor (hence the AoI) at the monitor."""
    lm = l_moments(p.n, p.s)
    eta1 = p.eta1
    return (_variance_term(p)
            + lm.e_l2 / (2 * lm.e_l) * p.ex * (p.s + eta1)
            + lm.e_lr / lm.e_l * p.ex
            + (eta1 + 1) * p.ex)


def avg_age_approx(p: HomogeneousParams) -> float:
    """:func:`avg_age_exact` with ``L`` replaced by ``n / s``."""
    eta1 = p.eta1
    return _variance_term(p) + p.ex * (
        p.n / (2 * p.s) * (p.s + eta1) + (p.s - 1) / 2 + eta1 + 1)


def approx_minimizer(n: int, eta1: float) -> float:
    """Stationary point of the approximation when Var[X] = 0 or eta1 == eta2."""
    return math.sqrt(eta1 * n)


def aoi_curve(n: int, ex: float, varx: float, ex0: float, varx0: float) -> list[float]:
    base = HomogeneousParams(n, 1, ex, varx, ex0, varx0)
    return [avg_age_exact(base.with_s(s)) for s in range(1, n + 1)]


def s_star(n: int, ex: float, varx: float, ex0: float, varx0: float) -> int:
    """Exact AoI-minimizing ``s`` in ``1..n``; ties go to the smallest ``s``.

    Values within ``TIE_RTOL`` of the minimum count as ties, since plateaus
    of exactly equal AoI occur (e.g. ``n = 8``, ``eta1 = 4``, det laws).
    """
    curve = aoi_curve(n, ex, varx, ex0, varx0)
    best = min(curve)
    for s, v in enumerate(curve, start=1):
        if v <= best * (1 + TIE_RTOL):
            return s
    raise AssertionError("unreachable")


def s_hat(n: int, eta1: float) -> int:
    """``round(sqrt(eta1 * n))`` with halves rounded up, clamped to ``1..n``."""
    if n < 1 or not eta1 > 0:
        raise ValueError(f"need n >= 1 and eta1 > 0, got n={n}, eta1={eta1}")
    return min(n, max(1, math.floor(math.sqrt(eta1 * n) + 0.5)))
