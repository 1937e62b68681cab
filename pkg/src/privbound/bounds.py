"""Closed-form lower and upper bounds on the privacy-utility trade-off.

h_eps is the best utility I(Y;U) when the mechanism sees (X, Y); g_eps the
best when it sees Y only. Every function takes a :class:`JointDistribution`
and a leakage budget ``eps`` in bits. Raw bound values are returned even when
negative; only :func:`bound_report` clamps the aggregate at zero.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Optional

import numpy as np

from .distribution import (
    DomainError,
    JointDistribution,
    binary_entropy,
    conditional_entropy,
    entropy,
    mixing_weight,
    mutual_information,
    row_entropies,
)

LOG2E_OVER_E = math.log2(math.e) / math.e


def _eps_guard(j: JointDistribution, eps: float, formal: bool) -> None:
    """Domain check: 0 <= eps < I(X;Y), or eps = 0 on an independent pair.

    ``formal=True`` skips the upper limit, for evaluating the printed formulas
    outside their validity region.
    """
    if eps < 0:
        raise DomainError(f"epsilon={eps!r} must be non-negative")
    if formal or eps == 0:
        return
    info = mutual_information(j)
    if eps >= info:
        raise DomainError(f"epsilon={eps!r} must be below I(X;Y)={info:.6f}")


def sfrl_constant(info: float, variant: str = "standard") -> float:
    """log(I+1) + 4, or the sharper e^-1 log e + 2 + log(I + e^-1 log e + 2)."""
    if variant == "standard":
        return math.log2(info + 1.0) + 4.0
    if variant == "sharp":
        return LOG2E_OVER_E + 2.0 + math.log2(info + LOG2E_OVER_E + 2.0)
    raise ValueError(f"unknown variant {variant!r}")


def lower_L1(j: JointDistribution, eps: float, formal: bool = False) -> float:
    _eps_guard(j, eps, formal)
    return entropy(j.py) - entropy(j.px) + eps


def lower_L2(j: JointDistribution, eps: float, variant: str = "standard", formal: bool = False) -> float:
    _eps_guard(j, eps, formal)
    alpha = mixing_weight(j, eps)
    const = sfrl_constant(mutual_information(j), variant)
    return (conditional_entropy(j, "y|x") - alpha * conditional_entropy(j, "x|y")
            + eps - (1.0 - alpha) * const)


def lower_L3(j: JointDistribution, eps: float, g0: float) -> Optional[float]:
    """Time-sharing bound between the perfect-privacy optimum and U = Y.

    Returns None when I(X;Y) vanishes and the bound is undefined.
    """
    _eps_guard(j, eps, False)
    info = mutual_information(j)
    if info <= 1e-12:
        return None
    ratio = eps / info
    return ratio * entropy(j.py) + g0 * (1.0 - ratio)


def upper_h(j: JointDistribution, eps: float) -> float:
    if eps < 0:
        raise DomainError(f"epsilon={eps!r} must be non-negative")
    return conditional_entropy(j, "y|x") + eps


def layered_integral(j: JointDistribution) -> float:
    """sum_y  int_0^1 F_y(t) log2 F_y(t) dt  with  F_y(t) = P_X{P(y|X) >= t}.

    F_y is a step function: on (v_{i-1}, v_i] it equals P_X{P(y|X) >= v_i},
    where 0 = v_0 < v_1 < ... are the distinct positive values of P(y|x).
    The result is never positive.
    """
    px = j.px
    cond = j.p_y_given_x
    live = px > 0
    total = 0.0
    for y in range(j.ny):
        vals = cond[live, y]
        weights = px[live]
        levels = np.unique(vals[vals > 0])
        prev = 0.0
        for v in levels:
            F = float(weights[vals >= v].sum())
            if 0 < F < 1:
                total += (v - prev) * F * math.log2(F)
            prev = v
    return min(total, 0.0)


def psi_lower(j: JointDistribution) -> float:
    """Lower bound on the excess functional information; may be negative."""
    return -layered_integral(j) - mutual_information(j)


def upper_U1(j: JointDistribution) -> float:
    return conditional_entropy(j, "y|x")


def upper_U2(j: JointDistribution) -> float:
    return conditional_entropy(j, "y|x") - psi_lower(j)


def entropy_floor(j: JointDistribution, eps: float) -> tuple[float, float]:
    """Lower bound on sup H(U) over leakage-eps representations, and its weaker form."""
    _eps_guard(j, eps, False)
    alpha = mixing_weight(j, eps)
    h_cond = conditional_entropy(j, "y|x")
    worst = float(row_entropies(j)[j.px > 0].max())
    strong = alpha * h_cond + (1.0 - alpha) * worst + binary_entropy(alpha) + eps
    weak = h_cond + binary_entropy(alpha) + eps
    return strong, weak


@dataclasses.dataclass(frozen=True)
class BoundReport:
    eps: float
    alpha: float
    L1: float
    L2: float
    L2_sharp: float
    L3: Optional[float]
    best_lower: float
    upper_h: float
    entropy_floor: Optional[float]
    entropy_floor_weak: Optional[float]
    theorem1_flag: bool
    in_validity_region: bool
    variant: str = "standard"
    g0: Optional[float] = None
    U1: Optional[float] = None
    U2: Optional[float] = None
    psi_lb: Optional[float] = None
    layered_T: Optional[float] = None

    @property
    def consistent(self) -> bool:
        return self.best_lower <= self.upper_h + 1e-9

    def as_rows(self):
        names = ["eps", "alpha", "L1", "L2", "L2_sharp", "L3", "best_lower", "upper_h",
                 "entropy_floor", "entropy_floor_weak", "theorem1_flag", "in_validity_region",
                 "g0", "U1", "U2", "psi_lb", "layered_T"]
        rows = []
        for name in names:
            value = getattr(self, name)
            if value is None:
                continue
            rows.append((name, int(value) if isinstance(value, bool) else value))
        return rows


def bound_report(j: JointDistribution, eps: float, variant: str = "standard",
                 with_g0: bool = False, g0_value: Optional[float] = None) -> BoundReport:
    """Every bound at ``eps``; the U1/U2/psi fields are filled only at eps = 0.

    Outside 0 <= eps < I(X;Y) only eps = 0 is accepted (independent pairs);
    the report is then flagged as outside the validity region.
    """
    info = mutual_information(j)
    in_region = 0 <= eps < info
    if eps < 0 or (not in_region and eps != 0):
        raise DomainError(f"epsilon={eps!r} must satisfy 0 <= eps < I(X;Y)={info:.6f}")

    L1 = lower_L1(j, eps)
    L2 = lower_L2(j, eps, "standard")
    L2s = lower_L2(j, eps, "sharp")
    L3 = None
    if (with_g0 or g0_value is not None) and info > 1e-12:
        if g0_value is None:
            from .perfect_privacy import g0 as solve_g0
            g0_value = solve_g0(j).value
        L3 = lower_L3(j, eps, g0_value)
    L2_used = L2s if variant == "sharp" else L2
    best = max([0.0, L1, L2_used] + ([L3] if L3 is not None else []))
    floor, floor_weak = entropy_floor(j, eps) if in_region else (None, None)

    extras = {}
    if eps == 0:
        T = layered_integral(j)
        extras = dict(U1=upper_U1(j), U2=upper_U2(j), psi_lb=psi_lower(j), layered_T=T)
    return BoundReport(
        eps=eps,
        alpha=mixing_weight(j, eps),
        L1=L1,
        L2=L2,
        L2_sharp=L2s,
        L3=L3,
        best_lower=best,
        upper_h=upper_h(j, eps),
        entropy_floor=floor,
        entropy_floor_weak=floor_weak,
        theorem1_flag=entropy(j.py) - entropy(j.px) > 1e-12,
        in_validity_region=in_region,
        variant=variant,
        g0=g0_value,
        **extras,
    )
