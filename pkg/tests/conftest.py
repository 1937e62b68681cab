"""Shared fixtures and independent reference computations.

The reference helpers deliberately avoid the package: entropies use mpmath at
50 digits, linear programs go through scipy's HiGHS.
"""

from __future__ import annotations

import math
import sys

import mpmath
import numpy as np
import pytest

from privbound import family_bsc, family_erasure, family_function
from privbound.distribution import dump_distribution

mpmath.mp.dps = 50


def ref_entropy(p) -> float:
    total = mpmath.mpf(0)
    for v in np.asarray(p, dtype=float).ravel():
        if v > 0:
            v = mpmath.mpf(float(v))
            total -= v * mpmath.log(v, 2)
    return float(total)


def ref_h(theta: float) -> float:
    return ref_entropy([theta, 1 - theta])


def ref_mi(p) -> float:
    p = np.asarray(p, dtype=float)
    return ref_entropy(p.sum(1)) + ref_entropy(p.sum(0)) - ref_entropy(p)


def ref_cond_entropy_y_given_x(p) -> float:
    p = np.asarray(p, dtype=float)
    return ref_entropy(p) - ref_entropy(p.sum(1))


def ref_triple(p, k):
    """I(Y;U), I(X;U), I(X;U|Y), H(Y|X,U) from the joint P(x,y,u)."""
    q = np.asarray(p, dtype=float)[:, :, None] * np.asarray(k, dtype=float)
    H = ref_entropy
    hxyu = H(q)
    hx, hy, hu = H(q.sum((1, 2))), H(q.sum((0, 2))), H(q.sum((0, 1)))
    hxu, hyu, hxy = H(q.sum(1)), H(q.sum(0)), H(q.sum(2))
    return dict(
        utility=hy + hu - hyu,
        leakage=hx + hu - hxu,
        cond_leakage=hxy + hyu - hxyu - hy,
        residual=hxyu - hxu,
    )


def layered_quadrature(p, n: int = 200_000) -> float:
    """Midpoint-rule evaluation of sum_y int_0^1 F log2 F dt, F = P_X{P(y|X) >= t}."""
    p = np.asarray(p, dtype=float)
    px = p.sum(1)
    cond = p / px[:, None]
    t = (np.arange(n) + 0.5) / n
    total = 0.0
    for y in range(p.shape[1]):
        F = (px[None, :] * (cond[None, :, y] >= t[:, None])).sum(1)
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.where(F > 0, F * np.log2(np.where(F > 0, F, 1.0)), 0.0)
        total += vals.mean()
    return float(total)


@pytest.fixture
def bsc02():
    return family_bsc(0.2)


@pytest.fixture
def erasure03():
    return family_erasure(0.3)


@pytest.fixture
def parity4():
    return family_function(4, lambda y: y % 2)


@pytest.fixture
def write_joint(tmp_path):
    def _write(j, name="joint.pxy"):
        path = tmp_path / name
        path.write_text(dump_distribution(j), encoding="utf-8")
        return str(path)
    return _write


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def close(a, b, tol):
    return math.isclose(a, b, rel_tol=0.0, abs_tol=tol)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
