"""Perfect-privacy utility g0 for the hidden scenario.

Under X - Y - U, U is independent of X iff every posterior P(Y | U=u) lies in

    S = { q in simplex(Y) : P_{X|Y} q = P_X }.

Since P_Y = sum_u P(u) P(Y|U=u), maximizing I(Y;U) = H(Y) - H(Y|U) means
decomposing P_Y into points of S with least average entropy. Entropy is
concave, so an optimal decomposition uses vertices of S only, and the
problem becomes a linear program over vertex weights.
"""

from __future__ import annotations

import dataclasses
from typing import NamedTuple

import numpy as np

from .distribution import JointDistribution, Mechanism, entropy
from .simplex import InfeasibleError, basic_feasible_solutions, linprog_eq

MAX_NY = 8
VERTEX_TOL = 1e-9


@dataclasses.dataclass(frozen=True, eq=False)
class PrivacyPolytopeVertex:
    q: np.ndarray

    @property
    def entropy(self) -> float:
        return entropy(self.q)

    def residual(self, j: JointDistribution) -> float:
        return float(np.max(np.abs(j.p_x_given_y @ self.q - j.px)))


class G0Result(NamedTuple):
    value: float
    mechanism: Mechanism
    weights: np.ndarray
    vertices: list


def _support(j: JointDistribution) -> np.ndarray:
    return np.flatnonzero(j.py > 0)


def polytope_vertices(j: JointDistribution) -> list[PrivacyPolytopeVertex]:
    """Vertices of S, found as basic feasible solutions of its equality system."""
    ys = _support(j)
    if ys.size > MAX_NY:
        raise ValueError(f"vertex enumeration is limited to {MAX_NY} outcomes of Y, got {ys.size}")
    A = np.vstack([j.p_x_given_y[:, ys], np.ones(ys.size)])
    b = np.append(j.px, 1.0)
    out = []
    for sol in basic_feasible_solutions(A, b, tol=VERTEX_TOL):
        q = np.zeros(j.ny)
        q[ys] = sol / sol.sum()
        out.append(PrivacyPolytopeVertex(q))
    return out


def _lexicographic_weights(costs, Q, target, optimum) -> np.ndarray:
    """Among optimal decompositions pick the lexicographically smallest weight vector."""
    nv = len(costs)
    slack_tol = 1e-10 * max(1.0, abs(optimum))
    # variables: w (nv), slack s >= 0 with costs @ w + s = optimum + tol
    base_A = np.vstack([
        np.hstack([Q, np.zeros((Q.shape[0], 1))]),
        np.append(costs, 1.0),
    ])
    base_b = np.append(target, optimum + slack_tol)
    fixed: list[tuple[int, float]] = []
    w = None
    for i in range(nv):
        rows = [base_A]
        rhs = [base_b]
        for idx, val in fixed:
            row = np.zeros(nv + 1)
            row[idx] = 1.0
            rows.append(row[None, :])
            rhs.append([val])
        c = np.zeros(nv + 1)
        c[i] = 1.0
        try:
            res = linprog_eq(c, np.vstack(rows), np.concatenate(rhs))
        except InfeasibleError:
            break
        w = res.x[:nv]
        fixed.append((i, float(w[i])))
    return w


def g0(j: JointDistribution, tie_break: bool = True) -> G0Result:
    """g0 = H(Y) - min sum_v w_v H(q_v) subject to sum_v w_v q_v = P_Y.

    Returns the value and the hidden-scenario mechanism with
    ``P(U=v | Y=y) = w_v q_v(y) / P_Y(y)`` restricted to vertices in use.
    """
    vertices = polytope_vertices(j)
    ys = _support(j)
    Q = np.array([v.q[ys] for v in vertices]).T
    costs = np.array([v.entropy for v in vertices])
    target = j.py[ys]
    res = linprog_eq(costs, Q, target)
    w = res.x
    if tie_break and len(vertices) > 1:
        lex = _lexicographic_weights(costs, Q, target, res.fun)
        if lex is not None and np.max(np.abs(Q @ lex - target)) <= 1e-9:
            w = lex
    w = np.where(w > 1e-14, w, 0.0)
    w = w / w.sum()

    used = np.flatnonzero(w > 0)
    channel = np.zeros((j.ny, used.size))
    for col, v in enumerate(used):
        channel[:, col] = w[v] * vertices[v].q
    py = j.py
    pos = py > 0
    channel[pos] /= channel[pos].sum(axis=1, keepdims=True)
    channel[~pos] = 0.0
    channel[~pos, 0] = 1.0
    value = max(entropy(py) - float(costs @ w), 0.0)
    return G0Result(value, Mechanism.from_channel(channel, j.nx), w, vertices)
