"""Functional representations of Y given X, with and without leakage.

Every construction here returns a :class:`Mechanism`. The basic object is a
U independent of X with Y = g_U(X) for a random function g_U; leakage is
then injected on purpose by attaching a partial copy of X (or of Y, in the
hidden scenario).
"""

from __future__ import annotations

import dataclasses
import logging
from typing import NamedTuple

import numpy as np

from .distribution import (
    DomainError,
    JointDistribution,
    Mechanism,
    Scenario,
    check_epsilon,
    entropy,
    extend,
    mixing_weight,
    mutual_information,
    report,
)
from .simplex import TooManyBases, basic_feasible_solutions, linprog_eq

log = logging.getLogger(__name__)

BREAKPOINT_TOL = 1e-12


@dataclasses.dataclass(frozen=True)
class SearchConfig:
    restarts: int = 4
    max_iters: int = 200
    step: float = 0.1
    seed: int = 0
    tol: float = 1e-9

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")

    def rng(self, stream: int) -> np.random.Generator:
        return np.random.default_rng([self.seed & 0xFFFFFFFFFFFFFFFF, stream])


# --------------------------------------------------------------------------
# Functional representation by interval refinement
# --------------------------------------------------------------------------

def interval_refinement(p: np.ndarray):
    """Common refinement of the per-x partitions of [0, 1) by P(y|x).

    Returns ``(xs, lengths, labels)`` where ``xs`` are the x with positive
    mass, ``lengths[c]`` is the mass of merged cell c and ``labels[c, i]`` the
    y assigned to ``xs[i]`` on that cell. Cells with equal label vectors are
    merged, labels numbered by first occurrence from the left.
    """
    p = np.asarray(p, dtype=float)
    px = p.sum(axis=1)
    xs = np.flatnonzero(px > 0)
    cond = p[xs] / px[xs, None]
    cums = np.cumsum(cond, axis=1)[:, :-1]
    points = np.sort(np.clip(np.concatenate([[0.0, 1.0], cums.ravel()]), 0.0, 1.0))
    edges = [0.0]
    for pt in points[1:]:
        if pt - edges[-1] > BREAKPOINT_TOL:
            edges.append(float(pt))
    edges[-1] = 1.0
    edges = np.array(edges)
    mids = 0.5 * (edges[:-1] + edges[1:])
    widths = np.diff(edges)
    raw = np.array([[np.searchsorted(cums[i], t, side="right") for i in range(len(xs))] for t in mids])

    order: dict[tuple, int] = {}
    lengths: list[float] = []
    for vec, w in zip(map(tuple, raw), widths):
        if vec not in order:
            order[vec] = len(lengths)
            lengths.append(0.0)
        lengths[order[vec]] += w
    labels = np.array(list(order.keys()), dtype=int).reshape(len(order), len(xs))
    return xs, np.array(lengths), labels


def atoms_to_kernel(p: np.ndarray, xs, weights, labels) -> np.ndarray:
    """Kernel P(U | X, Y) for U ~ weights independent of X and Y = labels[U, x].

    ``k[x, y, u] = weights[u] 1{labels[u, x] = y} / sum_{u': labels[u', x] = y} weights[u']``;
    rows without support get the constant row (all mass on u = 0).
    """
    nx, ny = p.shape
    nu = len(weights)
    k = np.zeros((nx, ny, nu))
    for i, x in enumerate(xs):
        k[x, labels[:, i], np.arange(nu)] = weights
    sums = k.sum(axis=2, keepdims=True)
    empty = sums[..., 0] <= 0
    k = np.divide(k, sums, out=np.zeros_like(k), where=sums > 0)
    k[empty, 0] = 1.0
    return k


def frl(j: JointDistribution) -> Mechanism:
    """U independent of X with Y a function of (X, U), |U| <= nx(ny-1)+1."""
    xs, lengths, labels = interval_refinement(j.p)
    return Mechanism(atoms_to_kernel(j.p, xs, lengths, labels), Scenario.OBSERVED)


def mix_with_x(j: JointDistribution, base: Mechanism, alpha: float) -> Mechanism:
    """Append W = X with probability alpha (else a fresh constant) to ``base``.

    Output symbol ``u * (nx + 1) + w`` with ``w = nx`` standing for the constant.
    If X is independent of the base output, the leakage becomes alpha H(X).
    """
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"alpha={alpha!r} outside [0, 1]")
    if report(j, base).leakage > 1e-9:
        raise DomainError("base mechanism must be independent of X")
    nx, ny, nu = base.k.shape
    k = np.zeros((nx, ny, nu, nx + 1))
    for x in range(nx):
        k[x, :, :, x] = alpha * base.k[x]
    k[:, :, :, nx] = (1.0 - alpha) * base.k
    return Mechanism(k.reshape(nx, ny, nu * (nx + 1)), Scenario.OBSERVED)


def efrl(j: JointDistribution, eps: float) -> Mechanism:
    """Mechanism with leakage exactly ``eps`` and Y a function of (X, U)."""
    check_epsilon(j, eps)
    return mix_with_x(j, frl(j), mixing_weight(j, eps))


# --------------------------------------------------------------------------
# Function atoms and the excess functional information
# --------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True, eq=False)
class FunctionAtomSpace:
    """All maps g: X -> Y, and the weights over them that reproduce P(Y|X).

    A weight vector w with ``A @ w = b`` defines U = g independent of X with
    Y = g(X). Maps are restricted to the x with positive probability.
    """

    nx: int
    ny: int
    xs: np.ndarray
    atoms: np.ndarray
    A: np.ndarray
    b: np.ndarray
    cost: np.ndarray
    admissible: np.ndarray
    info: float
    pinv: np.ndarray

    @classmethod
    def build(cls, j: JointDistribution) -> "FunctionAtomSpace":
        xs = np.flatnonzero(j.px > 0)
        m = len(xs)
        grids = np.indices((j.ny,) * m).reshape(m, -1).T
        cond = j.p_y_given_x[xs]
        A = np.zeros((m * j.ny, len(grids)))
        for i in range(m):
            A[i * j.ny + grids[:, i], np.arange(len(grids))] = 1.0
        b = cond.ravel()
        px = j.px[xs] / j.px[xs].sum()
        # H(g(X)) under P_X
        cost = np.empty(len(grids))
        for g, atom in enumerate(grids):
            cost[g] = entropy(np.bincount(atom, weights=px, minlength=j.ny))
        admissible = np.all(cond[np.arange(m), grids] > 0, axis=1)
        return cls(j.nx, j.ny, xs, grids, A, b, cost, admissible, mutual_information(j), np.linalg.pinv(A))

    @property
    def size(self) -> int:
        return len(self.atoms)

    def objective(self, w: np.ndarray) -> float:
        """I(X;U|Y) of the atom mechanism: sum_g w_g H(g(X)) - I(X;Y)."""
        return float(self.cost @ w) - self.info

    def residual(self, w: np.ndarray) -> float:
        return float(np.max(np.abs(self.A @ w - self.b)))

    def mechanism(self, j: JointDistribution, w: np.ndarray) -> Mechanism:
        used = np.flatnonzero(w > 1e-15)
        return Mechanism(atoms_to_kernel(j.p, self.xs, w[used], self.atoms[used]), Scenario.OBSERVED)

    def project(self, z: np.ndarray, iters: int = 300, tol: float = 1e-12) -> np.ndarray:
        """Euclidean projection onto ``{w >= 0, A w = b}`` by Dykstra's alternating projections."""
        pinv = self.pinv
        x = np.array(z, dtype=float)
        corr = np.zeros_like(x)
        A, b = self.A, self.b
        for _ in range(iters):
            y = x - pinv @ (A @ x - b)
            nxt = np.maximum(y + corr, 0.0)
            corr += y - nxt
            done = np.abs(nxt - x).max() < tol
            x = nxt
            if done:
                break
        return x


class SFRLResult(NamedTuple):
    mechanism: Mechanism
    psi_estimate: float
    weights: np.ndarray
    hit_iteration_limit: bool
    vertices_evaluated: int


def _descend(space: FunctionAtomSpace, w0: np.ndarray, cfg: SearchConfig, patience: int = 50):
    """Projected gradient descent on the atom objective with step halving.

    Stops after ``patience`` consecutive non-improving steps, or as soon as a
    projected step returns the current point (a stationary point of a convex
    program, hence optimal).
    """
    w = w0
    f = space.objective(w)
    step = cfg.step
    stall = 0
    for _ in range(cfg.max_iters):
        cand = space.project(w - step * space.cost)
        if np.max(np.abs(cand - w)) < 1e-12:
            return w, f, False
        fc = space.objective(cand)
        if fc < f - cfg.tol:
            w, f = cand, fc
            stall = 0
        else:
            step *= 0.5
            stall += 1
            if stall >= patience:
                return w, f, False
    return w, f, True


def sfrl_search(j: JointDistribution, cfg: SearchConfig = SearchConfig(), max_bases: int = 5_000) -> SFRLResult:
    """Minimize I(X;U|Y) over U independent of X with Y a function of (X, U).

    The objective is linear in the atom weights, so the exact minimum sits at
    a vertex of the constraint polytope: all vertices are scored when they can
    be listed within ``max_bases`` candidate bases, and the simplex optimum is
    always included. Projected descent from the best vertex and from random
    interior points runs afterwards; it only replaces the incumbent when it is
    strictly better and feasible to 1e-10.
    """
    space = FunctionAtomSpace.build(j)
    cols = np.flatnonzero(space.admissible)
    A, b, cost = space.A[:, cols], space.b, space.cost[cols]

    def lift(v):
        w = np.zeros(space.size)
        w[cols] = v
        return w

    starts = [lift(linprog_eq(cost, A, b).x)]
    try:
        starts += [lift(v) for v in basic_feasible_solutions(A, b, max_bases=max_bases)]
    except TooManyBases:
        log.debug("vertex enumeration skipped for %d admissible atoms", cols.size)
    vals = [space.objective(w) for w in starts]
    best = int(np.argmin(vals))
    best_w, best_f = starts[best], vals[best]

    rng = cfg.rng(0)
    interior = []
    for _ in range(cfg.restarts):
        z = np.zeros(space.size)
        z[cols] = rng.dirichlet(np.ones(cols.size))
        interior.append(space.project(z))
    hit_limit = False
    for w0 in [best_w] + interior:
        w, f, limited = _descend(space, w0, cfg)
        hit_limit |= limited
        if f < best_f - cfg.tol and space.residual(w) <= 1e-10 and np.min(w) >= 0:
            best_w, best_f = w, f

    mech = space.mechanism(j, best_w)
    return SFRLResult(mech, report(j, mech).cond_leakage, best_w, hit_limit, len(starts))


def esfrl(j: JointDistribution, eps: float, cfg: SearchConfig = SearchConfig()) -> Mechanism:
    """Leakage exactly ``eps`` on top of the searched strong representation."""
    check_epsilon(j, eps)
    return mix_with_x(j, sfrl_search(j, cfg).mechanism, mixing_weight(j, eps))


# --------------------------------------------------------------------------
# Utility-improving transformations
# --------------------------------------------------------------------------

def improve(j: JointDistribution, m: Mechanism, threshold: float = 1e-6) -> Mechanism:
    """Append a representation of Y independent of (X, U) when H(Y|X,U) > 0.

    The leakage is unchanged and the utility strictly grows; a mechanism with
    residual at most ``threshold`` is returned as is.
    """
    if report(j, m).residual <= threshold:
        return m
    q = extend(j, m).q                       # (x, y, u)
    nx, ny, nu = q.shape
    compound = np.transpose(q, (0, 2, 1)).reshape(nx * nu, ny)
    xs, lengths, labels = interval_refinement(compound)
    k_new = atoms_to_kernel(compound, xs, lengths, labels)  # ((x,u), y, u')
    k_new = k_new.reshape(nx, nu, ny, -1).transpose(0, 2, 1, 3)
    k = m.k[:, :, :, None] * k_new
    return Mechanism(k.reshape(nx, ny, -1), Scenario.OBSERVED)


def _xy_given_u_information(j: JointDistribution, m: Mechanism) -> float:
    t = extend(j, m)
    h = t.entropy_of
    return max(h("xu") + h("yu") - h("xyu") - h("u"), 0.0)


def as_hidden(j: JointDistribution, m: Mechanism) -> Mechanism:
    """View ``m`` as a channel P(U|Y) when it ignores x wherever P(x, y) > 0.

    Rows of zero-probability pairs are irrelevant, so an observed mechanism
    of that kind is replaced by the equivalent hidden one.
    """
    if m.scenario is Scenario.HIDDEN:
        return m
    channel = np.zeros((m.ny, m.nu))
    channel[:, 0] = 1.0
    for y in range(m.ny):
        xs = np.flatnonzero(j.p[:, y] > 0)
        if xs.size == 0:
            continue
        rows = m.k[xs, y]
        if np.max(np.abs(rows - rows[0])) > 1e-9:
            raise DomainError("mechanism depends on x, not a hidden-scenario mechanism")
        channel[y] = rows[0]
    return Mechanism.from_channel(channel, m.nx)


def saturate_leakage(j: JointDistribution, m: Mechanism, eps: float) -> Mechanism:
    """Raise the leakage of a hidden mechanism to ``eps`` by revealing Y at random.

    Output symbol ``u * (ny + 1) + w`` with ``w = y`` (reveal) or ``w = ny``
    (constant). Requires H(Y|X,U) = 0 and I(X;Y|U) > 0; the result then has
    utility ``eps + H(Y|X)``.
    """
    m = as_hidden(j, m)
    rep = report(j, m)
    if rep.residual > 1e-9:
        raise DomainError(f"H(Y|X,U)={rep.residual:.3e} must vanish")
    gap = _xy_given_u_information(j, m)
    if gap <= 1e-9:
        raise DomainError("I(X;Y|U) vanishes; leakage cannot be raised by revealing Y")
    info = mutual_information(j)
    if eps >= info:
        raise DomainError(f"epsilon={eps!r} must be below I(X;Y)={info:.6f}")
    if eps < rep.leakage - 1e-12:
        raise DomainError(f"epsilon={eps!r} is below the current leakage {rep.leakage:.6f}")
    alpha = min(max(eps - rep.leakage, 0.0) / gap, 1.0)
    ny, nu = m.ny, m.nu
    ch = np.zeros((ny, nu, ny + 1))
    for y in range(ny):
        ch[y, :, y] = alpha * m.channel[y]
    ch[:, :, ny] = (1.0 - alpha) * m.channel
    return Mechanism.from_channel(ch.reshape(ny, nu * (ny + 1)), j.nx)


def time_share(j: JointDistribution, m: Mechanism, eps: float) -> Mechanism:
    """Disclose Y itself with probability beta and run ``m`` otherwise.

    beta is chosen so the leakage equals ``eps``. Output symbols: the
    ``m.nu`` symbols of ``m`` followed by the ``ny`` revealed values of Y.
    """
    m = as_hidden(j, m)
    info = mutual_information(j)
    base = report(j, m).leakage
    if not base - 1e-12 <= eps <= info:
        raise DomainError(f"epsilon={eps!r} outside [{base:.6f}, I(X;Y)={info:.6f}]")
    beta = 0.0 if info - base <= 1e-15 else min(max((eps - base) / (info - base), 0.0), 1.0)
    ch = np.hstack([(1.0 - beta) * m.channel, beta * np.eye(m.ny)])
    return Mechanism.from_channel(ch, j.nx)

