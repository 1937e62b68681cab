"""Finite joint distributions, mechanisms, and Shannon measures in bits.

A joint law of the private data X and the useful data Y is an ``nx x ny``
matrix. A disclosure mechanism is a kernel ``P(U | X, Y)`` stored as an
``(nx, ny, nu)`` array; when the mechanism only observes Y (the *hidden*
scenario) the rows for different x coincide, which enforces X - Y - U.

Conventions: logarithms are base 2, ``0 log 0 = 0``, and conditioning on a
zero-probability atom contributes nothing.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from typing import Callable, Optional, Sequence

import numpy as np

SUM_TOL = 1e-9
LOAD_TOL = 1e-6
MI_SANITY = -1e-12


class DistributionError(ValueError):
    """Raised for malformed distribution or mechanism input."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DomainError(ValueError):
    """Raised when a leakage budget or parameter lies outside its validity region."""


class Scenario(str, enum.Enum):
    HIDDEN = "hidden"
    OBSERVED = "observed"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclasses.dataclass(frozen=True, eq=False)
class JointDistribution:
    """Joint law P_XY as an ``nx x ny`` matrix (rows x, columns y)."""

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 2 or p.shape[0] < 1 or p.shape[1] < 1:
            raise DistributionError(f"joint must be a non-empty matrix, got shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise DistributionError("joint has non-finite entries")
        if np.any(p < 0):
            raise DistributionError("negative entry")
        total = p.sum()
        if abs(total - 1.0) > SUM_TOL:
            raise DistributionError(f"entries sum to {total!r}, expected 1")
        object.__setattr__(self, "p", _frozen(p))

    @classmethod
    def from_matrix(cls, p, renormalize: bool = True) -> "JointDistribution":
        p = np.asarray(p, dtype=float)
        if renormalize and np.all(p >= 0) and p.sum() > 0:
            p = p / p.sum()
        return cls(p)

    @property
    def nx(self) -> int:
        return self.p.shape[0]

    @property
    def ny(self) -> int:
        return self.p.shape[1]

    @property
    def px(self) -> np.ndarray:
        return self.p.sum(axis=1)

    @property
    def py(self) -> np.ndarray:
        return self.p.sum(axis=0)

    @property
    def p_y_given_x(self) -> np.ndarray:
        """Rows P(.|x); rows of zero-probability x are left as zeros."""
        return _safe_divide(self.p, self.px[:, None])

    @property
    def p_x_given_y(self) -> np.ndarray:
        """Columns P(.|y); columns of zero-probability y are left as zeros."""
        return _safe_divide(self.p, self.py[None, :])

    def transpose(self) -> "JointDistribution":
        return JointDistribution(self.p.T)

    def __repr__(self) -> str:
        return f"JointDistribution(nx={self.nx}, ny={self.ny})"


@dataclasses.dataclass(frozen=True, eq=False)
class Mechanism:
    """Kernel P(U | X, Y) stored as ``k[x, y, u]``.

    ``scenario='hidden'`` requires ``k[x1, y] == k[x2, y]`` for all x1, x2.
    """

    k: np.ndarray
    scenario: Scenario = Scenario.OBSERVED

    def __post_init__(self):
        k = np.asarray(self.k, dtype=float)
        if k.ndim != 3 or min(k.shape) < 1:
            raise DistributionError(f"mechanism must be an (nx, ny, nu) array, got shape {k.shape}")
        if np.any(k < -1e-15) or not np.all(np.isfinite(k)):
            raise DistributionError("mechanism has negative or non-finite entries")
        k = np.clip(k, 0.0, None)
        rows = k.sum(axis=2)
        if np.max(np.abs(rows - 1.0)) > SUM_TOL:
            raise DistributionError("mechanism rows must sum to 1")
        scenario = Scenario(self.scenario)
        if scenario is Scenario.HIDDEN and np.max(np.abs(k - k[:1])) > SUM_TOL:
            raise DistributionError("hidden-scenario mechanism depends on x")
        object.__setattr__(self, "k", _frozen(k))
        object.__setattr__(self, "scenario", scenario)

    @classmethod
    def from_channel(cls, channel, nx: int) -> "Mechanism":
        """Lift a hidden-scenario channel ``P(U|Y)`` of shape (ny, nu)."""
        channel = np.asarray(channel, dtype=float)
        k = np.broadcast_to(channel, (nx,) + channel.shape)
        return cls(k, Scenario.HIDDEN)

    @classmethod
    def constant(cls, nx: int, ny: int, nu: int = 1) -> "Mechanism":
        k = np.zeros((nx, ny, nu))
        k[:, :, 0] = 1.0
        return cls(k, Scenario.HIDDEN)

    @property
    def nx(self) -> int:
        return self.k.shape[0]

    @property
    def ny(self) -> int:
        return self.k.shape[1]

    @property
    def nu(self) -> int:
        return self.k.shape[2]

    @property
    def channel(self) -> np.ndarray:
        """P(U|Y) for hidden mechanisms."""
        if self.scenario is not Scenario.HIDDEN:
            raise ValueError("only hidden-scenario mechanisms have a P(U|Y) channel")
        return self.k[0]

    def __repr__(self) -> str:
        return f"Mechanism(nx={self.nx}, ny={self.ny}, nu={self.nu}, scenario={self.scenario.value})"


@dataclasses.dataclass(frozen=True, eq=False)
class TripleDistribution:
    """Joint law of (X, Y, U) as ``q[x, y, u]``."""

    q: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if q.ndim != 3 or np.any(q < 0) or abs(q.sum() - 1.0) > SUM_TOL:
            raise DistributionError("triple must be a non-negative (nx, ny, nu) array summing to 1")
        object.__setattr__(self, "q", _frozen(q))

    @property
    def shape(self):
        return self.q.shape

    def marginal(self, axes: str) -> np.ndarray:
        """Marginal over the named subset of ``'xyu'``, axes kept in xyu order."""
        drop = tuple(i for i, name in enumerate("xyu") if name not in axes)
        return self.q.sum(axis=drop)

    def entropy_of(self, axes: str) -> float:
        if not axes:
            return 0.0
        return entropy(self.marginal(axes).ravel())


@dataclasses.dataclass(frozen=True)
class MechanismReport:
    utility: float
    leakage: float
    cond_leakage: float
    residual: float
    entropy_u: float
    cardinality: int

    def identity_gap(self, h_y_given_x: float) -> float:
        """Signed violation of I(Y;U) = I(X;U) + H(Y|X) - H(Y|X,U) - I(X;U|Y)."""
        return self.utility - self.leakage - h_y_given_x + self.residual + self.cond_leakage

    def as_rows(self):
        return [
            ("utility", self.utility),
            ("leakage", self.leakage),
            ("cond_leakage", self.cond_leakage),
            ("residual", self.residual),
            ("entropy_u", self.entropy_u),
            ("cardinality", self.cardinality),
        ]


def _safe_divide(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    den = np.broadcast_to(den, num.shape)
    out = np.zeros(num.shape)
    np.divide(num, den, out=out, where=den > 0)
    return out


def _xlog2x(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    out = np.zeros(p.shape)
    pos = p > 0
    out[pos] = p[pos] * np.log2(p[pos])
    return out


def _clamp_mi(value: float) -> float:
    if value < MI_SANITY:
        raise ArithmeticError(f"mutual information {value!r} is significantly negative")
    return max(value, 0.0)


# --------------------------------------------------------------------------
# Shannon measures
# --------------------------------------------------------------------------

def entropy(dist) -> float:
    """Entropy of a probability vector (any shape, flattened), in bits."""
    p = np.asarray(dist, dtype=float).ravel()
    if p.size == 0 or np.any(p < -1e-15) or abs(p.sum() - 1.0) > 1e-6:
        raise ValueError("entropy() expects a probability vector")
    return max(float(-_xlog2x(p).sum()), 0.0)


def binary_entropy(a: float) -> float:
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"binary entropy argument {a!r} outside [0, 1]")
    return entropy([a, 1.0 - a])


def conditional_entropy(j: JointDistribution, direction: str = "y|x") -> float:
    """H(Y|X) for ``direction='y|x'``, H(X|Y) for ``'x|y'``."""
    if direction in ("y|x", "Y|X", "y-given-x"):
        return float(j.px @ row_entropies(j))
    if direction in ("x|y", "X|Y", "x-given-y"):
        return float(j.py @ row_entropies(j.transpose()))
    raise ValueError(f"unknown direction {direction!r}")


def row_entropies(j: JointDistribution) -> np.ndarray:
    """H(Y|X=x) for every x (0 for zero-probability x)."""
    return -_xlog2x(j.p_y_given_x).sum(axis=1)


def mutual_information(j: JointDistribution) -> float:
    return _clamp_mi(entropy(j.py) - conditional_entropy(j, "y|x"))


def check_epsilon(j: JointDistribution, eps: float) -> float:
    """Validate 0 <= eps < I(X;Y) and return I(X;Y)."""
    info = mutual_information(j)
    if eps < 0:
        raise DomainError(f"epsilon={eps!r} must be non-negative")
    if eps >= info:
        raise DomainError(f"epsilon={eps!r} must be below I(X;Y)={info:.6f}")
    return info


def mixing_weight(j: JointDistribution, eps: float) -> float:
    """alpha = eps / H(X), the probability of revealing X in the leakage mixture."""
    if eps == 0:
        return 0.0
    hx = entropy(j.px)
    if hx <= 1e-12:
        raise DomainError("positive epsilon requires H(X) > 0")
    alpha = eps / hx
    if alpha > 1.0:
        raise DomainError(f"epsilon={eps!r} exceeds H(X)={hx:.6f}")
    return alpha


def extend(j: JointDistribution, m: Mechanism) -> TripleDistribution:
    if (m.nx, m.ny) != (j.nx, j.ny):
        raise DistributionError(
            f"mechanism is for {m.nx}x{m.ny} alphabets, joint is {j.nx}x{j.ny}")
    return TripleDistribution(j.p[:, :, None] * m.k)


def conditional_mutual_information(t: TripleDistribution) -> float:
    """I(X;U|Y) as the P(Y)-weighted sum of per-slice mutual informations."""
    total = 0.0
    for y in range(t.shape[1]):
        slab = t.q[:, y, :]
        mass = slab.sum()
        if mass <= 0:
            continue
        slab = slab / mass
        total += mass * (entropy(slab.sum(axis=1)) + entropy(slab.sum(axis=0)) - entropy(slab))
    return _clamp_mi(total)


def report(j: JointDistribution, m: Mechanism) -> MechanismReport:
    t = extend(j, m)
    h = t.entropy_of
    h_x, h_y, h_u = h("x"), h("y"), h("u")
    h_xu, h_yu, h_xyu = h("xu"), h("yu"), h("xyu")
    qu = t.marginal("u")
    return MechanismReport(
        utility=_clamp_mi(h_y + h_u - h_yu),
        leakage=_clamp_mi(h_x + h_u - h_xu),
        cond_leakage=conditional_mutual_information(t),
        residual=max(h_xyu - h_xu, 0.0),
        entropy_u=h_u,
        cardinality=int(np.count_nonzero(qu > 1e-15)),
    )


def compress(j: JointDistribution, m: Mechanism, tol: float = 1e-12) -> Mechanism:
    """Drop unused symbols and merge symbols with identical posteriors P(x, y | u).

    U is replaced by a sufficient statistic of itself for (X, Y), so every
    report field except ``entropy_u`` and ``cardinality`` is unchanged.
    """
    q = j.p[:, :, None] * m.k
    qu = q.sum(axis=(0, 1))
    used = np.flatnonzero(qu > 1e-15)
    if used.size == 0:
        return Mechanism.constant(j.nx, j.ny)
    post = (q[:, :, used] / qu[used]).reshape(-1, used.size).T
    groups: list[list[int]] = []
    reps: list[np.ndarray] = []
    for i, row in enumerate(post):
        for g, rep in enumerate(reps):
            if np.max(np.abs(rep - row)) <= tol:
                groups[g].append(i)
                break
        else:
            groups.append([i])
            reps.append(row)
    k = np.stack([m.k[:, :, used[g]].sum(axis=2) for g in groups], axis=2)
    # rows of zero-probability (x, y) may have lost mass; their value is immaterial
    bad = np.abs(k.sum(axis=2) - 1.0) > 1e-12
    k[bad] = 0.0
    k[bad, 0] = 1.0
    k = k / k.sum(axis=2, keepdims=True)
    if m.scenario is Scenario.HIDDEN:
        k = np.broadcast_to(k[:1], k.shape)
    return Mechanism(k, m.scenario)


# --------------------------------------------------------------------------
# Families
# --------------------------------------------------------------------------

def _check_theta(theta: float) -> None:
    if not 0.0 <= theta < 0.5:
        raise ValueError(f"theta={theta!r} must satisfy 0 <= theta < 1/2")


def family_bsc(theta: float) -> JointDistribution:
    """Uniform binary X through a binary symmetric channel."""
    _check_theta(theta)
    a, b = (1 - theta) / 2, theta / 2
    return JointDistribution(np.array([[a, b], [b, a]]))


def family_erasure(theta: float) -> JointDistribution:
    """Uniform binary X through an erasure channel; Y ordered (0, e, 1)."""
    _check_theta(theta)
    a, e = (1 - theta) / 2, theta / 2
    return JointDistribution(np.array([[a, e, 0.0], [0.0, e, a]]))


def family_function(ny: int, f: Callable[[int], int] | Sequence[int]) -> JointDistribution:
    """Uniform Y on ``ny`` symbols and X = f(Y)."""
    if ny < 1:
        raise ValueError("ny must be positive")
    labels = [int(f(y)) if callable(f) else int(f[y]) for y in range(ny)]
    if min(labels) < 0:
        raise ValueError("f must map into non-negative integers")
    p = np.zeros((max(labels) + 1, ny))
    for y, x in enumerate(labels):
        p[x, y] = 1.0 / ny
    return JointDistribution(p)


def random_joint(rng: np.random.Generator, nx: int, ny: int) -> JointDistribution:
    """Dirichlet(1) joint with every entry strictly positive."""
    p = rng.dirichlet(np.ones(nx * ny)).reshape(nx, ny)
    p = np.maximum(p, 1e-6)
    return JointDistribution(p / p.sum())


def random_function_joint(rng: np.random.Generator, nx: int, ny: int) -> JointDistribution:
    """Random P_Y with X a random surjective function of Y (requires ny >= nx)."""
    labels = np.concatenate([np.arange(nx), rng.integers(0, nx, ny - nx)])
    rng.shuffle(labels)
    py = rng.dirichlet(np.ones(ny))
    py = np.maximum(py, 1e-4)
    py /= py.sum()
    p = np.zeros((nx, ny))
    p[labels, np.arange(ny)] = py
    return JointDistribution(p)


# --------------------------------------------------------------------------
# File formats
# --------------------------------------------------------------------------

def _content_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield lineno, line


def _parse_numbers(line: str, lineno: int, count: int) -> list[float]:
    parts = line.split()
    if len(parts) != count:
        raise DistributionError(f"dimension mismatch: expected {count} values, got {len(parts)}", lineno)
    try:
        values = [float(v) for v in parts]
    except ValueError as exc:
        raise DistributionError(f"not a number: {exc}", lineno) from None
    for v in values:
        if not math.isfinite(v):
            raise DistributionError("non-finite entry", lineno)
        if v < 0:
            raise DistributionError("negative entry", lineno)
    return values


def _parse_header(lines, keyword: str, arity: int):
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise DistributionError("malformed header: file is empty", 1) from None
    parts = header.split()
    if len(parts) != arity + 1 or parts[0] != keyword:
        raise DistributionError(f"malformed header: expected '{keyword}' followed by {arity} sizes", lineno)
    try:
        dims = [int(v) for v in parts[1:]]
    except ValueError:
        raise DistributionError("malformed header: sizes must be integers", lineno) from None
    if min(dims) < 1:
        raise DistributionError("malformed header: sizes must be positive", lineno)
    return lineno, dims


def _parse_rows(lines, header_line: int, nrows: int, ncols: int) -> np.ndarray:
    rows = []
    last = header_line
    for lineno, line in lines:
        if len(rows) == nrows:
            raise DistributionError(f"dimension mismatch: more than {nrows} data rows", lineno)
        rows.append(_parse_numbers(line, lineno, ncols))
        last = lineno
    if len(rows) != nrows:
        raise DistributionError(f"dimension mismatch: expected {nrows} data rows, got {len(rows)}", last)
    return np.array(rows)


def load_distribution(text: str) -> JointDistribution:
    """Parse a ``pxy`` file; sums within 1e-6 of 1 are renormalized."""
    lines = _content_lines(text)
    header_line, (nx, ny) = _parse_header(lines, "pxy", 2)
    p = _parse_rows(lines, header_line, nx, ny)
    total = p.sum()
    if abs(total - 1.0) > LOAD_TOL:
        raise DistributionError(f"entries sum to {total!r}, not 1 within {LOAD_TOL}", header_line)
    return JointDistribution(p / total)


def parse_mechanism_array(text: str) -> np.ndarray:
    """Parse a ``puxy`` file into a raw ``k[x, y, u]`` array without validation of row sums."""
    lines = _content_lines(text)
    header_line, (nu, nx, ny) = _parse_header(lines, "puxy", 3)
    rows = _parse_rows(lines, header_line, nx * ny, nu)
    return rows.reshape(nx, ny, nu)


def load_mechanism(text: str, scenario: Scenario | str = Scenario.OBSERVED) -> Mechanism:
    k = parse_mechanism_array(text)
    sums = k.sum(axis=2)
    bad = np.argwhere(np.abs(sums - 1.0) > LOAD_TOL)
    if bad.size:
        x, y = bad[0]
        raise DistributionError(f"row for (x={x}, y={y}) sums to {sums[x, y]!r}, not 1")
    return Mechanism(k / sums[:, :, None], scenario)


def _fmt(v: float) -> str:
    return repr(float(v))


def dump_distribution(j: JointDistribution) -> str:
    out = [f"pxy {j.nx} {j.ny}"]
    out += [" ".join(_fmt(v) for v in row) for row in j.p]
    return "\n".join(out) + "\n"


def dump_mechanism(m: Mechanism) -> str:
    out = [f"# scenario {m.scenario.value}", f"puxy {m.nu} {m.nx} {m.ny}"]
    for x in range(m.nx):
        for y in range(m.ny):
            out.append(" ".join(_fmt(v) for v in m.k[x, y]))
    return "\n".join(out) + "\n"
