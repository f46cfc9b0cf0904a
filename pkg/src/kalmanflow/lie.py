"""Affine vector fields, their closed-form Lie brackets and the Lie span
of a family at a point.

An affine field on R^n is ``X(q) = L q + v``.  For such fields the
coordinate bracket ``[X, Y]^i = X(Y^i) - Y(X^i)`` is again affine:

    [X, Y] = (Y.L X.L - X.L Y.L) q + (Y.L X.v - X.L Y.v)
"""
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InternalError
from .kalman import analyze
from .numerics import DEFAULT_RANK_TOL, numerical_rank


@dataclass(frozen=True, eq=False)
class AffineField:
    L: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        L = np.array(self.L, dtype=np.float64)
        v = np.array(self.v, dtype=np.float64).reshape(-1)
        if L.shape != (v.size, v.size):
            raise DimensionError(f"linear part {L.shape} does not match constant part {v.shape}")
        if not (np.all(np.isfinite(L)) and np.all(np.isfinite(v))):
            raise ValueError("affine field entries must be finite")
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "v", v)

    @property
    def n(self):
        return self.v.size

    def __call__(self, q):
        return self.L @ np.asarray(q, dtype=np.float64) + self.v

    def __neg__(self):
        return AffineField(-self.L, -self.v)

    def __add__(self, other):
        return AffineField(self.L + other.L, self.v + other.v)

    def __sub__(self, other):
        return AffineField(self.L - other.L, self.v - other.v)

    def __rmul__(self, c):
        return AffineField(c * self.L, c * self.v)

    def flat(self):
        """Coordinates of the field in R^(n*n + n)."""
        return np.concatenate([self.L.ravel(), self.v])

    def jacobian(self, q=None):
        return self.L


def bracket(X, Y):
    """Lie bracket ``[X, Y]`` of two affine fields."""
    if X.n != Y.n:
        raise DimensionError(f"fields live in R^{X.n} and R^{Y.n}")
    return AffineField(Y.L @ X.L - X.L @ Y.L, Y.L @ X.v - X.L @ Y.v)


def linear_family(sys):
    """The family ``X_0 = -A q`` and ``X_a = B_a`` (constant), in that order."""
    n = sys.n
    fields = [AffineField(-sys.A, np.zeros(n))]
    fields.extend(AffineField(np.zeros((n, n)), sys.B[:, a]) for a in range(sys.m))
    return fields


def lie_closure(fields, tol=DEFAULT_RANK_TOL):
    """Fields spanning the Lie algebra generated by ``fields``.

    Saturation: bracket the generators with the fields found in the
    previous round and keep those that enlarge the span in field space.
    For affine fields the span lives in R^(n(n+1)), so at most n(n+1)
    productive rounds exist.
    """
    fields = list(fields)
    if not fields:
        raise ValueError("need at least one field")
    n = fields[0].n
    kept = []
    stack = np.zeros((0, n * n + n))
    rank = 0

    def admit(f):
        nonlocal stack, rank
        flat = f.flat()
        norm = np.linalg.norm(flat)
        if norm == 0.0:
            return False
        # Unit rows: admission judges direction, not magnitude.
        trial = np.vstack([stack, flat / norm])
        r = numerical_rank(trial.T, tol).rank
        if r > rank:
            stack, rank = trial, r
            kept.append(f)
            return True
        return False

    frontier = [f for f in fields if admit(f)]
    cap = n * (n + 1)
    for _ in range(cap + 1):
        if not frontier:
            return kept
        new = []
        for g in fields:
            for f in frontier:
                h = bracket(g, f)
                if admit(h):
                    new.append(h)
        frontier = new
    raise InternalError(f"Lie saturation did not stabilise within {cap} rounds")


def lie_span_at(fields, q0, tol=DEFAULT_RANK_TOL):
    """Dimension and basis of the span of all iterated brackets at ``q0``."""
    q0 = np.asarray(q0, dtype=np.float64)
    algebra = lie_closure(fields, tol)
    values = np.column_stack([f(q0) for f in algebra])
    return numerical_rank(values, tol)


def kalman_lie_check(sys, tol=DEFAULT_RANK_TOL):
    """True iff the Lie span of the linear family at 0 matches the Kalman rank."""
    span = lie_span_at(linear_family(sys), np.zeros(sys.n), tol)
    return span.rank == analyze(sys, tol).rank


def iterated_bracket(sys, a, depth):
    """``[X_0, [X_0, ... [X_0, X_a]]]`` with ``depth`` copies of X_0."""
    family = linear_family(sys)
    field = family[1 + a]
    for _ in range(depth):
        field = bracket(family[0], field)
    return field

