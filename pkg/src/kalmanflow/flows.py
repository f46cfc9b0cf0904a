"""Vector fields and flows on the extended space-time (t, q, u).

The drift field ``T = d/dt - (A q + B u) . d/dq`` has the exact flow

    (t, q, u) -> (t + s, e^{-sA} q - phi(s, A) B u, u),
    phi(s, A) = integral_0^s e^{-rA} dr,

and pushing the control direction ``W_a = d/du^a`` forward by it gives the
constant field ``W_a^[s] = e_a . d/du - phi(s, A) B_a . d/dq``.  The same
field is the series ``sum_l (-1)^l s^l / l! W_a^(l)`` over the iterated
brackets ``W_a^(l) = [T, W_a^(l-1)]``, whose q-part is ``A^(l-1) B_a``.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NoConvergence
from .model import ExtendedState
from .numerics import MAX_EXP_NORM, exp_integral, mat_exp

SERIES_REL_TOL = 1e-16
SERIES_MAX_TERMS = 200


@dataclass(frozen=True, eq=False)
class ExtendedField:
    """Affine field on (t, q, u) with constant t- and u-components.

    The q-component at ``(t, q, u)`` is ``Lq @ q + Lu @ u + v``.
    """

    dt: float
    Lq: np.ndarray
    Lu: np.ndarray
    v: np.ndarray
    du: np.ndarray

    @property
    def n(self):
        return self.v.size

    @property
    def m(self):
        return self.du.size

    @property
    def is_constant(self):
        return not (np.any(self.Lq) or np.any(self.Lu))

    def at(self, x):
        """Components ``(dt, dq, du)`` at the extended state ``x``."""
        return self.dt, self.Lq @ x.q + self.Lu @ x.u + self.v, self.du

    def vector(self):
        """``du ⊕ dq`` in R^(m+n); only defined for constant fields."""
        if not self.is_constant:
            raise ValueError("field is not constant")
        return np.concatenate([self.du, self.v])

    def scaled(self, c):
        return ExtendedField(c * self.dt, c * self.Lq, c * self.Lu, c * self.v, c * self.du)


def constant_field(n, m, dq=None, du=None):
    return ExtendedField(
        0.0,
        np.zeros((n, n)),
        np.zeros((n, m)),
        np.zeros(n) if dq is None else np.asarray(dq, dtype=np.float64),
        np.zeros(m) if du is None else np.asarray(du, dtype=np.float64),
    )


def drift_field(sys):
    """The time-augmented drift of ``q' = -A q - B u``."""
    return ExtendedField(1.0, -sys.A, -sys.B, np.zeros(sys.n), np.zeros(sys.m))


def control_field(sys, a):
    du = np.zeros(sys.m)
    du[a] = 1.0
    return constant_field(sys.n, sys.m, du=du)


def bracket(X, Y):
    """Coordinate Lie bracket ``X(Y) - Y(X)`` of two extended fields.

    Only the q-components depend on the point, so only they survive.
    """
    if (X.n, X.m) != (Y.n, Y.m):
        raise DimensionError("fields live on different extended spaces")
    Lq = Y.Lq @ X.Lq - X.Lq @ Y.Lq
    Lu = Y.Lq @ X.Lu - X.Lq @ Y.Lu
    v = Y.Lq @ X.v + Y.Lu @ X.du - X.Lq @ Y.v - X.Lu @ Y.du
    return ExtendedField(0.0, Lq, Lu, v, np.zeros(X.m))


def recursive_fields(sys, ell):
    """``[W_1^(ell), ..., W_m^(ell)]`` in closed form."""
    if ell < 0:
        raise ValueError("ell must be non-negative")
    if ell == 0:
        return [control_field(sys, a) for a in range(sys.m)]
    dq = np.linalg.matrix_power(sys.A, ell - 1) @ sys.B
    return [constant_field(sys.n, sys.m, dq=dq[:, a]) for a in range(sys.m)]


def w_vector(sys, b, ell):
    """``du ⊕ dq`` coordinates of ``W_b^(ell)``."""
    vec = np.zeros(sys.m + sys.n)
    if ell == 0:
        vec[b] = 1.0
    else:
        vec[sys.m:] = np.linalg.matrix_power(sys.A, ell - 1) @ sys.B[:, b]
    return vec


def flow_T(x, s, sys):
    """Exact time-``s`` flow of the drift field."""
    q = mat_exp(-sys.A, s) @ x.q - exp_integral(sys.A, s) @ (sys.B @ x.u)
    return ExtendedState(x.t + s, q, x.u)


def flow_constant(F, x, s):
    """Straight-line flow ``x + s F`` of a constant field."""
    if not F.is_constant:
        raise ValueError("straight-line flow needs a constant field")
    return ExtendedState(x.t + s * F.dt, x.q + s * F.v, x.u + s * F.du)


def pushforward_W_exact(a, s, sys):
    """``W_a^[s]``, the push-forward of ``d/du^a`` by the drift flow at time ``s``."""
    du = np.zeros(sys.m)
    du[a] = 1.0
    return constant_field(sys.n, sys.m, dq=-exp_integral(sys.A, s) @ sys.B[:, a], du=du)


@dataclass
class PushforwardExpansion:
    """Coefficients of ``W_a^[s]`` over ``{W_b^(l)}``, ``0 <= l <= ell_max``.

    ``coefficients[(b, l)]`` is ``delta_ab (-1)^l s^l / l!`` plus the
    contribution of the re-expanded tail (nonzero only on basis fields).
    """

    a: int
    s: float
    ell_max: int
    coefficients: dict = field(default_factory=dict)
    truncation_terms: int = 0
    remainder_bound: float = 0.0

    def vector(self, sys):
        vec = np.zeros(sys.m + sys.n)
        for (b, ell), c in self.coefficients.items():
            if c:
                vec += c * w_vector(sys, b, ell)
        return vec

    def field(self, sys):
        vec = self.vector(sys)
        return constant_field(sys.n, sys.m, dq=vec[sys.m:], du=vec[:sys.m])


def basis_matrix(sys, basis):
    return np.column_stack([w_vector(sys, b, ell) for b, ell in basis])


def pushforward_W_series(a, s, sys, ell_max, basis, rel_tol=SERIES_REL_TOL,
                         max_terms=SERIES_MAX_TERMS):
    """Expand ``W_a^[s]`` over ``{W_b^(l)}_{l <= ell_max}`` by its power series.

    Terms up to order ``ell_max`` stay on their own ``W_a^(l)``; every
    higher term ``W_a^(r)`` is rewritten through its unique expansion over
    ``basis`` (a tuple of ``(b, l)`` pairs spanning all the ``W^(l)``).
    Summation stops once a tail term falls below ``rel_tol`` times the
    largest coefficient seen and the terms are already decreasing.

    Raises
    ------
    NoConvergence
        If ``max_terms`` tail terms do not reach the threshold.
    OverflowError
        If ``|s| * ||A||_1`` exceeds the range of :func:`mat_exp`.
    """
    s = float(s)
    if abs(s) * np.abs(sys.A).sum(axis=0).max() > MAX_EXP_NORM:
        raise OverflowError(f"|s| ||A|| exceeds the supported range {MAX_EXP_NORM:g}")
    coeffs = {(b, ell): 0.0 for b in range(sys.m) for ell in range(ell_max + 1)}
    for ell in range(ell_max + 1):
        coeffs[(a, ell)] = (-s) ** ell / math.factorial(ell)
    running_max = max(abs(c) for c in coeffs.values())

    E = basis_matrix(sys, basis)
    E_pinv = np.linalg.pinv(E)
    norm_A = np.linalg.norm(sys.A, 2)
    vec = np.zeros(sys.m + sys.n)

    r = ell_max + 1
    dq = np.linalg.matrix_power(sys.A, r - 1) @ sys.B[:, a]
    factor = (-s) ** r / math.factorial(r)
    terms = 0
    remainder = 0.0
    while True:
        if not np.any(dq) or factor == 0.0:
            break  # every later term vanishes as well
        if terms >= max_terms:
            raise NoConvergence(
                f"pushforward series for a={a}, s={s:g} needs more than {max_terms} terms"
            )
        vec[sys.m:] = dq
        lam = E_pinv @ vec
        contribution = factor * lam
        for (b, ell), c in zip(basis, contribution):
            coeffs[(b, ell)] += c
        terms += 1
        size = float(np.max(np.abs(contribution)))
        if not np.isfinite(size):
            raise OverflowError("pushforward series overflowed")
        running_max = max(running_max, size)
        decreasing = r + 1 > abs(s) * norm_A
        if size < rel_tol * running_max and decreasing:
            # Geometric bound on the omitted terms r+1, r+2, ...
            ratio = abs(s) * norm_A / (r + 2)
            head = (abs(s) ** (r + 1) * norm_A ** r / math.factorial(r + 1)
                    * np.linalg.norm(E_pinv, 2) * np.linalg.norm(sys.B[:, a]))
            remainder = head / (1.0 - ratio)
            break
        r += 1
        dq = sys.A @ dq
        factor *= -s / r
    return PushforwardExpansion(a, s, ell_max, coeffs, terms, remainder)
