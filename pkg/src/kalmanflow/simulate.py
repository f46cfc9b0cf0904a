"""Exact simulation of piecewise-constant controls, stepped graphs in
(t, q, u), reachable-set sampling and the linearity probes built on them.

Dynamics are ``q' = sign * (A q + B u)``.  ``sign = -1`` is the drift of
the extended space-time; ``sign = +1`` is the forward system.  Reversing a
control in time maps endpoints of one onto initial points of the other.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .errors import ControlOutOfSet, ValidationError
from .model import ExtendedState, PiecewiseConstantControl
from .numerics import DEFAULT_RANK_TOL, exp_integral, mat_exp, numerical_rank

TRAJECTORY_POINTS = 64


def integrate_segment(q0, c, sigma, sys, sign=+1):
    """Exact endpoint of ``q' = sign (A q + B c)`` after time ``sigma``."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if not sigma >= 0:
        raise ValueError("segment duration must be non-negative")
    q0 = np.asarray(q0, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    return (mat_exp(sign * sys.A, sigma) @ q0
            + sign * exp_integral(-sign * sys.A, sigma) @ (sys.B @ c))


def simulate_endpoint(sys, q0, ctrl, sign=+1):
    """Chain :func:`integrate_segment` over the segments of ``ctrl``."""
    q = np.asarray(q0, dtype=np.float64)
    for sigma, c in zip(ctrl.durations, ctrl.values):
        q = integrate_segment(q, c, sigma, sys, sign)
    return q


# --- stepped graphs -------------------------------------------------------------

@dataclass(frozen=True)
class OddArc:
    """Integral curve of the drift with the control frozen at ``control``."""

    start: ExtendedState
    duration: float
    control: np.ndarray
    end: ExtendedState


@dataclass(frozen=True)
class EvenArc:
    """Straight segment in u at fixed (t, q)."""

    start: ExtendedState
    end: ExtendedState


@dataclass
class SteppedGraph:
    odd_arcs: list
    even_arcs: list
    sign: int = -1
    leading_jump: bool = False

    @property
    def arcs(self):
        """All arcs in traversal order."""
        out = []
        evens = iter(self.even_arcs)
        if self.leading_jump:
            out.append(next(evens))
        for k, arc in enumerate(self.odd_arcs):
            if k:
                out.append(next(evens))
            out.append(arc)
        return out

    @property
    def end(self):
        return self.odd_arcs[-1].end

    def trajectory(self, sys, points=TRAJECTORY_POINTS):
        """Rows ``(t, q, u, kind)`` sampling every arc.

        Odd arcs contribute ``points`` evenly spaced states including both
        ends; even arcs contribute their two endpoints.
        """
        rows = []
        for arc in self.arcs:
            if isinstance(arc, EvenArc):
                rows.append((arc.start, "even"))
                rows.append((arc.end, "even"))
                continue
            for h in np.linspace(0.0, arc.duration, points):
                q = integrate_segment(arc.start.q, arc.control, h, sys, self.sign)
                rows.append((ExtendedState(arc.start.t + h, q, arc.control), "odd"))
        return rows


def build_stepped_graph(ctrl, x0, sys, sign=-1):
    """Completed graph of the stepped control ``ctrl`` started at ``x0``.

    If ``x0.u`` differs from the first control value, a jump to it is
    prepended; otherwise the arcs alternate odd, even, ..., odd.
    """
    if ctrl.m != sys.m or x0.q.size != sys.n:
        raise ValidationError("control or state dimension does not match the system")
    odd, even = [], []
    x = x0
    lead = not np.array_equal(x0.u, ctrl.values[0])
    for k, (sigma, c) in enumerate(zip(ctrl.durations, ctrl.values)):
        if k or lead:
            jumped = ExtendedState(x.t, x.q, c)
            even.append(EvenArc(x, jumped))
            x = jumped
        q = integrate_segment(x.q, c, sigma, sys, sign)
        end = ExtendedState(x.t + sigma, q, c)
        odd.append(OddArc(x, float(sigma), np.array(c), end))
        x = end
    return SteppedGraph(odd, even, sign, lead)


# --- reachable-set sampling -------------------------------------------------------

def trial_rng(seed, trial):
    """Independent generator for one trial, keyed by ``(seed, trial)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, trial])))


def draw_control(rng, K, T, segments):
    """Durations uniform on the simplex scaled to ``T``; values uniform in ``K``."""
    durations = T * rng.dirichlet(np.ones(segments)) if segments > 1 else np.array([float(T)])
    return durations, K.sample(rng, segments)


def random_control(rng, K, T, segments):
    durations, values = draw_control(rng, K, T, segments)
    keep = durations > 0
    return PiecewiseConstantControl(durations[keep], values[keep])


@dataclass
class SampleCloud:
    endpoints: np.ndarray
    T: float
    seed: int
    segment_count: int

    @property
    def N(self):
        return self.endpoints.shape[0]

    def to_csv(self):
        n = self.endpoints.shape[1]
        lines = [",".join(["trial", "T"] + [f"q_{i + 1}" for i in range(n)])]
        T = format(self.T, ".17g")
        for i, q in enumerate(self.endpoints):
            lines.append(",".join([str(i), T] + [format(v, ".17g") for v in q]))
        return "\n".join(lines) + "\n"


def _sample_chunk(sys, T, segments, seed, start, stop, sign, q0):
    count = stop - start
    durations = np.empty((count, segments))
    controls = np.empty((count, segments, sys.m))
    for j in range(count):
        durations[j], controls[j] = draw_control(trial_rng(seed, start + j), sys.control_set, T, segments)
    return kernels.propagate_batch(sign * sys.A, sign * sys.B, q0, durations, controls)


def sample_reachable(sys, T, N, segments, seed, workers=1, sign=-1, q0=None):
    """Endpoints of ``N`` random stepped controls on ``[0, T]``.

    Trial ``i`` draws from its own generator keyed by ``(seed, i)``, so the
    cloud does not depend on ``workers``.
    """
    if N < 1 or segments < 1:
        raise ValueError("N and segments must be at least 1")
    if not T > 0:
        raise ValueError("horizon T must be positive")
    q0 = np.zeros(sys.n) if q0 is None else np.asarray(q0, dtype=np.float64)
    workers = max(1, min(int(workers), N))
    bounds = np.linspace(0, N, workers + 1).astype(int)
    jobs = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    if workers == 1:
        parts = [_sample_chunk(sys, T, segments, seed, a, b, sign, q0) for a, b in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_sample_chunk, sys, T, segments, seed, a, b, sign, q0)
                       for a, b in jobs]
            parts = [f.result() for f in futures]
    return SampleCloud(np.vstack(parts), float(T), int(seed), int(segments))


# --- linearity probes --------------------------------------------------------------

@dataclass
class ConvexityReport:
    midpoint_errors: np.ndarray
    symmetry_errors: np.ndarray

    @property
    def max_midpoint_error(self):
        return float(np.max(self.midpoint_errors, initial=0.0))

    @property
    def max_symmetry_error(self):
        return float(np.max(self.symmetry_errors, initial=0.0))

    def passed(self, tol=1e-10):
        return self.max_midpoint_error <= tol and self.max_symmetry_error <= tol


def common_grid(u1, u2):
    """Both controls resampled on the union of their breakpoints.

    Horizons that differ by rounding are cut to the shorter one.
    """
    end = min(u1.horizon, u2.horizon)
    grid = np.union1d(u1.breakpoints, u2.breakpoints)
    grid = np.append(grid[grid < end], end)
    durations = np.diff(grid)
    keep = durations > 0
    mids = 0.5 * (grid[:-1] + grid[1:])[keep]
    return tuple(
        PiecewiseConstantControl(durations[keep], np.array([u.value_at(t) for t in mids]))
        for u in (u1, u2)
    )


def convexity_probe(sys, T, pairs, sign=-1):
    """Endpoint linearity from the origin over shared-horizon control pairs.

    For each ``(u1, u2)`` the averaged control must land on the average of
    the endpoints, and ``-u1`` on ``-q1``.
    """
    zero = np.zeros(sys.n)
    mid_err, sym_err = [], []
    for u1, u2 in pairs:
        if abs(u1.horizon - T) > 1e-12 * T or abs(u2.horizon - T) > 1e-12 * T:
            raise ValueError("convexity probe needs controls on the shared horizon T")
        r1, r2 = common_grid(u1, u2)
        mid = PiecewiseConstantControl(r1.durations, 0.5 * (r1.values + r2.values))
        if not mid.is_valid(sys.control_set):
            raise ControlOutOfSet("averaged control left the control set")
        q1 = simulate_endpoint(sys, zero, u1, sign)
        q2 = simulate_endpoint(sys, zero, u2, sign)
        qm = simulate_endpoint(sys, zero, mid, sign)
        qn = simulate_endpoint(sys, zero, u1.scaled(-1.0), sign)
        mid_err.append(float(np.max(np.abs(qm - 0.5 * (q1 + q2)))))
        sym_err.append(float(np.max(np.abs(qn + q1))))
    return ConvexityReport(np.array(mid_err), np.array(sym_err))


@dataclass
class SubspaceReport:
    dimension: int
    basis: np.ndarray
    ball_radius: float
    exact_hull: bool = False
    inradius: float = None


def _axis_reach_lp(Y):
    """Largest ``delta`` with every ``+-delta e_j`` in ``conv(Y)``, by linear programming."""
    from scipy.optimize import linprog

    N, d = Y.shape
    best = np.inf
    # Variables: convex weights (N) then delta; maximise delta.
    cost = np.zeros(N + 1)
    cost[-1] = -1.0
    A_eq = np.zeros((d + 1, N + 1))
    A_eq[:d, :N] = Y.T
    A_eq[d, :N] = 1.0
    b_eq = np.zeros(d + 1)
    b_eq[d] = 1.0
    for j in range(d):
        for sgn in (1.0, -1.0):
            A_eq[:d, N] = 0.0
            A_eq[j, N] = -sgn
            res = linprog(cost, A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * (N + 1), method="highs")
            if res.status != 0:
                return 0.0
            best = min(best, res.x[-1])
    return float(best)


def _axis_reach_hull(hull):
    """Same quantity as :func:`_axis_reach_lp`, read off the hull facets."""
    normals, offsets = hull.equations[:, :-1], hull.equations[:, -1]
    if np.any(offsets > 0):
        return 0.0  # origin outside the hull
    best = np.inf
    for u in np.vstack([np.eye(normals.shape[1]), -np.eye(normals.shape[1])]):
        proj = normals @ u
        hit = proj > 0
        best = min(best, float(np.min(-offsets[hit] / proj[hit])))
    return best


def subspace_probe(cloud, tol=DEFAULT_RANK_TOL):
    """Span ``L`` of the endpoints and how far the hull reaches along ``L``.

    ``ball_radius`` is the largest ``delta`` such that ``+-delta`` times each
    basis direction of ``L`` lies in the convex hull of the endpoints
    (projected onto ``L``).  It comes from the hull facets when
    ``dim L <= 3`` and from a linear program otherwise; ``inradius`` (the
    largest centred ball inside the hull) is reported only in the first
    case.
    """
    P = np.asarray(cloud.endpoints if hasattr(cloud, "endpoints") else cloud, dtype=np.float64)
    n = P.shape[1]
    rr = numerical_rank(P.T, tol)
    d = rr.rank
    if d == 0:
        return SubspaceReport(0, np.zeros((n, 0)), 0.0, True, 0.0)
    Y = P @ rr.basis
    if d == 1:
        y = Y[:, 0]
        r = max(0.0, float(min(y.max(), -y.min())))
        return SubspaceReport(1, rr.basis, r, True, r)
    if d <= 3:
        from scipy.spatial import ConvexHull, QhullError
        try:
            hull = ConvexHull(Y)
        except QhullError:
            return SubspaceReport(d, rr.basis, _axis_reach_lp(Y))
        # Facets satisfy normal . x + offset <= 0 with unit normals.
        inradius = max(0.0, float(np.min(-hull.equations[:, -1])))
        return SubspaceReport(d, rr.basis, _axis_reach_hull(hull), True, inradius)
    return SubspaceReport(d, rr.basis, _axis_reach_lp(Y))
