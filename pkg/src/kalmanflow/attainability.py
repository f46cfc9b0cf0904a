"""Local attainability of a linear system through push-forwards of the
control directions.

The map ``f_eps`` moves the free-flow endpoint ``flow_T(base, T)`` along the
constant fields ``W_a^[eps * tau_{a,l}]``, one parameter per pair
``(a, l)``.  Each move is a jump of the control by ``s_{a,l} e_a`` at time
``T - eps * tau_{a,l}``, so every point in the image of ``f_eps`` is reached
by an explicit stepped control.  Full rank of the Jacobian of ``f_eps``
makes the image a neighbourhood, and Newton's method on ``s`` steers to
nearby targets.

Control indices ``a`` are 0-based throughout.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EpsilonSearchFailed,
    NewtonDivergence,
    NoConvergence,
    NotLocallyControllable,
    ValidationError,
)
from .flows import flow_constant, flow_T, pushforward_W_exact, pushforward_W_series
from .kalman import build_kalman_matrix
from .model import ExtendedState, PiecewiseConstantControl
from .numerics import DEFAULT_RANK_TOL, numerical_rank
from .simulate import simulate_endpoint

LOCALLY_CONTROLLABLE = "LocallyControllable"
DEFICIENT = "Deficient"

MAX_HALVINGS = 60
MAX_NEWTON_ITERATIONS = 100
STEERING_TOL = 1e-6


@dataclass(frozen=True)
class TauGrid:
    """Distinct times ``tau_{a,l} = (a + 1 + l m) / (m (ell_max + 1))``.

    Pairs are flattened a-major: index ``a * (ell_max + 1) + l``.
    """

    m: int
    ell_max: int

    def __post_init__(self):
        if self.m < 1 or self.ell_max < 0:
            raise ValueError("need m >= 1 and ell_max >= 0")

    @property
    def size(self):
        return self.m * (self.ell_max + 1)

    def pairs(self):
        return [(a, ell) for a in range(self.m) for ell in range(self.ell_max + 1)]

    def index(self, a, ell):
        return a * (self.ell_max + 1) + ell

    def tau(self, a, ell):
        return (a + 1 + ell * self.m) / (self.m * (self.ell_max + 1))

    @property
    def values(self):
        return np.array([self.tau(a, ell) for a, ell in self.pairs()])


def _kalman_threshold(sys, tol):
    K = build_kalman_matrix(sys)
    sv = np.linalg.svd(K, compute_uv=False)
    return tol * sv[0]


def _rank_at(M, threshold):
    if M.size == 0:
        return 0
    sv = np.linalg.svd(M, compute_uv=False)
    return int(np.count_nonzero(sv > threshold))


def compute_ell_max(sys, tol=DEFAULT_RANK_TOL):
    """Smallest ``ell`` at which the span of ``{W_a^(k)}_{k <= ell}`` saturates.

    The u-parts of ``W^(0)`` and the q-parts of ``W^(k)``, ``k >= 1``, live in
    orthogonal blocks, so ``n_ell = m + rank[B, AB, ..., A^(ell-1) B]``.
    Every rank is taken at the absolute threshold the Kalman test uses,
    which makes ``n_ell`` monotone and ``n_(ell_max) = m + kalman rank``
    an identity rather than a coincidence of tolerances.

    Returns
    -------
    ell_max : int
    n_ell : tuple of int
        ``n_0, ..., n_(ell_max)``.
    """
    threshold = _kalman_threshold(sys, tol)
    K = build_kalman_matrix(sys)
    n_ell = [sys.m]
    for ell in range(1, sys.n + 1):
        n_ell.append(sys.m + _rank_at(K[:, : ell * sys.m], threshold))
    top = n_ell[-1]
    ell_max = n_ell.index(top)
    return ell_max, tuple(n_ell[: ell_max + 1])


def choose_basis(sys, ell_max, tol=DEFAULT_RANK_TOL):
    """Greedy selection of independent ``W_b^(l)``, scanning ``(b, l)`` a-major."""
    threshold = _kalman_threshold(sys, tol)
    basis = [(b, 0) for b in range(sys.m)]
    chosen = np.zeros((sys.n, 0))
    rank = 0
    for b in range(sys.m):
        for ell in range(1, ell_max + 1):
            col = np.linalg.matrix_power(sys.A, ell - 1) @ sys.B[:, b]
            trial = np.column_stack([chosen, col])
            r = _rank_at(trial, threshold)
            if r > rank:
                chosen, rank = trial, r
                basis.append((b, ell))
    return tuple(sorted(basis))


def script_A(sys, eps, grid, basis):
    """Coefficient matrix of ``l! W_a^[eps tau_{a,l}]`` over ``{W_b^(k)}``.

    Rows follow ``grid.pairs()``; columns follow the same ``(b, k)`` order.
    """
    pairs = grid.pairs()
    col = {p: j for j, p in enumerate(pairs)}
    out = np.zeros((grid.size, grid.size))
    for i, (a, ell) in enumerate(pairs):
        s = eps * grid.tau(a, ell)
        expansion = pushforward_W_series(a, s, sys, grid.ell_max, basis)
        for key, c in expansion.coefficients.items():
            out[i, col[key]] = math.factorial(ell) * c
    return out


def script_A_hat(eps, grid):
    """Block Vandermonde matrix with rows ``(1, eps tau, (eps tau)^2, ...)``."""
    L = grid.ell_max + 1
    out = np.zeros((grid.size, grid.size))
    for a in range(grid.m):
        taus = eps * np.array([grid.tau(a, ell) for ell in range(L)])
        out[a * L:(a + 1) * L, a * L:(a + 1) * L] = np.vander(taus, L, increasing=True)
    return out


def vandermonde_prediction(eps, grid, log=False):
    """``eps^(m l(l+1)/2) * prod_a prod_{l < l'} (tau_{a,l'} - tau_{a,l})`` with ``l = ell_max``.

    With ``log=True`` the natural log of the (positive) value is returned,
    which stays finite where the value itself underflows.
    """
    L = grid.ell_max
    logval = grid.m * L * (L + 1) / 2 * math.log(eps)
    for a in range(grid.m):
        for i in range(L + 1):
            for j in range(i + 1, L + 1):
                logval += math.log(grid.tau(a, j) - grid.tau(a, i))
    return logval if log else math.exp(logval)


def choose_epsilon(sys, T, tol=DEFAULT_RANK_TOL):
    """Halve ``eps`` from ``T / 4`` until ``|det script_A| >= |prediction| / 2``.

    Raises
    ------
    EpsilonSearchFailed
        After 60 halvings without acceptance.
    """
    if not T > 0:
        raise ValueError("horizon T must be positive")
    ell_max, _ = compute_ell_max(sys, tol)
    grid = TauGrid(sys.m, ell_max)
    basis = choose_basis(sys, ell_max, tol)
    eps = T / 4.0
    for _ in range(MAX_HALVINGS + 1):
        try:
            sign, logdet = np.linalg.slogdet(script_A(sys, eps, grid, basis))
        except NoConvergence:
            sign = 0.0
        if sign != 0.0 and logdet >= math.log(0.5) + vandermonde_prediction(eps, grid, log=True):
            return eps
        eps /= 2.0
    raise EpsilonSearchFailed(f"no admissible epsilon after {MAX_HALVINGS} halvings")


def f_epsilon(sys, eps, T, s, base):
    """Endpoint of ``flow_T(base, T)`` moved along ``W_a^[eps tau_{a,l}]`` by ``s_{a,l}``."""
    ell_max = len(s) // sys.m - 1
    grid = TauGrid(sys.m, ell_max)
    s = np.asarray(s, dtype=np.float64)
    if s.size != grid.size:
        raise ValueError(f"parameter vector must have length multiple of m={sys.m}")
    x = flow_T(base, T, sys)
    for i, (a, ell) in enumerate(grid.pairs()):
        if s[i]:
            x = flow_constant(pushforward_W_exact(a, eps * grid.tau(a, ell), sys), x, s[i])
    return x


def jacobian_columns(sys, eps, grid):
    """``du ⊕ dq`` coordinates of ``W_a^[eps tau_{a,l}]``, one column per pair."""
    return np.column_stack([
        pushforward_W_exact(a, eps * grid.tau(a, ell), sys).vector()
        for a, ell in grid.pairs()
    ])


def taylor_frame(eps, grid):
    """Block matrix ``G`` with ``G[(a,l),(a,k)] = (-eps tau_{a,l})^k / k!``.

    To leading order the Jacobian equals ``W @ G.T`` where ``W`` holds the
    coordinates of ``W_b^(k)``; ``G`` depends only on the grid.
    """
    L = grid.ell_max + 1
    fact = np.array([math.factorial(k) for k in range(L)], dtype=np.float64)
    G = np.zeros((grid.size, grid.size))
    for a in range(grid.m):
        taus = -eps * np.array([grid.tau(a, ell) for ell in range(L)])
        G[a * L:(a + 1) * L, a * L:(a + 1) * L] = np.vander(taus, L, increasing=True) / fact
    return G


@dataclass
class AttainabilityCertificate:
    epsilon: float
    T: float
    ell_max: int
    n_ell: tuple
    basis_tuple: tuple
    script_A: np.ndarray
    det_script_A: float
    jacobian_rank: int
    jacobian_rank_raw: int
    verdict: str
    cross_check: bool
    n: int = 0
    m: int = 0

    @property
    def locally_controllable(self):
        return self.verdict == LOCALLY_CONTROLLABLE


def jacobian_rank_certificate(sys, T=1.0, tol=DEFAULT_RANK_TOL, eps=None):
    """Rank certificate for the attainable set of ``flow_T(0, T)``.

    The Jacobian columns ``[e_a; -phi(eps tau) B_a]`` are nearly parallel for
    small ``eps`` (they differ at order ``eps^l``), so their raw singular
    values spread over many decades.  The rank is therefore read from
    ``J @ inv(G).T`` with the invertible, system-independent
    ``G = taylor_frame(eps, grid)``; this undoes the Vandermonde mixing
    without changing the rank.  The unconditioned rank is kept as
    ``jacobian_rank_raw``.
    """
    if not T > 0:
        raise ValueError("horizon T must be positive")
    ell_max, n_ell = compute_ell_max(sys, tol)
    grid = TauGrid(sys.m, ell_max)
    basis = choose_basis(sys, ell_max, tol)
    if eps is None:
        eps = choose_epsilon(sys, T, tol)
    elif not 0 < eps < T / 2:
        raise ValueError(f"epsilon must lie in (0, T/2), got {eps}")

    J = jacobian_columns(sys, eps, grid)
    G = taylor_frame(eps, grid)
    J_cond = np.linalg.solve(G, J.T).T
    rank = numerical_rank(J_cond, tol).rank
    rank_raw = numerical_rank(J, tol).rank

    SA = script_A(sys, eps, grid, basis)
    sign, logdet = np.linalg.slogdet(SA)
    det = float(sign * math.exp(logdet)) if sign != 0 else 0.0
    invertible = sign != 0 and logdet >= math.log(0.5) + vandermonde_prediction(eps, grid, log=True)

    verdict = LOCALLY_CONTROLLABLE if rank == sys.m + sys.n else DEFICIENT
    return AttainabilityCertificate(
        epsilon=eps,
        T=float(T),
        ell_max=ell_max,
        n_ell=n_ell,
        basis_tuple=basis,
        script_A=SA,
        det_script_A=det,
        jacobian_rank=rank,
        jacobian_rank_raw=rank_raw,
        verdict=verdict,
        cross_check=bool(invertible and rank == n_ell[-1]),
        n=sys.n,
        m=sys.m,
    )


@dataclass(frozen=True)
class Jump:
    time: float
    a: int
    ell: int
    size: float


def reconstruct_control(s, eps, T, grid, base_control, control_set=None):
    """Stepped control of ``q' = -A q - B u`` realising ``f_eps(s)``.

    Starting from the constant ``base_control``, the control jumps by
    ``s_{a,l} e_a`` at time ``T - eps tau_{a,l}``.

    Returns
    -------
    control : PiecewiseConstantControl
    jumps : list of Jump
        In chronological order; zero jumps are omitted.

    Raises
    ------
    ControlOutOfSet
        If ``control_set`` is given and some value leaves it.
    """
    s = np.asarray(s, dtype=np.float64)
    c = np.array(base_control, dtype=np.float64).reshape(grid.m)
    order = sorted(grid.pairs(), key=lambda p: -grid.tau(*p))
    jumps = []
    times = [0.0]
    values = [c.copy()]
    for a, ell in order:
        size = s[grid.index(a, ell)]
        if size == 0.0:
            continue
        t = T - eps * grid.tau(a, ell)
        jumps.append(Jump(t, a, ell, float(size)))
        c = c.copy()
        c[a] += size
        times.append(t)
        values.append(c)
    times.append(float(T))
    durations = np.diff(times)
    keep = durations > 0
    ctrl = PiecewiseConstantControl(durations[keep], np.array(values)[keep]).merged()
    if control_set is not None:
        ctrl.check(control_set)
    return ctrl, jumps


@dataclass
class SteeringResult:
    """Forward control driving ``initial_state`` to ``q_bar`` in time ``T``."""

    initial_state: np.ndarray
    control: PiecewiseConstantControl
    residual: float
    newton_iterations: int
    parameters: np.ndarray = None
    jumps: list = field(default_factory=list)
    certificate: AttainabilityCertificate = None
    within_control_set: bool = True


def steer(sys, target, q_bar=None, T=1.0, eps=None, base_control=None,
          tol=DEFAULT_RANK_TOL, enforce_control_set=True, max_iter=MAX_NEWTON_ITERATIONS):
    """Find a stepped control steering ``target`` to ``q_bar`` in time ``T``.

    Solves ``q(f_eps(s)) = target`` by damped Newton with the frozen
    Jacobian at ``s = 0``, reconstructs the backward control and reverses
    it in time.  The residual comes from a separate forward simulation of
    ``q' = A q + B u`` from the attained point.

    Raises
    ------
    NotLocallyControllable
        If the certificate is not full rank.
    NewtonDivergence
        If the iteration stalls above tolerance or exceeds ``max_iter``.
    ControlOutOfSet
        If ``enforce_control_set`` and a control value leaves the set.
    """
    n, m = sys.n, sys.m
    target = np.asarray(target, dtype=np.float64).reshape(-1)
    if target.size != n:
        raise ValidationError(f"target must have {n} entries")
    q_bar = np.zeros(n) if q_bar is None else np.asarray(q_bar, dtype=np.float64)
    c = np.zeros(m) if base_control is None else np.asarray(base_control, dtype=np.float64)
    cert = jacobian_rank_certificate(sys, T, tol, eps)
    if not cert.locally_controllable:
        raise NotLocallyControllable(f"certificate: {cert.verdict} (rank {cert.jacobian_rank})")
    eps = cert.epsilon
    grid = TauGrid(m, cert.ell_max)
    base = ExtendedState(0.0, q_bar, c)
    Jq = jacobian_columns(sys, eps, grid)[m:]

    def residual(s):
        return f_epsilon(sys, eps, T, s, base).q - target

    scale = max(1.0, float(np.linalg.norm(target)), float(np.linalg.norm(q_bar)))
    goal = 1e-13 * scale
    s = np.zeros(grid.size)
    r = residual(s)
    rn = float(np.linalg.norm(r))
    iterations = 0
    while rn > goal:
        if iterations >= max_iter:
            raise NewtonDivergence(f"no convergence in {max_iter} iterations (residual {rn:.3g})")
        step = np.linalg.lstsq(Jq, -r, rcond=None)[0]
        lam = 1.0
        while True:
            s_new = s + lam * step
            r_new = residual(s_new)
            rn_new = float(np.linalg.norm(r_new))
            if rn_new < rn or lam < 1e-10:
                break
            lam /= 2.0
        iterations += 1
        if not rn_new < rn:
            if rn <= STEERING_TOL * 1e-3:
                break  # at the rounding floor
            raise NewtonDivergence(f"residual stopped decreasing at {rn:.3g}")
        s, r, rn = s_new, r_new, rn_new

    back, jumps = reconstruct_control(s, eps, T, grid, c)
    inside = back.is_valid(sys.control_set)
    if enforce_control_set:
        back.check(sys.control_set)
    forward = back.reversed()
    q0 = f_epsilon(sys, eps, T, s, base).q
    reached = simulate_endpoint(sys, q0, forward, sign=+1)
    return SteeringResult(
        initial_state=q0,
        control=forward,
        residual=float(np.linalg.norm(reached - q_bar)),
        newton_iterations=iterations,
        parameters=s,
        jumps=jumps,
        certificate=cert,
        within_control_set=inside,
    )
