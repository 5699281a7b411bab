"""LP, Frank-Wolfe and the condensed-QP MPC baseline."""

import csv
from dataclasses import dataclass, field

import numpy as np

from . import lp
from .errors import Infeasible, InfeasibleStart, ToleranceNotMet
from .geometry import HPolytope, contains

STEP_RULES = ("auto", "exact", "armijo")


@dataclass
class LpProblem:
    """``min c @ z`` over an H-polytope."""

    c: np.ndarray
    constraints: HPolytope

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        if self.c.size != self.constraints.n:
            raise ValueError("cost vector and constraints disagree in dimension")


def solve_lp(problem, constraints=None):
    """Solve an LP; accepts an :class:`LpProblem` or ``(c, constraints)``.

    Returns ``(z, value)`` where ``z`` is the basic optimal solution chosen by
    Bland's rule.
    """
    if constraints is not None:
        problem = LpProblem(problem, constraints)
    P = problem.constraints
    return lp.simplex(problem.c, P.H, P.h)


@dataclass
class FwConfig:
    """Frank-Wolfe settings.

    ``step_rule`` is ``"exact"`` (closed-form line search on a quadratic),
    ``"armijo"`` (backtracking) or ``"auto"`` (exact when a Hessian is
    supplied, Armijo otherwise). ``gap_tol = 0`` disables the gap stop.
    """

    max_iters: int = 10
    step_rule: str = "auto"
    gap_tol: float = 1e-8
    armijo_beta: float = 0.5
    armijo_c1: float = 1e-4

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.step_rule not in STEP_RULES:
            raise ValueError(f"step_rule must be one of {STEP_RULES}")
        if not 0 < self.armijo_beta < 1 or not 0 < self.armijo_c1 < 1:
            raise ValueError("Armijo parameters must lie in (0, 1)")
        if self.gap_tol < 0:
            raise ValueError("gap_tol must be nonnegative")


@dataclass
class FwResult:
    u: np.ndarray
    objective: float
    iterations: int
    duality_gap: float
    feasible_throughout: bool
    # (iteration, objective at the linearization point, gap there)
    trace: list = field(default_factory=list)
    iterates: list = field(default_factory=list)


def write_trace_csv(result, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["iteration", "objective", "gap"])
        for it, obj, gap in result.trace:
            w.writerow([it, repr(obj), repr(gap)])


def frank_wolfe(fun, grad, feasible, u0, cfg=None, hess=None, lmo=None, record=False):
    """Conditional gradient over the polytope ``feasible``.

    ``lmo(g)`` may replace the default LP oracle ``argmin_s g @ s``. Every
    iterate is a convex combination of feasible points; a step that would
    increase the objective (only possible through rounding) is rejected.
    """
    cfg = cfg or FwConfig()
    u = np.array(u0, dtype=float).reshape(-1)
    if not contains(feasible, u, 1e-9):
        raise InfeasibleStart("starting point violates the feasible set")
    rule = cfg.step_rule
    if rule == "auto":
        rule = "exact" if hess is not None else "armijo"
    if rule == "exact" and hess is None:
        raise ValueError("exact line search needs the Hessian")

    f = fun(u)
    gap = np.inf
    feasible_throughout = True
    trace = []
    iterates = [u.copy()] if record else []
    it = 0
    for it in range(1, cfg.max_iters + 1):
        g = grad(u)
        s = lmo(g) if lmo is not None else lp.simplex(g, feasible.H, feasible.h)[0]
        d = s - u
        slope = float(g @ d)
        gap = -slope
        trace.append((it - 1, f, gap))
        if cfg.gap_tol > 0 and gap <= cfg.gap_tol:
            it -= 1
            break
        if rule == "exact":
            curv = float(d @ hess @ d)
            gamma = 1.0 if curv <= 0 else min(1.0, max(0.0, gap / curv))
            f_new = fun(u + gamma * d)
        else:
            gamma = 1.0
            f_new = fun(u + d)
            while f_new > f + cfg.armijo_c1 * gamma * slope and gamma > 1e-12:
                gamma *= cfg.armijo_beta
                f_new = fun(u + gamma * d)
        if gamma > 0 and f_new <= f:
            u = u + gamma * d
            f = f_new
        feasible_throughout &= contains(feasible, u, 1e-9)
        if record:
            iterates.append(u.copy())
    return FwResult(u, f, it, gap, feasible_throughout, trace, iterates)


def duality_gap(grad_u, u, feasible):
    """Frank-Wolfe gap ``grad @ (u - s)`` at ``u``."""
    s, _ = lp.simplex(grad_u, feasible.H, feasible.h)
    return float(grad_u @ (u - s))


def solve_qp_active_set(G, c, A, b, z0, max_iter=None):
    """Primal active-set method for ``min 0.5 z'Gz + c'z  s.t.  Az <= b``.

    ``G`` must be positive definite and ``z0`` feasible. The working set is
    kept linearly independent, so paired rows encoding an equality are never
    both active at once.
    """
    z = np.array(z0, dtype=float)
    m, n = A.shape
    max_iter = max_iter or 20 * (m + n)
    scale = max(1.0, float(np.abs(b).max()))
    slack = b - A @ z
    W = []
    for i in np.flatnonzero(np.abs(slack) <= 1e-9 * scale):
        trial = A[W + [i]]
        if np.linalg.matrix_rank(trial, tol=1e-10) == len(W) + 1:
            W.append(int(i))
    for _ in range(max_iter):
        g = G @ z + c
        k = len(W)
        K = np.zeros((n + k, n + k))
        K[:n, :n] = G
        if k:
            K[:n, n:] = A[W].T
            K[n:, :n] = A[W]
        rhs = np.concatenate([-g, np.zeros(k)])
        sol = np.linalg.solve(K, rhs)
        p, mu = sol[:n], sol[n:]
        if np.linalg.norm(p) <= 1e-12 * (1.0 + np.linalg.norm(z)):
            if k == 0 or mu.min() >= -1e-12 * (1.0 + np.abs(g).max()):
                return z
            W.pop(int(np.argmin(mu)))
            continue
        Ap = A @ p
        alpha, block = 1.0, None
        active = np.zeros(m, dtype=bool)
        active[W] = True
        for i in np.flatnonzero((Ap > 1e-14 * (1.0 + np.abs(A).max() * np.linalg.norm(p))) & ~active):
            step = max(0.0, (b[i] - A[i] @ z) / Ap[i])
            if step < alpha:
                alpha, block = step, int(i)
        z = z + alpha * p
        if block is not None:
            W.append(block)
    raise RuntimeError("active-set iteration limit reached")


def condense_mpc(system, cost, sets, x0):
    """Stacked-input QP ``0.5 z'Gz + c'z + const`` with ``Az <= b``.

    States ``x_1..x_N`` are eliminated through ``x = Phi x0 + Gamma z``. Rows
    enforce ``u_k in U`` and ``x_{k+1} in X_{k+1}`` for every stage.
    """
    A, B = system.A, system.B
    nx, nu = B.shape
    N = sets.N
    Phi = np.zeros((N * nx, nx))
    Gamma = np.zeros((N * nx, N * nu))
    Ak = np.eye(nx)
    powers = [np.eye(nx)]
    for k in range(N):
        Ak = A @ Ak
        powers.append(Ak)
        Phi[k * nx:(k + 1) * nx] = Ak
    for k in range(N):
        for j in range(k + 1):
            Gamma[k * nx:(k + 1) * nx, j * nu:(j + 1) * nu] = powers[k - j] @ B
    Qbar = np.zeros((N * nx, N * nx))
    for k in range(N - 1):
        Qbar[k * nx:(k + 1) * nx, k * nx:(k + 1) * nx] = cost.Q
    Qbar[(N - 1) * nx:, (N - 1) * nx:] = cost.terminal_Q
    Rbar = np.kron(np.eye(N), cost.R)
    free = Phi @ x0
    G = 2.0 * (Gamma.T @ Qbar @ Gamma + Rbar)
    G = 0.5 * (G + G.T)
    c = 2.0 * Gamma.T @ Qbar @ free
    const = float(x0 @ cost.Q @ x0 + free @ Qbar @ free)

    rows, rhs = [], []
    U = sets.U
    for k in range(N):
        blk = np.zeros((U.m, N * nu))
        blk[:, k * nu:(k + 1) * nu] = U.H
        rows.append(blk)
        rhs.append(U.h)
        Xn = sets.sets[k + 1]
        Gk = Gamma[k * nx:(k + 1) * nx]
        rows.append(Xn.H @ Gk)
        rhs.append(Xn.h - Xn.H @ free[k * nx:(k + 1) * nx])
    return G, c, const, np.vstack(rows), np.concatenate(rhs)


@dataclass
class MpcSolution:
    inputs: np.ndarray  # shape (N, n_u)
    cost: float
    duality_gap: float
    fw_iterations: int
    polished: bool


def solve_mpc_qp(system, cost, sets, x0, tol=1e-8, max_iters=100_000, fw_warmup=10, polish=True):
    """Exact finite-horizon MPC by the condensed QP.

    Frank-Wolfe with exact line search runs first; its iterate seeds an
    active-set solve, and the result is accepted only when its Frank-Wolfe
    duality gap (computed through the LP oracle) is at most ``tol``. If that
    fails, Frank-Wolfe continues until the gap or the iteration cap is hit.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if not contains(sets.sets[0], x0, 1e-9):
        raise Infeasible(f"initial state {x0} is outside X_0")
    G, c, const, A, b = condense_mpc(system, cost, sets, x0)
    nu = system.B.shape[1]
    feasible = HPolytope(A, b)

    def fun(z):
        return float(0.5 * z @ G @ z + c @ z + const)

    def grad(z):
        return G @ z + c

    z0, _ = lp.simplex(np.zeros(A.shape[1]), feasible.H, feasible.h)
    cfg = FwConfig(max_iters=min(fw_warmup, max_iters), step_rule="exact", gap_tol=tol)
    res = frank_wolfe(fun, grad, feasible, z0, cfg, hess=G)
    used = res.iterations
    z, gap, polished = res.u, res.duality_gap, False
    if gap > tol and polish:
        z_p = solve_qp_active_set(G, c, A, b, z)
        if np.max(A @ z_p - b) <= 1e-9 * max(1.0, np.abs(b).max()):
            gap_p = duality_gap(grad(z_p), z_p, feasible)
            if gap_p <= tol or fun(z_p) < fun(z):
                z, gap, polished = z_p, gap_p, True
    if gap > tol and used < max_iters:
        if not contains(feasible, z, 1e-9):
            z = res.u
        cfg = FwConfig(max_iters=max_iters - used, step_rule="exact", gap_tol=tol)
        res = frank_wolfe(fun, grad, feasible, z, cfg, hess=G)
        used += res.iterations
        z, gap = res.u, duality_gap(grad(res.u), res.u, feasible)
    sol = MpcSolution(z.reshape(-1, nu), fun(z), gap, used, polished)
    if gap > tol:
        raise ToleranceNotMet(f"duality gap {gap:.3g} above {tol:.3g} after {used} iterations", sol)
    return sol
