"""
Viscously regularized incremental solver
========================================

Time-incremental minimization for the coupled damage / perfect-plasticity
system with small viscosity ``eps`` in both internal variables.  One step
from t_{k-1} to t_k = t_{k-1} + tau solves

    min_{u, p, z <= z_{k-1}}  E(t_k, u, z, p)
        + H(z, p - p_{k-1}) + R(z - z_{k-1})
        + (eps / 2 tau) ( ||z - z_{k-1}||^2 + ||p - p_{k-1}||^2 )

by block-coordinate descent in the order u -> p -> z:

* ``solve_momentum`` -- linear SPD solve (direct sparse factorization),
* ``update_p``       -- closed-form viscous radial return per element,
* ``update_z``       -- projected Newton on a smooth convex objective with
  the box constraint z_floor <= z <= z_{k-1}.

The sweep repeats until the combined state increment falls below
``tol_stag``; a final p-update at the converged (u, z) makes the per-element
return-map optimality exact at the reported state.  Failed steps (stagnant
outer loop, Newton breakdown, or an inadmissible stress state) are retried
on two half-intervals, at most ``max_halvings`` levels deep.

Energy ledger
-------------
Every accepted node records energies, slopes and the dissipation increments
of the step that produced it, so that the viscous energy balance

    E(t_N, q_N) + sum_k [ R + H + viscous + slope-conjugate ]_k
        = E(0, q_0) + sum_k work_k

can be audited after the fact (``edb_residual``).  The work and conjugate
terms use the trapezoid rule in t; R, H and the viscous quadratic are the
exact incremental quantities of the minimization.  The relative residual is
measured against |E(0)| + dissipated + 1.
"""

import time as _time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse.linalg as spla

from .energetics import Model, State
from .mesh import sym_grad
from .tensors import dev_norm

__all__ = [
    "SolverOptions",
    "StepFailure",
    "StepReport",
    "Trajectory",
    "solve_momentum",
    "update_p",
    "update_z",
    "time_step",
    "run",
    "edb_residual",
]

#: slack added to the yield admissibility check (roundoff allowance)
_ADMISSIBILITY_TOL = 1.0e-10


@dataclass(frozen=True)
class SolverOptions:
    """Numerical parameters of the incremental solver."""

    eps: float = 1.0e-2
    tau: float = 1.0e-3
    t_end: float = 1.0
    tol_stag: float = 1.0e-12
    tol_z: float = 1.0e-9
    max_outer: int = 50
    max_newton: int = 80
    max_halvings: int = 3
    z_floor: float = 1.0e-4


class StepFailure(RuntimeError):
    """A single incremental step did not produce an acceptable state."""


@dataclass
class StepReport:
    t: float
    tau: float
    outer_iters: int
    newton_iters: int
    halvings: int
    r_u: float
    kkt_z: float
    kkt_p: float


@dataclass
class Trajectory:
    """Accepted states plus the per-step energy ledger.

    Node arrays have length N+1 (including the initial state); step arrays
    have length N and refer to the step *ending* at the same index in the
    node arrays (entry 0 is a placeholder for the initial node).
    """

    ts: np.ndarray
    us: np.ndarray
    zs: np.ndarray
    ps: np.ndarray
    d_z: np.ndarray
    d_p: np.ndarray
    Q: np.ndarray
    Phi: np.ndarray
    work: np.ndarray
    E: np.ndarray
    dtE: np.ndarray
    R_inc: np.ndarray
    H_inc: np.ndarray
    visc_inc: np.ndarray
    conj_inc: np.ndarray
    work_inc: np.ndarray
    outer_iters: np.ndarray
    r_u: np.ndarray
    kkt_z: np.ndarray
    kkt_p: np.ndarray
    halvings: np.ndarray
    eps: float
    wall_time: float = 0.0

    @property
    def n_nodes(self) -> int:
        return len(self.ts)


# ---------------------------------------------------------------------------
# sub-minimizations
# ---------------------------------------------------------------------------


def solve_momentum(model: Model, t: float, z: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Equilibrium displacement for frozen internal variables."""
    u, _ = _solve_momentum_lu(model, t, z, p)
    return u


def _solve_momentum_lu(model: Model, t, z, p):
    K, b = model.momentum_system(t, z, p)
    free = model.mesh.layout.u_free
    Kff = K[free][:, free].tocsc()
    lu = spla.splu(Kff)
    u = np.zeros(2 * model.mesh.n_vertices)
    u[free] = lu.solve(b[free])
    return u.reshape(-1, 2), (lu, K, free)


def update_p(
    model: Model,
    t: float,
    u: np.ndarray,
    z: np.ndarray,
    p_prev: np.ndarray,
    eps: float,
    tau: float,
) -> Tuple[np.ndarray, float]:
    """Viscous radial return, elementwise closed form.

    Minimizes, per element and with trial strain e_tr = E(u+w) - p_prev,

        1/2 V C (e_tr - dp):(e_tr - dp) + sigma_y(zbar) |dp|
            + (eps / 2 tau) |dp|^2

    giving ``dp = dgamma * s / |s|`` with ``s = dev sigma_tr`` and
    ``dgamma = max(|s| - sigma_y, 0) / (2 mu V(zbar) + eps/tau)``.

    Returns the new plastic field and the worst elementwise optimality
    residual (distance of the final stress to the flow-rule condition).
    """
    mesh = model.mesh
    prm = model.params
    e_tr = model.strain(t, u, p_prev)
    sig = model.stress(z, e_tr)
    d = 0.5 * (sig[:, 0] - sig[:, 1])
    s = sig[:, 2]
    snorm = np.sqrt(2.0 * (d * d + s * s))
    zbar = mesh.element_averages(z)
    ry = prm.sigma_y(zbar)
    denom = 2.0 * prm.mu * prm.V(zbar) + eps / tau
    dgam = np.maximum(snorm - ry, 0.0) / denom
    flow = dgam > 0.0
    scale = np.zeros_like(snorm)
    scale[flow] = dgam[flow] / snorm[flow]
    dp = np.stack([scale * d, scale * s], axis=-1)
    p_new = p_prev + dp

    # optimality residual at the updated state
    snorm_new = snorm - 2.0 * prm.mu * prm.V(zbar) * dgam
    resid_flow = np.abs(snorm_new - ry - (eps / tau) * dgam)
    resid_stick = np.maximum(snorm_new - ry, 0.0)
    kkt = float(np.max(np.where(flow, resid_flow, resid_stick), initial=0.0))
    return p_new, kkt


def _z_objective_terms(model: Model, t, u, p):
    """Fixed data of the z-subproblem: strain energy density per element."""
    e = model.strain(t, u, p)
    return model.elastic_density(e)


def _z_value(model, z, z_prev, cee, eps_tau):
    mesh = model.mesh
    prm = model.params
    v = prm.V(mesh.element_averages(z))
    val = 0.5 * float(z @ (model.A @ z))
    val += float(np.sum(mesh.vertex_weight * prm.W(z)))
    val += 0.5 * float(np.sum(mesh.area * v * cee))
    val += prm.kappa * float(np.sum(mesh.vertex_weight * (z_prev - z)))
    dz = z - z_prev
    val += 0.5 * eps_tau * float(np.sum(mesh.vertex_weight * dz * dz))
    return val


def _z_diff_value(model, z, z_prev, cee, eps_tau, Az_prev, zbar_prev, W_prev):
    """Objective change F(z) - F(z_prev), evaluated in increment form.

    The absolute value of the objective is dominated by terms (notably the
    nonlocal quadratic) whose evaluation noise dwarfs the tiny decreases a
    Newton step makes near the minimizer, so line searches on F itself
    compare rounding noise.  Expanding every term in the increment
    ``delta = z - z_prev`` removes the large cancellations: the result is
    exact to machine precision *of the increment*, not of the total.
    """
    mesh = model.mesh
    prm = model.params
    w = mesh.vertex_weight
    delta = z - z_prev
    dbar = mesh.element_averages(delta)
    val = 0.5 * float(delta @ (model.A @ delta)) + float(Az_prev @ delta)
    val += float(np.sum(w * (prm.W(z) - W_prev)))
    # V(zbar) - V(zbar_prev) = dbar * (dbar + 2 zbar_prev) since V is
    # delta_V + z^2
    val += 0.5 * float(np.sum(mesh.area * cee * dbar * (dbar + 2.0 * zbar_prev)))
    val -= prm.kappa * float(w @ delta)
    val += 0.5 * eps_tau * float(np.sum(w * delta * delta))
    return val


def _z_gradient(model, z, z_prev, cee, eps_tau):
    mesh = model.mesh
    prm = model.params
    g = model.A @ z + mesh.vertex_weight * prm.W_prime(z)
    vp = prm.V_prime(mesh.element_averages(z))
    drive = mesh.area * vp * cee / 6.0
    np.add.at(g, mesh.triangles.ravel(), np.repeat(drive, 3))
    g -= prm.kappa * mesh.vertex_weight
    g += eps_tau * mesh.vertex_weight * (z - z_prev)
    return g


def _z_kkt(model, g, z, z_prev, z_floor):
    """Dual lumped-L2 norm of the box-projected gradient."""
    pg = g.copy()
    at_upper = z >= z_prev - 1.0e-14
    at_lower = z <= z_floor + 1.0e-14
    pg[at_upper] = np.maximum(g[at_upper], 0.0)
    pg[at_lower] = np.minimum(g[at_lower], 0.0)
    pg[at_upper & at_lower] = 0.0
    w = model.mesh.vertex_weight
    return float(np.sqrt(np.sum(pg * pg / w)))


def update_z(
    model: Model,
    t: float,
    u: np.ndarray,
    p: np.ndarray,
    z_prev: np.ndarray,
    eps: float,
    tau: float,
    tol: float = 1.0e-10,
    z_floor: float = 1.0e-4,
    max_iter: int = 80,
    z_init: np.ndarray | None = None,
) -> Tuple[np.ndarray, float, int]:
    """Damage update by projected Newton.

    The objective (nonlocal quadratic + lumped W + damaged elastic energy +
    unidirectional dissipation + viscous quadratic) is smooth and convex on
    the box ``z_floor <= z <= z_prev``, so an active-set Newton iteration
    with projected backtracking converges to the unique minimizer.
    ``z_init`` warm-starts the iteration (clipped into the box).

    Returns ``(z, kkt_residual, iterations)``.
    """
    mesh = model.mesh
    cee = _z_objective_terms(model, t, u, p)
    eps_tau = eps / tau
    w = mesh.vertex_weight
    tri = mesh.triangles

    if z_init is None:
        z = z_prev.copy()
    else:
        z = np.minimum(np.maximum(z_init, z_floor), z_prev)
    g = _z_gradient(model, z, z_prev, cee, eps_tau)
    kkt = _z_kkt(model, g, z, z_prev, z_floor)
    if kkt <= tol:
        return z, kkt, 0

    # curvature of the damaged elastic energy is constant within the call
    # (V'' = 2, d zbar / d z_V = 1/3): rank-one blocks per element
    Hq = np.zeros((mesh.n_vertices, mesh.n_vertices))
    coeff = mesh.area * cee / 9.0
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    np.add.at(Hq, (rows, cols), np.repeat(coeff, 9))
    Hq += model.A

    Az_prev = model.A @ z_prev
    zbar_prev = mesh.element_averages(z_prev)
    W_prev = model.params.W(z_prev)

    # objective change relative to z_prev
    if z_init is None:
        f_val = 0.0
    else:
        f_val = _z_diff_value(model, z, z_prev, cee, eps_tau, Az_prev, zbar_prev, W_prev)
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        at_upper = (z >= z_prev - 1.0e-14) & (g <= 0.0)
        at_lower = (z <= z_floor + 1.0e-14) & (g >= 0.0)
        fixed = at_upper | at_lower
        free = ~fixed
        if not np.any(free):
            break

        H = Hq[np.ix_(free, free)]
        diag = w * (model.params.W_second(z) + eps_tau)
        H[np.diag_indices_from(H)] += diag[free]

        d = np.zeros_like(z)
        try:
            d[free] = np.linalg.solve(H, -g[free])
        except np.linalg.LinAlgError:
            raise StepFailure("singular Hessian in damage update")

        # projected Armijo backtracking on the increment objective; the
        # slope uses the actually realized (clipped) displacement.  When even
        # the full step predicts a decrease below the float resolution of the
        # objective, backtracking can only compare noise — skip it.
        alpha = 1.0
        accepted = False
        z_full = np.clip(z + d, z_floor, z_prev)
        slope_full = float(g @ (z_full - z))
        f_res = 16.0 * np.finfo(float).eps * (1.0 + abs(f_val))
        if slope_full < -f_res:
            for _ in range(60):
                z_cand = np.clip(z + alpha * d, z_floor, z_prev)
                step = z_cand - z
                slope = float(g @ step)
                if slope < 0.0:
                    f_cand = _z_diff_value(
                        model, z_cand, z_prev, cee, eps_tau, Az_prev, zbar_prev, W_prev
                    )
                    if f_cand <= f_val + 1.0e-4 * slope:
                        accepted = True
                        break
                alpha *= 0.5
        if not accepted:
            # Objective differences are below float resolution, so the line
            # search can no longer certify descent.  In this endgame the
            # problem is locally a strongly convex quadratic: take the full
            # projected Newton step as long as it keeps halving the residual.
            z_cand = z_full
            g_cand = _z_gradient(model, z_cand, z_prev, cee, eps_tau)
            kkt_cand = _z_kkt(model, g_cand, z_cand, z_prev, z_floor)
            if kkt_cand >= kkt:
                break
            halved = kkt_cand < 0.5 * kkt
            z, g, kkt = z_cand, g_cand, kkt_cand
            f_val = _z_diff_value(
                model, z, z_prev, cee, eps_tau, Az_prev, zbar_prev, W_prev
            )
            if kkt <= tol or not halved:
                break
            continue

        z, f_val = z_cand, f_cand
        g = _z_gradient(model, z, z_prev, cee, eps_tau)
        kkt = _z_kkt(model, g, z, z_prev, z_floor)
        if kkt <= tol:
            break

    if kkt > max(tol, 1.0e-8):
        raise StepFailure(f"damage update stalled at KKT residual {kkt:.3e}")
    return z, kkt, n_iter


# ---------------------------------------------------------------------------
# the incremental step and the run driver
# ---------------------------------------------------------------------------


def time_step(
    model: Model, state: State, t_new: float, opts: SolverOptions
) -> Tuple[State, StepReport]:
    """One incremental minimization step (no retry logic here)."""
    mesh = model.mesh
    prm = model.params
    tau = t_new - state.t
    if tau <= 0:
        raise ValueError("time step must advance t")
    eps_tau_inv = opts.eps / tau

    u = state.u
    z = state.z
    p = state.p
    kkt_p = np.inf
    kkt_z = 0.0
    newton_total = 0
    lu_pack = None

    converged = False
    n_outer = 0
    best = np.inf
    stalled = 0
    for n_outer in range(1, opts.max_outer + 1):
        u_new, lu_pack = _solve_momentum_lu(model, t_new, z, p)
        p_new, kkt_p = update_p(model, t_new, u_new, z, state.p, opts.eps, tau)
        z_new, kkt_z, nit = update_z(
            model,
            t_new,
            u_new,
            p_new,
            state.z,
            opts.eps,
            tau,
            tol=opts.tol_z,
            z_floor=opts.z_floor,
            max_iter=opts.max_newton,
            z_init=z,
        )
        newton_total += nit
        du = mesh.u_l2(u_new - u)
        dz = mesh.z_l2(z_new - z)
        dp = mesh.p0_l2(p_new - p)
        u, z, p = u_new, z_new, p_new
        step = du + dz + dp
        if step <= opts.tol_stag:
            converged = True
            break
        # The inner solves terminate on residual tolerances, so successive
        # sweeps jitter by roughly (inner tol / curvature) even at the fixed
        # point.  Once the increments stop contracting while sitting far
        # below any physical scale, accept rather than loop on noise.
        if step < 0.7 * best:
            stalled = 0
        else:
            stalled += 1
        best = min(best, step)
        scale = 1.0 + mesh.u_l2(u) + mesh.z_l2(z) + mesh.p0_l2(p)
        if stalled >= 3 and best <= 1e3 * opts.tol_stag * scale:
            converged = True
            break
    if not converged:
        raise StepFailure("staggered loop stalled at t=%.6g" % t_new)

    # closing plastic update at the converged (u, z): makes the elementwise
    # return-map optimality exact at the reported state
    p, kkt_p = update_p(model, t_new, u, z, state.p, opts.eps, tau)

    # yield admissibility |dev sigma| <= sigma_y + (eps/tau) |dp|
    e = model.strain(t_new, u, p)
    sig = model.stress(z, e)
    sd = Model._dev_norm(sig)
    ry = prm.sigma_y(mesh.element_averages(z))
    dp_norm = dev_norm(p - state.p)
    if np.any(sd > ry + eps_tau_inv * dp_norm + _ADMISSIBILITY_TOL):
        raise StepFailure("inadmissible stress state at t=%.6g" % t_new)

    # momentum residual with the factorization of the last solve
    lu, K, freemask = lu_pack
    _, b = model.momentum_system(t_new, z, p)
    r = (K @ u.ravel() - b)[freemask]
    x = lu.solve(r)
    r_u = float(np.sqrt(max(r @ x, 0.0)))

    g = _z_gradient(
        model, z, state.z, _z_objective_terms(model, t_new, u, p), eps_tau_inv
    )
    kkt_z = _z_kkt(model, g, z, state.z, opts.z_floor)

    report = StepReport(
        t=t_new,
        tau=tau,
        outer_iters=n_outer,
        newton_iters=newton_total,
        halvings=0,
        r_u=r_u,
        kkt_z=kkt_z,
        kkt_p=kkt_p,
    )
    return State(t_new, u, z, p), report


def run(model: Model, opts: SolverOptions) -> Trajectory:
    """Drive the incremental solver over [0, t_end].

    Steps that fail are bisected (up to ``max_halvings`` levels); every
    accepted sub-step becomes a trajectory node, so the node spacing can be
    locally finer than ``tau``.
    """
    t_start = _time.perf_counter()
    mesh = model.mesh
    nv, ne = mesh.n_vertices, mesh.n_elements

    z0 = np.ones(nv)
    p0 = np.zeros((ne, 2))
    u0 = solve_momentum(model, 0.0, z0, p0)
    state = State(0.0, u0, z0, p0)

    nodes: List[State] = [state]
    reports: List[Optional[StepReport]] = [None]

    n_steps = int(round(opts.t_end / opts.tau))
    if abs(n_steps * opts.tau - opts.t_end) > 1e-9 * max(1.0, opts.t_end):
        n_steps = int(np.ceil(opts.t_end / opts.tau))

    def advance(st: State, t_target: float, depth: int) -> State:
        try:
            new_state, rep = time_step(model, st, t_target, opts)
        except StepFailure:
            if depth >= opts.max_halvings:
                raise
            t_mid = 0.5 * (st.t + t_target)
            st = advance(st, t_mid, depth + 1)
            return advance(st, t_target, depth + 1)
        rep.halvings = depth
        nodes.append(new_state)
        reports.append(rep)
        return new_state

    for k in range(1, n_steps + 1):
        t_target = min(k * opts.tau, opts.t_end)
        state = advance(state, t_target, 0)

    # ---- node-wise ledger quantities ------------------------------------
    n = len(nodes)
    ts = np.array([s.t for s in nodes])
    us = np.stack([s.u for s in nodes])
    zs = np.stack([s.z for s in nodes])
    ps = np.stack([s.p for s in nodes])

    d_z = np.zeros(n)
    d_p = np.zeros(n)
    Q = np.zeros(n)
    Phi = np.zeros(n)
    work = np.zeros(n)
    E = np.zeros(n)
    dtE = np.zeros(n)
    for i, s in enumerate(nodes):
        parts = model.energy(s.t, s.u, s.z, s.p)
        Q[i], Phi[i], work[i], E[i] = (
            parts["Q"],
            parts["Phi"],
            parts["work"],
            parts["E"],
        )
        d_z[i], d_p[i] = model.slopes(s.t, s.u, s.z, s.p)
        dtE[i] = model.d_t_energy(s.t, s.u, s.z, s.p)

    R_inc = np.zeros(n)
    H_inc = np.zeros(n)
    visc_inc = np.zeros(n)
    conj_inc = np.zeros(n)
    work_inc = np.zeros(n)
    from .materials import dissipation_H, dissipation_R

    for k in range(1, n):
        dt = ts[k] - ts[k - 1]
        dz_f = zs[k] - zs[k - 1]
        dp_f = ps[k] - ps[k - 1]
        R_inc[k] = dissipation_R(model.params, mesh, dz_f)
        H_inc[k] = dissipation_H(model.params, mesh, zs[k], dp_f)
        visc_inc[k] = (
            0.5
            * opts.eps
            / dt
            * (mesh.z_l2(dz_f) ** 2 + mesh.p0_l2(dp_f) ** 2)
        )
        conj_inc[k] = (
            dt
            / (2.0 * opts.eps)
            * 0.5
            * ((d_z[k - 1] ** 2 + d_p[k - 1] ** 2) + (d_z[k] ** 2 + d_p[k] ** 2))
        )
        work_inc[k] = 0.5 * dt * (dtE[k - 1] + dtE[k])

    outer = np.zeros(n, dtype=int)
    r_u = np.zeros(n)
    kkt_z = np.zeros(n)
    kkt_p = np.zeros(n)
    halv = np.zeros(n, dtype=int)
    for i, rep in enumerate(reports):
        if rep is None:
            r_u[i] = model.grad_u_residual(ts[i], nodes[i].u, nodes[i].z, nodes[i].p)
            continue
        outer[i] = rep.outer_iters
        r_u[i] = rep.r_u
        kkt_z[i] = rep.kkt_z
        kkt_p[i] = rep.kkt_p
        halv[i] = rep.halvings

    return Trajectory(
        ts=ts,
        us=us,
        zs=zs,
        ps=ps,
        d_z=d_z,
        d_p=d_p,
        Q=Q,
        Phi=Phi,
        work=work,
        E=E,
        dtE=dtE,
        R_inc=R_inc,
        H_inc=H_inc,
        visc_inc=visc_inc,
        conj_inc=conj_inc,
        work_inc=work_inc,
        outer_iters=outer,
        r_u=r_u,
        kkt_z=kkt_z,
        kkt_p=kkt_p,
        halvings=halv,
        eps=opts.eps,
        wall_time=_time.perf_counter() - t_start,
    )


def edb_residual(traj: Trajectory) -> Tuple[np.ndarray, float]:
    """Relative viscous energy-balance residual along the trajectory.

    Returns the cumulative residual at every node (entry 0 is zero) and its
    maximum absolute value.
    """
    diss = np.cumsum(traj.R_inc + traj.H_inc + traj.visc_inc + traj.conj_inc)
    lhs = traj.E + diss
    rhs = traj.E[0] + np.cumsum(traj.work_inc)
    scale = np.abs(traj.E[0]) + diss + 1.0
    res = (lhs - rhs) / scale
    return res, float(np.max(np.abs(res)))
