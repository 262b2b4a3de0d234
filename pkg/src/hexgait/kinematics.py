"""Serial-chain kinematics for a single leg.

Forward kinematics follows the classic four-parameter link convention:
each joint contributes Rot_z(theta) * Trans_z(d) * Trans_x(a) * Rot_x(alpha),
with the joint angle added to the fixed theta offset. The inverse
kinematics is an iterative damped-least-squares step

    dq = J^T (J J^T + lambda^2 I)^-1 ds

optionally combined with a null-space pull away from joint position and
velocity limits (a weighted p-norm cost of the normalized distance from
each joint's range centre).
"""

from __future__ import annotations

from dataclasses import dataclass

import math
import zlib

import numpy as np

from .model import DHParam, JLAParams, LegSpec

_EYE4 = np.eye(4)


def _solve_sym3(a: np.ndarray, b: np.ndarray) -> np.ndarray | None:
    """Cramer solve for a well-conditioned symmetric 3x3 system (the
    damped Gram matrix); None when the determinant is tiny."""
    a00, a01, a02 = a[0]
    a11, a12 = a[1, 1], a[1, 2]
    a22 = a[2, 2]
    c00 = a11 * a22 - a12 * a12
    c01 = a02 * a12 - a01 * a22
    c02 = a01 * a12 - a02 * a11
    det = a00 * c00 + a01 * c01 + a02 * c02
    if abs(det) < 1e-30:
        return None
    c11 = a00 * a22 - a02 * a02
    c12 = a01 * a02 - a00 * a12
    c22 = a00 * a11 - a01 * a01
    x = np.empty(3)
    x[0] = (c00 * b[0] + c01 * b[1] + c02 * b[2]) / det
    x[1] = (c01 * b[0] + c11 * b[1] + c12 * b[2]) / det
    x[2] = (c02 * b[0] + c12 * b[1] + c22 * b[2]) / det
    return x


def dh_transform(p: DHParam, q: float = 0.0) -> np.ndarray:
    """Link transform with joint angle q added to the theta offset."""
    th = p.theta + q
    ct, st = np.cos(th), np.sin(th)
    ca, sa = np.cos(p.alpha), np.sin(p.alpha)
    return np.array([
        [ct, -st * ca, st * sa, p.a * ct],
        [st, ct * ca, -ct * sa, p.a * st],
        [0.0, sa, ca, p.d],
        [0.0, 0.0, 0.0, 1.0],
    ])


def _link_matrices(leg: LegSpec, q: np.ndarray) -> np.ndarray:
    """(n, 4, 4) stack of link transforms, built in one vectorized pass."""
    th = leg._dh_theta + q
    ct, st = np.cos(th), np.sin(th)
    ca, sa = leg._dh_ca, leg._dh_sa
    a = leg._dh_a
    n = len(q)
    m = np.zeros((n, 4, 4))
    m[:, 0, 0] = ct
    m[:, 0, 1] = -st * ca
    m[:, 0, 2] = st * sa
    m[:, 0, 3] = a * ct
    m[:, 1, 0] = st
    m[:, 1, 1] = ct * ca
    m[:, 1, 2] = -ct * sa
    m[:, 1, 3] = a * st
    m[:, 2, 1] = sa
    m[:, 2, 2] = ca
    m[:, 2, 3] = leg._dh_d
    m[:, 3, 3] = 1.0
    return m


def chain_frames(leg: LegSpec, q: np.ndarray) -> np.ndarray:
    """Cumulative transforms [I, H1, H1*H2, ...] in the leg frame, shaped
    (n+1, 4, 4).

    Element j is the frame *before* joint j+1 is applied; the last element
    is the tip pose. Joint j rotates about the z axis of element j.
    """
    if len(q) != leg.joint_count:
        raise ValueError(f"expected {leg.joint_count} joint angles, got {len(q)}")
    links = _link_matrices(leg, np.asarray(q, dtype=float))
    frames = np.empty((len(q) + 1, 4, 4))
    frames[0] = _EYE4
    t = links[0]
    frames[1] = t
    for j in range(1, len(q)):
        t = t @ links[j]
        frames[j + 1] = t
    return frames


def forward_kinematics(leg: LegSpec, q: np.ndarray) -> np.ndarray:
    """Tip pose in the leg frame."""
    if len(q) != leg.joint_count:
        raise ValueError(f"expected {leg.joint_count} joint angles, got {len(q)}")
    links = _link_matrices(leg, np.asarray(q, dtype=float))
    t = links[0]
    for j in range(1, len(q)):
        t = t @ links[j]
    return t


def tip_position(leg: LegSpec, q: np.ndarray) -> np.ndarray:
    return forward_kinematics(leg, q)[:3, 3]


def _cross_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise cross product of (n, 3) arrays (np.cross has far too much
    per-call overhead for these small inputs)."""
    out = np.empty_like(a)
    out[:, 0] = a[:, 1] * b[:, 2] - a[:, 2] * b[:, 1]
    out[:, 1] = a[:, 2] * b[:, 0] - a[:, 0] * b[:, 2]
    out[:, 2] = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    return out


def jacobian(leg: LegSpec, q: np.ndarray,
             frames: np.ndarray | None = None) -> np.ndarray:
    """3 x n linear-velocity Jacobian of the tip position.

    Column j is v_j x (s - p_j): the unit rotation axis of joint j crossed
    with the lever arm from the joint origin to the tip.
    """
    if frames is None:
        frames = chain_frames(leg, q)
    s = frames[-1, :3, 3]
    axes = frames[:-1, :3, 2]
    levers = s - frames[:-1, :3, 3]
    return _cross_rows(axes, levers).T


def jacobian6(leg: LegSpec, q: np.ndarray,
              frames: np.ndarray | None = None) -> np.ndarray:
    """6 x n Jacobian: linear rows stacked on angular rows (the axes)."""
    if frames is None:
        frames = chain_frames(leg, q)
    s = frames[-1, :3, 3]
    axes = frames[:-1, :3, 2]
    levers = s - frames[:-1, :3, 3]
    return np.vstack([_cross_rows(axes, levers).T, axes.T])


def limit_cost(leg: LegSpec, q: np.ndarray, p: int) -> float:
    """Weighted p-norm of the normalized distances from range centres."""
    u = _normalized_excursion(leg, q)
    return float(np.sum(np.abs(u) ** p) ** (1.0 / p))


def _normalized_excursion(leg: LegSpec, q: np.ndarray) -> np.ndarray:
    return leg._jla_weight * (q - leg._jla_centre) / leg._jla_span


def limit_cost_gradient(leg: LegSpec, q: np.ndarray, p: int) -> np.ndarray:
    """Gradient of :func:`limit_cost` with respect to q (zero at centres)."""
    u = _normalized_excursion(leg, q)
    phi_p = float(np.sum(np.abs(u) ** p))
    if phi_p <= 0.0:
        return np.zeros_like(q)
    # d/du of (sum |u|^p)^(1/p); p even so |u|^(p-1)*sign(u) == u^(p-1)
    return phi_p ** (1.0 / p - 1.0) * u ** (p - 1) * (leg._jla_weight / leg._jla_span)


def limit_avoidance_pull(leg: LegSpec, q: np.ndarray, jla: JLAParams,
                         last_dq: np.ndarray | None = None,
                         dt: float | None = None) -> np.ndarray:
    """Null-space velocity v = -grad(cost), combining position-limit and
    velocity-limit terms, norm-capped to avoid chatter near limits."""
    v = -jla.position_weight * limit_cost_gradient(leg, q, jla.p)
    if jla.velocity_weight > 0.0 and last_dq is not None and dt is not None and dt > 0:
        vmax = leg.velocity_limits()
        u = last_dq / (vmax * dt)
        phi_p = np.sum(np.abs(u) ** jla.p)
        if phi_p > 0.0:
            grad = phi_p ** (1.0 / jla.p - 1.0) * u ** (jla.p - 1) / (vmax * dt)
            v = v - jla.velocity_weight * grad
    norm = np.linalg.norm(v)
    if norm > jla.gradient_cap > 0.0:
        v = v * (jla.gradient_cap / norm)
    return v


def solve_ik_step(leg: LegSpec, q: np.ndarray, delta_s: np.ndarray,
                  lam: float, jla: JLAParams | None = None,
                  last_dq: np.ndarray | None = None,
                  dt: float | None = None,
                  jac: np.ndarray | None = None) -> np.ndarray:
    """One damped-least-squares update toward a tip displacement delta_s.

    delta_s may be a 3-vector (position only) or 6-vector (position and
    orientation, matched against the 6 x n Jacobian). With lam == 0 the
    system must be square and nonsingular (plain inverse kinematics).
    """
    delta_s = np.asarray(delta_s, dtype=float)
    if jac is None:
        jac = jacobian(leg, q) if delta_s.shape[0] == 3 else jacobian6(leg, q)
    gram = jac @ jac.T
    if lam > 0.0:
        m = gram.shape[0]
        gram.flat[:: m + 1] += lam * lam
    if lam > 0.0 and gram.shape[0] == 3:
        core = _solve_sym3(gram, delta_s)
        if core is None:
            core = np.linalg.solve(gram, delta_s)
    else:
        # raises LinAlgError only when lam == 0 and J J^T is singular
        core = np.linalg.solve(gram, delta_s)
    dq = jac.T @ core
    if jla is not None:
        v = limit_avoidance_pull(leg, q, jla, last_dq, dt)
        # a vanishing pull is not worth the extra solve
        if float(v @ v) > 1e-10:
            if gram.shape[0] == 3 and lam > 0.0:
                jv = jac @ v
                core2 = _solve_sym3(gram, jv)
                if core2 is None:
                    core2 = np.linalg.solve(gram, jv)
                dq = dq + v - jac.T @ core2
            else:
                zj = jac.T @ np.linalg.solve(gram, jac)
                dq = dq + v - zj @ v
    return dq


@dataclass
class IKResult:
    q: np.ndarray
    tip: np.ndarray          # achieved tip position, leg frame
    converged: bool
    error: float             # final position error norm (m)
    iterations: int


def _solve_ik_once(leg: LegSpec, q0: np.ndarray, target: np.ndarray,
                   tolerance: float, max_iters: int, lam: float,
                   jla: JLAParams | None, max_step: float,
                   orientation_weight: float) -> IKResult:
    want_pose = target.shape == (4, 4) and orientation_weight > 0.0
    target_pos = target[:3, 3] if target.shape == (4, 4) else target
    lo, hi = leg.position_limits()
    q = np.clip(np.asarray(q0, dtype=float), lo, hi)

    best_q, best_err = q.copy(), np.inf
    last_dq = np.zeros_like(q)
    stall = 0
    iterations = 0
    for iterations in range(1, max_iters + 1):
        frames = chain_frames(leg, q)
        tip = frames[-1][:3, 3]
        err = target_pos - tip
        err_norm = math.sqrt(float(err @ err))
        if err_norm < best_err - 1e-15:
            best_err, best_q = err_norm, q.copy()
            stall = 0
        else:
            stall += 1
            if stall > 10:   # pinned against limits or a singularity
                break
        if err_norm < tolerance:
            return IKResult(q, tip, True, err_norm, iterations - 1)

        step = err
        if err_norm > max_step:
            step = err * (max_step / err_norm)
        if want_pose:
            from .transforms import rotation_vector
            rot_err = rotation_vector(target[:3, :3] @ frames[-1][:3, :3].T)
            step = np.hstack([step, orientation_weight * rot_err])
            jac = jacobian6(leg, q, frames)
            jac = np.vstack([jac[:3], orientation_weight * jac[3:]])
        else:
            jac = jacobian(leg, q, frames)
        # taper the null-space pull once close, so the secondary objective
        # cannot hold the tip error away from a tight tolerance
        use_jla = jla
        if jla is not None and err_norm < 0.01:
            use_jla = JLAParams(jla.p, jla.position_weight, jla.velocity_weight,
                                jla.gradient_cap * (err_norm / 0.01))
        # endgame damping schedule: the configured lam governs gross
        # motion; once the residual drops below it, damping shrinks with
        # the residual for fast terminal convergence (still bounded away
        # from zero so singular directions stay tame)
        lam_eff = lam if lam == 0.0 else max(min(lam, err_norm), 0.05 * lam)
        dq = solve_ik_step(leg, q, step, lam_eff, use_jla, last_dq, None, jac=jac)
        q = np.clip(q + dq, lo, hi)
        last_dq = dq

    tip = tip_position(leg, best_q)
    err_norm = float(np.linalg.norm(target_pos - tip))
    return IKResult(best_q, tip, err_norm < tolerance, err_norm, iterations)


def _halton(index: int, base: int) -> float:
    f, r = 1.0, 0.0
    while index > 0:
        f /= base
        r += f * (index % base)
        index //= base
    return r


def _restart_seeds(leg: LegSpec, target_pos: np.ndarray,
                   count: int) -> list[np.ndarray]:
    """Deterministic low-discrepancy joint-space samples ranked by tip
    distance to the target; used to reseed stalled solves.

    The first joint usually sets the tip bearing (yaw for legged chains),
    and its effect vanishes in folded configurations, so each sampled
    shape is also swept over a grid of first-joint values; ranking by tip
    distance then prefers seeds already facing the target."""
    lo, hi = leg.position_limits()
    primes = [2, 3, 5, 7, 11, 13][:leg.joint_count]
    shapes = [lo + np.array([_halton(k, b) for b in primes]) * (hi - lo)
              for k in range(1, 17)]
    candidates = list(shapes)
    if leg.joint_count >= 4:
        # sweep the two base joints jointly: together they select the
        # workspace region (bearing and leg-plane roll)
        az1 = np.linspace(lo[0], hi[0], 7)[1:-1]
        az2 = np.linspace(lo[1], hi[1], 7)[1:-1]
        for q in shapes[:5]:
            for a1 in az1:
                for a2 in az2:
                    qa = q.copy()
                    qa[0], qa[1] = a1, a2
                    candidates.append(qa)
    elif leg.joint_count > 1:
        for q in shapes[:6]:
            for az in np.linspace(lo[0], hi[0], 9)[1:-1]:
                qa = q.copy()
                qa[0] = az
                candidates.append(qa)
    ranked = sorted(
        (float(np.linalg.norm(tip_position(leg, q) - target_pos)), i, q)
        for i, q in enumerate(candidates))
    # keep seeds from distinct base-joint basins, best-first
    picked: list[np.ndarray] = []
    head = min(2, leg.joint_count)
    for _, _, q in ranked:
        if all(np.max(np.abs(q[:head] - p[:head])) >= 0.3 for p in picked):
            picked.append(q)
            if len(picked) == max(3, count // 2):
                break
    # the rest are scattered draws (seeded by the target itself, so the
    # whole solve stays a pure function of its inputs); proximity ranking
    # can be systematically wrong about which basin reaches the target
    if len(picked) < count:
        rng = np.random.default_rng(zlib.crc32(np.ascontiguousarray(target_pos).tobytes()))
        for _ in range(count - len(picked)):
            picked.append(lo + rng.random(leg.joint_count) * (hi - lo))
    return picked


def solve_ik(leg: LegSpec, q_current: np.ndarray, target,
             tolerance: float = 1e-4, max_iters: int = 60,
             lam: float = 0.05, jla: JLAParams | None = None,
             max_step: float = 0.1,
             orientation_weight: float = 0.0,
             restarts: int = 3) -> IKResult:
    """Iterate DLS steps toward a target tip position (3-vector) or pose
    (4x4 transform, used when orientation_weight > 0).

    Joint angles are clamped to position limits after every step, so the
    result never leaves the configured ranges. A solve that stalls against
    a limit is retried from the most promising of a deterministic
    low-discrepancy set of seed configurations (up to ``restarts`` of
    them), so results stay reproducible. Non-convergence is reported via
    the flag, not raised; the best visited configuration is returned.
    """
    target = np.asarray(target, dtype=float)
    best = _solve_ik_once(leg, np.asarray(q_current, dtype=float), target,
                          tolerance, max_iters, lam, jla, max_step,
                          orientation_weight)
    if best.converged or restarts <= 0:
        return best
    target_pos = target[:3, 3] if target.shape == (4, 4) else target
    for seed in _restart_seeds(leg, target_pos, restarts):
        res = _solve_ik_once(leg, seed, target, tolerance, max_iters, lam,
                             jla, max_step, orientation_weight)
        if res.converged:
            return res
        if res.error < best.error:
            best = res
    return best
