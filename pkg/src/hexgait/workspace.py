"""Leg workspace search, walkspace polygon and stride/velocity limits.

The reachable area of each foot is probed numerically: starting from the
default (stance) tip position, the desired tip is marched outward along
each bearing of a radial grid, re-solving the inverse kinematics every
step, until the solution violates joint limits or misses the target by
more than a tolerance. Stacking radial slices at several heights gives a
volumetric workspace per leg.

A single planar slice at the walking height, clipped against the
neighbouring legs (perpendicular bisectors between default tips, so feet
can never be commanded into each other), reduced across legs and
mirror-symmetrized, is the *walkspace*: one polygon, identical for every
leg, that bounds all strides. Stride length, step frequency and body
velocity are tied together by v = stride * f / duty_factor.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kinematics as kin
from . import transforms
from .model import LegSpec, RobotSpec, dump_robot_spec


@dataclass
class SearchParams:
    """Grid resolution of the workspace search."""

    height_min: float | None = None   # body-frame z; None = walking plane only
    height_max: float | None = None
    height_step: float = 0.02         # m
    bearing_step: float = np.deg2rad(5.0)
    radial_step: float = 0.005        # m
    tip_tolerance: float = 0.002      # max |achieved - desired| (m)
    ik_iters: int = 50

    def validate(self):
        for name in ("height_step", "bearing_step", "radial_step", "tip_tolerance"):
            if getattr(self, name) <= 0:
                raise ValueError(f"search.{name} must be > 0")

    def key_dict(self) -> dict:
        return {"height_min": self.height_min, "height_max": self.height_max,
                "height_step": self.height_step,
                "bearing_step": round(float(self.bearing_step), 12),
                "radial_step": self.radial_step,
                "tip_tolerance": self.tip_tolerance, "ik_iters": self.ik_iters}


def bearing_grid(step: float) -> np.ndarray:
    n = max(4, int(round(2.0 * np.pi / step)))
    return np.arange(n) * (2.0 * np.pi / n)


@dataclass
class WorkspaceSlice:
    height: float                 # body-frame z of the slice
    bearings: np.ndarray          # [0, 2pi), uniform
    radii: np.ndarray             # metres, same length as bearings


@dataclass
class LegWorkspace:
    """Radial slices (one per height) around one leg's default tip."""

    leg_id: int
    origin_xy: np.ndarray         # default tip, body frame
    slices: list[WorkspaceSlice] = field(default_factory=list)

    def slice_at(self, height: float) -> WorkspaceSlice:
        """Slice at the given height, linearly interpolated if needed."""
        hs = np.array([s.height for s in self.slices])
        if len(hs) == 0:
            raise ValueError(f"leg {self.leg_id}: empty workspace")
        idx = int(np.argmin(np.abs(hs - height)))
        if abs(hs[idx] - height) < 1e-9 or len(hs) == 1:
            return self.slices[idx]
        below = np.where(hs <= height)[0]
        above = np.where(hs >= height)[0]
        if len(below) == 0 or len(above) == 0:
            raise ValueError(
                f"leg {self.leg_id}: height {height} outside searched range")
        i, j = below[-1], above[0]
        if i == j:
            return self.slices[i]
        w = (height - hs[i]) / (hs[j] - hs[i])
        radii = (1 - w) * self.slices[i].radii + w * self.slices[j].radii
        return WorkspaceSlice(height, self.slices[i].bearings.copy(), radii)


@dataclass
class Walkspace:
    """The symmetric per-leg stride polygon at the walking height."""

    height: float
    bearings: np.ndarray
    radii: np.ndarray

    def radius_at(self, bearing: float) -> float:
        """Linear interpolation around the circular grid."""
        two_pi = 2.0 * np.pi
        b = float(bearing) % two_pi
        n = len(self.bearings)
        step = two_pi / n
        i = int(b // step) % n
        j = (i + 1) % n
        w = (b - i * step) / step
        return float((1 - w) * self.radii[i] + w * self.radii[j])

    def contains(self, offset_xy, margin: float = 0.0) -> bool:
        r = float(np.hypot(offset_xy[0], offset_xy[1]))
        if r == 0.0:
            return True
        return r <= self.radius_at(np.arctan2(offset_xy[1], offset_xy[0])) - margin

    def clamp(self, offset_xy) -> np.ndarray:
        """Radially clamp a planar offset from the default tip."""
        off = np.asarray(offset_xy, dtype=float)
        r = float(np.hypot(off[0], off[1]))
        if r == 0.0:
            return off
        rmax = self.radius_at(np.arctan2(off[1], off[0]))
        if r <= rmax:
            return off
        return off * (rmax / r)

    def polygon(self) -> np.ndarray:
        """(n, 2) vertices relative to the default tip."""
        return np.stack([self.radii * np.cos(self.bearings),
                         self.radii * np.sin(self.bearings)], axis=1)


def _probe_heights(leg: LegSpec, search: SearchParams) -> np.ndarray:
    z0 = leg.default_tip[2]
    h_min = z0 if search.height_min is None else search.height_min
    h_max = z0 if search.height_max is None else search.height_max
    if h_max < h_min:
        raise ValueError("search.height_max < search.height_min")
    n = int(round((h_max - h_min) / search.height_step)) + 1
    return np.linspace(h_min, h_max, max(n, 1))


def generate_workspace(robot: RobotSpec, leg: LegSpec,
                       search: SearchParams | None = None) -> LegWorkspace:
    """Probe the reachable radius around the default tip for every
    (height, bearing) pair of the search grid.

    The recorded radius is the distance of the furthest probe the solver
    reached within tolerance and joint limits; the next probe outward is
    the one that failed.
    """
    search = search or SearchParams()
    search.validate()
    bearings = bearing_grid(search.bearing_step)
    tip0 = leg.default_tip
    ws = LegWorkspace(leg_id=leg.id, origin_xy=tip0[:2].copy())

    # centre of each slice must be reachable before probing outward
    home = leg.home_angles()
    for h in _probe_heights(leg, search):
        centre_body = np.array([tip0[0], tip0[1], h])
        centre_leg = transforms.apply(leg.base_frame_inv, centre_body)
        centre_res = kin.solve_ik(leg, home, centre_leg,
                                  tolerance=0.5 * search.tip_tolerance,
                                  max_iters=search.ik_iters,
                                  lam=robot.ik_lambda, restarts=3)
        if abs(h - tip0[2]) < 1e-9 and not centre_res.converged:
            raise ValueError(
                f"leg {leg.id}: default tip position is not reachable "
                f"(residual {centre_res.error:.4f} m)")
        radii = np.zeros(len(bearings))
        if centre_res.converged:
            for bi, bearing in enumerate(bearings):
                direction = np.array([np.cos(bearing), np.sin(bearing), 0.0])
                q = centre_res.q.copy()
                dist = 0.0
                while True:
                    nxt = dist + search.radial_step
                    target_body = centre_body + nxt * direction
                    target_leg = transforms.apply(leg.base_frame_inv, target_body)
                    # warm start from the last probe; reseed only when that
                    # stalls (e.g. marching through a fold singularity)
                    res = kin.solve_ik(leg, q, target_leg,
                                       tolerance=0.5 * search.tip_tolerance,
                                       max_iters=search.ik_iters,
                                       lam=robot.ik_lambda, restarts=0)
                    if res.error > search.tip_tolerance:
                        res = kin.solve_ik(leg, q, target_leg,
                                           tolerance=0.5 * search.tip_tolerance,
                                           max_iters=8 * search.ik_iters,
                                           lam=robot.ik_lambda, restarts=3)
                    if res.error > search.tip_tolerance:
                        break
                    q = res.q
                    dist = nxt
                radii[bi] = dist
        ws.slices.append(WorkspaceSlice(h, bearings.copy(), radii))
    return ws


def _restrict_nonoverlapping(robot: RobotSpec, leg_ws: LegWorkspace,
                             sl: WorkspaceSlice) -> np.ndarray:
    """Clip a slice at the perpendicular bisector toward every other leg's
    default tip, guaranteeing disjoint per-leg areas."""
    radii = sl.radii.copy()
    own = leg_ws.origin_xy
    units = np.stack([np.cos(sl.bearings), np.sin(sl.bearings)], axis=1)
    for other in robot.legs:
        if other.id == leg_ws.leg_id:
            continue
        d = other.default_tip[:2] - own
        dist = np.linalg.norm(d)
        if dist < 1e-9:
            continue
        d_hat = d / dist
        along = units @ d_hat
        mask = along > 1e-9
        radii[mask] = np.minimum(radii[mask], (0.5 * dist) / along[mask])
    return radii


def derive_walkspace(robot: RobotSpec, workspaces: dict[int, LegWorkspace],
                     body_height: float | None = None) -> Walkspace:
    """Common stride polygon: per-bearing minimum of all legs' restricted
    slices, then mirrored across the x axis so left/right strides match."""
    if body_height is None:
        height = float(np.mean([leg.default_tip[2] for leg in robot.legs]))
    else:
        height = -abs(body_height)
    radii = None
    bearings = None
    for leg in robot.legs:
        ws = workspaces[leg.id]
        sl = ws.slice_at(height)
        restricted = _restrict_nonoverlapping(robot, ws, sl)
        if radii is None:
            bearings, radii = sl.bearings, restricted
        else:
            if len(sl.bearings) != len(bearings):
                raise ValueError("workspaces use different bearing grids")
            radii = np.minimum(radii, restricted)
    if radii is None:
        raise ValueError("no legs")
    # mirror symmetry about the x axis: radius(a) == radius(-a)
    n = len(bearings)
    mirrored = radii[(n - np.arange(n)) % n]
    return Walkspace(height, bearings, np.minimum(radii, mirrored))


def body_velocity(stride_length: float, step_frequency: float,
                  duty_factor: float) -> float:
    """Body speed achieved by a given stride length and step frequency."""
    if not 0.0 < duty_factor < 1.0:
        raise ValueError(f"duty factor must be in (0, 1), got {duty_factor}")
    if stride_length < 0.0:
        raise ValueError(f"stride length must be >= 0, got {stride_length}")
    if step_frequency <= 0.0:
        raise ValueError(f"step frequency must be > 0, got {step_frequency}")
    return stride_length * step_frequency / duty_factor


def stride_for_velocity(v_body: float, step_frequency: float,
                        duty_factor: float) -> float:
    """Inverse of :func:`body_velocity`."""
    return v_body * duty_factor / step_frequency


def leg_stride_vectors(robot: RobotSpec, v_xy, omega_z: float,
                       duty_factor: float, step_frequency: float) -> dict[int, np.ndarray]:
    """Planar stride per leg for a commanded planar twist: the linear part
    plus the turning contribution omega x r at each default tip."""
    scale = duty_factor / step_frequency
    out = {}
    for leg in robot.legs:
        r = leg.default_tip
        vel = np.array([v_xy[0] - omega_z * r[1], v_xy[1] + omega_z * r[0]])
        out[leg.id] = vel * scale
    return out


def limit_velocity(v_desired, walkspace: Walkspace, step_frequency: float,
                   duty_factor: float, robot: RobotSpec) -> np.ndarray:
    """Uniformly scale a commanded (vx, vy, wz) so every leg's stride
    chord (centred on its default tip) fits inside the walkspace. The
    commanded direction is preserved; output equals input when already
    feasible."""
    v = np.asarray(v_desired, dtype=float)
    strides = leg_stride_vectors(robot, v[:2], v[2], duty_factor, step_frequency)
    scale = 1.0
    for s in strides.values():
        length = float(np.hypot(s[0], s[1]))
        if length < 1e-12:
            continue
        bearing = np.arctan2(s[1], s[0])
        half_chord = min(walkspace.radius_at(bearing),
                         walkspace.radius_at(bearing + np.pi))
        max_len = 2.0 * half_chord
        if length > max_len:
            scale = min(scale, max_len / length)
    return v * scale


# ---------------------------------------------------------------------------
# caching

def workspace_cache_key(robot: RobotSpec, search: SearchParams) -> str:
    payload = dump_robot_spec(robot) + json.dumps(search.key_dict(), sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def save_workspaces(path: Path, key: str,
                    workspaces: dict[int, LegWorkspace]):
    doc = {"key": key, "legs": []}
    for ws in workspaces.values():
        doc["legs"].append({
            "id": ws.leg_id,
            "origin_xy": ws.origin_xy.tolist(),
            "slices": [{"height": s.height,
                        "bearings": s.bearings.tolist(),
                        "radii": s.radii.tolist()} for s in ws.slices],
        })
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc))


def load_workspaces(path: Path, key: str) -> dict[int, LegWorkspace] | None:
    if not path.exists():
        return None
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError:
        return None
    if doc.get("key") != key:
        return None
    out = {}
    for entry in doc["legs"]:
        ws = LegWorkspace(entry["id"], np.array(entry["origin_xy"]))
        for s in entry["slices"]:
            ws.slices.append(WorkspaceSlice(s["height"],
                                            np.array(s["bearings"]),
                                            np.array(s["radii"])))
        out[ws.leg_id] = ws
    return out


def compute_workspaces(robot: RobotSpec, search: SearchParams | None = None,
                       cache_dir: str | Path | None = None
                       ) -> dict[int, LegWorkspace]:
    """All legs' workspaces, via the on-disk cache when one is given."""
    search = search or SearchParams()
    key = workspace_cache_key(robot, search)
    cache_path = None
    if cache_dir is not None:
        cache_path = Path(cache_dir) / f"workspace_{robot.name}_{key}.json"
        cached = load_workspaces(cache_path, key)
        if cached is not None and set(cached) == {leg.id for leg in robot.legs}:
            return cached
    out = {leg.id: generate_workspace(robot, leg, search) for leg in robot.legs}
    if cache_path is not None:
        save_workspaces(cache_path, key, out)
    return out
