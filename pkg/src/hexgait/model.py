"""Robot description, gait library and controller parameter loading.

Configs are human-editable YAML. A robot file describes the body, the legs
(as serial chains of revolute joints with classic four-parameter link
descriptions), controller parameters and optional startup/shutdown
sequences. A gait file is a list of stance/swing phase definitions.

Everything returned by the loaders is validated eagerly: out-of-range
values raise, they are never clamped.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import yaml

from . import transforms

MAX_LEGS = 8
MAX_JOINTS_PER_LEG = 6


class ConfigError(ValueError):
    """Base class for config loading failures."""


class ConfigParseError(ConfigError):
    """The document is not well-formed YAML / not the expected shape."""


class ConfigValidationError(ConfigError):
    """A field value violates an invariant; message names the field."""


@dataclass
class DHParam:
    """One link of a serial chain: rotation about z (theta), translation
    along z (d), translation along x (a), rotation about x (alpha).

    ``theta`` is a fixed offset; the joint variable q is added to it at
    evaluation time (revolute joints only).
    """

    theta: float
    d: float
    a: float
    alpha: float
    actuated: str = "theta"


@dataclass
class JointSpec:
    name: str
    position_min: float
    position_max: float
    velocity_max: float
    jla_weight: float = 1.0
    home_angle: float = 0.0
    packed_angle: float = 0.0

    @property
    def centre(self) -> float:
        return 0.5 * (self.position_min + self.position_max)

    @property
    def range(self) -> float:
        return self.position_max - self.position_min


@dataclass
class LegSpec:
    """A single leg: a static base frame offset from the body plus an
    ordered chain of (joint, link) pairs. Leg ids run 1..8 clockwise from
    the front right leg.
    """

    id: int
    base_xyz: tuple[float, float, float]
    base_rpy: tuple[float, float, float]
    joints: list[JointSpec]
    dh: list[DHParam]
    default_tip_position: tuple[float, float, float]

    def __post_init__(self):
        self._base_frame = transforms.from_xyz_rpy(self.base_xyz, self.base_rpy)
        self._base_frame_inv = transforms.invert(self._base_frame)
        # constant link-parameter arrays, precomputed for the kinematics
        self._dh_theta = np.array([p.theta for p in self.dh])
        self._dh_d = np.array([p.d for p in self.dh])
        self._dh_a = np.array([p.a for p in self.dh])
        alpha = np.array([p.alpha for p in self.dh])
        self._dh_ca = np.cos(alpha)
        self._dh_sa = np.sin(alpha)
        self._jla_centre = np.array([j.centre for j in self.joints])
        self._jla_span = np.array([j.range for j in self.joints])
        self._jla_weight = np.array([j.jla_weight for j in self.joints])

    @property
    def base_frame(self) -> np.ndarray:
        return self._base_frame

    @property
    def base_frame_inv(self) -> np.ndarray:
        return self._base_frame_inv

    @property
    def joint_count(self) -> int:
        return len(self.joints)

    @property
    def default_tip(self) -> np.ndarray:
        return np.asarray(self.default_tip_position, dtype=float)

    def default_tip_leg_frame(self) -> np.ndarray:
        return transforms.apply(self._base_frame_inv, self.default_tip)

    @property
    def reach(self) -> float:
        """Upper bound on tip distance from the leg frame origin."""
        return sum(abs(p.a) + abs(p.d) for p in self.dh)

    def home_angles(self) -> np.ndarray:
        return np.array([j.home_angle for j in self.joints])

    def packed_angles(self) -> np.ndarray:
        return np.array([j.packed_angle for j in self.joints])

    def position_limits(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([j.position_min for j in self.joints])
        hi = np.array([j.position_max for j in self.joints])
        return lo, hi

    def velocity_limits(self) -> np.ndarray:
        return np.array([j.velocity_max for j in self.joints])


@dataclass
class PIDGains:
    kp: float = 0.5
    ki: float = 1.0
    kd: float = 0.05


@dataclass
class AdmittanceParams:
    m_virt: float = 0.1      # kg
    b_virt: float = 5.0      # N*s/m
    c_virt: float = 1000.0   # N/m
    enabled: bool = False


@dataclass
class JLAParams:
    p: int = 2
    position_weight: float = 1.0
    velocity_weight: float = 0.0
    gradient_cap: float = 0.1   # max norm of the null-space pull per step


@dataclass
class PowerParams:
    """Electrical power proxy: idle draw plus torque-holding and
    motion-dependent terms."""

    idle: float = 28.0       # W
    k_hold: float = 3.0      # W per N*m of held torque
    k_motion: float = 2.0    # W per N*m*rad/s of mechanical output


@dataclass
class SequenceSpec:
    """Named list of whole-robot joint keyframes played sequentially."""

    name: str
    keyframes: list[tuple[dict[int, list[float]], float]]  # (angles per leg id, duration s)


@dataclass
class RobotSpec:
    name: str
    legs: list[LegSpec]
    mass: float
    body_clearance: float
    step_clearance: float
    step_frequency: float
    ik_lambda: float = 0.05
    leg_link_mass: float = 0.0   # kg; point mass per leg for gravity torques
    max_translation: tuple[float, float, float] = (0.05, 0.05, 0.05)
    max_rotation: tuple[float, float, float] = (0.2, 0.2, 0.3)
    imu_pid: PIDGains = field(default_factory=PIDGains)
    admittance: AdmittanceParams = field(default_factory=AdmittanceParams)
    jla: JLAParams = field(default_factory=JLAParams)
    power: PowerParams = field(default_factory=PowerParams)
    swing_width: float = 0.0
    swing_depth: float = 0.0
    sequences: dict[str, SequenceSpec] = field(default_factory=dict)

    @property
    def leg_count(self) -> int:
        return len(self.legs)

    def leg_by_id(self, leg_id: int) -> LegSpec:
        for leg in self.legs:
            if leg.id == leg_id:
                return leg
        raise KeyError(f"unknown leg id {leg_id}")

    def leg_index(self, leg_id: int) -> int:
        for i, leg in enumerate(self.legs):
            if leg.id == leg_id:
                return i
        raise KeyError(f"unknown leg id {leg_id}")


@dataclass
class GaitSpec:
    """Stance/swing split and per-leg phase offsets, in integer phase units."""

    name: str
    stance_phase: int
    swing_phase: int
    phase_offset: int
    offset_multiplier: list[int]

    @property
    def period(self) -> int:
        return self.stance_phase + self.swing_phase

    @property
    def duty_factor(self) -> float:
        return self.stance_phase / self.period

    def leg_offset(self, leg_index: int) -> int:
        if not 0 <= leg_index < len(self.offset_multiplier):
            raise KeyError(f"unknown leg index {leg_index} for gait '{self.name}'")
        return self.offset_multiplier[leg_index] * self.phase_offset


# ---------------------------------------------------------------------------
# validation helpers

def _require(cond: bool, field_name: str, message: str):
    if not cond:
        raise ConfigValidationError(f"{field_name}: {message}")


def _finite(value, field_name: str) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigValidationError(f"{field_name}: not a number ({value!r})") from None
    if not np.isfinite(v):
        raise ConfigValidationError(f"{field_name}: not finite ({value!r})")
    return v


def _vec3(value, field_name: str) -> tuple[float, float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ConfigValidationError(f"{field_name}: expected a 3-vector")
    return tuple(_finite(v, f"{field_name}[{i}]") for i, v in enumerate(value))


def validate_dh(p: DHParam, where: str):
    for name in ("theta", "d", "a", "alpha"):
        _finite(getattr(p, name), f"{where}.{name}")
    _require(p.a >= 0.0, f"{where}.a", f"must be >= 0, got {p.a}")
    _require(p.actuated == "theta",
             f"{where}.actuated",
             f"only revolute (theta) joints are supported, got {p.actuated!r}")


def validate_joint(j: JointSpec, where: str):
    _require(j.position_min < j.position_max, f"{where}.limits",
             f"min {j.position_min} must be < max {j.position_max}")
    _require(j.velocity_max > 0.0, f"{where}.velocity_max",
             f"must be > 0, got {j.velocity_max}")
    _require(j.jla_weight >= 0.0, f"{where}.jla_weight",
             f"must be >= 0, got {j.jla_weight}")
    for name in ("home_angle", "packed_angle"):
        v = getattr(j, name)
        _require(j.position_min <= v <= j.position_max, f"{where}.{name}",
                 f"{v} outside position limits [{j.position_min}, {j.position_max}]")


def validate_leg(leg: LegSpec, where: str):
    _require(1 <= leg.id <= MAX_LEGS, f"{where}.id",
             f"leg id must be 1..{MAX_LEGS}, got {leg.id}")
    n = len(leg.joints)
    _require(1 <= n <= MAX_JOINTS_PER_LEG, f"{where}.joints",
             f"joint count must be 1..{MAX_JOINTS_PER_LEG}, got {n}")
    _require(len(leg.dh) == n, f"{where}.joints",
             "every joint needs exactly one link description")
    for i, (j, p) in enumerate(zip(leg.joints, leg.dh)):
        validate_joint(j, f"{where}.joints[{i}]({j.name})")
        validate_dh(p, f"{where}.joints[{i}]({j.name}).dh")


def validate_robot(spec: RobotSpec):
    _require(1 <= spec.leg_count <= MAX_LEGS, "robot.legs",
             f"leg count exceeds {MAX_LEGS}" if spec.leg_count > MAX_LEGS
             else f"at least one leg required, got {spec.leg_count}")
    ids = [leg.id for leg in spec.legs]
    _require(len(set(ids)) == len(ids), "robot.legs", f"duplicate leg ids {ids}")
    _require(spec.mass > 0.0, "robot.mass", f"must be > 0, got {spec.mass}")
    _require(spec.body_clearance > 0.0, "robot.body_clearance",
             f"must be > 0, got {spec.body_clearance}")
    _require(spec.step_clearance > 0.0, "robot.step_clearance",
             f"must be > 0, got {spec.step_clearance}")
    _require(spec.step_frequency > 0.0, "robot.step_frequency",
             f"must be > 0, got {spec.step_frequency}")
    _require(spec.ik_lambda > 0.0, "robot.ik_lambda",
             f"must be > 0, got {spec.ik_lambda}")
    _require(spec.leg_link_mass >= 0.0, "robot.leg_link_mass",
             f"must be >= 0, got {spec.leg_link_mass}")
    _require(spec.jla.p >= 2 and spec.jla.p % 2 == 0, "robot.jla.p",
             f"must be an even integer >= 2, got {spec.jla.p}")
    _require(spec.admittance.m_virt > 0.0, "robot.admittance.m_virt",
             f"must be > 0, got {spec.admittance.m_virt}")
    _require(spec.admittance.b_virt > 0.0, "robot.admittance.b_virt",
             f"must be > 0, got {spec.admittance.b_virt}")
    _require(spec.admittance.c_virt > 0.0, "robot.admittance.c_virt",
             f"must be > 0, got {spec.admittance.c_virt}")
    for i, leg in enumerate(spec.legs):
        validate_leg(leg, f"robot.legs[{i}]")
    for seq in spec.sequences.values():
        validate_sequence(seq, spec)


def validate_sequence(seq: SequenceSpec, robot: RobotSpec):
    _require(len(seq.keyframes) > 0, f"sequence.{seq.name}", "no keyframes")
    for k, (angles, duration) in enumerate(seq.keyframes):
        where = f"sequence.{seq.name}.keyframes[{k}]"
        _require(duration > 0.0, f"{where}.duration", f"must be > 0, got {duration}")
        for leg in robot.legs:
            _require(leg.id in angles, where, f"missing angles for leg {leg.id}")
            vals = angles[leg.id]
            _require(len(vals) == leg.joint_count, where,
                     f"leg {leg.id} expects {leg.joint_count} angles, got {len(vals)}")
            for j, (v, joint) in enumerate(zip(vals, leg.joints)):
                _require(joint.position_min <= v <= joint.position_max,
                         f"{where}.leg{leg.id}[{j}]",
                         f"{v} outside joint limits of {joint.name}")


def validate_gait(g: GaitSpec):
    where = f"gait.{g.name}"
    _require(g.period > 0, where, "stance + swing period must be > 0")
    _require(0 < g.stance_phase < g.period, f"{where}.stance_phase",
             f"duty factor must be in (0,1); stance {g.stance_phase} of period {g.period}")
    _require(len(g.offset_multiplier) >= 1, f"{where}.offset_multiplier", "empty")
    for i, m in enumerate(g.offset_multiplier):
        off = m * g.phase_offset
        _require(0 <= off < g.period, f"{where}.offset_multiplier[{i}]",
                 f"offset {off} outside [0, {g.period})")


# ---------------------------------------------------------------------------
# loading

def _as_mapping(node, where: str) -> dict:
    if not isinstance(node, dict):
        raise ConfigParseError(f"{where}: expected a mapping")
    return node


def _parse_joint(node, where: str) -> tuple[JointSpec, DHParam]:
    node = _as_mapping(node, where)
    try:
        dh_node = _as_mapping(node["dh"], f"{where}.dh")
        lim = _as_mapping(node["limits"], f"{where}.limits")
        joint = JointSpec(
            name=str(node["name"]),
            position_min=_finite(lim["min"], f"{where}.limits.min"),
            position_max=_finite(lim["max"], f"{where}.limits.max"),
            velocity_max=_finite(node["velocity_max"], f"{where}.velocity_max"),
            jla_weight=_finite(node.get("jla_weight", 1.0), f"{where}.jla_weight"),
            home_angle=_finite(node.get("home", 0.0), f"{where}.home"),
            packed_angle=_finite(node.get("packed", 0.0), f"{where}.packed"),
        )
        dh = DHParam(
            theta=_finite(dh_node.get("theta", 0.0), f"{where}.dh.theta"),
            d=_finite(dh_node.get("d", 0.0), f"{where}.dh.d"),
            a=_finite(dh_node.get("a", 0.0), f"{where}.dh.a"),
            alpha=_finite(dh_node.get("alpha", 0.0), f"{where}.dh.alpha"),
            actuated=str(dh_node.get("actuated", "theta")),
        )
    except KeyError as e:
        raise ConfigParseError(f"{where}: missing field {e.args[0]!r}") from None
    return joint, dh


def _parse_leg(node, where: str) -> LegSpec:
    node = _as_mapping(node, where)
    try:
        base = _as_mapping(node.get("base_frame", {}), f"{where}.base_frame")
        joints, dh = [], []
        for i, jnode in enumerate(node["joints"]):
            j, p = _parse_joint(jnode, f"{where}.joints[{i}]")
            joints.append(j)
            dh.append(p)
        return LegSpec(
            id=int(node["id"]),
            base_xyz=_vec3(base.get("xyz", [0, 0, 0]), f"{where}.base_frame.xyz"),
            base_rpy=_vec3(base.get("rpy", [0, 0, 0]), f"{where}.base_frame.rpy"),
            joints=joints,
            dh=dh,
            default_tip_position=_vec3(node["default_tip_position"],
                                       f"{where}.default_tip_position"),
        )
    except KeyError as e:
        raise ConfigParseError(f"{where}: missing field {e.args[0]!r}") from None


def _parse_sequence(node, where: str) -> SequenceSpec:
    node = _as_mapping(node, where)
    try:
        frames = []
        for k, fnode in enumerate(node["keyframes"]):
            fnode = _as_mapping(fnode, f"{where}.keyframes[{k}]")
            angles = {int(leg_id): [float(v) for v in vals]
                      for leg_id, vals in _as_mapping(
                          fnode["angles"], f"{where}.keyframes[{k}].angles").items()}
            frames.append((angles, _finite(fnode["duration"],
                                           f"{where}.keyframes[{k}].duration")))
        return SequenceSpec(name=str(node["name"]), keyframes=frames)
    except KeyError as e:
        raise ConfigParseError(f"{where}: missing field {e.args[0]!r}") from None


def load_robot_spec(text: str) -> RobotSpec:
    """Parse and validate a robot description document."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigParseError(f"malformed YAML: {e}") from None
    doc = _as_mapping(doc, "document")
    node = _as_mapping(doc.get("robot", doc), "robot")
    try:
        mmp = _as_mapping(node.get("max_manual_pose", {}), "robot.max_manual_pose")
        pid = _as_mapping(node.get("imu_pid_gains", {}), "robot.imu_pid_gains")
        adm = _as_mapping(node.get("admittance", {}), "robot.admittance")
        jla = _as_mapping(node.get("jla", {}), "robot.jla")
        power = _as_mapping(node.get("power", {}), "robot.power")
        spec = RobotSpec(
            name=str(node["name"]),
            legs=[_parse_leg(ln, f"robot.legs[{i}]")
                  for i, ln in enumerate(node["legs"])],
            mass=_finite(node["mass"], "robot.mass"),
            body_clearance=_finite(node["body_clearance"], "robot.body_clearance"),
            step_clearance=_finite(node["step_clearance"], "robot.step_clearance"),
            step_frequency=_finite(node["step_frequency"], "robot.step_frequency"),
            ik_lambda=_finite(node.get("ik_lambda", 0.05), "robot.ik_lambda"),
            leg_link_mass=_finite(node.get("leg_link_mass", 0.0),
                                  "robot.leg_link_mass"),
            max_translation=_vec3(mmp.get("translation", [0.05, 0.05, 0.05]),
                                  "robot.max_manual_pose.translation"),
            max_rotation=_vec3(mmp.get("rotation", [0.2, 0.2, 0.3]),
                               "robot.max_manual_pose.rotation"),
            imu_pid=PIDGains(kp=_finite(pid.get("kp", 0.5), "robot.imu_pid_gains.kp"),
                             ki=_finite(pid.get("ki", 1.0), "robot.imu_pid_gains.ki"),
                             kd=_finite(pid.get("kd", 0.05), "robot.imu_pid_gains.kd")),
            admittance=AdmittanceParams(
                m_virt=_finite(adm.get("m_virt", 0.1), "robot.admittance.m_virt"),
                b_virt=_finite(adm.get("b_virt", 5.0), "robot.admittance.b_virt"),
                c_virt=_finite(adm.get("c_virt", 1000.0), "robot.admittance.c_virt"),
                enabled=bool(adm.get("enabled", False))),
            jla=JLAParams(p=int(jla.get("p", 2)),
                          position_weight=_finite(jla.get("position_weight", 1.0),
                                                  "robot.jla.position_weight"),
                          velocity_weight=_finite(jla.get("velocity_weight", 0.0),
                                                  "robot.jla.velocity_weight"),
                          gradient_cap=_finite(jla.get("gradient_cap", 0.1),
                                               "robot.jla.gradient_cap")),
            power=PowerParams(idle=_finite(power.get("idle", 28.0), "robot.power.idle"),
                              k_hold=_finite(power.get("k_hold", 3.0), "robot.power.k_hold"),
                              k_motion=_finite(power.get("k_motion", 2.0),
                                               "robot.power.k_motion")),
            swing_width=_finite(node.get("swing_width", 0.0), "robot.swing_width"),
            swing_depth=_finite(node.get("swing_depth", 0.0), "robot.swing_depth"),
            sequences={str(sn["name"]): _parse_sequence(sn, f"robot.sequences[{i}]")
                       for i, sn in enumerate(node.get("sequences", []))},
        )
    except KeyError as e:
        raise ConfigParseError(f"robot: missing field {e.args[0]!r}") from None
    except TypeError as e:
        raise ConfigParseError(f"robot: malformed structure: {e}") from None
    validate_robot(spec)
    return spec


def load_gait_library(text: str) -> list[GaitSpec]:
    """Parse and validate a gait library document."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigParseError(f"malformed YAML: {e}") from None
    doc = _as_mapping(doc, "document")
    gaits = []
    for i, node in enumerate(doc.get("gaits", [])):
        node = _as_mapping(node, f"gaits[{i}]")
        try:
            g = GaitSpec(
                name=str(node["name"]),
                stance_phase=int(node["stance_phase"]),
                swing_phase=int(node["swing_phase"]),
                phase_offset=int(node["phase_offset"]),
                offset_multiplier=[int(m) for m in node["offset_multiplier"]],
            )
        except KeyError as e:
            raise ConfigParseError(f"gaits[{i}]: missing field {e.args[0]!r}") from None
        except (TypeError, ValueError) as e:
            raise ConfigParseError(f"gaits[{i}]: malformed structure: {e}") from None
        validate_gait(g)
        gaits.append(g)
    if not gaits:
        raise ConfigParseError("document defines no gaits")
    return gaits


def load_robot_file(path: str) -> RobotSpec:
    with open(path, "r", encoding="utf-8") as f:
        return load_robot_spec(f.read())


def load_gait_file(path: str) -> list[GaitSpec]:
    with open(path, "r", encoding="utf-8") as f:
        return load_gait_library(f.read())


def default_gait_library() -> list[GaitSpec]:
    """The packaged wave/amble/ripple/tripod/bipod library."""
    text = resources.files("hexgait.configs").joinpath("gaits.yaml").read_text()
    return load_gait_library(text)


def packaged_robot(name: str) -> RobotSpec:
    """Load one of the robot descriptions shipped with the package."""
    text = resources.files("hexgait.configs").joinpath(f"{name}.yaml").read_text()
    return load_robot_spec(text)


# ---------------------------------------------------------------------------
# serialization (inverse of the loaders; round-trips exactly)

def robot_spec_to_dict(spec: RobotSpec) -> dict:
    return {"robot": {
        "name": spec.name,
        "mass": spec.mass,
        "body_clearance": spec.body_clearance,
        "step_clearance": spec.step_clearance,
        "step_frequency": spec.step_frequency,
        "ik_lambda": spec.ik_lambda,
        "leg_link_mass": spec.leg_link_mass,
        "max_manual_pose": {"translation": list(spec.max_translation),
                            "rotation": list(spec.max_rotation)},
        "imu_pid_gains": {"kp": spec.imu_pid.kp, "ki": spec.imu_pid.ki,
                          "kd": spec.imu_pid.kd},
        "admittance": {"m_virt": spec.admittance.m_virt,
                       "b_virt": spec.admittance.b_virt,
                       "c_virt": spec.admittance.c_virt,
                       "enabled": spec.admittance.enabled},
        "jla": {"p": spec.jla.p,
                "position_weight": spec.jla.position_weight,
                "velocity_weight": spec.jla.velocity_weight,
                "gradient_cap": spec.jla.gradient_cap},
        "power": {"idle": spec.power.idle, "k_hold": spec.power.k_hold,
                  "k_motion": spec.power.k_motion},
        "swing_width": spec.swing_width,
        "swing_depth": spec.swing_depth,
        "legs": [{
            "id": leg.id,
            "base_frame": {"xyz": list(leg.base_xyz), "rpy": list(leg.base_rpy)},
            "default_tip_position": list(leg.default_tip_position),
            "joints": [{
                "name": j.name,
                "dh": {"theta": p.theta, "d": p.d, "a": p.a, "alpha": p.alpha,
                       "actuated": p.actuated},
                "limits": {"min": j.position_min, "max": j.position_max},
                "velocity_max": j.velocity_max,
                "jla_weight": j.jla_weight,
                "home": j.home_angle,
                "packed": j.packed_angle,
            } for j, p in zip(leg.joints, leg.dh)],
        } for leg in spec.legs],
        "sequences": [{
            "name": seq.name,
            "keyframes": [{"angles": {lid: list(v) for lid, v in angles.items()},
                           "duration": duration}
                          for angles, duration in seq.keyframes],
        } for seq in spec.sequences.values()],
    }}


def dump_robot_spec(spec: RobotSpec) -> str:
    return yaml.safe_dump(robot_spec_to_dict(spec), sort_keys=False)


def gait_library_to_dict(gaits: list[GaitSpec]) -> dict:
    return {"gaits": [{
        "name": g.name,
        "stance_phase": g.stance_phase,
        "swing_phase": g.swing_phase,
        "phase_offset": g.phase_offset,
        "offset_multiplier": list(g.offset_multiplier),
    } for g in gaits]}


def dump_gait_library(gaits: list[GaitSpec]) -> str:
    return yaml.safe_dump(gait_library_to_dict(gaits), sort_keys=False)
