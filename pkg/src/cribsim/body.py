"""The infant body: 53-motor articulated model, touch skin, and the
proprioceptive / vestibular / interoceptive channels.

The body belongs to the environment: it registers its collision geometry
as scene entities (group "infant") and the agent only ever sees the
sensor vectors. Motor slots, in fixed order:

  0-2   eye control (pan deg, tilt deg, focal m) - absolute targets
  3-5   neck          6-8   torso (slot 8 doubles as the vocal channel)
  9-15  left arm      16-22 right arm
  23-31 left hand     32-40 right hand
  41-46 left leg      47-52 right leg
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernels, world
from .errors import SceneError
from .geometry import quat_from_axis_angle, quat_rotate, quat_rotate_inverse

N_MOTORS = 53
N_JOINTS = 50  # slots 3..52
N_TOUCH = 2110
N_PROPRIO = 2 * N_MOTORS

EYE_PAN_RANGE = (-45.0, 45.0)
EYE_TILT_RANGE = (-40.0, 40.0)
EYE_FOCAL_RANGE = (0.1, 10.0)
EYE_ANGLE_SLEW = 500.0  # deg/s
EYE_FOCAL_SLEW = 20.0   # m/s

VOCAL_SLOT = 8
VOCAL_THRESHOLD = 0.5

HUNGER_DECAY_UNITS = 10  # 1e-5 of a full stomach per step, in millionths
STOMACH_FULL_UNITS = 1_000_000

_AXES = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}
# geometry quat aligning a capsule's local z axis with the bone direction (-y)
_GEO_CAPSULE_Y = tuple(quat_from_axis_angle(np.array([1.0, 0.0, 0.0]), math.pi / 2))

_SKIN = (0.85, 0.65, 0.55)


@dataclass(frozen=True)
class JointSpec:
    slot: int
    name: str
    lo: float
    hi: float
    max_torque: float
    inertia: float
    damping: float

    @property
    def v_max(self) -> float:
        """Terminal velocity of the first-order update; used to normalize
        proprioceptive velocity."""
        return self.max_torque / (self.inertia * self.damping)


def _mirror(name: str) -> str:
    return name.replace("l_", "r_", 1)


def _arm_joints(prefix: str, base: int) -> list[tuple]:
    t = [
        (f"{prefix}shoulder_pitch", -2.6, 2.6, 2.0, 0.02, 5.0),
        (f"{prefix}shoulder_roll", -1.5, 2.6, 2.0, 0.02, 5.0),
        (f"{prefix}shoulder_yaw", -1.5, 1.5, 1.5, 0.02, 5.0),
        (f"{prefix}elbow", 0.0, 2.4, 1.5, 0.015, 5.0),
        (f"{prefix}wrist_pitch", -1.2, 1.2, 0.8, 0.008, 5.0),
        (f"{prefix}wrist_roll", -1.0, 1.0, 0.8, 0.008, 5.0),
        (f"{prefix}wrist_yaw", -0.8, 0.8, 0.8, 0.008, 5.0),
    ]
    return [(base + k,) + row for k, row in enumerate(t)]


def _hand_joints(prefix: str, base: int) -> list[tuple]:
    rows = []
    k = 0
    for digit in ("thumb", "index", "digits"):
        for link in ("prox", "mid", "dist"):
            rows.append((base + k, f"{prefix}{digit}_{link}", 0.0, 1.6, 0.2, 0.0005, 8.0))
            k += 1
    return rows


def _leg_joints(prefix: str, base: int) -> list[tuple]:
    t = [
        (f"{prefix}hip_pitch", -2.2, 1.8, 4.0, 0.05, 5.0),
        (f"{prefix}hip_roll", -1.0, 1.6, 4.0, 0.05, 5.0),
        (f"{prefix}hip_yaw", -1.2, 1.2, 3.0, 0.05, 5.0),
        (f"{prefix}knee", 0.0, 2.4, 3.0, 0.04, 5.0),
        (f"{prefix}ankle_pitch", -0.9, 0.9, 1.5, 0.02, 6.0),
        (f"{prefix}ankle_roll", -0.6, 0.6, 1.5, 0.02, 6.0),
    ]
    return [(base + k,) + row for k, row in enumerate(t)]


def build_joint_table() -> list[JointSpec]:
    rows = [
        (3, "neck_pitch", -0.9, 0.9, 3.0, 0.02, 5.0),
        (4, "neck_roll", -0.7, 0.7, 3.0, 0.02, 5.0),
        (5, "neck_yaw", -1.3, 1.3, 3.0, 0.02, 5.0),
        (6, "torso_pitch", -0.8, 1.2, 5.0, 0.1, 5.0),
        (7, "torso_roll", -0.7, 0.7, 5.0, 0.1, 5.0),
        # slot 8 is also the reserved vocalization channel
        (8, "torso_twist", -1.0, 1.0, 5.0, 0.1, 5.0),
    ]
    rows += _arm_joints("l_", 9)
    rows += _arm_joints("r_", 16)
    rows += _hand_joints("l_", 23)
    rows += _hand_joints("r_", 32)
    rows += _leg_joints("l_", 41)
    rows += _leg_joints("r_", 47)
    specs = [JointSpec(*row) for row in rows]
    assert [s.slot for s in specs] == list(range(3, 53))
    return specs


@dataclass(frozen=True)
class NodeDef:
    name: str
    parent: int
    mount: tuple
    axis: Optional[str]
    slot: int  # -1 for fixed frames
    geo_shape: Optional[world.Shape] = None
    geo_pos: tuple = (0.0, 0.0, 0.0)
    geo_quat: tuple = (1.0, 0.0, 0.0, 0.0)


def _limb_nodes(side: str, sign: float, chest: int, pelvis: int,
                start: int) -> list[NodeDef]:
    """Arm (7 DOF + 9 finger DOF) and leg (6 DOF) node chains for one side."""
    p = f"{side}_"
    slot_arm = 9 if side == "l" else 16
    slot_hand = 23 if side == "l" else 32
    slot_leg = 41 if side == "l" else 47
    n: list[NodeDef] = []

    def add(name, parent, mount, axis, slot, **geo) -> int:
        n.append(NodeDef(p + name, parent, mount, axis, slot, **geo))
        return start + len(n) - 1

    sp = add("shoulder_pitch", chest, (sign * 0.065, 0.08, 0.0), "x", slot_arm)
    sr = add("shoulder_roll", sp, (0, 0, 0), "z", slot_arm + 1)
    sy = add("shoulder_yaw", sr, (0, 0, 0), "y", slot_arm + 2,
             geo_shape=world.capsule(0.016, 0.032),
             geo_pos=(0.0, -0.045, 0.0), geo_quat=_GEO_CAPSULE_Y)
    el = add("elbow", sy, (0.0, -0.09, 0.0), "x", slot_arm + 3,
             geo_shape=world.capsule(0.014, 0.028),
             geo_pos=(0.0, -0.04, 0.0), geo_quat=_GEO_CAPSULE_Y)
    wp = add("wrist_pitch", el, (0.0, -0.08, 0.0), "x", slot_arm + 4)
    wr = add("wrist_roll", wp, (0, 0, 0), "z", slot_arm + 5)
    hand = add("wrist_yaw", wr, (0, 0, 0), "y", slot_arm + 6,
               geo_shape=world.sphere(0.025), geo_pos=(0.0, -0.02, 0.0))
    k = 0
    for digit, off in (("thumb", (sign * 0.018, -0.025, 0.012)),
                       ("index", (sign * 0.01, -0.04, 0.01)),
                       ("digits", (-sign * 0.008, -0.04, 0.0))):
        parent = hand
        for link in ("prox", "mid", "dist"):
            mount = off if link == "prox" else (0.0, -0.012, 0.0)
            parent = add(f"{digit}_{link}", parent, mount, "x", slot_hand + k)
            k += 1
    hp = add("hip_pitch", pelvis, (sign * 0.035, -0.04, 0.0), "x", slot_leg)
    hr = add("hip_roll", hp, (0, 0, 0), "z", slot_leg + 1)
    hy = add("hip_yaw", hr, (0, 0, 0), "y", slot_leg + 2,
             geo_shape=world.capsule(0.024, 0.036),
             geo_pos=(0.0, -0.05, 0.0), geo_quat=_GEO_CAPSULE_Y)
    kn = add("knee", hy, (0.0, -0.10, 0.0), "x", slot_leg + 3,
             geo_shape=world.capsule(0.019, 0.032),
             geo_pos=(0.0, -0.045, 0.0), geo_quat=_GEO_CAPSULE_Y)
    ap = add("ankle_pitch", kn, (0.0, -0.09, 0.0), "x", slot_leg + 4)
    add("ankle_roll", ap, (0, 0, 0), "z", slot_leg + 5,
        geo_shape=world.box(0.022, 0.012, 0.035),
        geo_pos=(0.0, -0.015, 0.012))
    return n


def build_node_table() -> list[NodeDef]:
    nodes = [
        NodeDef("pelvis", -1, (0, 0, 0), None, -1,
                geo_shape=world.capsule(0.045, 0.025),
                geo_pos=(0.0, 0.0, 0.0), geo_quat=_GEO_CAPSULE_Y),
        NodeDef("torso_pitch", 0, (0.0, 0.05, 0.0), "x", 6),
        NodeDef("torso_roll", 1, (0, 0, 0), "z", 7),
        NodeDef("torso_twist", 2, (0, 0, 0), "y", 8,
                geo_shape=world.capsule(0.05, 0.04),
                geo_pos=(0.0, 0.05, 0.0), geo_quat=_GEO_CAPSULE_Y),
        NodeDef("neck_pitch", 3, (0.0, 0.11, 0.0), "x", 3),
        NodeDef("neck_roll", 4, (0, 0, 0), "z", 4),
        NodeDef("neck_yaw", 5, (0, 0, 0), "y", 5,
                geo_shape=world.sphere(0.055), geo_pos=(0.0, 0.055, 0.0)),
    ]
    nodes += _limb_nodes("l", -1.0, chest=3, pelvis=0, start=7)
    nodes += _limb_nodes("r", 1.0, chest=3, pelvis=0, start=7 + 22)
    assert len(nodes) == 51
    return nodes


HEAD_NODE_NAME = "neck_yaw"

# touch regions: (region name, count, [(segment node name, sub-count)], site radius)
TOUCH_REGIONS = [
    ("head_face", 600, [("neck_yaw", 600)], 0.008),
    ("lips", 110, [("neck_yaw", 110)], 0.004),
    ("left_hand", 300, [("l_wrist_yaw", 300)], 0.006),
    ("right_hand", 300, [("r_wrist_yaw", 300)], 0.006),
    ("left_arm", 100, [("l_shoulder_yaw", 50), ("l_elbow", 50)], 0.015),
    ("right_arm", 100, [("r_shoulder_yaw", 50), ("r_elbow", 50)], 0.015),
    ("left_leg", 150, [("l_hip_yaw", 75), ("l_knee", 75)], 0.015),
    ("right_leg", 150, [("r_hip_yaw", 75), ("r_knee", 75)], 0.015),
    ("torso", 300, [("pelvis", 150), ("torso_twist", 150)], 0.02),
]

_GOLDEN = math.pi * (3.0 - math.sqrt(5.0))


def _sphere_cap_sites(n: int, radius: float, direction: np.ndarray,
                      cap_deg: float) -> np.ndarray:
    """n low-discrepancy points on the spherical cap of half-angle cap_deg
    around `direction` (golden-angle spiral)."""
    cmin = math.cos(math.radians(cap_deg))
    k = np.arange(n)
    z = 1.0 - (k + 0.5) / n * (1.0 - cmin)
    phi = k * _GOLDEN
    s = np.sqrt(1.0 - z * z)
    pts = np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)
    # rotate cap axis (+z) onto `direction`
    d = direction / np.linalg.norm(direction)
    if d[2] < 1.0 - 1e-12:
        axis = np.cross([0.0, 0.0, 1.0], d)
        na = np.linalg.norm(axis)
        if na < 1e-12:
            pts = pts * np.array([1.0, 1.0, -1.0])
        else:
            axis = axis / na
            ang = math.acos(max(-1.0, min(1.0, d[2])))
            q = quat_from_axis_angle(axis, ang)
            w, x, y, zq = q
            r = np.array([
                [1 - 2 * (y * y + zq * zq), 2 * (x * y - w * zq), 2 * (x * zq + w * y)],
                [2 * (x * y + w * zq), 1 - 2 * (x * x + zq * zq), 2 * (y * zq - w * x)],
                [2 * (x * zq - w * y), 2 * (y * zq + w * x), 1 - 2 * (x * x + y * y)],
            ])
            pts = pts @ r.T
    return pts * radius


def _capsule_side_sites(n: int, radius: float, half_len: float) -> np.ndarray:
    k = np.arange(n)
    z = -half_len + (k + 0.5) / n * (2.0 * half_len)
    phi = k * _GOLDEN
    return np.stack([radius * np.cos(phi), radius * np.sin(phi), z], axis=1)


class TouchLayout:
    """2,110 binary sensor sites bound to body segments.

    Sites are fixed at construction (independent of any scene RNG); the
    flat index order is the concatenation of TOUCH_REGIONS.
    """

    def __init__(self, nodes: Sequence[NodeDef], node_index: dict[str, int]):
        sites_local = []
        site_node = []
        site_radius = []
        self.region_ranges: dict[str, tuple[int, int]] = {}
        self.region_area: dict[str, float] = {}
        cursor = 0
        geo = {nd.name: nd for nd in nodes if nd.geo_shape is not None}

        def cap_area(r: float, cap_deg: float) -> float:
            return 2.0 * math.pi * r * r * (1.0 - math.cos(math.radians(cap_deg)))

        for region, count, segments, radius in TOUCH_REGIONS:
            assert sum(c for _, c in segments) == count
            area = 0.0
            for seg_name, sub in segments:
                nd = geo[seg_name]
                shp = nd.geo_shape
                if region == "head_face":
                    pts = _sphere_cap_sites(sub, shp.params[0],
                                            np.array([0.0, 0.0, 1.0]), 85.0)
                    area += cap_area(shp.params[0], 85.0)
                elif region == "lips":
                    # small dense patch low on the face
                    pts = _sphere_cap_sites(sub, shp.params[0],
                                            np.array([0.0, -0.35, 0.94]), 11.0)
                    area += cap_area(shp.params[0], 11.0)
                elif shp.kind == world.KIND_SPHERE:
                    pts = _sphere_cap_sites(sub, shp.params[0],
                                            np.array([0.0, 0.0, 1.0]), 180.0)
                    area += cap_area(shp.params[0], 180.0)
                else:
                    pts = _capsule_side_sites(sub, shp.params[0], shp.params[1])
                    area += 2.0 * math.pi * shp.params[0] * (2.0 * shp.params[1])
                sites_local.append(pts)
                site_node.extend([node_index[seg_name]] * sub)
                site_radius.extend([radius] * sub)
            self.region_ranges[region] = (cursor, cursor + count)
            self.region_area[region] = area
            cursor += count
        assert cursor == N_TOUCH
        self.sites_local = np.ascontiguousarray(np.concatenate(sites_local))
        self.site_node = np.ascontiguousarray(np.array(site_node, dtype=np.int32))
        self.site_radius = np.ascontiguousarray(np.array(site_radius, dtype=np.float64))

    def region_of(self, index: int) -> str:
        for name, (lo, hi) in self.region_ranges.items():
            if lo <= index < hi:
                return name
        raise IndexError(index)


class Body:
    """Mutable body state bound to a Scene; single-threaded like the scene."""

    def __init__(self, scene: world.Scene, root_pos=(0.0, 0.2, 0.0),
                 root_quat=(1.0, 0.0, 0.0, 0.0),
                 hunger_decay_units: int = HUNGER_DECAY_UNITS):
        self.scene = scene
        self.joints = build_joint_table()
        self.nodes = build_node_table()
        self.node_index = {nd.name: i for i, nd in enumerate(self.nodes)}
        self.root_pos = np.asarray(root_pos, dtype=float)
        self.root_quat = np.asarray(root_quat, dtype=float)
        self.root_locked = True
        self.hunger_decay_units = int(hunger_decay_units)

        # packed joint parameter arrays for the integrator (slots 3..52)
        self._lo = np.ascontiguousarray([j.lo for j in self.joints])
        self._hi = np.ascontiguousarray([j.hi for j in self.joints])
        self._max_torque = np.ascontiguousarray([j.max_torque for j in self.joints])
        self._inertia = np.ascontiguousarray([j.inertia for j in self.joints])
        self._damping = np.ascontiguousarray([j.damping for j in self.joints])

        # state: slot-indexed (0-2 eyes in native units, 3-52 radians)
        self.angles = np.zeros(N_MOTORS)
        self.vels = np.zeros(N_MOTORS)
        self.angles[2] = EYE_FOCAL_RANGE[0]  # eyes rest at nearest focus
        self.stomach_units = STOMACH_FULL_UNITS // 2
        self.vocalizing = False

        # FK buffers
        n = len(self.nodes)
        self._parents = np.ascontiguousarray(
            [nd.parent for nd in self.nodes], dtype=np.int32)
        self._mount_pos = np.ascontiguousarray([nd.mount for nd in self.nodes])
        self._mount_quat = np.ascontiguousarray(
            [(1.0, 0.0, 0.0, 0.0)] * n)
        self._axes = np.ascontiguousarray(
            [_AXES[nd.axis] if nd.axis else (0.0, 0.0, 0.0) for nd in self.nodes])
        self._joint_of = np.ascontiguousarray(
            [nd.slot - 3 if nd.slot >= 3 else -1 for nd in self.nodes], dtype=np.int32)
        self.node_pos = np.zeros((n, 3))
        self.node_quat = np.zeros((n, 4))

        # geometry entities
        self._geo_nodes = [i for i, nd in enumerate(self.nodes) if nd.geo_shape]
        self._geo_pos = np.ascontiguousarray(
            [self.nodes[i].geo_pos for i in self._geo_nodes])
        self._geo_quat = np.ascontiguousarray(
            [self.nodes[i].geo_quat for i in self._geo_nodes])
        self.touch = TouchLayout(self.nodes, self.node_index)
        self._entity_ids: dict[int, int] = {}
        for gi in self._geo_nodes:
            nd = self.nodes[gi]
            ent = scene.add_entity(
                world.EntitySpec(name=f"infant/{nd.name}", shape=nd.geo_shape,
                                 color=_SKIN, tags=frozenset({"infant"}),
                                 group="infant"),
                body_node=gi)
            self._entity_ids[gi] = ent.id
        self._geo_rows_cache: Optional[np.ndarray] = None

        self._prev_head_pos: Optional[np.ndarray] = None
        self._prev_head_vel = np.zeros(3)
        self._head_accel = np.zeros(3)
        self.fk_update()
        self._prev_head_pos = self.head_pos().copy()

    # -- kinematics --------------------------------------------------------

    def fk_update(self) -> None:
        """Recompute node poses and push geometry poses into the scene."""
        kernels.fk_chain(self._parents, self._mount_pos, self._mount_quat,
                         self._axes, self._joint_of, self.angles[3:],
                         self.root_pos, self.root_quat,
                         self.node_pos, self.node_quat)
        gp = self.node_pos[self._geo_nodes]
        gq = self.node_quat[self._geo_nodes]
        # entity pose = node pose composed with the fixed geometry offset
        w, x, y, z = gq[:, 0], gq[:, 1], gq[:, 2], gq[:, 3]
        ox, oy, oz = self._geo_pos[:, 0], self._geo_pos[:, 1], self._geo_pos[:, 2]
        tx = 2.0 * (y * oz - z * oy)
        ty = 2.0 * (z * ox - x * oz)
        tz = 2.0 * (x * oy - y * ox)
        pos = np.empty_like(gp)
        pos[:, 0] = gp[:, 0] + ox + w * tx + (y * tz - z * ty)
        pos[:, 1] = gp[:, 1] + oy + w * ty + (z * tx - x * tz)
        pos[:, 2] = gp[:, 2] + oz + w * tz + (x * ty - y * tx)
        qw2, qx2, qy2, qz2 = (self._geo_quat[:, 0], self._geo_quat[:, 1],
                              self._geo_quat[:, 2], self._geo_quat[:, 3])
        quat = np.empty_like(gq)
        quat[:, 0] = w * qw2 - x * qx2 - y * qy2 - z * qz2
        quat[:, 1] = w * qx2 + x * qw2 + y * qz2 - z * qy2
        quat[:, 2] = w * qy2 - x * qz2 + y * qw2 + z * qx2
        quat[:, 3] = w * qz2 + x * qy2 - y * qx2 + z * qw2
        if self._geo_rows_cache is None or len(self._geo_rows_cache) != len(self._geo_nodes):
            self._geo_rows_cache = np.array(
                [self.scene._row_of(self._entity_ids[g]) for g in self._geo_nodes],
                dtype=np.intp)
        else:
            # rows can move on (de)activation swaps; refresh cheaply
            for k, g in enumerate(self._geo_nodes):
                self._geo_rows_cache[k] = self.scene._row_of(self._entity_ids[g])
        self.scene.set_pose_batch(self._geo_rows_cache, pos, quat)

    def head_pos(self) -> np.ndarray:
        return self.node_pos[self.node_index[HEAD_NODE_NAME]] + \
            self._head_offset()

    def _head_offset(self) -> np.ndarray:
        i = self.node_index[HEAD_NODE_NAME]
        return quat_rotate(self.node_quat[i], np.array([0.0, 0.055, 0.0]))

    def head_quat(self) -> np.ndarray:
        return self.node_quat[self.node_index[HEAD_NODE_NAME]]

    # -- motor -------------------------------------------------------------

    def apply_motor_command(self, values: Sequence[float], stage_strength: float) -> "Body":
        values = np.asarray(values, dtype=float)
        if values.shape != (N_MOTORS,):
            raise ValueError(f"motor command must have {N_MOTORS} values, "
                             f"got {values.shape}")
        dt = world.DT
        # eyes: clamped absolute targets, bounded slew
        tgt_pan = min(EYE_PAN_RANGE[1], max(EYE_PAN_RANGE[0], values[0]))
        tgt_tilt = min(EYE_TILT_RANGE[1], max(EYE_TILT_RANGE[0], values[1]))
        tgt_focal = min(EYE_FOCAL_RANGE[1], max(EYE_FOCAL_RANGE[0], values[2]))
        max_ang = EYE_ANGLE_SLEW * dt
        max_foc = EYE_FOCAL_SLEW * dt
        for slot, tgt, lim in ((0, tgt_pan, max_ang), (1, tgt_tilt, max_ang),
                               (2, tgt_focal, max_foc)):
            delta = tgt - self.angles[slot]
            step = min(lim, max(-lim, delta))
            self.vels[slot] = step / dt
            self.angles[slot] += step
        # joints: first-order torque integration, clipped command
        torque = np.clip(values[3:], -1.0, 1.0)
        kernels.integrate_joints(self.angles[3:], self.vels[3:], torque,
                                 self._max_torque, self._inertia, self._damping,
                                 self._lo, self._hi, float(stage_strength), dt)
        self.vocalizing = abs(values[VOCAL_SLOT]) >= VOCAL_THRESHOLD
        return self

    # -- senses --------------------------------------------------------------

    def read_touch(self, contacts: Sequence[world.CollisionContact]) -> np.ndarray:
        """2,110-bit vector: bit i set iff a contact on sensor i's segment
        lies within the sensor's radius. Contact points are projected onto
        the segment surface (narrowphase points sit mid-penetration)."""
        pts = []
        segs = []
        for c in contacts:
            for eid in (c.entity_a, c.entity_b):
                node = self._entity_node(eid)
                if node >= 0:
                    pts.append(self._project_to_surface(c.point, eid))
                    segs.append(node)
        bits = np.zeros(N_TOUCH, dtype=np.uint8)
        if pts:
            world_sites = self._sites_world()
            kernels.touch_bits(world_sites, self.touch.site_radius,
                               self.touch.site_node,
                               np.ascontiguousarray(np.array(pts, dtype=float)),
                               np.ascontiguousarray(np.array(segs, dtype=np.int32)),
                               bits)
        return bits

    def _entity_node(self, entity_id: int) -> int:
        try:
            row = self.scene._row_of(entity_id)
        except SceneError:
            return -1
        return int(self.scene.body_node[row])

    def _project_to_surface(self, point: np.ndarray, entity_id: int) -> np.ndarray:
        row = self.scene._row_of(entity_id)
        shape = self.scene._shapes[row]
        pos = self.scene.pos[row]
        rot = self.scene.rot[row]
        local = rot.T @ (np.asarray(point) - pos)
        if shape.kind == world.KIND_SPHERE:
            r = shape.params[0]
            n = math.sqrt(float(local @ local))
            local = local * (r / n) if n > 1e-9 else np.array([0.0, 0.0, r])
        elif shape.kind == world.KIND_CAPSULE:
            r, hl = shape.params[0], shape.params[1]
            zc = min(hl, max(-hl, local[2]))
            d = local - np.array([0.0, 0.0, zc])
            n = math.sqrt(float(d @ d))
            if n > 1e-9:
                local = np.array([0.0, 0.0, zc]) + d * (r / n)
            else:
                local = np.array([r, 0.0, zc])
        elif shape.kind == world.KIND_BOX:
            h = np.asarray(shape.params[:3])
            q = np.clip(local, -h, h)
            if np.array_equal(q, local):  # inside: push to nearest face
                pen = h - np.abs(local)
                ax = int(np.argmin(pen))
                q[ax] = h[ax] if local[ax] >= 0 else -h[ax]
            local = q
        return pos + rot @ local

    def _sites_world(self) -> np.ndarray:
        out = np.empty((N_TOUCH, 3))
        # sites are stored in geometry-local frames, grouped by node
        rows = self._geo_rows_cache
        for k, g in enumerate(self._geo_nodes):
            mask = self.touch.site_node == g
            if not mask.any():
                continue
            row = rows[k]
            r = self.scene.rot[row]
            out[mask] = self.touch.sites_local[mask] @ r.T + self.scene.pos[row]
        return np.ascontiguousarray(out)

    def read_proprioception(self) -> np.ndarray:
        """106 reals: 53 normalized positions then 53 normalized velocities."""
        out = np.empty(N_PROPRIO)
        lo = np.empty(N_MOTORS)
        hi = np.empty(N_MOTORS)
        vmax = np.empty(N_MOTORS)
        lo[0], hi[0], vmax[0] = *EYE_PAN_RANGE, EYE_ANGLE_SLEW
        lo[1], hi[1], vmax[1] = *EYE_TILT_RANGE, EYE_ANGLE_SLEW
        lo[2], hi[2], vmax[2] = *EYE_FOCAL_RANGE, EYE_FOCAL_SLEW
        lo[3:] = self._lo
        hi[3:] = self._hi
        vmax[3:] = self._max_torque / (self._inertia * self._damping)
        out[:N_MOTORS] = 2.0 * (self.angles - lo) / (hi - lo) - 1.0
        out[N_MOTORS:] = np.clip(self.vels / vmax, -1.0, 1.0)
        return out

    def update_head_kinematics(self) -> None:
        """Track head acceleration across ticks (call once per step,
        after fk_update)."""
        p = self.head_pos()
        if self._prev_head_pos is None:
            self._prev_head_pos = p.copy()
            return
        v = (p - self._prev_head_pos) / world.DT
        self._head_accel = (v - self._prev_head_vel) / world.DT
        self._prev_head_vel = v
        self._prev_head_pos = p.copy()

    def read_vestibular(self) -> np.ndarray:
        """Gravity direction in the head frame (3) + specific-force head
        acceleration (3), clipped to ±50 m/s².

        Accelerometer convention: reading = R_headᵀ(a_kinematic − g), so a
        resting head reads (0, +9.81, 0) support force and free fall reads 0.
        """
        q = self.head_quat()
        g = self.scene.gravity
        gn = math.sqrt(float(g @ g))
        ghat = g / gn if gn > 0 else np.array([0.0, -1.0, 0.0])
        grav_head = quat_rotate_inverse(q, ghat)
        spec = quat_rotate_inverse(q, self._head_accel - g)
        return np.concatenate([grav_head, np.clip(spec, -50.0, 50.0)])

    # -- interoception -----------------------------------------------------

    @property
    def stomach(self) -> float:
        return self.stomach_units / STOMACH_FULL_UNITS

    def update_interoception(self, fed_amount: float = 0.0) -> "Body":
        """stomach <- clamp(stomach - decay + fed, 0, 1); fixed-point so a
        full stomach drains to exactly 0 in 1/decay steps."""
        if fed_amount < 0:
            raise ValueError("fed_amount must be non-negative")
        units = self.stomach_units - self.hunger_decay_units \
            + int(round(fed_amount * STOMACH_FULL_UNITS))
        self.stomach_units = max(0, min(STOMACH_FULL_UNITS, units))
        return self

    # -- manifests -----------------------------------------------------------

    def motor_manifest(self) -> dict:
        slots = [
            {"index": 0, "name": "eye_pan", "kind": "eye", "unit": "deg",
             "min": EYE_PAN_RANGE[0], "max": EYE_PAN_RANGE[1], "slew": EYE_ANGLE_SLEW},
            {"index": 1, "name": "eye_tilt", "kind": "eye", "unit": "deg",
             "min": EYE_TILT_RANGE[0], "max": EYE_TILT_RANGE[1], "slew": EYE_ANGLE_SLEW},
            {"index": 2, "name": "eye_focal", "kind": "eye", "unit": "m",
             "min": EYE_FOCAL_RANGE[0], "max": EYE_FOCAL_RANGE[1], "slew": EYE_FOCAL_SLEW},
        ]
        for j in self.joints:
            slots.append({
                "index": j.slot, "name": j.name, "kind": "joint", "unit": "rad",
                "min": j.lo, "max": j.hi, "max_torque": j.max_torque,
                "inertia": j.inertia, "damping": j.damping, "v_max": j.v_max,
            })
        return {
            "motor_count": N_MOTORS,
            "vocal_slot": VOCAL_SLOT,
            "vocal_threshold": VOCAL_THRESHOLD,
            "slots": slots,
        }

    def touch_manifest(self) -> dict:
        regions = []
        for region, count, segments, radius in TOUCH_REGIONS:
            lo, hi = self.touch.region_ranges[region]
            regions.append({
                "region": region, "start": lo, "count": count,
                "segments": [s for s, _ in segments], "site_radius": radius,
            })
        return {"touch_count": N_TOUCH, "regions": regions}

    def region_density(self, region: str) -> float:
        """Sensors per square meter of the surface patch the region covers."""
        lo, hi = self.touch.region_ranges[region]
        return (hi - lo) / self.touch.region_area[region]

    def state_bytes(self) -> bytes:
        return (self.angles.tobytes() + self.vels.tobytes()
                + str(self.stomach_units).encode()
                + self.root_pos.tobytes() + self.root_quat.tobytes())
