"""Deterministic scene container: fixed-step clock, primitive entities,
contact detection with projection-based resolution, and exact ray casting.

Entity state lives in packed scene arrays (struct-of-arrays) so the hot
kernels can run over views without per-entity marshalling; `Entity` is a
lightweight handle. Active entities occupy the array prefix [0, n_active).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from . import kernels
from .errors import SceneError
from .geometry import normalized, quat_rotate, quat_to_matrix
from .rng import StreamSet

DT = 0.01  # seconds per tick, fixed: 100 steps per simulated second

KIND_SPHERE = 0
KIND_BOX = 1
KIND_CAPSULE = 2
KIND_PLANE = 3

_KIND_NAMES = {KIND_SPHERE: "sphere", KIND_BOX: "box",
               KIND_CAPSULE: "capsule", KIND_PLANE: "plane"}


class SimClock:
    """Monotone tick counter with a fixed 10 ms step.

    sim_age is an exact affine function of step: the configured gestation
    offset is quantized to whole ticks at construction.
    """

    __slots__ = ("_step", "_offset_steps")

    def __init__(self, gestation_offset_s: float = 0.0):
        self._step = 0
        self._offset_steps = int(round(gestation_offset_s / DT))

    @property
    def dt(self) -> float:
        return DT

    @property
    def step(self) -> int:
        return self._step

    @property
    def offset_steps(self) -> int:
        return self._offset_steps

    @property
    def sim_age(self) -> float:
        """Seconds since conception."""
        return (self._step + self._offset_steps) * DT

    def advance(self) -> None:
        self._step += 1


@dataclass(frozen=True)
class Shape:
    kind: int
    params: tuple

    def validate(self) -> None:
        if self.kind == KIND_SPHERE:
            if self.params[0] <= 0:
                raise SceneError("sphere radius must be positive")
        elif self.kind == KIND_BOX:
            if min(self.params[:3]) <= 0:
                raise SceneError("box half-extents must be positive")
        elif self.kind == KIND_CAPSULE:
            if self.params[0] <= 0 or self.params[1] <= 0:
                raise SceneError("capsule radius and half-length must be positive")
        elif self.kind == KIND_PLANE:
            n = math.sqrt(sum(c * c for c in self.params[:3]))
            if abs(n - 1.0) > 1e-9:
                raise SceneError("plane normal must be unit length")
        else:
            raise SceneError(f"unknown shape kind {self.kind}")

    def bounding_radius(self) -> float:
        if self.kind == KIND_SPHERE:
            return self.params[0]
        if self.kind == KIND_BOX:
            return math.sqrt(sum(c * c for c in self.params[:3]))
        if self.kind == KIND_CAPSULE:
            return self.params[0] + self.params[1]
        return math.inf

    def surface_area(self) -> float:
        if self.kind == KIND_SPHERE:
            r = self.params[0]
            return 4.0 * math.pi * r * r
        if self.kind == KIND_BOX:
            hx, hy, hz = self.params[:3]
            return 8.0 * (hx * hy + hy * hz + hx * hz)
        if self.kind == KIND_CAPSULE:
            r, h = self.params[0], self.params[1]
            return 4.0 * math.pi * r * r + 2.0 * math.pi * r * (2.0 * h)
        return math.inf

    @property
    def name(self) -> str:
        return _KIND_NAMES[self.kind]


def sphere(radius: float) -> Shape:
    return Shape(KIND_SPHERE, (float(radius), 0.0, 0.0, 0.0))


def box(hx: float, hy: float, hz: float) -> Shape:
    return Shape(KIND_BOX, (float(hx), float(hy), float(hz), 0.0))


def capsule(radius: float, half_length: float) -> Shape:
    return Shape(KIND_CAPSULE, (float(radius), float(half_length), 0.0, 0.0))


def plane(normal: Sequence[float], offset: float) -> Shape:
    n = normalized(np.asarray(normal, dtype=float))
    return Shape(KIND_PLANE, (float(n[0]), float(n[1]), float(n[2]), float(offset)))


@dataclass(frozen=True)
class EntitySpec:
    """Declarative description of one entity, as read from a scene config."""

    name: str
    shape: Shape
    pos: tuple = (0.0, 0.0, 0.0)
    quat: tuple = (1.0, 0.0, 0.0, 0.0)
    color: tuple = (0.5, 0.5, 0.5)
    tags: frozenset = frozenset()
    dynamic: bool = False
    mass: float = 1.0
    damping: float = 0.1
    entity_id: Optional[int] = None
    group: Optional[str] = None


@dataclass
class CollisionContact:
    entity_a: int
    entity_b: int
    point: np.ndarray
    normal: np.ndarray  # unit, pointing from a toward b
    depth: float  # residual penetration after resolution, >= 0


class Entity:
    """Handle over one row of the scene's packed arrays."""

    __slots__ = ("scene", "id")

    def __init__(self, scene: "Scene", entity_id: int):
        self.scene = scene
        self.id = entity_id

    @property
    def _i(self) -> int:
        return self.scene._row_of(self.id)

    @property
    def name(self) -> str:
        return self.scene._names[self._i]

    @property
    def shape(self) -> Shape:
        return self.scene._shapes[self._i]

    @property
    def pos(self) -> np.ndarray:
        return self.scene.pos[self._i]

    @pos.setter
    def pos(self, value) -> None:
        self.scene.pos[self._i] = value

    @property
    def quat(self) -> np.ndarray:
        return self.scene.quat[self._i]

    @quat.setter
    def quat(self, value) -> None:
        i = self._i
        self.scene.quat[i] = value
        self.scene._rot_dirty.add(self.id)

    @property
    def color(self) -> np.ndarray:
        return self.scene.color[self._i]

    @property
    def vel(self) -> np.ndarray:
        return self.scene.vel[self._i]

    @vel.setter
    def vel(self, value) -> None:
        self.scene.vel[self._i] = value

    @property
    def tags(self) -> frozenset:
        return self.scene._tags[self._i]

    @property
    def dynamic(self) -> bool:
        return bool(self.scene.dynamic[self._i])

    @property
    def active(self) -> bool:
        return self.scene._row_of(self.id) < self.scene.n_active

    @property
    def group(self) -> Optional[str]:
        return self.scene._groups[self._i]

    @property
    def body_node(self) -> int:
        return int(self.scene.body_node[self._i])


@dataclass
class RaycastHit:
    entity_id: int
    distance: float
    color: np.ndarray
    normal: np.ndarray


class Scene:
    """Single-threaded simulation state; bitwise reproducible per seed."""

    def __init__(self, seed: int, gravity=(0.0, -9.81, 0.0),
                 gestation_offset_s: float = 0.0,
                 background=(0.0, 0.0, 0.0)):
        self.seed = int(seed)
        self.rng = StreamSet(seed)
        self.clock = SimClock(gestation_offset_s)
        self.gravity = np.asarray(gravity, dtype=float)
        self.background = np.asarray(background, dtype=float)
        self._capacity = 0
        self.n = 0           # total rows in use
        self.n_active = 0    # active rows occupy [0, n_active)
        self._ids: list[int] = []
        self._names: list[str] = []
        self._shapes: list[Shape] = []
        self._tags: list[frozenset] = []
        self._groups: list[Optional[str]] = []
        self._index: dict[int, int] = {}
        self._by_name: dict[str, int] = {}
        self._next_id = 0
        self._rot_dirty: set[int] = set()
        self._alloc(16)

    # -- storage ---------------------------------------------------------

    def _alloc(self, capacity: int) -> None:
        def grow(arr, shape, dtype=np.float64, fill=0.0):
            new = np.full(shape, fill, dtype=dtype)
            if arr is not None:
                new[: arr.shape[0]] = arr
            return new

        c = capacity
        self.kinds = grow(getattr(self, "kinds", None), (c,), np.int32, -1)
        self.params = grow(getattr(self, "params", None), (c, 4))
        self.pos = grow(getattr(self, "pos", None), (c, 3))
        self.quat = grow(getattr(self, "quat", None), (c, 4))
        self.rot = grow(getattr(self, "rot", None), (c, 3, 3))
        self.color = grow(getattr(self, "color", None), (c, 3))
        self.vel = grow(getattr(self, "vel", None), (c, 3))
        self.mass = grow(getattr(self, "mass", None), (c,), fill=1.0)
        self.damping = grow(getattr(self, "damping", None), (c,), fill=0.1)
        self.dynamic = grow(getattr(self, "dynamic", None), (c,), np.bool_, False)
        self.body_node = grow(getattr(self, "body_node", None), (c,), np.int32, -1)
        self.bound = grow(getattr(self, "bound", None), (c,))
        self._capacity = c

    def _row_of(self, entity_id: int) -> int:
        try:
            return self._index[entity_id]
        except KeyError:
            raise SceneError(f"unknown entity id {entity_id}") from None

    def add_entity(self, spec: EntitySpec, active: bool = True,
                   body_node: int = -1) -> Entity:
        spec.shape.validate()
        if spec.entity_id is not None:
            eid = int(spec.entity_id)
            if eid in self._index:
                raise SceneError(f"duplicate entity id {eid}")
            self._next_id = max(self._next_id, eid + 1)
        else:
            eid = self._next_id
            self._next_id += 1
        if spec.name in self._by_name:
            raise SceneError(f"duplicate entity name {spec.name!r}")
        if self.n == self._capacity:
            self._alloc(self._capacity * 2)
        i = self.n
        self.n += 1
        self._ids.append(eid)
        self._names.append(spec.name)
        self._shapes.append(spec.shape)
        self._tags.append(frozenset(spec.tags))
        self._groups.append(spec.group)
        self._index[eid] = i
        self._by_name[spec.name] = eid
        self.kinds[i] = spec.shape.kind
        self.params[i] = spec.shape.params
        self.pos[i] = spec.pos
        q = np.asarray(spec.quat, dtype=float)
        qn = float(np.dot(q, q))
        if abs(qn - 1.0) > 1e-9:
            raise SceneError(f"entity {spec.name!r}: orientation quaternion not unit")
        self.quat[i] = q
        self.rot[i] = quat_to_matrix(q)
        self.color[i] = spec.color
        self.vel[i] = 0.0
        self.mass[i] = spec.mass
        self.damping[i] = spec.damping
        self.dynamic[i] = spec.dynamic
        self.body_node[i] = body_node
        self.bound[i] = spec.shape.bounding_radius()
        # new rows land at the end; activate by swapping into the prefix
        if active:
            self._swap(i, self.n_active)
            self.n_active += 1
        return Entity(self, eid)

    def _swap(self, i: int, j: int) -> None:
        if i == j:
            return
        for arr in (self.kinds, self.params, self.pos, self.quat, self.rot,
                    self.color, self.vel, self.mass, self.damping,
                    self.dynamic, self.body_node, self.bound):
            tmp = arr[i].copy()
            arr[i] = arr[j]
            arr[j] = tmp
        for lst in (self._ids, self._names, self._shapes, self._tags, self._groups):
            lst[i], lst[j] = lst[j], lst[i]
        self._index[self._ids[i]] = i
        self._index[self._ids[j]] = j

    def set_active(self, entity_id: int, active: bool) -> None:
        i = self._row_of(entity_id)
        if active and i >= self.n_active:
            self._swap(i, self.n_active)
            self.n_active += 1
        elif not active and i < self.n_active:
            self._swap(i, self.n_active - 1)
            self.n_active -= 1

    def entity(self, entity_id: int) -> Entity:
        self._row_of(entity_id)
        return Entity(self, entity_id)

    def by_name(self, name: str) -> Entity:
        try:
            return Entity(self, self._by_name[name])
        except KeyError:
            raise SceneError(f"unknown entity name {name!r}") from None

    def id_of(self, name: str) -> int:
        try:
            return self._by_name[name]
        except KeyError:
            raise SceneError(f"unknown entity name {name!r}") from None

    def entities(self) -> Iterable[Entity]:
        return [Entity(self, self._ids[i]) for i in range(self.n_active)]

    def tagged(self, tag: str) -> list[Entity]:
        return [Entity(self, self._ids[i]) for i in range(self.n_active)
                if tag in self._tags[i]]

    def set_pose_batch(self, rows: np.ndarray, positions: np.ndarray,
                       quats: np.ndarray) -> None:
        """Vectorized kinematic pose update (used by body FK and tracks)."""
        self.pos[rows] = positions
        self.quat[rows] = quats
        w, x, y, z = quats[:, 0], quats[:, 1], quats[:, 2], quats[:, 3]
        r = self.rot
        r[rows, 0, 0] = 1 - 2 * (y * y + z * z)
        r[rows, 0, 1] = 2 * (x * y - w * z)
        r[rows, 0, 2] = 2 * (x * z + w * y)
        r[rows, 1, 0] = 2 * (x * y + w * z)
        r[rows, 1, 1] = 1 - 2 * (x * x + z * z)
        r[rows, 1, 2] = 2 * (y * z - w * x)
        r[rows, 2, 0] = 2 * (x * z - w * y)
        r[rows, 2, 1] = 2 * (y * z + w * x)
        r[rows, 2, 2] = 1 - 2 * (x * x + y * y)

    def _flush_rot(self) -> None:
        if not self._rot_dirty:
            return
        rows = np.array([self._index[eid] for eid in sorted(self._rot_dirty)], dtype=np.intp)
        q = self.quat[rows]
        self.set_pose_batch(rows, self.pos[rows], q)
        self._rot_dirty.clear()

    # -- simulation ------------------------------------------------------

    def step_world(self, external_forces: Optional[dict[int, np.ndarray]] = None
                   ) -> list[CollisionContact]:
        """Advance one tick: integrate dynamics, resolve penetration by
        projection, return this tick's contacts (residual depths)."""
        self.clock.advance()
        self._flush_rot()
        na = self.n_active
        dyn = self.dynamic[:na]
        if dyn.any():
            acc = np.zeros((na, 3))
            acc[dyn] = self.gravity
            if external_forces:
                for eid, f in external_forces.items():
                    i = self._row_of(eid)
                    if i < na and self.dynamic[i]:
                        acc[i] += np.asarray(f, dtype=float) / self.mass[i]
            v = self.vel[:na]
            v[dyn] += acc[dyn] * DT
            v[dyn] *= (1.0 - self.damping[:na, None][dyn] * DT)
            self.pos[:na][dyn] += v[dyn] * DT
        contacts = self._detect_contacts()
        self._resolve(contacts)
        return contacts

    def _candidate_pairs(self) -> list[tuple[int, int]]:
        na = self.n_active
        kinds = self.kinds[:na]
        nonplane = np.flatnonzero(kinds != KIND_PLANE)
        planes = np.flatnonzero(kinds == KIND_PLANE)
        pairs: list[tuple[int, int]] = []
        if nonplane.size:
            p = self.pos[nonplane]
            b = self.bound[nonplane]
            delta = p[:, None, :] - p[None, :, :]
            d2 = np.einsum("ijk,ijk->ij", delta, delta)
            lim = (b[:, None] + b[None, :]) ** 2
            ii, jj = np.nonzero(np.triu(d2 <= lim, k=1))
            for a, c in zip(nonplane[ii], nonplane[jj]):
                pairs.append((int(a), int(c)))
        for pl in planes:
            off = self.params[pl, 3]
            nrm = self.params[pl, 0:3]
            sd = self.pos[nonplane] @ nrm - off
            close = np.abs(sd) <= self.bound[nonplane] + 1e-6
            for row in nonplane[close]:
                pairs.append((int(pl), int(row)))
        return pairs

    def _detect_contacts(self) -> list[CollisionContact]:
        contacts = []
        for i, j in self._candidate_pairs():
            gi, gj = self._groups[i], self._groups[j]
            if gi is not None and gi == gj:
                continue  # no self-collision within a group (body, caregiver)
            a, b = (i, j) if self._ids[i] < self._ids[j] else (j, i)
            c = self._narrowphase(a, b)
            if c is not None:
                contacts.append(c)
        contacts.sort(key=lambda c: (c.entity_a, c.entity_b))
        return contacts

    def _narrowphase(self, i: int, j: int) -> Optional[CollisionContact]:
        ki, kj = int(self.kinds[i]), int(self.kinds[j])
        flip = False
        # order so the pair is one of the handled (ki <= kj) combinations
        if ki > kj:
            i, j, ki, kj = j, i, kj, ki
            flip = True
        res = None
        if ki == KIND_SPHERE and kj == KIND_SPHERE:
            res = self._c_sphere_sphere(i, j)
        elif ki == KIND_SPHERE and kj == KIND_BOX:
            res = self._c_sphere_box(i, j)
        elif ki == KIND_SPHERE and kj == KIND_CAPSULE:
            res = self._c_sphere_capsule(i, j)
        elif ki == KIND_SPHERE and kj == KIND_PLANE:
            res = self._c_sphere_plane(i, j)
        elif ki == KIND_BOX and kj == KIND_CAPSULE:
            res = self._c_box_capsule(i, j)
        elif ki == KIND_BOX and kj == KIND_PLANE:
            res = self._c_box_plane(i, j)
        elif ki == KIND_CAPSULE and kj == KIND_CAPSULE:
            res = self._c_capsule_capsule(i, j)
        elif ki == KIND_CAPSULE and kj == KIND_PLANE:
            res = self._c_capsule_plane(i, j)
        # box-box and plane-plane are unsupported (static scenery pairs)
        if res is None:
            return None
        point, normal, depth = res
        if flip:
            i, j = j, i
            normal = -normal
        ia, ib = self._ids[i], self._ids[j]
        if ia > ib:
            ia, ib = ib, ia
            normal = -normal
        return CollisionContact(ia, ib, point, normal, depth)

    def _capsule_segment(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        h = self.params[i, 1]
        axis = self.rot[i] @ np.array([0.0, 0.0, h])
        return self.pos[i] - axis, self.pos[i] + axis

    def _c_sphere_sphere(self, i, j):
        d = self.pos[j] - self.pos[i]
        dist = math.sqrt(float(d @ d))
        rsum = self.params[i, 0] + self.params[j, 0]
        if dist >= rsum or dist == 0.0:
            return None
        n = d / dist
        depth = rsum - dist
        point = self.pos[i] + n * (self.params[i, 0] - 0.5 * depth)
        return point, n, depth

    def _c_sphere_plane(self, i, j):
        nrm = self.params[j, 0:3].copy()
        off = self.params[j, 3]
        s = float(self.pos[i] @ nrm) - off
        depth = self.params[i, 0] - s
        if depth <= 0.0:
            return None
        point = self.pos[i] - nrm * self.params[i, 0]
        return point, -nrm, depth  # normal from sphere toward plane

    def _c_sphere_box(self, i, j):
        local = self.rot[j].T @ (self.pos[i] - self.pos[j])
        h = self.params[j, 0:3]
        q = np.clip(local, -h, h)
        delta = local - q
        dist = math.sqrt(float(delta @ delta))
        r = self.params[i, 0]
        if dist > 1e-12:
            if dist >= r:
                return None
            n_local = delta / dist
            depth = r - dist
        else:
            pen = h - np.abs(local)
            ax = int(np.argmin(pen))
            n_local = np.zeros(3)
            n_local[ax] = 1.0 if local[ax] >= 0 else -1.0
            depth = r + float(pen[ax])
        n_world = self.rot[j] @ n_local
        point = self.pos[j] + self.rot[j] @ q
        return point, -n_world, depth  # from sphere toward box

    def _c_sphere_capsule(self, i, j):
        e1, e2 = self._capsule_segment(j)
        seg = e2 - e1
        t = float((self.pos[i] - e1) @ seg) / float(seg @ seg)
        t = min(1.0, max(0.0, t))
        closest = e1 + seg * t
        d = closest - self.pos[i]
        dist = math.sqrt(float(d @ d))
        rsum = self.params[i, 0] + self.params[j, 0]
        if dist >= rsum or dist == 0.0:
            return None
        n = d / dist
        depth = rsum - dist
        point = self.pos[i] + n * (self.params[i, 0] - 0.5 * depth)
        return point, n, depth

    def _c_capsule_plane(self, i, j):
        nrm = self.params[j, 0:3].copy()
        off = self.params[j, 3]
        r = self.params[i, 0]
        best = None
        for e in self._capsule_segment(i):
            s = float(e @ nrm) - off
            depth = r - s
            if depth > 0.0 and (best is None or depth > best[2]):
                best = (e - nrm * r, -nrm, depth)
        return best

    def _c_capsule_capsule(self, i, j):
        p1, q1 = self._capsule_segment(i)
        p2, q2 = self._capsule_segment(j)
        c1, c2 = _closest_segment_points(p1, q1, p2, q2)
        d = c2 - c1
        dist = math.sqrt(float(d @ d))
        rsum = self.params[i, 0] + self.params[j, 0]
        if dist >= rsum or dist == 0.0:
            return None
        n = d / dist
        depth = rsum - dist
        point = c1 + n * (self.params[i, 0] - 0.5 * depth)
        return point, n, depth

    def _c_box_capsule(self, i, j):
        # golden-section over the capsule axis; point-to-box distance is
        # convex along the segment, so the search converges deterministically
        e1, e2 = self._capsule_segment(j)
        h = self.params[i, 0:3]
        rt = self.rot[i]
        cp = self.pos[i]

        def d2(t: float) -> float:
            p = e1 + (e2 - e1) * t
            local = rt.T @ (p - cp)
            delta = local - np.clip(local, -h, h)
            return float(delta @ delta)

        lo, hi = 0.0, 1.0
        inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
        a = hi - inv_phi * (hi - lo)
        b = lo + inv_phi * (hi - lo)
        fa, fb = d2(a), d2(b)
        for _ in range(60):
            if fa <= fb:
                hi, b, fb = b, a, fa
                a = hi - inv_phi * (hi - lo)
                fa = d2(a)
            else:
                lo, a, fa = a, b, fb
                b = lo + inv_phi * (hi - lo)
                fb = d2(b)
        t = 0.5 * (lo + hi)
        center = e1 + (e2 - e1) * t
        # sphere-box test at the closest axis point
        local = rt.T @ (center - cp)
        q = np.clip(local, -h, h)
        delta = local - q
        dist = math.sqrt(float(delta @ delta))
        r = self.params[j, 0]
        if dist > 1e-12:
            if dist >= r:
                return None
            n_local = delta / dist
            depth = r - dist
        else:
            pen = h - np.abs(local)
            ax = int(np.argmin(pen))
            n_local = np.zeros(3)
            n_local[ax] = 1.0 if local[ax] >= 0 else -1.0
            depth = r + float(pen[ax])
        n_world = rt @ n_local  # points from box surface toward capsule
        point = cp + rt @ q
        return point, n_world, depth

    def _c_box_plane(self, i, j):
        nrm = self.params[j, 0:3].copy()
        off = self.params[j, 3]
        h = self.params[i, 0:3]
        best = None
        for sx in (-1.0, 1.0):
            for sy in (-1.0, 1.0):
                for sz in (-1.0, 1.0):
                    corner = self.pos[i] + self.rot[i] @ (h * np.array([sx, sy, sz]))
                    depth = off - float(corner @ nrm)
                    if depth > 0.0 and (best is None or depth > best[2]):
                        best = (corner, -nrm, depth)
        return best

    def _resolve(self, contacts: list[CollisionContact]) -> None:
        for c in contacts:
            ia, ib = self._row_of(c.entity_a), self._row_of(c.entity_b)
            da, db = bool(self.dynamic[ia]), bool(self.dynamic[ib])
            if not (da or db):
                continue
            share_a = 0.5 if (da and db) else (1.0 if da else 0.0)
            share_b = 0.5 if (da and db) else (1.0 if db else 0.0)
            if da:
                self.pos[ia] -= c.normal * (c.depth * share_a)
                vn = float(self.vel[ia] @ c.normal)
                if vn > 0.0:
                    self.vel[ia] -= c.normal * vn
            if db:
                self.pos[ib] += c.normal * (c.depth * share_b)
                vn = float(self.vel[ib] @ c.normal)
                if vn < 0.0:
                    self.vel[ib] -= c.normal * vn
            c.depth = 0.0

    # -- queries ----------------------------------------------------------

    def contact_pair(self, id_a: int, id_b: int) -> Optional[CollisionContact]:
        """Narrowphase query for one entity pair (no resolution)."""
        self._flush_rot()
        i, j = self._row_of(id_a), self._row_of(id_b)
        a, b = (i, j) if self._ids[i] < self._ids[j] else (j, i)
        return self._narrowphase(a, b)

    def raycast(self, origin, direction, max_dist: float = 100.0) -> Optional[RaycastHit]:
        direction = np.asarray(direction, dtype=float)
        if abs(float(direction @ direction) - 1.0) > 2e-6:
            raise SceneError("ray direction must be a unit vector")
        self._flush_rot()
        origins = np.ascontiguousarray(np.asarray(origin, dtype=float)[None, :])
        dirs = np.ascontiguousarray(direction[None, :])
        hit_idx = np.empty(1, dtype=np.int32)
        hit_dist = np.empty(1, dtype=np.float64)
        hit_normal = np.empty((1, 3), dtype=np.float64)
        na = self.n_active
        kernels.raycast_batch(origins, dirs, max_dist, self.kinds[:na],
                              self.params[:na], self.pos[:na], self.rot[:na],
                              hit_idx, hit_dist, hit_normal)
        if hit_idx[0] < 0:
            return None
        row = int(hit_idx[0])
        return RaycastHit(self._ids[row], float(hit_dist[0]),
                          self.color[row].copy(), hit_normal[0].copy())

    def raycast_rows(self, origins: np.ndarray, dirs: np.ndarray, max_dist: float,
                     hit_idx: np.ndarray, hit_dist: np.ndarray,
                     hit_normal: np.ndarray) -> None:
        """Batched variant used by the renderer; fills caller buffers with
        row indices (translate with `row_ids`)."""
        self._flush_rot()
        na = self.n_active
        kernels.raycast_batch(origins, dirs, max_dist, self.kinds[:na],
                              self.params[:na], self.pos[:na], self.rot[:na],
                              hit_idx, hit_dist, hit_normal)

    def row_ids(self) -> list[int]:
        return self._ids

    # -- state hash --------------------------------------------------------

    def state_bytes(self) -> bytes:
        self._flush_rot()
        na = self.n_active
        order = np.argsort([self._ids[i] for i in range(na)], kind="stable")
        h = hashlib.sha256()
        h.update(str(self.clock.step).encode())
        h.update(np.array([self._ids[i] for i in order], dtype=np.int64).tobytes())
        for arr in (self.pos[:na][order], self.quat[:na][order],
                    self.vel[:na][order], self.color[:na][order]):
            h.update(np.ascontiguousarray(arr).tobytes())
        h.update(self.rng.state_bytes())
        return h.digest()


def _closest_segment_points(p1, q1, p2, q2):
    """Closest points between segments [p1,q1] and [p2,q2] (Ericson 5.1.9)."""
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = float(d1 @ d1)
    e = float(d2 @ d2)
    f = float(d2 @ r)
    eps = 1e-12
    if a <= eps and e <= eps:
        return p1, p2
    if a <= eps:
        t = min(1.0, max(0.0, f / e))
        return p1, p2 + d2 * t
    c = float(d1 @ r)
    if e <= eps:
        s = min(1.0, max(0.0, -c / a))
        return p1 + d1 * s, p2
    b = float(d1 @ d2)
    denom = a * e - b * b
    s = min(1.0, max(0.0, (b * f - c * e) / denom)) if denom > eps else 0.0
    t = (b * s + f) / e
    if t < 0.0:
        t = 0.0
        s = min(1.0, max(0.0, -c / a))
    elif t > 1.0:
        t = 1.0
        s = min(1.0, max(0.0, (b - c) / a))
    return p1 + d1 * s, p2 + d2 * t


def create_scene(config, seed: int) -> Scene:
    """Build a Scene from a SceneConfig (see `sceneconfig`)."""
    scene = Scene(seed,
                  gravity=config.gravity,
                  gestation_offset_s=config.gestation_offset_s,
                  background=config.background)
    seen = set()
    for spec in config.entities:
        if spec.entity_id is not None:
            if spec.entity_id in seen:
                raise SceneError(f"duplicate entity id {spec.entity_id}")
            seen.add(spec.entity_id)
    for spec in config.entities:
        scene.add_entity(spec)
    return scene
