"""Two-eye foveated rendering over the scene ray caster.

Per eye a central (8 deg FOV) and a peripheral (100 deg) retina, both
32x32 by default so the peripheral field is lower resolution per degree
by construction. Conjugate gaze: both eyes share pan/tilt; vergence
follows from the focal parameter and the 0.04 m interpupillary distance.
Rendering is one unlit ray per pixel; acuity post-processing implements
fetal blackout and infant nearsightedness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .curriculum import AcuityProfile
from .errors import SceneError
from .geometry import angle_between, pan_tilt_to_direction, quat_rotate
from .world import Scene

PAN_RANGE = (-45.0, 45.0)
TILT_RANGE = (-40.0, 40.0)
FOCAL_RANGE = (0.1, 10.0)
IPD = 0.04

CENTRAL_FOV = 8.0
PERIPHERAL_FOV = 100.0
RETINA_SIZE = 32
DEBUG_SIZE = 128
DEBUG_FOV = 60.0

MAX_BLUR_PX = 4
RAY_MAX_DIST = 100.0

# eye centers in the head frame (+z face direction, +y up, +x anatomical right)
_EYE_LOCAL = {
    "left": np.array([-IPD / 2, 0.01, 0.06]),
    "right": np.array([IPD / 2, 0.01, 0.06]),
}


def _clamp(v: float, rng: tuple[float, float]) -> float:
    return min(rng[1], max(rng[0], v))


@dataclass(frozen=True)
class EyeState:
    pan: float = 0.0
    tilt: float = 0.0
    focal: float = FOCAL_RANGE[0]

    def set_gaze(self, pan: float, tilt: float, focal: float) -> "EyeState":
        return EyeState(_clamp(pan, PAN_RANGE), _clamp(tilt, TILT_RANGE),
                        _clamp(focal, FOCAL_RANGE))

    def vergence_deg(self) -> float:
        """Total convergence angle between the two eye axes."""
        return 2.0 * math.degrees(math.atan((IPD / 2) / self.focal))


def set_gaze(eyes: EyeState, pan: float, tilt: float, focal: float) -> EyeState:
    return eyes.set_gaze(pan, tilt, focal)


@dataclass
class RetinaImage:
    fov_deg: float
    pixels: np.ndarray  # (H, W, 3) float in [0, 1]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def degrees_per_pixel(self) -> float:
        return self.fov_deg / self.width

    def to_bytes(self) -> bytes:
        return np.floor(self.pixels * 255.0 + 0.5).astype(np.uint8).tobytes()


@dataclass
class VisionFrame:
    left_central: RetinaImage
    left_peripheral: RetinaImage
    right_central: RetinaImage
    right_peripheral: RetinaImage
    debug_view: Optional[RetinaImage]
    fixated_entity: Optional[int]
    gaze_dir: np.ndarray  # world-frame cyclopean gaze direction
    depths: dict = field(default_factory=dict)  # per-retina hit distances

    def retinas(self) -> list[tuple[str, RetinaImage]]:
        return [("left_central", self.left_central),
                ("left_peripheral", self.left_peripheral),
                ("right_central", self.right_central),
                ("right_peripheral", self.right_peripheral)]


_grid_cache: dict[tuple[int, float], tuple[np.ndarray, np.ndarray]] = {}


def _ndc_grid(size: int, fov_deg: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel (x, y) offsets on the image plane at unit distance."""
    key = (size, fov_deg)
    cached = _grid_cache.get(key)
    if cached is None:
        half = math.tan(math.radians(fov_deg) / 2.0)
        centers = (np.arange(size) + 0.5) / size * 2.0 - 1.0
        xs = np.tile(centers * half, size)
        ys = np.repeat(-centers * half, size)  # rows top to bottom
        cached = (xs, ys)
        _grid_cache[key] = cached
    return cached


def _camera_rays(origin: np.ndarray, forward: np.ndarray, up_hint: np.ndarray,
                 size: int, fov_deg: float) -> tuple[np.ndarray, np.ndarray]:
    right = np.cross(forward, up_hint)
    rn = np.linalg.norm(right)
    if rn < 1e-9:  # looking straight along the up axis
        right = np.array([1.0, 0.0, 0.0])
        rn = 1.0
    right = right / rn
    up = np.cross(right, forward)
    xs, ys = _ndc_grid(size, fov_deg)
    dirs = (forward[None, :] + xs[:, None] * right[None, :]
            + ys[:, None] * up[None, :])
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    origins = np.broadcast_to(origin, dirs.shape)
    return np.ascontiguousarray(origins), np.ascontiguousarray(dirs)


def eye_geometry(eyes: EyeState, head_pos: np.ndarray, head_quat: np.ndarray):
    """World-frame eye origins, per-eye gaze directions (with vergence),
    cyclopean origin/direction, and the head's up vector."""
    gaze_local = pan_tilt_to_direction(eyes.pan, eyes.tilt)
    mid_local = 0.5 * (_EYE_LOCAL["left"] + _EYE_LOCAL["right"])
    fix_local = mid_local + gaze_local * eyes.focal
    out = {}
    for name, off in _EYE_LOCAL.items():
        origin = head_pos + quat_rotate(head_quat, off)
        to_fix = fix_local - off
        d = to_fix / np.linalg.norm(to_fix)
        out[name] = (origin, quat_rotate(head_quat, d))
    cyclo_origin = head_pos + quat_rotate(head_quat, mid_local)
    cyclo_dir = quat_rotate(head_quat, gaze_local)
    up = quat_rotate(head_quat, np.array([0.0, 1.0, 0.0]))
    return out, cyclo_origin, cyclo_dir, up


def render_frame(scene: Scene, eyes: EyeState, head_pos, head_quat,
                 acuity: Optional[AcuityProfile] = None,
                 with_debug: bool = False,
                 retina_size: int = RETINA_SIZE) -> VisionFrame:
    """Render the four agent retinas (plus optional third-person debug view)
    and apply the acuity profile."""
    head_pos = np.asarray(head_pos, dtype=float)
    head_quat = np.asarray(head_quat, dtype=float)
    per_eye, cyclo_o, cyclo_d, up = eye_geometry(eyes, head_pos, head_quat)

    plan = []
    for eye in ("left", "right"):
        origin, fwd = per_eye[eye]
        for band, fov in (("central", CENTRAL_FOV), ("peripheral", PERIPHERAL_FOV)):
            o, d = _camera_rays(origin, fwd, up, retina_size, fov)
            plan.append((f"{eye}_{band}", fov, retina_size, o, d))
    if with_debug:
        cam_pos = head_pos + np.array([0.6, 0.5, 0.6])
        fwd = head_pos - cam_pos
        fwd = fwd / np.linalg.norm(fwd)
        o, d = _camera_rays(cam_pos, fwd, np.array([0.0, 1.0, 0.0]),
                            DEBUG_SIZE, DEBUG_FOV)
        plan.append(("debug", DEBUG_FOV, DEBUG_SIZE, o, d))

    all_o = np.concatenate([p[3] for p in plan])
    all_d = np.concatenate([p[4] for p in plan])
    n_rays = all_o.shape[0]
    hit_idx = np.empty(n_rays, dtype=np.int32)
    hit_dist = np.empty(n_rays, dtype=np.float64)
    hit_normal = np.empty((n_rays, 3), dtype=np.float64)
    scene.raycast_rows(all_o, all_d, RAY_MAX_DIST, hit_idx, hit_dist, hit_normal)

    colors = np.empty((n_rays, 3))
    miss = hit_idx < 0
    safe = np.where(miss, 0, hit_idx)
    colors[:] = scene.color[safe]
    colors[miss] = scene.background

    images = {}
    depths = {}
    cursor = 0
    for name, fov, size, _, _ in plan:
        count = size * size
        img = colors[cursor:cursor + count].reshape(size, size, 3).copy()
        dep = hit_dist[cursor:cursor + count].reshape(size, size).copy()
        images[name] = RetinaImage(fov, img)
        depths[name] = dep
        cursor += count

    # fixation: nearest entity on the cyclopean gaze ray
    fix_i = np.empty(1, dtype=np.int32)
    fix_d = np.empty(1, dtype=np.float64)
    fix_n = np.empty((1, 3), dtype=np.float64)
    scene.raycast_rows(np.ascontiguousarray(cyclo_o[None, :]),
                       np.ascontiguousarray(cyclo_d[None, :]),
                       RAY_MAX_DIST, fix_i, fix_d, fix_n)
    fixated = scene.row_ids()[int(fix_i[0])] if fix_i[0] >= 0 else None

    frame = VisionFrame(
        left_central=images["left_central"],
        left_peripheral=images["left_peripheral"],
        right_central=images["right_central"],
        right_peripheral=images["right_peripheral"],
        debug_view=images.get("debug"),
        fixated_entity=fixated,
        gaze_dir=cyclo_d,
        depths=depths,
    )
    if acuity is not None:
        frame = apply_acuity(frame, acuity)
    return frame


def blur_radius_map(depth: np.ndarray, profile: AcuityProfile) -> np.ndarray:
    """Per-pixel integer box-blur radius: 0 at or inside d_clear, MAX at or
    beyond d_max, linear (rounded) in between. Misses (inf) count as far."""
    t = (depth - profile.d_clear) / (profile.d_max - profile.d_clear)
    t = np.clip(np.where(np.isfinite(depth), t, 1.0), 0.0, 1.0)
    return np.floor(MAX_BLUR_PX * t + 0.5).astype(np.int64)


def box_blur(img: np.ndarray, radius: int) -> np.ndarray:
    """Mean over the (2r+1)^2 window clipped to the image (edge windows
    normalize by their actual pixel count)."""
    if radius <= 0:
        return img.copy()
    h, w, _ = img.shape
    integral = np.zeros((h + 1, w + 1, 3))
    integral[1:, 1:] = img.cumsum(axis=0).cumsum(axis=1)
    ys = np.arange(h)
    xs = np.arange(w)
    y0 = np.maximum(ys - radius, 0)
    y1 = np.minimum(ys + radius + 1, h)
    x0 = np.maximum(xs - radius, 0)
    x1 = np.minimum(xs + radius + 1, w)
    ya, yb = y0[:, None], y1[:, None]
    xa, xb = x0[None, :], x1[None, :]
    total = (integral[yb, xb] - integral[ya, xb]
             - integral[yb, xa] + integral[ya, xa])
    count = ((yb - ya) * (xb - xa)).astype(float)
    return total / count[:, :, None]


def apply_acuity(frame: VisionFrame, profile: AcuityProfile) -> VisionFrame:
    """blackout -> all-zero pixels; full -> identity (bit-exact);
    nearsighted -> per-pixel depth-dependent box blur."""
    if profile.mode == "full":
        return frame
    out = {}
    for name, retina in frame.retinas():
        if profile.mode == "blackout":
            out[name] = RetinaImage(retina.fov_deg, np.zeros_like(retina.pixels))
            continue
        depth = frame.depths[name]
        radii = blur_radius_map(depth, profile)
        result = retina.pixels.copy()
        for r in range(1, MAX_BLUR_PX + 1):
            mask = radii == r
            if mask.any():
                result[mask] = box_blur(retina.pixels, r)[mask]
        out[name] = RetinaImage(retina.fov_deg, result)
    return replace(frame, left_central=out["left_central"],
                   left_peripheral=out["left_peripheral"],
                   right_central=out["right_central"],
                   right_peripheral=out["right_peripheral"])


def gaze_error_to(scene: Scene, eyes: EyeState, head_pos, head_quat,
                  target_id: int) -> float:
    """Angle in degrees between the cyclopean gaze axis and the direction
    to the target entity's centroid."""
    ent = scene.entity(target_id)  # raises SceneError when unknown
    _, cyclo_o, cyclo_d, _ = eye_geometry(eyes, np.asarray(head_pos, float),
                                          np.asarray(head_quat, float))
    to_target = ent.pos - cyclo_o
    n = np.linalg.norm(to_target)
    if n < 1e-12:
        return 0.0
    return angle_between(cyclo_d, to_target)


def write_ppm(image: RetinaImage, path) -> None:
    """Dump one retina to an uncompressed binary PPM (P6) file."""
    data = np.floor(image.pixels * 255.0 + 0.5).astype(np.uint8)
    header = f"P6\n{image.width} {image.height}\n255\n".encode()
    with open(path, "wb") as f:
        f.write(header)
        f.write(data.tobytes())


def dump_frame(frame: VisionFrame, directory, prefix: str = "retina") -> list:
    """Write every image of the frame (debug view included when present)
    as PPM files; returns the written paths."""
    from pathlib import Path

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    images = list(frame.retinas())
    if frame.debug_view is not None:
        images.append(("debug", frame.debug_view))
    for name, img in images:
        path = directory / f"{prefix}_{name}.ppm"
        write_ppm(img, path)
        written.append(path)
    return written


def attention_only(scene: Scene, eyes: EyeState, head_pos, head_quat
                   ) -> tuple[np.ndarray, Optional[int]]:
    """Cyclopean gaze direction + fixated entity without rendering retinas
    (single ray); used when vision is disabled but the evaluation channel
    is still needed."""
    _, cyclo_o, cyclo_d, _ = eye_geometry(eyes, np.asarray(head_pos, float),
                                          np.asarray(head_quat, float))
    fix_i = np.empty(1, dtype=np.int32)
    fix_d = np.empty(1, dtype=np.float64)
    fix_n = np.empty((1, 3), dtype=np.float64)
    scene.raycast_rows(np.ascontiguousarray(cyclo_o[None, :]),
                       np.ascontiguousarray(cyclo_d[None, :]),
                       RAY_MAX_DIST, fix_i, fix_d, fix_n)
    fixated = scene.row_ids()[int(fix_i[0])] if fix_i[0] >= 0 else None
    return cyclo_d, fixated


def zero_frame(scene: Scene, eyes: EyeState, head_pos, head_quat,
               retina_size: int = RETINA_SIZE) -> VisionFrame:
    """All-zero retinas with a live attention channel; used when rendering
    is disabled so observation shapes stay constant."""
    gaze_dir, fixated = attention_only(scene, eyes, head_pos, head_quat)

    def img(fov):
        return RetinaImage(fov, np.zeros((retina_size, retina_size, 3)))

    return VisionFrame(img(CENTRAL_FOV), img(PERIPHERAL_FOV),
                       img(CENTRAL_FOV), img(PERIPHERAL_FOV),
                       None, fixated, gaze_dir, {})
