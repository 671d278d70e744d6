"""Small vector/quaternion toolkit shared by the world, body and vision code.

Quaternions are float64 arrays in (w, x, y, z) order. Everything here is
allocation-light scalar numpy; the batched hot paths live in `kernels`.
"""

from __future__ import annotations

import math

import numpy as np

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def vec(x: float, y: float, z: float) -> np.ndarray:
    return np.array([float(x), float(y), float(z)])


def norm(v: np.ndarray) -> float:
    return math.sqrt(float(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]))


def normalized(v: np.ndarray) -> np.ndarray:
    n = norm(v)
    if n == 0.0:
        raise ValueError("cannot normalize zero vector")
    return v / n


def quat_normalize(q: np.ndarray) -> np.ndarray:
    n = math.sqrt(float(np.dot(q, q)))
    if n == 0.0:
        raise ValueError("cannot normalize zero quaternion")
    return q / n


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    half = 0.5 * angle
    s = math.sin(half)
    return np.array(
        [math.cos(half), axis[0] * s, axis[1] * s, axis[2] * s]
    )


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector v by unit quaternion q (q v q*)."""
    w, x, y, z = q
    # t = 2 * cross(q.xyz, v)
    tx = 2.0 * (y * v[2] - z * v[1])
    ty = 2.0 * (z * v[0] - x * v[2])
    tz = 2.0 * (x * v[1] - y * v[0])
    return np.array(
        [
            v[0] + w * tx + (y * tz - z * ty),
            v[1] + w * ty + (z * tx - x * tz),
            v[2] + w * tz + (x * ty - y * tx),
        ]
    )


def quat_rotate_inverse(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    return quat_rotate(quat_conjugate(q), v)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """3x3 rotation matrix (world-from-local) for unit quaternion q."""
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_nlerp(a: np.ndarray, b: np.ndarray, t: float) -> np.ndarray:
    """Normalized lerp: cheap, deterministic interpolation for keyframes."""
    if float(np.dot(a, b)) < 0.0:
        b = -b
    return quat_normalize(a * (1.0 - t) + b * t)


def angle_between(a: np.ndarray, b: np.ndarray) -> float:
    """Angle in degrees between two nonzero vectors."""
    c = float(np.dot(a, b)) / (norm(a) * norm(b))
    return math.degrees(math.acos(max(-1.0, min(1.0, c))))


def pan_tilt_to_direction(pan_deg: float, tilt_deg: float) -> np.ndarray:
    """Gaze direction in the head frame. Identity gaze looks along +z;
    pan rotates toward +x, tilt toward +y."""
    p = math.radians(pan_deg)
    t = math.radians(tilt_deg)
    return np.array(
        [math.sin(p) * math.cos(t), math.sin(t), math.cos(p) * math.cos(t)]
    )


def direction_to_pan_tilt(d: np.ndarray) -> tuple[float, float]:
    """Inverse of pan_tilt_to_direction for a unit head-frame direction."""
    tilt = math.degrees(math.asin(max(-1.0, min(1.0, float(d[1])))))
    pan = math.degrees(math.atan2(float(d[0]), float(d[2])))
    return pan, tilt
