"""Pure-python (numpy) kernel backend.

Mirrors the API of the compiled `_core_c` extension; selected at import
time by `cribsim.kernels` when the extension is unavailable or disabled.

Shape kind codes shared with the compiled backend:
  0 sphere   params[0] = radius
  1 box      params[0:3] = half extents
  2 capsule  params[0] = radius, params[1] = half length (axis = local z)
  3 plane    params[0:3] = world unit normal, params[3] = offset (n.x = off)
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "python"

_EPS = 1e-9


def raycast_batch(origins, dirs, max_dist, kinds, params, pos, rot,
                  hit_idx, hit_dist, hit_normal):
    """Nearest-hit ray cast of P rays against N primitives.

    rot is (N, 3, 3) world-from-local. Fills hit_idx with the entity row
    (-1 for miss), hit_dist with distance, hit_normal with the world-frame
    surface normal at the hit.
    """
    p = origins.shape[0]
    hit_idx.fill(-1)
    hit_dist.fill(np.inf)
    hit_normal.fill(0.0)

    for n in range(kinds.shape[0]):
        kind = int(kinds[n])
        if kind == 3:
            nrm = params[n, 0:3]
            off = params[n, 3]
            denom = dirs @ nrm
            num = off - origins @ nrm
            with np.errstate(divide="ignore", invalid="ignore"):
                t = np.where(np.abs(denom) > _EPS, num / denom, np.inf)
            t = np.where(t > _EPS, t, np.inf)
            normals = np.broadcast_to(nrm, (p, 3))
        else:
            r = rot[n]
            o = (origins - pos[n]) @ r
            d = dirs @ r
            if kind == 0:
                t, normals = _sphere_hits(o, d, params[n, 0])
            elif kind == 1:
                t, normals = _box_hits(o, d, params[n, 0:3])
            elif kind == 2:
                t, normals = _capsule_hits(o, d, params[n, 0], params[n, 1])
            else:
                continue
            normals = normals @ r.T
        better = (t < hit_dist) & (t <= max_dist)
        if np.any(better):
            hit_dist[better] = t[better]
            hit_idx[better] = n
            hit_normal[better] = normals[better]
    hit_dist[hit_idx < 0] = np.inf


def _sphere_hits(o, d, radius):
    b = np.einsum("ij,ij->i", o, d)
    c = np.einsum("ij,ij->i", o, o) - radius * radius
    disc = b * b - c
    ok = disc >= 0.0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    t_near = -b - sq
    t_far = -b + sq
    t = np.where(t_near > _EPS, t_near, t_far)
    t = np.where(ok & (t > _EPS), t, np.inf)
    hitp = o + d * np.where(np.isfinite(t), t, 0.0)[:, None]
    normals = np.where(np.isfinite(t)[:, None], hitp / radius, 0.0)
    return t, normals


def _box_hits(o, d, half):
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
        t1 = (-half - o) * inv
        t2 = (half - o) * inv
    tmin_ax = np.minimum(t1, t2)
    tmax_ax = np.maximum(t1, t2)
    # Parallel-to-slab rays: hit only if origin inside that slab.
    par = np.abs(d) <= _EPS
    inside = np.abs(o) <= half
    tmin_ax = np.where(par, np.where(inside, -np.inf, np.inf), tmin_ax)
    tmax_ax = np.where(par, np.where(inside, np.inf, -np.inf), tmax_ax)
    tmin = tmin_ax.max(axis=1)
    tmax = tmax_ax.min(axis=1)
    ok = (tmax >= np.maximum(tmin, _EPS))
    t = np.where(tmin > _EPS, tmin, tmax)
    t = np.where(ok & (t > _EPS), t, np.inf)
    # Normal: the axis realizing tmin (entry face); for inside hits use exit face.
    entry = tmin > _EPS
    pick = np.where(entry[:, None], tmin_ax, tmax_ax)
    tpick = np.where(entry, tmin, tmax)
    axis = np.argmax(pick == tpick[:, None], axis=1)
    normals = np.zeros_like(o)
    rows = np.arange(o.shape[0])
    sign = np.where(d[rows, axis] < 0.0, 1.0, -1.0)
    sign = np.where(entry, sign, -sign)
    normals[rows, axis] = sign
    return t, normals


def _capsule_hits(o, d, radius, half_len):
    # Infinite cylinder about local z, then spherical caps.
    a = d[:, 0] ** 2 + d[:, 1] ** 2
    b = o[:, 0] * d[:, 0] + o[:, 1] * d[:, 1]
    c = o[:, 0] ** 2 + o[:, 1] ** 2 - radius * radius
    disc = b * b - a * c
    okc = (disc >= 0.0) & (a > _EPS)
    sq = np.sqrt(np.where(okc, disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t_near = np.where(okc, (-b - sq) / a, np.inf)
        t_far = np.where(okc, (-b + sq) / a, np.inf)
    t_cyl = np.where(t_near > _EPS, t_near, t_far)
    z_hit = o[:, 2] + d[:, 2] * t_cyl
    t_cyl = np.where(okc & (t_cyl > _EPS) & (np.abs(z_hit) <= half_len), t_cyl, np.inf)

    t = t_cyl
    for zc in (-half_len, half_len):
        oc = o.copy()
        oc[:, 2] -= zc
        bs = np.einsum("ij,ij->i", oc, d)
        cs = np.einsum("ij,ij->i", oc, oc) - radius * radius
        ds = bs * bs - cs
        oks = ds >= 0.0
        sqs = np.sqrt(np.where(oks, ds, 0.0))
        ts = np.where(-bs - sqs > _EPS, -bs - sqs, -bs + sqs)
        zs = o[:, 2] + d[:, 2] * ts
        # Cap sphere counts only on its own side of the cylinder section.
        side_ok = (zs - zc) * zc >= 0.0 if zc != 0.0 else np.abs(zs) >= 0.0
        ts = np.where(oks & (ts > _EPS) & side_ok, ts, np.inf)
        t = np.minimum(t, ts)

    hitp = o + d * np.where(np.isfinite(t), t, 0.0)[:, None]
    zclamp = np.clip(hitp[:, 2], -half_len, half_len)
    axis_pt = np.stack([np.zeros_like(zclamp), np.zeros_like(zclamp), zclamp], axis=1)
    delta = hitp - axis_pt
    ln = np.linalg.norm(delta, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        normals = np.where((np.isfinite(t) & (ln > _EPS))[:, None], delta / ln[:, None], 0.0)
    return t, normals


def integrate_joints(angles, vels, torque_norm, max_torque, inertia, damping,
                     lo, hi, strength, dt):
    """First-order joint update; clamps to limits and kills velocity there."""
    w = (1.0 - damping * dt) * vels + (torque_norm * max_torque * strength / inertia) * dt
    raw = angles + w * dt
    clamped = np.clip(raw, lo, hi)
    at_limit = raw != clamped
    angles[:] = clamped
    vels[:] = np.where(at_limit, 0.0, w)


def fk_chain(parents, mount_pos, mount_quat, axes, joint_of, angles,
             root_pos, root_quat, out_pos, out_quat):
    """World poses for a topologically sorted kinematic tree.

    Node pose = parent pose * mount transform * axis rotation(angle).
    parents[i] < i; parents[0] == -1 (root node uses root_pos/root_quat
    as its parent frame). Plain-float math: scalar numpy is too slow here.
    """
    m = parents.shape[0]
    px = [0.0] * m
    py = [0.0] * m
    pz = [0.0] * m
    qw = [0.0] * m
    qx = [0.0] * m
    qy = [0.0] * m
    qz = [0.0] * m
    rpx, rpy, rpz = float(root_pos[0]), float(root_pos[1]), float(root_pos[2])
    rqw, rqx, rqy, rqz = (float(root_quat[0]), float(root_quat[1]),
                          float(root_quat[2]), float(root_quat[3]))
    for i in range(m):
        par = int(parents[i])
        if par < 0:
            ppx, ppy, ppz = rpx, rpy, rpz
            pqw, pqx, pqy, pqz = rqw, rqx, rqy, rqz
        else:
            ppx, ppy, ppz = px[par], py[par], pz[par]
            pqw, pqx, pqy, pqz = qw[par], qx[par], qy[par], qz[par]
        mx, my, mz = float(mount_pos[i, 0]), float(mount_pos[i, 1]), float(mount_pos[i, 2])
        # world position = parent pos + parent rot * mount offset
        tx = 2.0 * (pqy * mz - pqz * my)
        ty = 2.0 * (pqz * mx - pqx * mz)
        tz = 2.0 * (pqx * my - pqy * mx)
        wx = ppx + mx + pqw * tx + (pqy * tz - pqz * ty)
        wy = ppy + my + pqw * ty + (pqz * tx - pqx * tz)
        wz = ppz + mz + pqw * tz + (pqx * ty - pqy * tx)
        # orientation = parent ∘ mount ∘ axis-angle
        bw, bx, by, bz = (float(mount_quat[i, 0]), float(mount_quat[i, 1]),
                          float(mount_quat[i, 2]), float(mount_quat[i, 3]))
        cw = pqw * bw - pqx * bx - pqy * by - pqz * bz
        cx = pqw * bx + pqx * bw + pqy * bz - pqz * by
        cy = pqw * by - pqx * bz + pqy * bw + pqz * bx
        cz = pqw * bz + pqx * by - pqy * bx + pqz * bw
        j = int(joint_of[i])
        if j >= 0:
            half = 0.5 * float(angles[j])
            s = math.sin(half)
            aw = math.cos(half)
            ax = float(axes[i, 0]) * s
            ay = float(axes[i, 1]) * s
            az = float(axes[i, 2]) * s
            dw = cw * aw - cx * ax - cy * ay - cz * az
            dx = cw * ax + cx * aw + cy * az - cz * ay
            dy = cw * ay - cx * az + cy * aw + cz * ax
            dz = cw * az + cx * ay - cy * ax + cz * aw
            cw, cx, cy, cz = dw, dx, dy, dz
        px[i], py[i], pz[i] = wx, wy, wz
        qw[i], qx[i], qy[i], qz[i] = cw, cx, cy, cz
        out_pos[i, 0] = wx
        out_pos[i, 1] = wy
        out_pos[i, 2] = wz
        out_quat[i, 0] = cw
        out_quat[i, 1] = cx
        out_quat[i, 2] = cy
        out_quat[i, 3] = cz


def touch_bits(site_pos, site_radius, site_seg, contact_pts, contact_seg, out_bits):
    """Set bit i when a contact on sensor i's segment lies within its radius."""
    out_bits.fill(0)
    for c in range(contact_pts.shape[0]):
        seg = contact_seg[c]
        mask = site_seg == seg
        if not np.any(mask):
            continue
        delta = site_pos[mask] - contact_pts[c]
        d2 = np.einsum("ij,ij->i", delta, delta)
        hits = d2 <= site_radius[mask] ** 2
        idx = np.flatnonzero(mask)[hits]
        out_bits[idx] = 1
