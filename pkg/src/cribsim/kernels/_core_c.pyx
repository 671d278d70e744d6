# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel backend: batched ray casting, joint integration,
forward kinematics and touch-bit extraction.

Same API and shape-kind codes as the `_core_py` fallback.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, cos, fabs, sin, sqrt

BACKEND = "compiled"

cdef double _EPS = 1e-9


def raycast_batch(cnp.float64_t[:, ::1] origins, cnp.float64_t[:, ::1] dirs,
                  double max_dist, cnp.int32_t[::1] kinds,
                  cnp.float64_t[:, ::1] params, cnp.float64_t[:, ::1] pos,
                  cnp.float64_t[:, :, ::1] rot, cnp.int32_t[::1] hit_idx,
                  cnp.float64_t[::1] hit_dist, cnp.float64_t[:, ::1] hit_normal):
    cdef Py_ssize_t p = origins.shape[0]
    cdef Py_ssize_t n = kinds.shape[0]
    cdef Py_ssize_t i, e, ax
    cdef int kind
    cdef double ox, oy, oz, dx, dy, dz
    cdef double lox, loy, loz, ldx, ldy, ldz
    cdef double best, t, nxl, nyl, nzl, nx, ny, nz
    cdef double r00, r01, r02, r10, r11, r12, r20, r21, r22
    cdef double radius, hlen, b, c, disc, sq, tn, tf
    cdef double hx, hy, hz, denom, num, off
    cdef double t1, t2, tmn, tmx, lo_t, hi_t
    cdef double a_c, b_c, c_c, zhit, zc, ln, zcl
    cdef double ex, ey, ez
    cdef int best_e
    cdef double o_ax, d_ax, h_ax, sgn

    for i in range(p):
        ox = origins[i, 0]; oy = origins[i, 1]; oz = origins[i, 2]
        dx = dirs[i, 0]; dy = dirs[i, 1]; dz = dirs[i, 2]
        best = INFINITY
        best_e = -1
        nx = 0.0; ny = 0.0; nz = 0.0
        for e in range(n):
            kind = kinds[e]
            if kind == 3:
                denom = dirs[i, 0] * params[e, 0] + dirs[i, 1] * params[e, 1] + dirs[i, 2] * params[e, 2]
                if fabs(denom) <= _EPS:
                    continue
                num = params[e, 3] - (ox * params[e, 0] + oy * params[e, 1] + oz * params[e, 2])
                t = num / denom
                if t > _EPS and t < best and t <= max_dist:
                    best = t; best_e = e
                    nx = params[e, 0]; ny = params[e, 1]; nz = params[e, 2]
                continue
            # transform ray into the entity's local frame: l = R^T (w - pos)
            r00 = rot[e, 0, 0]; r01 = rot[e, 0, 1]; r02 = rot[e, 0, 2]
            r10 = rot[e, 1, 0]; r11 = rot[e, 1, 1]; r12 = rot[e, 1, 2]
            r20 = rot[e, 2, 0]; r21 = rot[e, 2, 1]; r22 = rot[e, 2, 2]
            ex = ox - pos[e, 0]; ey = oy - pos[e, 1]; ez = oz - pos[e, 2]
            lox = ex * r00 + ey * r10 + ez * r20
            loy = ex * r01 + ey * r11 + ez * r21
            loz = ex * r02 + ey * r12 + ez * r22
            ldx = dx * r00 + dy * r10 + dz * r20
            ldy = dx * r01 + dy * r11 + dz * r21
            ldz = dx * r02 + dy * r12 + dz * r22
            t = INFINITY
            nxl = 0.0; nyl = 0.0; nzl = 0.0
            if kind == 0:
                radius = params[e, 0]
                b = lox * ldx + loy * ldy + loz * ldz
                c = lox * lox + loy * loy + loz * loz - radius * radius
                disc = b * b - c
                if disc < 0.0:
                    continue
                sq = sqrt(disc)
                tn = -b - sq
                tf = -b + sq
                t = tn if tn > _EPS else tf
                if t <= _EPS:
                    continue
                hx = lox + ldx * t; hy = loy + ldy * t; hz = loz + ldz * t
                nxl = hx / radius; nyl = hy / radius; nzl = hz / radius
            elif kind == 1:
                tmn = -INFINITY
                tmx = INFINITY
                ax = -1
                sgn = 0.0
                for e2 in range(3):
                    if e2 == 0:
                        o_ax = lox; d_ax = ldx
                    elif e2 == 1:
                        o_ax = loy; d_ax = ldy
                    else:
                        o_ax = loz; d_ax = ldz
                    h_ax = params[e, e2]
                    if fabs(d_ax) <= _EPS:
                        if fabs(o_ax) > h_ax:
                            tmn = INFINITY
                            break
                        continue
                    t1 = (-h_ax - o_ax) / d_ax
                    t2 = (h_ax - o_ax) / d_ax
                    if t1 > t2:
                        lo_t = t2; hi_t = t1
                    else:
                        lo_t = t1; hi_t = t2
                    if lo_t > tmn:
                        tmn = lo_t
                        ax = e2
                        sgn = -1.0 if d_ax > 0.0 else 1.0
                    if hi_t < tmx:
                        tmx = hi_t
                if tmx < tmn or tmx <= _EPS:
                    continue
                if tmn > _EPS:
                    t = tmn
                else:
                    # origin inside the box: exit face
                    t = tmx
                    ax = -1
                    for e2 in range(3):
                        if e2 == 0:
                            o_ax = lox; d_ax = ldx
                        elif e2 == 1:
                            o_ax = loy; d_ax = ldy
                        else:
                            o_ax = loz; d_ax = ldz
                        h_ax = params[e, e2]
                        if fabs(d_ax) <= _EPS:
                            continue
                        t2 = (h_ax - o_ax) / d_ax
                        t1 = (-h_ax - o_ax) / d_ax
                        hi_t = t2 if t2 > t1 else t1
                        if hi_t == tmx:
                            ax = e2
                            sgn = 1.0 if d_ax > 0.0 else -1.0
                            break
                if ax == 0:
                    nxl = sgn
                elif ax == 1:
                    nyl = sgn
                elif ax == 2:
                    nzl = sgn
            elif kind == 2:
                radius = params[e, 0]
                hlen = params[e, 1]
                t = INFINITY
                a_c = ldx * ldx + ldy * ldy
                b_c = lox * ldx + loy * ldy
                c_c = lox * lox + loy * loy - radius * radius
                if a_c > _EPS:
                    disc = b_c * b_c - a_c * c_c
                    if disc >= 0.0:
                        sq = sqrt(disc)
                        tn = (-b_c - sq) / a_c
                        tf = (-b_c + sq) / a_c
                        t1 = tn if tn > _EPS else tf
                        if t1 > _EPS:
                            zhit = loz + ldz * t1
                            if fabs(zhit) <= hlen:
                                t = t1
                for e2 in range(2):
                    zc = -hlen if e2 == 0 else hlen
                    b = lox * ldx + loy * ldy + (loz - zc) * ldz
                    c = lox * lox + loy * loy + (loz - zc) * (loz - zc) - radius * radius
                    disc = b * b - c
                    if disc < 0.0:
                        continue
                    sq = sqrt(disc)
                    tn = -b - sq
                    tf = -b + sq
                    t1 = tn if tn > _EPS else tf
                    if t1 <= _EPS or t1 >= t:
                        continue
                    zhit = loz + ldz * t1
                    if (zhit - zc) * zc >= 0.0:
                        t = t1
                if t == INFINITY:
                    continue
                hx = lox + ldx * t; hy = loy + ldy * t; hz = loz + ldz * t
                zcl = hz
                if zcl > hlen:
                    zcl = hlen
                elif zcl < -hlen:
                    zcl = -hlen
                ln = sqrt(hx * hx + hy * hy + (hz - zcl) * (hz - zcl))
                if ln > _EPS:
                    nxl = hx / ln; nyl = hy / ln; nzl = (hz - zcl) / ln
            else:
                continue
            if t > _EPS and t < best and t <= max_dist:
                best = t
                best_e = e
                nx = nxl * r00 + nyl * r01 + nzl * r02
                ny = nxl * r10 + nyl * r11 + nzl * r12
                nz = nxl * r20 + nyl * r21 + nzl * r22
        hit_idx[i] = best_e
        hit_dist[i] = best if best_e >= 0 else INFINITY
        hit_normal[i, 0] = nx; hit_normal[i, 1] = ny; hit_normal[i, 2] = nz


def integrate_joints(cnp.float64_t[::1] angles, cnp.float64_t[::1] vels,
                     cnp.float64_t[::1] torque_norm, cnp.float64_t[::1] max_torque,
                     cnp.float64_t[::1] inertia, cnp.float64_t[::1] damping,
                     cnp.float64_t[::1] lo, cnp.float64_t[::1] hi,
                     double strength, double dt):
    cdef Py_ssize_t j
    cdef double w, raw
    for j in range(angles.shape[0]):
        w = (1.0 - damping[j] * dt) * vels[j] + (torque_norm[j] * max_torque[j] * strength / inertia[j]) * dt
        raw = angles[j] + w * dt
        if raw < lo[j]:
            angles[j] = lo[j]
            vels[j] = 0.0
        elif raw > hi[j]:
            angles[j] = hi[j]
            vels[j] = 0.0
        else:
            angles[j] = raw
            vels[j] = w


def fk_chain(cnp.int32_t[::1] parents, cnp.float64_t[:, ::1] mount_pos,
             cnp.float64_t[:, ::1] mount_quat, cnp.float64_t[:, ::1] axes,
             cnp.int32_t[::1] joint_of, cnp.float64_t[::1] angles,
             cnp.float64_t[::1] root_pos, cnp.float64_t[::1] root_quat,
             cnp.float64_t[:, ::1] out_pos, cnp.float64_t[:, ::1] out_quat):
    cdef Py_ssize_t m = parents.shape[0]
    cdef Py_ssize_t i
    cdef int par, j
    cdef double ppx, ppy, ppz, pqw, pqx, pqy, pqz
    cdef double mx, my, mz, tx, ty, tz, wx, wy, wz
    cdef double bw, bx, by, bz, cw, cx, cy, cz
    cdef double half, s, aw, axx, ayy, azz, dw, dxx, dyy, dzz
    for i in range(m):
        par = parents[i]
        if par < 0:
            ppx = root_pos[0]; ppy = root_pos[1]; ppz = root_pos[2]
            pqw = root_quat[0]; pqx = root_quat[1]; pqy = root_quat[2]; pqz = root_quat[3]
        else:
            ppx = out_pos[par, 0]; ppy = out_pos[par, 1]; ppz = out_pos[par, 2]
            pqw = out_quat[par, 0]; pqx = out_quat[par, 1]; pqy = out_quat[par, 2]; pqz = out_quat[par, 3]
        mx = mount_pos[i, 0]; my = mount_pos[i, 1]; mz = mount_pos[i, 2]
        tx = 2.0 * (pqy * mz - pqz * my)
        ty = 2.0 * (pqz * mx - pqx * mz)
        tz = 2.0 * (pqx * my - pqy * mx)
        wx = ppx + mx + pqw * tx + (pqy * tz - pqz * ty)
        wy = ppy + my + pqw * ty + (pqz * tx - pqx * tz)
        wz = ppz + mz + pqw * tz + (pqx * ty - pqy * tx)
        bw = mount_quat[i, 0]; bx = mount_quat[i, 1]; by = mount_quat[i, 2]; bz = mount_quat[i, 3]
        cw = pqw * bw - pqx * bx - pqy * by - pqz * bz
        cx = pqw * bx + pqx * bw + pqy * bz - pqz * by
        cy = pqw * by - pqx * bz + pqy * bw + pqz * bx
        cz = pqw * bz + pqx * by - pqy * bx + pqz * bw
        j = joint_of[i]
        if j >= 0:
            half = 0.5 * angles[j]
            s = sin(half)
            aw = cos(half)
            axx = axes[i, 0] * s; ayy = axes[i, 1] * s; azz = axes[i, 2] * s
            dw = cw * aw - cx * axx - cy * ayy - cz * azz
            dxx = cw * axx + cx * aw + cy * azz - cz * ayy
            dyy = cw * ayy - cx * azz + cy * aw + cz * axx
            dzz = cw * azz + cx * ayy - cy * axx + cz * aw
            cw = dw; cx = dxx; cy = dyy; cz = dzz
        out_pos[i, 0] = wx; out_pos[i, 1] = wy; out_pos[i, 2] = wz
        out_quat[i, 0] = cw; out_quat[i, 1] = cx; out_quat[i, 2] = cy; out_quat[i, 3] = cz


def touch_bits(cnp.float64_t[:, ::1] site_pos, cnp.float64_t[::1] site_radius,
               cnp.int32_t[::1] site_seg, cnp.float64_t[:, ::1] contact_pts,
               cnp.int32_t[::1] contact_seg, cnp.uint8_t[::1] out_bits):
    cdef Py_ssize_t s_n = site_pos.shape[0]
    cdef Py_ssize_t c_n = contact_pts.shape[0]
    cdef Py_ssize_t s, c
    cdef double ddx, ddy, ddz, d2
    for s in range(s_n):
        out_bits[s] = 0
    for c in range(c_n):
        for s in range(s_n):
            if site_seg[s] != contact_seg[c]:
                continue
            if out_bits[s]:
                continue
            ddx = site_pos[s, 0] - contact_pts[c, 0]
            ddy = site_pos[s, 1] - contact_pts[c, 1]
            ddz = site_pos[s, 2] - contact_pts[c, 2]
            d2 = ddx * ddx + ddy * ddy + ddz * ddz
            if d2 <= site_radius[s] * site_radius[s]:
                out_bits[s] = 1
