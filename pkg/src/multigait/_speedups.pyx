# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled physics substep kernel.

Arithmetic mirrors multigait._substeps_py operation-for-operation (same
order, libm transcendentals, no FMA contraction) so both backends produce
bit-identical trajectories.  See that module for the parameter layout.
"""

from libc.math cimport cos, isfinite, sin, sqrt

import numpy as np

BACKEND = "compiled"

cdef double LEG_FRONT[4]
cdef double LEG_SIDE[4]
LEG_FRONT[0] = 1.0; LEG_FRONT[1] = 1.0; LEG_FRONT[2] = -1.0; LEG_FRONT[3] = -1.0
LEG_SIDE[0] = -1.0; LEG_SIDE[1] = 1.0; LEG_SIDE[2] = -1.0; LEG_SIDE[3] = 1.0

cdef double CORN_X[8]
cdef double CORN_Y[8]
cdef double CORN_Z[8]
cdef int _ci = 0
for _sx in (1.0, -1.0):
    for _sy in (1.0, -1.0):
        for _sz in (1.0, -1.0):
            CORN_X[_ci] = _sx; CORN_Y[_ci] = _sy; CORN_Z[_ci] = _sz
            _ci += 1


cdef inline void _rot_matrix(double* s, double* r) noexcept nogil:
    cdef double qw = s[3], qx = s[4], qy = s[5], qz = s[6]
    r[0] = 1 - 2 * (qy * qy + qz * qz); r[1] = 2 * (qx * qy - qz * qw); r[2] = 2 * (qx * qz + qy * qw)
    r[3] = 2 * (qx * qy + qz * qw); r[4] = 1 - 2 * (qx * qx + qz * qz); r[5] = 2 * (qy * qz - qx * qw)
    r[6] = 2 * (qx * qz - qy * qw); r[7] = 2 * (qy * qz + qx * qw); r[8] = 1 - 2 * (qx * qx + qy * qy)


cdef inline void _foot_local(int leg, double a, double b, double c, double* par,
                             double* p, double* ja, double* jb, double* jc) noexcept nogil:
    cdef double hip_x = par[17], hip_y = par[18], d = par[19], l1 = par[20], l2 = par[21]
    cdef double fs = LEG_FRONT[leg], ls = LEG_SIDE[leg]
    cdef double sb = sin(b), cb = cos(b)
    cdef double sbc = sin(b + c), cbc = cos(b + c)
    cdef double ux = -l1 * sb - l2 * sbc
    cdef double uy = ls * d
    cdef double uz = -l1 * cb - l2 * cbc
    cdef double ca = cos(a), sa = sin(a)
    cdef double ry = ca * uy - sa * uz
    cdef double rz = sa * uy + ca * uz
    p[0] = fs * hip_x + ux
    p[1] = ls * hip_y + ry
    p[2] = rz
    cdef double dux_db = -l1 * cb - l2 * cbc
    cdef double duz_db = l1 * sb + l2 * sbc
    cdef double dux_dc = -l2 * cbc
    cdef double duz_dc = l2 * sbc
    ja[0] = 0.0; ja[1] = -rz; ja[2] = ry
    jb[0] = dux_db; jb[1] = -sa * duz_db; jb[2] = ca * duz_db
    jc[0] = dux_dc; jc[1] = -sa * duz_dc; jc[2] = ca * duz_dc


cdef inline void _contact_force(double pw_z, double vw_x, double vw_y, double vw_z,
                                double* par, double* f) noexcept nogil:
    cdef double depth = -pw_z
    f[0] = 0.0; f[1] = 0.0; f[2] = 0.0
    if depth <= 0.0:
        return
    cdef double fn = par[5] * depth + par[6] * (-vw_z)
    if fn < 0.0:
        fn = 0.0
    cdef double vt = sqrt(vw_x * vw_x + vw_y * vw_y)
    cdef double ft, fv
    if vt > 1e-9:
        ft = par[7] * fn
        fv = par[8] * vt
        if fv < ft:
            ft = fv
        f[0] = -ft * vw_x / vt
        f[1] = -ft * vw_y / vt
    f[2] = fn


cdef void _substep(double* s, double* tau, double dt, double* par) noexcept nogil:
    cdef double joint_inertia = par[9]
    cdef double mass = par[0]
    cdef int j, leg, k
    cdef double dq, q, lo, hi

    for j in range(12):
        dq = s[25 + j] + dt * tau[j] / joint_inertia
        q = s[13 + j] + dt * dq
        lo = par[46 + j]
        hi = par[58 + j]
        if q < lo:
            q = lo
            if dq < 0.0:
                dq = 0.0
        elif q > hi:
            q = hi
            if dq > 0.0:
                dq = 0.0
        s[13 + j] = q
        s[25 + j] = dq

    cdef double r[9]
    _rot_matrix(s, r)
    cdef double wbx = s[10], wby = s[11], wbz = s[12]
    cdef double wwx = r[0] * wbx + r[1] * wby + r[2] * wbz
    cdef double wwy = r[3] * wbx + r[4] * wby + r[5] * wbz
    cdef double wwz = r[6] * wbx + r[7] * wby + r[8] * wbz

    cdef double fx_tot = 0.0
    cdef double fy_tot = 0.0
    cdef double fz_tot = -mass * par[4]
    cdef double tx_tot = 0.0
    cdef double ty_tot = 0.0
    cdef double tz_tot = 0.0

    cdef double p[3]
    cdef double ja[3]
    cdef double jb[3]
    cdef double jc[3]
    cdef double f[3]
    cdef double a, b, c, da, db, dc
    cdef double rx, ry, rz, pw_z, lx, ly, lz, vw_x, vw_y, vw_z
    cdef double bx, by, bz

    for leg in range(4):
        a = s[13 + 3 * leg]
        b = s[13 + 3 * leg + 1]
        c = s[13 + 3 * leg + 2]
        _foot_local(leg, a, b, c, par, p, ja, jb, jc)
        rx = r[0] * p[0] + r[1] * p[1] + r[2] * p[2]
        ry = r[3] * p[0] + r[4] * p[1] + r[5] * p[2]
        rz = r[6] * p[0] + r[7] * p[1] + r[8] * p[2]
        pw_z = s[2] + rz
        if pw_z > 0.05:
            continue
        da = s[25 + 3 * leg]
        db = s[25 + 3 * leg + 1]
        dc = s[25 + 3 * leg + 2]
        lx = ja[0] * da + jb[0] * db + jc[0] * dc
        ly = ja[1] * da + jb[1] * db + jc[1] * dc
        lz = ja[2] * da + jb[2] * db + jc[2] * dc
        vw_x = s[7] + (wwy * rz - wwz * ry) + (r[0] * lx + r[1] * ly + r[2] * lz)
        vw_y = s[8] + (wwz * rx - wwx * rz) + (r[3] * lx + r[4] * ly + r[5] * lz)
        vw_z = s[9] + (wwx * ry - wwy * rx) + (r[6] * lx + r[7] * ly + r[8] * lz)
        _contact_force(pw_z, vw_x, vw_y, vw_z, par, f)
        fx_tot += f[0]
        fy_tot += f[1]
        fz_tot += f[2]
        tx_tot += ry * f[2] - rz * f[1]
        ty_tot += rz * f[0] - rx * f[2]
        tz_tot += rx * f[1] - ry * f[0]

    cdef double hx, hy, hz
    if par[70] != 0.0:
        hx = par[14]; hy = par[15]; hz = par[16]
        for k in range(8):
            bx = CORN_X[k] * hx
            by = CORN_Y[k] * hy
            bz = CORN_Z[k] * hz
            rx = r[0] * bx + r[1] * by + r[2] * bz
            ry = r[3] * bx + r[4] * by + r[5] * bz
            rz = r[6] * bx + r[7] * by + r[8] * bz
            pw_z = s[2] + rz
            if pw_z > 0.0:
                continue
            vw_x = s[7] + (wwy * rz - wwz * ry)
            vw_y = s[8] + (wwz * rx - wwx * rz)
            vw_z = s[9] + (wwx * ry - wwy * rx)
            _contact_force(pw_z, vw_x, vw_y, vw_z, par, f)
            fx_tot += f[0]
            fy_tot += f[1]
            fz_tot += f[2]
            tx_tot += ry * f[2] - rz * f[1]
            ty_tot += rz * f[0] - rx * f[2]
            tz_tot += rx * f[1] - ry * f[0]

    s[7] += dt * fx_tot / mass
    s[8] += dt * fy_tot / mass
    s[9] += dt * fz_tot / mass
    s[0] += dt * s[7]
    s[1] += dt * s[8]
    s[2] += dt * s[9]

    cdef double tbx = r[0] * tx_tot + r[3] * ty_tot + r[6] * tz_tot
    cdef double tby = r[1] * tx_tot + r[4] * ty_tot + r[7] * tz_tot
    cdef double tbz = r[2] * tx_tot + r[5] * ty_tot + r[8] * tz_tot
    cdef double ix = par[1], iy = par[2], iz = par[3]
    cdef double gx = wby * (iz * wbz) - wbz * (iy * wby)
    cdef double gy = wbz * (ix * wbx) - wbx * (iz * wbz)
    cdef double gz = wbx * (iy * wby) - wby * (ix * wbx)
    wbx += dt * (tbx - gx) / ix
    wby += dt * (tby - gy) / iy
    wbz += dt * (tbz - gz) / iz
    s[10] = wbx; s[11] = wby; s[12] = wbz

    cdef double qw = s[3], qx = s[4], qy = s[5], qz = s[6]
    cdef double nw = qw + 0.5 * dt * (-qx * wbx - qy * wby - qz * wbz)
    cdef double nx = qx + 0.5 * dt * (qw * wbx + qy * wbz - qz * wby)
    cdef double ny = qy + 0.5 * dt * (qw * wby - qx * wbz + qz * wbx)
    cdef double nz = qz + 0.5 * dt * (qw * wbz + qx * wby - qy * wbx)
    cdef double norm = sqrt(nw * nw + nx * nx + ny * ny + nz * nz)
    s[3] = nw / norm
    s[4] = nx / norm
    s[5] = ny / norm
    s[6] = nz / norm


cdef void _pd(double* tau, double* s, double* q_des, double* par) noexcept nogil:
    cdef int j
    cdef double t, lim
    for j in range(12):
        t = par[22 + j] * (q_des[j] - s[13 + j]) - par[34 + j] * s[25 + j]
        lim = par[10]
        if t > lim:
            t = lim
        elif t < -lim:
            t = -lim
        tau[j] = t


cdef int _healthy(double* s, double* par) noexcept nogil:
    cdef double lim = par[13]
    cdef int i
    for i in range(37):
        if not isfinite(s[i]):
            return 0
    for i in range(12):
        if s[25 + i] > lim or s[25 + i] < -lim:
            return 0
    return 1


cdef _derived(double* s, double* par):
    cdef double r[9]
    _rot_matrix(s, r)
    cdef double wbx = s[10], wby = s[11], wbz = s[12]
    cdef double wwx = r[0] * wbx + r[1] * wby + r[2] * wbz
    cdef double wwy = r[3] * wbx + r[4] * wby + r[5] * wbz
    cdef double wwz = r[6] * wbx + r[7] * wby + r[8] * wbz
    foot_pos = np.empty((4, 3))
    foot_vel = np.empty((4, 3))
    foot_h = np.empty(4)
    contact = np.zeros(4, dtype=np.uint8)
    cdef double[:, ::1] fp = foot_pos
    cdef double[:, ::1] fv = foot_vel
    cdef double[::1] fh = foot_h
    cdef unsigned char[::1] ct = contact
    cdef double p[3]
    cdef double ja[3]
    cdef double jb[3]
    cdef double jc[3]
    cdef int leg, k
    cdef double a, b, c, da, db, dc, rx, ry, rz, lx, ly, lz
    for leg in range(4):
        a = s[13 + 3 * leg]
        b = s[13 + 3 * leg + 1]
        c = s[13 + 3 * leg + 2]
        _foot_local(leg, a, b, c, par, p, ja, jb, jc)
        rx = r[0] * p[0] + r[1] * p[1] + r[2] * p[2]
        ry = r[3] * p[0] + r[4] * p[1] + r[5] * p[2]
        rz = r[6] * p[0] + r[7] * p[1] + r[8] * p[2]
        da = s[25 + 3 * leg]
        db = s[25 + 3 * leg + 1]
        dc = s[25 + 3 * leg + 2]
        lx = ja[0] * da + jb[0] * db + jc[0] * dc
        ly = ja[1] * da + jb[1] * db + jc[1] * dc
        lz = ja[2] * da + jb[2] * db + jc[2] * dc
        fp[leg, 0] = s[0] + rx
        fp[leg, 1] = s[1] + ry
        fp[leg, 2] = s[2] + rz
        fv[leg, 0] = s[7] + (wwy * rz - wwz * ry) + (r[0] * lx + r[1] * ly + r[2] * lz)
        fv[leg, 1] = s[8] + (wwz * rx - wwx * rz) + (r[3] * lx + r[4] * ly + r[5] * lz)
        fv[leg, 2] = s[9] + (wwx * ry - wwy * rx) + (r[6] * lx + r[7] * ly + r[8] * lz)
        fh[leg] = s[2] + rz
        if fh[leg] <= par[11]:
            ct[leg] = 1
    cdef int body_contact = 0
    cdef double hx = par[14], hy = par[15], hz = par[16]
    cdef double cz
    for k in range(8):
        cz = s[2] + r[6] * (CORN_X[k] * hx) + r[7] * (CORN_Y[k] * hy) + r[8] * (CORN_Z[k] * hz)
        if cz < par[12]:
            body_contact = 1
            break
    ang_world = np.array([wwx, wwy, wwz])
    return foot_pos, foot_vel, foot_h, contact, body_contact, ang_world


cdef void _pack_state(double* s, double[::1] pos, double[::1] quat, double[::1] lin_vel,
                      double[::1] ang_vel_world, double[::1] joint_pos, double[::1] joint_vel) noexcept:
    cdef double r[9]
    cdef int j
    s[3] = quat[0]; s[4] = quat[1]; s[5] = quat[2]; s[6] = quat[3]
    _rot_matrix(s, r)
    s[0] = pos[0]; s[1] = pos[1]; s[2] = pos[2]
    s[7] = lin_vel[0]; s[8] = lin_vel[1]; s[9] = lin_vel[2]
    s[10] = r[0] * ang_vel_world[0] + r[3] * ang_vel_world[1] + r[6] * ang_vel_world[2]
    s[11] = r[1] * ang_vel_world[0] + r[4] * ang_vel_world[1] + r[7] * ang_vel_world[2]
    s[12] = r[2] * ang_vel_world[0] + r[5] * ang_vel_world[1] + r[8] * ang_vel_world[2]
    for j in range(12):
        s[13 + j] = joint_pos[j]
        s[25 + j] = joint_vel[j]


cdef _unpack(double* s, double* tau, double* par, int ok, int n_done):
    foot_pos, foot_vel, foot_h, contact, body_contact, ang_world = _derived(s, par)
    pos = np.array([s[0], s[1], s[2]])
    quat = np.array([s[3], s[4], s[5], s[6]])
    lin_vel = np.array([s[7], s[8], s[9]])
    joint_pos = np.empty(12)
    joint_vel = np.empty(12)
    torques = np.empty(12)
    cdef double[::1] jp = joint_pos
    cdef double[::1] jv = joint_vel
    cdef double[::1] tq = torques
    cdef int j
    for j in range(12):
        jp[j] = s[13 + j]
        jv[j] = s[25 + j]
        tq[j] = tau[j]
    return (ok, n_done, pos, quat, lin_vel, ang_world, joint_pos, joint_vel,
            torques, foot_pos, foot_vel, foot_h, contact, body_contact)


cdef _passthrough(double* s, object pos, object quat, object lin_vel, object ang_vel_world,
                  object joint_pos, object joint_vel, double* tau, double* par):
    foot_pos, foot_vel, foot_h, contact, body_contact, _ = _derived(s, par)
    torques = np.empty(12)
    cdef double[::1] tq = torques
    cdef int j
    for j in range(12):
        tq[j] = tau[j]
    return (
        1, 0,
        np.asarray(pos, dtype=float).copy(),
        np.asarray(quat, dtype=float).copy(),
        np.asarray(lin_vel, dtype=float).copy(),
        np.asarray(ang_vel_world, dtype=float).copy(),
        np.asarray(joint_pos, dtype=float).copy(),
        np.asarray(joint_vel, dtype=float).copy(),
        torques, foot_pos, foot_vel, foot_h, contact, body_contact,
    )


def run_substeps(pos, quat, lin_vel, ang_vel_world, joint_pos, joint_vel,
                 q_des, n_substeps, dt, par):
    """PD-tracked substep loop; see the pure-Python twin for the contract."""
    cdef double[::1] pos_v = np.ascontiguousarray(pos, dtype=float)
    cdef double[::1] quat_v = np.ascontiguousarray(quat, dtype=float)
    cdef double[::1] lv_v = np.ascontiguousarray(lin_vel, dtype=float)
    cdef double[::1] av_v = np.ascontiguousarray(ang_vel_world, dtype=float)
    cdef double[::1] jp_v = np.ascontiguousarray(joint_pos, dtype=float)
    cdef double[::1] jv_v = np.ascontiguousarray(joint_vel, dtype=float)
    cdef double[::1] qd_v = np.ascontiguousarray(q_des, dtype=float)
    cdef double[::1] par_v = np.ascontiguousarray(par, dtype=float)
    cdef double* p = &par_v[0]
    cdef double s[37]
    cdef double tau[12]
    cdef double qd[12]
    cdef int j
    cdef double lo, hi
    _pack_state(s, pos_v, quat_v, lv_v, av_v, jp_v, jv_v)
    for j in range(12):
        tau[j] = 0.0
        qd[j] = qd_v[j]
        lo = p[46 + j]
        hi = p[58 + j]
        if qd[j] < lo:
            qd[j] = lo
        elif qd[j] > hi:
            qd[j] = hi
    cdef int n = int(n_substeps)
    cdef double dt_c = float(dt)
    cdef int n_done = 0
    cdef int ok = 1
    cdef int i
    for i in range(n):
        _pd(tau, s, qd, p)
        _substep(s, tau, dt_c, p)
        n_done += 1
        if not _healthy(s, p):
            ok = 0
            break
    if n_done == 0:
        return _passthrough(s, pos, quat, lin_vel, ang_vel_world, joint_pos, joint_vel, tau, p)
    return _unpack(s, tau, p, ok, n_done)


def torque_step(pos, quat, lin_vel, ang_vel_world, joint_pos, joint_vel,
                torques, dt, par):
    """Single substep with explicit joint torques (clamped to the limit)."""
    cdef double[::1] pos_v = np.ascontiguousarray(pos, dtype=float)
    cdef double[::1] quat_v = np.ascontiguousarray(quat, dtype=float)
    cdef double[::1] lv_v = np.ascontiguousarray(lin_vel, dtype=float)
    cdef double[::1] av_v = np.ascontiguousarray(ang_vel_world, dtype=float)
    cdef double[::1] jp_v = np.ascontiguousarray(joint_pos, dtype=float)
    cdef double[::1] jv_v = np.ascontiguousarray(joint_vel, dtype=float)
    cdef double[::1] tq_v = np.ascontiguousarray(torques, dtype=float)
    cdef double[::1] par_v = np.ascontiguousarray(par, dtype=float)
    cdef double* p = &par_v[0]
    cdef double s[37]
    cdef double tau[12]
    cdef int j
    cdef double t, lim
    _pack_state(s, pos_v, quat_v, lv_v, av_v, jp_v, jv_v)
    lim = p[10]
    for j in range(12):
        t = tq_v[j]
        if t > lim:
            t = lim
        elif t < -lim:
            t = -lim
        tau[j] = t
    cdef double dt_c = float(dt)
    if dt_c == 0.0:
        return _passthrough(s, pos, quat, lin_vel, ang_vel_world, joint_pos, joint_vel, tau, p)
    _substep(s, tau, dt_c, p)
    cdef int ok = 1 if _healthy(s, p) else 0
    return _unpack(s, tau, p, ok, 1)
