"""Pure-Python reference implementation of the physics substep kernel.

The compiled twin (multigait._speedups) implements the same arithmetic in
the same order; with -ffp-contract=off the two produce bit-identical
results.  Keep every operation here scalar and explicitly ordered, this
file is the behavioral reference the compiled kernel is tested against.

Packed parameter layout (float64 vector, see sim.SimConfig.pack):
   0 mass            1..3 inertia diag    4 gravity
   5 contact_kn      6 contact_cn         7 friction_mu      8 friction_kt
   9 joint_inertia  10 torque_limit      11 contact_threshold
  12 body_contact_height                 13 joint_vel_limit
  14..16 box half dims (hx, hy, hz)
  17 hip_x  18 hip_y  19 hip_offset  20 thigh  21 calf
  22..33 kp[12]      34..45 kd[12]
  46..57 joint_lo[12]  58..69 joint_hi[12]
  70 body contact forces flag (0/1)
"""

from math import cos, isfinite, sin, sqrt

import numpy as np

BACKEND = "pure"

# leg order FR, FL, RR, RL: (front sign, lateral sign)
_LEG_SIGNS = ((1.0, -1.0), (1.0, 1.0), (-1.0, -1.0), (-1.0, 1.0))
_CORner = [(sx, sy, sz) for sx in (1.0, -1.0) for sy in (1.0, -1.0) for sz in (1.0, -1.0)]


def _quat_to_matrix(qw, qx, qy, qz):
    return (
        1 - 2 * (qy * qy + qz * qz), 2 * (qx * qy - qz * qw), 2 * (qx * qz + qy * qw),
        2 * (qx * qy + qz * qw), 1 - 2 * (qx * qx + qz * qz), 2 * (qy * qz - qx * qw),
        2 * (qx * qz - qy * qw), 2 * (qy * qz + qx * qw), 1 - 2 * (qx * qx + qy * qy),
    )


def _foot_local(leg, a, b, c, par):
    """Foot position (base frame) and Jacobian columns for one leg."""
    hip_x, hip_y, d, l1, l2 = par[17], par[18], par[19], par[20], par[21]
    fs, ls = _LEG_SIGNS[leg]
    sb, cb = sin(b), cos(b)
    sbc, cbc = sin(b + c), cos(b + c)
    ux = -l1 * sb - l2 * sbc
    uy = ls * d
    uz = -l1 * cb - l2 * cbc
    ca, sa = cos(a), sin(a)
    ry = ca * uy - sa * uz
    rz = sa * uy + ca * uz
    px = fs * hip_x + ux
    py = ls * hip_y + ry
    pz = rz
    dux_db = -l1 * cb - l2 * cbc
    duz_db = l1 * sb + l2 * sbc
    dux_dc = -l2 * cbc
    duz_dc = l2 * sbc
    # columns of the 3x3 Jacobian d p / d (a, b, c)
    ja = (0.0, -rz, ry)
    jb = (dux_db, -sa * duz_db, ca * duz_db)
    jc = (dux_dc, -sa * duz_dc, ca * duz_dc)
    return (px, py, pz), (ja, jb, jc)


def _contact_force(pw_z, vw_x, vw_y, vw_z, par):
    """Spring-damper normal force + Coulomb-capped viscous friction."""
    depth = -pw_z
    if depth <= 0.0:
        return 0.0, 0.0, 0.0
    fn = par[5] * depth + par[6] * (-vw_z)
    if fn < 0.0:
        fn = 0.0
    fx = 0.0
    fy = 0.0
    vt = sqrt(vw_x * vw_x + vw_y * vw_y)
    if vt > 1e-9:
        ft = par[7] * fn
        fv = par[8] * vt
        if fv < ft:
            ft = fv
        fx = -ft * vw_x / vt
        fy = -ft * vw_y / vt
    return fx, fy, fn


def _substep(s, tau, dt, par):
    """One explicit-contact, semi-implicit-Euler step of length dt.

    s = [px,py,pz, qw,qx,qy,qz, vx,vy,vz, wbx,wby,wbz, q0..q11, dq0..dq11]
    (angular velocity in the body frame).  Mutates s in place.
    """
    joint_inertia = par[9]
    mass = par[0]

    # joints against reflected inertia, then hard limits
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

    r00, r01, r02, r10, r11, r12, r20, r21, r22 = _quat_to_matrix(s[3], s[4], s[5], s[6])
    wbx, wby, wbz = s[10], s[11], s[12]
    wwx = r00 * wbx + r01 * wby + r02 * wbz
    wwy = r10 * wbx + r11 * wby + r12 * wbz
    wwz = r20 * wbx + r21 * wby + r22 * wbz

    fx_tot = 0.0
    fy_tot = 0.0
    fz_tot = -mass * par[4]
    tx_tot = 0.0
    ty_tot = 0.0
    tz_tot = 0.0

    for leg in range(4):
        a = s[13 + 3 * leg]
        b = s[13 + 3 * leg + 1]
        c = s[13 + 3 * leg + 2]
        (bx, by, bz), (ja, jb, jc) = _foot_local(leg, a, b, c, par)
        # world offset r = R @ p_base
        rx = r00 * bx + r01 * by + r02 * bz
        ry = r10 * bx + r11 * by + r12 * bz
        rz = r20 * bx + r21 * by + r22 * bz
        pw_z = s[2] + rz
        if pw_z > 0.05:
            continue
        da = s[25 + 3 * leg]
        db = s[25 + 3 * leg + 1]
        dc = s[25 + 3 * leg + 2]
        # base-frame foot velocity from the leg Jacobian
        lx = ja[0] * da + jb[0] * db + jc[0] * dc
        ly = ja[1] * da + jb[1] * db + jc[1] * dc
        lz = ja[2] * da + jb[2] * db + jc[2] * dc
        vw_x = s[7] + (wwy * rz - wwz * ry) + (r00 * lx + r01 * ly + r02 * lz)
        vw_y = s[8] + (wwz * rx - wwx * rz) + (r10 * lx + r11 * ly + r12 * lz)
        vw_z = s[9] + (wwx * ry - wwy * rx) + (r20 * lx + r21 * ly + r22 * lz)
        cfx, cfy, cfz = _contact_force(pw_z, vw_x, vw_y, vw_z, par)
        fx_tot += cfx
        fy_tot += cfy
        fz_tot += cfz
        tx_tot += ry * cfz - rz * cfy
        ty_tot += rz * cfx - rx * cfz
        tz_tot += rx * cfy - ry * cfx

    if par[70] != 0.0:
        hx, hy, hz = par[14], par[15], par[16]
        for sx, sy, sz in _CORner:
            bx = sx * hx
            by = sy * hy
            bz = sz * hz
            rx = r00 * bx + r01 * by + r02 * bz
            ry = r10 * bx + r11 * by + r12 * bz
            rz = r20 * bx + r21 * by + r22 * bz
            pw_z = s[2] + rz
            if pw_z > 0.0:
                continue
            vw_x = s[7] + (wwy * rz - wwz * ry)
            vw_y = s[8] + (wwz * rx - wwx * rz)
            vw_z = s[9] + (wwx * ry - wwy * rx)
            cfx, cfy, cfz = _contact_force(pw_z, vw_x, vw_y, vw_z, par)
            fx_tot += cfx
            fy_tot += cfy
            fz_tot += cfz
            tx_tot += ry * cfz - rz * cfy
            ty_tot += rz * cfx - rx * cfz
            tz_tot += rx * cfy - ry * cfx

    s[7] += dt * fx_tot / mass
    s[8] += dt * fy_tot / mass
    s[9] += dt * fz_tot / mass
    s[0] += dt * s[7]
    s[1] += dt * s[8]
    s[2] += dt * s[9]

    # body-frame Euler equations with gyroscopic term
    tbx = r00 * tx_tot + r10 * ty_tot + r20 * tz_tot
    tby = r01 * tx_tot + r11 * ty_tot + r21 * tz_tot
    tbz = r02 * tx_tot + r12 * ty_tot + r22 * tz_tot
    ix, iy, iz = par[1], par[2], par[3]
    gx = wby * (iz * wbz) - wbz * (iy * wby)
    gy = wbz * (ix * wbx) - wbx * (iz * wbz)
    gz = wbx * (iy * wby) - wby * (ix * wbx)
    wbx += dt * (tbx - gx) / ix
    wby += dt * (tby - gy) / iy
    wbz += dt * (tbz - gz) / iz
    s[10], s[11], s[12] = wbx, wby, wbz

    qw, qx, qy, qz = s[3], s[4], s[5], s[6]
    nw = qw + 0.5 * dt * (-qx * wbx - qy * wby - qz * wbz)
    nx = qx + 0.5 * dt * (qw * wbx + qy * wbz - qz * wby)
    ny = qy + 0.5 * dt * (qw * wby - qx * wbz + qz * wbx)
    nz = qz + 0.5 * dt * (qw * wbz + qx * wby - qy * wbx)
    norm = sqrt(nw * nw + nx * nx + ny * ny + nz * nz)
    s[3] = nw / norm
    s[4] = nx / norm
    s[5] = ny / norm
    s[6] = nz / norm


def _pd(tau, s, q_des, par):
    for j in range(12):
        t = par[22 + j] * (q_des[j] - s[13 + j]) - par[34 + j] * s[25 + j]
        lim = par[10]
        if t > lim:
            t = lim
        elif t < -lim:
            t = -lim
        tau[j] = t


def _healthy(s, par):
    lim = par[13]
    for v in s:
        if not isfinite(v):
            return False
    for j in range(12):
        if s[25 + j] > lim or s[25 + j] < -lim:
            return False
    return True


def _derived(s, par):
    """Foot kinematics, contact flags, body contact from the current state."""
    r00, r01, r02, r10, r11, r12, r20, r21, r22 = _quat_to_matrix(s[3], s[4], s[5], s[6])
    wbx, wby, wbz = s[10], s[11], s[12]
    wwx = r00 * wbx + r01 * wby + r02 * wbz
    wwy = r10 * wbx + r11 * wby + r12 * wbz
    wwz = r20 * wbx + r21 * wby + r22 * wbz
    foot_pos = np.empty((4, 3))
    foot_vel = np.empty((4, 3))
    foot_h = np.empty(4)
    contact = np.zeros(4, dtype=np.uint8)
    for leg in range(4):
        a = s[13 + 3 * leg]
        b = s[13 + 3 * leg + 1]
        c = s[13 + 3 * leg + 2]
        (bx, by, bz), (ja, jb, jc) = _foot_local(leg, a, b, c, par)
        rx = r00 * bx + r01 * by + r02 * bz
        ry = r10 * bx + r11 * by + r12 * bz
        rz = r20 * bx + r21 * by + r22 * bz
        da = s[25 + 3 * leg]
        db = s[25 + 3 * leg + 1]
        dc = s[25 + 3 * leg + 2]
        lx = ja[0] * da + jb[0] * db + jc[0] * dc
        ly = ja[1] * da + jb[1] * db + jc[1] * dc
        lz = ja[2] * da + jb[2] * db + jc[2] * dc
        foot_pos[leg, 0] = s[0] + rx
        foot_pos[leg, 1] = s[1] + ry
        foot_pos[leg, 2] = s[2] + rz
        foot_vel[leg, 0] = s[7] + (wwy * rz - wwz * ry) + (r00 * lx + r01 * ly + r02 * lz)
        foot_vel[leg, 1] = s[8] + (wwz * rx - wwx * rz) + (r10 * lx + r11 * ly + r12 * lz)
        foot_vel[leg, 2] = s[9] + (wwx * ry - wwy * rx) + (r20 * lx + r21 * ly + r22 * lz)
        foot_h[leg] = s[2] + rz
        if foot_h[leg] <= par[11]:
            contact[leg] = 1
    body_contact = 0
    hx, hy, hz = par[14], par[15], par[16]
    for sx, sy, sz in _CORner:
        cz = s[2] + r20 * (sx * hx) + r21 * (sy * hy) + r22 * (sz * hz)
        if cz < par[12]:
            body_contact = 1
            break
    ang_world = np.array([wwx, wwy, wwz])
    return foot_pos, foot_vel, foot_h, contact, body_contact, ang_world


def _pack_state(pos, quat, lin_vel, ang_vel_world, joint_pos, joint_vel):
    r = _quat_to_matrix(quat[0], quat[1], quat[2], quat[3])
    # body-frame angular velocity = R^T w_world
    wbx = r[0] * ang_vel_world[0] + r[3] * ang_vel_world[1] + r[6] * ang_vel_world[2]
    wby = r[1] * ang_vel_world[0] + r[4] * ang_vel_world[1] + r[7] * ang_vel_world[2]
    wbz = r[2] * ang_vel_world[0] + r[5] * ang_vel_world[1] + r[8] * ang_vel_world[2]
    s = [
        pos[0], pos[1], pos[2],
        quat[0], quat[1], quat[2], quat[3],
        lin_vel[0], lin_vel[1], lin_vel[2],
        wbx, wby, wbz,
    ]
    s.extend(float(v) for v in joint_pos)
    s.extend(float(v) for v in joint_vel)
    return s


def _unpack(s, tau, par, ok, n_done):
    foot_pos, foot_vel, foot_h, contact, body_contact, ang_world = _derived(s, par)
    return (
        ok,
        n_done,
        np.array(s[0:3]),
        np.array(s[3:7]),
        np.array(s[7:10]),
        ang_world,
        np.array(s[13:25]),
        np.array(s[25:37]),
        np.array(tau),
        foot_pos,
        foot_vel,
        foot_h,
        contact,
        body_contact,
    )


def run_substeps(pos, quat, lin_vel, ang_vel_world, joint_pos, joint_vel,
                 q_des, n_substeps, dt, par):
    """PD-tracked substep loop: recomputes torques every substep.

    Returns (ok, n_done, pos, quat, lin_vel, ang_vel_world, joint_pos,
    joint_vel, last_torques, foot_pos, foot_vel, foot_heights,
    foot_contact, body_contact).
    """
    s = _pack_state(pos, quat, lin_vel, ang_vel_world, joint_pos, joint_vel)
    tau = [0.0] * 12
    qd = [float(v) for v in q_des]
    for j in range(12):
        lo = par[46 + j]
        hi = par[58 + j]
        if qd[j] < lo:
            qd[j] = lo
        elif qd[j] > hi:
            qd[j] = hi
    n_done = 0
    ok = 1
    for _ in range(int(n_substeps)):
        _pd(tau, s, qd, par)
        _substep(s, tau, dt, par)
        n_done += 1
        if not _healthy(s, par):
            ok = 0
            break
    if n_done == 0:
        return _passthrough(s, pos, quat, lin_vel, ang_vel_world, joint_pos, joint_vel, tau, par)
    return _unpack(s, tau, par, ok, n_done)


def _passthrough(s, pos, quat, lin_vel, ang_vel_world, joint_pos, joint_vel, tau, par):
    """No-op step: inputs returned unchanged, derived quantities recomputed."""
    foot_pos, foot_vel, foot_h, contact, body_contact, _ = _derived(s, par)
    return (
        1,
        0,
        np.asarray(pos, dtype=float).copy(),
        np.asarray(quat, dtype=float).copy(),
        np.asarray(lin_vel, dtype=float).copy(),
        np.asarray(ang_vel_world, dtype=float).copy(),
        np.asarray(joint_pos, dtype=float).copy(),
        np.asarray(joint_vel, dtype=float).copy(),
        np.array(tau),
        foot_pos,
        foot_vel,
        foot_h,
        contact,
        body_contact,
    )


def torque_step(pos, quat, lin_vel, ang_vel_world, joint_pos, joint_vel,
                torques, dt, par):
    """A single substep driven by explicit joint torques (clamped)."""
    s = _pack_state(pos, quat, lin_vel, ang_vel_world, joint_pos, joint_vel)
    tau = [0.0] * 12
    lim = par[10]
    for j in range(12):
        t = float(torques[j])
        if t > lim:
            t = lim
        elif t < -lim:
            t = -lim
        tau[j] = t
    if dt == 0.0:
        return _passthrough(s, pos, quat, lin_vel, ang_vel_world, joint_pos, joint_vel, tau, par)
    _substep(s, tau, dt, par)
    ok = 1 if _healthy(s, par) else 0
    return _unpack(s, tau, par, ok, 1)
