"""Compiled projection kernel used in simulation loops.

Same algorithm as :meth:`softcc.dynamics.SoftRobotModel.evaluate` written with
explicit loops: build augmented point Jacobians and their rates, then
project them with Jm and Jm'.
"""
import math

import numpy as np
from numba import njit

_T = 0.05  # series switch for derivatives of sin(q/2)/q


@njit(cache=True)
def _hs(q):
    if abs(q) < 1e-4:
        q2 = q * q
        return 0.5 - q2 / 48.0 + q2 * q2 / 3840.0
    return math.sin(0.5 * q) / q


@njit(cache=True)
def _hs1(q):
    if abs(q) < _T:
        q2 = q * q
        return q * (-1.0 / 24.0 + q2 * (1.0 / 960.0 + q2 * (-1.0 / 107520.0 + q2 * (1.0 / 23224320.0))))
    return (q * math.cos(0.5 * q) - 2.0 * math.sin(0.5 * q)) / (2.0 * q * q)


@njit(cache=True)
def _hs2(q):
    if abs(q) < _T:
        q2 = q * q
        return -1.0 / 24.0 + q2 * (3.0 / 960.0 + q2 * (-5.0 / 107520.0 + q2 * (7.0 / 23224320.0)))
    s = math.sin(0.5 * q)
    c = math.cos(0.5 * q)
    return (-(q * q / 2.0) * s - 2.0 * q * c + 4.0 * s) / (2.0 * q ** 3)


@njit(cache=True)
def projected_terms(q, qd, lengths, masses, gravity, floating, base_mass, base_inertia, frame0):
    """Return B, C, G, J_tip (2 x N), tip position, tip angle, mass positions (n x 2).

    ``frame0`` is the fixed base pose (x, y, theta) or, for a floating base, the
    arm mount (x, y, theta) in body coordinates.
    """
    n = lengths.shape[0]
    nb = 3 if floating else 0
    N = nb + n
    nx = nb + 4 * n

    # xi = m(q), xid = Jm qd, and the nonzero entries of Jm, Jm'
    xi = np.zeros(nx)
    xid = np.zeros(nx)
    lc = np.zeros(n)
    lcd = np.zeros(n)
    for k in range(nb):
        xi[k] = q[k]
        xid[k] = qd[k]
    for i in range(n):
        qi = q[nb + i]
        d = lengths[i] * _hs(qi)
        lc[i] = lengths[i] * _hs1(qi)
        lcd[i] = lengths[i] * _hs2(qi) * qd[nb + i]
        r = nb + 4 * i
        xi[r] = 0.5 * qi
        xi[r + 1] = d
        xi[r + 2] = d
        xi[r + 3] = 0.5 * qi
        xid[r] = 0.5 * qd[nb + i]
        xid[r + 1] = lc[i] * qd[nb + i]
        xid[r + 2] = xid[r + 1]
        xid[r + 3] = xid[r]

    # joint data: kind 0 revolute, 1 prismatic along heading, 2 slide x, 3 slide y
    kind = np.zeros(nx, np.int64)
    ox = np.zeros(nx)
    oy = np.zeros(nx)
    vox = np.zeros(nx)
    voy = np.zeros(nx)
    ax = np.zeros(nx)
    ay = np.zeros(nx)
    wb = np.zeros(nx)  # heading rate before the joint

    px = 0.0
    py = 0.0
    vx = 0.0
    vy = 0.0
    phi = 0.0
    w = 0.0
    if floating:
        kind[0] = 2
        kind[1] = 3
        kind[2] = 0
        ax[0] = 1.0
        ay[1] = 1.0
        px = xi[0]
        py = xi[1]
        vx = xid[0]
        vy = xid[1]
        ox[2] = px
        oy[2] = py
        vox[2] = vx
        voy[2] = vy
        phi = xi[2]
        w = xid[2]
        c = math.cos(phi)
        s = math.sin(phi)
        dx = c * frame0[0] - s * frame0[1]
        dy = s * frame0[0] + c * frame0[1]
        px += dx
        py += dy
        vx += -w * dy
        vy += w * dx
        phi += frame0[2]
    else:
        px = frame0[0]
        py = frame0[1]
        phi = frame0[2]

    mx = np.zeros(n)
    my = np.zeros(n)
    mvx = np.zeros(n)
    mvy = np.zeros(n)
    for i in range(n):
        for k in range(4):
            j = nb + 4 * i + k
            ox[j] = px
            oy[j] = py
            vox[j] = vx
            voy[j] = vy
            wb[j] = w
            if k == 0 or k == 3:
                kind[j] = 0
                phi += xi[j]
                w += xid[j]
            else:
                kind[j] = 1
                c = math.cos(phi)
                s = math.sin(phi)
                ax[j] = c
                ay[j] = s
                px += xi[j] * c
                py += xi[j] * s
                vx += xid[j] * c - xi[j] * w * s
                vy += xid[j] * s + xi[j] * w * c
            if k == 1:
                mx[i] = px
                my[i] = py
                mvx[i] = vx
                mvy[i] = vy
    tipx = px
    tipy = py
    tipvx = vx
    tipvy = vy

    B = np.zeros((N, N))
    C = np.zeros((N, N))
    G = np.zeros(N)
    Jtip = np.zeros((2, N))
    Jx = np.zeros((2, nx))
    Jxd = np.zeros((2, nx))
    Jq = np.zeros((2, N))
    Jqd = np.zeros((2, N))

    for p in range(n + 1):
        if p < n:
            ppx, ppy, ppvx, ppvy = mx[p], my[p], mvx[p], mvy[p]
            last = nb + 4 * p + 1
        else:
            ppx, ppy, ppvx, ppvy = tipx, tipy, tipvx, tipvy
            last = nx - 1
        for j in range(nx):
            Jx[0, j] = 0.0
            Jx[1, j] = 0.0
            Jxd[0, j] = 0.0
            Jxd[1, j] = 0.0
        for j in range(last + 1):
            kj = kind[j]
            if kj == 0:
                Jx[0, j] = -(ppy - oy[j])
                Jx[1, j] = ppx - ox[j]
                Jxd[0, j] = -(ppvy - voy[j])
                Jxd[1, j] = ppvx - vox[j]
            elif kj == 1:
                Jx[0, j] = ax[j]
                Jx[1, j] = ay[j]
                Jxd[0, j] = -wb[j] * ay[j]
                Jxd[1, j] = wb[j] * ax[j]
            else:
                Jx[0, j] = ax[j]
                Jx[1, j] = ay[j]
        # project: Jq = Jx Jm, Jqd = Jxd Jm + Jx Jm'
        for a in range(2):
            for k in range(nb):
                Jq[a, k] = Jx[a, k]
                Jqd[a, k] = Jxd[a, k]
            for i in range(n):
                r = nb + 4 * i
                Jq[a, nb + i] = 0.5 * (Jx[a, r] + Jx[a, r + 3]) + lc[i] * (Jx[a, r + 1] + Jx[a, r + 2])
                Jqd[a, nb + i] = (0.5 * (Jxd[a, r] + Jxd[a, r + 3]) + lc[i] * (Jxd[a, r + 1] + Jxd[a, r + 2])
                                  + lcd[i] * (Jx[a, r + 1] + Jx[a, r + 2]))
        if p < n:
            mu = masses[p]
            for r in range(N):
                G[r] -= mu * (Jq[0, r] * gravity[0] + Jq[1, r] * gravity[1])
                for c in range(N):
                    B[r, c] += mu * (Jq[0, r] * Jq[0, c] + Jq[1, r] * Jq[1, c])
                    C[r, c] += mu * (Jq[0, r] * Jqd[0, c] + Jq[1, r] * Jqd[1, c])
        else:
            for a in range(2):
                for c in range(N):
                    Jtip[a, c] = Jq[a, c]

    if floating:
        B[0, 0] += base_mass
        B[1, 1] += base_mass
        B[2, 2] += base_inertia
        G[0] -= base_mass * gravity[0]
        G[1] -= base_mass * gravity[1]

    masspos = np.zeros((n, 2))
    for i in range(n):
        masspos[i, 0] = mx[i]
        masspos[i, 1] = my[i]
    return B, C, G, Jtip, np.array([tipx, tipy]), phi, masspos


# ---------------------------------------------------------------- plant and steppers
# P = (lengths, masses, gravity, floating, base_mass, base_inertia, frame0,
#      k_diag, d_diag, walls (W x 9: a, n_par, n_perp, length, k, c),
#      alpha, gamma, u, f_tip, f_base)

@njit(cache=True)
def plant_rhs(y, P):
    lengths, masses, gravity, floating, bm, bi, frame0, kd, dd, walls, alpha, gamma, u, f_tip, f_base = P
    n = lengths.shape[0]
    nb = 3 if floating else 0
    N = nb + n
    q = y[:N]
    qd = y[N:2 * N]
    B, C, G, J, tip, phi, _ = projected_terms(q, qd, lengths, masses, gravity, floating, bm, bi, frame0)
    rhs = -(C @ qd) - dd * qd - G - kd * q
    na = alpha.shape[0]
    if na > 0:
        for i in range(na):
            rhs[nb + i] += y[2 * N + 2 * i]
    else:
        rhs += u
    xd0 = J[0] @ qd
    xd1 = J[1] @ qd
    fx = f_tip[0]
    fy = f_tip[1]
    for w in range(walls.shape[0]):
        dx = tip[0] - walls[w, 0]
        dy = tip[1] - walls[w, 1]
        s = walls[w, 2] * dx + walls[w, 3] * dy
        if s < 0.0 or s > walls[w, 6]:
            continue
        pen = -(walls[w, 4] * dx + walls[w, 5] * dy)
        if pen <= 0.0:
            continue
        vn = walls[w, 4] * xd0 + walls[w, 5] * xd1
        fn = walls[w, 7] * pen - walls[w, 8] * vn
        if fn > 0.0:
            fx += fn * walls[w, 4]
            fy += fn * walls[w, 5]
    rhs += J[0] * fx + J[1] * fy
    if floating:
        rhs[0] += f_base[0]
        rhs[1] += f_base[1]
    qdd = np.linalg.solve(B, rhs)
    out = np.empty_like(y)
    out[:N] = qd
    out[N:2 * N] = qdd
    for i in range(na):
        a = y[2 * N + 2 * i]
        ad = y[2 * N + 2 * i + 1]
        g = gamma[i]
        out[2 * N + 2 * i] = ad
        out[2 * N + 2 * i + 1] = (alpha[i] * u[i] - a - 2.0 * g * ad) / (g * g)
    return out


@njit(cache=True)
def rk4(y, h, P):
    k1 = plant_rhs(y, P)
    k2 = plant_rhs(y + 0.5 * h * k1, P)
    k3 = plant_rhs(y + 0.5 * h * k2, P)
    k4 = plant_rhs(y + h * k3, P)
    return y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@njit(cache=True)
def _jacobian(y, f0, P):
    m = y.shape[0]
    Jac = np.empty((m, m))
    yp = y.copy()
    for j in range(m):
        dy = 1e-7 * max(1.0, abs(y[j]))
        yp[j] = y[j] + dy
        Jac[:, j] = (plant_rhs(yp, P) - f0) / dy
        yp[j] = y[j]
    return Jac


@njit(cache=True)
def collocation(y, h, P, A, b, tol, maxit, stiffly_accurate):
    """One step of an implicit Runge-Kutta (collocation) method.

    Stage increments Z_i = h sum_j A_ij f(y + Z_j) are solved by simplified
    Newton with a finite-difference Jacobian taken at the step start.
    Returns (y_next, converged).
    """
    s = b.shape[0]
    m = y.shape[0]
    f0 = plant_rhs(y, P)
    Jac = _jacobian(y, f0, P)
    M = np.eye(s * m)
    for i in range(s):
        for j in range(s):
            M[i * m:(i + 1) * m, j * m:(j + 1) * m] -= h * A[i, j] * Jac
    Z = np.zeros(s * m)
    F = np.empty((s, m))
    scale = 1.0 + np.abs(y)
    ok = False
    prev = np.inf
    for it in range(maxit):
        if not np.all(np.isfinite(Z)) or np.max(np.abs(Z)) > 10.0 * np.max(scale):
            return y, False
        for i in range(s):
            F[i] = plant_rhs(y + Z[i * m:(i + 1) * m], P)
        res = -Z.copy()
        for i in range(s):
            for j in range(s):
                res[i * m:(i + 1) * m] += h * A[i, j] * F[j]
        dZ = np.linalg.solve(M, res)
        Z += dZ
        err = 0.0
        for i in range(s):
            for k in range(m):
                e = abs(dZ[i * m + k]) / scale[k]
                if e > err:
                    err = e
        if not np.isfinite(err):
            break
        if err <= tol or (err < 1e-6 and err > 0.5 * prev):  # converged or at the roundoff floor
            ok = True
            break
        prev = err
    if stiffly_accurate:  # last stage is the step end; avoids re-amplifying stiff residuals
        return y + Z[(s - 1) * m:], ok
    for i in range(s):
        F[i] = plant_rhs(y + Z[i * m:(i + 1) * m], P)
    out = y.copy()
    for i in range(s):
        out += h * b[i] * F[i]
    return out, ok


@njit(cache=True)
def tip_state(y, P):
    lengths, masses, gravity, floating, bm, bi, frame0 = P[0], P[1], P[2], P[3], P[4], P[5], P[6]
    nb = 3 if floating else 0
    N = nb + lengths.shape[0]
    q = y[:N]
    qd = y[N:2 * N]
    B, C, G, J, tip, phi, _ = projected_terms(q, qd, lengths, masses, gravity, floating, bm, bi, frame0)
    return tip, J @ qd


@njit(cache=True)
def canonical_rhs(z, P):
    """Plant without actuators/contact in (q, p = B q') coordinates.

    q' = B^-1 p, p' = C^T q' - G - K q - D q' + u  (using B' = C + C^T).
    """
    lengths, masses, gravity, floating, bm, bi, frame0, kd, dd = P[0], P[1], P[2], P[3], P[4], P[5], P[6], P[7], P[8]
    u = P[12]
    nb = 3 if floating else 0
    N = nb + lengths.shape[0]
    q = z[:N]
    p = z[N:]
    B, C, G, J, tip, phi, _ = projected_terms(q, np.zeros(N), lengths, masses, gravity, floating, bm, bi, frame0)
    qd = np.linalg.solve(B, p)
    B, C, G, J, tip, phi, _ = projected_terms(q, qd, lengths, masses, gravity, floating, bm, bi, frame0)
    out = np.empty(2 * N)
    out[:N] = qd
    out[N:] = C.T @ qd - G - kd * q - dd * qd + u
    return out


@njit(cache=True)
def _canonical_jacobian(z, f0, P):
    m = z.shape[0]
    Jac = np.empty((m, m))
    zp = z.copy()
    for j in range(m):
        dz = 1e-7 * max(1.0, abs(z[j]))
        zp[j] = z[j] + dz
        Jac[:, j] = (canonical_rhs(zp, P) - f0) / dz
        zp[j] = z[j]
    return Jac


@njit(cache=True)
def hamiltonian(z, P):
    """Kinetic + gravitational + elastic energy in (q, p) coordinates."""
    lengths, masses, gravity, floating, bm, bi, frame0, kd = P[0], P[1], P[2], P[3], P[4], P[5], P[6], P[7]
    nb = 3 if floating else 0
    N = nb + lengths.shape[0]
    q = z[:N]
    p = z[N:]
    B, C, G, J, tip, phi, mpos = projected_terms(q, np.zeros(N), lengths, masses, gravity, floating, bm, bi, frame0)
    qd = np.linalg.solve(B, p)
    e = 0.5 * (p @ qd) + 0.5 * np.sum(kd * q * q)
    for i in range(lengths.shape[0]):
        e -= masses[i] * (gravity[0] * mpos[i, 0] + gravity[1] * mpos[i, 1])
    if floating:
        e -= bm * (gravity[0] * q[0] + gravity[1] * q[1])
    return e


@njit(cache=True)
def _dg_field(z0, z1, P):
    """h-free right-hand side S grad_bar H + non-conservative part (Gonzalez discrete gradient)."""
    lengths = P[0]
    floating = P[3]
    dd = P[8]
    u = P[12]
    nb = 3 if floating else 0
    N = nb + lengths.shape[0]
    zm = 0.5 * (z0 + z1)
    fm = canonical_rhs(zm, P)  # [qd, C^T qd - G - K q - D qd + u]
    qd = fm[:N]
    grad = np.empty(2 * N)  # grad H = [-(C^T qd - G - K q), qd]
    grad[:N] = -(fm[N:] + dd * qd - u)
    grad[N:] = qd
    dz = z1 - z0
    nrm = dz @ dz
    if nrm > 0.0:
        grad += (hamiltonian(z1, P) - hamiltonian(z0, P) - grad @ dz) / nrm * dz
    out = np.empty(2 * N)
    out[:N] = grad[N:]
    out[N:] = -grad[:N] - dd * qd + u
    return out


@njit(cache=True)
def _dg_residual(z, z1, h, P):
    return z + h * _dg_field(z, z1, P) - z1


@njit(cache=True)
def discrete_gradient(z, h, P, tol, maxit):
    """Energy-consistent implicit step in (q, p): with D = 0 and u = 0 the
    energy is conserved up to the Newton tolerance. Returns (z_next, converged).

    Simplified Newton first; if it stalls, full Newton on the exact residual.
    """
    m = z.shape[0]
    f0 = canonical_rhs(z, P)
    M = np.eye(m) - 0.5 * h * _canonical_jacobian(z, f0, P)
    z1 = z + h * f0
    scale = 1.0 + np.abs(z)
    prev = np.inf
    for it in range(12):
        if not np.all(np.isfinite(z1)) or np.max(np.abs(z1 - z) / scale) > 10.0:
            break
        dz1 = np.linalg.solve(M, _dg_residual(z, z1, h, P))
        z1 = z1 + dz1
        err = np.max(np.abs(dz1) / scale)
        if not np.isfinite(err):
            break
        if err <= tol or (err < 1e-9 and err > 0.5 * prev):
            return z1, True
        prev = err
    if not np.all(np.isfinite(z1)):
        z1 = z + h * f0
    prev = np.inf
    Jr = np.empty((m, m))
    for it in range(maxit):
        if not np.all(np.isfinite(z1)) or np.max(np.abs(z1 - z) / scale) > 10.0:
            return z1, False
        r = _dg_residual(z, z1, h, P)
        zp = z1.copy()
        for j in range(m):
            d = 1e-7 * max(1.0, abs(z1[j]))
            zp[j] = z1[j] + d
            Jr[:, j] = (_dg_residual(z, zp, h, P) - r) / d
            zp[j] = z1[j]
        dz1 = np.linalg.solve(Jr, -r)
        z1 = z1 + dz1
        err = np.max(np.abs(dz1) / scale)
        if not np.isfinite(err):
            return z1, False
        if err <= tol or (err < 1e-9 and err > 0.5 * prev):
            return z1, True
        prev = err
    return z1, False
