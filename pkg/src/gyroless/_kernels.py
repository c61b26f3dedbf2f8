"""Compiled full-run loops behind the public per-step API.

Every function here is a numba kernel that advances one filter (or the
truth model) across an entire trajectory. The per-step modules define the
reference semantics; these loops repeat them verbatim with hand-inlined
3x3 algebra so that hundred-second runs at millisecond steps stay cheap
on a single core. Equivalence tests pin the two paths together.

Array conventions shared by all run loops:
  - Y has one row per step; row k is the measurement consumed while
    stepping from t_k to t_{k+1}. For the predict-correct filters (EKF,
    UKF, PF) the caller passes the incoming measurements of states
    1..N; the MEF corrects at the current state before propagating, so
    its caller passes the measurements of states 0..N-1.
  - T has one row per step; row k is the applied torque at t_k.
  - Outputs carry N+1 rows including the initial state.

Status codes: 0 nominal, 1 Newton solver failure, 2 filter divergence.
"""

import numpy as np
from numba import njit

NEWTON_TOL = 1e-12
NEWTON_MAXIT = 50

STATUS_OK = 0
STATUS_NEWTON_FAIL = 1
STATUS_DIVERGED = 2


@njit(cache=True)
def _cross(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@njit(cache=True)
def _hat(v):
    out = np.zeros((3, 3))
    out[0, 1] = -v[2]
    out[0, 2] = v[1]
    out[1, 0] = v[2]
    out[1, 2] = -v[0]
    out[2, 0] = -v[1]
    out[2, 1] = v[0]
    return out


@njit(cache=True)
def _mv3(A, b):
    out = np.empty(3)
    for i in range(3):
        out[i] = A[i, 0] * b[0] + A[i, 1] * b[1] + A[i, 2] * b[2]
    return out


@njit(cache=True)
def _mtv3(A, b):
    # A^T b
    out = np.empty(3)
    for i in range(3):
        out[i] = A[0, i] * b[0] + A[1, i] * b[1] + A[2, i] * b[2]
    return out


@njit(cache=True)
def _mm3(A, B):
    out = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            out[i, j] = A[i, 0] * B[0, j] + A[i, 1] * B[1, j] + A[i, 2] * B[2, j]
    return out


@njit(cache=True)
def _solve3(A, b):
    """Cramer solve of a 3x3 system; flag goes false on a tiny determinant."""
    d = (A[0, 0] * (A[1, 1] * A[2, 2] - A[1, 2] * A[2, 1])
         - A[0, 1] * (A[1, 0] * A[2, 2] - A[1, 2] * A[2, 0])
         + A[0, 2] * (A[1, 0] * A[2, 1] - A[1, 1] * A[2, 0]))
    x = np.empty(3)
    if abs(d) < 1e-300:
        return x, False
    x[0] = (b[0] * (A[1, 1] * A[2, 2] - A[1, 2] * A[2, 1])
            - A[0, 1] * (b[1] * A[2, 2] - A[1, 2] * b[2])
            + A[0, 2] * (b[1] * A[2, 1] - A[1, 1] * b[2])) / d
    x[1] = (A[0, 0] * (b[1] * A[2, 2] - A[1, 2] * b[2])
            - b[0] * (A[1, 0] * A[2, 2] - A[1, 2] * A[2, 0])
            + A[0, 2] * (A[1, 0] * b[2] - b[1] * A[2, 0])) / d
    x[2] = (A[0, 0] * (A[1, 1] * b[2] - b[1] * A[2, 1])
            - A[0, 1] * (A[1, 0] * b[2] - b[1] * A[2, 0])
            + b[0] * (A[1, 0] * A[2, 1] - A[1, 1] * A[2, 0])) / d
    return x, True


@njit(cache=True)
def _solve33(A, B):
    """Columnwise Cramer solve of A X = B for 3x3 B."""
    X = np.empty((3, 3))
    ok = True
    for j in range(3):
        col, okj = _solve3(A, B[:, j].copy())
        ok = ok and okj
        X[:, j] = col
    return X, ok


@njit(cache=True)
def _exp3(v):
    n2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
    n = np.sqrt(n2)
    if n < 1e-8:
        a = 1.0 - n2 / 6.0
        b = 0.5 - n2 / 24.0
    else:
        a = np.sin(n) / n
        b = (1.0 - np.cos(n)) / n2
    V = _hat(v)
    V2 = _mm3(V, V)
    out = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            out[i, j] = (1.0 if i == j else 0.0) + a * V[i, j] + b * V2[i, j]
    return out


@njit(cache=True)
def _rotor(w, h):
    n = np.sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2])
    half = 0.5 * h
    th = half * n
    out = np.empty(4)
    out[0] = np.cos(th)
    if n * abs(h) < 2e-8:
        s = half * (1.0 - th * th / 6.0)
    else:
        s = np.sin(th) / n
    out[1] = s * w[0]
    out[2] = s * w[1]
    out[3] = s * w[2]
    return out


@njit(cache=True)
def _qmul(a, b):
    out = np.empty(4)
    out[0] = a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3]
    out[1] = a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2]
    out[2] = a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1]
    out[3] = a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]
    return out


@njit(cache=True)
def _qnorm(q):
    n = np.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    return q / n


@njit(cache=True)
def _q2R(q):
    w, x, y, z = q[0], q[1], q[2], q[3]
    R = np.empty((3, 3))
    R[0, 0] = 1.0 - 2.0 * (y * y + z * z)
    R[0, 1] = 2.0 * (x * y - w * z)
    R[0, 2] = 2.0 * (x * z + w * y)
    R[1, 0] = 2.0 * (x * y + w * z)
    R[1, 1] = 1.0 - 2.0 * (x * x + z * z)
    R[1, 2] = 2.0 * (y * z - w * x)
    R[2, 0] = 2.0 * (x * z - w * y)
    R[2, 1] = 2.0 * (y * z + w * x)
    R[2, 2] = 1.0 - 2.0 * (x * x + y * y)
    return R


@njit(cache=True)
def _mom(In, x, h):
    # I x + (h/2) x cross I x + (h^2/12) x cross (x cross I x)
    Ix = _mv3(In, x)
    c1 = _cross(x, Ix)
    c2 = _cross(x, c1)
    return Ix + 0.5 * h * c1 + (h * h / 12.0) * c2


@njit(cache=True)
def _mom_jac(In, x, h):
    Ix = _mv3(In, x)
    hx = _hat(x)
    hIx = _hat(Ix)
    inner = _mm3(hx, In) - hIx
    term2 = _mm3(hx, inner) - _hat(_cross(x, Ix))
    return In + 0.5 * h * inner + (h * h / 12.0) * term2


@njit(cache=True)
def _rate_newton(w, impulse, In, h):
    """Solve the symplectic momentum balance for the next rate."""
    rhs = _mom(In, w, -h) + impulse
    x = w.copy()
    for _ in range(NEWTON_MAXIT):
        r = _mom(In, x, h) - rhs
        if max(abs(r[0]), abs(r[1]), abs(r[2])) < NEWTON_TOL:
            return x, True
        J = _mom_jac(In, x, h)
        dx, ok = _solve3(J, r)
        if not ok:
            return x, False
        x = x - dx
    return x, False


@njit(cache=True)
def _rate_newton_mixed(w, impulse, In, h):
    """One-sided variant where the right side also carries the unknown."""
    Iw = _mv3(In, w)
    hIw = _hat(Iw)
    h12 = h * h / 12.0
    x = w.copy()
    for _ in range(NEWTON_MAXIT):
        Ix = _mv3(In, x)
        lhs = Ix + 0.5 * h * _cross(x, Ix) + h12 * _cross(x, _cross(x, Ix))
        xIw = _cross(x, Iw)
        rhs = Iw - 0.5 * h * xIw + h12 * _cross(x, xIw) + impulse
        r = lhs - rhs
        if max(abs(r[0]), abs(r[1]), abs(r[2])) < NEWTON_TOL:
            return x, True
        hx = _hat(x)
        J_lhs = _mom_jac(In, x, h)
        J_rhs = 0.5 * h * hIw + h12 * (_mm3(hx, -hIw) - _hat(xIw))
        dx, ok = _solve3(J_lhs - J_rhs, r)
        if not ok:
            return x, False
        x = x - dx
    return x, False


@njit(cache=True)
def truth_run(q0, w0, U, In, h):
    """Forced rigid-body trajectory; U rows are torque-plus-disturbance."""
    n = U.shape[0]
    qs = np.empty((n + 1, 4))
    ws = np.empty((n + 1, 3))
    qs[0] = q0
    ws[0] = w0
    q = q0.copy()
    w = w0.copy()
    for k in range(n):
        q = _qnorm(_qmul(q, _rotor(w, h)))
        w, ok = _rate_newton(w, h * U[k], In, h)
        if not ok:
            return qs, ws, STATUS_NEWTON_FAIL, k
        qs[k + 1] = q
        ws[k + 1] = w
    return qs, ws, STATUS_OK, -1


@njit(cache=True)
def _rotor_jac(w, h):
    half = 0.5 * h
    n = np.sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2])
    J = np.empty((4, 3))
    if n < 1e-6:
        for j in range(3):
            J[0, j] = -half * half * w[j]
        for i in range(3):
            for j in range(3):
                J[1 + i, j] = (half if i == j else 0.0) \
                    - (half ** 3 / 3.0) * w[i] * w[j]
    else:
        th = half * n
        s = np.sin(th)
        c = np.cos(th)
        f = s / n
        fp = (half * c * n - s) / (n * n)
        for j in range(3):
            J[0, j] = -half * s * w[j] / n
        for i in range(3):
            for j in range(3):
                J[1 + i, j] = (f if i == j else 0.0) + (fp / n) * w[i] * w[j]
    return J


@njit(cache=True)
def _quat_left(q):
    L = np.empty((4, 4))
    w, x, y, z = q[0], q[1], q[2], q[3]
    L[0, 0], L[0, 1], L[0, 2], L[0, 3] = w, -x, -y, -z
    L[1, 0], L[1, 1], L[1, 2], L[1, 3] = x, w, -z, y
    L[2, 0], L[2, 1], L[2, 2], L[2, 3] = y, z, w, -x
    L[3, 0], L[3, 1], L[3, 2], L[3, 3] = z, -y, x, w
    return L


@njit(cache=True)
def _quat_right(p):
    R = np.empty((4, 4))
    w, x, y, z = p[0], p[1], p[2], p[3]
    R[0, 0], R[0, 1], R[0, 2], R[0, 3] = w, -x, -y, -z
    R[1, 0], R[1, 1], R[1, 2], R[1, 3] = x, w, z, -y
    R[2, 0], R[2, 1], R[2, 2], R[2, 3] = y, -z, w, x
    R[3, 0], R[3, 1], R[3, 2], R[3, 3] = z, y, -x, w
    return R


@njit(cache=True)
def _out_jac_q(q, a):
    """3x4 derivative of r(q)^T a with respect to q."""
    w = q[0]
    v = q[1:4]
    J = np.empty((3, 4))
    cva = _cross(v, a)
    va = v[0] * a[0] + v[1] * a[1] + v[2] * a[2]
    ha = _hat(a)
    for i in range(3):
        J[i, 0] = 2.0 * w * a[i] - 2.0 * cva[i]
        for j in range(3):
            J[i, 1 + j] = (-2.0 * a[i] * v[j] + 2.0 * v[i] * a[j]
                           + (2.0 * va if i == j else 0.0) + 2.0 * w * ha[i, j])
    return J


@njit(cache=True)
def _predict_output(q, a1, a2):
    R = _q2R(_qnorm(q))
    out = np.empty(6)
    out[0:3] = _mtv3(R, a1)
    out[3:6] = _mtv3(R, a2)
    return out


@njit(cache=True)
def ekf_run(x0, P0, W7, Qm, Y, T, In, h, a1, a2):
    """Extended Kalman filter over a full measurement record."""
    n = Y.shape[0]
    qs = np.empty((n + 1, 4))
    ws = np.empty((n + 1, 3))
    qs[0] = x0[0:4]
    ws[0] = x0[4:7]
    x = x0.copy()
    P = P0.copy()
    for k in range(n):
        q = x[0:4].copy()
        w = x[4:7].copy()
        w_next, ok = _rate_newton(w, h * T[k], In, h)
        if not ok:
            return qs, ws, STATUS_NEWTON_FAIL, k
        d = _rotor(w, h)
        # raw bilinear product: the norm is restored after the update,
        # matching the map F differentiates
        q_next = _qmul(q, d)

        F = np.zeros((7, 7))
        F[0:4, 0:4] = _quat_right(d)
        F[0:4, 4:7] = _quat_left(q) @ _rotor_jac(w, h)
        Fw, okj = _solve33(_mom_jac(In, w_next, h), _mom_jac(In, w, -h))
        if not okj:
            return qs, ws, STATUS_NEWTON_FAIL, k
        F[4:7, 4:7] = Fw
        P = F @ P @ F.T + W7
        P = 0.5 * (P + P.T)

        x[0:4] = q_next
        x[4:7] = w_next
        yhat = _predict_output(q_next, a1, a2)
        H = np.zeros((6, 7))
        H[0:3, 0:4] = _out_jac_q(q_next, a1)
        H[3:6, 0:4] = _out_jac_q(q_next, a2)
        Py = H @ P @ H.T + Qm
        K = np.linalg.solve(Py, (P @ H.T).T).T
        x = x + K @ (Y[k] - yhat)
        P = P - K @ Py @ K.T
        P = 0.5 * (P + P.T)
        x[0:4] = _qnorm(x[0:4])
        if not np.isfinite(x).all():
            return qs, ws, STATUS_DIVERGED, k
        qs[k + 1] = x[0:4]
        ws[k + 1] = x[4:7]
    return qs, ws, STATUS_OK, -1


@njit(cache=True)
def _chol(V):
    """Lower Cholesky factor with a success flag instead of an exception."""
    n = V.shape[0]
    L = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1):
            s = V[i, j]
            for m in range(j):
                s -= L[i, m] * L[j, m]
            if i == j:
                if s <= 0.0:
                    return L, False
                L[i, i] = np.sqrt(s)
            else:
                L[i, j] = s / L[j, j]
    return L, True


@njit(cache=True)
def ukf_run(x0, P0, W7, Qm, Y, T, In, h, a1, a2):
    """Unscented Kalman filter over a full measurement record.

    Moments are accumulated about sigma point 0 (the anchor); with the
    default unit-alpha parameters this keeps the covariance block exactly
    invariant under a constant shift of all propagated points.
    """
    n = Y.shape[0]
    dim = 7
    nsig = 2 * dim + 1
    qs = np.empty((n + 1, 4))
    ws = np.empty((n + 1, 3))
    qs[0] = x0[0:4]
    ws[0] = x0[4:7]
    x = x0.copy()
    P = P0.copy()

    # scaled UT with alpha=1, kappa=0, beta=2
    lam = 0.0
    gamma = np.sqrt(dim + lam)
    wm = np.full(nsig, 1.0 / (2.0 * (dim + lam)))
    wc = wm.copy()
    wm[0] = lam / (dim + lam)
    wc[0] = wm[0] + 2.0

    for k in range(n):
        V = P + W7
        L, okc = _chol(V)
        if not okc:
            return qs, ws, STATUS_DIVERGED, k
        X = np.empty((nsig, dim))
        X[0] = x
        for i in range(dim):
            X[1 + i] = x + gamma * L[:, i]
            X[1 + dim + i] = x - gamma * L[:, i]

        Xp = np.empty((nsig, dim))
        Yp = np.empty((nsig, 6))
        for i in range(nsig):
            qi = X[i, 0:4].copy()
            wi = X[i, 4:7].copy()
            wn, ok = _rate_newton(wi, h * T[k], In, h)
            if not ok:
                return qs, ws, STATUS_NEWTON_FAIL, k
            qn = _qnorm(_qmul(qi, _rotor(wi, h)))
            Xp[i, 0:4] = qn
            Xp[i, 4:7] = wn
            Yp[i] = _predict_output(qn, a1, a2)

        # anchored moments
        Cx = Xp - Xp[0]
        Cy = Yp - Yp[0]
        mx = wm @ Cx
        my = wm @ Cy
        xbar = Xp[0] + mx
        ybar = Yp[0] + my
        Dx = Cx - mx
        Dy = Cy - my
        Px = (Dx * wc.reshape(-1, 1)).T @ Dx
        Pe = (Dy * wc.reshape(-1, 1)).T @ Dy + Qm
        Pxy = (Dx * wc.reshape(-1, 1)).T @ Dy

        K = np.linalg.solve(Pe, Pxy.T).T
        x = xbar + K @ (Y[k] - ybar)
        x[0:4] = _qnorm(x[0:4])
        P = Px - K @ Pe @ K.T
        P = 0.5 * (P + P.T)
        if not np.isfinite(P).all() or not np.isfinite(x).all():
            return qs, ws, STATUS_DIVERGED, k
        ev, Evec = np.linalg.eigh(P)
        if ev[0] < 1e-12:
            ev = np.maximum(ev, 1e-12)
            P = Evec @ np.diag(ev) @ Evec.T
            P = 0.5 * (P + P.T)
        qs[k + 1] = x[0:4]
        ws[k + 1] = x[4:7]
    return qs, ws, STATUS_OK, -1


@njit(cache=True)
def mef_run(R0, w0, K0, Y, T, In, h, alpha, q1, q2, d1, d2, brb, a1, a2):
    """Minimum-energy filter over a full measurement record."""
    n = Y.shape[0]
    Rs = np.empty((n + 1, 3, 3))
    ws = np.empty((n + 1, 3))
    Rs[0] = R0
    ws[0] = w0
    R = R0.copy()
    w = w0.copy()
    K = K0.copy()
    c1 = q1 / (d1 * d1)
    c2 = q2 / (d2 * d2)
    for k in range(n):
        yh1 = _mtv3(R, a1)
        yh2 = _mtv3(R, a2)
        y1 = Y[k, 0:3].copy()
        y2 = Y[k, 3:6].copy()
        rR = -(_cross(yh1, y1) + _cross(yh2, y2))
        K11 = K[0:3, 0:3].copy()
        K21 = K[3:6, 0:3].copy()

        R = _mm3(R, _exp3(h * (w + _mv3(K11, rR))))
        impulse = h * (T[k] + _mv3(K21, rR))
        w, ok = _rate_newton_mixed(w, impulse, In, h)
        if not ok:
            return Rs, ws, STATUS_NEWTON_FAIL, k

        A = np.zeros((6, 6))
        A[0:3, 0:3] = -_hat(w)
        for i in range(3):
            A[i, 3 + i] = 1.0
        Ablock, okj = _solve33(In, _hat(_mv3(In, w)) - _mm3(_hat(w), In))
        if not okj:
            return Rs, ws, STATUS_NEWTON_FAIL, k
        A[3:6, 3:6] = Ablock

        E = np.zeros((6, 6))
        E[0:3, 0:3] = (-c1 * 0.5) * (_mm3(_hat(yh1), _hat(y1)) + _mm3(_hat(y1), _hat(yh1))) \
                      + (-c2 * 0.5) * (_mm3(_hat(yh2), _hat(y2)) + _mm3(_hat(y2), _hat(yh2)))

        BRB = np.zeros((6, 6))
        BRB[3:6, 3:6] = brb

        Wm = np.zeros((6, 6))
        Wm[0:3, 0:3] = 0.5 * _hat(_mv3(K11, rR))

        Kdot = -alpha * K + A @ K + K @ A.T - K @ E @ K + BRB - Wm @ K - K @ Wm.T
        K = K + h * Kdot
        K = 0.5 * (K + K.T)
        s = 0.0
        for i in range(6):
            for j in range(6):
                s += K[i, j] * K[i, j]
        if np.sqrt(s) > 1e6 or not np.isfinite(s):
            return Rs, ws, STATUS_DIVERGED, k
        Rs[k + 1] = R
        ws[k + 1] = w
    return Rs, ws, STATUS_OK, -1


@njit(cache=True)
def pf_run(R0, w0, Y, T, In, h, Q_pen, Sigma_pen, G, h_pred, include_h1, a1, a2):
    """Modified predictive filter over a full measurement record.

    Returns per-step output residuals alongside the state history so the
    caller can evaluate the moment matrix M over any window.
    """
    n = Y.shape[0]
    Rs = np.empty((n + 1, 3, 3))
    ws = np.empty((n + 1, 3))
    resid = np.empty((n, 6))
    Rs[0] = R0
    ws[0] = w0
    R = R0.copy()
    w = w0.copy()
    Qi = np.linalg.inv(Q_pen)
    QiS = Qi + Qi.T
    lamc = 0.5 * h_pred * h_pred
    for k in range(n):
        Iw = _mv3(In, w)
        gyr0 = _cross(Iw, w) + T[k]
        gyro, okg = _solve3(In, gyr0)
        if not okg:
            return Rs, ws, resid, STATUS_NEWTON_FAIL, k
        B = np.zeros((3, 3))
        gam = np.zeros(3)
        for s in range(2):
            if s == 0:
                a = a1
                yk = Y[k, 0:3].copy()
            else:
                a = a2
                yk = Y[k, 3:6].copy()
            yh = _mtv3(R, a)
            L2 = _cross(w, _cross(w, yh)) + _cross(yh, gyro)
            zeta = lamc * L2
            if include_h1:
                zeta = zeta - h_pred * _cross(w, yh)
            wk = _mm3(_hat(yh), G)
            B = B + _mm3(_hat(yk), lamc * wk)
            gam = gam + _cross(yk, yh) + _cross(yk, zeta)
        lhs = B.T @ _mm3(Qi.T, B) + Sigma_pen.T
        rhsv = _mv3(B.T, _mv3(QiS, gam))
        delta, okd = _solve3(lhs, rhsv)
        if not okd:
            return Rs, ws, resid, STATUS_NEWTON_FAIL, k
        delta = -0.5 * delta

        R = _mm3(R, _exp3(h * w))
        w, ok = _rate_newton(w, h * (T[k] + _mv3(In, delta)), In, h)
        if not ok:
            return Rs, ws, resid, STATUS_NEWTON_FAIL, k
        if not np.isfinite(w).all():
            return Rs, ws, resid, STATUS_DIVERGED, k
        resid[k, 0:3] = _mtv3(R, a1) - Y[k, 0:3]
        resid[k, 3:6] = _mtv3(R, a2) - Y[k, 3:6]
        Rs[k + 1] = R
        ws[k + 1] = w
    return Rs, ws, resid, STATUS_OK, -1
