"""Pure-numpy reference implementation of the hot kernels.

Mirrors ``_ckernels.pyx`` call for call; used when the compiled extension is
unavailable or ``CCMA_PURE_PYTHON`` is set.
"""

import numpy as np

# (a, b) pairs of the six distinct second partials, in storage order.
PAIRS = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))
PAIR_INDEX = np.array([[0, 1, 2], [1, 3, 4], [2, 4, 5]])


def _rz(c, s):
    # value, first and second derivative
    return np.array([
        [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
        [[-s, -c, 0.0], [c, -s, 0.0], [0.0, 0.0, 0.0]],
        [[-c, s, 0.0], [-s, -c, 0.0], [0.0, 0.0, 0.0]],
    ])


def _ry(c, s):
    return np.array([
        [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]],
        [[-s, 0.0, c], [0.0, 0.0, 0.0], [-c, 0.0, -s]],
        [[-c, 0.0, -s], [0.0, 0.0, 0.0], [s, 0.0, -c]],
    ])


def _rx(c, s):
    return np.array([
        [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]],
        [[0.0, 0.0, 0.0], [0.0, -s, -c], [0.0, c, -s]],
        [[0.0, 0.0, 0.0], [0.0, -c, s], [0.0, -s, -c]],
    ])


def rotation_partials(gamma, beta, alpha):
    """Return ``(R, dR, d2R)`` for ``R = Rz(gamma) Ry(beta) Rx(alpha)``.

    ``dR[a]`` is the partial with respect to angle ``a`` (0=gamma, 1=beta,
    2=alpha); ``d2R[PAIR_INDEX[a, b]]`` the second partial.
    """
    Z = _rz(np.cos(gamma), np.sin(gamma))
    Y = _ry(np.cos(beta), np.sin(beta))
    X = _rx(np.cos(alpha), np.sin(alpha))

    def prod(order):
        return Z[order[0]] @ Y[order[1]] @ X[order[2]]

    R = prod((0, 0, 0))
    dR = np.empty((3, 3, 3))
    for a in range(3):
        order = [0, 0, 0]
        order[a] += 1
        dR[a] = prod(order)
    d2R = np.empty((6, 3, 3))
    for idx, (a, b) in enumerate(PAIRS):
        order = [0, 0, 0]
        order[a] += 1
        order[b] += 1
        d2R[idx] = prod(order)
    return R, dR, d2R


def _sym(h6):
    return h6[PAIR_INDEX]


def assemble(x, m, jbi, jbk, pi, pk, ui, uk, di, dk, axi, n1k, n2k,
             bbody, bz0, aj, vpi, vpk, n_dp, second):
    """Stack residuals and analytic derivatives of every constraint row.

    Returns ``(C, Jst, Jm, Jdp, Hss, Hsm, Hsd)``; the last three are the
    residual-weighted second derivatives ``sum_r C_r d2C_r`` (None unless
    ``second``).
    """
    nb = x.shape[0] // 6
    poses = x.reshape(nb, 6)
    rot = [rotation_partials(*poses[b, :3]) for b in range(nb)]
    nj = len(jbi)
    n_m = len(bbody)
    n_a = len(aj)
    nrows = 5 * nj + 6 * n_m + 3 * n_a
    nm = 3 * n_m + n_a
    ns = 6 * nb

    C = np.zeros(nrows)
    Js = np.zeros((nrows, ns))
    Jm = np.zeros((nrows, nm))
    Jd = np.zeros((nrows, n_dp))
    if second:
        Hss = np.zeros((ns, ns))
        Hsm = np.zeros((ns, nm))
        Hsd = np.zeros((ns, n_dp))
    else:
        Hss = Hsm = Hsd = None
    eye = np.eye(3)

    for j in range(nj):
        i, k = jbi[j], jbk[j]
        Ri, dRi, d2Ri = rot[i]
        Rk, dRk, d2Rk = rot[k]
        oi, ok = 6 * i, 6 * k
        r = 5 * j

        C[r:r + 3] = Ri @ pi[j] + poses[i, 3:] - Rk @ pk[j] - poses[k, 3:]
        Js[r:r + 3, oi:oi + 3] = (dRi @ pi[j]).T
        Js[r:r + 3, oi + 3:oi + 6] = eye
        Js[r:r + 3, ok:ok + 3] = -(dRk @ pk[j]).T
        Js[r:r + 3, ok + 3:ok + 6] = -eye
        if di[j] >= 0:
            Jd[r:r + 3, di[j]] += Ri @ ui[j]
        if dk[j] >= 0:
            Jd[r:r + 3, dk[j]] -= Rk @ uk[j]

        wa = Ri @ axi[j]
        dwa = dRi @ axi[j]
        for row, n in ((r + 3, n1k[j]), (r + 4, n2k[j])):
            wn = Rk @ n
            dwn = dRk @ n
            C[row] = wa @ wn
            Js[row, oi:oi + 3] = dwa @ wn
            Js[row, ok:ok + 3] = dwn @ wa

        if second:
            lam = C[r:r + 3]
            Hss[oi:oi + 3, oi:oi + 3] += _sym((d2Ri @ pi[j]) @ lam)
            Hss[ok:ok + 3, ok:ok + 3] -= _sym((d2Rk @ pk[j]) @ lam)
            if di[j] >= 0:
                Hsd[oi:oi + 3, di[j]] += (dRi @ ui[j]) @ lam
            if dk[j] >= 0:
                Hsd[ok:ok + 3, dk[j]] -= (dRk @ uk[j]) @ lam
            d2wa = d2Ri @ axi[j]
            for row, n in ((r + 3, n1k[j]), (r + 4, n2k[j])):
                c = C[row]
                wn = Rk @ n
                dwn = dRk @ n
                Hss[oi:oi + 3, oi:oi + 3] += c * _sym(d2wa @ wn)
                Hss[ok:ok + 3, ok:ok + 3] += c * _sym((d2Rk @ n) @ wa)
                cross = c * (dwa @ dwn.T)
                Hss[oi:oi + 3, ok:ok + 3] += cross
                Hss[ok:ok + 3, oi:oi + 3] += cross.T

    r0 = 5 * nj
    for q in range(n_m):
        o = 6 * bbody[q]
        r = r0 + 3 * q
        C[r] = x[o + 5] - bz0[q]
        C[r + 1] = x[o + 1]
        C[r + 2] = x[o + 2]
        Js[r, o + 5] = 1.0
        Js[r + 1, o + 1] = 1.0
        Js[r + 2, o + 2] = 1.0
    r0 += 3 * n_m
    for q in range(n_m):
        o = 6 * bbody[q]
        r = r0 + 3 * q
        C[r] = x[o] - m[3 * q]
        C[r + 1] = x[o + 3] - m[3 * q + 1]
        C[r + 2] = x[o + 4] - m[3 * q + 2]
        Js[r, o] = 1.0
        Js[r + 1, o + 3] = 1.0
        Js[r + 2, o + 4] = 1.0
        Jm[r:r + 3, 3 * q:3 * q + 3] = -eye
    r0 += 3 * n_m
    for q in range(n_a):
        j = aj[q]
        i, k = jbi[j], jbk[j]
        Ri, dRi, d2Ri = rot[i]
        Rk, dRk, d2Rk = rot[k]
        oi, ok = 6 * i, 6 * k
        r = r0 + 3 * q
        col = 3 * n_m + q
        a = axi[j]
        v = vpi[j]
        th = m[col]
        ct, st = np.cos(th), np.sin(th)
        av = np.cross(a, v)
        along = a * (a @ v)
        w = v * ct + av * st + along * (1.0 - ct)
        w1 = -v * st + av * ct + along * st

        C[r:r + 3] = Ri @ w - Rk @ vpk[j]
        Js[r:r + 3, oi:oi + 3] = (dRi @ w).T
        Js[r:r + 3, ok:ok + 3] = -(dRk @ vpk[j]).T
        Jm[r:r + 3, col] = Ri @ w1
        if second:
            lam = C[r:r + 3]
            Hss[oi:oi + 3, oi:oi + 3] += _sym((d2Ri @ w) @ lam)
            Hss[ok:ok + 3, ok:ok + 3] -= _sym((d2Rk @ vpk[j]) @ lam)
            Hsm[oi:oi + 3, col] += (dRi @ w1) @ lam

    return C, Js, Jm, Jd, Hss, Hsm, Hsd
