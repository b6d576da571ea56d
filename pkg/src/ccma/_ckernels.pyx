# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: Euler rotation partials and constraint assembly.

Same contract as :mod:`ccma._pykernels`.
"""

import numpy as np
from libc.math cimport sin, cos


cdef int PA[6]
cdef int PB[6]
PA[:] = [0, 0, 0, 1, 1, 2]
PB[:] = [0, 1, 2, 1, 2, 2]


cdef inline void _mul3(const double* A, const double* B, double* out) noexcept nogil:
    cdef int r, c
    for r in range(3):
        for c in range(3):
            out[3 * r + c] = A[3 * r] * B[c] + A[3 * r + 1] * B[3 + c] + A[3 * r + 2] * B[6 + c]


cdef inline void _mv(const double* M, const double* v, double* out) noexcept nogil:
    out[0] = M[0] * v[0] + M[1] * v[1] + M[2] * v[2]
    out[1] = M[3] * v[0] + M[4] * v[1] + M[5] * v[2]
    out[2] = M[6] * v[0] + M[7] * v[1] + M[8] * v[2]


cdef inline double _dot(const double* a, const double* b) noexcept nogil:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


cdef void _set(double* M, double a0, double a1, double a2, double a3, double a4,
               double a5, double a6, double a7, double a8) noexcept nogil:
    M[0] = a0; M[1] = a1; M[2] = a2
    M[3] = a3; M[4] = a4; M[5] = a5
    M[6] = a6; M[7] = a7; M[8] = a8


cdef void _rotation(double g, double b, double a, double* R, double* dR,
                    double* d2R) noexcept nogil:
    # Z, Y, X hold value / first / second derivative blocks of 9
    cdef double Z[27]
    cdef double Y[27]
    cdef double X[27]
    cdef double tmp[9]
    cdef double c, s
    cdef int o[3]
    cdef int q, idx

    c = cos(g); s = sin(g)
    _set(Z, c, -s, 0, s, c, 0, 0, 0, 1)
    _set(Z + 9, -s, -c, 0, c, -s, 0, 0, 0, 0)
    _set(Z + 18, -c, s, 0, -s, -c, 0, 0, 0, 0)
    c = cos(b); s = sin(b)
    _set(Y, c, 0, s, 0, 1, 0, -s, 0, c)
    _set(Y + 9, -s, 0, c, 0, 0, 0, -c, 0, -s)
    _set(Y + 18, -c, 0, -s, 0, 0, 0, s, 0, -c)
    c = cos(a); s = sin(a)
    _set(X, 1, 0, 0, 0, c, -s, 0, s, c)
    _set(X + 9, 0, 0, 0, 0, -s, -c, 0, c, -s)
    _set(X + 18, 0, 0, 0, 0, -c, s, 0, -s, -c)

    _mul3(Z, Y, tmp)
    _mul3(tmp, X, R)
    for q in range(3):
        o[0] = 0; o[1] = 0; o[2] = 0
        o[q] = 1
        _mul3(Z + 9 * o[0], Y + 9 * o[1], tmp)
        _mul3(tmp, X + 9 * o[2], dR + 9 * q)
    for idx in range(6):
        o[0] = 0; o[1] = 0; o[2] = 0
        o[PA[idx]] += 1
        o[PB[idx]] += 1
        _mul3(Z + 9 * o[0], Y + 9 * o[1], tmp)
        _mul3(tmp, X + 9 * o[2], d2R + 9 * idx)


def rotation_partials(double gamma, double beta, double alpha):
    R = np.empty((3, 3))
    dR = np.empty((3, 3, 3))
    d2R = np.empty((6, 3, 3))
    cdef double[:, ::1] Rv = R
    cdef double[:, :, ::1] dRv = dR
    cdef double[:, :, ::1] d2Rv = d2R
    _rotation(gamma, beta, alpha, &Rv[0, 0], &dRv[0, 0, 0], &d2Rv[0, 0, 0])
    return R, dR, d2R


cdef inline void _add_sym(double[:, ::1] H, Py_ssize_t o1, Py_ssize_t o2,
                          const double* d2R, const double* v, const double* w,
                          double scale) noexcept nogil:
    # H[o1+a, o2+b] += scale * w . (d2R_ab v), symmetric in (a, b)
    cdef double t[3]
    cdef double h
    cdef int idx, a, b
    for idx in range(6):
        _mv(d2R + 9 * idx, v, t)
        h = scale * _dot(t, w)
        a = PA[idx]; b = PB[idx]
        H[o1 + a, o2 + b] += h
        if a != b:
            H[o1 + b, o2 + a] += h


def assemble(const double[::1] x, const double[::1] m,
             const Py_ssize_t[::1] jbi, const Py_ssize_t[::1] jbk,
             const double[:, ::1] pi, const double[:, ::1] pk,
             const double[:, ::1] ui, const double[:, ::1] uk,
             const Py_ssize_t[::1] di, const Py_ssize_t[::1] dk,
             const double[:, ::1] axi, const double[:, ::1] n1k,
             const double[:, ::1] n2k,
             const Py_ssize_t[::1] bbody, const double[::1] bz0,
             const Py_ssize_t[::1] aj,
             const double[:, ::1] vpi, const double[:, ::1] vpk,
             Py_ssize_t n_dp, bint second):
    cdef Py_ssize_t nb = x.shape[0] // 6
    cdef Py_ssize_t nj = jbi.shape[0]
    cdef Py_ssize_t n_m = bbody.shape[0]
    cdef Py_ssize_t n_a = aj.shape[0]
    cdef Py_ssize_t nrows = 5 * nj + 6 * n_m + 3 * n_a
    cdef Py_ssize_t nm = 3 * n_m + n_a
    cdef Py_ssize_t ns = 6 * nb

    C_arr = np.zeros(nrows)
    Js_arr = np.zeros((nrows, ns))
    Jm_arr = np.zeros((nrows, nm))
    Jd_arr = np.zeros((nrows, n_dp))
    cdef double[::1] C = C_arr
    cdef double[:, ::1] Js = Js_arr
    cdef double[:, ::1] Jm = Jm_arr
    cdef double[:, ::1] Jd = Jd_arr

    Hss_arr = Hsm_arr = Hsd_arr = None
    cdef double[:, ::1] Hss
    cdef double[:, ::1] Hsm
    cdef double[:, ::1] Hsd
    if second:
        Hss_arr = np.zeros((ns, ns))
        Hsm_arr = np.zeros((ns, nm))
        Hsd_arr = np.zeros((ns, n_dp))
        Hss = Hss_arr
        Hsm = Hsm_arr
        Hsd = Hsd_arr

    rot_arr = np.empty((nb, 9))
    drot_arr = np.empty((nb, 27))
    d2rot_arr = np.empty((nb, 54))
    cdef double[:, ::1] Rb = rot_arr
    cdef double[:, ::1] dRb = drot_arr
    cdef double[:, ::1] d2Rb = d2rot_arr

    cdef Py_ssize_t b, j, i, k, oi, ok, r, row, q, col, o
    cdef int a, c, e, side
    cdef double t1[3]
    cdef double t2[3]
    cdef double wa[3]
    cdef double wn[3]
    cdef double lam[3]
    cdef double dwa[9]
    cdef double dwn[9]
    cdef double w[3]
    cdef double w1[3]
    cdef double av[3]
    cdef double v[3]
    cdef double ax[3]
    cdef double cr, ct, st, adv, hval
    cdef const double* Ri
    cdef const double* Rk
    cdef const double* dRi
    cdef const double* dRk
    cdef const double* d2Ri
    cdef const double* d2Rk
    cdef const double* nvec

    with nogil:
        for b in range(nb):
            _rotation(x[6 * b], x[6 * b + 1], x[6 * b + 2],
                      &Rb[b, 0], &dRb[b, 0], &d2Rb[b, 0])

        for j in range(nj):
            i = jbi[j]
            k = jbk[j]
            Ri = &Rb[i, 0]; dRi = &dRb[i, 0]; d2Ri = &d2Rb[i, 0]
            Rk = &Rb[k, 0]; dRk = &dRb[k, 0]; d2Rk = &d2Rb[k, 0]
            oi = 6 * i
            ok = 6 * k
            r = 5 * j

            _mv(Ri, &pi[j, 0], t1)
            _mv(Rk, &pk[j, 0], t2)
            for c in range(3):
                C[r + c] = t1[c] + x[oi + 3 + c] - t2[c] - x[ok + 3 + c]
                Js[r + c, oi + 3 + c] = 1.0
                Js[r + c, ok + 3 + c] = -1.0
            for a in range(3):
                _mv(dRi + 9 * a, &pi[j, 0], t1)
                _mv(dRk + 9 * a, &pk[j, 0], t2)
                for c in range(3):
                    Js[r + c, oi + a] = t1[c]
                    Js[r + c, ok + a] = -t2[c]
            if di[j] >= 0:
                _mv(Ri, &ui[j, 0], t1)
                for c in range(3):
                    Jd[r + c, di[j]] += t1[c]
            if dk[j] >= 0:
                _mv(Rk, &uk[j, 0], t1)
                for c in range(3):
                    Jd[r + c, dk[j]] -= t1[c]

            _mv(Ri, &axi[j, 0], wa)
            for a in range(3):
                _mv(dRi + 9 * a, &axi[j, 0], dwa + 3 * a)
            for side in range(2):
                row = r + 3 + side
                nvec = &n1k[j, 0] if side == 0 else &n2k[j, 0]
                _mv(Rk, nvec, wn)
                for a in range(3):
                    _mv(dRk + 9 * a, nvec, dwn + 3 * a)
                C[row] = _dot(wa, wn)
                for a in range(3):
                    Js[row, oi + a] = _dot(dwa + 3 * a, wn)
                    Js[row, ok + a] = _dot(dwn + 3 * a, wa)
                if second:
                    cr = C[row]
                    _add_sym(Hss, oi, oi, d2Ri, &axi[j, 0], wn, cr)
                    _add_sym(Hss, ok, ok, d2Rk, nvec, wa, cr)
                    for a in range(3):
                        for e in range(3):
                            hval = cr * _dot(dwa + 3 * a, dwn + 3 * e)
                            Hss[oi + a, ok + e] += hval
                            Hss[ok + e, oi + a] += hval

            if second:
                for c in range(3):
                    lam[c] = C[r + c]
                _add_sym(Hss, oi, oi, d2Ri, &pi[j, 0], lam, 1.0)
                _add_sym(Hss, ok, ok, d2Rk, &pk[j, 0], lam, -1.0)
                if di[j] >= 0:
                    for a in range(3):
                        _mv(dRi + 9 * a, &ui[j, 0], t1)
                        Hsd[oi + a, di[j]] += _dot(t1, lam)
                if dk[j] >= 0:
                    for a in range(3):
                        _mv(dRk + 9 * a, &uk[j, 0], t1)
                        Hsd[ok + a, dk[j]] -= _dot(t1, lam)

        r = 5 * nj
        for q in range(n_m):
            o = 6 * bbody[q]
            C[r + 3 * q] = x[o + 5] - bz0[q]
            C[r + 3 * q + 1] = x[o + 1]
            C[r + 3 * q + 2] = x[o + 2]
            Js[r + 3 * q, o + 5] = 1.0
            Js[r + 3 * q + 1, o + 1] = 1.0
            Js[r + 3 * q + 2, o + 2] = 1.0
        r = r + 3 * n_m
        for q in range(n_m):
            o = 6 * bbody[q]
            C[r + 3 * q] = x[o] - m[3 * q]
            C[r + 3 * q + 1] = x[o + 3] - m[3 * q + 1]
            C[r + 3 * q + 2] = x[o + 4] - m[3 * q + 2]
            Js[r + 3 * q, o] = 1.0
            Js[r + 3 * q + 1, o + 3] = 1.0
            Js[r + 3 * q + 2, o + 4] = 1.0
            for c in range(3):
                Jm[r + 3 * q + c, 3 * q + c] = -1.0
        r = r + 3 * n_m
        for q in range(n_a):
            j = aj[q]
            i = jbi[j]
            k = jbk[j]
            Ri = &Rb[i, 0]; dRi = &dRb[i, 0]; d2Ri = &d2Rb[i, 0]
            Rk = &Rb[k, 0]; dRk = &dRb[k, 0]; d2Rk = &d2Rb[k, 0]
            oi = 6 * i
            ok = 6 * k
            row = r + 3 * q
            col = 3 * n_m + q
            for c in range(3):
                ax[c] = axi[j, c]
                v[c] = vpi[j, c]
            av[0] = ax[1] * v[2] - ax[2] * v[1]
            av[1] = ax[2] * v[0] - ax[0] * v[2]
            av[2] = ax[0] * v[1] - ax[1] * v[0]
            adv = _dot(ax, v)
            ct = cos(m[col])
            st = sin(m[col])
            for c in range(3):
                w[c] = v[c] * ct + av[c] * st + ax[c] * adv * (1.0 - ct)
                w1[c] = -v[c] * st + av[c] * ct + ax[c] * adv * st

            _mv(Ri, w, t1)
            _mv(Rk, &vpk[j, 0], t2)
            for c in range(3):
                C[row + c] = t1[c] - t2[c]
            _mv(Ri, w1, t1)
            for c in range(3):
                Jm[row + c, col] = t1[c]
            for a in range(3):
                _mv(dRi + 9 * a, w, t1)
                _mv(dRk + 9 * a, &vpk[j, 0], t2)
                for c in range(3):
                    Js[row + c, oi + a] = t1[c]
                    Js[row + c, ok + a] = -t2[c]
            if second:
                for c in range(3):
                    lam[c] = C[row + c]
                _add_sym(Hss, oi, oi, d2Ri, w, lam, 1.0)
                _add_sym(Hss, ok, ok, d2Rk, &vpk[j, 0], lam, -1.0)
                for a in range(3):
                    _mv(dRi + 9 * a, w1, t1)
                    Hsm[oi + a, col] += _dot(t1, lam)

    return C_arr, Js_arr, Jm_arr, Jd_arr, Hss_arr, Hsm_arr, Hsd_arr
