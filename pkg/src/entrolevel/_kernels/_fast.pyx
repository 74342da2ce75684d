# cython: boundscheck=False, wraparound=False, cdivision=True
"""Cython kernels mirroring ``_py.py`` (piecewise-quintic Heaviside family
and the secant/Taylor surrogates).  Selected automatically at import when the
extension built; semantics must stay bit-compatible with the NumPy fallback.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef double[6][6] _DM
cdef double[6][6] _DP
cdef int[6] _NC

def _init_tables():
    pm = np.array([0.5, 1.25, 0.0, -2.5, -2.5, -0.75])
    pp = np.array([0.5, 1.25, 0.0, -2.5, 2.5, -0.75])
    cdef int o, k
    for o in range(6):
        _NC[o] = 6 - o
        for k in range(6):
            _DM[o][k] = 0.0
            _DP[o][k] = 0.0
        for k in range(_NC[o]):
            _DM[o][k] = pm[k]
            _DP[o][k] = pp[k]
        pm = np.array([k * pm[k] for k in range(1, len(pm))], dtype=float)
        pp = np.array([k * pp[k] for k in range(1, len(pp))], dtype=float)

_init_tables()


cdef inline double _eval(int order, double x) noexcept nogil:
    cdef double r
    cdef int k, n
    if x < -1.0:
        return 0.0
    if x >= 1.0:
        return 1.0 if order == 0 else 0.0
    n = _NC[order]
    r = 0.0
    if x < 0.0:
        for k in range(n - 1, -1, -1):
            r = r * x + _DM[order][k]
    else:
        for k in range(n - 1, -1, -1):
            r = r * x + _DP[order][k]
    return r


cdef inline int _piece(double x) noexcept nogil:
    if x <= -1.0:
        return 0
    if x <= 0.0:
        return 1
    if x <= 1.0:
        return 2
    return 3


def hpoly(x, int order):
    arr = np.ascontiguousarray(np.atleast_1d(np.asarray(x, dtype=np.float64)))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xf = arr.ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty_like(xf)
    cdef Py_ssize_t i, n = xf.shape[0]
    with nogil:
        for i in range(n):
            out[i] = _eval(order, xf[i])
    res = out.reshape(arr.shape)
    if np.asarray(x).ndim == 0:
        return res[()] if res.ndim == 0 else res.reshape(())[()]
    return res


def piece_index(x):
    arr = np.ascontiguousarray(np.atleast_1d(np.asarray(x, dtype=np.float64)))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xf = arr.ravel()
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(xf.shape[0], dtype=np.int64)
    cdef Py_ssize_t i, n = xf.shape[0]
    with nogil:
        for i in range(n):
            out[i] = _piece(xf[i])
    return out.reshape(arr.shape)


def aux_surrogates(phi0, phi1, double eps):
    a_in = np.asarray(phi0, dtype=np.float64) / eps
    b_in = np.asarray(phi1, dtype=np.float64) / eps
    a_in, b_in = np.broadcast_arrays(a_in, b_in)
    shape = a_in.shape
    cdef cnp.ndarray[cnp.float64_t, ndim=1] a = np.ascontiguousarray(a_in).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] b = np.ascontiguousarray(b_in).ravel()
    cdef Py_ssize_t i, n = a.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rho = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rho_d = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sig = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sig_d = np.empty(n)
    cdef double m, jj, jj2, h1m, h2m, h3m, h4m, h5m, dh0, dh1
    cdef double e2 = eps * eps
    cdef double e3 = e2 * eps
    with nogil:
        for i in range(n):
            m = 0.5 * (a[i] + b[i])
            jj = b[i] - a[i]
            jj2 = jj * jj
            # near-coincident cross-piece pairs also take the Taylor branch
            # (secant cancellation error grows like eps_mach/|jump| there)
            if _piece(a[i]) == _piece(b[i]) or (jj if jj >= 0 else -jj) < 1e-5:
                h1m = _eval(1, m)
                h2m = _eval(2, m)
                h3m = _eval(3, m)
                h4m = _eval(4, m)
                h5m = _eval(5, m)
                rho[i] = (h1m + h3m * jj2 / 24.0 + h5m * jj2 * jj2 / 1920.0) / eps
                rho_d[i] = (0.5 * h2m + h3m * jj / 12.0 + h4m * jj2 / 48.0
                            + h5m * jj * jj2 / 480.0) / e2
                sig[i] = (h2m + jj2 * h4m / 24.0) / e2
                sig_d[i] = (0.5 * h3m + jj * h4m / 12.0 + jj2 * h5m / 48.0) / e3
            else:
                dh0 = _eval(0, b[i]) - _eval(0, a[i])
                dh1 = _eval(1, b[i]) - _eval(1, a[i])
                rho[i] = dh0 / (eps * jj)
                rho_d[i] = (_eval(1, b[i]) * jj - dh0) / (e2 * jj2)
                sig[i] = dh1 / (e2 * jj)
                sig_d[i] = (_eval(2, b[i]) * jj - dh1) / (e3 * jj2)
    return (rho.reshape(shape), rho_d.reshape(shape),
            sig.reshape(shape), sig_d.reshape(shape))
