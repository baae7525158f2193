# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled weight-solver kernels; mirrors `pearl._solver_py` exactly.

Loss codes: 0 squared error, 1 cross-entropy on true-class probability
columns, 2 hinge on label-premultiplied margins.
"""

from libc.math cimport fabs, log
from libc.stdlib cimport qsort

import numpy as np

PROB_EPS = 1e-12
STEP_FLOOR = 1e-20

# Objective decreases below PROGRESS_EPS * (1 + |f|) are indistinguishable
# from float64 rounding; PROGRESS_PATIENCE such steps in a row mean the
# line search has hit the numerical floor and cannot certify further descent.
PROGRESS_EPS = 1e-16
PROGRESS_PATIENCE = 10

FLAG_OK = 0
FLAG_MAX_ITER = 1
FLAG_STALLED = 2


cdef int _cmp_desc(const void* pa, const void* pb) noexcept nogil:
    cdef double a = (<const double*> pa)[0]
    cdef double b = (<const double*> pb)[0]
    if a < b:
        return 1
    if a > b:
        return -1
    return 0


cdef void _project(const double[::1] v, double[::1] buf, double[::1] out) noexcept:
    cdef Py_ssize_t J = v.shape[0]
    cdef Py_ssize_t i, rho = 0
    cdef double css = 0.0, css_rho = 0.0, theta
    for i in range(J):
        buf[i] = v[i]
    qsort(&buf[0], <size_t> J, sizeof(double), _cmp_desc)
    for i in range(J):
        css += buf[i]
        if buf[i] - (css - 1.0) / (i + 1.0) > 0.0:
            rho = i
            css_rho = css
    theta = (css_rho - 1.0) / (rho + 1.0)
    for i in range(J):
        out[i] = v[i] - theta
        if out[i] < 0.0:
            out[i] = 0.0


cdef double _objective_c(int kind, const double[:, ::1] P, const double[::1] y, const double[::1] w) noexcept:
    cdef Py_ssize_t n = P.shape[0], J = P.shape[1]
    cdef Py_ssize_t i, j
    cdef double f = 0.0, t, s, p
    for i in range(n):
        t = 0.0
        for j in range(J):
            t += P[i, j] * w[j]
        if kind == 0:
            s = t - y[i]
            f += s * s
        elif kind == 1:
            p = t
            if p < 1e-12:
                p = 1e-12
            elif p > 1.0:
                p = 1.0
            f -= log(p)
        else:
            s = 1.0 - t
            if s > 0.0:
                f += s
    return f / n


cdef double _objective_gradient_c(int kind, const double[:, ::1] P, const double[::1] y,
                                  const double[::1] w, double[::1] g) noexcept:
    cdef Py_ssize_t n = P.shape[0], J = P.shape[1]
    cdef Py_ssize_t i, j
    cdef double f = 0.0, t, s, p, c
    for j in range(J):
        g[j] = 0.0
    for i in range(n):
        t = 0.0
        for j in range(J):
            t += P[i, j] * w[j]
        if kind == 0:
            s = t - y[i]
            f += s * s
            c = 2.0 * s / n
        elif kind == 1:
            p = t
            if p < 1e-12:
                p = 1e-12
            elif p > 1.0:
                p = 1.0
            f -= log(p)
            c = -1.0 / (n * p) if t > 1e-12 else 0.0
        else:
            s = 1.0 - t
            c = 0.0
            if s > 0.0:
                f += s
                c = -1.0 / n
        if c != 0.0:
            for j in range(J):
                g[j] += c * P[i, j]
    return f / n


def project_to_simplex(v):
    """Euclidean projection onto {w >= 0, sum w = 1} by sorted thresholding."""
    va = np.ascontiguousarray(v, dtype=np.float64)
    out = np.empty_like(va)
    buf = np.empty_like(va)
    _project(va, buf, out)
    return out


def objective(int kind, P, y, w):
    if kind not in (0, 1, 2):
        raise ValueError(f"unknown loss code {kind}")
    cdef const double[:, ::1] Pm = np.ascontiguousarray(P, dtype=np.float64)
    cdef const double[::1] ym = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[::1] wm = np.ascontiguousarray(w, dtype=np.float64)
    return _objective_c(kind, Pm, ym, wm)


def solve(int kind, P, y, w0=None, int max_iter=10000, double tol=1e-9,
          double armijo_c=1e-4, double shrink=0.5):
    """Projected gradient descent over the simplex; see the pure backend."""
    if kind not in (0, 1, 2):
        raise ValueError(f"unknown loss code {kind}")
    Pa = np.ascontiguousarray(P, dtype=np.float64)
    ya = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[:, ::1] Pm = Pa
    cdef const double[::1] ym = ya
    cdef Py_ssize_t n = Pm.shape[0], J = Pm.shape[1]
    cdef Py_ssize_t i
    if J == 1:
        wa = np.ones(1)
        return wa, _objective_c(kind, Pm, ym, wa), 0, 0.0, FLAG_OK
    if w0 is None:
        wa = np.full(J, 1.0 / J)
    else:
        wa = project_to_simplex(np.asarray(w0, dtype=np.float64))
    ga = np.empty(J)
    wbar_a = np.empty(J)
    wnew_a = np.empty(J)
    tmp_a = np.empty(J)
    buf_a = np.empty(J)
    cdef double[::1] w = wa
    cdef double[::1] g = ga
    cdef double[::1] wbar = wbar_a
    cdef double[::1] wnew = wnew_a
    cdef double[::1] tmp = tmp_a
    cdef double[::1] buf = buf_a
    cdef double f, f_new, kkt, step, gd, a, decrease
    cdef int iters = 0
    cdef int flag = FLAG_OK
    cdef int no_progress = 0
    cdef bint stalled = False
    f = _objective_gradient_c(kind, Pm, ym, w, g)
    while iters < max_iter:
        for i in range(J):
            tmp[i] = w[i] - g[i]
        _project(tmp, buf, wbar)
        kkt = 0.0
        for i in range(J):
            a = fabs(w[i] - wbar[i])
            if a > kkt:
                kkt = a
        if kkt < tol:
            return wa, f, iters, kkt, FLAG_OK
        step = 1.0
        for i in range(J):
            wnew[i] = wbar[i]
        while True:
            gd = 0.0
            for i in range(J):
                gd += g[i] * (wnew[i] - w[i])
            f_new = _objective_c(kind, Pm, ym, wnew)
            if f_new <= f + armijo_c * gd:
                break
            step *= shrink
            if step < STEP_FLOOR:
                stalled = True
                break
            for i in range(J):
                tmp[i] = w[i] - step * g[i]
            _project(tmp, buf, wnew)
        if stalled:
            break
        decrease = f - f_new
        for i in range(J):
            w[i] = wnew[i]
        f = _objective_gradient_c(kind, Pm, ym, w, g)
        iters += 1
        if decrease <= PROGRESS_EPS * (1.0 + fabs(f)):
            no_progress += 1
            if no_progress >= PROGRESS_PATIENCE:
                stalled = True
                break
        else:
            no_progress = 0
    for i in range(J):
        tmp[i] = w[i] - g[i]
    _project(tmp, buf, wbar)
    kkt = 0.0
    for i in range(J):
        a = fabs(w[i] - wbar[i])
        if a > kkt:
            kkt = a
    if kkt < tol:
        flag = FLAG_OK
    elif stalled:
        flag = FLAG_STALLED
    else:
        flag = FLAG_MAX_ITER
    return wa, f, iters, kkt, flag
