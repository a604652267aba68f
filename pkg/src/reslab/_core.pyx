# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled tape evaluator.

Mirror of reslab._core_py: same opcode numbers, same formulas, same error
codes. Points are processed one at a time in tight scalar loops with the
GIL released; per-call register scratch keeps concurrent calls safe.
"""

import numpy as np

from libc.math cimport (
    NAN,
    atan,
    atan2,
    cos,
    exp,
    fabs,
    isfinite,
    log,
    pow,
    sin,
    sqrt,
)

cdef enum:
    OP_CONST = 0
    OP_VAR = 1
    OP_ADD = 2
    OP_SUB = 3
    OP_MUL = 4
    OP_DIV = 5
    OP_NEG = 6
    OP_POW = 7
    OP_POWC = 8
    OP_SQRT = 9
    OP_EXP = 10
    OP_LOG = 11
    OP_SIN = 12
    OP_COS = 13
    OP_ATAN = 14
    OP_ABS = 15
    OP_ATAN2 = 16
    OP_DOT = 17
    OP_NORM = 18

cdef enum:
    ERR_NONFINITE = 1
    ERR_KINK = 2

cdef double KINK_TOL = 1e-12

# Checked against reslab._ops by the backend tests.
OPCODE_TABLE = {
    "OP_CONST": OP_CONST,
    "OP_VAR": OP_VAR,
    "OP_ADD": OP_ADD,
    "OP_SUB": OP_SUB,
    "OP_MUL": OP_MUL,
    "OP_DIV": OP_DIV,
    "OP_NEG": OP_NEG,
    "OP_POW": OP_POW,
    "OP_POWC": OP_POWC,
    "OP_SQRT": OP_SQRT,
    "OP_EXP": OP_EXP,
    "OP_LOG": OP_LOG,
    "OP_SIN": OP_SIN,
    "OP_COS": OP_COS,
    "OP_ATAN": OP_ATAN,
    "OP_ABS": OP_ABS,
    "OP_ATAN2": OP_ATAN2,
    "OP_DOT": OP_DOT,
    "OP_NORM": OP_NORM,
    "ERR_NONFINITE": ERR_NONFINITE,
    "ERR_KINK": ERR_KINK,
    "KINK_TOL": KINK_TOL,
}


def _check_ops(int[::1] ops):
    cdef Py_ssize_t k
    for k in range(ops.shape[0]):
        if ops[k] < OP_CONST or ops[k] > OP_NORM:
            raise ValueError(f"bad opcode {ops[k]}")


def tape_values(int[::1] ops, int[::1] ia, int[::1] ib, double[::1] cs,
                double[:, ::1] X, double[::1] out_v, int[::1] err):
    _check_ops(ops)
    cdef Py_ssize_t n = ops.shape[0]
    cdef Py_ssize_t B = X.shape[0]
    cdef Py_ssize_t d = X.shape[1]
    rv_arr = np.empty(n)
    cdef double[::1] rv = rv_arr
    cdef Py_ssize_t bpt, k, i
    cdef int op, a, b, bad
    cdef double va, vb, acc

    with nogil:
        for bpt in range(B):
            bad = 0
            for k in range(n):
                op = ops[k]
                a = ia[k]
                b = ib[k]
                if op == OP_CONST:
                    rv[k] = cs[k]
                elif op == OP_VAR:
                    rv[k] = X[bpt, a]
                elif op == OP_ADD:
                    rv[k] = rv[a] + rv[b]
                elif op == OP_SUB:
                    rv[k] = rv[a] - rv[b]
                elif op == OP_MUL:
                    rv[k] = rv[a] * rv[b]
                elif op == OP_DIV:
                    rv[k] = rv[a] / rv[b]
                elif op == OP_NEG:
                    rv[k] = -rv[a]
                elif op == OP_POW:
                    rv[k] = pow(rv[a], rv[b])
                elif op == OP_POWC:
                    rv[k] = pow(rv[a], cs[k])
                elif op == OP_SQRT:
                    rv[k] = sqrt(rv[a])
                elif op == OP_EXP:
                    rv[k] = exp(rv[a])
                elif op == OP_LOG:
                    rv[k] = log(rv[a])
                elif op == OP_SIN:
                    rv[k] = sin(rv[a])
                elif op == OP_COS:
                    rv[k] = cos(rv[a])
                elif op == OP_ATAN:
                    rv[k] = atan(rv[a])
                elif op == OP_ABS:
                    rv[k] = fabs(rv[a])
                elif op == OP_ATAN2:
                    rv[k] = atan2(rv[a], rv[b])
                elif op == OP_DOT:
                    acc = 0.0
                    for i in range(d):
                        acc += X[bpt, i] * X[bpt, i]
                    rv[k] = acc
                else:  # OP_NORM
                    acc = 0.0
                    for i in range(d):
                        acc += X[bpt, i] * X[bpt, i]
                    rv[k] = sqrt(acc)
                if not isfinite(rv[k]):
                    err[bpt] = ERR_NONFINITE
                    bad = 1
                    break
            if bad:
                out_v[bpt] = NAN
            else:
                out_v[bpt] = rv[n - 1]


def tape_jet1(int[::1] ops, int[::1] ia, int[::1] ib, double[::1] cs,
              double[:, ::1] X, double[::1] out_v, double[:, ::1] out_g,
              int[::1] err):
    dummy_h = np.empty((1, 1, 1))
    dummy_rh = np.empty((1, 1, 1))
    _jet_run(ops, ia, ib, cs, X, out_v, out_g, dummy_h, err, 0, dummy_rh)


def tape_jet2(int[::1] ops, int[::1] ia, int[::1] ib, double[::1] cs,
              double[:, ::1] X, double[::1] out_v, double[:, ::1] out_g,
              double[:, :, ::1] out_h, int[::1] err):
    cdef Py_ssize_t n = ops.shape[0]
    cdef Py_ssize_t d = X.shape[1]
    rh_arr = np.empty((n, d, d))
    _jet_run(ops, ia, ib, cs, X, out_v, out_g, out_h, err, 1, rh_arr)


def _jet_run(int[::1] ops, int[::1] ia, int[::1] ib, double[::1] cs,
             double[:, ::1] X, double[::1] out_v, double[:, ::1] out_g,
             double[:, :, ::1] out_h, int[::1] err, int second,
             double[:, :, ::1] rh):
    _check_ops(ops)
    cdef Py_ssize_t n = ops.shape[0]
    cdef Py_ssize_t B = X.shape[0]
    cdef Py_ssize_t d = X.shape[1]
    rv_arr = np.empty(n)
    rg_arr = np.empty((n, d))
    cdef double[::1] rv = rv_arr
    cdef double[:, ::1] rg = rg_arr
    cdef Py_ssize_t bpt, k, i, j
    cdef int op, a, b, bad, ok
    cdef double va, vb, f, f1, f2, la, fa, fb, faa, fab, fbb
    cdef double inv, r2, r4, s, p, acc, fy, fx, fyy, fyx, gki

    with nogil:
        for bpt in range(B):
            bad = 0
            for k in range(n):
                op = ops[k]
                a = ia[k]
                b = ib[k]
                if op == OP_CONST:
                    rv[k] = cs[k]
                    for i in range(d):
                        rg[k, i] = 0.0
                    if second:
                        for i in range(d):
                            for j in range(d):
                                rh[k, i, j] = 0.0
                elif op == OP_VAR:
                    rv[k] = X[bpt, a]
                    for i in range(d):
                        rg[k, i] = 0.0
                    rg[k, a] = 1.0
                    if second:
                        for i in range(d):
                            for j in range(d):
                                rh[k, i, j] = 0.0
                elif op == OP_ADD:
                    rv[k] = rv[a] + rv[b]
                    for i in range(d):
                        rg[k, i] = rg[a, i] + rg[b, i]
                    if second:
                        for i in range(d):
                            for j in range(d):
                                rh[k, i, j] = rh[a, i, j] + rh[b, i, j]
                elif op == OP_SUB:
                    rv[k] = rv[a] - rv[b]
                    for i in range(d):
                        rg[k, i] = rg[a, i] - rg[b, i]
                    if second:
                        for i in range(d):
                            for j in range(d):
                                rh[k, i, j] = rh[a, i, j] - rh[b, i, j]
                elif op == OP_NEG:
                    rv[k] = -rv[a]
                    for i in range(d):
                        rg[k, i] = -rg[a, i]
                    if second:
                        for i in range(d):
                            for j in range(d):
                                rh[k, i, j] = -rh[a, i, j]
                elif op == OP_MUL:
                    va = rv[a]
                    vb = rv[b]
                    rv[k] = va * vb
                    for i in range(d):
                        rg[k, i] = rg[a, i] * vb + rg[b, i] * va
                    if second:
                        for i in range(d):
                            for j in range(d):
                                rh[k, i, j] = (rh[a, i, j] * vb + rh[b, i, j] * va
                                               + rg[a, i] * rg[b, j]
                                               + rg[b, i] * rg[a, j])
                elif op == OP_DIV:
                    va = rv[a]
                    vb = rv[b]
                    f = va / vb
                    rv[k] = f
                    inv = 1.0 / vb
                    for i in range(d):
                        rg[k, i] = (rg[a, i] - f * rg[b, i]) * inv
                    if second:
                        for i in range(d):
                            for j in range(d):
                                rh[k, i, j] = (rh[a, i, j]
                                               - rg[k, i] * rg[b, j]
                                               - rg[b, i] * rg[k, j]
                                               - f * rh[b, i, j]) * inv
                elif op == OP_POW:
                    va = rv[a]
                    vb = rv[b]
                    f = pow(va, vb)
                    rv[k] = f
                    la = log(va)
                    fa = vb * pow(va, vb - 1.0)
                    fb = f * la
                    for i in range(d):
                        rg[k, i] = fa * rg[a, i] + fb * rg[b, i]
                    if second:
                        faa = vb * (vb - 1.0) * pow(va, vb - 2.0)
                        fab = pow(va, vb - 1.0) * (1.0 + vb * la)
                        fbb = f * la * la
                        for i in range(d):
                            for j in range(d):
                                rh[k, i, j] = (fa * rh[a, i, j] + fb * rh[b, i, j]
                                               + faa * rg[a, i] * rg[a, j]
                                               + fab * (rg[a, i] * rg[b, j]
                                                        + rg[b, i] * rg[a, j])
                                               + fbb * rg[b, i] * rg[b, j])
                elif op == OP_POWC:
                    va = rv[a]
                    p = cs[k]
                    rv[k] = pow(va, p)
                    if p == 0.0:
                        for i in range(d):
                            rg[k, i] = 0.0
                        if second:
                            for i in range(d):
                                for j in range(d):
                                    rh[k, i, j] = 0.0
                    elif p == 1.0:
                        for i in range(d):
                            rg[k, i] = rg[a, i]
                        if second:
                            for i in range(d):
                                for j in range(d):
                                    rh[k, i, j] = rh[a, i, j]
                    else:
                        f1 = p * pow(va, p - 1.0)
                        for i in range(d):
                            rg[k, i] = f1 * rg[a, i]
                        if second:
                            f2 = p * (p - 1.0) * pow(va, p - 2.0)
                            for i in range(d):
                                for j in range(d):
                                    rh[k, i, j] = (f1 * rh[a, i, j]
                                                   + f2 * rg[a, i] * rg[a, j])
                elif op == OP_SQRT:
                    va = rv[a]
                    f = sqrt(va)
                    rv[k] = f
                    f1 = 0.5 / f
                    for i in range(d):
                        rg[k, i] = f1 * rg[a, i]
                    if second:
                        f2 = -0.25 / (f * va)
                        for i in range(d):
                            for j in range(d):
                                rh[k, i, j] = f1 * rh[a, i, j] + f2 * rg[a, i] * rg[a, j]
                elif op == OP_EXP:
                    f = exp(rv[a])
                    rv[k] = f
                    for i in range(d):
                        rg[k, i] = f * rg[a, i]
                    if second:
                        for i in range(d):
                            for j in range(d):
                                rh[k, i, j] = f * (rh[a, i, j] + rg[a, i] * rg[a, j])
                elif op == OP_LOG:
                    va = rv[a]
                    rv[k] = log(va)
                    f1 = 1.0 / va
                    for i in range(d):
                        rg[k, i] = f1 * rg[a, i]
                    if second:
                        f2 = -f1 * f1
                        for i in range(d):
                            for j in range(d):
                                rh[k, i, j] = f1 * rh[a, i, j] + f2 * rg[a, i] * rg[a, j]
                elif op == OP_SIN:
                    va = rv[a]
                    rv[k] = sin(va)
                    f1 = cos(va)
                    for i in range(d):
                        rg[k, i] = f1 * rg[a, i]
                    if second:
                        for i in range(d):
                            for j in range(d):
                                rh[k, i, j] = (f1 * rh[a, i, j]
                                               - rv[k] * rg[a, i] * rg[a, j])
                elif op == OP_COS:
                    va = rv[a]
                    rv[k] = cos(va)
                    f1 = -sin(va)
                    for i in range(d):
                        rg[k, i] = f1 * rg[a, i]
                    if second:
                        for i in range(d):
                            for j in range(d):
                                rh[k, i, j] = (f1 * rh[a, i, j]
                                               - rv[k] * rg[a, i] * rg[a, j])
                elif op == OP_ATAN:
                    va = rv[a]
                    rv[k] = atan(va)
                    f1 = 1.0 / (1.0 + va * va)
                    for i in range(d):
                        rg[k, i] = f1 * rg[a, i]
                    if second:
                        f2 = -2.0 * va * f1 * f1
                        for i in range(d):
                            for j in range(d):
                                rh[k, i, j] = f1 * rh[a, i, j] + f2 * rg[a, i] * rg[a, j]
                elif op == OP_ABS:
                    va = rv[a]
                    if fabs(va) <= KINK_TOL:
                        err[bpt] = ERR_KINK
                        bad = 1
                        break
                    rv[k] = fabs(va)
                    s = 1.0 if va > 0.0 else -1.0
                    for i in range(d):
                        rg[k, i] = s * rg[a, i]
                    if second:
                        for i in range(d):
                            for j in range(d):
                                rh[k, i, j] = s * rh[a, i, j]
                elif op == OP_ATAN2:
                    va = rv[a]
                    vb = rv[b]
                    rv[k] = atan2(va, vb)
                    r2 = va * va + vb * vb
                    fy = vb / r2
                    fx = -va / r2
                    for i in range(d):
                        rg[k, i] = fy * rg[a, i] + fx * rg[b, i]
                    if second:
                        r4 = r2 * r2
                        fyy = -2.0 * va * vb / r4
                        fyx = (va * va - vb * vb) / r4
                        for i in range(d):
                            for j in range(d):
                                rh[k, i, j] = (fy * rh[a, i, j] + fx * rh[b, i, j]
                                               + fyy * rg[a, i] * rg[a, j]
                                               + fyx * (rg[a, i] * rg[b, j]
                                                        + rg[b, i] * rg[a, j])
                                               - fyy * rg[b, i] * rg[b, j])
                elif op == OP_DOT:
                    acc = 0.0
                    for i in range(d):
                        acc += X[bpt, i] * X[bpt, i]
                    rv[k] = acc
                    for i in range(d):
                        rg[k, i] = 2.0 * X[bpt, i]
                    if second:
                        for i in range(d):
                            for j in range(d):
                                rh[k, i, j] = 2.0 if i == j else 0.0
                else:  # OP_NORM
                    acc = 0.0
                    for i in range(d):
                        acc += X[bpt, i] * X[bpt, i]
                    f = sqrt(acc)
                    if f <= KINK_TOL:
                        err[bpt] = ERR_KINK
                        bad = 1
                        break
                    rv[k] = f
                    inv = 1.0 / f
                    for i in range(d):
                        rg[k, i] = X[bpt, i] * inv
                    if second:
                        for i in range(d):
                            for j in range(d):
                                rh[k, i, j] = ((1.0 if i == j else 0.0)
                                               - rg[k, i] * rg[k, j]) * inv

                ok = 1
                if not isfinite(rv[k]):
                    ok = 0
                if ok:
                    for i in range(d):
                        if not isfinite(rg[k, i]):
                            ok = 0
                            break
                if ok and second:
                    for i in range(d):
                        for j in range(d):
                            if not isfinite(rh[k, i, j]):
                                ok = 0
                                break
                        if not ok:
                            break
                if not ok:
                    err[bpt] = ERR_NONFINITE
                    bad = 1
                    break

            if bad:
                out_v[bpt] = NAN
                for i in range(d):
                    out_g[bpt, i] = NAN
                if second:
                    for i in range(d):
                        for j in range(d):
                            out_h[bpt, i, j] = NAN
            else:
                out_v[bpt] = rv[n - 1]
                for i in range(d):
                    out_g[bpt, i] = rg[n - 1, i]
                if second:
                    for i in range(d):
                        for j in range(d):
                            out_h[bpt, i, j] = rh[n - 1, i, j]
