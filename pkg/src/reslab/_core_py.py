"""Pure-numpy tape evaluator, the fallback backend.

Semantics must match reslab._core exactly: same formulas, same error codes,
same first-error-wins behaviour per batch element. Values written in jet
modes use the same arithmetic as value mode so that eval and eval_jet agree
bit for bit within a backend.
"""

import numpy as np

from ._ops import (
    ERR_KINK,
    ERR_NONFINITE,
    KINK_TOL,
    OP_ABS,
    OP_ADD,
    OP_ATAN,
    OP_ATAN2,
    OP_CONST,
    OP_COS,
    OP_DIV,
    OP_DOT,
    OP_EXP,
    OP_LOG,
    OP_MUL,
    OP_NEG,
    OP_NORM,
    OP_POW,
    OP_POWC,
    OP_SIN,
    OP_SQRT,
    OP_SUB,
    OP_VAR,
)

_NAN = float("nan")


def _flag(err, ok_mask):
    bad = (err == 0) & ~ok_mask
    err[bad] = ERR_NONFINITE


def _kink(err, near_kink):
    hit = (err == 0) & near_kink
    err[hit] = ERR_KINK


def _outer(a, b):
    return a[:, :, None] * b[:, None, :]


def tape_values(ops, ia, ib, cs, X, out_v, err):
    B = X.shape[0]
    n = len(ops)
    reg = np.empty((n, B))
    with np.errstate(all="ignore"):
        for k in range(n):
            op = ops[k]
            if op == OP_CONST:
                reg[k] = cs[k]
            elif op == OP_VAR:
                reg[k] = X[:, ia[k]]
            elif op == OP_ADD:
                reg[k] = reg[ia[k]] + reg[ib[k]]
            elif op == OP_SUB:
                reg[k] = reg[ia[k]] - reg[ib[k]]
            elif op == OP_MUL:
                reg[k] = reg[ia[k]] * reg[ib[k]]
            elif op == OP_DIV:
                reg[k] = reg[ia[k]] / reg[ib[k]]
            elif op == OP_NEG:
                reg[k] = -reg[ia[k]]
            elif op == OP_POW:
                reg[k] = np.power(reg[ia[k]], reg[ib[k]])
            elif op == OP_POWC:
                reg[k] = np.power(reg[ia[k]], cs[k])
            elif op == OP_SQRT:
                reg[k] = np.sqrt(reg[ia[k]])
            elif op == OP_EXP:
                reg[k] = np.exp(reg[ia[k]])
            elif op == OP_LOG:
                reg[k] = np.log(reg[ia[k]])
            elif op == OP_SIN:
                reg[k] = np.sin(reg[ia[k]])
            elif op == OP_COS:
                reg[k] = np.cos(reg[ia[k]])
            elif op == OP_ATAN:
                reg[k] = np.arctan(reg[ia[k]])
            elif op == OP_ABS:
                reg[k] = np.abs(reg[ia[k]])
            elif op == OP_ATAN2:
                reg[k] = np.arctan2(reg[ia[k]], reg[ib[k]])
            elif op == OP_DOT:
                reg[k] = np.einsum("bi,bi->b", X, X)
            elif op == OP_NORM:
                reg[k] = np.sqrt(np.einsum("bi,bi->b", X, X))
            else:
                raise ValueError(f"bad opcode {op}")
            _flag(err, np.isfinite(reg[k]))
    out_v[:] = reg[n - 1]
    out_v[err != 0] = _NAN


def tape_jet1(ops, ia, ib, cs, X, out_v, out_g, err):
    _jet(ops, ia, ib, cs, X, out_v, out_g, None, err)


def tape_jet2(ops, ia, ib, cs, X, out_v, out_g, out_h, err):
    _jet(ops, ia, ib, cs, X, out_v, out_g, out_h, err)


def _jet(ops, ia, ib, cs, X, out_v, out_g, out_h, err):
    B, d = X.shape
    n = len(ops)
    second = out_h is not None
    rv = np.empty((n, B))
    rg = np.zeros((n, B, d))
    rh = np.zeros((n, B, d, d)) if second else None
    eye = np.eye(d)

    with np.errstate(all="ignore"):
        for k in range(n):
            op = ops[k]
            a = ia[k]
            b = ib[k]
            if op == OP_CONST:
                rv[k] = cs[k]
            elif op == OP_VAR:
                rv[k] = X[:, a]
                rg[k, :, a] = 1.0
            elif op == OP_ADD:
                rv[k] = rv[a] + rv[b]
                rg[k] = rg[a] + rg[b]
                if second:
                    rh[k] = rh[a] + rh[b]
            elif op == OP_SUB:
                rv[k] = rv[a] - rv[b]
                rg[k] = rg[a] - rg[b]
                if second:
                    rh[k] = rh[a] - rh[b]
            elif op == OP_NEG:
                rv[k] = -rv[a]
                rg[k] = -rg[a]
                if second:
                    rh[k] = -rh[a]
            elif op == OP_MUL:
                rv[k] = rv[a] * rv[b]
                rg[k] = rg[a] * rv[b][:, None] + rg[b] * rv[a][:, None]
                if second:
                    rh[k] = (
                        rh[a] * rv[b][:, None, None]
                        + rh[b] * rv[a][:, None, None]
                        + _outer(rg[a], rg[b])
                        + _outer(rg[b], rg[a])
                    )
            elif op == OP_DIV:
                rv[k] = rv[a] / rv[b]
                inv = 1.0 / rv[b]
                rg[k] = (rg[a] - rv[k][:, None] * rg[b]) * inv[:, None]
                if second:
                    rh[k] = (
                        rh[a]
                        - _outer(rg[k], rg[b])
                        - _outer(rg[b], rg[k])
                        - rh[b] * rv[k][:, None, None]
                    ) * inv[:, None, None]
            elif op == OP_POW:
                rv[k] = np.power(rv[a], rv[b])
                la = np.log(rv[a])
                fa = rv[b] * np.power(rv[a], rv[b] - 1.0)
                fb = rv[k] * la
                rg[k] = fa[:, None] * rg[a] + fb[:, None] * rg[b]
                if second:
                    faa = rv[b] * (rv[b] - 1.0) * np.power(rv[a], rv[b] - 2.0)
                    fab = np.power(rv[a], rv[b] - 1.0) * (1.0 + rv[b] * la)
                    fbb = rv[k] * la * la
                    rh[k] = (
                        fa[:, None, None] * rh[a]
                        + fb[:, None, None] * rh[b]
                        + faa[:, None, None] * _outer(rg[a], rg[a])
                        + fab[:, None, None] * (_outer(rg[a], rg[b]) + _outer(rg[b], rg[a]))
                        + fbb[:, None, None] * _outer(rg[b], rg[b])
                    )
            elif op == OP_POWC:
                p = cs[k]
                rv[k] = np.power(rv[a], p)
                if p == 0.0:
                    rg[k] = 0.0
                    if second:
                        rh[k] = 0.0
                elif p == 1.0:
                    rg[k] = rg[a]
                    if second:
                        rh[k] = rh[a]
                else:
                    f1 = p * np.power(rv[a], p - 1.0)
                    rg[k] = f1[:, None] * rg[a]
                    if second:
                        c2 = p * (p - 1.0)
                        f2 = c2 * np.power(rv[a], p - 2.0)
                        rh[k] = f1[:, None, None] * rh[a] + f2[:, None, None] * _outer(
                            rg[a], rg[a]
                        )
            elif op == OP_SQRT:
                rv[k] = np.sqrt(rv[a])
                f1 = 0.5 / rv[k]
                rg[k] = f1[:, None] * rg[a]
                if second:
                    f2 = -0.25 / (rv[k] * rv[a])
                    rh[k] = f1[:, None, None] * rh[a] + f2[:, None, None] * _outer(rg[a], rg[a])
            elif op == OP_EXP:
                rv[k] = np.exp(rv[a])
                rg[k] = rv[k][:, None] * rg[a]
                if second:
                    rh[k] = rv[k][:, None, None] * (rh[a] + _outer(rg[a], rg[a]))
            elif op == OP_LOG:
                rv[k] = np.log(rv[a])
                f1 = 1.0 / rv[a]
                rg[k] = f1[:, None] * rg[a]
                if second:
                    f2 = -f1 * f1
                    rh[k] = f1[:, None, None] * rh[a] + f2[:, None, None] * _outer(rg[a], rg[a])
            elif op == OP_SIN:
                rv[k] = np.sin(rv[a])
                f1 = np.cos(rv[a])
                rg[k] = f1[:, None] * rg[a]
                if second:
                    rh[k] = f1[:, None, None] * rh[a] - rv[k][:, None, None] * _outer(
                        rg[a], rg[a]
                    )
            elif op == OP_COS:
                rv[k] = np.cos(rv[a])
                f1 = -np.sin(rv[a])
                rg[k] = f1[:, None] * rg[a]
                if second:
                    rh[k] = f1[:, None, None] * rh[a] - rv[k][:, None, None] * _outer(
                        rg[a], rg[a]
                    )
            elif op == OP_ATAN:
                rv[k] = np.arctan(rv[a])
                f1 = 1.0 / (1.0 + rv[a] * rv[a])
                rg[k] = f1[:, None] * rg[a]
                if second:
                    f2 = -2.0 * rv[a] * f1 * f1
                    rh[k] = f1[:, None, None] * rh[a] + f2[:, None, None] * _outer(rg[a], rg[a])
            elif op == OP_ABS:
                _kink(err, np.abs(rv[a]) <= KINK_TOL)
                rv[k] = np.abs(rv[a])
                s = np.sign(rv[a])
                rg[k] = s[:, None] * rg[a]
                if second:
                    rh[k] = s[:, None, None] * rh[a]
            elif op == OP_ATAN2:
                rv[k] = np.arctan2(rv[a], rv[b])
                r2 = rv[a] * rv[a] + rv[b] * rv[b]
                fy = rv[b] / r2
                fx = -rv[a] / r2
                rg[k] = fy[:, None] * rg[a] + fx[:, None] * rg[b]
                if second:
                    r4 = r2 * r2
                    fyy = -2.0 * rv[a] * rv[b] / r4
                    fyx = (rv[a] * rv[a] - rv[b] * rv[b]) / r4
                    rh[k] = (
                        fy[:, None, None] * rh[a]
                        + fx[:, None, None] * rh[b]
                        + fyy[:, None, None] * _outer(rg[a], rg[a])
                        + fyx[:, None, None] * (_outer(rg[a], rg[b]) + _outer(rg[b], rg[a]))
                        - fyy[:, None, None] * _outer(rg[b], rg[b])
                    )
            elif op == OP_DOT:
                rv[k] = np.einsum("bi,bi->b", X, X)
                rg[k] = 2.0 * X
                if second:
                    rh[k] = 2.0 * eye
            elif op == OP_NORM:
                rv[k] = np.sqrt(np.einsum("bi,bi->b", X, X))
                _kink(err, rv[k] <= KINK_TOL)
                inv = 1.0 / rv[k]
                rg[k] = X * inv[:, None]
                if second:
                    xh = X * inv[:, None]
                    rh[k] = (eye[None, :, :] - _outer(xh, xh)) * inv[:, None, None]
            else:
                raise ValueError(f"bad opcode {op}")

            ok = np.isfinite(rv[k]) & np.isfinite(rg[k]).all(axis=1)
            if second:
                ok &= np.isfinite(rh[k]).all(axis=(1, 2))
            _flag(err, ok)

    last = n - 1
    out_v[:] = rv[last]
    out_g[:] = rg[last]
    if second:
        out_h[:] = rh[last]
    bad = err != 0
    if bad.any():
        out_v[bad] = _NAN
        out_g[bad] = _NAN
        if second:
            out_h[bad] = _NAN
