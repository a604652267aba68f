"""Collisional-invariant verification and recovery.

A function g is a four-wave collisional invariant when g(v') + g(v*') =
g(v) + g(v*) on the resonant set, a three-wave one when g(v'+v'') = g(v') +
g(v''). Both are checked directly on sampled manifold points. The weak
route recovers the coefficients of grad g = b + c grad omega from annulus
quadrature alone: a 3x3 Gram system in the weighted span of {1, d_i omega,
d_j omega} is assembled from a smooth cutoff beta, solved against a family
of test functions alpha, and the two gradient components of g are read off
as coefficient triples (c4, c5, c6) and (c7, c8, c9). For an invariant
c6 = c8 = 0 and c5 = c9 = c.

Each recovered quantity ships with a defect or residual that measures how
badly the underlying identity failed, so a non-invariant is reported as
such instead of producing garbage coefficients silently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import exprlang
from .dispersion import (
    DEFAULT_R_MAX,
    DEFAULT_R_MIN,
    LAMBDA_THRESHOLD,
    SamplingDomain,
    independence_margin,
    polar_grid,
)
from .resonance import ChartError, sample_pairs, sample_quadruples

PASS_RMS = 1e-8
FAIL_RMS = 1e-2
_EPS = 1e-30
_PROJ_TOL = 1e-12
_MAX_PROJ_ITER = 50


class DegeneracyError(ValueError):
    """The law is too degenerate for the requested reconstruction (singular
    Gram system, rank-deficient design matrix, all-null quadratic rows)."""


# ----------------------------------------------------------------- helpers


def _values(g, X):
    """Values of a candidate invariant on points X; g is an Expr or a
    callable acting on (n, d) arrays."""
    X = np.ascontiguousarray(X, dtype=float)
    if isinstance(g, exprlang.Expr):
        vals, err = exprlang.values_batch(g, X)
        if err.any():
            raise exprlang.EvaluationError(
                f"candidate invariant not evaluable at {int(err.sum())} points"
            )
        return vals
    return np.asarray(g(X), dtype=float)


def _jet1(g, X):
    X = np.ascontiguousarray(X, dtype=float)
    vals, grad, err = exprlang.jet1_batch(g, X)
    if err.any():
        raise exprlang.EvaluationError(
            f"candidate invariant not differentiable at {int(err.sum())} points"
        )
    return vals, grad


def _verdict(rms, mx):
    if rms <= PASS_RMS:
        return "pass"
    if rms >= FAIL_RMS:
        return "fail"
    return "inconclusive"


@dataclass(frozen=True)
class ResidualReport:
    rms: float
    max: float
    verdict: str
    n_samples: int
    vacuous: bool = False

    def to_dict(self):
        return {
            "rms": self.rms,
            "max": self.max,
            "verdict": self.verdict,
            "n_samples": self.n_samples,
            "vacuous": self.vacuous,
        }


def _weighted_report(delta, scale, weights):
    n = delta.shape[0]
    if n == 0:
        # An empty sample set (trivial manifold) satisfies the invariance
        # identity vacuously.
        return ResidualReport(rms=0.0, max=0.0, verdict="pass", n_samples=0,
                              vacuous=True)
    wsum = float(weights.sum())
    if wsum <= 0.0:
        weights = np.ones(n)
        wsum = float(n)
    num = math.sqrt(float(weights @ (delta * delta)) / wsum)
    den = math.sqrt(float(weights @ (scale * scale)) / wsum)
    rms = num / den
    mx = float(np.max(np.abs(delta) / scale))
    return ResidualReport(rms=rms, max=mx, verdict=_verdict(rms, mx), n_samples=n)


# ------------------------------------------------------- direct residuals


def four_wave_residual(g, quadruples):
    """Weighted relative residual of g(v') + g(v*') - g(v) - g(v*) over a
    QuadrupleSet."""
    if len(quadruples) == 0:
        return _weighted_report(np.zeros(0), np.zeros(0), np.zeros(0))
    gv = _values(g, quadruples.v)
    gvs = _values(g, quadruples.vstar)
    gvp = _values(g, quadruples.vp)
    gvps = _values(g, quadruples.vpstar)
    delta = gvp + gvps - gv - gvs
    scale = np.abs(gvp) + np.abs(gvps) + np.abs(gv) + np.abs(gvs) + _EPS
    return _weighted_report(delta, scale, quadruples.weight)


def three_wave_residual(g, triples):
    """Weighted relative residual of g(v'+v'') - g(v') - g(v'') over a
    TripleSet."""
    if len(triples) == 0:
        return _weighted_report(np.zeros(0), np.zeros(0), np.zeros(0))
    gs = _values(g, triples.vsum)
    gp = _values(g, triples.vp)
    gpp = _values(g, triples.vpp)
    delta = gs - gp - gpp
    scale = np.abs(gs) + np.abs(gp) + np.abs(gpp) + _EPS
    return _weighted_report(delta, scale, triples.weight)


def cross_product_residual(g, law, pairs):
    """Alignment of grad g(v) - grad g(v*) with grad omega(v) - grad
    omega(v*) over base pairs: for an invariant the two differences are
    parallel, so every (generalized) cross product vanishes."""
    V, VS = pairs
    n = V.shape[0]
    if n == 0:
        return _weighted_report(np.zeros(0), np.zeros(0), np.zeros(0))
    _, dg_v = _jet1(g, V)
    _, dg_vs = _jet1(g, VS)
    _, dw_v, e1 = law.jet1(V)
    _, dw_vs, e2 = law.jet1(VS)
    if e1.any() or e2.any():
        raise exprlang.EvaluationError("omega not differentiable at sampled pairs")
    u = dg_v - dg_vs
    w = dw_v - dw_vs
    if law.d == 2:
        cross = np.abs(u[:, 0] * w[:, 1] - u[:, 1] * w[:, 0])
    else:
        cross = np.linalg.norm(np.cross(u, w), axis=1)
    scale = np.linalg.norm(u, axis=1) * np.linalg.norm(w, axis=1) + _EPS
    return _weighted_report(cross, scale, np.ones(n))


# --------------------------------------------------- weighted Gram system


def _bump_string(domain):
    """C-infinity cutoff in the radius, identically 0 outside the open
    annulus: exp(1 - 1/(1 - t^2)) with t the affine map of [r_min, r_max]
    onto [-1, 1]. Only meant to be evaluated strictly inside the annulus
    (quadrature nodes are interior)."""
    s = repr(domain.r_min + domain.r_max)
    dlt = repr(domain.r_max - domain.r_min)
    return f"exp(1 - 1/(1 - ((2*norm(v) - {s}) / {dlt})^2))"


def default_beta(domain=None, d=2):
    """The radial cutoff weight used to assemble the Gram system."""
    if domain is None:
        domain = SamplingDomain()
    return exprlang.parse(_bump_string(domain), d)


def default_alpha_family(domain=None, d=2):
    """Test functions: the cutoff times low-order monomials. Six functions,
    enough to pin down two coefficient triples against the moment vectors."""
    if domain is None:
        domain = SamplingDomain()
    bump = _bump_string(domain)
    if d == 2:
        monos = ("1", "v1", "v2", "v1*v2", "v1^2", "v2^2")
    else:
        monos = ("1", "v1", "v2", "v3", "v1*v2", "v1^2")
    return [exprlang.parse(f"({bump}) * {m}", d) for m in monos]


@dataclass(frozen=True)
class CramerReport:
    c: np.ndarray  # (c4, c5, c6, c7, c8, c9)
    defects: dict
    identity_residual: float
    lambda_min: float
    i: int
    j: int
    n_quad: int

    def to_dict(self):
        names = ("c4", "c5", "c6", "c7", "c8", "c9")
        out = {k: float(x) for k, x in zip(names, self.c)}
        out["defects"] = {k: float(x) for k, x in self.defects.items()}
        out["identity_residual"] = self.identity_residual
        out["lambda_min"] = self.lambda_min
        out["i"] = self.i
        out["j"] = self.j
        out["n_quad"] = self.n_quad
        return out


def cramer_coefficients(law, g, domain=None, n_quad=4096, i=1, j=2):
    """Recover the gradient expansion of g against (i, j) from annulus
    quadrature only.

    Assembles M, the Gram matrix of {1, d_i omega, d_j omega} weighted by
    beta, and the matrix V whose rows test g against beta, beta d_i omega
    and beta d_j omega after integration by parts. S = M^-1 V then maps the
    moment vector m(alpha) = (int alpha, int alpha d_i omega, int alpha d_j
    omega) to the integrals u(alpha) built from grad alpha, for every test
    function at once. Row 3 of S is (c4, c5, c6) with d_i g = c4 + c5 d_i
    omega + c6 d_j omega; minus row 2 is (c7, c8, c9) for d_j g.

    identity_residual is the relative Frobenius mismatch between M u(alpha)
    computed directly from grad alpha and V m(alpha); it vanishes only when
    g actually is an invariant, and stays O(1) otherwise even when the
    coefficient defects happen to cancel by symmetry.
    """
    if domain is None:
        domain = SamplingDomain()
    d = law.d
    if not (1 <= i <= d and 1 <= j <= d) or i == j:
        raise ValueError(f"need distinct component indices in 1..{d}, got {i}, {j}")
    ii, jj = i - 1, j - 1
    grid = polar_grid(domain, d, n_quad)
    X, W = grid.nodes, grid.weights

    _, dw, Hw, err = law.jet2(X)
    if err.any():
        raise DegeneracyError("omega jets not available on the quadrature grid")
    wi, wj = dw[:, ii], dw[:, jj]
    gval = _values(g, X)

    beta = default_beta(domain, d)
    bval, bgrad, berr = exprlang.jet1_batch(beta, X)
    if berr.any():
        raise DegeneracyError("cutoff weight not evaluable on the grid")

    def integ(f):
        return float(W @ f)

    M = np.array(
        [
            [integ(bval), integ(bval * wi), integ(bval * wj)],
            [integ(bval * wi), integ(bval * wi * wi), integ(bval * wi * wj)],
            [integ(bval * wj), integ(bval * wi * wj), integ(bval * wj * wj)],
        ]
    )
    lam = independence_margin(law, i, j, domain, n_quad)

    # Rows of V: beta-tilde runs over beta, beta d_i omega, beta d_j omega;
    # the derivative of each combines the cutoff gradient with the omega
    # Hessian.
    db = [bgrad[:, ii], bgrad[:, jj]]
    d_bwi = [
        bgrad[:, ii] * wi + bval * Hw[:, ii, ii],
        bgrad[:, jj] * wi + bval * Hw[:, ii, jj],
    ]
    d_bwj = [
        bgrad[:, ii] * wj + bval * Hw[:, jj, ii],
        bgrad[:, jj] * wj + bval * Hw[:, jj, jj],
    ]
    V = np.empty((3, 3))
    for r, grad_bt in enumerate((db, d_bwi, d_bwj)):
        di_bt, dj_bt = grad_bt
        V[r, 0] = -integ(gval * (di_bt * wj - dj_bt * wi))
        V[r, 1] = -integ(gval * dj_bt)
        V[r, 2] = integ(gval * di_bt)

    try:
        S = np.linalg.solve(M, V)
    except np.linalg.LinAlgError as e:
        raise DegeneracyError(
            f"Gram matrix is singular (lambda_min {lam:.3e}); the gradient "
            "components are not independent on this annulus"
        ) from e

    alphas = default_alpha_family(domain, d)
    nA = len(alphas)
    Mm = np.empty((3, nA))
    U = np.empty((3, nA))
    for k, alpha in enumerate(alphas):
        aval, agrad, aerr = exprlang.jet1_batch(alpha, X)
        if aerr.any():
            raise DegeneracyError("test function not evaluable on the grid")
        dai, daj = agrad[:, ii], agrad[:, jj]
        Mm[:, k] = (integ(aval), integ(aval * wi), integ(aval * wj))
        U[:, k] = (
            integ(gval * (dai * wj - daj * wi)),
            integ(gval * daj),
            -integ(gval * dai),
        )
    if np.linalg.matrix_rank(Mm.T) < 3:
        raise DegeneracyError(
            "moment vectors of the test family do not span; the Gram system "
            "cannot be cross-checked"
        )

    lhs = M @ U
    rhs = V @ Mm
    identity_residual = float(
        np.linalg.norm(lhs - rhs)
        / (np.linalg.norm(lhs) + np.linalg.norm(rhs) + _EPS)
    )

    c456 = S[2]
    c789 = -S[1]
    c = np.concatenate([c456, c789])
    defects = {
        "c5_minus_c9": abs(c[1] - c[5]),
        "c6": abs(c[2]),
        "c8": abs(c[4]),
    }
    return CramerReport(
        c=c,
        defects=defects,
        identity_residual=identity_residual,
        lambda_min=float(lam),
        i=i,
        j=j,
        n_quad=n_quad,
    )


# ------------------------------------------------------------ direct fits


@dataclass(frozen=True)
class FitResult:
    a: float
    b: np.ndarray
    c: float
    value_residual_rms: float
    grad_residual_rms: float
    n_samples: int

    def to_dict(self):
        return {
            "a": self.a,
            "b": [float(x) for x in self.b],
            "c": self.c,
            "value_residual_rms": self.value_residual_rms,
            "grad_residual_rms": self.grad_residual_rms,
            "n_samples": self.n_samples,
        }


def fit_equilibrium(g, law, domain=None, n=2000, seed=0):
    """Least-squares fit of g by a + b . v + c omega(v) on annulus samples.

    The value fit determines (a, b, c); an independent fit of grad g by
    b + c grad omega produces grad_residual_rms, so agreement of the two
    routes is evidence rather than construction.
    """
    if domain is None:
        domain = SamplingDomain()
    d = law.d
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0]))
    u = rng.random(n)
    r = (domain.r_min**d + u * (domain.r_max**d - domain.r_min**d)) ** (1.0 / d)
    x = rng.standard_normal((n, d))
    X = x * (r / np.linalg.norm(x, axis=1))[:, None]

    wv, dw, err = law.jet1(X)
    if err.any():
        raise exprlang.EvaluationError("omega not evaluable at fit samples")
    gv, dg = _jet1(g, X)

    A = np.column_stack([np.ones(n), X, wv])
    coef, _, rank, _ = np.linalg.lstsq(A, gv, rcond=None)
    if rank < d + 2:
        raise DegeneracyError(
            f"value design matrix has rank {rank} < {d + 2}: omega is affine "
            "on the annulus and c is not identifiable"
        )
    resid = A @ coef - gv
    value_rms = math.sqrt(float(resid @ resid) / n) / (
        math.sqrt(float(gv @ gv) / n) + _EPS
    )

    # Gradient route: d equations per sample for (b, c).
    B = np.zeros((n * d, d + 1))
    for m in range(d):
        B[m::d, m] = 1.0
        B[m::d, d] = dw[:, m]
    y = dg.reshape(-1)
    gcoef, _, grank, _ = np.linalg.lstsq(B, y, rcond=None)
    if grank < d + 1:
        raise DegeneracyError(
            "gradient design matrix is rank deficient: grad omega is constant "
            "on the annulus"
        )
    gresid = B @ gcoef - y
    grad_rms = math.sqrt(float(gresid @ gresid) / (n * d)) / (
        math.sqrt(float(y @ y) / (n * d)) + _EPS
    )

    return FitResult(
        a=float(coef[0]),
        b=coef[1 : d + 1].copy(),
        c=float(coef[d + 1]),
        value_residual_rms=value_rms,
        grad_residual_rms=grad_rms,
        n_samples=n,
    )


def quadratic_null_margin(law, i, j, pairs):
    """Smallest singular value (scaled by 1/sqrt(n)) of the matrix of
    normalized rows ((dp)^2, dp dq, (dq)^2) over base pairs, where dp and
    dq are the gradient-difference components i and j (1-based). A margin
    near zero means a quadratic form annihilates all gradient differences,
    the signature of a degenerate law."""
    if not (1 <= i <= law.d and 1 <= j <= law.d) or i == j:
        raise ValueError(f"need distinct component indices in 1..{law.d}")
    V, VS = pairs
    _, dw_v, e1 = law.jet1(V)
    _, dw_vs, e2 = law.jet1(VS)
    if e1.any() or e2.any():
        raise exprlang.EvaluationError("omega not differentiable at pairs")
    dp = dw_v[:, i - 1] - dw_vs[:, i - 1]
    dq = dw_v[:, j - 1] - dw_vs[:, j - 1]
    R = np.column_stack([dp * dp, dp * dq, dq * dq])
    norms = np.linalg.norm(R, axis=1)
    keep = norms > 0.0
    if not keep.any():
        raise DegeneracyError(
            "all gradient differences vanish; the quadratic row system is "
            "empty (constant grad omega)"
        )
    R = R[keep] / norms[keep, None]
    return float(np.linalg.svd(R, compute_uv=False)[-1] / math.sqrt(R.shape[0]))


# ------------------------------------------------------ level-set profile


def _project_to_level(law, X, a):
    """Newton projection of points onto {omega = a}; returns (points, ok)."""
    X = X.copy()
    n = X.shape[0]
    ok = np.ones(n, dtype=bool)
    tol = _PROJ_TOL * max(1.0, abs(a))
    for _ in range(_MAX_PROJ_ITER):
        wv, dw, err = law.jet1(X[ok])
        bad = err != 0
        if bad.any():
            idx = np.flatnonzero(ok)
            ok[idx[bad]] = False
            wv, dw = wv[~bad], dw[~bad]
        if not ok.any():
            break
        miss = wv - a
        if np.max(np.abs(miss)) <= tol:
            break
        g2 = np.einsum("ij,ij->i", dw, dw)
        stalled = g2 <= 1e-300
        if stalled.any():
            idx = np.flatnonzero(ok)
            ok[idx[stalled]] = False
            miss, dw, g2 = miss[~stalled], dw[~stalled], g2[~stalled]
            if not ok.any():
                break
        X[ok] -= (miss / g2)[:, None] * dw
    if ok.any():
        wv, _, err = law.jet1(X[ok])
        idx = np.flatnonzero(ok)
        conv = (err == 0) & (np.abs(wv - a) <= tol)
        ok[idx[~conv]] = False
    return X, ok


@dataclass(frozen=True)
class LevelSetReport:
    levels: np.ndarray
    spreads: np.ndarray
    mu: np.ndarray
    counts: np.ndarray
    max_spread: float
    verdict: str

    def to_dict(self):
        return {
            "levels": [float(x) for x in self.levels],
            "spreads": [float(x) for x in self.spreads],
            "mu": [float(x) for x in self.mu],
            "counts": [int(x) for x in self.counts],
            "max_spread": self.max_spread,
            "verdict": self.verdict,
        }


def level_set_constancy(g, law, levels, domain=None, n_per_level=200, seed=0):
    """Constancy of the reduced profile on each level set of omega.

    The linear part of g is removed with b = grad g(0), leaving g~(v) =
    g(v) - b . v; when g = a + b . v + h(omega) the remainder is constant
    on every level set, and the per-level spread (max - min, relative to
    the median) measures the failure. mu is the per-level median of g~.
    """
    if domain is None:
        domain = SamplingDomain()
    levels = np.asarray(levels, dtype=float)
    d = law.d
    b0 = exprlang.jet(g, np.zeros(d)).gradient

    spreads = np.empty(levels.shape[0])
    mu = np.empty(levels.shape[0])
    counts = np.zeros(levels.shape[0], dtype=np.int64)
    for k, a in enumerate(levels):
        if a == 0.0 and not law.origin_excluded:
            gval = float(_values(g, np.zeros((1, d)))[0])
            spreads[k] = 0.0
            mu[k] = gval
            counts[k] = 1
            continue
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), k, 17]))
        u = rng.random(n_per_level)
        r = (domain.r_min**d + u * (domain.r_max**d - domain.r_min**d)) ** (
            1.0 / d
        )
        x = rng.standard_normal((n_per_level, d))
        X = x * (r / np.linalg.norm(x, axis=1))[:, None]
        P, ok = _project_to_level(law, X, a)
        counts[k] = int(ok.sum())
        if counts[k] == 0:
            spreads[k] = np.nan
            mu[k] = np.nan
            continue
        gt = _values(g, P[ok]) - P[ok] @ b0
        med = float(np.median(gt))
        spreads[k] = (float(np.max(gt)) - float(np.min(gt))) / (1.0 + abs(med))
        mu[k] = med

    finite = np.isfinite(spreads)
    max_spread = float(np.max(spreads[finite])) if finite.any() else np.nan
    verdict = _verdict(max_spread, max_spread) if finite.any() else "inconclusive"
    return LevelSetReport(
        levels=levels,
        spreads=spreads,
        mu=mu,
        counts=counts,
        max_spread=max_spread,
        verdict=verdict,
    )


@dataclass(frozen=True)
class MuProfile:
    levels: np.ndarray
    mu: np.ndarray
    c_fit: float
    linearity_residual: float
    constancy: LevelSetReport

    def to_dict(self):
        return {
            "levels": [float(x) for x in self.levels],
            "mu": [float(x) for x in self.mu],
            "c_fit": self.c_fit,
            "linearity_residual": self.linearity_residual,
            "constancy": self.constancy.to_dict(),
        }


def mu_profile(g, law, levels, domain=None, n_per_level=200, seed=0):
    """Reduced profile mu(a) over levels of omega plus the best linear
    slope through the origin and its relative residual; mu(a) = c a with a
    small residual is the numerical trace of g = a0 + b . v + c omega."""
    rep = level_set_constancy(g, law, levels, domain, n_per_level, seed)
    lv, m = rep.levels, rep.mu
    use = np.isfinite(m)
    if not use.any():
        raise DegeneracyError("no level produced converged samples")
    denom = float(lv[use] @ lv[use])
    if denom == 0.0:
        raise ValueError("levels must include a nonzero value")
    c_fit = float(lv[use] @ m[use]) / denom
    miss = m[use] - c_fit * lv[use]
    lin = math.sqrt(float(miss @ miss) / use.sum()) / (
        math.sqrt(float(m[use] @ m[use]) / use.sum()) + _EPS
    )
    return MuProfile(
        levels=lv,
        mu=m,
        c_fit=c_fit,
        linearity_residual=lin,
        constancy=rep,
    )


# -------------------------------------------------------- degeneracy scan


@dataclass
class DegeneracyReport:
    law_label: str
    d: int
    verdict: str
    margins: dict
    null_margins: dict
    acceptance_rate: float
    trivial_manifold: bool
    rejections: dict
    details: list = field(default_factory=list)

    def to_dict(self):
        return {
            "law": self.law_label,
            "d": self.d,
            "verdict": self.verdict,
            "margins": {k: float(v) for k, v in self.margins.items()},
            "null_margins": {
                k: (float(v) if v is not None else None)
                for k, v in self.null_margins.items()
            },
            "acceptance_rate": self.acceptance_rate,
            "trivial_manifold": self.trivial_manifold,
            "rejections": dict(sorted(self.rejections.items())),
            "details": list(self.details),
        }


def degeneracy_report(law, domain=None, n=2000, seed=0):
    """Classify a law as nondegenerate, degenerate with dependent
    gradients, degenerate with a trivial manifold, or inconclusive.

    Order matters: a law with constant grad omega leaves no usable base
    pairs at all and is reported as dependent-gradients before any manifold
    verdict; a law whose sampler rejects essentially everything (the
    sheared family) is a trivial manifold even though its independence
    margins also vanish.
    """
    if domain is None:
        domain = SamplingDomain()
    d = law.d
    details = []

    margins = {}
    for i in range(1, d + 1):
        for j in range(i + 1, d + 1):
            margins[f"{i},{j}"] = float(independence_margin(law, i, j, domain))

    pairs = None
    pairs_failed = False
    try:
        pairs = sample_pairs(law, domain, n=min(n, 512), seed=seed)
    except ChartError as e:
        pairs_failed = True
        details.append(f"pair sampling failed: {e}")

    null_margins = {}
    all_null = False
    if pairs is not None:
        for key in margins:
            i, j = (int(t) for t in key.split(","))
            try:
                null_margins[key] = quadratic_null_margin(law, i, j, pairs)
            except DegeneracyError as e:
                null_margins[key] = None
                all_null = True
                details.append(f"null rows for ({key}): {e}")
    else:
        null_margins = {key: None for key in margins}

    qs = sample_quadruples(law, domain, n=min(n, 2000), seed=seed)
    diag = qs.diagnostics
    gap_frac = diag.rejections.get("gradient_gap", 0) / max(diag.n_attempts, 1)

    if pairs_failed or all_null or gap_frac > 0.99:
        verdict = "degenerate:dependent-gradients"
        details.append(
            "gradient differences vanish on the annulus (constant grad omega)"
        )
    elif diag.trivial_manifold:
        verdict = "degenerate:trivial-manifold"
        details.append(
            f"sampler accepted {diag.n_accepted} of {diag.n_attempts} candidates"
        )
    elif all(v <= LAMBDA_THRESHOLD for v in margins.values()):
        verdict = "degenerate:dependent-gradients"
        details.append(
            "all independence margins at or below the dependence threshold"
        )
    elif any(v > LAMBDA_THRESHOLD for v in margins.values()):
        verdict = "nondegenerate"
    else:
        verdict = "inconclusive"

    return DegeneracyReport(
        law_label=law.label,
        d=d,
        verdict=verdict,
        margins=margins,
        null_margins=null_margins,
        acceptance_rate=diag.acceptance_rate,
        trivial_manifold=diag.trivial_manifold,
        rejections=diag.rejections,
        details=details,
    )
