"""Collision-operator quadrature and entropy dissipation.

All integrals are Monte Carlo estimates over the sampled resonant
manifold: a quadruple or triple set supplies manifold points together with
the co-area weight and the volume of the transverse parameter ball each
point was drawn from, so a sample's effective measure is weight *
ball_volume, and free annulus legs contribute the annulus volume as a
constant factor. Estimates therefore cover the chart windows around the
sampled base points; thresholds for the zero / positive verdicts are
relative to a scale built from the same integrand with the signed bracket
replaced by its absolute-value counterpart, plus a batch-means standard
error.

The kernel W is a single-point expression; it enters each interaction as
the arithmetic mean of W over the tuple's legs. The mean is invariant
under every leg exchange and exactly linear in W, so doubling W doubles
every estimate, and W = 1 reduces to the unweighted measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import exprlang
from .dispersion import SamplingDomain
from .invariants import _values
from .resonance import sample_quadruples, sample_triples

TOL_ZERO_REL = 1e-12
TOL_NOISE_REL = 1e-9
_BATCHES = 16


class NonpositiveDensityError(ValueError):
    """f must be strictly positive on every sampled leg."""


@dataclass(frozen=True)
class DissipationEstimate:
    value: float
    scale: float
    stderr: float
    tol_zero: float
    verdict: str
    n_samples: int
    mode: str
    law_label: str
    vacuous: bool = False

    def to_dict(self):
        return {
            "value": self.value,
            "scale": self.scale,
            "stderr": self.stderr,
            "tol_zero": self.tol_zero,
            "verdict": self.verdict,
            "n_samples": self.n_samples,
            "mode": self.mode,
            "law": self.law_label,
            "vacuous": self.vacuous,
        }


@dataclass(frozen=True)
class QApplyResult:
    value: float
    stderr: float
    n_samples: int
    mode: str
    components: dict

    def to_dict(self):
        return {
            "value": self.value,
            "stderr": self.stderr,
            "n_samples": self.n_samples,
            "mode": self.mode,
            "components": {k: float(v) for k, v in self.components.items()},
        }


# ----------------------------------------------------------------- pieces


def _positive_values(f, X, what="f"):
    vals = _values(f, X)
    if vals.size and np.min(vals) <= 0.0:
        raise NonpositiveDensityError(
            f"{what} must be strictly positive on the sampled points "
            f"(min {np.min(vals):.6g})"
        )
    return vals


def _kernel_values(W, X):
    if W is None:
        return np.ones(X.shape[0])
    vals = _values(W, X)
    if vals.size and np.min(vals) < 0.0:
        raise ValueError(f"kernel W must be nonnegative (min {np.min(vals):.6g})")
    return vals


def _kernel_tuple(W, legs):
    """Symmetrized kernel over the legs of one interaction tuple."""
    if W is None:
        return np.ones(legs[0].shape[0])
    acc = _kernel_values(W, legs[0])
    for X in legs[1:]:
        acc = acc + _kernel_values(W, X)
    return acc / len(legs)


def _batch_stderr(contrib):
    """Standard error of the mean from contiguous batch means; contiguous
    blocks keep the estimate meaningful under the chunked (deterministic)
    sample ordering."""
    n = contrib.shape[0]
    if n < 4:
        return math.inf
    b = _BATCHES if n >= 4 * _BATCHES else max(2, n // 4)
    cut = (n // b) * b
    means = contrib[:cut].reshape(b, -1).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(b))


def _verdict(value, scale, stderr, tol_zero):
    if tol_zero is None:
        tol_zero = TOL_ZERO_REL * scale
        noisy_zero = (value <= 3.0 * stderr) and (value <= TOL_NOISE_REL * scale)
    else:
        noisy_zero = False
    if value <= tol_zero or noisy_zero:
        return "zero", max(tol_zero, 3.0 * stderr)
    if value > max(tol_zero, 3.0 * stderr):
        return "positive", max(tol_zero, 3.0 * stderr)
    return "inconclusive", max(tol_zero, 3.0 * stderr)


# ----------------------------------------------------- entropy dissipation


def entropy_dissipation_four(f, law, W=None, domain=None, n=4096, seed=0,
                             tol_zero=None, threads=None):
    """Estimate (1/4) int W f f* f' f*' (1/f + 1/f* - 1/f' - 1/f*')^2 over
    the sampled four-wave manifold; nonnegative by construction, zero
    exactly on equilibria 1/f = a + b . v + c omega."""
    if domain is None:
        domain = SamplingDomain()
    qs = sample_quadruples(law, domain, n=n, seed=seed, threads=threads)
    m = len(qs)
    if m == 0:
        return DissipationEstimate(
            value=0.0, scale=0.0, stderr=0.0,
            tol_zero=0.0 if tol_zero is None else tol_zero,
            verdict="zero", n_samples=0, mode="four-wave",
            law_label=law.label, vacuous=True,
        )
    fv = _positive_values(f, qs.v)
    fvs = _positive_values(f, qs.vstar)
    fvp = _positive_values(f, qs.vp)
    fvps = _positive_values(f, qs.vpstar)
    Wq = _kernel_tuple(W, (qs.v, qs.vstar, qs.vp, qs.vpstar))
    measure = qs.weight * qs.ball_volume * domain.volume(law.d) ** 2
    prod = fv * fvs * fvp * fvps
    bracket = 1.0 / fv + 1.0 / fvs - 1.0 / fvp - 1.0 / fvps
    bracket_abs = 1.0 / fv + 1.0 / fvs + 1.0 / fvp + 1.0 / fvps
    contrib = 0.25 * Wq * prod * bracket * bracket * measure
    contrib_abs = 0.25 * Wq * prod * bracket_abs * bracket_abs * measure
    value = float(contrib.mean())
    scale = float(contrib_abs.mean())
    stderr = _batch_stderr(contrib)
    verdict, tol = _verdict(value, scale, stderr, tol_zero)
    return DissipationEstimate(
        value=value, scale=scale, stderr=stderr, tol_zero=tol,
        verdict=verdict, n_samples=m, mode="four-wave", law_label=law.label,
    )


def entropy_dissipation_three(f, law, W=None, domain=None, n=4096, seed=0,
                              tol_zero=None, threads=None):
    """Estimate int W f(v) f(v') f(v'') (1/f(v) - 1/f(v') - 1/f(v''))^2 with
    v = v' + v'' over the sampled three-wave manifold; zero exactly on
    equilibria 1/f = b . v + c omega."""
    if domain is None:
        domain = SamplingDomain()
    ts = sample_triples(law, domain, n=n, seed=seed, threads=threads)
    m = len(ts)
    if m == 0:
        return DissipationEstimate(
            value=0.0, scale=0.0, stderr=0.0,
            tol_zero=0.0 if tol_zero is None else tol_zero,
            verdict="zero", n_samples=0, mode="three-wave",
            law_label=law.label, vacuous=True,
        )
    fs = _positive_values(f, ts.vsum)
    fp = _positive_values(f, ts.vp)
    fpp = _positive_values(f, ts.vpp)
    Wq = _kernel_tuple(W, (ts.vsum, ts.vp, ts.vpp))
    measure = ts.weight * ts.ball_volume * domain.volume(law.d)
    bracket = 1.0 / fs - 1.0 / fp - 1.0 / fpp
    bracket_abs = 1.0 / fs + 1.0 / fp + 1.0 / fpp
    prod = fs * fp * fpp
    contrib = Wq * prod * bracket * bracket * measure
    contrib_abs = Wq * prod * bracket_abs * bracket_abs * measure
    value = float(contrib.mean())
    scale = float(contrib_abs.mean())
    stderr = _batch_stderr(contrib)
    verdict, tol = _verdict(value, scale, stderr, tol_zero)
    return DissipationEstimate(
        value=value, scale=scale, stderr=stderr, tol_zero=tol,
        verdict=verdict, n_samples=m, mode="three-wave", law_label=law.label,
    )


# ------------------------------------------------------- operator actions


def qw_apply(f, law, v, W=None, domain=None, n=4096, seed=0):
    """Pointwise four-wave collision operator at v:

    int W [f' f*' (f + f*) - f f* (f' + f*')] over the manifold window with
    the first leg pinned at v and v* drawn from the annulus. Identically 0
    for constant f, sample by sample."""
    if domain is None:
        domain = SamplingDomain()
    v = np.asarray(v, dtype=float).reshape(-1)
    qs = sample_quadruples(law, domain, n=n, seed=seed, v_fixed=v)
    m = len(qs)
    if m == 0:
        return QApplyResult(value=0.0, stderr=0.0, n_samples=0,
                            mode="four-wave", components={})
    fv = _positive_values(f, qs.v)
    fvs = _positive_values(f, qs.vstar)
    fvp = _positive_values(f, qs.vp)
    fvps = _positive_values(f, qs.vpstar)
    Wq = _kernel_tuple(W, (qs.v, qs.vstar, qs.vp, qs.vpstar))
    bracket = fvp * fvps * (fv + fvs) - fv * fvs * (fvp + fvps)
    measure = qs.weight * qs.ball_volume * domain.volume(law.d)
    contrib = Wq * bracket * measure
    return QApplyResult(
        value=float(contrib.mean()),
        stderr=_batch_stderr(contrib),
        n_samples=m,
        mode="four-wave",
        components={"gain_loss_mean": float(np.mean(np.abs(bracket)))},
    )


def q3_apply(f, law, v, W=None, domain=None, n=4096, seed=0):
    """Pointwise three-wave collision operator at v: the decomposition term
    with v as the parent minus twice the aggregation term with v as a
    daughter (the two daughter terms coincide by kernel symmetry)."""
    if domain is None:
        domain = SamplingDomain()
    v = np.asarray(v, dtype=float).reshape(-1)

    ts_split = sample_triples(law, domain, n=n, seed=seed, split=True, v_fixed=v)
    if len(ts_split):
        fs = _positive_values(f, ts_split.vsum)
        fp = _positive_values(f, ts_split.vp)
        fpp = _positive_values(f, ts_split.vpp)
        Wq = _kernel_tuple(W, (ts_split.vsum, ts_split.vp, ts_split.vpp))
        bracket = fp * fpp - fs * (fp + fpp)
        c_split = Wq * bracket * ts_split.weight * ts_split.ball_volume
    else:
        c_split = np.zeros(0)

    ts_merge = sample_triples(law, domain, n=n, seed=seed + 1, split=False,
                              v_fixed=v)
    if len(ts_merge):
        fs = _positive_values(f, ts_merge.vsum)
        fp = _positive_values(f, ts_merge.vp)
        fpp = _positive_values(f, ts_merge.vpp)
        Wq = _kernel_tuple(W, (ts_merge.vsum, ts_merge.vp, ts_merge.vpp))
        bracket = fp * fpp - fs * (fp + fpp)
        c_merge = Wq * bracket * ts_merge.weight * ts_merge.ball_volume
    else:
        c_merge = np.zeros(0)

    split_val = float(c_split.mean()) if c_split.size else 0.0
    merge_val = float(c_merge.mean()) if c_merge.size else 0.0
    value = split_val - 2.0 * merge_val
    err = math.hypot(
        _batch_stderr(c_split) if c_split.size else 0.0,
        2.0 * (_batch_stderr(c_merge) if c_merge.size else 0.0),
    )
    return QApplyResult(
        value=value,
        stderr=err,
        n_samples=int(c_split.size + c_merge.size),
        mode="three-wave",
        components={"split": split_val, "merge": merge_val},
    )


def linearized_form(g, law, weight=None, W=None, domain=None, n=4096, seed=0):
    """Quadratic form of the linearized four-wave operator on a
    perturbation g: (1/4) int weight(v) weight(v*) W (g' + g*' - g - g*)^2.
    Nonnegative, and zero exactly when g is a collisional invariant."""
    if domain is None:
        domain = SamplingDomain()
    qs = sample_quadruples(law, domain, n=n, seed=seed)
    m = len(qs)
    if m == 0:
        return QApplyResult(value=0.0, stderr=0.0, n_samples=0,
                            mode="four-wave", components={})
    gv = _values(g, qs.v)
    gvs = _values(g, qs.vstar)
    gvp = _values(g, qs.vp)
    gvps = _values(g, qs.vpstar)
    if weight is None:
        phi = np.ones(m)
        phis = np.ones(m)
    else:
        phi = _positive_values(weight, qs.v, what="weight")
        phis = _positive_values(weight, qs.vstar, what="weight")
    Wq = _kernel_tuple(W, (qs.v, qs.vstar, qs.vp, qs.vpstar))
    delta = gvp + gvps - gv - gvs
    measure = qs.weight * qs.ball_volume * domain.volume(law.d) ** 2
    contrib = 0.25 * phi * phis * Wq * delta * delta * measure
    return QApplyResult(
        value=float(contrib.mean()),
        stderr=_batch_stderr(contrib),
        n_samples=m,
        mode="four-wave",
        components={"rms_delta": float(np.sqrt(np.mean(delta * delta)))},
    )
