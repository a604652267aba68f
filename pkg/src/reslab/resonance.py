"""Resonant-manifold charts and samplers.

Four-wave: around a base pair (v, v*) with distinct gradients, the surface
{omega(v)+omega(v*) = omega(v-z)+omega(v*+z)} is solved as a graph over the
non-pivot components sigma of z, the pivot component coming from a damped
Newton iteration on Phi. Three-wave: same construction for
{omega(v)+omega(z) = omega(v+z)} around z=0, plus the split variant
{omega(v-z)+omega(z) = omega(v)} used by the collision operator at a fixed
parent.

Sampling is chunked: chunk k draws from default_rng(SeedSequence([seed, k]))
and chunks are merged in index order, so results do not depend on the
thread count. Every rejected candidate is counted under a reason; a
near-total rejection rate is reported as a trivial manifold, never thrown.

Weights are the co-area factor sqrt(det(D_sigma psi^T D_sigma psi))/|grad_z
Phi| at the solved point, the surface measure matching delta(Phi) after the
momentum delta has been eliminated.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import backend, exprlang
from .dispersion import DispersionLaw, SamplingDomain

NEWTON_TOL = 1e-12
MAX_NEWTON_ITER = 50
MAX_HALVINGS = 8
GRAD_GAP_MIN = 1e-6
TRUST_FRACTION = 0.25
TRUST_CAP = 0.5
TRIVIAL_PIVOT_RTOL = 1e-9
POLISH_TRIGGER = 1e-3
MAX_POLISH_ITER = 12
CHUNK = 2048
ATTEMPT_FACTOR = 50
TRIVIAL_ACCEPT_RATE = 0.01

REASONS = (
    "domain",
    "gradient_gap",
    "pivot_derivative",
    "newton",
    "degenerate_sheet",
    "weight",
)


class ChartError(ValueError):
    """Chart preconditions violated (gap too small, sigma outside trust
    radius, Newton divergence) for a scalar chart call."""


class HypothesisError(ValueError):
    """Three-wave standing hypotheses violated in a way the chart cannot
    survive (omega(0) != 0)."""


# ------------------------------------------------------------------- types


@dataclass(frozen=True)
class FourWaveChart:
    law: DispersionLaw
    v: np.ndarray
    vstar: np.ndarray
    pivot: int  # 0-based
    grad_gap: float
    trust_radius: float
    newton_tol: float = NEWTON_TOL


@dataclass(frozen=True)
class ResonantQuadruple:
    v: np.ndarray
    vstar: np.ndarray
    vp: np.ndarray
    vpstar: np.ndarray
    weight: float
    energy_residual: float


@dataclass(frozen=True)
class ResonantTriple:
    vp: np.ndarray
    vpp: np.ndarray
    vsum: np.ndarray
    weight: float
    energy_residual: float


@dataclass
class SampleDiagnostics:
    n_requested: int
    n_accepted: int
    n_attempts: int
    rejections: dict
    acceptance_rate: float
    trivial_manifold: bool
    max_energy_residual: float
    seed: int
    warnings: list = field(default_factory=list)

    def to_dict(self):
        return {
            "n_requested": self.n_requested,
            "n_accepted": self.n_accepted,
            "n_attempts": self.n_attempts,
            "rejections": dict(sorted(self.rejections.items())),
            "acceptance_rate": self.acceptance_rate,
            "trivial_manifold": self.trivial_manifold,
            "max_energy_residual": self.max_energy_residual,
            "seed": self.seed,
            "warnings": list(self.warnings),
        }


@dataclass
class QuadrupleSet:
    law_label: str
    d: int
    domain: SamplingDomain
    v: np.ndarray
    vstar: np.ndarray
    vp: np.ndarray
    vpstar: np.ndarray
    weight: np.ndarray
    energy_residual: np.ndarray
    ball_volume: np.ndarray  # volume of the sigma ball each sample was drawn from
    diagnostics: SampleDiagnostics

    def __len__(self):
        return self.v.shape[0]

    def __iter__(self):
        for k in range(len(self)):
            yield ResonantQuadruple(
                v=self.v[k],
                vstar=self.vstar[k],
                vp=self.vp[k],
                vpstar=self.vpstar[k],
                weight=float(self.weight[k]),
                energy_residual=float(self.energy_residual[k]),
            )


@dataclass
class TripleSet:
    law_label: str
    d: int
    domain: SamplingDomain
    vp: np.ndarray
    vpp: np.ndarray
    vsum: np.ndarray
    weight: np.ndarray
    energy_residual: np.ndarray
    ball_volume: np.ndarray
    diagnostics: SampleDiagnostics

    def __len__(self):
        return self.vp.shape[0]

    def __iter__(self):
        for k in range(len(self)):
            yield ResonantTriple(
                vp=self.vp[k],
                vpp=self.vpp[k],
                vsum=self.vsum[k],
                weight=float(self.weight[k]),
                energy_residual=float(self.energy_residual[k]),
            )


# ------------------------------------------------------------ RNG plumbing


def _chunk_rng(seed, k):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(k)]))


def _draw_annulus(rng, n, d, domain):
    """Uniform draw from the annulus (volume measure)."""
    u = rng.random(n)
    r = (domain.r_min**d + u * (domain.r_max**d - domain.r_min**d)) ** (1.0 / d)
    x = rng.standard_normal((n, d))
    nrm = np.linalg.norm(x, axis=1)
    nrm[nrm == 0.0] = 1.0
    return x * (r / nrm)[:, None]


def _draw_ball(rng, n, dim, radius):
    """Uniform draw from the dim-ball of per-row radius (dim is d-1 here)."""
    if dim == 1:
        return (radius * (2.0 * rng.random(n) - 1.0))[:, None]
    theta = 2.0 * np.pi * rng.random(n)
    rad = radius * np.sqrt(rng.random(n))
    return np.stack([rad * np.cos(theta), rad * np.sin(theta)], axis=1)


def _ball_volume(dim, radius):
    if dim == 1:
        return 2.0 * radius
    return np.pi * radius**2


def _embed_sigma(sigma, piv, d):
    """z with non-pivot components equal to sigma (in increasing index
    order) and pivot component 0."""
    n = sigma.shape[0]
    z = np.zeros((n, d))
    mask = np.arange(d)[None, :] != piv[:, None]
    z[mask] = sigma.ravel()
    return z


def _frobenius(H):
    return np.sqrt(np.einsum("bij,bij->b", H, H))


# ------------------------------------------------- generic pivot Newton


def _newton_pivot(phi_grad, phi_only, z0, piv, gap_floor, tol):
    """Damped Newton on the pivot component of z.

    phi_grad(z, idx) -> (phi, G, bad) over rows idx of the full array z;
    phi_only(z_try, idx) -> (phi, bad) where z_try is already compacted to
    the idx rows. gap_floor is the per-row minimum admissible |G_pivot|.
    Returns (z, phi, G, status) with status 0 ok, else
    1 + REASONS.index(reason).
    """
    B, d = z0.shape
    z = z0.copy()
    status = np.full(B, -1, dtype=np.int64)  # -1 pending
    phi_out = np.full(B, np.nan)
    G_out = np.full((B, d), np.nan)
    active = np.arange(B)

    for it in range(MAX_NEWTON_ITER + 1):
        if active.size == 0:
            break
        phi, G, bad = phi_grad(z, active)
        gp = G[np.arange(active.size), piv[active]]

        dom = bad
        conv = ~dom & (np.abs(phi) <= tol)
        sel = active[conv]
        status[sel] = 0
        phi_out[sel] = phi[conv]
        G_out[sel] = G[conv]
        status[active[dom]] = 1 + REASONS.index("domain")

        live = ~dom & ~conv
        if it == MAX_NEWTON_ITER:
            status[active[live]] = 1 + REASONS.index("newton")
            break
        small = live & (np.abs(gp) < gap_floor[active])
        status[active[small]] = 1 + REASONS.index("pivot_derivative")
        live = live & ~small
        idx = active[live]
        if idx.size == 0:
            active = active[live]
            continue

        step = -phi[live] / gp[live]
        cur = np.abs(phi[live])
        zi = z[idx, piv[idx]]
        pending = np.ones(idx.size, dtype=bool)
        new_zi = zi + step
        for _ in range(MAX_HALVINGS):
            z_try = z[idx]
            z_try[np.arange(idx.size), piv[idx]] = np.where(
                pending, zi + step, new_zi
            )
            phi_try, bad_try = phi_only(z_try, idx)
            worse = pending & (bad_try | ~(np.abs(phi_try) <= cur))
            good = pending & ~worse
            new_zi[good] = zi[good] + step[good]
            pending = worse
            if not pending.any():
                break
            step[pending] *= 0.5
        new_zi[pending] = zi[pending] + step[pending]
        z[idx, piv[idx]] = new_zi
        active = idx

    return z, phi_out, G_out, status


# ----------------------------------------------------- four-wave pipeline


def _four_phi_closures(law, V, VS, omega_sum):
    def phi_grad(z, idx):
        w1, g1, e1 = law.jet1(V[idx] - z[idx])
        w2, g2, e2 = law.jet1(VS[idx] + z[idx])
        bad = (e1 != 0) | (e2 != 0)
        return omega_sum[idx] - w1 - w2, g1 - g2, bad

    def phi_only(z_try, idx):
        w1, e1 = law.values(V[idx] - z_try)
        w2, e2 = law.values(VS[idx] + z_try)
        return omega_sum[idx] - w1 - w2, (e1 != 0) | (e2 != 0)

    return phi_grad, phi_only


def _coarea_weight(G, piv):
    """sqrt(det(D_sigma psi^T D_sigma psi)) / |grad Phi| at the solved point.

    The chart tangent columns are e_k - (G_k/G_i) e_i, whose Gram
    determinant is 1 + sum_k (G_k/G_i)^2.
    """
    rows = np.arange(G.shape[0])
    gp = G[rows, piv]
    gnorm = np.linalg.norm(G, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio2 = np.maximum((gnorm * gnorm - gp * gp) / (gp * gp), 0.0)
        return np.sqrt(1.0 + ratio2) / gnorm


def _four_candidates(law, domain, m, rng, newton_tol, v_fixed=None):
    """One chunk of four-wave candidates. Returns (arrays or None, counts)."""
    d = law.d
    counts = dict.fromkeys(REASONS, 0)
    if v_fixed is None:
        V = _draw_annulus(rng, m, d, domain)
    else:
        V = np.broadcast_to(np.asarray(v_fixed, dtype=float), (m, d)).copy()
    VS = _draw_annulus(rng, m, d, domain)

    wv, gv, Hv, ev = law.jet2(V)
    ws, gs, Hs, es = law.jet2(VS)
    ok = (ev == 0) & (es == 0)
    counts["domain"] += int((~ok).sum())

    G0 = gv - gs
    scale = np.maximum(
        np.maximum(np.linalg.norm(gv, axis=1), np.linalg.norm(gs, axis=1)), 1.0
    )
    gap = np.linalg.norm(G0, axis=1)
    with np.errstate(invalid="ignore"):
        wide = gap >= GRAD_GAP_MIN * scale
    counts["gradient_gap"] += int((ok & ~wide).sum())
    ok &= wide
    if not ok.any():
        return None, counts

    idx0 = np.flatnonzero(ok)
    V, VS = V[idx0], VS[idx0]
    wv, ws = wv[idx0], ws[idx0]
    G0, scale = G0[idx0], scale[idx0]
    piv = np.argmax(np.abs(G0), axis=1)
    rows = np.arange(idx0.size)
    gap_piv = np.abs(G0[rows, piv])

    maxH = np.maximum(_frobenius(Hv[idx0]), _frobenius(Hs[idx0]))
    maxH = np.maximum(maxH, 1e-300)
    rho = np.minimum(TRUST_FRACTION * gap_piv / maxH, TRUST_CAP)
    sigma = _draw_ball(rng, idx0.size, d - 1, rho)
    z0 = _embed_sigma(sigma, piv, d)
    omega_sum = wv + ws

    phi_grad, phi_only = _four_phi_closures(law, V, VS, omega_sum)
    z, phi, G, status = _newton_pivot(
        phi_grad, phi_only, z0, piv, GRAD_GAP_MIN * scale, newton_tol
    )
    for r, name in enumerate(REASONS):
        counts[name] += int((status == r + 1).sum())

    good = status == 0
    # A solved pivot component at 0 for a nonzero sigma means the whole
    # sigma-plane sits inside the manifold: the flat sheet of a degenerate
    # law, not a transverse resonance. Rejected and counted separately.
    signorm = np.linalg.norm(sigma, axis=1)
    sheet = good & (np.abs(z[rows, piv]) <= TRIVIAL_PIVOT_RTOL * signorm) & (
        signorm > 0.0
    )
    counts["degenerate_sheet"] += int(sheet.sum())
    good &= ~sheet
    if not good.any():
        return None, counts

    keep = np.flatnonzero(good)
    weight = _coarea_weight(G[keep], piv[keep])
    finite = np.isfinite(weight) & (weight > 0.0)
    counts["weight"] += int((~finite).sum())
    keep = keep[finite]
    if keep.size == 0:
        return None, counts
    weight = weight[finite]

    psi = z[keep]
    VP = V[keep] - psi
    VPS = VS[keep] + psi
    w1, _ = law.values(VP)
    w2, _ = law.values(VPS)
    resid = np.abs(omega_sum[keep] - w1 - w2)
    vball = _ball_volume(d - 1, rho[keep])
    out = {
        "v": V[keep],
        "vstar": VS[keep],
        "vp": VP,
        "vpstar": VPS,
        "weight": weight,
        "energy_residual": resid,
        "ball_volume": vball,
    }
    return out, counts


def _run_chunked(make_chunk, n, seed, threads):
    """Run chunk jobs deterministically: chunk k uses rng(seed, k), results
    are concatenated in k order regardless of the thread count."""
    max_chunks = max(1, math.ceil(ATTEMPT_FACTOR * n / CHUNK))
    parts = []
    counts = dict.fromkeys(REASONS, 0)
    accepted = 0
    attempts = 0
    k = 0
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        while accepted < n and k < max_chunks:
            wave = list(range(k, min(k + max(threads, 1), max_chunks)))
            if pool is not None:
                results = list(
                    pool.map(lambda kk: make_chunk(_chunk_rng(seed, kk)), wave)
                )
            else:
                results = [make_chunk(_chunk_rng(seed, kk)) for kk in wave]
            # consume in chunk order and stop at the chunk that reaches n:
            # accounting then covers the same prefix for every thread count
            consumed = 0
            for out, c in results:
                if accepted >= n:
                    break
                consumed += 1
                attempts += CHUNK
                for name in REASONS:
                    counts[name] += c[name]
                if out is not None:
                    parts.append(out)
                    accepted += out["weight"].shape[0]
            k = wave[consumed - 1] + 1
    finally:
        if pool is not None:
            pool.shutdown()
    return parts, counts, attempts


def _merge_parts(parts, counts, attempts, n, seed, warnings):
    if parts:
        merged = {
            key: np.concatenate([p[key] for p in parts], axis=0)[:n]
            for key in parts[0]
        }
        n_acc = merged["weight"].shape[0]
    else:
        merged = None
        n_acc = 0
    rate = n_acc / attempts if attempts else 0.0
    diag = SampleDiagnostics(
        n_requested=n,
        n_accepted=n_acc,
        n_attempts=attempts,
        rejections=counts,
        acceptance_rate=rate,
        trivial_manifold=bool(rate < TRIVIAL_ACCEPT_RATE),
        max_energy_residual=float(merged["energy_residual"].max()) if n_acc else 0.0,
        seed=seed,
        warnings=warnings,
    )
    return merged, diag


def sample_quadruples(
    law,
    domain=None,
    n=1000,
    seed=0,
    newton_tol=NEWTON_TOL,
    threads=None,
    v_fixed=None,
):
    """Sample n resonant quadruples; deterministic in (seed, n)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if domain is None:
        domain = SamplingDomain()
    if threads is None:
        threads = backend.thread_count()
    d = law.d

    def make_chunk(rng):
        return _four_candidates(law, domain, CHUNK, rng, newton_tol, v_fixed)

    parts, counts, attempts = _run_chunked(make_chunk, n, seed, threads)
    merged, diag = _merge_parts(parts, counts, attempts, n, seed, [])
    if merged is None:
        merged = {
            key: np.zeros((0, d) if key in ("v", "vstar", "vp", "vpstar") else 0)
            for key in ("v", "vstar", "vp", "vpstar", "weight", "energy_residual",
                        "ball_volume")
        }
    return QuadrupleSet(
        law_label=law.label,
        d=d,
        domain=domain,
        diagnostics=diag,
        **merged,
    )


def sample_pairs(law, domain=None, n=1000, seed=0):
    """Base pairs (v, v*) from the annulus with an admissible gradient gap;
    used by the cross-product and null-margin diagnostics."""
    if domain is None:
        domain = SamplingDomain()
    d = law.d
    out_v, out_vs = [], []
    accepted = 0
    max_chunks = max(1, math.ceil(ATTEMPT_FACTOR * n / CHUNK))
    for k in range(max_chunks):
        rng = _chunk_rng(seed, k)
        V = _draw_annulus(rng, CHUNK, d, domain)
        VS = _draw_annulus(rng, CHUNK, d, domain)
        _, gv, ev = law.jet1(V)
        _, gs, es = law.jet1(VS)
        scale = np.maximum(
            np.maximum(np.linalg.norm(gv, axis=1), np.linalg.norm(gs, axis=1)), 1.0
        )
        with np.errstate(invalid="ignore"):
            ok = (ev == 0) & (es == 0) & (
                np.linalg.norm(gv - gs, axis=1) >= GRAD_GAP_MIN * scale
            )
        out_v.append(V[ok])
        out_vs.append(VS[ok])
        accepted += int(ok.sum())
        if accepted >= n:
            break
    V = np.concatenate(out_v, axis=0)[:n]
    VS = np.concatenate(out_vs, axis=0)[:n]
    if V.shape[0] < n:
        raise ChartError(
            f"could not find {n} pairs with a gradient gap (law {law.label}: "
            f"gradients may be constant)"
        )
    return V, VS


# ------------------------------------------------------ scalar chart API


def build_chart(law, v, vstar, newton_tol=NEWTON_TOL):
    v = np.asarray(v, dtype=float).reshape(-1)
    vstar = np.asarray(vstar, dtype=float).reshape(-1)
    jv = law.jet(v)
    js = law.jet(vstar)
    G0 = jv.gradient - js.gradient
    scale = max(
        float(np.linalg.norm(jv.gradient)), float(np.linalg.norm(js.gradient)), 1.0
    )
    gap = float(np.linalg.norm(G0))
    if gap < GRAD_GAP_MIN * scale:
        raise ChartError(
            f"(v, v*) is outside A: gradient gap {gap:.3e} below "
            f"{GRAD_GAP_MIN * scale:.3e}"
        )
    piv = int(np.argmax(np.abs(G0)))
    maxH = max(
        float(np.linalg.norm(jv.hessian)), float(np.linalg.norm(js.hessian)), 1e-300
    )
    rho = float(min(TRUST_FRACTION * abs(G0[piv]) / maxH, TRUST_CAP))
    return FourWaveChart(
        law=law,
        v=v,
        vstar=vstar,
        pivot=piv,
        grad_gap=gap,
        trust_radius=rho,
        newton_tol=newton_tol,
    )


def _check_sigma(chart, sigma, d):
    sigma = np.asarray(sigma, dtype=float).reshape(-1)
    if sigma.shape[0] != d - 1:
        raise ValueError(f"sigma must have dimension d-1={d - 1}")
    if np.linalg.norm(sigma) > chart.trust_radius * (1.0 + 1e-12):
        raise ChartError(
            f"|sigma|={np.linalg.norm(sigma):.3e} outside trust radius "
            f"{chart.trust_radius:.3e}"
        )
    return sigma


def solve_psi_four(law, v, vstar, sigma, newton_tol=NEWTON_TOL):
    """psi with Phi(v, v*, psi) = 0: non-pivot components equal sigma, pivot
    solved by damped Newton. sigma = 0 returns 0 without iteration."""
    chart = build_chart(law, v, vstar, newton_tol)
    d = law.d
    sigma = _check_sigma(chart, sigma, d)
    if not sigma.any():
        return np.zeros(d)
    V = chart.v[None, :]
    VS = chart.vstar[None, :]
    wsum = law.value(chart.v) + law.value(chart.vstar)
    piv = np.array([chart.pivot])
    z0 = _embed_sigma(sigma[None, :], piv, d)
    phi_grad, phi_only = _four_phi_closures(law, V, VS, np.array([wsum]))
    scale = max(chart.grad_gap, 1.0)
    z, phi, G, status = _newton_pivot(
        phi_grad, phi_only, z0, piv, np.array([GRAD_GAP_MIN * scale]), newton_tol
    )
    if status[0] != 0:
        raise ChartError(f"chart solve failed: {REASONS[status[0] - 1]}")
    return z[0]


def chart_tangent_basis(law, v, vstar):
    """Columns of D_sigma psi(v, v*, 0) by implicit differentiation: for each
    non-pivot index k, e_k - (G_k/G_i) e_i with G = grad omega(v) - grad
    omega(v*). Each column is orthogonal to G exactly."""
    chart = build_chart(law, v, vstar)
    d = law.d
    G = law.jet(chart.v).gradient - law.jet(chart.vstar).gradient
    cols = []
    for k in range(d):
        if k == chart.pivot:
            continue
        e = np.zeros(d)
        e[k] = 1.0
        e[chart.pivot] = -G[k] / G[chart.pivot]
        cols.append(e)
    basis = np.stack(cols, axis=1)
    if np.linalg.matrix_rank(basis) != d - 1:
        raise ChartError("tangent basis is rank deficient")
    return basis


def gamma_sigma(law, X, sigma, newton_tol=NEWTON_TOL):
    """The pair map gamma_sigma(v, v*) = (v - psi, v* + psi) and its Jacobian
    determinant det D_X gamma_sigma, by implicit differentiation.

    D_X Psi is rank one, so the determinant collapses to the exact ratio
    (d_i omega(v) - d_i omega(v*)) / (d_i omega(v-psi) - d_i omega(v*+psi)).
    """
    v, vstar = (np.asarray(a, dtype=float).reshape(-1) for a in X)
    chart = build_chart(law, v, vstar, newton_tol)
    sigma = np.asarray(sigma, dtype=float).reshape(-1)
    if not sigma.any():
        return (v.copy(), vstar.copy()), 1.0
    psi = solve_psi_four(law, v, vstar, sigma, newton_tol)
    i = chart.pivot
    g_v = law.jet(v).gradient
    g_vs = law.jet(vstar).gradient
    g_vp = law.jet(v - psi).gradient
    g_vps = law.jet(vstar + psi).gradient
    det = (g_v[i] - g_vs[i]) / (g_vp[i] - g_vps[i])
    return (v - psi, vstar + psi), float(det)


def gamma_sigma_inverse(law, Xp, sigma, newton_tol=NEWTON_TOL, max_iter=100):
    """Invert gamma_sigma by the fixed point X = X' - Psi(X, sigma); the
    trust radius keeps the map a contraction."""
    vp, vpstar = (np.asarray(a, dtype=float).reshape(-1) for a in Xp)
    sigma = np.asarray(sigma, dtype=float).reshape(-1)
    if not sigma.any():
        return vp.copy(), vpstar.copy()
    v, vstar = vp.copy(), vpstar.copy()
    for _ in range(max_iter):
        psi = solve_psi_four(law, v, vstar, sigma, newton_tol)
        v_new = vp + psi
        vs_new = vpstar - psi
        shift = max(
            float(np.max(np.abs(v_new - v))), float(np.max(np.abs(vs_new - vstar)))
        )
        v, vstar = v_new, vs_new
        if shift <= 1e-14 * (1.0 + float(np.max(np.abs(v)))):
            return v, vstar
    raise ChartError("gamma_sigma inverse fixed point did not converge")


# ------------------------------------------------------ three-wave charts


def validate_three_wave(law, domain=None, seed=12345):
    """Check the standing hypotheses. omega(0) = 0 is hard (the chart is
    anchored at z = 0); grad omega(0) = 0 and positivity are reported as
    warnings so that laws like rossby remain usable."""
    if domain is None:
        domain = SamplingDomain()
    warnings = []
    if law.origin_excluded:
        probes = 1e-8 * np.eye(law.d)
        vals, err = law.values(probes)
        ref = abs(law.value(np.ones(law.d) / np.sqrt(law.d)))
        if err.any() or np.max(np.abs(vals)) > 1e-3 * (1.0 + ref):
            raise HypothesisError(
                f"law {law.label}: omega does not vanish at the origin "
                "(three-wave chart needs omega(0) = 0)"
            )
    else:
        w0 = law.value(np.zeros(law.d))
        if abs(w0) > 1e-10:
            raise HypothesisError(
                f"law {law.label}: omega(0) = {w0:.6g}, three-wave chart needs "
                "omega(0) = 0"
            )
        try:
            g0 = law.jet(np.zeros(law.d)).gradient
            if np.linalg.norm(g0) > 1e-10:
                warnings.append(
                    f"grad omega(0) = {g0.tolist()} is not zero; three-wave "
                    "results rely on the chart only, not on the full theory"
                )
        except exprlang.EvaluationError:
            warnings.append("grad omega(0) could not be evaluated")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 3]))
    pts = _draw_annulus(rng, 1000, law.d, domain)
    vals, err = law.values(pts)
    if err.any():
        raise HypothesisError(f"law {law.label}: omega not evaluable on the annulus")
    if np.min(vals) <= 0.0:
        warnings.append(
            "omega takes nonpositive values on the annulus; positivity "
            "hypothesis does not hold"
        )
    return warnings


def _three_phi_closures(law, V, omega_v, split):
    """Merge: Phi = omega(v) + omega(z) - omega(v+z).
    Split: Phi = omega(v-z) + omega(z) - omega(v)."""
    if not split:

        def phi_grad(z, idx):
            w1, g1, e1 = law.jet1(z[idx])
            w2, g2, e2 = law.jet1(V[idx] + z[idx])
            return omega_v[idx] + w1 - w2, g1 - g2, (e1 != 0) | (e2 != 0)

        def phi_only(z_try, idx):
            w1, e1 = law.values(z_try)
            w2, e2 = law.values(V[idx] + z_try)
            return omega_v[idx] + w1 - w2, (e1 != 0) | (e2 != 0)

    else:

        def phi_grad(z, idx):
            w1, g1, e1 = law.jet1(V[idx] - z[idx])
            w2, g2, e2 = law.jet1(z[idx])
            return w1 + w2 - omega_v[idx], g2 - g1, (e1 != 0) | (e2 != 0)

        def phi_only(z_try, idx):
            w1, e1 = law.values(V[idx] - z_try)
            w2, e2 = law.values(z_try)
            return w1 + w2 - omega_v[idx], (e1 != 0) | (e2 != 0)

    return phi_grad, phi_only


def _three_polish(law, V, omega_v, split, z, piv, phi, G, newton_tol):
    """Tangential refinement for grazing manifolds: when the pivot component
    of grad Phi is tiny at the Newton solution (a tangential zero, e.g. the
    collinear manifold of omega = |v|), run Newton on d_piv Phi itself and
    keep the result only if |Phi| stays within tolerance and the pivot
    derivative shrank."""
    n = z.shape[0]
    rows = np.arange(n)
    gp = np.abs(G[rows, piv])
    if split:
        legA, legB = V - z, z
    else:
        legA, legB = z, V + z

    _, gA, eA = law.jet1(legA)
    _, gB, eB = law.jet1(legB)
    gscale = np.maximum(
        np.maximum(np.linalg.norm(gA, axis=1), np.linalg.norm(gB, axis=1)), 1.0
    )
    need = (gp <= POLISH_TRIGGER * gscale) & (eA == 0) & (eB == 0)
    idx = np.flatnonzero(need)
    if idx.size == 0:
        return z, phi, G

    zi = z[idx].copy()
    pv = piv[idx]
    sub = np.arange(idx.size)
    best = zi.copy()
    best_gp = gp[idx].copy()
    for _ in range(MAX_POLISH_ITER):
        if split:
            la, lb = V[idx] - zi, zi
        else:
            la, lb = zi, V[idx] + zi
        _, ga, Ha, ea = law.jet2(la)
        _, gb, Hb, eb = law.jet2(lb)
        bad = (ea != 0) | (eb != 0)
        if split:
            Gp = gb[sub, pv] - ga[sub, pv]
            dGp = Hb[sub, pv, pv] + Ha[sub, pv, pv]
        else:
            Gp = ga[sub, pv] - gb[sub, pv]
            dGp = Ha[sub, pv, pv] - Hb[sub, pv, pv]
        improved = ~bad & (np.abs(Gp) < best_gp)
        best[improved] = zi[improved]
        best_gp[improved] = np.abs(Gp[improved])
        ok = ~bad & (np.abs(dGp) > 1e-300)
        if not ok.any():
            break
        step = np.where(ok, -Gp / np.where(ok, dGp, 1.0), 0.0)
        zi[sub, pv] += step
        if np.max(np.abs(step)) <= 1e-16:
            break

    z_full = z.copy()
    z_full[idx] = best
    phi_grad, _ = _three_phi_closures(law, V, omega_v, split)
    phi_new, G_new, bad_new = phi_grad(z_full, idx)
    accept = ~bad_new & (np.abs(phi_new) <= newton_tol) & (
        np.abs(G_new[sub, pv]) <= gp[idx]
    )
    take = idx[accept]
    z[take] = best[accept]
    phi[take] = phi_new[accept]
    G[take] = G_new[accept]
    return z, phi, G


def _origin_gradient(law):
    """grad omega(0), taken as 0 when the origin is excluded or the jet is
    not defined there (the kink of |v| at 0)."""
    if law.origin_excluded:
        return np.zeros(law.d)
    try:
        return law.jet(np.zeros(law.d)).gradient
    except exprlang.EvaluationError:
        return np.zeros(law.d)


def _three_candidates(law, domain, m, rng, newton_tol, split, v_fixed=None,
                      g_origin=None):
    d = law.d
    counts = dict.fromkeys(REASONS, 0)
    if v_fixed is None:
        V = _draw_annulus(rng, m, d, domain)
    else:
        V = np.broadcast_to(np.asarray(v_fixed, dtype=float), (m, d)).copy()
    wv, gv, Hv, ev = law.jet2(V)
    ok = ev == 0
    counts["domain"] += int((~ok).sum())

    # The chart gradient at the base z=0 is grad omega(0) - grad omega(v)
    # for both variants; the pivot comes from it, not from grad omega(v)
    # alone, so that laws with grad omega(0) != 0 still get a transverse
    # direction.
    if g_origin is None:
        g_origin = _origin_gradient(law)
    G0 = g_origin[None, :] - gv
    scale = np.maximum(
        np.maximum(np.linalg.norm(gv, axis=1), np.linalg.norm(g_origin)), 1.0
    )
    gap = np.linalg.norm(G0, axis=1)
    with np.errstate(invalid="ignore"):
        wide = gap >= GRAD_GAP_MIN * scale
    counts["gradient_gap"] += int((ok & ~wide).sum())
    ok &= wide
    if not ok.any():
        return None, counts

    idx0 = np.flatnonzero(ok)
    V = V[idx0]
    wv = wv[idx0]
    G0 = G0[idx0]
    piv = np.argmax(np.abs(G0), axis=1)
    rows = np.arange(idx0.size)
    gap_piv = np.abs(G0[rows, piv])
    maxH = np.maximum(_frobenius(Hv[idx0]), 1e-300)
    rho = np.minimum(TRUST_FRACTION * gap_piv / maxH, TRUST_CAP)
    sigma = _draw_ball(rng, idx0.size, d - 1, rho)
    z0 = _embed_sigma(sigma, piv, d)

    phi_grad, phi_only = _three_phi_closures(law, V, wv, split)
    z, phi, G, status = _newton_pivot(
        phi_grad, phi_only, z0, piv, np.full(idx0.size, 1e-300), newton_tol
    )
    for r, name in enumerate(REASONS):
        counts[name] += int((status == r + 1).sum())

    good = np.flatnonzero(status == 0)
    if good.size == 0:
        return None, counts
    z2, phi2, G2 = _three_polish(
        law, V[good], wv[good], split, z[good], piv[good], phi[good], G[good],
        newton_tol,
    )

    sub = np.arange(good.size)
    signorm = np.linalg.norm(sigma[good], axis=1)
    sheet = (np.abs(z2[sub, piv[good]]) <= TRIVIAL_PIVOT_RTOL * signorm) & (
        signorm > 0.0
    )
    # z == 0 exactly is the trivial triple; with sigma != 0 it cannot occur,
    # but a vanishing solved pivot with nonzero sigma marks a flat sheet.
    counts["degenerate_sheet"] += int(sheet.sum())
    ok2 = ~sheet

    weight = _coarea_weight(G2, piv[good])
    finite = np.isfinite(weight) & (weight > 0.0)
    counts["weight"] += int((ok2 & ~finite).sum())
    ok2 &= finite
    if not ok2.any():
        return None, counts
    keep = np.flatnonzero(ok2)
    gidx = good[keep]

    zk = z2[keep]
    if split:
        vp = V[gidx] - zk
        vpp = zk
        vsum = V[gidx]
    else:
        vp = V[gidx]
        vpp = zk
        vsum = V[gidx] + zk
    w1, e1 = law.values(vp)
    w2, e2 = law.values(vpp)
    w3, e3 = law.values(vsum)
    resid = np.abs(w1 + w2 - w3)
    bad = (e1 != 0) | (e2 != 0) | (e3 != 0)
    if bad.any():
        counts["domain"] += int(bad.sum())
        keepb = ~bad
        vp, vpp, vsum = vp[keepb], vpp[keepb], vsum[keepb]
        resid = resid[keepb]
        gidx = gidx[keepb]
        keep = keep[keepb]
    out = {
        "vp": vp,
        "vpp": vpp,
        "vsum": vsum,
        "weight": weight[keep],
        "energy_residual": resid,
        "ball_volume": _ball_volume(d - 1, rho[gidx]),
    }
    return out, counts


def sample_triples(
    law,
    domain=None,
    n=1000,
    seed=0,
    newton_tol=NEWTON_TOL,
    threads=None,
    split=False,
    v_fixed=None,
):
    """Sample n resonant triples (v', v'', v'+v''); deterministic in seed.

    split=False draws v' from the annulus and solves for v''; split=True
    solves the decomposition of a fixed parent (used with v_fixed)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if domain is None:
        domain = SamplingDomain()
    if threads is None:
        threads = backend.thread_count()
    warnings = validate_three_wave(law, domain)
    g_origin = _origin_gradient(law)

    def make_chunk(rng):
        return _three_candidates(
            law, domain, CHUNK, rng, newton_tol, split, v_fixed, g_origin
        )

    parts, counts, attempts = _run_chunked(make_chunk, n, seed, threads)
    merged, diag = _merge_parts(parts, counts, attempts, n, seed, warnings)
    if merged is None:
        merged = {
            key: np.zeros((0, law.d) if key in ("vp", "vpp", "vsum") else 0)
            for key in ("vp", "vpp", "vsum", "weight", "energy_residual",
                        "ball_volume")
        }
    return TripleSet(
        law_label=law.label,
        d=law.d,
        domain=domain,
        diagnostics=diag,
        **merged,
    )


def solve_psi_three(law, v, sigma, newton_tol=NEWTON_TOL):
    """psi with omega(v) + omega(psi) = omega(v + psi) within newton_tol;
    psi(v, 0) = 0."""
    validate_three_wave(law)
    v = np.asarray(v, dtype=float).reshape(-1)
    d = law.d
    sigma = np.asarray(sigma, dtype=float).reshape(-1)
    if sigma.shape[0] != d - 1:
        raise ValueError(f"sigma must have dimension d-1={d - 1}")
    if not sigma.any():
        return np.zeros(d)
    jv = law.jet(v)
    G0 = _origin_gradient(law) - jv.gradient
    if np.linalg.norm(G0) < GRAD_GAP_MIN:
        raise ChartError("chart gradient at z=0 too small for a three-wave chart")
    piv = np.array([int(np.argmax(np.abs(G0)))])
    z0 = _embed_sigma(sigma[None, :], piv, d)
    V = v[None, :]
    wv = np.array([jv.value])
    phi_grad, phi_only = _three_phi_closures(law, V, wv, split=False)
    z, phi, G, status = _newton_pivot(
        phi_grad, phi_only, z0, piv, np.array([1e-300]), newton_tol
    )
    if status[0] != 0:
        raise ChartError(
            f"three-wave chart solve failed: {REASONS[status[0] - 1]}"
        )
    z, phi, G = _three_polish(
        law, V, wv, False, z, piv, phi, G, newton_tol
    )
    return z[0]
