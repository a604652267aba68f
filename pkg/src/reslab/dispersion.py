"""Dispersion laws: built-in families, jets, the law mini-grammar, and the
linear-independence margin of {1, d_i omega, d_j omega} on an annulus.

A law is an expression omega over R^d together with a flag for laws that
are smooth only away from the origin. Sampling and quadrature always run
on an annulus 0 < r_min <= |v| <= r_max, so the excluded origin is never
touched by healthy charts; stray evaluations surface as error codes, not
as silent NaNs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import exprlang
from .exprlang import (
    Add,
    Comp,
    Expr,
    ExprParseError,
    Mul,
    Num,
    VecDot,
)

LAMBDA_THRESHOLD = 1e-8
DEFAULT_R_MIN = 0.5
DEFAULT_R_MAX = 2.0


class LawError(ValueError):
    """Malformed law string or law/dimension mismatch."""


@dataclass(frozen=True)
class SamplingDomain:
    """Annulus {r_min <= |v| <= r_max}, the compact set all samplers use."""

    r_min: float = DEFAULT_R_MIN
    r_max: float = DEFAULT_R_MAX

    def __post_init__(self):
        if not (0.0 < self.r_min < self.r_max < np.inf):
            raise ValueError(
                f"need 0 < r_min < r_max < inf, got [{self.r_min}, {self.r_max}]"
            )

    def volume(self, d):
        if d == 2:
            return np.pi * (self.r_max**2 - self.r_min**2)
        return 4.0 * np.pi / 3.0 * (self.r_max**3 - self.r_min**3)


@dataclass(frozen=True)
class DispersionLaw:
    d: int
    omega: Expr
    origin_excluded: bool = False
    label: str = "expr"
    spec_string: str = field(default="", compare=False)

    def __post_init__(self):
        if self.d < 2:
            raise LawError(f"dispersion laws need d >= 2, got d={self.d}")
        if self.omega.d != self.d:
            raise LawError(
                f"omega has dimension {self.omega.d}, law declares d={self.d}"
            )

    def jet(self, v):
        """Value, gradient, Hessian at one point; raises on bad points."""
        return exprlang.jet(self.omega, v)

    def value(self, v):
        return exprlang.evaluate(self.omega, v)

    def values(self, X):
        return exprlang.values_batch(self.omega, X)

    def jet1(self, X):
        return exprlang.jet1_batch(self.omega, X)

    def jet2(self, X):
        return exprlang.jet2_batch(self.omega, X)


def omega_jet(law, v):
    """Jet of omega at v; errors at the origin of an origin-excluded law."""
    return law.jet(v)


# ------------------------------------------------------------ built-in laws


def quadratic_law(d=2):
    return DispersionLaw(
        d=d,
        omega=exprlang.parse("dot(v, v)", d),
        origin_excluded=False,
        label="quadratic",
        spec_string="quadratic",
    )


def relativistic_law(d=2):
    return DispersionLaw(
        d=d,
        omega=exprlang.parse("sqrt(1 + dot(v, v))", d),
        origin_excluded=False,
        label="relativistic",
        spec_string="relativistic",
    )


def power_law(C=1.0, alpha=0.5, d=2):
    if not C > 0.0:
        raise LawError(f"power law needs C > 0, got C={C}")
    if not 0.0 < alpha < 1.0:
        raise LawError(f"power law needs 0 < alpha < 1, got alpha={alpha}")
    return DispersionLaw(
        d=d,
        omega=exprlang.parse(f"{C!r}*norm(v)^{alpha!r}", d),
        origin_excluded=True,
        label="power",
        spec_string=f"power:C={C!r},alpha={alpha!r}",
    )


def gravity_law(C=1.0):
    if not C > 0.0:
        raise LawError(f"gravity law needs C > 0, got C={C}")
    return DispersionLaw(
        d=2,
        omega=exprlang.parse(f"{C!r}*norm(v)^0.5", 2),
        origin_excluded=True,
        label="gravity",
        spec_string=f"gravity:C={C!r}",
    )


def rossby_law():
    return DispersionLaw(
        d=2,
        omega=exprlang.parse("v1/(1 + dot(v, v))", 2),
        origin_excluded=False,
        label="rossby",
        spec_string="rossby",
    )


def _only_v1(node):
    if isinstance(node, Comp):
        return node.index == 1
    if isinstance(node, (VecDot, exprlang.VecNorm)):
        return False
    for name in ("a", "b", "y", "x"):
        child = getattr(node, name, None)
        if child is not None and not _only_v1(child):
            return False
    return True


def sheared_law(alpha, beta, h):
    """omega(v) = alpha*h(v1) + beta*v2 on d=2; h is an expression in v1."""
    if isinstance(h, str):
        h = exprlang.parse(h, 2)
    if h.d != 2:
        h = Expr(d=2, root=h.root)
    if not _only_v1(h.root):
        raise LawError("sheared law: h must be a function of v1 only")
    root = Add(Mul(Num(float(alpha)), h.root), Mul(Num(float(beta)), Comp(2)))
    return DispersionLaw(
        d=2,
        omega=Expr(d=2, root=root),
        origin_excluded=False,
        label="sheared",
        spec_string=f"sheared:alpha={float(alpha)!r},beta={float(beta)!r},h={h}",
    )


# ------------------------------------------------------------- mini-grammar

_SINGULAR_SUFFIX = ",singular_origin"


def _parse_params(body, spec, wanted):
    params = {}
    for part in body.split(","):
        if "=" not in part:
            raise LawError(f"bad law parameter {part!r} in {spec!r}")
        key, _, val = part.partition("=")
        key = key.strip()
        if key not in wanted:
            raise LawError(f"unknown parameter {key!r} for law {spec!r}")
        try:
            params[key] = float(val)
        except ValueError:
            raise LawError(f"parameter {key!r} in {spec!r} is not a number")
    missing = [k for k in wanted if k not in params]
    if missing:
        raise LawError(f"law {spec!r} is missing parameters {missing}")
    return params


def parse_law(spec, d=2):
    """Parse the law mini-grammar.

    Forms: quadratic | relativistic | power:C=..,alpha=.. | gravity:C=.. |
    rossby | sheared:alpha=..,beta=..,h=<expr> | expr:<expression>
    [,singular_origin]. In the sheared form h= must come last and takes the
    rest of the string; in the expr form the flag is a literal suffix.
    """
    spec = spec.strip()
    head, sep, body = spec.partition(":")
    head = head.strip()
    if head == "quadratic":
        _no_body(spec, sep)
        return quadratic_law(d)
    if head == "relativistic":
        _no_body(spec, sep)
        return relativistic_law(d)
    if head == "rossby":
        _no_body(spec, sep)
        _need_d2(head, d)
        return rossby_law()
    if head == "power":
        params = _parse_params(body, spec, ("C", "alpha"))
        return power_law(C=params["C"], alpha=params["alpha"], d=d)
    if head == "gravity":
        _need_d2(head, d)
        params = _parse_params(body, spec, ("C",))
        return gravity_law(C=params["C"])
    if head == "sheared":
        _need_d2(head, d)
        marker = "h="
        idx = body.find(marker)
        if idx < 0:
            raise LawError(f"sheared law needs h=<expr> last: {spec!r}")
        h_text = body[idx + len(marker):]
        prefix = body[:idx].rstrip().rstrip(",")
        params = _parse_params(prefix, spec, ("alpha", "beta"))
        try:
            h = exprlang.parse(h_text, 2)
        except ExprParseError as exc:
            raise LawError(f"sheared law h does not parse: {exc}")
        return sheared_law(params["alpha"], params["beta"], h)
    if head == "expr":
        text = body
        singular = False
        if text.endswith(_SINGULAR_SUFFIX):
            text = text[: -len(_SINGULAR_SUFFIX)]
            singular = True
        if not text.strip():
            raise LawError(f"empty expression in law {spec!r}")
        try:
            omega = exprlang.parse(text, d)
        except ExprParseError as exc:
            raise LawError(f"law expression does not parse: {exc}")
        return DispersionLaw(
            d=d,
            omega=omega,
            origin_excluded=singular,
            label="expr",
            spec_string=f"expr:{omega}" + (_SINGULAR_SUFFIX if singular else ""),
        )
    raise LawError(f"unknown law {spec!r}")


def _no_body(spec, sep):
    if sep:
        raise LawError(f"law {spec!r} takes no parameters")


def _need_d2(name, d):
    if d != 2:
        raise LawError(f"law {name!r} is defined for d=2 only, got d={d}")


# --------------------------------------------------- annulus polar quadrature


@dataclass(frozen=True)
class PolarGrid:
    """Tensor quadrature nodes and weights for the annulus."""

    nodes: np.ndarray  # (N, d)
    weights: np.ndarray  # (N,)
    domain: SamplingDomain
    d: int

    def integrate(self, values):
        return float(np.sum(self.weights * values))


def polar_grid(domain, d, n_quad=4096):
    """Gauss-Legendre in radius (and in cos(theta) when d=3), uniform in the
    periodic angle. Node count approximates n_quad."""
    if n_quad < 100:
        raise ValueError(f"n_quad must be >= 100, got {n_quad}")
    if d == 2:
        nr = max(8, int(round(np.sqrt(n_quad))))
        na = nr
        x, wx = np.polynomial.legendre.leggauss(nr)
        r = 0.5 * (domain.r_max - domain.r_min) * x + 0.5 * (domain.r_max + domain.r_min)
        wr = 0.5 * (domain.r_max - domain.r_min) * wx * r
        theta = 2.0 * np.pi * np.arange(na) / na
        wt = np.full(na, 2.0 * np.pi / na)
        nodes = np.empty((nr * na, 2))
        nodes[:, 0] = np.outer(r, np.cos(theta)).ravel()
        nodes[:, 1] = np.outer(r, np.sin(theta)).ravel()
        weights = np.outer(wr, wt).ravel()
    elif d == 3:
        m = max(6, int(round(n_quad ** (1.0 / 3.0))))
        x, wx = np.polynomial.legendre.leggauss(m)
        r = 0.5 * (domain.r_max - domain.r_min) * x + 0.5 * (domain.r_max + domain.r_min)
        wr = 0.5 * (domain.r_max - domain.r_min) * wx * r * r
        u, wu = np.polynomial.legendre.leggauss(m)  # u = cos(theta)
        phi = 2.0 * np.pi * np.arange(m) / m
        wphi = 2.0 * np.pi / m
        s = np.sqrt(1.0 - u * u)
        nodes = np.empty((m * m * m, 3))
        nodes[:, 0] = (r[:, None, None] * (s * np.cos(phi)[:, None]).T[None, :, :]).ravel()
        nodes[:, 1] = (r[:, None, None] * (s * np.sin(phi)[:, None]).T[None, :, :]).ravel()
        nodes[:, 2] = (r[:, None, None] * u[None, :, None] * np.ones(m)[None, None, :]).ravel()
        weights = (wr[:, None, None] * wu[None, :, None] * np.full(m, wphi)[None, None, :]).ravel()
    else:
        raise ValueError(f"polar_grid supports d in (2, 3), got {d}")
    return PolarGrid(nodes=nodes, weights=weights, domain=domain, d=d)


def independence_margin(law, i, j, domain=None, n_quad=4096):
    """Smallest eigenvalue of the normalized Gram matrix of {1, d_i omega,
    d_j omega} in L2 of the annulus; near 0 means the independence
    hypothesis fails on this compact."""
    if i == j:
        raise ValueError(f"need i != j, got i=j={i}")
    if not (1 <= i <= law.d and 1 <= j <= law.d):
        raise ValueError(f"indices out of range for d={law.d}: i={i}, j={j}")
    if domain is None:
        domain = SamplingDomain()
    grid = polar_grid(domain, law.d, n_quad)
    _, grads, err = law.jet1(grid.nodes)
    if err.any():
        raise ValueError(
            f"omega jets failed on {int((err != 0).sum())} quadrature nodes"
        )
    F = np.stack(
        [np.ones(len(grid.nodes)), grads[:, i - 1], grads[:, j - 1]], axis=0
    )
    norms = np.sqrt((F * F) @ grid.weights)
    scale = np.divide(1.0, norms, out=np.zeros(3), where=norms > 0.0)
    Fn = F * scale[:, None]
    G = (Fn * grid.weights) @ Fn.T
    G = 0.5 * (G + G.T)
    return float(np.linalg.eigvalsh(G)[0])
