"""Built-in dispersion laws, the law mini-grammar and independence margins."""

import numpy as np
import pytest

from reslab import exprlang
from reslab.dispersion import (
    DispersionLaw,
    LawError,
    SamplingDomain,
    gravity_law,
    independence_margin,
    omega_jet,
    parse_law,
    polar_grid,
    power_law,
    quadratic_law,
    relativistic_law,
    rossby_law,
    sheared_law,
)


def _closed_forms(d):
    laws = [
        (
            quadratic_law(d),
            lambda v: v @ v,
            lambda v: 2.0 * v,
            lambda v: 2.0 * np.eye(d),
        ),
        (
            relativistic_law(d),
            lambda v: np.sqrt(1.0 + v @ v),
            lambda v: v / np.sqrt(1.0 + v @ v),
            lambda v: np.eye(d) / np.sqrt(1 + v @ v)
            - np.outer(v, v) / (1 + v @ v) ** 1.5,
        ),
        (
            power_law(C=1.3, alpha=0.5, d=d),
            lambda v: 1.3 * (v @ v) ** 0.25,
            lambda v: 1.3 * 0.5 * (v @ v) ** -0.75 * v,
            None,
        ),
    ]
    if d == 2:
        laws.append(
            (
                gravity_law(C=2.0),
                lambda v: 2.0 * (v @ v) ** 0.25,
                lambda v: (v @ v) ** -0.75 * v,
                None,
            )
        )
        laws.append(
            (
                rossby_law(),
                lambda v: v[0] / (1.0 + v @ v),
                lambda v: (np.array([1.0 + v @ v, 0.0]) - 2.0 * v[0] * v)
                / (1.0 + v @ v) ** 2,
                None,
            )
        )
        laws.append(
            (
                sheared_law(1.5, 2.0, "v1^3"),
                lambda v: 1.5 * v[0] ** 3 + 2.0 * v[1],
                lambda v: np.array([4.5 * v[0] ** 2, 2.0]),
                lambda v: np.array([[9.0 * v[0], 0.0], [0.0, 0.0]]),
            )
        )
    return laws


@pytest.mark.parametrize("d", [2, 3])
def test_builtin_laws_match_closed_forms(d):
    rng = np.random.default_rng(21)
    for law, f, grad_f, hess_f in _closed_forms(d):
        for _ in range(8):
            v = rng.uniform(0.3, 1.8, size=d) * rng.choice([-1.0, 1.0], size=d)
            j = omega_jet(law, v)
            np.testing.assert_allclose(j.value, f(v), rtol=1e-13, err_msg=law.label)
            np.testing.assert_allclose(
                j.gradient, grad_f(v), rtol=1e-12, atol=1e-13, err_msg=law.label
            )
            if hess_f is not None:
                np.testing.assert_allclose(
                    j.hessian, hess_f(v), rtol=1e-11, atol=1e-12, err_msg=law.label
                )


def test_quadratic_jet_at_point():
    j = omega_jet(quadratic_law(2), np.array([1.0, 2.0]))
    assert j.value == 5.0
    np.testing.assert_array_equal(j.gradient, [2.0, 4.0])
    np.testing.assert_array_equal(j.hessian, 2.0 * np.eye(2))


def test_relativistic_origin_is_critical():
    j = omega_jet(relativistic_law(3), np.zeros(3))
    assert j.value == 1.0
    np.testing.assert_array_equal(j.gradient, np.zeros(3))
    np.testing.assert_allclose(j.hessian, np.eye(3), atol=1e-15)


def test_singular_laws_error_at_origin():
    for law in (power_law(1.0, 0.5, 2), gravity_law(1.0)):
        assert law.origin_excluded
        with pytest.raises(exprlang.EvaluationError):
            omega_jet(law, np.zeros(2))


def test_law_grammar_round_trip():
    cases = {
        "quadratic": "quadratic",
        "relativistic": "relativistic",
        "power:C=2.0,alpha=0.75": "power",
        "gravity:C=1.5": "gravity",
        "rossby": "rossby",
        "sheared:alpha=1,beta=2,h=exp(v1)": "sheared",
        "expr:dot(v,v) + v1": "expr",
    }
    for spec, label in cases.items():
        law = parse_law(spec, 2)
        assert law.label == label, spec
        assert law.d == 2

    law = parse_law("expr:norm(v),singular_origin", 2)
    assert law.origin_excluded


def test_law_grammar_rejections():
    bad = [
        "nosuchlaw",
        "power:C=1",              # missing alpha
        "power:C=1,alpha=1.5",    # alpha out of (0, 1)
        "power:C=0,alpha=0.5",    # C must be positive
        "gravity:C=1,extra=2",
        "sheared:alpha=1,beta=1,h=v2",  # h may only use v1
        "expr:v1 + * v2",
        "quadratic:x=1",
    ]
    for spec in bad:
        with pytest.raises((LawError, exprlang.ExprParseError)):
            parse_law(spec, 2)
    # planar-only laws
    for spec in ("gravity:C=1", "rossby", "sheared:alpha=1,beta=1,h=v1^3"):
        with pytest.raises(LawError):
            parse_law(spec, 3)


def test_law_dimension_consistency():
    with pytest.raises(LawError):
        DispersionLaw(d=3, omega=exprlang.parse("dot(v,v)", 2))
    with pytest.raises(LawError):
        DispersionLaw(d=1, omega=exprlang.parse("v1^2", 1))


def test_domain_validation_and_volume():
    with pytest.raises(ValueError):
        SamplingDomain(2.0, 1.0)
    with pytest.raises(ValueError):
        SamplingDomain(0.0, 1.0)
    dom = SamplingDomain(0.5, 2.0)
    np.testing.assert_allclose(dom.volume(2), np.pi * (4.0 - 0.25), rtol=1e-15)
    np.testing.assert_allclose(
        dom.volume(3), 4.0 * np.pi / 3.0 * (8.0 - 0.125), rtol=1e-15
    )


@pytest.mark.parametrize("d", [2, 3])
def test_polar_grid_integrates_polynomials(d):
    dom = SamplingDomain(0.5, 2.0)
    grid = polar_grid(dom, d, n_quad=4096)
    np.testing.assert_allclose(grid.weights.sum(), dom.volume(d), rtol=1e-10)
    # odd moments vanish by symmetry of the angular rule
    for k in range(d):
        assert abs(grid.nodes[:, k] @ grid.weights) < 1e-10
    # radial moment: int |v|^2 over the annulus
    r2 = (grid.nodes**2).sum(axis=1) @ grid.weights
    if d == 2:
        exact = 2.0 * np.pi * (2.0**4 - 0.5**4) / 4.0
    else:
        exact = 4.0 * np.pi * (2.0**5 - 0.5**5) / 5.0
    np.testing.assert_allclose(r2, exact, rtol=1e-10)


def test_margin_zero_for_linear_law():
    law = parse_law("expr:v1", 2)
    assert independence_margin(law, 1, 2) <= 1e-12


def test_margin_near_zero_for_sheared_cubic():
    # second partial is the constant beta, dependent with the constant row
    law = sheared_law(1.0, 1.0, "v1^3")
    assert independence_margin(law, 1, 2) <= 1e-10


def test_margin_positive_for_generic_laws():
    for law in (quadratic_law(2), relativistic_law(2), rossby_law(), gravity_law()):
        assert independence_margin(law, 1, 2) > 1e-3, law.label


def test_margin_pairs_in_three_dimensions():
    # for an isotropic law at least two of the three pairs must be independent
    law = quadratic_law(3)
    margins = [independence_margin(law, i, j) for i, j in ((1, 2), (1, 3), (2, 3))]
    assert sum(m > 1e-8 for m in margins) >= 2


def test_margin_index_validation():
    law = quadratic_law(2)
    with pytest.raises(ValueError):
        independence_margin(law, 1, 1)
    with pytest.raises(ValueError):
        independence_margin(law, 0, 1)
    with pytest.raises(ValueError):
        independence_margin(law, 1, 3)
