"""Residual scans, coefficient recovery and degeneracy classification."""

import numpy as np
import pytest

from reslab import exprlang
from reslab.dispersion import (
    SamplingDomain,
    gravity_law,
    parse_law,
    power_law,
    quadratic_law,
    relativistic_law,
    rossby_law,
    sheared_law,
)
from reslab.invariants import (
    DegeneracyError,
    cramer_coefficients,
    cross_product_residual,
    default_alpha_family,
    default_beta,
    degeneracy_report,
    fit_equilibrium,
    four_wave_residual,
    level_set_constancy,
    mu_profile,
    quadratic_null_margin,
    three_wave_residual,
)
from reslab.resonance import sample_pairs, sample_quadruples, sample_triples

LAWS_2D = [
    quadratic_law(2),
    relativistic_law(2),
    power_law(1.0, 0.5, 2),
    gravity_law(1.0),
]


def _family_member(law, a, b, c):
    terms = [repr(float(a))]
    terms += [f"({repr(float(bk))}) * v{k + 1}" for k, bk in enumerate(b)]
    omega = str(law.omega)
    terms.append(f"({repr(float(c))}) * ({omega})")
    return exprlang.parse(" + ".join(terms), law.d)


class TestFourWaveResidual:
    def test_equilibrium_family_passes(self):
        rng = np.random.default_rng(41)
        for law in LAWS_2D:
            qs = sample_quadruples(law, n=600, seed=42)
            for _ in range(3):
                a, c = rng.normal(size=2)
                b = rng.normal(size=law.d)
                rep = four_wave_residual(_family_member(law, a, b, c), qs)
                assert rep.verdict == "pass", (law.label, rep.rms)
                assert rep.rms <= 1e-8

    def test_family_rms_bounded_by_newton_tolerance(self):
        # the only residual source is the Phi tolerance of the Newton solve
        law = relativistic_law(2)
        qs = sample_quadruples(law, n=600, seed=43, newton_tol=1e-12)
        g = _family_member(law, 0.4, np.array([1.2, -0.7]), 2.0)
        rep = four_wave_residual(g, qs)
        assert rep.rms <= 10.0 * 1e-12

    def test_non_invariants_fail(self):
        qs = sample_quadruples(quadratic_law(2), n=600, seed=44)
        for src in ("v1^2", "exp(v1)", "v1^3"):
            rep = four_wave_residual(exprlang.parse(src, 2), qs)
            assert rep.verdict == "fail", src
            assert rep.rms >= 1e-2, src
        # sqrt(omega) violates the sum only through concavity; the residual
        # lands between the pass and fail thresholds
        rep = four_wave_residual(exprlang.parse("norm(v)", 2), qs)
        assert rep.verdict == "inconclusive"

    def test_scale_invariance(self):
        qs = sample_quadruples(quadratic_law(2), n=400, seed=45)
        g1 = exprlang.parse("v1^2 + 0.3 * v2", 2)
        g2 = exprlang.parse("17.0 * (v1^2 + 0.3 * v2)", 2)
        r1 = four_wave_residual(g1, qs)
        r2 = four_wave_residual(g2, qs)
        np.testing.assert_allclose(r1.rms, r2.rms, rtol=1e-12)
        np.testing.assert_allclose(r1.max, r2.max, rtol=1e-12)

    def test_trivial_manifold_gives_vacuous_pass(self):
        law = sheared_law(1.0, 1.0, "exp(v1)")
        qs = sample_quadruples(law, n=200, seed=46)
        rep = four_wave_residual(exprlang.parse("sin(v1 * v2)", 2), qs)
        assert rep.verdict == "pass"
        assert rep.vacuous
        assert rep.n_samples == 0

    def test_callable_candidates_accepted(self):
        qs = sample_quadruples(quadratic_law(2), n=300, seed=47)
        rep = four_wave_residual(lambda X: (X**2).sum(axis=1), qs)
        assert rep.rms <= 1e-8


class TestThreeWaveResidual:
    def test_momentum_energy_family_passes(self):
        law = quadratic_law(2)
        ts = sample_triples(law, n=500, seed=48)
        g = exprlang.parse("0.7 * v1 - 0.2 * v2 + 1.5 * dot(v, v)", 2)
        rep = three_wave_residual(g, ts)
        assert rep.verdict == "pass"
        assert rep.rms <= 1e-8

    def test_constants_are_not_three_wave_invariants(self):
        # g = 1: residual is 1 - 1 - 1 = -1 against scale |1|+|1|+|1|
        ts = sample_triples(quadratic_law(2), n=500, seed=49)
        rep = three_wave_residual(exprlang.parse("1", 2), ts)
        assert rep.verdict == "fail"
        np.testing.assert_allclose(rep.rms, 1.0 / 3.0, rtol=1e-12)
        np.testing.assert_allclose(rep.max, 1.0 / 3.0, rtol=1e-12)

    def test_generic_candidate_fails(self):
        ts = sample_triples(rossby_law(), n=500, seed=50)
        rep = three_wave_residual(exprlang.parse("v1^2", 2), ts)
        assert rep.verdict == "fail"
        assert rep.rms >= 1e-2


class TestCrossProduct:
    def test_family_aligns(self):
        for law in (quadratic_law(2), relativistic_law(3)):
            pairs = sample_pairs(law, n=300, seed=51)
            b = np.arange(1.0, law.d + 1.0)
            g = _family_member(law, 0.3, b, -1.2)
            rep = cross_product_residual(g, law, pairs)
            assert rep.rms <= 1e-10, law.label

    def test_non_member_misaligns(self):
        law = quadratic_law(2)
        pairs = sample_pairs(law, n=300, seed=52)
        rep = cross_product_residual(exprlang.parse("v1^2", 2), law, pairs)
        assert rep.rms > 1e-3

    def test_extra_invariant_is_not_in_the_four_wave_family(self):
        # the rotating-flow candidate solves the three-wave identity only;
        # its gradient is not pointwise parallel to the law's
        law = rossby_law()
        s3 = repr(float(np.sqrt(3.0)))
        g = exprlang.parse(
            f"atan((v1 * {s3} + v2) / dot(v, v))"
            f" - atan((-(v1 * {s3}) + v2) / dot(v, v))",
            2,
        )
        pairs = sample_pairs(law, n=400, seed=53)
        rep = cross_product_residual(g, law, pairs)
        assert rep.rms > 1e-3


class TestCramer:
    @pytest.mark.parametrize("law", [quadratic_law(2), relativistic_law(2)])
    def test_recovers_family_coefficients(self, law):
        rng = np.random.default_rng(54)
        for _ in range(3):
            a, c = rng.normal(size=2)
            b = rng.normal(size=2)
            g = _family_member(law, a, b, c)
            rep = cramer_coefficients(law, g)
            np.testing.assert_allclose(rep.c[1], c, atol=1e-5)  # c5
            np.testing.assert_allclose(rep.c[5], c, atol=1e-5)  # c9
            assert abs(rep.c[2]) <= 1e-6  # c6
            assert abs(rep.c[4]) <= 1e-6  # c8
            np.testing.assert_allclose(rep.c[0], b[0], atol=1e-5)  # c4
            np.testing.assert_allclose(rep.c[3], b[1], atol=1e-5)  # c7
            assert rep.defects["c5_minus_c9"] <= 1e-6
            assert rep.identity_residual <= 1e-8

    def test_constant_candidate_gives_null_coefficients(self):
        rep = cramer_coefficients(quadratic_law(2), exprlang.parse("3.25", 2))
        assert np.max(np.abs(rep.c)) <= 1e-8

    def test_identity_residual_flags_non_members(self):
        rep = cramer_coefficients(quadratic_law(2), exprlang.parse("v1^3", 2))
        assert rep.identity_residual > 1e-2

    def test_dependent_gradient_law_rejected(self):
        with pytest.raises(DegeneracyError):
            cramer_coefficients(parse_law("expr:v1", 2), exprlang.parse("v1", 2))

    def test_three_dimensional_recovery(self):
        # the tensor grid needs more nodes per axis in d=3
        law = relativistic_law(3)
        g = _family_member(law, 0.5, np.array([1.0, -2.0, 0.5]), 1.5)
        rep = cramer_coefficients(law, g, n_quad=110000, i=1, j=3)
        np.testing.assert_allclose(rep.c[1], 1.5, atol=1e-5)
        np.testing.assert_allclose(rep.c[5], 1.5, atol=1e-5)
        np.testing.assert_allclose(rep.c[0], 1.0, atol=1e-5)
        np.testing.assert_allclose(rep.c[3], 0.5, atol=1e-5)


class TestFit:
    def test_exact_recovery(self):
        g = exprlang.parse("2 + 3*v1 - v2 + 0.5*sqrt(1 + dot(v, v))", 2)
        fit = fit_equilibrium(g, relativistic_law(2))
        np.testing.assert_allclose(fit.a, 2.0, atol=1e-10)
        np.testing.assert_allclose(fit.b, [3.0, -1.0], atol=1e-10)
        np.testing.assert_allclose(fit.c, 0.5, atol=1e-10)
        assert fit.value_residual_rms <= 1e-10
        assert fit.grad_residual_rms <= 1e-10

    def test_omega_itself(self):
        fit = fit_equilibrium(exprlang.parse("dot(v, v)", 2), quadratic_law(2))
        np.testing.assert_allclose([fit.a, fit.c], [0.0, 1.0], atol=1e-10)
        np.testing.assert_allclose(fit.b, [0.0, 0.0], atol=1e-10)

    def test_idempotence(self):
        law = quadratic_law(2)
        fit = fit_equilibrium(exprlang.parse("exp(v1)", 2), law)
        refit = fit_equilibrium(_family_member(law, fit.a, fit.b, fit.c), law)
        np.testing.assert_allclose(refit.a, fit.a, atol=1e-10)
        np.testing.assert_allclose(refit.b, fit.b, atol=1e-10)
        np.testing.assert_allclose(refit.c, fit.c, atol=1e-10)

    def test_non_member_reports_large_residual(self):
        fit = fit_equilibrium(exprlang.parse("exp(v1)", 2), quadratic_law(2))
        assert fit.value_residual_rms > 1e-2

    def test_agrees_with_cramer_on_members(self):
        law = relativistic_law(2)
        g = _family_member(law, 0.2, np.array([0.8, -0.5]), 1.7)
        fit = fit_equilibrium(g, law)
        rep = cramer_coefficients(law, g)
        np.testing.assert_allclose(rep.c[1], fit.c, atol=1e-5)

    def test_degenerate_basis_rejected(self):
        with pytest.raises(DegeneracyError):
            fit_equilibrium(exprlang.parse("v1", 2), parse_law("expr:v1", 2))


class TestNullMargin:
    def test_generic_law_has_positive_margin(self):
        law = quadratic_law(2)
        pairs = sample_pairs(law, n=300, seed=55)
        assert quadratic_null_margin(law, 1, 2, pairs) > 1e-3

    def test_flat_law_has_no_usable_rows(self):
        law = parse_law("expr:v1", 2)
        rng = np.random.default_rng(56)
        V = rng.uniform(-1.5, 1.5, size=(100, 2))
        VS = rng.uniform(-1.5, 1.5, size=(100, 2))
        with pytest.raises(DegeneracyError):
            quadratic_null_margin(law, 1, 2, (V, VS))

    def test_sheared_law_margin_collapses(self):
        law = sheared_law(1.0, 1.0, "v1^3")
        rng = np.random.default_rng(57)
        V = rng.uniform(-1.5, 1.5, size=(200, 2))
        VS = rng.uniform(-1.5, 1.5, size=(200, 2))
        assert quadratic_null_margin(law, 1, 2, (V, VS)) <= 1e-8


class TestLevelSets:
    def test_family_member_is_level_constant(self):
        law = quadratic_law(2)
        g = exprlang.parse("1.3*v1 - 0.4*v2 + 0.7*dot(v, v)", 2)
        levels = np.array([0.0, 1.0, 2.0, 3.5])
        rep = level_set_constancy(g, law, levels, n_per_level=150, seed=58)
        assert rep.verdict == "pass"
        assert rep.max_spread <= 1e-8
        assert rep.mu[0] == 0.0  # level 0 pins the profile at the origin

    def test_mu_profile_recovers_slope(self):
        law = quadratic_law(2)
        g = exprlang.parse("1.3*v1 - 0.4*v2 + 0.7*dot(v, v)", 2)
        prof = mu_profile(g, law, [0.0, 1.0, 2.0, 3.5], n_per_level=150, seed=59)
        np.testing.assert_allclose(prof.c_fit, 0.7, atol=1e-8)
        assert prof.linearity_residual <= 1e-8

    def test_nonlinear_profile_is_constant_but_not_linear(self):
        law = quadratic_law(2)
        g = exprlang.parse("0.5*v1 + dot(v, v)^2", 2)
        prof = mu_profile(g, law, [0.5, 1.0, 2.0, 3.0], n_per_level=150, seed=60)
        assert prof.constancy.verdict == "pass"
        assert prof.linearity_residual >= 1e-2
        # and the same candidate fails the direct three-wave scan
        ts = sample_triples(law, n=400, seed=61)
        assert three_wave_residual(g, ts).verdict == "fail"

    def test_angular_candidate_is_not_level_constant(self):
        law = quadratic_law(2)
        rep = level_set_constancy(
            exprlang.parse("v1^2", 2), law, [1.0, 2.0], n_per_level=150, seed=62
        )
        assert rep.verdict == "fail"
        assert rep.max_spread > 0.1

    def test_kinked_candidate_rejected(self):
        law = quadratic_law(2)
        with pytest.raises(exprlang.EvaluationError):
            level_set_constancy(
                exprlang.parse("norm(v)", 2), law, [1.0], n_per_level=50, seed=63
            )


class TestDegeneracyReport:
    def test_generic_laws_are_nondegenerate(self):
        for law in (quadratic_law(2), relativistic_law(2), rossby_law(),
                    gravity_law(1.0)):
            rep = degeneracy_report(law, n=400, seed=64)
            assert rep.verdict == "nondegenerate", law.label

    def test_flat_law_flagged(self):
        rep = degeneracy_report(parse_law("expr:v1", 2), n=400, seed=65)
        assert rep.verdict == "degenerate:dependent-gradients"
        assert max(rep.margins.values()) <= 1e-10

    def test_concave_shear_flagged(self):
        rep = degeneracy_report(sheared_law(1.0, 1.0, "exp(v1)"), n=400, seed=66)
        assert rep.verdict == "degenerate:trivial-manifold"

    def test_three_dimensional_generic_law(self):
        rep = degeneracy_report(quadratic_law(3), n=400, seed=67)
        assert rep.verdict == "nondegenerate"
        assert len(rep.margins) == 3


class TestDefaults:
    def test_beta_vanishes_at_annulus_boundary(self):
        dom = SamplingDomain(0.5, 2.0)
        beta = default_beta(dom, 2)
        mid = exprlang.evaluate(beta, (1.25, 0.0))
        assert mid > 0.1
        near_edge = exprlang.evaluate(beta, (1.999, 0.0))
        assert near_edge < 1e-3

    def test_alpha_family_has_rank_six(self):
        fam = default_alpha_family(SamplingDomain(0.5, 2.0), 2)
        assert len(fam) == 6
        rng = np.random.default_rng(68)
        X = rng.uniform(0.6, 1.9, size=(40, 1)) * np.stack(
            [np.cos(t := rng.uniform(0, 2 * np.pi, 40)), np.sin(t)], axis=1
        )
        vals = np.stack([exprlang.values_batch(a, X)[0] for a in fam])
        assert np.linalg.matrix_rank(vals) == 6
