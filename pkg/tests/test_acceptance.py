"""Acceptance gate: nine end-to-end criteria, one test and one printed
PASS/FAIL line each. Budgets and tolerances are asserted, not advisory."""

import json
import time

import numpy as np
import pytest

from reslab import (
    cramer_coefficients,
    degeneracy_report,
    entropy_dissipation_four,
    entropy_dissipation_three,
    fit_equilibrium,
    four_wave_residual,
    independence_margin,
    level_set_constancy,
    mu_profile,
    parse,
    parse_law,
    sample_quadruples,
    sample_triples,
    three_wave_residual,
)
from reslab.cli import main as cli_main
from reslab.exprlang import finite_diff_gradient, jet1_batch

_T0 = time.time()


def _announce(capsys, label, ok, detail):
    with capsys.disabled():
        print(f"\n{label}: {'PASS' if ok else 'FAIL'} ({detail})")


def _check(checks, ok, msg):
    checks.append((bool(ok), msg))


def _fail_lines(checks):
    return "; ".join(m for ok, m in checks if not ok)


def _member_text(law, a, b, c):
    terms = [repr(float(a))]
    for k, bk in enumerate(b):
        terms.append(f"({repr(float(bk))}) * v{k + 1}")
    terms.append(f"({repr(float(c))}) * ({law.omega})")
    return " + ".join(terms)


def _member(law, a, b, c):
    return parse(_member_text(law, a, b, c), law.d)


class TestAcceptance:
    def test_c1_equilibrium_family_invariance(self, capsys):
        t0 = time.time()
        checks = []
        configs = [
            ("quadratic", 2), ("relativistic", 2),
            ("power:alpha=0.5,C=1", 2), ("gravity:C=1", 2),
            ("quadratic", 3), ("relativistic", 3),
        ]
        worst = 0.0
        for spec, d in configs:
            law = parse_law(spec, d)
            t_law = time.time()
            qs = sample_quadruples(law, n=10_000, seed=101)
            rng = np.random.default_rng(11)
            for _ in range(5):
                a = rng.uniform(-2.0, 2.0)
                b = rng.uniform(-1.5, 1.5, size=d)
                c = rng.uniform(-2.0, 2.0)
                rep = four_wave_residual(_member(law, a, b, c), qs)
                worst = max(worst, rep.rms)
                _check(checks, rep.rms <= 1e-8,
                       f"{spec} d={d}: rms {rep.rms:.2e} > 1e-8")
            dt_law = time.time() - t_law
            _check(checks, dt_law <= 10.0,
                   f"{spec} d={d}: {dt_law:.1f}s > 10s")
        ok = all(c for c, _ in checks)
        _announce(capsys, "criterion 1 (equilibrium family invariance)", ok,
                  f"worst rms {worst:.2e} over 6 laws x 5 members, "
                  f"{time.time() - t0:.1f}s")
        assert ok, _fail_lines(checks)

    def test_c2_chart_matches_sphere_oracle(self, capsys):
        t0 = time.time()
        law = parse_law("quadratic", 2)
        qs = sample_quadruples(law, n=1000, seed=202)
        center = 0.5 * (qs.v + qs.vstar)
        radius = 0.5 * np.linalg.norm(qs.v - qs.vstar, axis=1)
        off = qs.vp - center
        nhat = off / np.linalg.norm(off, axis=1, keepdims=True)
        on_sphere = center + radius[:, None] * nhat
        opposite = center - radius[:, None] * nhat
        direct = np.maximum(
            np.abs(qs.vp - on_sphere).max(axis=1),
            np.abs(qs.vpstar - opposite).max(axis=1),
        )
        swapped = np.maximum(
            np.abs(qs.vp - opposite).max(axis=1),
            np.abs(qs.vpstar - on_sphere).max(axis=1),
        )
        err = np.minimum(direct, swapped).max()
        dt = time.time() - t0
        checks = []
        _check(checks, err <= 1e-10, f"oracle mismatch {err:.2e} > 1e-10")
        _check(checks, dt <= 2.0, f"{dt:.1f}s > 2s")
        ok = all(c for c, _ in checks)
        _announce(capsys, "criterion 2 (chart vs sphere oracle)", ok,
                  f"max deviation {err:.2e} on 1000 samples, {dt:.2f}s")
        assert ok, _fail_lines(checks)

    def test_c3_coefficient_recovery(self, capsys):
        t0 = time.time()
        checks = []
        worst_c = 0.0
        worst_fit = 0.0
        rng = np.random.default_rng(33)
        for spec in ("quadratic", "relativistic"):
            law = parse_law(spec, 2)
            for _ in range(3):
                a = rng.uniform(-1.5, 1.5)
                b = rng.uniform(-1.0, 1.0, size=2)
                c = rng.uniform(-1.5, 1.5)
                g = _member(law, a, b, c)
                rep = cramer_coefficients(law, g)
                e5 = abs(rep.c[1] - c)
                e9 = abs(rep.c[5] - c)
                worst_c = max(worst_c, e5, e9)
                _check(checks, e5 <= 1e-5 and e9 <= 1e-5,
                       f"{spec}: c5/c9 error {max(e5, e9):.2e} > 1e-5")
                _check(checks, abs(rep.c[2]) <= 1e-6 and abs(rep.c[4]) <= 1e-6,
                       f"{spec}: cross terms "
                       f"{max(abs(rep.c[2]), abs(rep.c[4])):.2e} > 1e-6")
                fit = fit_equilibrium(g, law)
                errs = [abs(fit.a - a), abs(fit.c - c),
                        float(np.abs(fit.b - b).max())]
                worst_fit = max(worst_fit, *errs)
                _check(checks, max(errs) <= 1e-8,
                       f"{spec}: fit error {max(errs):.2e} > 1e-8")
        dt = time.time() - t0
        _check(checks, dt <= 30.0, f"{dt:.1f}s > 30s")
        ok = all(c for c, _ in checks)
        _announce(capsys, "criterion 3 (coefficient recovery)", ok,
                  f"worst cramer {worst_c:.2e}, worst fit {worst_fit:.2e}, "
                  f"{dt:.1f}s")
        assert ok, _fail_lines(checks)

    def test_c4_degeneracy_detection(self, capsys):
        t0 = time.time()
        checks = []
        sheared = parse_law("sheared:alpha=1,beta=1,h=exp(v1)", 2)
        rep = degeneracy_report(sheared, seed=44)
        _check(checks, rep.verdict == "degenerate:trivial-manifold",
               f"sheared verdict {rep.verdict}")
        qs = sample_quadruples(sheared, n=2000, seed=44)
        res = four_wave_residual(parse("sin(v1 * v2)", 2), qs)
        _check(checks, res.verdict == "pass",
               f"arbitrary g on trivial manifold: {res.verdict}")
        flat = parse_law("expr:v1", 2)
        drep = degeneracy_report(flat, seed=44)
        _check(checks, drep.verdict == "degenerate:dependent-gradients",
               f"flat law verdict {drep.verdict}")
        margin = independence_margin(flat, 1, 2)
        worst_margin = max([margin] + [float(m) for m in drep.margins.values()])
        _check(checks, worst_margin <= 1e-10,
               f"independence margin {worst_margin:.2e} > 1e-10")
        dt = time.time() - t0
        _check(checks, dt <= 10.0, f"{dt:.1f}s > 10s")
        ok = all(c for c, _ in checks)
        _announce(capsys, "criterion 4 (degeneracy detection)", ok,
                  f"sheared {rep.verdict}, flat margin {worst_margin:.2e}, "
                  f"{dt:.1f}s")
        assert ok, _fail_lines(checks)

    def test_c5_rossby_extra_invariant(self, capsys):
        t0 = time.time()
        law = parse_law("rossby", 2)
        ts = sample_triples(law, n=1000, seed=55)
        s3 = repr(float(np.sqrt(3.0)))
        extra = parse(
            f"atan((v1 * {s3} + v2) / dot(v, v))"
            f" - atan((-(v1 * {s3}) + v2) / dot(v, v))", 2)
        rep = three_wave_residual(extra, ts)
        generic = three_wave_residual(parse("v1^2", 2), ts)
        dt = time.time() - t0
        checks = []
        _check(checks, rep.rms <= 1e-6,
               f"extra invariant rms {rep.rms:.2e} > 1e-6")
        _check(checks, generic.rms >= 1e-2,
               f"generic rms {generic.rms:.2e} < 1e-2")
        _check(checks, dt <= 10.0, f"{dt:.1f}s > 10s")
        ok = all(c for c, _ in checks)
        _announce(capsys, "criterion 5 (rossby extra invariant)", ok,
                  f"extra rms {rep.rms:.2e}, generic rms {generic.rms:.2e}, "
                  f"{dt:.1f}s")
        assert ok, _fail_lines(checks)

    def test_c6_halfline_law_angular_profiles(self, capsys):
        t0 = time.time()
        law = parse_law("expr:norm(v),singular_origin", 2)
        ts = sample_triples(law, n=1000, seed=66)
        # r*(2 + cos theta) expressed in cartesian components
        rep = three_wave_residual(parse("2*norm(v) + v1", 2), ts)
        cross = ts.vp[:, 0] * ts.vpp[:, 1] - ts.vp[:, 1] * ts.vpp[:, 0]
        collinear = float(np.abs(cross).max())
        dt = time.time() - t0
        checks = []
        _check(checks, ts.vp.shape[0] == 1000, f"{ts.vp.shape[0]} triples")
        _check(checks, collinear <= 1e-8,
               f"triples not collinear: {collinear:.2e}")
        _check(checks, rep.rms <= 1e-8, f"rms {rep.rms:.2e} > 1e-8")
        _check(checks, dt <= 5.0, f"{dt:.1f}s > 5s")
        ok = all(c for c, _ in checks)
        _announce(capsys, "criterion 6 (collinear angular-profile invariant)",
                  ok, f"rms {rep.rms:.2e}, collinearity {collinear:.2e}, "
                  f"{dt:.1f}s")
        assert ok, _fail_lines(checks)

    def test_c7_entropy_dissipation_sign_and_equality(self, capsys):
        t0 = time.time()
        checks = []
        law = parse_law("quadratic", 2)
        rel = parse_law("relativistic", 2)
        rng = np.random.default_rng(77)
        worst_neg = 0.0
        for k in range(20):
            if k % 2 == 0:
                u = rng.uniform(-0.8, 0.8, size=2)
                s = rng.uniform(0.2, 1.0)
                f = parse(
                    f"exp(({repr(float(u[0]))})*v1 + ({repr(float(u[1]))})*v2"
                    f" - ({repr(float(s))})*dot(v, v))", 2)
            else:
                a0 = rng.uniform(0.5, 2.0)
                a1 = rng.uniform(0.2, 1.5)
                sh = rng.uniform(-0.5, 0.5)
                f = parse(
                    f"1 / ({repr(float(a0))} + ({repr(float(a1))})"
                    f"*(v1 - ({repr(float(sh))}))^2 + 0.3*v2^2)", 2)
            est = entropy_dissipation_four(f, law, n=1200, seed=700 + k)
            worst_neg = min(worst_neg, est.value / max(est.scale, 1e-300))
            _check(checks, est.n_samples > 0 and not est.vacuous,
                   f"four-wave f#{k}: vacuous")
            _check(checks, est.value >= -1e-14 * est.scale,
                   f"four-wave f#{k}: value {est.value:.2e} < 0")
        eq_cases = [
            (law, 1.0, (0.0, 0.0), 1.0),
            (law, 0.8, (0.04, -0.03), 0.5),
            (law, 1.5, (-0.05, 0.02), 1.2),
            (rel, 1.0, (0.03, 0.05), 0.7),
            (rel, 2.0, (0.0, -0.04), 0.4),
        ]
        for idx, (lw, a, b, c) in enumerate(eq_cases):
            f = parse(f"1 / ({_member_text(lw, a, b, c)})", 2)
            est = entropy_dissipation_four(f, lw, n=2000, seed=710 + idx)
            _check(checks, est.n_samples > 0 and not est.vacuous,
                   f"four-wave equilibrium #{idx}: vacuous")
            _check(checks, est.verdict == "zero",
                   f"four-wave equilibrium #{idx}: verdict {est.verdict}")
            _check(checks, abs(est.value) <= est.tol_zero,
                   f"four-wave equilibrium #{idx}: |D| {abs(est.value):.2e}"
                   f" > tol {est.tol_zero:.2e}")
        for k in range(20):
            s = rng.uniform(0.2, 1.2)
            u = rng.uniform(-0.6, 0.6, size=2)
            f = parse(
                f"exp(({repr(float(u[0]))})*v1 + ({repr(float(u[1]))})*v2"
                f" - ({repr(float(s))})*dot(v, v))", 2)
            est = entropy_dissipation_three(f, law, n=1200, seed=730 + k)
            worst_neg = min(worst_neg, est.value / max(est.scale, 1e-300))
            _check(checks, est.n_samples > 0 and not est.vacuous,
                   f"three-wave f#{k}: vacuous")
            _check(checks, est.value >= -1e-14 * est.scale,
                   f"three-wave f#{k}: value {est.value:.2e} < 0")
        # positivity of 1/(b.v + c*omega) on the daughter legs forces b = 0
        for idx, c in enumerate((0.5, 1.0, 1.5, 2.0, 3.0)):
            f = parse(f"1 / (({repr(float(c))}) * ({law.omega}))", 2)
            est = entropy_dissipation_three(f, law, n=2000, seed=750 + idx)
            _check(checks, est.n_samples > 0 and not est.vacuous,
                   f"three-wave equilibrium #{idx}: vacuous")
            _check(checks, est.verdict == "zero",
                   f"three-wave equilibrium #{idx}: verdict {est.verdict}")
        dt = time.time() - t0
        _check(checks, dt <= 60.0, f"{dt:.1f}s > 60s")
        ok = all(c for c, _ in checks)
        _announce(capsys, "criterion 7 (H-theorem sign and equality)", ok,
                  f"worst value/scale {worst_neg:.1e}, 10 equilibria zero, "
                  f"{dt:.1f}s")
        assert ok, _fail_lines(checks)

    def test_c8_mu_reduction(self, capsys):
        t0 = time.time()
        checks = []
        law = parse_law("quadratic", 2)
        om = str(law.omega)
        levels = [0.0, 1.0, 2.0, 3.5]
        g1 = parse(f"0.3*v1 - 0.2*v2 + 0.7*({om})", 2)
        rep = level_set_constancy(g1, law, levels, seed=88)
        _check(checks, rep.max_spread <= 1e-8,
               f"member spread {rep.max_spread:.2e} > 1e-8")
        prof = mu_profile(g1, law, levels, seed=88)
        _check(checks, abs(prof.c_fit - 0.7) <= 1e-8,
               f"c_fit {prof.c_fit!r} not 0.7 +- 1e-8")
        _check(checks, abs(prof.mu[0]) <= 1e-10,
               f"mu(0) = {prof.mu[0]:.2e} != 0")
        g2 = parse(f"0.3*v1 - 0.2*v2 + ({om})^2", 2)
        rep2 = level_set_constancy(g2, law, levels, seed=88)
        prof2 = mu_profile(g2, law, levels, seed=88)
        ts = sample_triples(law, n=800, seed=88)
        res2 = three_wave_residual(g2, ts)
        _check(checks, rep2.verdict == "pass",
               f"nonlinear-mu constancy verdict {rep2.verdict}")
        _check(checks, prof2.linearity_residual >= 1e-2,
               f"nonlinear mu linearity {prof2.linearity_residual:.2e} < 1e-2")
        _check(checks, res2.verdict == "fail",
               f"nonlinear mu three-wave verdict {res2.verdict}")
        dt = time.time() - t0
        _check(checks, dt <= 10.0, f"{dt:.1f}s > 10s")
        ok = all(c for c, _ in checks)
        _announce(capsys, "criterion 8 (mu reduction)", ok,
                  f"spread {rep.max_spread:.2e}, c_fit error "
                  f"{abs(prof.c_fit - 0.7):.2e}, nonlinear residual "
                  f"{prof2.linearity_residual:.2e}, {dt:.1f}s")
        assert ok, _fail_lines(checks)

    def test_c9_numerical_hygiene(self, capsys, tmp_path):
        t0 = time.time()
        checks = []
        law_specs = [
            ("quadratic", 2), ("relativistic", 2),
            ("power:alpha=0.5,C=1.3", 2), ("gravity:C=1", 2),
            ("rossby", 2), ("sheared:alpha=1,beta=1,h=exp(v1)", 2),
            ("quadratic", 3), ("relativistic", 3),
        ]
        worst_grad = 0.0
        rng = np.random.default_rng(99)
        for spec, d in law_specs:
            law = parse_law(spec, d)
            pts = rng.uniform(-1.0, 1.0, size=(40, d))
            pts *= (0.6 + 1.2 * rng.random((40, 1))) / np.linalg.norm(
                pts, axis=1, keepdims=True)
            _, grad, err = jet1_batch(law.omega, pts)
            assert not err.any()
            for r in range(pts.shape[0]):
                fd = finite_diff_gradient(law.omega, pts[r])
                scale = max(1.0, float(np.abs(grad[r]).max()))
                rel = float(np.abs(grad[r] - fd).max()) / scale
                worst_grad = max(worst_grad, rel)
            _check(checks, worst_grad <= 1e-6,
                   f"{spec} d={d}: AD vs FD {worst_grad:.2e} > 1e-6")
        worst_energy = 0.0
        worst_momentum = 0.0
        for spec, d in [("quadratic", 2), ("relativistic", 2),
                        ("gravity:C=1", 2), ("quadratic", 3)]:
            law = parse_law(spec, d)
            qs = sample_quadruples(law, n=2000, seed=909)
            worst_energy = max(worst_energy,
                               float(np.abs(qs.energy_residual).max()))
            mom = qs.v + qs.vstar - qs.vp - qs.vpstar
            worst_momentum = max(worst_momentum, float(np.abs(mom).max()))
        for spec in ("quadratic", "rossby"):
            law = parse_law(spec, 2)
            ts = sample_triples(law, n=1000, seed=909)
            worst_energy = max(worst_energy,
                               float(np.abs(ts.energy_residual).max()))
            mom = ts.vp + ts.vpp - ts.vsum
            worst_momentum = max(worst_momentum, float(np.abs(mom).max()))
        _check(checks, worst_energy <= 1e-10,
               f"energy residual {worst_energy:.2e} > 1e-10")
        _check(checks, worst_momentum <= 1e-10,
               f"momentum residual {worst_momentum:.2e} > 1e-10")
        out = tmp_path / "rerun.csv"
        argv = ["resonance", "sample", "--law", "relativistic", "--n", "200",
                "--seed", "12", "--out", str(out)]
        code1 = cli_main(argv)
        text1 = capsys.readouterr().out
        blob1 = out.read_bytes()
        code2 = cli_main(argv)
        text2 = capsys.readouterr().out
        _check(checks, code1 == 0 and code2 == 0, "sample exit codes")
        _check(checks, out.read_bytes() == blob1, "CSV rerun differs")
        _check(checks, text1 == text2, "JSON rerun differs")
        json.loads(text1)
        elapsed = time.time() - _T0
        _check(checks, elapsed <= 180.0,
               f"acceptance suite {elapsed:.0f}s > 180s")
        dt = time.time() - t0
        ok = all(c for c, _ in checks)
        _announce(capsys, "criterion 9 (numerical hygiene)", ok,
                  f"AD vs FD {worst_grad:.2e}, energy {worst_energy:.2e}, "
                  f"momentum {worst_momentum:.2e}, byte-identical reruns, "
                  f"suite {elapsed:.0f}s, {dt:.1f}s")
        assert ok, _fail_lines(checks)
