"""Acceptance criteria, one test per criterion.

Each test prints a single ``acceptance criterion N: PASS|FAIL`` line with
the measured quantities, then asserts.  Run on its own with

    pytest tests/test_acceptance.py -v
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest
from scipy.integrate import quad

from conftest import poly_dist, step_dist
from wavebound import stream
from wavebound.bounds import check_upper_bound, stream_wave_fixture
from wavebound.comparison import GridField, compare_pair, remark1_fixture, residual_density, weak_residual
from wavebound.hodograph import (
    chain_residual,
    ellipticity_certificate,
    forward,
    inverse,
    operator_L,
    patch_from_function,
    reciprocal_residual,
    reference_patch_pairs,
)
from wavebound.comparison import NonlinearTerm
from wavebound.quadrature import classify_singularity
from wavebound.stream import critical_head, depth, evaluate_U, h_zero, r_zero, solve_stream_pair
from wavebound.vorticity import s_zero

pytestmark = pytest.mark.acceptance

TEST_DISTRIBUTIONS = {
    "zero": lambda: poly_dist(0.0),
    "const2": lambda: poly_dist(2.0),
    "linear": lambda: poly_dist(1.0, -2.0),
    "six_t": lambda: poly_dist(0.0, 6.0),
    "step": step_dist,
}


def report(capsys, n: int, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\nacceptance criterion {n}: {'PASS' if ok else 'FAIL'} | {detail}")


def cold_caches() -> None:
    for fn in (stream._s0, stream.y_extent, stream.h_zero, stream.critical_head):
        fn.cache_clear()


def test_criterion_1_irrotational(capsys):
    cold_caches()
    t0 = time.perf_counter()
    d = poly_dist(0.0)
    s_c, r_c = critical_head(d)
    ss = np.logspace(-1, 2, 200)
    h_err = max(abs(depth(d, float(s)) - 1.0 / s) for s in ss)
    pair = solve_stream_pair(d, 5.0 / 3.0)
    br_err = max(
        abs(pair.plus.s - (math.sqrt(2) - 1)),
        abs(pair.plus.H - (math.sqrt(2) + 1)),
        abs(pair.minus.s - 2.0),
        abs(pair.minus.H - 0.5),
    )
    elapsed = time.perf_counter() - t0
    crit_err = max(abs(s_c - 1), abs(r_c - 1))
    ok = crit_err <= 1e-8 and h_err <= 1e-9 and br_err <= 1e-8 and elapsed < 1.0
    report(capsys, 1, ok, f"crit err {crit_err:.2e}, h err {h_err:.2e}, branch err {br_err:.2e}, {elapsed:.3f} s")
    assert ok


def test_criterion_2_constant_vorticity(capsys):
    d = poly_dist(2.0)
    ss = np.linspace(2.001, 50.0, 400)
    h_err = max(abs(depth(d, float(s)) - (s - math.sqrt(s * s - 4)) / 2) for s in ss)
    h0_err = abs(h_zero(d) - 1.0)
    r0_err = abs(r_zero(d) - 2.0 / 3.0)
    # independent oracle: closed-form R on a 1e-6 grid over (2, 4]
    grid = 2.0 + 1e-6 * np.arange(1, 2_000_001)
    R = (grid**2 - 4.0 + grid - np.sqrt(grid**2 - 4.0)) / 3.0
    rc_oracle = float(R.min())
    _, r_c = critical_head(d)
    rc_err = abs(r_c - rc_oracle)
    ok = h_err <= 1e-9 and h0_err <= 1e-9 and r0_err <= 1e-9 and rc_err <= 1e-5
    report(capsys, 2, ok, f"h err {h_err:.2e}, h0 err {h0_err:.2e}, r0 err {r0_err:.2e}, r_c err {rc_err:.2e}")
    assert ok


def test_criterion_3_bernoulli_identity(capsys):
    rng = np.random.default_rng(20240603)
    worst = 0.0
    count = 0
    for name, make in TEST_DISTRIBUTIONS.items():
        d = make()
        _, r_c = critical_head(d)
        hi = min(r_zero(d), r_c + 10.0)
        for r in rng.uniform(r_c, hi, 20):
            pair = solve_stream_pair(d, float(r))
            for br in (pair.minus, pair.plus):
                _, dU = evaluate_U(d, br.s, br.H)
                worst = max(worst, abs(dU * dU + 2.0 * br.H - 3.0 * r))
                count += 1
    ok = worst <= 1e-8
    report(capsys, 3, ok, f"{count} branches, max |U'(H)^2 + 2H - 3r| = {worst:.2e}")
    assert ok


def _oracle_integral(d, s, U, breaks):
    pts = [b for b in breaks if 0.0 < b < U]
    val, _ = quad(lambda t: 1.0 / math.sqrt(s * s - 2.0 * d.Omega(t)), 0.0, U, points=pts or None, epsabs=1e-13, epsrel=1e-13, limit=200)
    return val


def test_criterion_4_implicit_formula(capsys):
    rng = np.random.default_rng(4)
    worst = 0.0
    for name, make in TEST_DISTRIBUTIONS.items():
        d = make()
        s0, _ = s_zero(d)
        breaks = list(d.breakpoints)
        for _ in range(200):
            s = s0 + float(rng.uniform(0.05, 5.0))
            y = float(rng.uniform(0.0, depth(d, s)))
            U, _ = evaluate_U(d, s, y)
            worst = max(worst, abs(_oracle_integral(d, s, U, breaks) - y))
    ok = worst <= 1e-8
    report(capsys, 4, ok, f"1000 pairs, max implicit-formula residual {worst:.2e}")
    assert ok


def test_criterion_5_stream_as_wave(capsys):
    rng = np.random.default_rng(5)
    worst_pt, worst_A, worst_B = math.inf, math.inf, math.inf
    viol = 0
    c_ok = True
    cases = 0
    for name, make in TEST_DISTRIBUTIONS.items():
        d = make()
        _, r_c = critical_head(d)
        r0 = r_zero(d)
        hi = min(r0, r_c + 5.0)
        for r in rng.uniform(r_c, hi, 3):
            for branch in ("minus", "plus"):
                w = stream_wave_fixture(d, r=float(r), branch=branch, nx=17, ny=33)
                rep = check_upper_bound(w, d)
                cases += 1
                viol += len(rep.violations)
                worst_pt = min(worst_pt, rep.min_margin)
                worst_A = min(worst_A, rep.ineq_A.margin)
                worst_B = min(worst_B, rep.ineq_B.margin)
                if r <= r0:
                    c_ok &= rep.ineq_C.applicable and rep.ineq_C.holds
    ok = viol == 0 and worst_A >= -1e-8 and worst_B >= -1e-8 and c_ok
    report(
        capsys, 5, ok,
        f"{cases} fixtures, violations {viol}, min margins pointwise {worst_pt:.1e} A {worst_A:.1e} B {worst_B:.1e}, C holds {c_ok}",
    )
    assert ok


def test_criterion_6_remark1(capsys):
    ratios = []
    density_ratios = []
    verdicts = set()
    plan = {2: (1 / 32, 1 / 64), 3: (1 / 8, 1 / 16)}
    for p in (2.5, 3.0, 4.0):
        for n, (hc, hf) in plan.items():
            res, dens = [], []
            for h in (hc, hf):
                u1, u2, f = remark1_fixture(p, n, spacing=h)
                res.append(float(np.nanmax(np.abs(weak_residual(u2, f).values))))
                dens.append(float(np.max(np.abs(residual_density(u2, f)))))
                verdicts.add(compare_pair(u1, u2, f).verdict)
            ratios.append(res[0] / res[1])
            density_ratios.append(dens[0] / dens[1])
    t0 = time.perf_counter()
    u1, u2, f = remark1_fixture(3.0, 2, spacing=1 / 128)
    verdicts.add(compare_pair(u1, u2, f).verdict)
    elapsed = time.perf_counter() - t0
    ok = min(ratios) >= 3.5 and verdicts == {"hypothesis_failed_gradient"} and elapsed < 30.0
    report(
        capsys, 6, ok,
        f"min max|R_i| ratio {min(ratios):.2f}, residual density ratios {min(density_ratios):.2f}..{max(density_ratios):.2f}, "
        f"verdicts {sorted(verdicts)}, 1/128 run {elapsed:.2f} s",
    )
    assert ok


def test_criterion_7_hodograph(capsys):
    def fn(x, y):
        return y + 0.1 * np.sin(x)

    errs = []
    for m in (33, 65, 129):
        u = GridField.from_function(fn, [0.0, 0.0], [2.0 / (m - 1), 1.0 / (m - 1)], [m, m])
        pt = forward(u)
        rt = inverse(pt, [0.3137, 0.2511], [0.0917, 0.0311], [16, 17])
        errs.append(float(np.max(np.abs(rt.values - fn(*rt.mesh())))))
    ratio = min(errs[0] / errs[1], errs[1] / errs[2])
    recip = float(np.nanmax(np.abs(reciprocal_residual(u, pt))))
    chain = float(np.nanmax(np.abs(chain_residual(u, pt)[0])))
    st = patch_from_function(lambda q, p: (3.0 - np.sqrt(9.0 - 4.0 * p)) / 2.0 + 0.0 * q, [(0.0, 1.0, 33)], (0.0, 1.0, 257))
    L = float(np.nanmax(np.abs(operator_L(st, NonlinearTerm.constant(2.0)))))
    ok = ratio >= 7 and errs[-1] <= 1e-6 and recip <= 1e-6 and chain <= 1e-6 and L <= 1e-8
    report(
        capsys, 7, ok,
        f"round-trip errors {errs[0]:.1e}/{errs[1]:.1e}/{errs[2]:.1e} (min ratio {ratio:.1f}), "
        f"reciprocal {recip:.1e}, chain {chain:.1e}, stream L residual {L:.1e}",
    )
    assert ok


def test_criterion_8_ellipticity(capsys):
    pairs = reference_patch_pairs()
    gaps = {}
    ok = True
    for name, a, b in pairs:
        cert = ellipticity_certificate(a, b)
        gaps[name] = cert.min_gap
        ok &= cert.ok
    report(capsys, 8, ok, f"{len(pairs)} pairs, min rhs - lhs {min(gaps.values()):.3f}")
    assert ok


def test_criterion_9_singularities(capsys):
    c1 = classify_singularity(poly_dist(2.0), 2.0, 1.0)
    c2 = classify_singularity(poly_dist(1.0, -2.0), math.sqrt(0.5), 0.5)
    c3 = classify_singularity(poly_dist(0.0), 1.0, 0.5)
    kinds = (c1.kind, c2.kind, c3.kind)
    h_lin = h_zero(poly_dist(1.0, -2.0))
    h_two = h_zero(poly_dist(2.0))
    ok = kinds == ("inverse_sqrt", "nonintegrable", "regular") and h_lin == math.inf and abs(h_two - 1.0) <= 1e-8
    report(capsys, 9, ok, f"kinds {kinds}, h0(1 - 2t) = {h_lin}, h0(2) = {h_two:.12f}")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
