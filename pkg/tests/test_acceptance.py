"""Acceptance criteria 1-11.

Each criterion prints one line ``criterion N: PASS|FAIL ...`` with the
measured quantities and then asserts.  Run as a script to get the eleven
lines without pytest.
"""

import bisect
import math
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from beurling_lab import bounds as bd
from beurling_lab.continuous import (ContinuousSystem, G_eval, N_C, discretize, g_of_w, g_transform,
                                     residual_exponent, zeta_C)
from beurling_lab.expcli import ShortIntervalConfig, mvt_sweep, short_interval_experiment
from beurling_lab.selberg import (B_sgn_integral, DirichletPolynomial, MajorantWindow,
                                  beurling_selberg_B, majorant_transform, mvt_rhs)
from beurling_lab.systems import PrimeSequence, classical_stream, enumerate_integers
from beurling_lab.zeros import (BoxQuery, N_alpha_T, box_winding, explicit_formula_residual,
                                known_count, known_zeros, predicted_line_count, strip_counts)
from beurling_lab.zeta import (classical_tail, detection_check, detection_coefficients, dyadic_blocks,
                               mollifier_polynomial)

APPENDIX_ZEROS = dict(beta=0.7, theta=0.6, eps=0.1, k0=4, k_max=60)
APPENDIX_DETECT = dict(beta=0.85, theta=0.6, eps=0.1, k0=5, k_max=60)


def emit(n: int, ok: bool, detail: str, elapsed: float, limit: float, capsys=None) -> bool:
    ok = ok and elapsed < limit
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail} [{elapsed:.1f}s < {limit:g}s]"
    if capsys is not None:
        with capsys.disabled():
            print("\n" + line)
    else:
        print(line)
    return ok


# ---------------------------------------------------------------------------
# 1. exponent identities

def criterion_1():
    errs = [abs(bd.c_mu(2 / 3) - 3), abs(bd.c_mu(1.0) - 4)]
    errs += [abs(bd.alpha_of_nu(1.0, th) - 1) for th in (0.0, 0.3, 0.6, 0.9)]
    exact = max(errs)
    grid = 0.0
    for th in np.linspace(0.0, 0.8, 5):
        for mu in np.linspace(0.51, 1.0, 50):
            alpha = bd.alpha_from_mu(mu, th)
            lhs = bd.c_mu(mu) * (1 - mu)
            rhs = bd.density_exponent_nu(alpha, bd.nu_of_alpha(mu), th)
            grid = max(grid, abs(lhs - rhs))
    lam = abs(bd.pnt_lambda_thresholds(0.0, math.inf, 12 / 5, 9.0) - 7 / 12)
    cor = max(abs(bd.corollary_lambda(1e15, th) - (th + 3) / 4) for th in np.linspace(0, 0.9, 10))
    cor_inf = max(abs(bd.corollary_lambda(math.inf, th) - (th + 3) / 4) for th in np.linspace(0, 0.9, 10))
    ok = exact <= 1e-12 and grid <= 1e-10 and lam <= 1e-12 and cor <= 1e-10 and cor_inf == 0
    return ok, f"anchors {exact:.1e}, 50x5 grid {grid:.1e}, 7/12 {lam:.1e}, (theta+3)/4 {cor:.1e}"


# ---------------------------------------------------------------------------
# 2. semigroup correctness

def _box_search(primes, x_max, cap=20_000):
    """Depth-first search over exponent vectors with exact rational products."""
    fr = [Fraction(p) for p in primes]
    xm = Fraction(x_max)
    out = []

    def rec(i, key, val):
        if len(out) > cap:
            raise OverflowError
        if i == len(fr):
            out.append((val, key))
            return
        e = 0
        v = val
        while v <= xm:
            rec(i + 1, key + (i,) * e, v)
            e += 1
            v = v * fr[i]

    rec(0, (), Fraction(1))
    out.sort()
    return out


def _oracle_mu_d(key):
    counts = {}
    for i in key:
        counts[i] = counts.get(i, 0) + 1
    mu = 0 if any(c > 1 for c in counts.values()) else (-1) ** len(key)
    d = math.prod(c + 1 for c in counts.values())
    return mu, d


def criterion_2():
    rng = np.random.default_rng(2024)
    n_sets, mismatches, total_ints = 0, 0, 0
    while n_sets < 50:
        k = int(rng.integers(1, 9))
        ps = sorted(np.exp(rng.uniform(math.log(1.1), math.log(50.0), k)).tolist())
        x_max = float(10 ** rng.uniform(1, 4))
        try:
            ref = _box_search(ps, x_max)
        except OverflowError:
            continue
        n_sets += 1
        s = enumerate_integers(PrimeSequence(tuple(ps)), x_max)
        total_ints += len(ref)
        # same multiset of factorizations, listed in nondecreasing exact value
        keys = [s.indices(i) for i in range(len(s))]
        if sorted(keys) != sorted(key for _, key in ref) or len(s) != len(ref):
            mismatches += 1
            continue
        exact = {key: v for v, key in ref}
        vals = [exact[key] for key in keys]
        if any(b < a * (1 - Fraction(1, 10 ** 12)) for a, b in zip(vals, vals[1:])):
            mismatches += 1
        if any(abs(float(v) - sv) > 1e-12 * sv for v, sv in zip(vals, s.values)):
            mismatches += 1
        for i, key in enumerate(keys):
            mu, d = _oracle_mu_d(key)
            lam = math.log(ps[key[0]]) if key and len(set(key)) == 1 else 0.0
            if s.mu[i] != mu or s.d[i] != d or s.Lambda[i] != lam:
                mismatches += 1
                break
        # N and psi at points well away from every integer value
        ref_v = [v for v, _ in ref]
        ref_f = np.array([float(v) for v in ref_v])
        logs = [math.log(ps[key[0]]) if key and len(set(key)) == 1 else None for _, key in ref]
        mids = 0.5 * (ref_f[1:] + ref_f[:-1])
        if len(mids) > 200:
            mids = rng.choice(mids, 200, replace=False)
        for x in np.concatenate([mids, rng.uniform(1, x_max, 20)]):
            if np.min(np.abs(ref_f - x)) < 1e-9 * x:
                continue
            n_ref = bisect.bisect_right(ref_v, Fraction(x))
            psi_ref = math.fsum(lg for lg in logs[:n_ref] if lg is not None)
            if s.count_N(x) != n_ref or s.chebyshev_psi(x) != psi_ref:
                mismatches += 1
                break
        # chi on windows whose edges avoid the values
        for _ in range(20):
            x = float(rng.uniform(1, x_max))
            lam = float(rng.uniform(0, (x_max - x) * 0.5))
            if min(np.min(np.abs(ref_f - (x - lam))), np.min(np.abs(ref_f - (x + lam)))) < 1e-9 * x:
                continue
            lo, hi = Fraction(x) - Fraction(lam), Fraction(x) + Fraction(lam)
            if s.chi(x, lam) != bisect.bisect_right(ref_v, hi) - bisect.bisect_left(ref_v, lo):
                mismatches += 1
                break
    return mismatches == 0, f"50 prime sets, {total_ints} integers, {mismatches} mismatches"


# ---------------------------------------------------------------------------
# 3. Beurling-Selberg suite

def criterion_3():
    rng = np.random.default_rng(3)
    x = np.concatenate([rng.uniform(-100, 100, 9000), rng.uniform(-1, 1, 1000)])
    maj = bool(np.all(beurling_selberg_B(x) >= np.sign(x)))
    integral = B_sgn_integral(50)
    w = MajorantWindow(T0=0.0, T=5.0, eta=1.0)
    f0 = abs(majorant_transform(w, [0.0])[0])
    xi = np.linspace(2.1 * math.pi, 8 * math.pi, 80)
    leak = float(np.max(np.abs(majorant_transform(w, np.concatenate([xi, -xi]))))) / f0
    ok = maj and abs(integral - 1) <= 1e-4 and leak <= 1e-3
    return ok, f"B>=sgn on 1e4 points {maj}, int(B-sgn)={integral:.8f}, leakage {leak:.1e}"


# ---------------------------------------------------------------------------
# 4. mean value theorem

def criterion_4():
    summary = mvt_sweep(100, seed=0)
    C = summary.constant()
    fam = summary.family_constants()
    stable = max(fam.values()) <= 2 * min(fam.values())
    lv = summary.large_values_constant()
    rng = np.random.default_rng(4)
    N = 200
    stream = classical_stream(2 * N)
    a = rng.standard_normal(N - 1) + 1j * rng.standard_normal(N - 1)
    S = DirichletPolynomial(np.arange(2, N + 1, dtype=float), a, N_max=N)
    T = 50.0
    exact = mvt_rhs(S, MajorantWindow(0.0, T, 1 / (2 * N)), stream) == (T + 2 * N) * float(np.sum(np.abs(a) ** 2))
    ok = C <= 50 and stable and lv <= 50 and exact
    fams = ", ".join(f"{k} {v:.3f}" for k, v in fam.items())
    return ok, (f"global C={C:.3f} ({fams}), large-values constant {lv:.3f}, "
                f"classical reduction exact {exact}")


# ---------------------------------------------------------------------------
# 5. partial-sum approximation (ordinary integers: A = 1, theta = 0)

def criterion_5():
    theta = 0.0
    Ts = np.geomspace(1e2, 1e4, 9)
    worst = -math.inf
    rows = []
    for nu in (1.2, 1.6, 2.0):
        for sigma in np.linspace((theta + 1) / 2, 2.0, 4):
            errs = []
            for T in Ts:
                Y = math.floor(T ** (nu / (1 - theta)))
                e = 0.0
                for t in np.linspace(T, 2 * T, 4):
                    s = complex(sigma, t)
                    e = max(e, abs(classical_tail(s, Y) - Y ** (1 - s) / (s - 1)))
                errs.append(e)
            slope = float(np.polyfit(np.log(Ts), np.log(errs), 1)[0])
            limit = bd.lemma_partial_sum_exponent(sigma, nu, theta) + 0.1
            worst = max(worst, slope - limit)
            rows.append(slope)
    return worst <= 0, f"12 (nu, sigma) fits, max(slope - limit) = {worst:.3f}"


# ---------------------------------------------------------------------------
# 6. detection pipeline

def criterion_6():
    system = ContinuousSystem.appendix(**APPENDIX_DETECT)
    X, Y = 4.0, 2.0 ** 14
    primes = discretize(system, u_max=X * Y * 1.01).primes
    stream = enumerate_integers(primes, X * Y)
    coeffs = detection_coefficients(stream, X, Y)
    v = coeffs.freqs
    vanish = bool(np.all(coeffs.coeffs[(v > 1) & (v <= X)] == 0))
    bounded = bool(np.all(np.abs(coeffs.coeffs) <= stream.d[:len(coeffs)]))
    run = dyadic_blocks(coeffs, X, Y, mollifier=mollifier_polynomial(stream, X))
    zs = known_zeros(system, BoxQuery(0.8, 0.0, 1e5))
    passed, worst_slack, worst_margin = 0, 0.0, math.inf
    for z in zs:
        out = detection_check(run, lambda s: zeta_C(system, s), z.rho)
        passed += out.passed
        worst_slack = max(worst_slack, out.slack)
        worst_margin = min(worst_margin, out.lhs - (out.threshold - out.slack))
    ok = vanish and bounded and zs and passed == len(zs) and worst_slack < 0.25
    return ok, (f"a_k=0 on (1,X] {vanish}, |a_k|<=d {bounded}, {passed}/{len(zs)} zeros detected "
                f"(L={run.L}), max slack {worst_slack:.3f}, min margin {worst_margin:.3f}")


# ---------------------------------------------------------------------------
# 7. g-density

def criterion_7():
    rng = np.random.default_rng(7)
    ident = 0.0
    for _ in range(20):
        z = complex(rng.uniform(0.3, 3.0), rng.uniform(-15, 15))
        ident = max(ident, abs(g_transform(z) + np.log(G_eval(z))))
    w4 = np.linspace(4.0, 120.0, 200_001)
    b1 = float(np.max(g_of_w(w4) * w4))
    w5 = w4[w4 >= 5.0]
    b2 = float(np.max(np.abs(g_of_w(w5) * w5 - 1) / (2.7 * np.exp(-0.22 * w5))))
    ok = ident <= 1e-6 and b1 < 7 / 3 and b2 < 1
    return ok, f"transform identity {ident:.1e}, max g log u = {b1:.4f} < 7/3, max ratio to 2.7u^-0.22 = {b2:.3f}"


# ---------------------------------------------------------------------------
# 8. zero counting

def criterion_8():
    system = ContinuousSystem.appendix(**APPENDIX_ZEROS)
    agree, details = 0, []
    for i in range(20):
        alpha = 0.6 if i % 2 == 0 else 0.66
        q = BoxQuery(alpha, 5.0 + 7.3 * i, 17.1 + 7.3 * i)
        w, k = box_winding(system, q), known_count(system, q)
        agree += w == k
        details.append(w)
    line_ok = True
    for T in (20.0, 50.0, 100.0, 200.0):
        line_ok &= N_alpha_T(system, 0.7, T) >= 0.5 * predicted_line_count(system, T)
    sc = strip_counts(system, 0.6, 400.0)
    mids = 0.5 * (sc.cuts[1:] + sc.cuts[:-1])
    ratio = sc.counts / np.log(np.maximum(mids, math.e))
    c_fit = float(ratio[mids <= 200].max())
    c_high = float(ratio[mids > 200].max())
    ok = agree == 20 and line_ok and c_high <= 2 * c_fit
    return ok, (f"winding = known on {agree}/20 boxes (zeros per box {min(details)}..{max(details)}), "
                f"N(beta,T) >= 0.5 predicted {line_ok}, strip C fit {c_fit:.3f} (T<=200) vs {c_high:.3f} (T>200)")


# ---------------------------------------------------------------------------
# 9. explicit formula

def criterion_9():
    system = ContinuousSystem.appendix(**APPENDIX_ZEROS)
    worst = 0.0
    for x in (1e2, 1e3):
        for T in (50.0, 100.0):
            r = explicit_formula_residual(system, x, 0.65, T)
            worst = max(worst, r.constant)
    return worst <= 10, f"max residual/budget = {worst:.2e} (limit 10)"


# ---------------------------------------------------------------------------
# 10. short intervals

def criterion_10():
    res = {K: short_interval_experiment(ShortIntervalConfig(0.8, K, 256)) for K in (2, 3)}
    checks = {K: r.checks() for K, r in res.items()}
    alt = res[2].deviation * res[3].deviation < 0
    ok = alt and all(all(c.values()) for c in checks.values())
    parts = [f"K={K}: ratio-1={r.deviation:+.3e}, M={r.main_term_M:+.3e}, tail={r.small_k_tail:.1e}, "
             f"checks {sum(checks[K].values())}/4" for K, r in res.items()]
    return ok, "; ".join(parts) + f"; alternating {alt}"


# ---------------------------------------------------------------------------
# 11. N_C cross-method and slope

def criterion_11():
    system = ContinuousSystem.appendix(**APPENDIX_ZEROS)
    pts = np.geomspace(50.0, 2000.0, 10)
    conv = N_C(system, pts, method="conv_exp", cells=1 << 16)
    per = N_C(system, pts, method="perron")
    rel = float(np.max(np.abs(conv.value - per.value) / conv.value))
    xs = np.geomspace(10.0, 1e6, 4000)
    r = N_C(system, xs, method="conv_exp", cells=1 << 16)
    sel = xs >= 1e3
    A = float(np.dot(r.value[sel], xs[sel]) / np.dot(xs[sel], xs[sel]))
    expo = residual_exponent(xs[sel], r.value[sel], A)
    theta = system.param("theta")
    ok = rel <= 1e-3 and A > 0 and expo <= theta + 0.15
    return ok, f"max rel diff conv/perron {rel:.1e} at 10 points, A={A:.5f}, residual exponent {expo:.3f} on [1e3,1e6]"


LIMITS = {1: 1, 2: 30, 3: 30, 4: 300, 5: 300, 6: 300, 7: 60, 8: 600, 9: 600, 10: 900, 11: 600}
CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
            6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10,
            11: criterion_11}


def run_criterion(n: int, capsys=None) -> bool:
    t0 = time.perf_counter()
    ok, detail = CRITERIA[n]()
    return emit(n, bool(ok), detail, time.perf_counter() - t0, LIMITS[n], capsys)


@pytest.mark.slow
@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n, capsys):
    assert run_criterion(n, capsys)


if __name__ == "__main__":
    results = [run_criterion(n) for n in sorted(CRITERIA)]
    sys.exit(0 if all(results) else 1)
