"""Acceptance suite: one test per criterion, one printed line each.

MCMC-backed criteria run at fixed seeds with conservative burn-in
(>= 10^4 sweeps) so the suite is deterministic. Criterion 11 (figures)
lives in the plotting package's own tests (plots/tests/test_figures.py).

Criterion 7's d=3 leg is implemented exactly as stated and is expected
to FAIL: at N in {4, 8, 12} with zero boundary conditions most sites
touch the boundary region, where pinning is easier, so the exact
rho_N decreases toward its positive thermodynamic limit instead of
being non-decreasing. The analysis is recorded in the decisions notes;
the red test is intentional rather than papered over.
"""

import math
import time

import numpy as np
import pytest
from scipy import stats

import hardwall as hw
from hardwall.chalker import adversarial_heights, random_heights
from hardwall.observables import (
    batch_means,
    estimate_center_height,
    estimate_rho,
    fit_scaling,
    tail_probability,
)
from hardwall.sampling import ChainParams, run_chain

BURN = 10_000


def report(tag, ok, detail):
    print(f"{tag} {'PASS' if ok else 'FAIL'}: {detail}")
    return ok


def rho_of(d, N, psi, pin, sweeps, seed, kernel="heat_bath"):
    params = ChainParams(d=d, N=N, psi=psi, pin=pin, kernel=kernel,
                         sweeps=sweeps, burn_in=BURN, seed=seed)
    trace = run_chain(params)
    return estimate_rho(trace, hw.build_lattice(d, N)), trace


def combined_se(a, b):
    return math.hypot(a.se or 0.0, b.se or 0.0)


# ---------------------------------------------------------------------------
# 1. oracle equivalence on chains
# ---------------------------------------------------------------------------

def test_criterion_01_oracle_equivalence():
    t0 = time.time()
    # closed forms first
    assert hw.exact_Z_chain(1, hw.SOS, hw.Pinning.delta(0.5)).rho == pytest.approx(
        0.5, rel=1e-10
    )
    assert hw.exact_Z_chain(1, hw.GAUSSIAN, hw.Pinning.none()).Z == pytest.approx(
        math.sqrt(math.pi) / 2, rel=1e-10
    )
    worst = 0.0
    for psi in (hw.SOS, hw.GAUSSIAN):
        for N in (1, 2, 3):
            for eps in (0.0, 0.05, 0.5):
                exact = hw.exact_Z_chain(N, psi, hw.Pinning.delta(eps)).rho
                est, _ = rho_of(1, N, psi, hw.Pinning.delta(eps),
                                sweeps=40_000, seed=17 * N + int(100 * eps))
                gap = abs(est.value - exact)
                tol = 3 * est.se + 1e-12
                worst = max(worst, gap - tol)
                assert gap <= tol, (
                    f"{psi.kind} N={N} eps={eps}: |{est.value:.5f} - "
                    f"{exact:.5f}| > 3 SE = {3 * est.se:.5f}"
                )
    assert report(
        "ACCEPT-01 oracle equivalence (d=1, N<=3, both interactions)",
        True, f"18 chains within 3 SE of quadrature, {time.time()-t0:.0f}s",
    )


# ---------------------------------------------------------------------------
# 2. inequality suite, 1e5 random + 1e3 adversarial per bound
# ---------------------------------------------------------------------------

def test_criterion_02_inequality_suite():
    t0 = time.time()
    rows = hw.verify_suite(n_random=100_000, n_adversarial=1_000, seed=2024)
    elapsed = time.time() - t0
    for r in rows:
        print(f"  {r['name']:34s} configs={r['configs']:7d} "
              f"min_slack={r['min_slack']:.3e} violations={r['violations']}")
    bad = sum(r["violations"] for r in rows)
    total = {r["name"]: r["configs"] for r in rows}
    assert all(v >= 101_000 for k, v in total.items() if "map" in k and "count" not in k)
    ok = bad == 0 and elapsed < 60
    assert report(
        "ACCEPT-02 map inequalities (3 bounds, randomized + adversarial)",
        ok, f"0 negative slacks in {sum(total.values())} configs, {elapsed:.0f}s",
    )


# ---------------------------------------------------------------------------
# 3. log-partition integral identity
# ---------------------------------------------------------------------------

def test_criterion_03_integral_identity():
    t0 = time.time()
    worst = 0.0
    for psi in (hw.SOS, hw.GAUSSIAN):
        for N in (1, 2, 3):
            worst = max(worst, hw.check_integral_identity(N, psi, [0.1, 0.3, 0.5]))
    ok = worst < 1e-6
    assert report(
        "ACCEPT-03 integral identity (d=1, N<=3, eps<=0.5)",
        ok, f"max residual {worst:.2e} < 1e-6, {time.time()-t0:.0f}s",
    )


# ---------------------------------------------------------------------------
# 4. map set properties
# ---------------------------------------------------------------------------

def test_criterion_04_map_set_properties():
    t0 = time.time()
    rng = np.random.default_rng(44)
    a = 0.1
    checked = 0
    for d, N in [(1, 6), (2, 5), (3, 3)]:
        lat = hw.build_lattice(d, N)
        h = np.concatenate([
            random_heights(lat, 34_000, rng),
            adversarial_heights(lat, 1_000, rng, (a, 2 * a, 1.0)),
        ])
        t_ok = ((hw.map_T(h, a) <= a).sum(1) >= (h <= 2 * a).sum(1)).all()
        s_ok = ((hw.map_S(h) == 0.0).sum(1) == (h <= 1.0).sum(1)).all()
        assert t_ok and s_ok
        checked += len(h)
    assert report(
        "ACCEPT-04 map set properties (counts under T and S)",
        True, f"zero violations in {checked} configs, {time.time()-t0:.0f}s",
    )


# ---------------------------------------------------------------------------
# 5. wetting signature, absolute-value interaction, d = 2
# ---------------------------------------------------------------------------

def test_criterion_05_wetting_signature_sos_d2():
    t0 = time.time()
    assert 0.01 < math.exp(-4)  # weak pinning sits below the e^{-2d} threshold
    weak, strong = [], []
    for N in (8, 16, 32):
        est, _ = rho_of(2, N, hw.SOS, hw.Pinning.delta(0.01), 30_000, 100 + N)
        weak.append((N, est.value, est.se))
        est, _ = rho_of(2, N, hw.SOS, hw.Pinning.delta(5.0), 30_000, 150 + N)
        strong.append((N, est.value, est.se))
    print("  weak eps=0.01:", ["%.5f" % v for _, v, _ in weak])
    print("  strong eps=5.0:", ["%.5f" % v for _, v, _ in strong])
    decreasing = all(b < a for (_, a, _), (_, b, _) in zip(weak[:-1], weak[1:]))
    decay = fit_scaling(weak, "c_over_N")
    const = fit_scaling(weak, "constant")
    stable = all(
        abs(strong[i][1] - strong[j][1])
        <= 3 * math.hypot(strong[i][2], strong[j][2])
        for i in range(3) for j in range(i + 1, 3)
    )
    big = all(v > 0.3 for _, v, _ in strong)
    ok = decreasing and decay.resid_norm < const.resid_norm and stable and big
    assert report(
        "ACCEPT-05 wetting signature (sos, d=2)",
        ok,
        f"rho decreasing={decreasing}, c/N residual {decay.resid_norm:.1f} < "
        f"constant {const.resid_norm:.1f}, strong pinning stable={stable} "
        f"and > 0.3, {time.time()-t0:.0f}s",
    )


# ---------------------------------------------------------------------------
# 6. exponential tail shape of the pinned-site count
# ---------------------------------------------------------------------------

def test_criterion_06_tail_shape():
    t0 = time.time()
    params = ChainParams(d=2, N=16, psi=hw.SOS, pin=hw.Pinning.delta(0.01),
                         sweeps=70_000, burn_in=BURN, seed=606)
    trace = run_chain(params)
    m_lo = int(np.quantile(trace.nu, 0.5))
    m_hi = int(np.quantile(trace.nu, 0.995))
    pts = []
    for m in range(m_lo, m_hi + 1):
        tp = tail_probability(trace, m)
        if tp.value > 0 and tp.se and tp.se > 0:
            pts.append((m, math.log(tp.value), tp.se / tp.value))
    assert len(pts) >= 3, "not enough nonzero tail points"
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    w = 1.0 / np.array([p[2] for p in pts]) ** 2
    X = np.stack([np.ones_like(x, dtype=float), x.astype(float)], axis=1)
    cov = np.linalg.inv(X.T @ (w[:, None] * X))
    slope = (cov @ (X.T @ (w * y)))[1]
    slope_se = math.sqrt(cov[1, 1])
    print(f"  log P(nu>M) over M={list(x)}: slope {slope:.3f} +/- {slope_se:.3f}")
    ok = slope < 0 and abs(slope) / slope_se > 3
    assert report(
        "ACCEPT-06 tail shape (d=2, N=16, sos, eps=0.01)",
        ok, f"slope {slope:.2f}, |slope|/se = {abs(slope)/slope_se:.0f} > 3, "
            f"{time.time()-t0:.0f}s",
    )


# ---------------------------------------------------------------------------
# 7. gaussian contrast (trend checks)
# ---------------------------------------------------------------------------

def _trend(points):
    fit = fit_scaling(points, "log")
    return fit.coef[1], fit.coef_se[1]


def test_criterion_07a_gaussian_d2_depinning_trend():
    t0 = time.time()
    pts = []
    for N in (8, 16, 32):
        est, _ = rho_of(2, N, hw.GAUSSIAN, hw.Pinning.delta(0.005), 30_000, 200 + N)
        pts.append((N, est.value, est.se))
    print("  gaussian d=2 eps=0.005 rho:", ["%.6f" % v for _, v, _ in pts])
    slope, se = _trend(pts)
    decreasing = all(b < a for (_, a, _), (_, b, _) in zip(pts[:-1], pts[1:]))
    flagged = abs(slope) < 3 * se
    ok = slope < 0 or flagged
    if flagged:
        print("  FLAG: trend not resolved at 3 SE (slopes overlap zero)")
    assert report(
        "ACCEPT-07a gaussian d=2 trend (rho decreasing)",
        ok and decreasing,
        f"slope {slope:.2e} +/- {se:.1e}, {time.time()-t0:.0f}s",
    )


def test_criterion_07b_gaussian_d3_no_transition_trend():
    t0 = time.time()
    pts = []
    for N in (4, 8, 12):
        est, _ = rho_of(3, N, hw.GAUSSIAN, hw.Pinning.delta(0.05), 30_000, 300 + N)
        pts.append((N, est.value, est.se))
    print("  gaussian d=3 eps=0.05 rho:", ["%.6f" % v for _, v, _ in pts])
    slope, se = _trend(pts)
    flagged = abs(slope) < 3 * se
    if flagged:
        print("  FLAG: trend not resolved at 3 SE")
    # informative diagnostic: rho_N = floor + b/N resolves a positive floor
    # (localized phase), unlike the depinned d=2 sequence whose floor is ~0
    n = np.array([p[0] for p in pts], dtype=float)
    y = np.array([p[1] for p in pts])
    coef = np.linalg.lstsq(np.stack([np.ones_like(n), 1.0 / n], axis=1), y,
                           rcond=None)[0]
    print(f"  diagnostic floor fit rho = {coef[0]:.5f} + {coef[1]:.4f}/N "
          f"(positive floor = localized)")
    ok = slope >= 0 or flagged
    # Expected red at desk scale: rho_N decreases toward its positive
    # limit because small cubes are boundary-dominated (zero boundary
    # pins more easily). See the decisions notes for the full analysis.
    assert report(
        "ACCEPT-07b gaussian d=3 trend (rho non-decreasing)",
        ok,
        f"slope {slope:.2e} +/- {se:.1e}; boundary-dominated sizes give a "
        f"decreasing rho_N with a positive floor, {time.time()-t0:.0f}s",
    )


# ---------------------------------------------------------------------------
# 8. entropic repulsion growth
# ---------------------------------------------------------------------------

def test_criterion_08_entropic_repulsion():
    t0 = time.time()
    pts = []
    for N in (8, 16, 32, 64):
        params = ChainParams(
            d=2, N=N, psi=hw.GAUSSIAN, pin=hw.Pinning.delta(0.0),
            sweeps=30_000 if N <= 32 else 50_000, burn_in=BURN, seed=400 + N,
        )
        est = estimate_center_height(run_chain(params))
        pts.append((N, est.value, est.se))
    print("  center heights:", ["%.3f" % v for _, v, _ in pts])
    increasing = all(b > a for (_, a, _), (_, b, _) in zip(pts[:-1], pts[1:]))
    fit = fit_scaling(pts, "log")
    beta, beta_se = fit.coef[1], fit.coef_se[1]
    ok = increasing and beta > 3 * beta_se
    assert report(
        "ACCEPT-08 entropic repulsion (gaussian d=2, eps=0)",
        ok, f"heights increasing={increasing}, beta = {beta:.3f} +/- {beta_se:.3f} "
            f"({beta/beta_se:.0f} SE), {time.time()-t0:.0f}s",
    )


# ---------------------------------------------------------------------------
# 9. sampler distribution tests and kernel agreement
# ---------------------------------------------------------------------------

def test_criterion_09_sampler_distributions_and_kernels():
    t0 = time.time()
    rng = np.random.default_rng(909)
    lat = hw.build_lattice(2, 3)
    cfg = hw.FieldConfig(np.array([0.3, 1.7, 0.0, 2.5, 0.9, 0.1, 1.1, 0.4, 2.0]))
    site = lat.center_site

    law = hw.site_conditional(lat, cfg, site, hw.SOS, hw.Pinning.square_well(0.6, 0.9))
    x = hw.sample_piecewise_exponential(law, rng, size=100_000)
    p_sos = stats.kstest(x, law.cdf).pvalue

    law = hw.site_conditional(lat, cfg, site, hw.GAUSSIAN, hw.Pinning.square_well(0.6, 0.9))
    segs = [(law.seg_lo[k], law.seg_hi[k], law.seg_logw[k]) for k in range(2)]
    x = hw.sample_truncated_gaussian(law.mu, law.sigma**2, rng, segments=segs,
                                     size=100_000)
    p_gauss = stats.kstest(x, law.cdf).pvalue

    # mixed atom + continuous law via the chain itself (N=1, closed form)
    params = ChainParams(d=1, N=1, psi=hw.SOS, pin=hw.Pinning.delta(0.5),
                         sweeps=60_000, burn_in=BURN, seed=911)
    trace = run_chain(params)
    pinned = trace.nu == 1
    bins = np.array([0.0, 0.2, 0.5, 1.0, 2.0, np.inf])
    cont_cdf = lambda t: 1 - np.exp(-2 * t)
    probs = 0.5 * np.diff(cont_cdf(bins))
    obs = np.concatenate([[pinned.sum()],
                          np.histogram(trace.center_height[~pinned], bins=bins)[0]])
    exp = np.concatenate([[0.5], probs]) * len(pinned)
    p_mixed = stats.chisquare(obs, exp * obs.sum() / exp.sum()).pvalue

    hb, _ = rho_of(2, 8, hw.SOS, hw.Pinning.square_well(0.1, 1.0), 30_000, 901)
    met, tr = rho_of(2, 8, hw.SOS, hw.Pinning.square_well(0.1, 1.0), 30_000, 902,
                     kernel="metropolis")
    gap = abs(hb.value - met.value)
    ok = (p_sos > 0.01 and p_gauss > 0.01 and p_mixed > 0.01
          and gap <= 3 * combined_se(hb, met))
    assert report(
        "ACCEPT-09 sampler distributions + kernel agreement",
        ok,
        f"KS p: sos {p_sos:.3f}, gaussian {p_gauss:.3f}; mixed chi2 p "
        f"{p_mixed:.3f}; |hb-met| = {gap:.4f} <= {3*combined_se(hb, met):.4f} "
        f"(accept {tr.accept_rate:.2f}), {time.time()-t0:.0f}s",
    )


# ---------------------------------------------------------------------------
# 10. rho monotone in the pinning strength (exact oracle)
# ---------------------------------------------------------------------------

def test_criterion_10_rho_monotone():
    t0 = time.time()
    grid = np.round(np.arange(0.05, 1.0001, 0.05), 10)
    for psi in (hw.SOS, hw.GAUSSIAN):
        for N in (1, 2, 3):
            ok, _ = hw.check_rho_monotone(N, psi, grid)
            assert ok, f"rho not monotone for {psi.kind}, N={N}"
    assert report(
        "ACCEPT-10 rho monotone in eps (oracle, d=1, N<=3)",
        True, f"non-decreasing on 20-point grids, {time.time()-t0:.0f}s",
    )
