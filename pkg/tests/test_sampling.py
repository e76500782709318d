import math

import numpy as np
import pytest
from scipy import stats

from hardwall import (
    ChainParams,
    FieldConfig,
    GAUSSIAN,
    Pinning,
    SOS,
    build_lattice,
    chain_site_marginal,
    exact_rho,
    heat_bath_site,
    metropolis_site,
    run_chain,
    sample_piecewise_exponential,
    sample_truncated_gaussian,
    site_conditional,
)
from hardwall.errors import ParameterError, UsageError
from hardwall.observables import batch_means, estimate_rho


def law_for(nbrs, psi, pin):
    d = len(nbrs) // 2
    lat = build_lattice(d, 3)
    cfg = FieldConfig(np.zeros(lat.n_sites))
    site = lat.center_site
    for j, t in zip(lat.nbr[site], nbrs):
        cfg.heights[j] = t
    return site_conditional(lat, cfg, site, psi, pin)


# ---------------------------------------------------------------------------
# conditional samplers
# ---------------------------------------------------------------------------

def test_piecewise_exponential_mean():
    rng = np.random.default_rng(0)
    law = law_for([0.0, 0.0], SOS, Pinning.none())  # f ~ exp(-2t), mean 1/2
    x = sample_piecewise_exponential(law, rng, size=1_000_000)
    assert (x >= 0).all()
    assert x.mean() == pytest.approx(0.5, abs=0.002)


def test_piecewise_exponential_ks():
    rng = np.random.default_rng(1)
    law = law_for([0.0, 0.0], SOS, Pinning.none())
    x = sample_piecewise_exponential(law, rng, size=100_000)
    res = stats.kstest(x, lambda t: 1 - np.exp(-2 * t))
    assert res.pvalue > 0.01
    # multi-segment law, KS against the law's own closed-form CDF
    law = law_for([0.3, 1.7, 0.0, 2.5], SOS, Pinning.square_well(0.6, 0.9))
    x = sample_piecewise_exponential(law, rng, size=100_000)
    res = stats.kstest(x, law.cdf)
    assert res.pvalue > 0.01


def test_piecewise_exponential_flat_segment_uniform():
    rng = np.random.default_rng(2)
    # neighbors (0, 5): slope zero on (0, 5), exponential beyond
    law = law_for([0.0, 5.0], SOS, Pinning.none())
    x = sample_piecewise_exponential(law, rng, size=200_000)
    inside = x[(x > 0) & (x < 5.0)]
    counts, _ = np.histogram(inside, bins=10, range=(0.0, 5.0))
    res = stats.chisquare(counts)
    assert res.pvalue > 0.01


def test_piecewise_exponential_wrong_law():
    rng = np.random.default_rng(0)
    law = law_for([0.0, 0.0], GAUSSIAN, Pinning.none())
    with pytest.raises(UsageError):
        sample_piecewise_exponential(law, rng)


def test_truncated_gaussian_half_normal():
    rng = np.random.default_rng(3)
    x = sample_truncated_gaussian(0.0, 0.5, rng, size=1_000_000)
    assert x.mean() == pytest.approx(math.sqrt(0.5) * math.sqrt(2 / math.pi), abs=0.002)
    res = stats.kstest(x[:100_000], lambda t: stats.halfnorm.cdf(t, scale=math.sqrt(0.5)))
    assert res.pvalue > 0.01


def test_truncated_gaussian_far_from_wall():
    rng = np.random.default_rng(4)
    x = sample_truncated_gaussian(5.0, 0.25, rng, size=1_000_000)
    assert x.mean() == pytest.approx(5.0, abs=0.002)


def test_truncated_gaussian_mean_below_wall():
    rng = np.random.default_rng(5)
    x = sample_truncated_gaussian(-3.0, 0.25, rng, size=100_000)
    assert (x >= 0).all()
    assert np.isfinite(x).all()
    with pytest.raises(ParameterError):
        sample_truncated_gaussian(0.0, 0.0, rng)


def test_truncated_gaussian_weighted_segments():
    rng = np.random.default_rng(6)
    # well below a=0.4 with log-weight 1.2: check against the law cdf
    law = law_for([0.5, 1.1], GAUSSIAN, Pinning.square_well(0.4, 1.2))
    segs = [(law.seg_lo[k], law.seg_hi[k], law.seg_logw[k]) for k in range(2)]
    x = sample_truncated_gaussian(law.mu, law.sigma**2, rng, segments=segs, size=100_000)
    res = stats.kstest(x, law.cdf)
    assert res.pvalue > 0.01


# ---------------------------------------------------------------------------
# single-site kernels
# ---------------------------------------------------------------------------

def test_heat_bath_atom_frequency_n1():
    lat = build_lattice(1, 1)
    pin = Pinning.delta(0.5)
    rng = np.random.default_rng(7)
    cfg = FieldConfig(np.array([1.0]))
    hits = 0
    n = 40_000
    for _ in range(n):
        heat_bath_site(lat, cfg, 0, SOS, pin, rng)
        hits += bool(cfg.pinned[0])
    freq = hits / n
    assert freq == pytest.approx(0.5, abs=0.01)  # exact law eps/(eps + 1/2)


def test_heat_bath_never_pins_without_atom():
    lat = build_lattice(1, 2)
    rng = np.random.default_rng(8)
    cfg = FieldConfig(np.array([0.5, 0.5]))
    for _ in range(2000):
        for s in (0, 1):
            heat_bath_site(lat, cfg, s, SOS, Pinning.none(), rng)
    assert not cfg.pinned.any()
    assert (cfg.heights >= 0).all()


def test_heat_bath_gaussian_half_normal_ks():
    lat = build_lattice(1, 1)
    rng = np.random.default_rng(9)
    cfg = FieldConfig(np.array([1.0]))
    xs = np.empty(50_000)
    for i in range(len(xs)):
        xs[i] = heat_bath_site(lat, cfg, 0, GAUSSIAN, Pinning.none(), rng)
    res = stats.kstest(xs, lambda t: stats.halfnorm.cdf(t, scale=math.sqrt(0.5)))
    assert res.pvalue > 0.01


class _StillRng:
    """uniform() returns the midpoint so the proposal equals the height."""

    def uniform(self, lo, hi):
        return 0.0

    def random(self):
        return 0.999999


def test_metropolis_identity_proposal_always_accepted():
    lat = build_lattice(1, 1)
    cfg = FieldConfig(np.array([1.3]))
    assert metropolis_site(lat, cfg, 0, SOS, Pinning.none(), 1.0, _StillRng())


def test_metropolis_matches_heat_bath_n1():
    lat = build_lattice(1, 1)
    rng = np.random.default_rng(10)
    cfg = FieldConfig(np.array([1.0]))
    xs = np.empty(80_000)
    for i in range(len(xs)):
        metropolis_site(lat, cfg, 0, SOS, Pinning.none(), 1.0, rng)
        xs[i] = cfg.heights[0]
    assert xs[5000:].mean() == pytest.approx(0.5, abs=0.01)


def test_metropolis_rejects_delta():
    lat = build_lattice(1, 1)
    rng = np.random.default_rng(0)
    cfg = FieldConfig(np.array([1.0]))
    with pytest.raises(UsageError):
        metropolis_site(lat, cfg, 0, SOS, Pinning.delta(0.1), 1.0, rng)
    with pytest.raises(ParameterError):
        ChainParams(d=1, N=2, kernel="metropolis", pin=Pinning.delta(0.1))


# ---------------------------------------------------------------------------
# chain driver
# ---------------------------------------------------------------------------

def test_empty_trace_when_sweeps_equal_burn_in():
    tr = run_chain(ChainParams(d=1, N=2, sweeps=50, burn_in=50, seed=1))
    assert tr.n_snapshots == 0


def test_snapshot_count_with_thinning():
    tr = run_chain(ChainParams(d=1, N=2, sweeps=105, burn_in=20, thinning=8, seed=1))
    assert tr.n_snapshots == (105 - 20) // 8


def test_bit_identical_reruns():
    p = ChainParams(d=2, N=4, psi=GAUSSIAN, pin=Pinning.delta(0.2),
                    sweeps=400, burn_in=50, seed=99)
    a, b = run_chain(p), run_chain(p)
    assert np.array_equal(a.nu, b.nu)
    assert np.array_equal(a.mean_height, b.mean_height)
    assert np.array_equal(a.final.heights, b.final.heights)
    c = run_chain(p, chain_index=1)
    assert not np.array_equal(a.final.heights, c.final.heights)


def test_validation_errors():
    with pytest.raises(ParameterError):
        ChainParams(d=1, N=2, sweeps=10, burn_in=20)
    with pytest.raises(ParameterError):
        ChainParams(d=1, N=2, thinning=0)
    with pytest.raises(ParameterError):
        ChainParams(d=1, N=2, kernel="wolff")


@pytest.mark.parametrize("order", ["checkerboard", "sequential"])
def test_chain_invariants_and_oracle_agreement(order):
    pin = Pinning.delta(0.3)
    p = ChainParams(d=1, N=3, psi=SOS, pin=pin, sweeps=30_000, burn_in=2_000,
                    seed=12, sweep_order=order)
    tr = run_chain(p)
    lat = build_lattice(1, 3)
    assert (tr.nu >= 0).all() and (tr.nu <= lat.n_sites).all()
    assert (tr.final.heights >= 0).all()
    assert (tr.final.heights[tr.final.pinned] == 0).all()
    est = estimate_rho(tr, lat)
    exact = exact_rho(3, SOS, 0.3)
    assert abs(est.value - exact) < 3 * est.se


def test_checkerboard_matches_sequential_gaussian():
    pin = Pinning.delta(0.2)
    ests = []
    for order in ("checkerboard", "sequential"):
        p = ChainParams(d=2, N=3, psi=GAUSSIAN, pin=pin, sweeps=12_000,
                        burn_in=1_000, seed=21, sweep_order=order)
        tr = run_chain(p)
        ests.append(estimate_rho(tr, build_lattice(2, 3)))
    diff = abs(ests[0].value - ests[1].value)
    assert diff < 3 * math.hypot(ests[0].se, ests[1].se)


def test_square_well_chain_against_oracle():
    from hardwall import exact_Z_chain

    pin = Pinning.square_well(0.2, 1.0)
    p = ChainParams(d=1, N=2, psi=SOS, pin=pin, sweeps=40_000, burn_in=3_000,
                    seed=31)
    tr = run_chain(p)
    est = estimate_rho(tr, build_lattice(1, 2))
    exact = exact_Z_chain(2, SOS, pin).rho
    assert abs(est.value - exact) < 3 * est.se


def test_heat_bath_stationarity_chi_square():
    # long d=1, N=2 run vs oracle-computed site marginal (atom + bins)
    pin = Pinning.delta(0.4)
    lat = build_lattice(1, 2)
    rng = np.random.default_rng(17)
    cfg = FieldConfig(rng.exponential(1.0, 2))
    n = 30_000
    heights = np.empty(n)
    pinned = np.empty(n, dtype=bool)
    for i in range(n):
        for s in (0, 1):
            heat_bath_site(lat, cfg, s, SOS, pin, rng)
        heights[i] = cfg.heights[0]
        pinned[i] = cfg.pinned[0]
    edges, masses, atom = chain_site_marginal(2, SOS, pin, 0)
    # group whole quadrature panels into bins (bins sit on panel edges)
    bins = [edges[0], edges[1], edges[2], edges[3], np.inf]
    probs = np.zeros(len(bins) - 1)
    for lo, hi, m in zip(edges[:-1], edges[1:], masses):
        k = np.searchsorted(bins, 0.5 * (lo + hi)) - 1
        probs[k] += m
    cont = heights[~pinned]
    counts = np.histogram(cont, bins=bins)[0]
    obs = np.concatenate([[pinned.sum()], counts])
    exp = np.concatenate([[atom], probs]) * n
    keep = exp > 5
    res = stats.chisquare(obs[keep], exp[keep] * obs[keep].sum() / exp[keep].sum())
    assert res.pvalue > 0.01


def test_clamped_sites_stay_at_zero():
    clamp = np.zeros(9, dtype=bool)
    clamp[4] = True
    p = ChainParams(d=2, N=3, psi=GAUSSIAN, pin=Pinning.none(), sweeps=500,
                    burn_in=0, seed=5, clamp=clamp)
    tr = run_chain(p)
    assert tr.final.heights[4] == 0.0
    assert tr.boundary_moment is not None  # gaussian d=2 diagnostics on


def test_custom_potential_sequential_chain():
    from hardwall import Potential

    psi = Potential.custom(lambda x: np.abs(x) ** 1.5, "uniformly_convex")
    p = ChainParams(d=1, N=2, psi=psi, sweeps=300, burn_in=100, seed=2,
                    sweep_order="sequential")
    tr = run_chain(p)
    assert (tr.final.heights >= 0).all()
    with pytest.raises(UsageError):
        run_chain(ChainParams(d=1, N=2, psi=psi, sweeps=10, seed=2))
