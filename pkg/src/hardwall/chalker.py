"""Height maps and pointwise energy inequalities behind the wetting bounds.

Two maps compress nearly-pinned configurations onto pinned ones:

    T_a: keep heights <= a, lower everything else by a;
    S:   send heights <= 1 to 0, lower everything else by 1.

Each map can only raise the energy by a boundary term plus a term counting
the sites near the wall, and these budgets are what the checks verify:

    SOS:       H(phi) <= H(T phi) + d*a*|bd| + 2*d*a*|B|,  B = {phi <= a}
    SOS:       H(phi) <= H(S phi) + d*|bd|   + 2*d*|A|,    A = {phi <= 1}
    Gaussian,  H(phi) <= H(S phi) + 2*|bd|   + 8*|A| + X(S phi),  d = 2
               with W = A union exterior and
               X(phi) = 2 * sum_{x in dW} sum_{y not in W, y ~ x} phi_y.

|bd| is the number of boundary sites of the cube. The budgets hold for
every configuration on cubes of side N >= 2 (side 1 is degenerate: the
cube has more outside bonds than d*|bd|). check_* return the slack
RHS - LHS, which must never be negative.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, UsageError
from .model import FieldConfig, GAUSSIAN, Pinning, SOS, energy_batch
from .observables import batch_means


def _as_batch(cfg):
    h = cfg.heights if isinstance(cfg, FieldConfig) else np.asarray(cfg, float)
    if h.ndim == 1:
        return h[None, :], True
    return h, False


def _like(cfg, heights):
    if isinstance(cfg, FieldConfig):
        return FieldConfig(heights, heights == 0.0)
    return heights


# ---------------------------------------------------------------------------
# maps
# ---------------------------------------------------------------------------

def map_T(cfg, a):
    """Lower heights above a by a; heights <= a are untouched."""
    if not a > 0:
        raise ParameterError("threshold a must be > 0")
    h, single = _as_batch(cfg)
    out = np.where(h <= a, h, h - a)
    return _like(cfg, out[0] if single else out)


def map_S(cfg):
    """Send heights <= 1 to 0, lower the rest by 1."""
    h, single = _as_batch(cfg)
    out = np.where(h > 1.0, h - 1.0, 0.0)
    return _like(cfg, out[0] if single else out)


@dataclass
class StratifiedConfig:
    """A configuration with its near-wall strata.

    B is the pinned set, A the enlarged set feeding the maps: for the
    square well B = {phi <= a}, A = {phi <= 2a}; under delta pinning
    B = atom sites and A adds {0 < phi <= 1}. W = A union exterior.
    """

    heights: np.ndarray
    B: np.ndarray
    A: np.ndarray

    @property
    def w_lattice(self):
        return self.A


def stratify_square_well(cfg, a):
    h, single = _as_batch(cfg)
    h = h[0] if single else h
    return StratifiedConfig(h, B=h <= a, A=h <= 2 * a)


def stratify_delta(cfg):
    if isinstance(cfg, FieldConfig):
        h, b = cfg.heights, cfg.pinned
    else:
        h = np.asarray(cfg, float)
        b = h == 0.0
    return StratifiedConfig(h, B=b, A=b | (h <= 1.0))


# ---------------------------------------------------------------------------
# slacks (batch kernels; the public check_* wrap single configs)
# ---------------------------------------------------------------------------

def t_slacks(lat, heights, a):
    H, _ = _as_batch(heights)
    b_count = (H <= a).sum(axis=1)
    mapped = np.where(H <= a, H, H - a)
    budget = lat.d * a * lat.n_boundary + 2.0 * lat.d * a * b_count
    return energy_batch(lat, mapped, SOS) + budget - energy_batch(lat, H, SOS)


def s_sos_slacks(lat, heights):
    H, _ = _as_batch(heights)
    a_count = (H <= 1.0).sum(axis=1)
    mapped = np.where(H > 1.0, H - 1.0, 0.0)
    budget = lat.d * lat.n_boundary + 2.0 * lat.d * a_count
    return energy_batch(lat, mapped, SOS) + budget - energy_batch(lat, H, SOS)


def x_sums(lat, heights, w_masks):
    """Batched X(phi) for W = w_mask union exterior."""
    H, _ = _as_batch(heights)
    W, _ = _as_batch(w_masks)
    W = W.astype(float)
    padded = np.concatenate([W, np.ones((W.shape[0], 1))], axis=1)  # exterior in W
    w_nbrs = padded[:, lat.nbr].sum(axis=2)
    return 2.0 * ((1.0 - W) * H * w_nbrs).sum(axis=1)


def s_gauss_slacks(lat, heights):
    if lat.d != 2:
        raise UsageError("the Gaussian map inequality is stated for d = 2")
    H, _ = _as_batch(heights)
    A = H <= 1.0
    mapped = np.where(H > 1.0, H - 1.0, 0.0)
    budget = 2.0 * lat.n_boundary + 8.0 * A.sum(axis=1) + x_sums(lat, mapped, A)
    return energy_batch(lat, mapped, GAUSSIAN) + budget - energy_batch(lat, H, GAUSSIAN)


def check_T_inequality(lat, cfg, a):
    """Slack of the square-well map bound (SOS); >= 0 for every config."""
    if not a > 0:
        raise ParameterError("threshold a must be > 0")
    h, _ = _as_batch(cfg)
    return float(t_slacks(lat, h, a)[0])


def check_S_inequality_sos(lat, cfg):
    """Slack of the delta-pinning map bound (SOS); >= 0 for every config."""
    h, _ = _as_batch(cfg)
    return float(s_sos_slacks(lat, h)[0])


def boundary_sum_X(lat, cfg, w_lattice):
    """X(phi) for W = w_lattice union exterior.

    Every bond from W to a site y outside W contributes 2*phi_y; sites of
    W with such a bond are exactly the inner boundary dW, so the double
    sum reduces to counting, for each y not in W, its neighbors inside W
    (exterior neighbors always count: the exterior belongs to W).
    """
    h, single = _as_batch(cfg)
    w = np.asarray(w_lattice, dtype=bool)
    if w.ndim == 1:
        w = w[None, :]
    out = x_sums(lat, h, w)
    return float(out[0]) if single else out


def check_S_inequality_gauss(lat, cfg):
    """Slack of the Gaussian d=2 map bound, X evaluated on S phi; >= 0."""
    h, _ = _as_batch(cfg)
    return float(s_gauss_slacks(lat, h)[0])


def boundary_size(lat, a_mask):
    """|dW| for W = a_mask union exterior, counting depth-1 shell sites."""
    a_mask = np.asarray(a_mask, dtype=bool)
    padded = np.append(a_mask.astype(float), 1.0)
    w_nbrs = padded[lat.nbr].sum(axis=1)
    dw_sites = int((a_mask & (w_nbrs < 2 * lat.d)).sum())
    dw_shell = int(lat.outside_count[~a_mask].sum())
    return dw_sites + dw_shell


# ---------------------------------------------------------------------------
# configuration generators for the randomized suites
# ---------------------------------------------------------------------------

def random_heights(lat, n, rng, scale=1.0):
    """Mixed-scale nonnegative fields: exponential bulk plus flat layers."""
    kind = rng.integers(0, 3, n)
    h = rng.exponential(scale, (n, lat.n_sites))
    h[kind == 1] *= 3.0
    flat = kind == 2
    h[flat] = rng.uniform(0.0, 3.0 * scale, (int(flat.sum()), 1)) + 0.3 * h[flat]
    return h


def adversarial_heights(lat, n, rng, thresholds):
    """Heights clustered at and within 1e-12 of the map thresholds."""
    pool = [0.0]
    for t in thresholds:
        pool.extend([t, t - 1e-12, t + 1e-12, 0.5 * t, 2.0 * t])
    pool = np.array(pool)
    h = pool[rng.integers(0, len(pool), (n, lat.n_sites))]
    spice = rng.random((n, lat.n_sites)) < 0.1
    h = np.where(spice, rng.exponential(1.0, (n, lat.n_sites)), h)
    return h


# ---------------------------------------------------------------------------
# measure-level boundary moment (MCMC estimate)
# ---------------------------------------------------------------------------

def check_boundary_moment(lat, a_mask, sweeps=4000, burn_in=1000, seed=0):
    """MCMC estimate of the normalized boundary sum |dW|^-1 X(phi).

    Sampled under the Gaussian hard-wall measure with the sites of a_mask
    clamped to 0 (d = 2). The measure-level proof step needs this moment
    bounded by an absolute constant; the estimate is reported with its
    standard error for inspection rather than asserted against a value.
    """
    from .sampling import ChainParams, run_chain

    if lat.d != 2:
        raise UsageError("boundary moment check is stated for d = 2")
    a_mask = np.asarray(a_mask, dtype=bool)
    if a_mask.all():
        return batch_means(np.zeros(max(8, sweeps - burn_in)))
    params = ChainParams(
        d=lat.d, N=lat.N, psi=GAUSSIAN, pin=Pinning.none(),
        sweeps=sweeps, burn_in=burn_in, seed=seed, clamp=a_mask,
    )
    trace = run_chain(params)
    return batch_means(trace.boundary_moment)


# ---------------------------------------------------------------------------
# randomized verification suite
# ---------------------------------------------------------------------------

SLACK_TOL = 1e-9  # covers float summation rounding in exactly-tight cases


def verify_suite(n_random=20000, n_adversarial=1000, seed=2024, chunk=4000):
    """Run the three inequalities and both map set identities.

    Returns a list of result rows: name, configs, min_slack (or worst
    identity margin) and the number of violations, which must be zero.
    """
    rng = np.random.default_rng(seed)
    rows = []

    def run_slices(name, lats, slack_fn, thresholds):
        worst = np.inf
        total = 0
        bad = 0
        for lat in lats:
            n_r = max(1, -(-n_random // len(lats)))
            n_a = max(1, -(-n_adversarial // len(lats)))
            for gen, count in (
                (lambda m: random_heights(lat, m, rng), n_r),
                (lambda m: adversarial_heights(lat, m, rng, thresholds), n_a),
            ):
                done = 0
                while done < count:
                    m = min(chunk, count - done)
                    s = slack_fn(lat, gen(m))
                    worst = min(worst, float(s.min()))
                    bad += int((s < -SLACK_TOL).sum())
                    total += m
                    done += m
        rows.append(
            {"name": name, "configs": total, "min_slack": worst, "violations": bad}
        )

    from .lattice import Lattice

    a = 0.1
    run_slices(
        "square_well_map_T (sos)",
        [Lattice(d, N) for d in (1, 2) for N in (2, 3, 4, 5, 6)],
        lambda lat, h: t_slacks(lat, h, a),
        thresholds=(a, 2 * a),
    )
    run_slices(
        "delta_map_S (sos)",
        [Lattice(d, N) for d in (1, 2, 3) for N in (2, 3, 4, 5)],
        lambda lat, h: s_sos_slacks(lat, h),
        thresholds=(1.0,),
    )
    run_slices(
        "delta_map_S (gaussian d=2)",
        [Lattice(2, N) for N in (2, 3, 4, 5, 6)],
        lambda lat, h: s_gauss_slacks(lat, h),
        thresholds=(1.0,),
    )

    # map set identities: #{T phi <= a} >= #{phi <= 2a}, #{S phi = 0} = #{phi <= 1}
    lat = Lattice(2, 5)
    h = np.concatenate(
        [random_heights(lat, n_random, rng),
         adversarial_heights(lat, n_adversarial, rng, (a, 2 * a, 1.0))]
    )
    t_gap = ((map_T(h, a) <= a).sum(axis=1) - (h <= 2 * a).sum(axis=1)).min()
    s_gap = np.abs((map_S(h) == 0.0).sum(axis=1) - (h <= 1.0).sum(axis=1)).max()
    rows.append(
        {"name": "count_map_T", "configs": len(h), "min_slack": float(t_gap),
         "violations": int(t_gap < 0)}
    )
    rows.append(
        {"name": "count_map_S", "configs": len(h), "min_slack": float(-s_gap),
         "violations": int(s_gap > 0)}
    )
    return rows
