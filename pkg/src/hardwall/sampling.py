"""Exact heat-bath and Metropolis kernels plus sweep drivers.

Heat bath redraws a site from its exact conditional (atom included under
delta pinning), so the target measure is invariant by construction. The
Metropolis kernel reflects proposals off the wall, |t + U(-w, w)|, which
keeps the proposal symmetric; it cannot serve delta pinning because it
never proposes into or out of the atom.

Sweeps run either in sequential row-major order (site-by-site scalar
kernels) or in checkerboard order, where all sites of one color update
simultaneously from vectorized array kernels: a site's conditional only
involves opposite-color neighbors, so the parallel update is exact.
Given a seed, traces are bit-reproducible.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvariantViolation, ParameterError, UsageError
from .lattice import Lattice
from .model import (
    DELTA,
    FieldConfig,
    Pinning,
    Potential,
    SOS,
    SQUARE_WELL,
    gauss_law_arrays,
    gauss_segment_log_masses,
    site_conditional,
    sos_segment_arrays,
    sos_segment_log_masses,
    trunc_gauss_ppf,
)

BIG = 1e300


# ---------------------------------------------------------------------------
# draws from conditional laws
# ---------------------------------------------------------------------------

def _pw_exp_inverse(lo, hi, slope, u):
    """Quantile within one piecewise-exponential segment, stable for any
    slope * width."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    s = np.asarray(slope, float)
    u = np.asarray(u, float)
    dx = np.where(np.isinf(hi), np.inf, hi - lo)
    t = np.empty(np.broadcast(lo, hi, s, u).shape)
    lo, hi, s, u, dx = np.broadcast_arrays(lo, hi, s, u, dx)

    m = s == 0
    t[m] = lo[m] + u[m] * dx[m]
    m = s > 0
    with np.errstate(over="ignore"):
        t[m] = hi[m] + np.log(u[m] + (1.0 - u[m]) * np.exp(-s[m] * dx[m])) / s[m]
    m = (s < 0) & np.isinf(hi)
    t[m] = lo[m] + np.log1p(-u[m]) / s[m]
    m = (s < 0) & ~np.isinf(hi)
    t[m] = lo[m] + np.log1p(u[m] * np.expm1(s[m] * dx[m])) / s[m]
    return np.clip(t, lo, np.minimum(hi, BIG))


def sample_piecewise_exponential(law, rng, size=None):
    """Draw from the continuous part of a piecewise-exponential law.

    Segment chosen by its closed-form mass, then inverted within the
    segment. Zero-width segments carry zero mass and are never chosen.
    The atom, if any, is ignored here (heat_bath_site handles it).
    """
    if getattr(law, "kind", None) != "sos":
        raise UsageError("law does not have piecewise-exponential segments")
    n = 1 if size is None else int(size)
    lm = law.log_masses
    if np.all(np.isinf(lm) & (lm < 0)):
        raise InvariantViolation("conditional law has zero continuous mass")
    w = np.exp(lm - lm.max())
    cum = np.cumsum(w)
    r = rng.random(n) * cum[-1]
    k = np.searchsorted(cum, r, side="right").clip(0, len(w) - 1)
    t = _pw_exp_inverse(law.lo[k], law.hi[k], law.slope[k], rng.random(n))
    return float(t[0]) if size is None else t


def sample_truncated_gaussian(mean, variance, rng, segments=None, size=None):
    """Draw from a Gaussian restricted to [0, inf) with weighted segments.

    segments: optional list of (lo, hi, log_weight) partitioning [0, inf);
    defaults to the single unweighted segment. Stable when the mean sits
    far below the wall (survival-anchored inverse CDF).
    """
    if not variance > 0:
        raise ParameterError(f"variance must be > 0, got {variance!r}")
    sigma = math.sqrt(variance)
    n = 1 if size is None else int(size)
    if segments is None:
        segments = [(0.0, np.inf, 0.0)]
    seg_lo = np.array([s[0] for s in segments], float)
    seg_hi = np.array([s[1] for s in segments], float)
    seg_logw = np.array([s[2] for s in segments], float)
    lm = gauss_segment_log_masses(
        np.array([mean]), sigma, seg_lo[None], seg_hi[None], seg_logw[None],
        np.zeros(1),
    )[0]
    w = np.exp(lm - lm.max())
    cum = np.cumsum(w)
    r = rng.random(n) * cum[-1]
    k = np.searchsorted(cum, r, side="right").clip(0, len(w) - 1)
    t = trunc_gauss_ppf(mean, sigma, seg_lo[k], seg_hi[k], rng.random(n))
    return float(t[0]) if size is None else t


# ---------------------------------------------------------------------------
# single-site kernels (scalar reference implementations)
# ---------------------------------------------------------------------------

def heat_bath_site(lat, cfg, site, psi, pin, rng):
    """Redraw one site from its exact conditional; returns the new height."""
    law = site_conditional(lat, cfg, site, psi, pin)
    if rng.random() < law.atom_probability():
        cfg.heights[site] = 0.0
        cfg.pinned[site] = True
        return 0.0
    cfg.pinned[site] = False
    if law.kind == "sos":
        t = sample_piecewise_exponential(law, rng)
    elif law.kind == "gaussian":
        lm = law.log_masses
        w = np.exp(lm - lm.max())
        cum = np.cumsum(w)
        k = int(np.searchsorted(cum, rng.random() * cum[-1], side="right").clip(0, len(w) - 1))
        t = float(trunc_gauss_ppf(law.mu, law.sigma, law.seg_lo[k], law.seg_hi[k], rng.random()))
    else:
        # numeric law: inverse CDF on its grid
        f = np.exp(law.logf - law.logf.max())
        cum = np.concatenate([[0.0], np.cumsum(np.diff(law.t) * 0.5 * (f[:-1] + f[1:]))])
        t = float(np.interp(rng.random() * cum[-1], cum, law.t))
    cfg.heights[site] = t
    return t


def metropolis_site(lat, cfg, site, psi, pin, w, rng):
    """Reflected random-walk Metropolis step at one site; returns accept flag."""
    if pin.kind == DELTA:
        raise UsageError("Metropolis cannot serve delta pinning (atom at 0)")
    if not w > 0:
        raise ParameterError("step width must be > 0")
    h = cfg.heights
    old = h[site]
    prop = abs(old + rng.uniform(-w, w))
    nb = lat.padded(h)[lat.nbr[site]]
    d_energy = float(psi(prop - nb).sum() - psi(old - nb).sum())
    d_well = 0.0
    if pin.kind == SQUARE_WELL:
        d_well = pin.b * ((prop <= pin.a) - (old <= pin.a))
    if rng.random() < math.exp(min(0.0, -d_energy + d_well)):
        h[site] = prop
        return True
    return False


# ---------------------------------------------------------------------------
# vectorized checkerboard updates
# ---------------------------------------------------------------------------

def _color_heat_bath_sos(lat, h, pinned, pin, rng, idx):
    nb = lat.padded(h)[lat.nbr[idx]]
    lo, hi, slope, logf_lo = sos_segment_arrays(nb, pin)
    lm = sos_segment_log_masses(lo, hi, slope, logf_lo)
    if pin.kind == DELTA and pin.eps > 0:
        atom = math.log(pin.eps) - nb.sum(axis=1)
        shift = np.maximum(lm.max(axis=1), atom)
        wm = np.exp(lm - shift[:, None])
        am = np.exp(atom - shift)
        tot = am + wm.sum(axis=1)
        hit_atom = rng.random(len(idx)) * tot < am
    else:
        shift = lm.max(axis=1)
        wm = np.exp(lm - shift[:, None])
        hit_atom = np.zeros(len(idx), dtype=bool)
    cum = np.cumsum(wm, axis=1)
    r = rng.random(len(idx)) * cum[:, -1]
    k = (cum < r[:, None]).sum(axis=1).clip(0, wm.shape[1] - 1)
    rows = np.arange(len(idx))
    t = _pw_exp_inverse(lo[rows, k], hi[rows, k], slope[rows, k], rng.random(len(idx)))
    t[hit_atom] = 0.0
    h[idx] = t
    pinned[idx] = hit_atom


def _color_heat_bath_gauss(lat, h, pinned, pin, rng, idx):
    nb = lat.padded(h)[lat.nbr[idx]]
    mu, sigma, seg_lo, seg_hi, seg_logw, lc = gauss_law_arrays(nb, pin)
    lm = gauss_segment_log_masses(mu, sigma, seg_lo, seg_hi, seg_logw, lc)
    if pin.kind == DELTA and pin.eps > 0:
        atom = math.log(pin.eps) - 0.5 * np.square(nb).sum(axis=1)
        shift = np.maximum(lm.max(axis=1), atom)
        wm = np.exp(lm - shift[:, None])
        am = np.exp(atom - shift)
        tot = am + wm.sum(axis=1)
        hit_atom = rng.random(len(idx)) * tot < am
    else:
        shift = lm.max(axis=1)
        wm = np.exp(lm - shift[:, None])
        hit_atom = np.zeros(len(idx), dtype=bool)
    if wm.shape[1] == 1:
        k = np.zeros(len(idx), dtype=int)
    else:
        cum = np.cumsum(wm, axis=1)
        r = rng.random(len(idx)) * cum[:, -1]
        k = (cum < r[:, None]).sum(axis=1).clip(0, wm.shape[1] - 1)
    rows = np.arange(len(idx))
    t = trunc_gauss_ppf(mu, sigma, seg_lo[rows, k], seg_hi[rows, k], rng.random(len(idx)))
    t[hit_atom] = 0.0
    h[idx] = t
    pinned[idx] = hit_atom


def _color_metropolis(lat, h, pin, psi, w, rng, idx):
    nb = lat.padded(h)[lat.nbr[idx]]
    old = h[idx]
    prop = np.abs(old + rng.uniform(-w, w, len(idx)))
    d_energy = (psi(prop[:, None] - nb) - psi(old[:, None] - nb)).sum(axis=1)
    if pin.kind == SQUARE_WELL:
        d_energy = d_energy - pin.b * ((prop <= pin.a).astype(float) - (old <= pin.a))
    acc = rng.random(len(idx)) < np.exp(np.minimum(0.0, -d_energy))
    h[idx] = np.where(acc, prop, old)
    return int(acc.sum())


# ---------------------------------------------------------------------------
# chain driver
# ---------------------------------------------------------------------------

@dataclass
class ChainParams:
    """Everything needed to reproduce one chain bit-for-bit."""

    d: int
    N: int
    psi: Potential = SOS
    pin: Pinning = field(default_factory=Pinning.none)
    kernel: str = "heat_bath"
    sweeps: int = 1000
    burn_in: int = 0
    thinning: int = 1
    seed: int = 0
    step_width: float = 1.0
    sweep_order: str = "checkerboard"
    init: str = "exp"
    init_height: float = 1.0
    clamp: object = None  # bool mask of sites frozen at height 0

    def __post_init__(self):
        if self.kernel not in ("heat_bath", "metropolis"):
            raise ParameterError(f"unknown kernel {self.kernel!r}")
        if self.sweep_order not in ("checkerboard", "sequential"):
            raise ParameterError(f"unknown sweep order {self.sweep_order!r}")
        if self.init not in ("exp", "flat"):
            raise ParameterError(f"unknown init {self.init!r}")
        if self.burn_in < 0 or self.sweeps < self.burn_in:
            raise ParameterError("need sweeps >= burn_in >= 0")
        if self.thinning < 1:
            raise ParameterError("thinning must be >= 1")
        if self.kernel == "metropolis" and self.pin.kind == DELTA:
            raise ParameterError(
                "Metropolis cannot be used with delta pinning: the proposal "
                "never enters or leaves the atom at height 0"
            )
        if self.kernel == "metropolis" and not self.step_width > 0:
            raise ParameterError("step_width must be > 0")


@dataclass
class Trace:
    """Observable snapshots from one chain, plus its final state."""

    nu: np.ndarray
    mean_height: np.ndarray
    center_height: np.ndarray
    max_height: np.ndarray
    boundary_moment: np.ndarray
    accept_rate: float
    final: FieldConfig
    params: ChainParams

    @property
    def n_snapshots(self):
        return len(self.nu)


def _count_pinned(h, pinned, pin):
    if pin.kind == SQUARE_WELL:
        return int((h <= pin.a).sum())
    if pin.kind == DELTA:
        return int(pinned.sum())
    return 0


def _x_over_boundary(lat, h, a_mask):
    """Diagnostic |dW|^-1 * X for W = a_mask union exterior (Gaussian d=2)."""
    in_a = lat.padded(a_mask.astype(float), fill=1.0)  # exterior counts as W
    w_nbrs = in_a[lat.nbr].sum(axis=1)
    free = ~a_mask
    x = 2.0 * float((h * w_nbrs)[free].sum())
    dw_shell = int(lat.outside_count[free].sum())
    dw_sites = int((a_mask & (w_nbrs < 2 * lat.d)).sum())
    dw = dw_shell + dw_sites
    return x / dw if dw else 0.0


def run_chain(params, chain_index=0):
    """Run one chain and collect snapshots after burn-in.

    RNG streams derive from (seed, chain_index) through SeedSequence, so
    replicas are independent and every run is reproducible. Heights start
    i.i.d. Exponential(1) (strictly positive, biased toward neither
    phase) unless init="flat".
    """
    lat = Lattice(params.d, params.N)
    rng = np.random.default_rng(
        np.random.SeedSequence([params.seed & 0xFFFFFFFFFFFFFFFF, chain_index])
    )
    n = lat.n_sites
    if params.init == "exp":
        h = rng.exponential(1.0, n)
    else:
        h = np.full(n, float(params.init_height))
    pinned = np.zeros(n, dtype=bool)
    clamp = (
        np.zeros(n, dtype=bool)
        if params.clamp is None
        else np.asarray(params.clamp, dtype=bool).copy()
    )
    h[clamp] = 0.0

    free = ~clamp
    if params.sweep_order == "checkerboard":
        groups = [
            np.nonzero((lat.color == c) & free)[0] for c in (0, 1)
        ]
        groups = [g for g in groups if len(g)]
    else:
        groups = None
        sites = np.nonzero(free)[0]

    track_x = params.psi.is_gaussian and lat.d == 2
    n_snap = max(0, (params.sweeps - params.burn_in) // params.thinning)
    nu = np.zeros(n_snap, dtype=np.int64)
    mh = np.zeros(n_snap)
    ch = np.zeros(n_snap)
    xh = np.zeros(n_snap)
    bm = np.zeros(n_snap) if track_x else None
    accepted = 0
    proposed = 0
    cfg = FieldConfig(h, pinned)

    snap = 0
    for sweep in range(1, params.sweeps + 1):
        if params.kernel == "heat_bath":
            if groups is not None:
                color_fn = (
                    _color_heat_bath_sos if params.psi.is_sos
                    else _color_heat_bath_gauss if params.psi.is_gaussian
                    else None
                )
                if color_fn is None:
                    raise UsageError(
                        "checkerboard sweeps support the built-in potentials; "
                        "use sweep_order='sequential' for custom interactions"
                    )
                for idx in groups:
                    color_fn(lat, h, pinned, params.pin, rng, idx)
            else:
                for site in sites:
                    heat_bath_site(lat, cfg, site, params.psi, params.pin, rng)
        else:
            if groups is not None:
                for idx in groups:
                    accepted += _color_metropolis(
                        lat, h, params.pin, params.psi, params.step_width, rng, idx
                    )
                    proposed += len(idx)
            else:
                for site in sites:
                    accepted += metropolis_site(
                        lat, cfg, site, params.psi, params.pin,
                        params.step_width, rng,
                    )
                    proposed += 1

        if sweep > params.burn_in and (sweep - params.burn_in) % params.thinning == 0:
            if (h < 0).any() or (h[pinned] != 0).any():
                raise InvariantViolation(
                    f"state invariant broken at sweep {sweep}: "
                    f"min height {h.min()!r}, pinned mismatch "
                    f"{int((h[pinned] != 0).sum())} sites"
                )
            nu[snap] = _count_pinned(h, pinned, params.pin)
            mh[snap] = h.mean()
            ch[snap] = h[lat.center_site]
            xh[snap] = h.max()
            if track_x:
                bm[snap] = _x_over_boundary(lat, h, pinned | clamp)
            snap += 1

    return Trace(
        nu=nu,
        mean_height=mh,
        center_height=ch,
        max_height=xh,
        boundary_moment=bm,
        accept_rate=(accepted / proposed) if proposed else None,
        final=cfg,
        params=params,
    )
