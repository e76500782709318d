"""Interaction potentials, pinning, the Hamiltonian, and exact single-site
conditional laws for the hard-wall gradient field.

The energy of a configuration phi >= 0 on the cube is the sum of the bond
potential over interior bonds plus, for every bond leaving the cube, the
potential of the site height itself (zero boundary condition). A square
well rewards heights <= a with -b per site; delta pinning instead places
an atom of weight eps at height exactly 0 in each single-site measure.

Because the exterior is pinned at 0, an outside bond behaves exactly like
a neighbor of height 0; the conditional density of one site given its
neighbors is

    f(t) ~ exp(-sum_j Psi(t - n_j)) * exp(b * [t <= a])      on t >= 0,

with n_j running over the 2d neighbor values (exterior entries 0). For
Psi(x) = |x| this is piecewise exponential with breakpoints at the sorted
neighbor values; for Psi(x) = x^2/2 it is a Gaussian with mean equal to
the neighbor average and variance 1/(2d), truncated to [0, inf). Both are
represented in closed form so heat-bath updates are exact.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp, ndtr, ndtri

from .errors import InvariantViolation, ParameterError, UsageError

SQRT_2PI = math.sqrt(2.0 * math.pi)


# ---------------------------------------------------------------------------
# interaction potential
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Potential:
    """Even bond potential Psi with Psi(0) = 0 and Psi >= 0.

    The two built-in variants (absolute value, half square) cover all
    quantitative behavior of the package; `custom` is an extension hook
    for other even interactions with a declared convexity class and is
    served by a slower numerically integrated conditional.
    """

    kind: str
    fn: object = None
    convexity: str = None

    def __call__(self, x):
        if self.kind == "sos":
            return np.abs(x)
        if self.kind == "gaussian":
            return 0.5 * np.square(x)
        return self.fn(x)

    @property
    def is_sos(self):
        return self.kind == "sos"

    @property
    def is_gaussian(self):
        return self.kind == "gaussian"

    @classmethod
    def custom(cls, fn, convexity):
        if convexity not in ("concave", "uniformly_convex"):
            raise ParameterError(
                "convexity must be 'concave' or 'uniformly_convex'"
            )
        probe = np.array([0.0, 0.3, 1.7, 4.0])
        vals = np.asarray(fn(probe), dtype=float)
        if abs(vals[0]) > 1e-12 or (vals < -1e-12).any():
            raise ParameterError("potential must satisfy fn(0) = 0 and fn >= 0")
        if not np.allclose(vals, np.asarray(fn(-probe), dtype=float)):
            raise ParameterError("potential must be even")
        return cls("custom", fn=fn, convexity=convexity)


SOS = Potential("sos")
GAUSSIAN = Potential("gaussian")


def potential_from_name(name):
    table = {"sos": SOS, "gaussian": GAUSSIAN}
    if name not in table:
        raise ParameterError(f"unknown interaction {name!r}")
    return table[name]


# ---------------------------------------------------------------------------
# pinning
# ---------------------------------------------------------------------------

NONE = "none"
SQUARE_WELL = "square_well"
DELTA = "delta"


def epsilon_of(a, b):
    """Effective pinning strength a * e^b of the square well (a, b)."""
    if not a > 0:
        raise ParameterError(f"well width a must be > 0, got {a!r}")
    if not b > 0:
        raise ParameterError(f"well depth b must be > 0, got {b!r}")
    return a * math.exp(b)


@dataclass(frozen=True)
class Pinning:
    """No pinning, a square well (a, b), or a delta atom of weight eps."""

    kind: str
    a: float = 0.0
    b: float = 0.0
    eps: float = 0.0

    @classmethod
    def none(cls):
        return cls(NONE)

    @classmethod
    def square_well(cls, a, b):
        epsilon_of(a, b)  # validates a > 0, b > 0
        return cls(SQUARE_WELL, a=float(a), b=float(b))

    @classmethod
    def delta(cls, eps):
        if eps < 0:
            raise ParameterError(f"atom weight eps must be >= 0, got {eps!r}")
        return cls(DELTA, eps=float(eps))

    @property
    def epsilon_eff(self):
        if self.kind == SQUARE_WELL:
            return epsilon_of(self.a, self.b)
        if self.kind == DELTA:
            return self.eps
        return 0.0


def pinning_from_name(name, a=None, b=None, eps=None):
    if name == NONE:
        return Pinning.none()
    if name == SQUARE_WELL:
        if a is None or b is None:
            raise ParameterError("square_well pinning requires a and b")
        return Pinning.square_well(a, b)
    if name == DELTA:
        if eps is None:
            raise ParameterError("delta pinning requires epsilon")
        return Pinning.delta(eps)
    raise ParameterError(f"unknown pinning {name!r}")


# ---------------------------------------------------------------------------
# field configuration
# ---------------------------------------------------------------------------

@dataclass
class FieldConfig:
    """Heights over the cube plus the delta-pinning atom mask.

    heights[x] >= 0 always (hard wall); pinned[x] implies heights[x] == 0.
    Under square-well or no pinning the mask stays all-false.
    """

    heights: np.ndarray
    pinned: np.ndarray = None

    def __post_init__(self):
        self.heights = np.asarray(self.heights, dtype=float)
        if self.pinned is None:
            self.pinned = np.zeros(self.heights.shape, dtype=bool)
        else:
            self.pinned = np.asarray(self.pinned, dtype=bool)

    @classmethod
    def flat(cls, lat, height=0.0):
        if height < 0:
            raise ParameterError("flat start height must be >= 0")
        return cls(np.full(lat.n_sites, float(height)))

    def copy(self):
        return FieldConfig(self.heights.copy(), self.pinned.copy())

    def validate(self, pin=None):
        if (self.heights < 0).any():
            raise InvariantViolation("hard wall violated: negative height")
        if (self.heights[self.pinned] != 0).any():
            raise InvariantViolation("pinned site with nonzero height")
        if pin is not None and pin.kind != DELTA and self.pinned.any():
            raise InvariantViolation("pinned mask set without delta pinning")


def _heights_of(cfg):
    return cfg.heights if isinstance(cfg, FieldConfig) else np.asarray(cfg, float)


# ---------------------------------------------------------------------------
# energy
# ---------------------------------------------------------------------------

def energy_total(lat, cfg, psi):
    """Total gradient energy, each interior bond counted once.

    Bonds to the exterior contribute Psi(height) each (zero boundary).
    """
    h = _heights_of(cfg)
    if (h < 0).any():
        raise InvariantViolation("negative height in energy_total")
    a, b = lat.bonds[:, 0], lat.bonds[:, 1]
    e = float(psi(h[a] - h[b]).sum()) if len(a) else 0.0
    e += float((lat.outside_count * psi(h)).sum())
    return e


def energy_batch(lat, heights, psi):
    """energy_total over a (n_configs, n_sites) batch of height arrays."""
    H = np.asarray(heights, dtype=float)
    a, b = lat.bonds[:, 0], lat.bonds[:, 1]
    e = psi(H[:, a] - H[:, b]).sum(axis=1) if len(a) else np.zeros(H.shape[0])
    e += (psi(H) * lat.outside_count).sum(axis=1)
    return e


def energy_delta(lat, cfg, site, new_height, psi):
    """Energy change from setting one site to new_height.

    Touches only the 2d bonds of the site; outside bonds are neighbors of
    height 0, so they need no special case.
    """
    if new_height < 0:
        raise ParameterError("new_height must be >= 0")
    h = _heights_of(cfg)
    nb = lat.padded(h)[lat.nbr[site]]
    old = h[site]
    return float(psi(new_height - nb).sum() - psi(old - nb).sum())


def well_log_weight(cfg, pin):
    """log of the square-well Boltzmann factor: b * #{x : phi_x <= a}."""
    if pin.kind != SQUARE_WELL:
        raise UsageError("well_log_weight needs square-well pinning")
    h = _heights_of(cfg)
    return float(pin.b * (h <= pin.a).sum())


# ---------------------------------------------------------------------------
# conditional laws (vectorized builders shared with the sweep kernels)
# ---------------------------------------------------------------------------

def sos_segment_arrays(nbrs, pin):
    """Segment decomposition of log f(t) = -sum_j |t - n_j| + b*[t<=a].

    nbrs has shape (m, 2d). Returns (lo, hi, slope, logf_lo), each of
    shape (m, K): on segment k the unnormalized log density is
    logf_lo[:, k] + slope[:, k] * (t - lo[:, k]). The last segment is
    unbounded (hi = inf, slope = -2d). Zero-width segments are kept but
    receive zero mass. Well weights are folded into logf_lo; the slopes
    are the integers 2d - 2 * #{n_j <= t}.
    """
    nbrs = np.asarray(nbrs, dtype=float)
    m, twod = nbrs.shape
    if pin.kind == SQUARE_WELL:
        vals = np.concatenate([nbrs, np.full((m, 1), pin.a)], axis=1)
        real = np.concatenate(
            [np.ones((m, twod)), np.zeros((m, 1))], axis=1
        )
        order = np.argsort(vals, axis=1, kind="stable")
        vals = np.take_along_axis(vals, order, axis=1)
        below_after = np.cumsum(np.take_along_axis(real, order, axis=1), axis=1)
    else:
        vals = np.sort(nbrs, axis=1)
        below_after = np.broadcast_to(
            np.arange(1.0, twod + 1.0), (m, twod)
        )
    lo = np.concatenate([np.zeros((m, 1)), vals], axis=1)
    hi = np.concatenate([vals, np.full((m, 1), np.inf)], axis=1)
    below = np.concatenate([np.zeros((m, 1)), below_after], axis=1)
    slope = twod - 2.0 * below
    width = np.diff(lo, axis=1)
    logf_lo = -nbrs.sum(axis=1, keepdims=True) + np.concatenate(
        [np.zeros((m, 1)), np.cumsum(slope[:, :-1] * width, axis=1)], axis=1
    )
    if pin.kind == SQUARE_WELL:
        logf_lo = logf_lo + pin.b * (hi <= pin.a)
    return lo, hi, slope, logf_lo


def sos_segment_log_masses(lo, hi, slope, logf_lo):
    """Closed-form log of integral exp(logf_lo + slope*(t-lo)) over [lo, hi]."""
    dx = hi - lo
    out = np.full(lo.shape, -np.inf)
    last = np.isinf(hi)  # slope = -2d there
    out[last] = logf_lo[last] - np.log(-slope[last])
    fin = ~last & (dx > 0)
    s, d_, f = slope[fin], dx[fin], logf_lo[fin]
    v = np.empty_like(s)
    z = s == 0
    v[z] = f[z] + np.log(d_[z])
    p = s > 0
    v[p] = f[p] + s[p] * d_[p] + np.log(-np.expm1(-s[p] * d_[p])) - np.log(s[p])
    n = s < 0
    v[n] = f[n] + np.log(-np.expm1(s[n] * d_[n])) - np.log(-s[n])
    out[fin] = v
    return out


def _ndtr_diff(z0, z1):
    """Phi(z1) - Phi(z0) for z1 >= z0, stable in both tails."""
    z0 = np.asarray(z0, dtype=float)
    z1 = np.asarray(z1, dtype=float)
    both_hi = (z0 + z1) > 0
    return np.where(both_hi, ndtr(-z0) - ndtr(-z1), ndtr(z1) - ndtr(z0))


def gauss_law_arrays(nbrs, pin):
    """Per-site parameters of the truncated-Gaussian conditional.

    Returns (mu, sigma, seg_lo, seg_hi, seg_logw, lc) where the
    unnormalized density is exp(lc - (t-mu)^2/(2 sigma^2) + seg_logw) on
    each segment of [0, inf). lc is chosen so that the density equals
    exp(-sum_j (t-n_j)^2 / 2) exactly.
    """
    nbrs = np.asarray(nbrs, dtype=float)
    m, twod = nbrs.shape
    mu = nbrs.mean(axis=1)
    sigma = 1.0 / math.sqrt(twod)
    d_half = twod / 2.0
    lc = -0.5 * np.square(nbrs).sum(axis=1) + d_half * np.square(mu)
    if pin.kind == SQUARE_WELL:
        seg_lo = np.tile([0.0, pin.a], (m, 1))
        seg_hi = np.tile([pin.a, np.inf], (m, 1))
        seg_logw = np.tile([pin.b, 0.0], (m, 1))
    else:
        seg_lo = np.zeros((m, 1))
        seg_hi = np.full((m, 1), np.inf)
        seg_logw = np.zeros((m, 1))
    return mu, sigma, seg_lo, seg_hi, seg_logw, lc


def gauss_segment_log_masses(mu, sigma, seg_lo, seg_hi, seg_logw, lc):
    z0 = (seg_lo - mu[:, None]) / sigma
    z1 = (seg_hi - mu[:, None]) / sigma
    z1 = np.where(np.isinf(seg_hi), np.inf, z1)
    with np.errstate(divide="ignore"):
        log_dphi = np.log(_ndtr_diff(z0, z1))
    return seg_logw + lc[:, None] + math.log(sigma * SQRT_2PI) + log_dphi


# ---------------------------------------------------------------------------
# law objects
# ---------------------------------------------------------------------------

@dataclass
class PiecewiseExpLaw:
    """Single-site conditional for the absolute-value interaction.

    Continuous density exp(logf_lo + slope*(t-lo)) per segment, plus an
    optional atom at 0 with log weight atom_log (delta pinning).
    """

    lo: np.ndarray
    hi: np.ndarray
    slope: np.ndarray
    logf_lo: np.ndarray
    atom_log: float = -np.inf

    kind: str = field(default="sos", init=False)

    @property
    def log_masses(self):
        return sos_segment_log_masses(self.lo, self.hi, self.slope, self.logf_lo)

    @property
    def log_continuous_mass(self):
        return float(logsumexp(self.log_masses))

    def atom_probability(self):
        if self.atom_log == -np.inf:
            return 0.0
        return float(
            np.exp(self.atom_log - np.logaddexp(self.atom_log, self.log_continuous_mass))
        )

    def cdf(self, t):
        """CDF of the continuous part (normalized to total mass 1)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        lm = self.log_masses
        total = logsumexp(lm)
        masses = np.exp(lm - total)
        out = np.zeros(t.shape)
        for k in range(len(self.lo)):
            lo, hi, s, f = self.lo[k], self.hi[k], self.slope[k], self.logf_lo[k]
            full = t >= hi
            out[full] += masses[k]
            part = (t > lo) & ~full
            if part.any():
                x = t[part] - lo
                if s == 0:
                    frac = x / (hi - lo)
                elif np.isinf(hi):
                    frac = -np.expm1(s * x)
                else:
                    frac = np.expm1(s * x) / np.expm1(s * (hi - lo))
                out[part] += masses[k] * frac
        return out if out.shape != (1,) else float(out[0])


@dataclass
class TruncatedGaussianLaw:
    """Single-site conditional for the quadratic interaction.

    Gaussian(mu, sigma^2) restricted to [0, inf), with per-segment extra
    log weights (the square well), plus an optional atom at 0.
    """

    mu: float
    sigma: float
    seg_lo: np.ndarray
    seg_hi: np.ndarray
    seg_logw: np.ndarray
    lc: float = 0.0
    atom_log: float = -np.inf

    kind: str = field(default="gaussian", init=False)

    @property
    def log_masses(self):
        return gauss_segment_log_masses(
            np.array([self.mu]),
            self.sigma,
            self.seg_lo[None, :],
            self.seg_hi[None, :],
            self.seg_logw[None, :],
            np.array([self.lc]),
        )[0]

    @property
    def log_continuous_mass(self):
        return float(logsumexp(self.log_masses))

    def atom_probability(self):
        if self.atom_log == -np.inf:
            return 0.0
        return float(
            np.exp(self.atom_log - np.logaddexp(self.atom_log, self.log_continuous_mass))
        )

    def cdf(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        lm = self.log_masses
        total = logsumexp(lm)
        masses = np.exp(lm - total)
        out = np.zeros(t.shape)
        for k in range(len(self.seg_lo)):
            lo, hi = self.seg_lo[k], self.seg_hi[k]
            z0 = (lo - self.mu) / self.sigma
            z1 = np.inf if np.isinf(hi) else (hi - self.mu) / self.sigma
            seg_mass = _ndtr_diff(z0, z1)
            full = t >= hi
            out[full] += masses[k]
            part = (t > lo) & ~full
            if part.any() and seg_mass > 0:
                zt = (t[part] - self.mu) / self.sigma
                out[part] += masses[k] * _ndtr_diff(z0, zt) / seg_mass
        return out if out.shape != (1,) else float(out[0])


@dataclass
class NumericLaw:
    """Grid-based conditional for custom potentials (extension hook).

    Accuracy is set by the grid resolution; the built-in interactions
    never take this path.
    """

    t: np.ndarray
    logf: np.ndarray
    atom_log: float = -np.inf

    kind: str = field(default="numeric", init=False)

    @property
    def log_continuous_mass(self):
        w = np.diff(self.t)
        mids = np.logaddexp(self.logf[:-1], self.logf[1:]) - math.log(2.0)
        return float(logsumexp(mids + np.log(w)))

    def atom_probability(self):
        if self.atom_log == -np.inf:
            return 0.0
        return float(
            np.exp(self.atom_log - np.logaddexp(self.atom_log, self.log_continuous_mass))
        )

    def cdf(self, t):
        f = np.exp(self.logf - self.logf.max())
        cum = np.concatenate([[0.0], np.cumsum(np.diff(self.t) * 0.5 * (f[:-1] + f[1:]))])
        cum /= cum[-1]
        return np.interp(t, self.t, cum)


def site_conditional(lat, cfg, site, psi, pin):
    """Exact conditional law of one site given its current neighbors.

    Exterior neighbors enter as height 0. Under delta pinning the law
    carries an atom at 0 with weight eps * f(0), on the same scale as the
    unnormalized continuous density f.
    """
    h = _heights_of(cfg)
    nbrs = lat.padded(h)[lat.nbr[site]][None, :]
    if psi.is_sos:
        lo, hi, slope, logf_lo = sos_segment_arrays(nbrs, pin)
        atom = -np.inf
        if pin.kind == DELTA and pin.eps > 0:
            atom = math.log(pin.eps) - float(nbrs.sum())
        return PiecewiseExpLaw(lo[0], hi[0], slope[0], logf_lo[0], atom_log=atom)
    if psi.is_gaussian:
        mu, sigma, seg_lo, seg_hi, seg_logw, lc = gauss_law_arrays(nbrs, pin)
        atom = -np.inf
        if pin.kind == DELTA and pin.eps > 0:
            atom = math.log(pin.eps) - 0.5 * float(np.square(nbrs).sum())
        return TruncatedGaussianLaw(
            float(mu[0]), sigma, seg_lo[0], seg_hi[0], seg_logw[0],
            lc=float(lc[0]), atom_log=atom,
        )
    # custom potential: numerically tabulated density
    t = np.linspace(0.0, 40.0, 20001)
    logf = -psi(t[None, :] - nbrs[0][:, None]).sum(axis=0)
    if pin.kind == SQUARE_WELL:
        logf = logf + pin.b * (t <= pin.a)
    atom = -np.inf
    if pin.kind == DELTA and pin.eps > 0:
        atom = math.log(pin.eps) + float(logf[0])
    return NumericLaw(t, logf, atom_log=atom)


def trunc_gauss_ppf(mu, sigma, lo, hi, u):
    """Quantile of Gaussian(mu, sigma^2) restricted to [lo, hi].

    Anchored on the survival function so the right tail keeps full
    precision even when mu is far below lo.
    """
    s_lo = ndtr((mu - lo) / sigma)
    s_hi = np.where(np.isinf(hi), 0.0, ndtr((mu - np.minimum(hi, 1e300)) / sigma))
    s = s_lo + u * (s_hi - s_lo)
    with np.errstate(divide="ignore"):
        t = mu - sigma * ndtri(s)
    return np.clip(t, lo, np.where(np.isinf(hi), np.inf, hi))
