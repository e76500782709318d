"""Quadrature-grade partition functions, pin densities and measure
identities on tiny systems; ground truth for the samplers.

Everything rests on a panel Gauss-Legendre grid over [0, T]. Functions of
one height are carried as their values at the panel nodes; multiplying by
the transfer kernel

    K F (t) = int_0^T exp(-Psi(s - t)) F(s) ds

is a dense matrix product. For the quadratic interaction the integrand is
smooth and the nodal rule is spectrally accurate. For the absolute-value
interaction the kernel has a kink at s = t, so the matrix is instead
assembled exactly against the per-panel Lagrange basis: panels left of t
integrate e^{s-t} * basis, panels right of t integrate e^{t-s} * basis,
and the panel containing t is split at the kink. The result is exact for
the interpolant, and transfer output stays smooth (it solves I'' = I - 2F),
so accuracy is spectral in the panel order throughout.

Single-site measures enter as node weights: the square well scales the
weights of nodes below a (a is always a panel break), and the delta atom
adds eps times the interpolated value at height 0. Clamped sites (the
subsets A of the expansion Z = sum_A eps^|A| Z_clamped(A)) reduce to the
single node {0}: a clamped neighbor is indistinguishable from the
exterior.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad as adaptive_quad

from .errors import ParameterError, QuadratureError
from .lattice import Lattice
from .model import DELTA, Pinning, SQUARE_WELL

MAX_STATE = 8_000_000  # row-transfer tensor entries
MAX_CHAIN = 64


@dataclass(frozen=True)
class QuadratureSpec:
    """Resolution of the height quadrature.

    cutoff: truncation T of [0, inf); None picks 40 (absolute value) or
    12 (quadratic), where the per-site truncated mass is below 1e-17 and
    1e-31 respectively. nodes_per_unit sets the density of Gauss-Legendre
    nodes; rel_tol is the accuracy target enforced by the two-resolution
    self-check.
    """

    cutoff: float = None
    nodes_per_unit: float = 20.0
    rel_tol: float = 1e-9

    def __post_init__(self):
        if self.cutoff is not None and not 10.0 <= self.cutoff <= 60.0:
            raise ParameterError("cutoff must lie in [10, 60]")
        if self.nodes_per_unit <= 0:
            raise ParameterError("nodes_per_unit must be > 0")

    def resolved_cutoff(self, psi):
        if self.cutoff is not None:
            return float(self.cutoff)
        return 12.0 if psi.is_gaussian else 40.0


class PanelGrid:
    """Gauss-Legendre nodes on panels of [0, T] with breaks at thresholds."""

    def __init__(self, T, breaks, p):
        edges = {0.0, float(T)}
        edges.update(b for b in breaks if 0.0 < b < T)
        base = sorted(edges)
        self.edges = []
        for lo, hi in zip(base[:-1], base[1:]):
            k = max(1, math.ceil((hi - lo) / 1.5))
            self.edges.extend(np.linspace(lo, hi, k + 1)[:-1])
        self.edges.append(float(T))
        self.edges = np.array(self.edges)
        self.p = int(p)
        x, w = leggauss(self.p)
        nodes, weights = [], []
        for lo, hi in zip(self.edges[:-1], self.edges[1:]):
            mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
            nodes.append(mid + half * x)
            weights.append(half * w)
        self.nodes = np.concatenate(nodes)
        self.w = np.concatenate(weights)
        self.n = len(self.nodes)
        self.n_panels = len(self.edges) - 1
        # barycentric weights per panel for interpolation
        self._bary = []
        for k in range(self.n_panels):
            xs = self.panel_nodes(k)
            bw = np.array([1.0 / np.prod(xs[i] - np.delete(xs, i)) for i in range(self.p)])
            self._bary.append(bw)

    def panel_slice(self, k):
        return slice(k * self.p, (k + 1) * self.p)

    def panel_nodes(self, k):
        return self.nodes[self.panel_slice(k)]

    def panel_index(self, y):
        k = int(np.searchsorted(self.edges, y, side="right") - 1)
        return min(max(k, 0), self.n_panels - 1)

    def eval_row(self, y):
        """Interpolation weights: row . F approximates F(y)."""
        row = np.zeros(self.n)
        k = self.panel_index(y)
        xs = self.panel_nodes(k)
        bw = self._bary[k]
        diff = y - xs
        hit = np.isclose(diff, 0.0, atol=1e-15)
        sl = self.panel_slice(k)
        if hit.any():
            loc = np.zeros(self.p)
            loc[np.nonzero(hit)[0][0]] = 1.0
            row[sl] = loc
        else:
            terms = bw / diff
            row[sl] = terms / terms.sum()
        return row


def _basis_integrals(xs, bw, lo, hi, weight_fn, m):
    """int_lo^hi weight(s) * l_i(s) ds for the Lagrange basis on nodes xs."""
    gx, gw = leggauss(m)
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    s = mid + half * gx
    diff = s[:, None] - xs[None, :]
    # no quadrature point coincides with a node for generic sub-intervals
    terms = bw[None, :] / diff
    basis = terms / terms.sum(axis=1, keepdims=True)
    return (half * gw * weight_fn(s)) @ basis


@lru_cache(maxsize=32)
def _kernel_cached(kind, T, p, breaks):
    grid = PanelGrid(T, breaks, p)
    n = grid.n
    if kind == "gaussian":
        K = grid.w[None, :] * np.exp(-0.5 * (grid.nodes[None, :] - grid.nodes[:, None]) ** 2)
        row0 = grid.w * np.exp(-0.5 * grid.nodes**2)
        return grid, K, row0
    # absolute value: exact integrals of the kinked kernel against the basis
    m = grid.p + 8
    K = np.zeros((n, n))
    row0 = np.zeros(n)
    t = grid.nodes
    for k in range(grid.n_panels):
        sl = grid.panel_slice(k)
        xs, bw = grid.panel_nodes(k), grid._bary[k]
        lo, hi = grid.edges[k], grid.edges[k + 1]
        A = _basis_integrals(xs, bw, lo, hi, np.exp, m)            # e^{+s}
        B = _basis_integrals(xs, bw, lo, hi, lambda s: np.exp(-s), m)
        cols = np.arange(sl.start, sl.stop)
        right = np.nonzero(t >= hi)[0]   # targets at/after this panel
        left = np.nonzero(t <= lo)[0]
        K[np.ix_(right, cols)] += np.exp(-t[right])[:, None] * A[None, :]
        K[np.ix_(left, cols)] += np.exp(t[left])[:, None] * B[None, :]
        row0[sl] = B      # target t = 0 sits left of every panel
        for j in range(sl.start, sl.stop):
            tj = t[j]
            K[j, sl] = (
                np.exp(-tj) * _basis_integrals(xs, bw, lo, tj, np.exp, m)
                + np.exp(tj) * _basis_integrals(xs, bw, tj, hi, lambda s: np.exp(-s), m)
            )
    return grid, K, row0


def _make_grid(psi, quad, pin):
    if psi.kind not in ("sos", "gaussian"):
        raise ParameterError("the quadrature oracle serves the built-in potentials")
    breaks = [1.0]
    if pin.kind == SQUARE_WELL:
        breaks += [pin.a, 2 * pin.a]
    T = quad.resolved_cutoff(psi)
    # panel width is capped at 1.5 inside PanelGrid, so p nodes per panel
    # realize nodes_per_unit * 1.5 nodes per unit height
    p = max(6, int(round(quad.nodes_per_unit * 1.5)) // 2 * 2)
    return _kernel_cached(psi.kind, T, p, tuple(sorted(set(breaks))))


def _site_ops(grid, K, row0, psi, pin):
    """Measure-weighted transfer pieces for one free site.

    z_leb carries only the continuous part of the site measure; z_full
    adds the delta atom (value at 0 times eps).
    """
    k0 = np.exp(-psi(grid.nodes))
    well = np.ones(grid.n)
    if pin.kind == SQUARE_WELL:
        well = np.where(grid.nodes <= pin.a, math.exp(pin.b), 1.0)
    e0 = grid.eval_row(0.0)
    M = K * well[None, :]
    z_leb = grid.w * well
    z_full = z_leb
    row_at0 = row0 * well
    if pin.kind == DELTA and pin.eps > 0:
        M = M + pin.eps * np.outer(k0, e0)
        z_full = z_leb + pin.eps * e0
        row_at0 = row_at0 + pin.eps * e0
    return M, z_leb, z_full, k0, e0, row_at0


# ---------------------------------------------------------------------------
# chain (d = 1) with forward/backward messages
# ---------------------------------------------------------------------------

@dataclass
class ExactResult:
    """Partition function, pin density and per-site pin probabilities."""

    Z: float
    log_Z: float
    rho: float
    pin_probs: np.ndarray
    err_bound: float

    def __post_init__(self):
        if not self.Z > 0:
            raise QuadratureError("computed Z is not positive")
        if not -1e-12 <= self.rho <= 1 + 1e-12:
            raise QuadratureError(f"computed rho outside [0, 1]: {self.rho}")
        self.rho = min(max(self.rho, 0.0), 1.0)


def _chain_solve(N, psi, pin, quad):
    grid, K, row0 = _make_grid(psi, quad, pin)
    lat = Lattice(1, N)
    M, z_leb, _, k0, e0, _ = _site_ops(grid, K, row0, psi, pin)
    bfac = [np.exp(-oc * psi(grid.nodes)) for oc in lat.outside_count]

    L = [np.ones(grid.n)]
    for k in range(N - 1):
        L.append(M @ (L[k] * bfac[k]))
    R = [None] * N
    R[N - 1] = np.ones(grid.n)
    for k in range(N - 2, -1, -1):
        R[k] = M @ (R[k + 1] * bfac[k + 1])

    def join(k):
        prod = L[k] * R[k] * bfac[k]
        cont = float(z_leb @ prod)
        atom = 0.0
        if pin.kind == DELTA and pin.eps > 0:
            atom = pin.eps * float(e0 @ (L[k] * bfac[k])) * float(e0 @ R[k])
        return prod, cont, atom

    _, cont0, atom0 = join(0)
    Z = cont0 + atom0
    pin_probs = np.zeros(N)
    for k in range(N):
        prod, cont, atom = join(k)
        if pin.kind == DELTA:
            pin_probs[k] = atom / (cont + atom)
        elif pin.kind == SQUARE_WELL:
            inwell = grid.nodes <= pin.a
            pin_probs[k] = float((z_leb * inwell) @ prod) / cont
    return grid, Z, pin_probs


def exact_Z_chain(N, psi, pin, quad=None):
    """Exact partition function and pin statistics of the d=1 chain.

    Computes Z by iterated single-height integration (mixed measure: the
    delta atom adds eps times the value at 0 per site) and the pin density
    by direct pinned-mass accumulation. Refuses if the two-resolution
    self-check misses the accuracy target.
    """
    if not 1 <= N <= MAX_CHAIN:
        raise ParameterError(f"chain oracle supports 1 <= N <= {MAX_CHAIN}")
    quad = quad or QuadratureSpec()
    _, Z, probs = _chain_solve(N, psi, pin, quad)
    coarse = QuadratureSpec(
        cutoff=quad.resolved_cutoff(psi),
        nodes_per_unit=max(6.0, quad.nodes_per_unit * 0.6),
        rel_tol=quad.rel_tol,
    )
    _, Z2, _ = _chain_solve(N, psi, pin, coarse)
    err = abs(Z - Z2) / abs(Z)
    if err > quad.rel_tol:
        raise QuadratureError(
            f"chain quadrature self-check at {err:.2e} exceeds target "
            f"{quad.rel_tol:.2e}; increase nodes_per_unit"
        )
    return ExactResult(
        Z=Z, log_Z=math.log(Z), rho=float(probs.mean()), pin_probs=probs,
        err_bound=err,
    )


def chain_site_marginal(N, psi, pin, site, quad=None, edges=None):
    """Exact marginal of one chain site, as masses over height intervals.

    Returns (edges, masses, atom_prob); masses cover (edges[i], edges[i+1])
    and, together with the atom, sum to 1. Default edges are the panel
    edges of the quadrature grid.
    """
    quad = quad or QuadratureSpec()
    grid, K, row0 = _make_grid(psi, quad, pin)
    lat = Lattice(1, N)
    M, z_leb, _, k0, e0, _ = _site_ops(grid, K, row0, psi, pin)
    bfac = [np.exp(-oc * psi(grid.nodes)) for oc in lat.outside_count]
    L = [np.ones(grid.n)]
    for k in range(N - 1):
        L.append(M @ (L[k] * bfac[k]))
    R = [None] * N
    R[N - 1] = np.ones(grid.n)
    for k in range(N - 2, -1, -1):
        R[k] = M @ (R[k + 1] * bfac[k + 1])
    prod = L[site] * R[site] * bfac[site]
    dens = z_leb * prod
    atom = 0.0
    if pin.kind == DELTA and pin.eps > 0:
        atom = pin.eps * float(e0 @ (L[site] * bfac[site])) * float(e0 @ R[site])
    if edges is None:
        edges = grid.edges
    masses = np.zeros(len(edges) - 1)
    for i in range(len(masses)):
        inside = (grid.nodes > edges[i]) & (grid.nodes <= edges[i + 1])
        masses[i] = dens[inside].sum()
    total = masses.sum() + atom
    return np.asarray(edges), masses / total, atom / total


# ---------------------------------------------------------------------------
# row transfer (d <= 2) with clamped sites
# ---------------------------------------------------------------------------

def _log_Z_lattice(lat, psi, pin, quad, clamped=None):
    """log Z with the sites of `clamped` fixed at height 0 (no measure)."""
    if lat.d > 2:
        raise ParameterError("row transfer supports d <= 2")
    grid, K, row0 = _make_grid(psi, quad, pin)
    M, _, z, k0, e0, row_at0 = _site_ops(grid, K, row0, psi, pin)
    clamped = (
        np.zeros(lat.n_sites, dtype=bool)
        if clamped is None
        else np.asarray(clamped, dtype=bool)
    )
    cols = lat.N if lat.d == 2 else 1
    rows = lat.n_sites // cols
    free_sizes = [grid.n if not c else 1 for c in clamped]
    state = 1
    for r in range(rows):
        state_r = int(np.prod([free_sizes[r * cols + c] for c in range(cols)]))
        state = max(state, state_r)
    if state > MAX_STATE:
        raise QuadratureError(
            "row-transfer state too large; pass a coarser QuadratureSpec"
        )

    nodes_of = lambda s: np.zeros(1) if clamped[s] else grid.nodes
    bond = lambda u, v: np.exp(-psi(u[:, None] - v[None, :]))

    log_scale = 0.0
    F = None
    for r in range(rows):
        sites = [r * cols + c for c in range(cols)]
        axes_nodes = [nodes_of(s) for s in sites]
        shape = tuple(len(a) for a in axes_nodes)
        rowfac = np.ones(shape)
        for c, s in enumerate(sites):
            fac = np.exp(-lat.outside_count[s] * psi(axes_nodes[c]))
            sh = [1] * cols
            sh[c] = len(axes_nodes[c])
            rowfac = rowfac * fac.reshape(sh)
        for c in range(cols - 1):
            bm = bond(axes_nodes[c], axes_nodes[c + 1])
            sh = [1] * cols
            sh[c], sh[c + 1] = bm.shape
            rowfac = rowfac * bm.reshape(sh)
        if r == 0:
            F = rowfac
        else:
            for c in range(cols):
                src = sites[c] - cols
                op = _inter_op(M, k0, row_at0, clamped[src], clamped[sites[c]])
                F = np.moveaxis(np.tensordot(op, F, axes=(1, c)), 0, c)
            F = F * rowfac
        peak = float(np.abs(F).max())
        if not peak > 0 or not math.isfinite(peak):
            raise QuadratureError("row transfer lost all mass; check parameters")
        F = F / peak
        log_scale += math.log(peak)
    for c in range(cols - 1, -1, -1):
        s = (rows - 1) * cols + c
        vec = np.ones(1) if clamped[s] else z
        F = np.tensordot(F, vec, axes=(c, 0))
    val = float(F)
    if not val > 0:
        raise QuadratureError("row transfer produced non-positive Z")
    return math.log(val) + log_scale


def _inter_op(M, k0, row_at0, src_clamped, dst_clamped):
    if not src_clamped and not dst_clamped:
        return M
    if src_clamped and not dst_clamped:
        return k0[:, None]            # source pinned at 0, weight 1
    if not src_clamped and dst_clamped:
        return row_at0[None, :]       # evaluate the transfer at t = 0
    return np.ones((1, 1))


def exact_Z_subset_expansion(lat, psi, eps, quad=None):
    """Z, rho and pin marginals of the delta-pinned cube by enumerating
    every pinned subset A and quadrating Z with A clamped to 0.

    Exact realization of Z = sum_A eps^|A| Z_{Lambda \\ A}; feasible up to
    9 sites (2^|Lambda| subsets), d <= 2.
    """
    if lat.n_sites > 9:
        raise ParameterError(
            f"subset expansion enumerates 2^sites subsets; {lat.n_sites} sites "
            "is too many (limit 9)"
        )
    if eps < 0:
        raise ParameterError("eps must be >= 0")
    quad = quad or QuadratureSpec()
    none = Pinning.none()

    def solve(q):
        n = lat.n_sites
        log_terms = []
        sizes = []
        site_terms = [[] for _ in range(n)]
        for bits in range(2**n if eps > 0 else 1):
            mask = np.array([(bits >> i) & 1 for i in range(n)], dtype=bool)
            size = int(mask.sum())
            lz = _log_Z_lattice(lat, psi, none, q, clamped=mask)
            lt = lz + size * (math.log(eps) if eps > 0 else 0.0)
            log_terms.append(lt)
            sizes.append(size)
            for i in np.nonzero(mask)[0]:
                site_terms[i].append(lt)
        log_terms = np.array(log_terms)
        top = log_terms.max()
        weights = np.exp(log_terms - top)
        Zs = weights.sum()
        log_Z = top + math.log(Zs)
        rho = float((np.array(sizes) * weights).sum() / (lat.n_sites * Zs))
        probs = np.array(
            [
                (np.exp(np.array(t) - top).sum() / Zs) if t else 0.0
                for t in site_terms
            ]
        )
        return log_Z, rho, probs

    log_Z, rho, probs = solve(quad)
    coarse = QuadratureSpec(
        cutoff=quad.resolved_cutoff(psi),
        nodes_per_unit=max(6.0, quad.nodes_per_unit * 0.6),
        rel_tol=quad.rel_tol,
    )
    log_Z2, _, _ = solve(coarse)
    err = abs(math.expm1(log_Z2 - log_Z))
    if err > quad.rel_tol:
        raise QuadratureError(
            f"subset-expansion self-check at {err:.2e} exceeds target "
            f"{quad.rel_tol:.2e}; increase nodes_per_unit"
        )
    return ExactResult(
        Z=math.exp(log_Z), log_Z=log_Z, rho=rho, pin_probs=probs, err_bound=err
    )


def log_Z_density(lat, psi, quad=None, clamped=None):
    """(1/|Lambda|) log Z of the unpinned hard-wall field."""
    quad = quad or QuadratureSpec()
    if lat.d == 1 and clamped is None:
        res = exact_Z_chain(lat.N, psi, Pinning.none(), quad)
        return res.log_Z / lat.n_sites
    return _log_Z_lattice(lat, psi, Pinning.none(), quad, clamped) / lat.n_sites


# ---------------------------------------------------------------------------
# measure identities
# ---------------------------------------------------------------------------

def exact_rho(N, psi, eps, quad=None):
    return exact_Z_chain(N, psi, Pinning.delta(eps), quad).rho


def rho_from_derivative(N, psi, eps, quad=None, h_frac=0.05):
    """Cross-check route: rho = eps * d(log Z)/d(eps) / |Lambda|.

    Central differences with one Richardson extrapolation step.
    """
    if eps <= 0:
        raise ParameterError("derivative route needs eps > 0")

    def g(e):
        return exact_Z_chain(N, psi, Pinning.delta(e), quad).log_Z

    def central(h):
        return (g(eps + h) - g(eps - h)) / (2 * h)

    h = h_frac * eps
    d1, d2 = central(h), central(h / 2)
    return eps * (4 * d2 - d1) / 3 / N


def check_integral_identity(N, psi, eps_values, quad=None):
    """Max residual of the log-partition identity

        |Lambda|^-1 log(Z(eps)/Z(0)) = int_0^eps rho(x)/x dx

    over the given eps values (d = 1 chain)."""
    quad = quad or QuadratureSpec()
    log_z0 = exact_Z_chain(N, psi, Pinning.none(), quad).log_Z

    def integrand(x):
        if x == 0.0:
            x = 1e-12
        return exact_rho(N, psi, x, quad) / x

    worst = 0.0
    for eps in eps_values:
        lhs = (exact_Z_chain(N, psi, Pinning.delta(eps), quad).log_Z - log_z0) / N
        rhs, _ = adaptive_quad(integrand, 0.0, eps, epsabs=1e-11, epsrel=1e-11, limit=200)
        worst = max(worst, abs(lhs - rhs))
    return worst


def check_lower_bound_Z(lat, psi, eps, quad=None):
    """Margin log Z - |Lambda| log eps; the all-pinned term alone makes it
    nonnegative."""
    if eps <= 0:
        raise ParameterError("lower bound needs eps > 0")
    quad = quad or QuadratureSpec()
    if lat.d == 1:
        log_Z = exact_Z_chain(lat.N, psi, Pinning.delta(eps), quad).log_Z
    else:
        log_Z = exact_Z_subset_expansion(lat, psi, eps, quad).log_Z
    return log_Z - lat.n_sites * math.log(eps)


def check_rho_monotone(N, psi, eps_grid, quad=None):
    """Exact rho on an eps grid; returns (is_nondecreasing, [(eps, rho)])."""
    table = [(float(e), exact_rho(N, psi, e, quad)) for e in eps_grid]
    rhos = [r for _, r in table]
    ok = all(b >= a - 1e-12 for a, b in zip(rhos[:-1], rhos[1:]))
    return ok, table
