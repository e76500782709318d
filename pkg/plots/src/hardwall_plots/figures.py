"""The four figure kinds over the documented hardwall CSV schema."""

import csv
import math
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("rho_vs_N", "rho_vs_eps", "height_vs_logN", "tail")

# the batch CLI's fixed column order; figures consume nothing else
EXPECTED_COLUMNS = [
    "run_id", "mode", "method", "d", "N", "interaction", "pinning",
    "epsilon", "a", "b", "kernel", "sweeps", "burn_in", "thinning", "seed",
    "rho_mean", "rho_se", "nu_mean", "nu_se", "mean_height",
    "mean_height_se", "center_height_mean", "max_height_mean",
    "accept_rate", "tail_M", "tail_prob", "tail_prob_se",
]

_STYLE = {
    "figure.figsize": (6.4, 4.4),
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "svg.hashsalt": "hardwall-plots",
    "axes.grid": True,
    "grid.alpha": 0.3,
}

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


class PlotError(ValueError):
    """Missing columns, empty selection, or an unknown figure kind."""


@dataclass
class PlotRequest:
    csv_paths: list
    kind: str
    output: str
    filters: dict = field(default_factory=dict)


def load_rows(paths):
    rows = []
    for path in paths:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = [c for c in EXPECTED_COLUMNS if c not in (reader.fieldnames or [])]
            if missing:
                raise PlotError(f"{path}: missing columns {missing}")
            rows.extend(reader)
    return rows


def _matches(value, wanted):
    try:
        return math.isclose(float(value), float(wanted), rel_tol=1e-9, abs_tol=1e-12)
    except (TypeError, ValueError):
        return str(value) == str(wanted)


def apply_filters(rows, filters):
    for col in filters:
        if col not in EXPECTED_COLUMNS:
            raise PlotError(f"unknown filter column {col!r}")
    out = [r for r in rows if all(_matches(r[c], v) for c, v in filters.items())]
    if not out:
        raise PlotError("no rows match the filter selection")
    return out


def _num(row, col):
    raw = row.get(col, "")
    return float(raw) if raw not in ("", None) else None


def _series(rows, xcol, ycol, secol):
    pts = [(_num(r, xcol), _num(r, ycol), _num(r, secol)) for r in rows]
    pts = [p for p in pts if p[0] is not None and p[1] is not None]
    if not pts:
        raise PlotError(f"no usable ({xcol}, {ycol}) values in the selection")
    pts.sort()
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    se = np.array([p[2] if p[2] is not None else 0.0 for p in pts])
    return x, y, se


def _group_keys(rows, col):
    keys = sorted({r[col] for r in rows if r.get(col) not in ("", None)}, key=float)
    return keys or [None]


def _wls(X, y, se):
    w = np.where(se > 0, 1.0 / np.maximum(se, 1e-300) ** 2, 1.0)
    if not (se > 0).all():
        w = np.ones_like(y)
    xtwx = X.T @ (w[:, None] * X)
    return np.linalg.solve(xtwx, X.T @ (w * y))


def _guide_c_over_n(ax, x, y, se, color):
    if len(x) < 2:
        return
    c = _wls(np.stack([1.0 / x], axis=1), y, se)[0]
    grid = np.geomspace(x.min(), x.max(), 64)
    ax.plot(grid, c / grid, "--", color=color, linewidth=1.0,
            label=f"guide {c:.3g}/N")


def _guide_log(ax, x, y, se, color):
    if len(x) < 2:
        return
    coef = _wls(np.stack([np.ones_like(x), np.log(x)], axis=1), y, se)
    grid = np.geomspace(x.min(), x.max(), 64)
    ax.plot(grid, coef[0] + coef[1] * np.log(grid), "--", color=color,
            linewidth=1.0, label=f"guide {coef[0]:.3g} + {coef[1]:.3g} log N")


def _fig_rho_vs_N(rows, ax):
    for i, eps in enumerate(_group_keys(rows, "epsilon")):
        sel = rows if eps is None else [r for r in rows if _matches(r["epsilon"], eps)]
        x, y, se = _series(sel, "N", "rho_mean", "rho_se")
        color = _COLORS[i % len(_COLORS)]
        label = "rho" if eps is None else f"eps={eps}"
        ax.errorbar(x, y, yerr=se, fmt="o", color=color, capsize=3, label=label)
        if (y > 0).all():
            _guide_c_over_n(ax, x, y, se, color)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("N")
    ax.set_ylabel("pinned-site density")


def _fig_rho_vs_eps(rows, ax):
    for i, n in enumerate(_group_keys(rows, "N")):
        sel = rows if n is None else [r for r in rows if _matches(r["N"], n)]
        x, y, se = _series(sel, "epsilon", "rho_mean", "rho_se")
        ax.errorbar(x, y, yerr=se, fmt="o-", color=_COLORS[i % len(_COLORS)],
                    capsize=3, label=f"N={n}")
    ax.set_xscale("log")
    ax.set_xlabel("pinning strength eps")
    ax.set_ylabel("pinned-site density")


def _fig_height_vs_logN(rows, ax):
    x, y, se = _series(rows, "N", "mean_height", "mean_height_se")
    ax.errorbar(x, y, yerr=se, fmt="o", color=_COLORS[0], capsize=3,
                label="mean height")
    _guide_log(ax, x, y, se, _COLORS[0])
    ax.set_xscale("log")
    ax.set_xlabel("N")
    ax.set_ylabel("mean height")


def _fig_tail(rows, ax):
    x, y, se = _series(rows, "tail_M", "tail_prob", "tail_prob_se")
    pos = y > 0
    if pos.any():
        ax.errorbar(x[pos], y[pos], yerr=np.minimum(se[pos], 0.999 * y[pos]),
                    fmt="o", color=_COLORS[0], capsize=3, label="P(nu > M)")
        floor = y[pos].min() * 0.5
    else:
        floor = 1e-6
    if (~pos).any():
        # zero-frequency rows become upper limits, never log(0)
        ax.plot(x[~pos], np.full((~pos).sum(), floor), "v", color=_COLORS[1],
                label="upper limit (0 observed)")
    ax.set_yscale("log")
    ax.set_xlabel("M")
    ax.set_ylabel("tail probability")


_FIGS = {
    "rho_vs_N": _fig_rho_vs_N,
    "rho_vs_eps": _fig_rho_vs_eps,
    "height_vs_logN": _fig_height_vs_logN,
    "tail": _fig_tail,
}


def render(req):
    """Render one figure kind to req.output (png or svg by suffix).

    Same CSV in, same bytes out: fixed style, scrubbed metadata, no
    timestamps.
    """
    if req.kind not in _FIGS:
        raise PlotError(f"unknown figure kind {req.kind!r}; pick from {KINDS}")
    rows = apply_filters(load_rows(req.csv_paths), req.filters)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        _FIGS[req.kind](rows, ax)
        ax.legend(loc="best", fontsize=8)
        fig.tight_layout()
        if req.output.endswith(".svg"):
            fig.savefig(req.output, format="svg", metadata={"Date": None})
        else:
            fig.savefig(req.output, format="png",
                        metadata={"Software": None, "Creation Time": None})
        plt.close(fig)
    return req.output
