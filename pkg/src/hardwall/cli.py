"""Batch front door: run / sweep / oracle / verify with CSV + manifest output.

Configs are key=value lines ('#' comments); command-line flags override
file values. Every run writes one CSV row per (parameter point, replicate
[, tail threshold]) in a fixed column order plus a JSON manifest carrying
the full config echo, per-row seeds and the only timestamp. Re-running the
same config and seed reproduces the CSV byte for byte.

Exit codes: 0 ok, 1 usage/config error, 2 verification failure.
"""

import argparse
import concurrent.futures
import csv
import io
import json
import os
import sys
import time
from dataclasses import dataclass, field, fields

import numpy as np

from . import __version__
from .errors import ConfigError, HardwallError, ParameterError
from .lattice import Lattice
from .model import DELTA, NONE, SQUARE_WELL, Pinning, potential_from_name
from .observables import estimate_rho, batch_means, tail_probability
from .sampling import ChainParams, run_chain
from .chalker import verify_suite
from . import oracle as oracle_mod

CSV_COLUMNS = [
    "run_id", "mode", "method", "d", "N", "interaction", "pinning",
    "epsilon", "a", "b", "kernel", "sweeps", "burn_in", "thinning", "seed",
    "rho_mean", "rho_se", "nu_mean", "nu_se", "mean_height",
    "mean_height_se", "center_height_mean", "max_height_mean",
    "accept_rate", "tail_M", "tail_prob", "tail_prob_se",
]

OUTDIR_ENV = "HARDWALL_OUTDIR"


@dataclass
class ExperimentConfig:
    mode: str = "run"
    d: int = 1
    N: list = field(default_factory=lambda: [8])
    interaction: str = "sos"
    pinning: str = "delta"
    epsilon: list = field(default_factory=lambda: [0.1])
    a: list = field(default_factory=lambda: [None])
    b: list = field(default_factory=lambda: [None])
    kernel: str = "heat_bath"
    sweeps: int = 10000
    burn_in: int = 0
    thinning: int = 1
    seed: int = 0
    step_width: float = 1.0
    sweep_order: str = "checkerboard"
    replicates: int = 1
    tail_M: list = field(default_factory=list)
    output: str = None
    jobs: int = 1
    configs: int = 20000  # verify mode: random configs per inequality


_INT_KEYS = {"d", "sweeps", "burn_in", "thinning", "seed", "replicates", "jobs", "configs"}
_FLOAT_KEYS = {"step_width"}
_LIST_INT_KEYS = {"N", "tail_M"}
_LIST_FLOAT_KEYS = {"epsilon", "a", "b"}
_STR_KEYS = {"mode", "interaction", "pinning", "kernel", "sweep_order", "output"}


def _parse_value(key, raw, where, errors):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _LIST_INT_KEYS:
            return [int(v) for v in str(raw).split(",") if v != ""]
        if key in _LIST_FLOAT_KEYS:
            return [float(v) for v in str(raw).split(",") if v != ""]
        return str(raw)
    except ValueError:
        errors.append(f"{where}: cannot parse {key}={raw!r}")
        return None


def parse_config(text, overrides=None):
    """Parse key=value config text into a validated ExperimentConfig.

    Collects every violation (with line numbers) instead of stopping at
    the first; raises ConfigError listing all of them.
    """
    errors = []
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            errors.append(f"line {lineno}: expected key=value, got {stripped!r}")
            continue
        key, raw = (s.strip() for s in stripped.split("=", 1))
        if key not in {f.name for f in fields(ExperimentConfig)}:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        parsed = _parse_value(key, raw, f"line {lineno}", errors)
        if parsed is not None:
            values[key] = parsed
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        parsed = _parse_value(key, val, f"flag --{key}", errors)
        if parsed is not None:
            values[key] = parsed
    # validate whatever parsed cleanly so one pass reports every violation
    cfg = ExperimentConfig(**values)
    errors.extend(_validate(cfg))
    if errors:
        raise ConfigError(errors)
    return cfg


def _validate(cfg):
    errors = []
    if cfg.mode not in ("run", "sweep", "oracle", "verify"):
        errors.append(f"mode must be run/sweep/oracle/verify, got {cfg.mode!r}")
    if cfg.d not in (1, 2, 3):
        errors.append(f"d must be 1, 2 or 3, got {cfg.d}")
    if any(n < 1 for n in cfg.N):
        errors.append("N values must be >= 1")
    if cfg.interaction not in ("sos", "gaussian"):
        errors.append(f"interaction must be sos or gaussian, got {cfg.interaction!r}")
    if cfg.pinning not in (NONE, SQUARE_WELL, DELTA):
        errors.append(f"pinning must be none/square_well/delta, got {cfg.pinning!r}")
    if cfg.pinning == DELTA and any(e is None or e < 0 for e in cfg.epsilon):
        errors.append("delta pinning needs epsilon >= 0")
    if cfg.pinning == SQUARE_WELL:
        if any(v is None or not v > 0 for v in cfg.a):
            errors.append("square_well pinning needs a > 0")
        if any(v is None or not v > 0 for v in cfg.b):
            errors.append("square_well pinning needs b > 0")
    if cfg.kernel not in ("heat_bath", "metropolis"):
        errors.append(f"kernel must be heat_bath or metropolis, got {cfg.kernel!r}")
    if cfg.kernel == "metropolis" and cfg.pinning == DELTA:
        errors.append(
            "kernel=metropolis cannot be combined with pinning=delta: the "
            "reflected proposal never enters or leaves the atom at height 0"
        )
    if cfg.sweeps < 0 or cfg.burn_in < 0 or cfg.sweeps < cfg.burn_in:
        errors.append("need sweeps >= burn_in >= 0")
    if cfg.thinning < 1:
        errors.append("thinning must be >= 1")
    if cfg.replicates < 1:
        errors.append("replicates must be >= 1")
    if cfg.mode == "run":
        for axis in ("N", "epsilon", "a", "b"):
            if len(getattr(cfg, axis)) > 1:
                errors.append(f"run mode takes a single {axis}, got a list")
    if cfg.mode == "sweep":
        if not cfg.N or (cfg.pinning == DELTA and not cfg.epsilon):
            errors.append("sweep mode needs non-empty sweep axes")
    return errors


# ---------------------------------------------------------------------------
# experiment execution
# ---------------------------------------------------------------------------

def _points(cfg):
    """Cross product of the sweep axes, deterministic sorted order."""
    if cfg.pinning == DELTA:
        axes = [(n, e, None, None) for n in cfg.N for e in cfg.epsilon]
    elif cfg.pinning == SQUARE_WELL:
        axes = [(n, None, a, b) for n in cfg.N for a in cfg.a for b in cfg.b]
    else:
        axes = [(n, None, None, None) for n in cfg.N]
    return sorted(axes, key=lambda t: tuple(-1 if v is None else v for v in t))


def _row_seed(base_seed, row_index):
    ss = np.random.SeedSequence([base_seed & 0xFFFFFFFFFFFFFFFF, row_index])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _mcmc_row(cfg, point, rep, row_index):
    n, eps, a, b = point
    pin = (
        Pinning.delta(eps) if cfg.pinning == DELTA
        else Pinning.square_well(a, b) if cfg.pinning == SQUARE_WELL
        else Pinning.none()
    )
    seed = _row_seed(cfg.seed, row_index)
    params = ChainParams(
        d=cfg.d, N=n, psi=potential_from_name(cfg.interaction), pin=pin,
        kernel=cfg.kernel, sweeps=cfg.sweeps, burn_in=cfg.burn_in,
        thinning=cfg.thinning, seed=seed, step_width=cfg.step_width,
        sweep_order=cfg.sweep_order,
    )
    trace = run_chain(params)
    lat = Lattice(cfg.d, n)
    rho = estimate_rho(trace, lat)
    nu = batch_means(trace.nu)
    mh = batch_means(trace.mean_height)
    base = {
        "mode": cfg.mode, "method": "mcmc", "d": cfg.d, "N": n,
        "interaction": cfg.interaction, "pinning": cfg.pinning,
        "epsilon": eps, "a": a, "b": b, "kernel": cfg.kernel,
        "sweeps": cfg.sweeps, "burn_in": cfg.burn_in,
        "thinning": cfg.thinning, "seed": seed,
        "rho_mean": rho.value, "rho_se": rho.se,
        "nu_mean": nu.value, "nu_se": nu.se,
        "mean_height": mh.value, "mean_height_se": mh.se,
        "center_height_mean": float(trace.center_height.mean()),
        "max_height_mean": float(trace.max_height.mean()),
        "accept_rate": trace.accept_rate,
    }
    rows = []
    for m in cfg.tail_M or [None]:
        row = dict(base)
        if m is not None:
            tp = tail_probability(trace, m)
            row.update(tail_M=m, tail_prob=tp.value, tail_prob_se=tp.se)
        rows.append(row)
    return rows


def _oracle_row(cfg, point):
    n, eps, a, b = point
    psi = potential_from_name(cfg.interaction)
    pin = (
        Pinning.delta(eps) if cfg.pinning == DELTA
        else Pinning.square_well(a, b) if cfg.pinning == SQUARE_WELL
        else Pinning.none()
    )
    if cfg.d == 1:
        res = oracle_mod.exact_Z_chain(n, psi, pin)
    else:
        lat = Lattice(cfg.d, n)
        if pin.kind != DELTA:
            raise ParameterError("d>=2 oracle rows support delta pinning only")
        quad = oracle_mod.QuadratureSpec(
            nodes_per_unit=8.0, rel_tol=5e-3 if psi.is_sos else 1e-9
        )
        res = oracle_mod.exact_Z_subset_expansion(lat, psi, pin.eps, quad)
    return [{
        "mode": cfg.mode, "method": "exact", "d": cfg.d, "N": n,
        "interaction": cfg.interaction, "pinning": cfg.pinning,
        "epsilon": eps, "a": a, "b": b,
        "rho_mean": res.rho, "nu_mean": res.rho * n**cfg.d,
    }]


def _compute_item(item):
    cfg, point, rep, row_index = item
    if cfg.mode == "oracle":
        return row_index, _oracle_row(cfg, point)
    return row_index, _mcmc_row(cfg, point, rep, row_index)


def run_experiment(cfg, out_stream=None):
    """Execute the config; returns (rows, manifest, exit_code).

    CSV rows come back in deterministic sorted order regardless of how
    many workers computed them.
    """
    t0 = time.time()
    if cfg.mode == "verify":
        table = verify_suite(n_random=cfg.configs, seed=cfg.seed)
        bad = sum(r["violations"] for r in table)
        lines = [f"{'check':34s} {'configs':>8s} {'min_slack':>13s} {'violations':>10s}"]
        for r in table:
            lines.append(
                f"{r['name']:34s} {r['configs']:8d} {r['min_slack']:13.3e} "
                f"{r['violations']:10d}"
            )
        text = "\n".join(lines)
        print(text, file=out_stream or sys.stdout)
        manifest = {"mode": "verify", "violations": bad, "elapsed_s": time.time() - t0}
        return [], manifest, (0 if bad == 0 else 2)

    work = []
    idx = 0
    for point in _points(cfg):
        if cfg.mode == "oracle":
            work.append((cfg, point, None, idx))
            idx += 1
        else:
            for rep in range(cfg.replicates):
                work.append((cfg, point, rep, idx))
                idx += 1

    results = {}
    if cfg.jobs > 1 and len(work) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            for row_index, rows in pool.map(_compute_item, work):
                results[row_index] = rows
    else:
        for item in work:
            row_index, rows = _compute_item(item)
            results[row_index] = rows

    rows = []
    for row_index in sorted(results):
        for r in results[row_index]:
            r["run_id"] = f"{cfg.mode}-{row_index:04d}"
            rows.append(r)

    manifest = {
        "version": __version__,
        "config": {f.name: getattr(cfg, f.name) for f in fields(cfg)},
        "row_seeds": [r.get("seed") for r in rows],
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "elapsed_s": time.time() - t0,
    }
    return rows, manifest, 0


def write_csv(rows, stream):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row.get(col)) for col in CSV_COLUMNS])


def rows_to_csv_text(rows):
    buf = io.StringIO()
    write_csv(rows, buf)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_argparser():
    ap = argparse.ArgumentParser(
        prog="hardwall",
        description="hard-wall interface Monte Carlo: run, sweep, oracle, verify",
    )
    sub = ap.add_subparsers(dest="mode", required=True)
    for mode in ("run", "sweep", "oracle", "verify"):
        p = sub.add_parser(mode)
        p.add_argument("--config", help="key=value config file")
        for key in ("d", "sweeps", "burn_in", "thinning", "seed", "replicates",
                    "jobs", "configs"):
            p.add_argument(f"--{key}", type=int)
        p.add_argument("--step-width", dest="step_width", type=float)
        p.add_argument("--N")
        p.add_argument("--epsilon")
        p.add_argument("--a")
        p.add_argument("--b")
        p.add_argument("--tail-M", dest="tail_M")
        for key in ("interaction", "pinning", "kernel", "sweep_order", "output"):
            p.add_argument(f"--{key.replace('_', '-')}", dest=key)
    return ap


def main(argv=None):
    ap = _build_argparser()
    ns = ap.parse_args(argv)
    overrides = {k: v for k, v in vars(ns).items() if k not in ("config",)}
    overrides["mode"] = ns.mode
    text = ""
    if ns.config:
        try:
            with open(ns.config) as fh:
                text = fh.read()
        except OSError as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return 1
    try:
        cfg = parse_config(text, overrides)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return 1

    try:
        rows, manifest, code = run_experiment(cfg)
    except HardwallError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    if cfg.mode != "verify":
        out = cfg.output
        if out is None:
            outdir = os.environ.get(OUTDIR_ENV, ".")
            out = os.path.join(outdir, f"hardwall_{cfg.mode}.csv")
        os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
        with open(out, "w") as fh:
            write_csv(rows, fh)
        with open(out + ".manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, default=str)
            fh.write("\n")
        print(f"wrote {len(rows)} rows to {out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
