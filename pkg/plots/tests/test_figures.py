import csv
import subprocess
import sys

import pytest

from hardwall_plots import EXPECTED_COLUMNS, KINDS, PlotError, PlotRequest, render


def write_csv(path, updates):
    rows = []
    for upd in updates:
        row = {c: "" for c in EXPECTED_COLUMNS}
        row.update({k: str(v) for k, v in upd.items()})
        rows.append(row)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=EXPECTED_COLUMNS)
        w.writeheader()
        w.writerows(rows)
    return str(path)


@pytest.fixture
def sweep_csv(tmp_path):
    updates = []
    for eps in (0.01, 5.0):
        for i, n in enumerate((8, 16, 32)):
            rho = 0.04 / n if eps == 0.01 else 0.95 - 0.001 * i
            updates.append({
                "run_id": f"sweep-{len(updates):04d}", "mode": "sweep",
                "method": "mcmc", "d": 2, "N": n, "interaction": "sos",
                "pinning": "delta", "epsilon": eps, "kernel": "heat_bath",
                "sweeps": 1000, "seed": 7, "rho_mean": rho,
                "rho_se": rho * 0.05, "mean_height": 1.0 + 0.4 * i,
                "mean_height_se": 0.02,
            })
    for m, p in [(0, 0.4), (1, 0.12), (2, 0.03), (3, 0.008), (4, 0.0)]:
        updates.append({
            "run_id": f"sweep-{len(updates):04d}", "mode": "run",
            "method": "mcmc", "d": 2, "N": 16, "interaction": "sos",
            "pinning": "delta", "epsilon": 0.01, "rho_mean": 0.002,
            "rho_se": 0.0001, "tail_M": m, "tail_prob": p,
            "tail_prob_se": max(p * 0.1, 1e-4),
        })
    return write_csv(tmp_path / "sweep.csv", updates)


@pytest.mark.parametrize("kind", KINDS)
def test_all_kinds_render(kind, tmp_path, sweep_csv):
    out = tmp_path / f"{kind}.png"
    render(PlotRequest([sweep_csv], kind, str(out)))
    data = out.read_bytes()
    assert data[:8] == b"\x89PNG\r\n\x1a\n"
    assert len(data) > 5000


@pytest.mark.parametrize("suffix", ["png", "svg"])
def test_byte_deterministic(suffix, tmp_path, sweep_csv):
    a = tmp_path / f"a.{suffix}"
    b = tmp_path / f"b.{suffix}"
    req = PlotRequest([sweep_csv], "rho_vs_N", str(a),
                      filters={"epsilon": "0.01"})
    render(req)
    render(PlotRequest([sweep_csv], "rho_vs_N", str(b),
                       filters={"epsilon": "0.01"}))
    assert a.read_bytes() == b.read_bytes()


def test_filters_numeric_match(tmp_path, sweep_csv):
    out = tmp_path / "f.png"
    render(PlotRequest([sweep_csv], "rho_vs_N", str(out),
                       filters={"epsilon": "0.010", "pinning": "delta"}))
    assert out.exists()


def test_empty_selection_named_error(tmp_path, sweep_csv):
    with pytest.raises(PlotError, match="no rows match"):
        render(PlotRequest([sweep_csv], "rho_vs_N", str(tmp_path / "x.png"),
                           filters={"epsilon": "9.9"}))


def test_missing_column_named_error(tmp_path):
    path = tmp_path / "bad.csv"
    with open(path, "w") as fh:
        fh.write("N,rho_mean\n8,0.1\n")
    with pytest.raises(PlotError, match="missing columns"):
        render(PlotRequest([str(path)], "rho_vs_N", str(tmp_path / "x.png")))


def test_unknown_kind_and_filter(tmp_path, sweep_csv):
    with pytest.raises(PlotError, match="unknown figure kind"):
        render(PlotRequest([sweep_csv], "pie", str(tmp_path / "x.png")))
    with pytest.raises(PlotError, match="unknown filter column"):
        render(PlotRequest([sweep_csv], "tail", str(tmp_path / "x.png"),
                           filters={"nope": "1"}))


def test_tail_zero_rows_become_upper_limits(tmp_path, sweep_csv):
    out = tmp_path / "tail.png"
    render(PlotRequest([sweep_csv], "tail", str(out)))
    assert out.exists()  # the zero-probability row must not raise on log(0)


def test_cli_roundtrip(tmp_path, sweep_csv):
    from hardwall_plots.cli import main

    out = tmp_path / "cli.png"
    code = main(["--csv", sweep_csv, "--kind", "rho_vs_eps",
                 "--out", str(out), "--filter", "N=16"])
    assert code == 0 and out.exists()
    assert main(["--csv", sweep_csv, "--kind", "rho_vs_N",
                 "--out", str(tmp_path / "y.png"), "--filter", "epsilon=77"]) == 1


# ---------------------------------------------------------------------------
# acceptance: render the four kinds from a real sweep produced by the
# simulator CLI (the only interface this package may touch)
# ---------------------------------------------------------------------------

@pytest.mark.acceptance
def test_four_kinds_from_real_sweep_byte_deterministic(tmp_path):
    ref = tmp_path / "reference.csv"
    cmd = [
        sys.executable, "-m", "hardwall.cli", "sweep",
        "--d", "2", "--N", "8,16,32", "--interaction", "sos",
        "--pinning", "delta", "--epsilon", "0.01,5.0",
        "--sweeps", "1500", "--burn_in", "500", "--tail-M", "0,1,2,4",
        "--seed", "2024", "--output", str(ref),
    ]
    subprocess.run(cmd, check=True, capture_output=True, text=True)
    assert ref.exists()

    outputs = {}
    for repeat in ("first", "second"):
        for kind in KINDS:
            out = tmp_path / f"{kind}-{repeat}.png"
            filters = {"epsilon": "0.01"} if kind in ("rho_vs_N", "tail") else {}
            if kind == "tail":
                filters["N"] = "16"
            render(PlotRequest([str(ref)], kind, str(out), filters=filters))
            outputs.setdefault(kind, []).append(out.read_bytes())
    for kind, (a, b) in outputs.items():
        assert a == b, f"{kind} render is not byte-deterministic"
        assert a[:8] == b"\x89PNG\r\n\x1a\n"
    print("ACCEPT-11 plots: four figure kinds from a real sweep, "
          "byte-deterministic PASS")
