"""
Run-directory persistence: config.json, snapshots/*.cf, norms.csv, run.json,
and the analysis outputs scattering.json, fits.csv, resonance.csv.

CSV numbers carry 17 significant digits so downstream fits re-run losslessly.
"""

from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path

import numpy as np

from .cfio import load_cf, save_cf, save_cf_values
from .config import SimConfig, load_config, save_config
from .evolution import Snapshot, SnapshotSeries
from .spectral import ComplexField, compute_norms, inverse_transform

NORM_COLUMNS = ("time", "l2", "linf", "hdot_m0", "hdot_0m")
FIT_COLUMNS = ("time", "linf", "cauchy_diff_w", "cauchy_diff_f", "weighted_norm", "arg_peak")
RESONANCE_COLUMNS = ("time", "leading_sup", "remainder_sup", "ratio")


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def read_csv_columns(path) -> dict:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols = {name: [] for name in header}
        for row in reader:
            for name, v in zip(header, row):
                cols[name].append(float(v))
    return {k: np.array(v) for k, v in cols.items()}


def write_run_dir(series: SnapshotSeries, out_dir, wall_time: float = 0.0,
                  aborted: str | None = None) -> Path:
    out = Path(out_dir)
    (out / "snapshots").mkdir(parents=True, exist_ok=True)
    save_config(series.config, out / "config.json")
    for k, snap in enumerate(series.snapshots):
        save_cf(snap.u, out / "snapshots" / f"t{k:03d}.cf")
    _write_csv(out / "norms.csv", NORM_COLUMNS,
               [(n.time, n.l2, n.linf, n.hdot_m0, n.hdot_0m) for n in series.norm_table])
    run_info = {
        "mass_drift": series.mass_drift,
        "max_boundary_amplitude": series.max_boundary_amplitude,
        "leak_threshold": series.config.leak_threshold,
        "initial_norms": series.initial_norms,
        "snapshot_count": len(series.snapshots),
        "wall_time_seconds": wall_time,
        "aborted": aborted,
    }
    with open(out / "run.json", "w") as fh:
        json.dump(run_info, fh, indent=2, sort_keys=True, default=json_default)
        fh.write("\n")
    return out


def read_run_dir(run_dir) -> SnapshotSeries:
    """Rebuild a SnapshotSeries from disk; profiles and norms are recomputed."""
    run = Path(run_dir)
    config = load_config(run / "config.json")
    snap_dir = run / "snapshots"
    paths = sorted(snap_dir.glob("t*.cf"))
    if not paths:
        raise FileNotFoundError(f"{snap_dir}: no snapshot files")
    snapshots = []
    norm_table = []
    from .evolution import _profile_hat_values
    import scipy.fft as sfft

    for p in paths:
        try:
            u = load_cf(p)
        except ValueError as exc:
            raise ValueError(f"corrupt snapshot {p}: {exc}") from exc
        raw = sfft.ifftshift(u.values)
        f_hat = ComplexField(u.grid, _profile_hat_values(raw, u.grid, u.time), u.time, "frequency")
        snapshots.append(Snapshot(u.time, u, f_hat))
        norm_table.append(compute_norms(u, inverse_transform(f_hat), config.m))
    with open(run / "run.json") as fh:
        info = json.load(fh)
    l2s = [n.l2 for n in norm_table]
    drift = max(abs(v - l2s[0]) / l2s[0] for v in l2s) if l2s[0] > 0 else 0.0
    return SnapshotSeries(config, snapshots, norm_table, drift,
                          info.get("max_boundary_amplitude", 0.0),
                          info.get("initial_norms", {}))


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def json_default(o):
    """json.dump fallback for numpy scalar types."""
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        v = float(o)
        return v if math.isfinite(v) else None
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def write_analysis(run_dir, report, resonance_rows, quadrature_rows=None) -> None:
    out = Path(run_dir)
    save_cf(report.W, out / "W.cf")
    # Phi is real with NaN marking sub-threshold amplitude; stored .cf-style.
    save_cf_values(report.W.grid, report.Phi.astype(np.complex128), report.W.time,
                   "frequency", out / "Phi.cf")

    doc = {
        "W": "W.cf",
        "Phi": "Phi.cf",
        "decay_exponent_fit": {"value": _json_safe(report.decay_exponent_fit[0]),
                               "stderr": _json_safe(report.decay_exponent_fit[1])},
        "delta_fit": {"value": _json_safe(report.delta_fit[0]),
                      "stderr": _json_safe(report.delta_fit[1])},
        "alpha_fit": {"value": _json_safe(report.alpha_fit[0]),
                      "stderr": _json_safe(report.alpha_fit[1])},
        "drift_match": _json_safe(report.drift_match),
        "pass_flags": report.pass_flags,
        "xi_peak": report.xi_peak,
        "W_peak_abs": float(np.max(np.abs(report.W.values))),
    }
    with open(out / "scattering.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=json_default)
        fh.write("\n")

    ft = report.fit_table
    rows = zip(ft["time"], ft["linf"], ft["cauchy_diff_w"], ft["cauchy_diff_f"],
               ft["weighted_norm"], ft["arg_peak"])
    _write_csv(out / "fits.csv", FIT_COLUMNS, rows)

    _write_csv(out / "resonance.csv", RESONANCE_COLUMNS,
               [(s.t, s.leading_sup, s.remainder_sup,
                 s.remainder_sup / s.leading_sup if s.leading_sup > 0 else float("nan"))
                for s in resonance_rows])

    if quadrature_rows is not None:
        qdoc = [
            {
                "s": r["s"],
                "xi": r["xi"],
                "r_quad": [r["r_quad"].real, r["r_quad"].imag],
                "r_residual": [r["r_residual"].real, r["r_residual"].imag],
                "bound_value": r["bound_value"],
                "mismatch": r["mismatch"],
                "bound_dominates": r["bound_dominates"],
            }
            for r in quadrature_rows
        ]
        with open(out / "quadrature.json", "w") as fh:
            json.dump(qdoc, fh, indent=2, sort_keys=True, default=json_default)
            fh.write("\n")
