"""Command-line orchestration: solve, diagnose, sweep, report.

Config files are flat INI-style key/value text with one section per module;
unknown sections or keys are errors (silent typos must not corrupt physics
parameters).  All outputs are deterministic for a fixed config: no timestamps,
sorted JSON keys, fixed float formatting.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import itertools
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .model import ModelParams
from .solver import (
    Grid,
    InitialDataSpec,
    evolve,
    export_record_csv,
    load_record,
    make_initial_data,
    save_checkpoint,
    save_record,
)
from .geometry import CoverageError, RegionSpec, SliceSpec
from .functionals import (
    FunctionalSeries,
    energy_flux,
    energy_partition_residual,
    exterior_flux_series,
    hardy_check,
    iled_bulk,
    iled_bulk_region,
    rweighted_bulk_and_flux,
    spacetime_norm,
)
from .multipliers import MultiplierSpec, audit_identity, iled_lower_bound_check
from .scattering import scatter_cauchy
from .analysis import convergence_order, fit_power_law, plateau_check

SCHEMA_VERSION = 1

# section -> key -> (type, default); bool values use true/false
CONFIG_SCHEMA = {
    "model": {
        "d": (int, 3),
        "p": (float, 3.0),
        "gamma0": (float, 1.5),
        "epsilon": (float, 0.1),
        "mode": (str, "flux_decay"),  # flux_decay | scattering | none
    },
    "data": {
        "family": (str, "gaussian"),
        "amplitude": (float, 1.0),
        "width": (float, 1.0),
        "center": (float, 0.0),
        "tail_exponent": (float, 3.0),
    },
    "solver": {
        "dr": (float, 0.05),
        "r_max": (float, 120.0),
        "t_final": (float, 100.0),
        "cfl": (float, 0.4),
        "record_every": (int, 4),
        "node_stride": (int, 2),
        "nonlinearity": (bool, True),
    },
    "output": {
        "write_record_csv": (bool, True),
        "csv_time_stride": (int, 5),
        "csv_node_stride": (int, 2),
    },
    "analysis": {
        "fit_window_lo": (float, 2.0),
        "fit_window_hi": (float, 32.0),
        "decay_slack": (float, 0.1),
        "fit_quality_min": (float, 0.98),
        "plateau_tolerance": (float, 0.02),
        "iled_plateau_tolerance": (float, 0.01),
        "conservation_tolerance": (float, 5e-4),
        "exterior_slack": (float, 0.2),
    },
    "diagnose": {
        "suite": (str, "full"),
    },
    "sweep": {
        "p": (str, ""),
        "gamma0": (str, ""),
        "amplitude": (str, ""),
        "dr": (str, ""),
        "workers": (int, 1),
        "suite": (str, "conservation"),
    },
}

SUITES = (
    "conservation",
    "iled",
    "flux_decay",
    "rweighted",
    "spacetime",
    "exterior",
    "audit",
    "scattering",
    "full",
)


class ConfigError(ValueError):
    pass


def _coerce(section, key, raw, typ):
    try:
        if typ is bool:
            low = raw.strip().lower()
            if low in ("true", "on", "1", "yes"):
                return True
            if low in ("false", "off", "0", "no"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        return typ(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from None


def parse_config(path) -> dict:
    """Parse and validate a config file against the schema; defaults fill gaps."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = cp.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    config = {sec: {k: dv for k, (_, dv) in keys.items()} for sec, keys in CONFIG_SCHEMA.items()}
    for sec in cp.sections():
        if sec not in CONFIG_SCHEMA:
            raise ConfigError(f"unknown config section [{sec}]")
        for key, raw in cp[sec].items():
            if key not in CONFIG_SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in section [{sec}]")
            typ, _ = CONFIG_SCHEMA[sec][key]
            config[sec][key] = _coerce(sec, key, raw, typ)
    return config


def config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def build_model(config: dict) -> ModelParams:
    m = config["model"]
    try:
        params = ModelParams(d=m["d"], p=m["p"], gamma0=m["gamma0"], epsilon=m["epsilon"])
    except ValueError as exc:
        raise ConfigError(f"[model] {exc}") from None
    mode = m["mode"]
    if mode not in ("flux_decay", "scattering", "none"):
        raise ConfigError(f"[model] mode: unknown mode {mode!r}")
    if mode != "none":
        try:
            params.require_window(mode)
        except ValueError as exc:
            raise ConfigError(f"[model] {exc}") from None
    return params


def build_data_spec(config: dict) -> InitialDataSpec:
    d = config["data"]
    try:
        return InitialDataSpec(
            family=d["family"],
            amplitude=d["amplitude"],
            width=d["width"],
            center=d["center"],
            tail_exponent=d["tail_exponent"],
        )
    except ValueError as exc:
        raise ConfigError(f"[data] {exc}") from None


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


# -- solve ---------------------------------------------------------------------


def run_solve(config: dict, out_dir: Path) -> dict:
    params = build_model(config)
    spec = build_data_spec(config)
    s = config["solver"]
    try:
        grid = Grid(s["dr"], s["r_max"])
    except ValueError as exc:
        raise ConfigError(f"[solver] {exc}") from None
    if s["cfl"] > 0.5:
        raise ConfigError(f"[solver] cfl: must be <= 0.5, got {s['cfl']}")

    state, energies = make_initial_data(spec, grid, params)
    dt = s["cfl"] * s["dr"]
    n_steps = max(1, round(s["t_final"] / dt))
    dt = s["t_final"] / n_steps
    if dt > 0.5 * s["dr"]:
        raise ConfigError(f"[solver] t_final/cfl mismatch drives dt={dt} beyond 0.5*dr")
    final, record = evolve(
        state,
        params,
        dt,
        n_steps,
        record_every=s["record_every"],
        node_stride=s["node_stride"],
        nonlinearity_on=s["nonlinearity"],
    )

    out_dir.mkdir(parents=True, exist_ok=True)
    save_record(record, out_dir / "record.npz")
    save_checkpoint(final, params, out_dir / "checkpoint.txt")
    if config["output"]["write_record_csv"]:
        export_record_csv(
            record,
            out_dir / "record.csv",
            time_stride=config["output"]["csv_time_stride"],
            node_stride=config["output"]["csv_node_stride"],
        )
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "config": config,
        "config_hash": config_hash(config),
        "grid": {"dr": grid.dr, "r_max": grid.r_max, "n": grid.n},
        "t_final": final.t,
        "E0": energies["E0"],
        "E_gamma0": energies["E_gamma0"],
        "record_id": record.record_id,
        "taint_start": record.taint_start,
        "support_radius": record.support_radius,
    }
    _write_json(out_dir / "manifest.json", manifest)
    return manifest


# -- diagnose ------------------------------------------------------------------


def _suite_items(record, config, out_dir: Path):
    """Yield (name, callable) diagnostics for the configured suite."""
    params = record.params
    a = config["analysis"]
    T = record.t_max
    gamma0 = params.gamma0

    def conservation():
        # sample at record rows: no time interpolation enters the drift
        idx = np.unique(np.linspace(0, len(record.times) - 1, 21).astype(int))
        times = record.times[idx]
        vals = np.array([energy_flux(record, SliceSpec.time(t)) for t in times])
        series = FunctionalSeries(
            "energy_time", "t", times, vals, params, record.record_id
        )
        series.to_csv(out_dir / "energy_time.csv")
        if vals[0] > 0:
            # secular drift: end-of-run deviation; the O(dr^2) focusing
            # transient (energy dips while the pulse crosses the origin and
            # recovers) is reported separately
            drift = float(abs(vals[-1] - vals[0]) / vals[0])
            transient = float(np.max(np.abs(vals - vals[0])) / vals[0])
        else:
            drift = transient = 0.0
        hardy = hardy_check(record, T / 2.0)
        part = energy_partition_residual(record, 0.5, 3.0, min(12.0, T / 2.0))
        return {
            "verdict": "energy_conservation",
            "drift": drift,
            "max_transient_deviation": transient,
            "tolerance": a["conservation_tolerance"],
            "passed": drift <= a["conservation_tolerance"],
            "hardy": hardy,
            "partition": part,
            "series": "energy_time.csv",
        }

    def iled():
        ts = np.array([T / 4.0, T / 2.0, T])
        vals = np.array([iled_bulk(record, t) for t in ts])
        series = FunctionalSeries("iled_bulk", "T", ts, vals, params, record.record_id)
        series.to_csv(out_dir / "iled_bulk.csv")
        e0 = energy_flux(record, SliceSpec.time(0.0))
        gap = float((vals[-1] - vals[-2]) / vals[-1]) if vals[-1] > 0 else 0.0
        us = [2.0, 4.0, 8.0, 16.0]
        region_vals = [iled_bulk_region(record, u) for u in us]
        out = {
            "verdict": "iled_uniformity",
            "bulk": dict(zip((str(t) for t in ts), vals.tolist())),
            "constant_over_E0": float(vals[-1] / e0) if e0 > 0 else 0.0,
            "doubling_gap": gap,
            "tolerance": a["iled_plateau_tolerance"],
            "passed": gap <= a["iled_plateau_tolerance"],
            "series": "iled_bulk.csv",
        }
        if all(v > 0 for v in region_vals):
            reg = FunctionalSeries(
                "iled_region", "u", np.array(us), np.array(region_vals), params, record.record_id
            )
            reg.to_csv(out_dir / "iled_region.csv")
            fit = fit_power_law(reg)
            out["region_fit"] = fit.to_dict()
        lb = iled_lower_bound_check(record, RegionSpec.slab(0.0, min(10.0, T)), params)
        out["lower_bound"] = lb
        return out

    def flux_decay():
        lo, hi = a["fit_window_lo"], a["fit_window_hi"]
        us = np.arange(lo, hi + 0.5, 1.0)
        vals = np.array([energy_flux(record, SliceSpec.hybrid(u)) for u in us])
        series = FunctionalSeries("sigma_flux", "u", us, vals, params, record.record_id,
                                  meta={"gamma0": gamma0})
        series.to_csv(out_dir / "sigma_flux.csv")
        fit = fit_power_law(series, window=(lo, hi))
        target = -gamma0 + a["decay_slack"]
        return {
            "verdict": "flux_decay",
            "fit": fit.to_dict(),
            "target_exponent": target,
            "passed": fit.exponent <= target and fit.r_squared >= a["fit_quality_min"],
            "series": "sigma_flux.csv",
        }

    def rweighted():
        ts = np.array([T / 4.0, T / 2.0, T])
        bulks = []
        for t in ts:
            b, _ = rweighted_bulk_and_flux(record, [0.0], gamma0, T=float(t))
            bulks.append(b)
        series = FunctionalSeries(
            "rweighted_bulk", "T", ts, np.array(bulks), params, record.record_id,
            meta={"gamma": gamma0},
        )
        series.to_csv(out_dir / "rweighted_bulk.csv")
        verdict = plateau_check(series, a["plateau_tolerance"])
        u_hi = min(40.0, (T - 4.0) / 2.0)
        us = np.arange(-1.0, u_hi + 0.5, 1.0)
        _, flux = rweighted_bulk_and_flux(record, us.tolist(), gamma0)
        flux.to_csv(out_dir / "rweighted_flux.csv")
        return {
            "verdict": "rweighted_bound",
            "plateau": verdict.to_dict(),
            "passed": verdict.passed,
            "flux_sup": float(np.max(flux.values)),
            "series": "rweighted_bulk.csv",
            "flux_series": "rweighted_flux.csv",
        }

    def spacetime():
        q = (params.d + 1.0) * (params.p - 1.0) / 2.0
        if q < 1.0:
            raise ValueError(f"critical exponent q={q} below 1")
        ts = np.array([T / 4.0, T / 2.0, T])
        vals = np.array([spacetime_norm(record, q, 0.0, float(t)) for t in ts])
        series = FunctionalSeries(
            "spacetime_norm", "T", ts, vals, params, record.record_id, meta={"q": q}
        )
        series.to_csv(out_dir / "spacetime_norm.csv")
        inc1 = vals[1] ** q - vals[0] ** q
        inc2 = vals[2] ** q - vals[1] ** q
        ratio = float(inc1 / inc2) if inc2 > 0 else float("inf")
        return {
            "verdict": "critical_spacetime_norm",
            "q": q,
            "norms": dict(zip((str(t) for t in ts), vals.tolist())),
            "increment_ratio": ratio,
            "passed": ratio >= 4.0,
            "series": "spacetime_norm.csv",
        }

    def exterior():
        us = (-np.arange(2.0, 33.0, 2.0)[::-1]).tolist()
        series = exterior_flux_series(record, us, gamma0)
        series.to_csv(out_dir / "exterior_flux.csv")
        fit = fit_power_law(series)
        target = -gamma0 + a["exterior_slack"]
        return {
            "verdict": "exterior_flux_decay",
            "fit": fit.to_dict(),
            "target_exponent": target,
            "passed": fit.exponent <= target,
            "series": "exterior_flux.csv",
        }

    def audit():
        specs = [
            MultiplierSpec.energy(),
            MultiplierSpec.morawetz(params.epsilon),
            MultiplierSpec.rweighted(gamma0),
        ]
        regions = [
            RegionSpec.slab(0.0, min(10.0, T), r_cap=12.0),
            RegionSpec.foliation(0.0, 4.0, v0=12.0),
        ]
        evals = []
        worst = 0.0
        for mspec in specs:
            for region in regions:
                ev = audit_identity(record, region, mspec, params)
                rel = abs(ev.residual) / max(ev.scale, 1e-300)
                worst = max(worst, rel)
                evals.append(json.loads(ev.to_json()))
        return {"verdict": "energy_identity", "audits": evals, "max_rel_residual": worst}

    def scattering_item():
        # the backward flight from t2 = 2t needs support_radius + 2*t2 <= r_max,
        # with a margin for the numerical front running slightly ahead of r = R0 + t
        t2_max = 0.5 * (record.r_max - record.support_radius) - 4.0
        if t2_max < record.times[2] * 2.0:
            raise ValueError(
                f"no causal margin for pullbacks: needs r_max > {record.support_radius + 4 * record.times[2]:.6g}"
            )
        ts = sorted({min(x, t2_max / 2.0) for x in (T / 8.0, T / 4.0, T / 2.0)})
        snapped = []
        for t in ts:
            k = int(np.argmin(np.abs(record.times - t)))
            snapped.append(float(record.times[k]))
        snapped = sorted(set(snapped))
        vals = np.array([scatter_cauchy(record, t, 2.0 * t) for t in snapped])
        series = FunctionalSeries(
            "scatter_cauchy", "t", np.array(snapped), vals, params, record.record_id
        )
        series.to_csv(out_dir / "scatter_cauchy.csv")
        e0 = energy_flux(record, SliceSpec.time(0.0))
        rel = float(vals[-1] / np.sqrt(e0)) if e0 > 0 else 0.0
        decreasing = bool(np.all(np.diff(vals) < 0.0))
        return {
            "verdict": "scattering",
            "cauchy": dict(zip((str(t) for t in snapped), vals.tolist())),
            "decreasing": decreasing,
            "final_over_sqrtE0": rel,
            "passed": decreasing and rel <= 1e-2,
            "series": "scatter_cauchy.csv",
        }

    table = {
        "conservation": conservation,
        "iled": iled,
        "flux_decay": flux_decay,
        "rweighted": rweighted,
        "spacetime": spacetime,
        "exterior": exterior,
        "audit": audit,
        "scattering": scattering_item,
    }
    suite = config["diagnose"]["suite"]
    if suite == "full":
        return list(table.items())
    if suite not in table:
        raise ConfigError(f"[diagnose] suite: unknown suite {suite!r}; choose from {SUITES}")
    return [(suite, table[suite])]


def run_diagnose(record_dir: Path, config: dict, out_dir: Path) -> dict:
    record = load_record(record_dir / "record.npz")
    out_dir.mkdir(parents=True, exist_ok=True)
    items = {}
    for name, fn in _suite_items(record, config, out_dir):
        try:
            items[name] = fn()
        except (ValueError, CoverageError) as exc:
            items[name] = {"error": str(exc)}
    report = {
        "schema_version": SCHEMA_VERSION,
        "record_id": record.record_id,
        "params": {
            "d": record.params.d,
            "p": record.params.p,
            "gamma0": record.params.gamma0,
            "epsilon": record.params.epsilon,
        },
        "grid": {"dr": record.dr, "r_max": record.r_max, "t_max": record.t_max},
        "config": config,
        "items": items,
    }
    _write_json(out_dir / "report.json", report)
    return report


# -- sweep ---------------------------------------------------------------------


def _sweep_cell(args):
    config, cell, out_dir = args
    cell_dir = Path(out_dir)
    try:
        manifest = run_solve(config, cell_dir)
        report = run_diagnose(cell_dir, config, cell_dir)
        return {"cell": cell, "status": "ok", "dir": cell_dir.name,
                "record_id": manifest["record_id"],
                "items": {k: v for k, v in report["items"].items()}}
    except (ConfigError, ValueError) as exc:
        return {"cell": cell, "status": "skipped", "dir": cell_dir.name, "reason": str(exc)}


def run_sweep(config: dict, out_dir: Path) -> dict:
    sweep = config["sweep"]
    axes = {}
    for key in ("p", "gamma0", "amplitude", "dr"):
        raw = sweep[key].strip()
        if raw:
            axes[key] = [float(x) for x in raw.split(",")]
    if not axes:
        axes = {"p": [config["model"]["p"]]}
    names = sorted(axes)
    cells = list(itertools.product(*(axes[n] for n in names)))
    out_dir.mkdir(parents=True, exist_ok=True)

    jobs = []
    for idx, values in enumerate(cells):
        cell = dict(zip(names, values))
        cfg = json.loads(json.dumps(config))  # deep copy
        if "p" in cell:
            cfg["model"]["p"] = cell["p"]
        if "gamma0" in cell:
            cfg["model"]["gamma0"] = cell["gamma0"]
        if "amplitude" in cell:
            cfg["data"]["amplitude"] = cell["amplitude"]
        if "dr" in cell:
            cfg["solver"]["dr"] = cell["dr"]
        cfg["diagnose"]["suite"] = sweep["suite"]
        jobs.append((cfg, cell, str(out_dir / f"cell_{idx:03d}")))

    workers = int(os.environ.get("WAVEDECAY_WORKERS", sweep["workers"]))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_cell, jobs))
    else:
        results = [_sweep_cell(j) for j in jobs]

    aggregate = {"schema_version": SCHEMA_VERSION, "config": config, "cells": results}
    drs = axes.get("dr", [])
    if len(drs) >= 3 and all(len(v) == 1 for k, v in axes.items() if k != "dr"):
        vals = []
        for res in results:
            if res["status"] == "ok":
                item = res["items"].get("iled", {})
                bulk = item.get("bulk", {})
                if bulk:
                    vals.append((res["cell"]["dr"], list(bulk.values())[-1]))
        if len(vals) >= 3:
            vals.sort(reverse=True)
            order = convergence_order(vals[0][1], vals[1][1], vals[2][1])
            aggregate["convergence"] = {"quantity": "iled_bulk", **order.to_dict()}
    _write_json(out_dir / "sweep_report.json", aggregate)
    return aggregate


# -- report --------------------------------------------------------------------


def run_report(in_dir: Path, fmt: str, out_path=None) -> str:
    report_path = in_dir / "report.json"
    if not report_path.exists():
        report_path = in_dir / "sweep_report.json"
    if not report_path.exists():
        raise ConfigError(f"no report.json or sweep_report.json under {in_dir}")
    with open(report_path, "r", encoding="utf-8") as f:
        report = json.load(f)
    if fmt == "json":
        text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    else:
        lines = ["item,key,value"]
        for name, item in report.get("items", {}).items():
            flat = item if isinstance(item, dict) else {"value": item}
            for k, v in sorted(flat.items()):
                if isinstance(v, (int, float, str, bool)):
                    lines.append(f"{name},{k},{v}")
        text = "\n".join(lines) + "\n"
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    return text


# -- entry point ----------------------------------------------------------------


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="wavedecay",
        description="Radial defocusing semilinear wave lab: solve, diagnose, sweep, report.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run one evolution and write record artifacts")
    p_solve.add_argument("--config", required=True)
    p_solve.add_argument("--out", required=True)

    p_diag = sub.add_parser("diagnose", help="run a diagnostics suite on a stored record")
    p_diag.add_argument("--record", required=True, help="directory containing record.npz")
    p_diag.add_argument("--suite", default=None, choices=SUITES)
    p_diag.add_argument("--config", default=None, help="optional config for analysis knobs")
    p_diag.add_argument("--out", default=None)

    p_sweep = sub.add_parser("sweep", help="cartesian parameter sweep")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", required=True)

    p_rep = sub.add_parser("report", help="emit a stored report as json or csv")
    p_rep.add_argument("--in", dest="in_dir", required=True)
    p_rep.add_argument("--format", choices=("json", "csv"), default="json")
    p_rep.add_argument("--out", default=None)

    args = parser.parse_args(argv)
    try:
        if args.command == "solve":
            config = parse_config(args.config)
            manifest = run_solve(config, Path(args.out))
            print(f"solve complete: record {manifest['record_id']} in {args.out}")
        elif args.command == "diagnose":
            if args.config:
                config = parse_config(args.config)
            else:
                config = {
                    sec: {k: dv for k, (_, dv) in keys.items()}
                    for sec, keys in CONFIG_SCHEMA.items()
                }
            if args.suite:
                config["diagnose"]["suite"] = args.suite
            out = Path(args.out) if args.out else Path(args.record)
            report = run_diagnose(Path(args.record), config, out)
            bad = [k for k, v in report["items"].items() if "error" in v]
            print(f"diagnose complete: {len(report['items'])} items, {len(bad)} errors")
        elif args.command == "sweep":
            config = parse_config(args.config)
            agg = run_sweep(config, Path(args.out))
            ok = sum(1 for c in agg["cells"] if c["status"] == "ok")
            print(f"sweep complete: {ok}/{len(agg['cells'])} cells ok")
        else:
            text = run_report(Path(args.in_dir), args.format, args.out)
            if not args.out:
                sys.stdout.write(text)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, CoverageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
