"""Configuration parsing, initial-condition families, serialization, CLI.

Text-first formats with full-precision (17 significant digit) decimals:
diagnostics CSV and snapshot files round-trip bit-exactly and diff cleanly,
and identical runs produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import configparser
import io
import math
import sys
from dataclasses import dataclass, replace

import numpy as np

from .core import (ConfigError, DiagnosticsRecord, Field3, GridSpec,
                   PreconditionError, SimParams, VfaxError, E3,
                   BOUNDARY_RESIDUAL_KEYS, IDENTITY_RESIDUAL_KEYS,
                   sup_norm_unit_drift)
from . import compatibility as _compat
from . import diagnostics as _diag
from . import hasimoto as _has
from . import timestepper as _ts

SCHEMA_VERSION = 1


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# Initial-condition families


def _bridge(u: np.ndarray) -> np.ndarray:
    """C-infinity ramp: 0 for u <= 0, 1 for u >= 1."""
    def f(x):
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = np.exp(-1.0 / x[pos])
        return out
    a = f(u)
    b = f(1.0 - u)
    return a / (a + b + np.finfo(float).tiny * ((a + b) == 0))


def _cutoff_down(s: np.ndarray, start: float, stop: float) -> np.ndarray:
    """1 for s <= start, 0 for s >= stop, smooth in between."""
    return 1.0 - _bridge((s - start) / (stop - start))


def _smooth_bump(r: np.ndarray) -> np.ndarray:
    """exp(1 - 1/(1 - r^2)) inside |r| < 1, exactly zero outside."""
    out = np.zeros_like(r)
    inside = np.abs(r) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
    return out


def _unit_from_components(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Exactly unit-norm field (P, Q, sqrt(1 - P^2 - Q^2))."""
    z2 = 1.0 - P * P - Q * Q
    if np.any(z2 <= 0):
        raise ConfigError("transverse components too large for a unit field")
    return np.stack([P, Q, np.sqrt(z2)], axis=1)


def _family_e3(g: GridSpec, params, opts) -> np.ndarray:
    return np.tile(E3, (g.npoints, 1))


def _family_compatible_bump(g: GridSpec, params, opts) -> np.ndarray:
    """e3 plus an interior-supported smooth bump; identically e3 near both ends,
    so every boundary compatibility condition holds exactly in either regime."""
    L = g.length
    amp = float(opts.get("amp", 0.15))
    width = float(opts.get("width", 0.25 * L))
    center = float(opts.get("center", 0.525 * L))
    skew = float(opts.get("skew", 0.35 * width))
    s = g.nodes
    P = amp * _smooth_bump((s - center) / width)
    Q = 0.6 * amp * _smooth_bump((s - center - skew) / width)
    return _unit_from_components(P, Q)


def _family_helix_cap(g: GridSpec, params, opts) -> np.ndarray:
    """Helix in the interior, smoothly flattened to e3 near s = 0 and s = L."""
    L = g.length
    a = float(opts.get("a", 0.5))
    k = float(opts.get("k", max(1.0, 8.0 * math.pi / L)))
    rise = float(opts.get("rise", 0.18 * L))
    margin = float(opts.get("margin", 0.08 * L))
    s = g.nodes
    mask = _bridge((s - margin) / rise) * _bridge((L - margin - s) / rise)
    P = a * mask * np.cos(k * s)
    Q = a * mask * np.sin(k * s)
    return _unit_from_components(P, Q)


def _family_boundary_cubic(g: GridSpec, params, opts) -> np.ndarray:
    """Boundary-active datum for alpha < 0: v_s(0) = 0 and the order-1
    unregularized condition hold exactly, but the delta-block residual
    d_s(v_ss + |v_s|^2 v)(0) = 6 c3 e1 is nonzero, so an O(delta)
    correction is required."""
    if params is None:
        raise ConfigError("family boundary-cubic needs alpha")
    L = g.length
    c3 = float(opts.get("c3", 2e-3))
    support = float(opts.get("support", 0.06 * L))
    s = g.nodes
    chi = _cutoff_down(s, support, 2.0 * support)
    P = c3 * s ** 3 * chi
    Q = -(c3 / (4.0 * params.alpha)) * s ** 4 * chi
    return _unit_from_components(P, Q)


def _family_boundary_curved(g: GridSpec, params, opts) -> np.ndarray:
    """Boundary-active datum for alpha > 0: v(0) = e3, v_s(0) = 0 and the
    order-1 unregularized conditions hold exactly while v_ss(0) = u e1
    leaves nonzero regularized residuals at order 1."""
    if params is None:
        raise ConfigError("family boundary-curved needs alpha")
    L = g.length
    u = float(opts.get("u", 0.02))
    support = float(opts.get("support", 0.06 * L))
    al = params.alpha
    s = g.nodes
    chi = _cutoff_down(s, support, 2.0 * support)
    P = (0.5 * u * s ** 2 - u / (24.0 * al ** 2) * s ** 4) * chi
    Q = -(u / (6.0 * al)) * s ** 3 * chi
    return _unit_from_components(P, Q)


_FAMILIES = {
    "e3": _family_e3,
    "compatible-bump": _family_compatible_bump,
    "helix-cap": _family_helix_cap,
    "boundary-cubic": _family_boundary_cubic,
    "boundary-curved": _family_boundary_curved,
}


def _parse_family_spec(spec: str):
    if ":" not in spec:
        return spec, {}
    name, rest = spec.split(":", 1)
    opts = {}
    for item in rest.split(","):
        if not item:
            continue
        if "=" not in item:
            raise ConfigError(f"bad family option {item!r} (expected key=value)")
        k, v = item.split("=", 1)
        opts[k.strip()] = v.strip()
    return name, opts


def load_initial_condition(spec: str, g: GridSpec, params: SimParams | None = None) -> Field3:
    """Resolve a named analytic family (optionally 'name:key=val,...') or a
    snapshot file to a unit-norm field."""
    name, opts = _parse_family_spec(spec)
    if name in _FAMILIES:
        vals = _FAMILIES[name](g, params, opts)
        field = Field3(vals)
    else:
        try:
            state, g_file, _ = load_snapshot(spec)
        except OSError as exc:
            raise ConfigError(f"initial condition {spec!r} is neither a known family "
                              f"({', '.join(sorted(_FAMILIES))}) nor a readable file: {exc}")
        if g_file.npoints != g.npoints or abs(g_file.length - g.length) > 1e-12:
            raise ConfigError(f"snapshot grid ({g_file.npoints} pts, L={g_file.length}) "
                              f"does not match the requested grid")
        field = state.v
    drift = sup_norm_unit_drift(field)
    if drift > 1e-12:
        field = Field3(field.values / np.sqrt(
            np.einsum("ij,ij->i", field.values, field.values))[:, None])
    return field


# ---------------------------------------------------------------------------
# Snapshot files


def write_snapshot(path, state: _ts.SimState, g: GridSpec, params: SimParams) -> None:
    """Plain-text state dump; reload reproduces the state bit-exactly."""
    has_x = state.x is not None
    lines = ["# vfax snapshot",
             f"schema_version = {SCHEMA_VERSION}",
             f"length = {_fmt(g.length)}",
             f"npoints = {g.npoints}",
             f"periodic = {int(g.periodic)}",
             f"alpha = {_fmt(params.alpha)}",
             f"delta = {_fmt(params.delta)}",
             f"stencil_order = {params.stencil_order}",
             f"cfl_safety = {_fmt(params.cfl_safety)}",
             f"t = {_fmt(state.t)}",
             f"step_count = {state.step_count}",
             f"has_x = {int(has_x)}",
             "columns = i s v1 v2 v3" + (" x1 x2 x3" if has_x else "")]
    s = g.nodes
    for i in range(g.npoints):
        row = [str(i), _fmt(s[i])] + [_fmt(c) for c in state.v.values[i]]
        if has_x:
            row += [_fmt(c) for c in state.x.values[i]]
        lines.append(" ".join(row))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_snapshot(path):
    """Read a snapshot file back into (SimState, GridSpec, SimParams)."""
    header = {}
    rows = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" in line and not rows:
                k, v = (part.strip() for part in line.split("=", 1))
                header[k] = v
            else:
                rows.append(line.split())
    try:
        if int(header["schema_version"]) != SCHEMA_VERSION:
            raise ConfigError(f"unsupported snapshot schema {header['schema_version']}")
        g = GridSpec(length=float(header["length"]), npoints=int(header["npoints"]),
                     periodic=bool(int(header["periodic"])))
        params = SimParams(alpha=float(header["alpha"]), delta=float(header["delta"]),
                           stencil_order=int(header["stencil_order"]),
                           cfl_safety=float(header["cfl_safety"]))
        t = float(header["t"])
        step_count = int(header["step_count"])
        has_x = bool(int(header["has_x"]))
    except KeyError as exc:
        raise ConfigError(f"snapshot missing header key {exc}")
    if len(rows) != g.npoints:
        raise ConfigError(f"snapshot has {len(rows)} rows, header says {g.npoints}")
    data = np.array([[float(c) for c in r] for r in rows])
    v = Field3(data[:, 2:5])
    x = Field3(data[:, 5:8]) if has_x else None
    return _ts.SimState(t=t, v=v, x=x, step_count=step_count), g, params


# ---------------------------------------------------------------------------
# Diagnostics CSV

_CSV_COLUMNS = (["t", "unit_norm_drift", "norm_vs", "norm_vss", "norm_vsss",
                 "energy_E2", "modified_E3"]
                + [f"boundary_{k}" for k in BOUNDARY_RESIDUAL_KEYS]
                + [f"identity_{k}" for k in IDENTITY_RESIDUAL_KEYS])


def write_diagnostics_csv(records, path) -> None:
    """Fixed column order, 17-significant-digit floats, newline-terminated;
    byte-identical across repeated identical runs.  Residuals a regime does
    not define are left empty."""
    if not records:
        raise ValueError("no records to write")
    text = render_diagnostics_csv(records)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)


def render_diagnostics_csv(records) -> str:
    out = io.StringIO()
    out.write(",".join(_CSV_COLUMNS) + "\n")
    for rec in records:
        cells = [_fmt(rec.t), _fmt(rec.unit_norm_drift), _fmt(rec.norm_vs),
                 _fmt(rec.norm_vss), _fmt(rec.norm_vsss), _fmt(rec.energy_E2),
                 _fmt(rec.modified_E3)]
        for k in BOUNDARY_RESIDUAL_KEYS:
            cells.append(_fmt(rec.boundary_residuals[k]) if k in rec.boundary_residuals else "")
        for k in IDENTITY_RESIDUAL_KEYS:
            cells.append(_fmt(rec.identity_residuals[k]) if k in rec.identity_residuals else "")
        out.write(",".join(cells) + "\n")
    return out.getvalue()


def read_diagnostics_csv(path):
    """Parse a diagnostics CSV back into records (full precision)."""
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    header = lines[0].split(",")
    if header != _CSV_COLUMNS:
        raise ConfigError("unrecognized diagnostics CSV header")
    records = []
    for ln in lines[1:]:
        cells = ln.split(",")
        row = dict(zip(header, cells))
        boundary = {k: float(row[f"boundary_{k}"]) for k in BOUNDARY_RESIDUAL_KEYS
                    if row[f"boundary_{k}"] != ""}
        identity = {k: float(row[f"identity_{k}"]) for k in IDENTITY_RESIDUAL_KEYS
                    if row[f"identity_{k}"] != ""}
        records.append(DiagnosticsRecord(
            t=float(row["t"]), unit_norm_drift=float(row["unit_norm_drift"]),
            norm_vs=float(row["norm_vs"]), norm_vss=float(row["norm_vss"]),
            norm_vsss=float(row["norm_vsss"]), energy_E2=float(row["energy_E2"]),
            modified_E3=float(row["modified_E3"]),
            boundary_residuals=boundary, identity_residuals=identity))
    return records


# ---------------------------------------------------------------------------
# Config files

_SCHEMA = {
    "grid": {"length": float, "npoints": int, "periodic": bool},
    "params": {"alpha": float, "delta": float, "stencil_order": int, "cfl_safety": float},
    "run": {"dt": float, "t_final": float, "project_unit_norm": bool,
            "diagnostics_every": int, "right_boundary": str, "track_x": bool},
    "ic": {"family": str, "file": str},
    "output": {"diagnostics": str, "snapshot": str},
}

_DEFAULTS = {
    "grid": {"length": 40.0, "npoints": 512, "periodic": False},
    "params": {"alpha": -1.0, "delta": 1e-3, "stencil_order": 4, "cfl_safety": 0.5},
    "run": {"dt": None, "t_final": 0.05, "project_unit_norm": False,
            "diagnostics_every": 50, "right_boundary": "clamp", "track_x": False},
    "ic": {"family": "e3", "file": None},
    "output": {"diagnostics": None, "snapshot": None},
}


def _coerce(section: str, key: str, raw: str):
    typ = _SCHEMA[section][key]
    try:
        if typ is bool:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return typ(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} as {typ.__name__}")


def parse_config(text: str) -> dict:
    """Parse and validate the INI-style config; unknown sections/keys are errors."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}")
    merged = {sec: dict(vals) for sec, vals in _DEFAULTS.items()}
    for sec in cp.sections():
        if sec not in _SCHEMA:
            raise ConfigError(f"unknown config section [{sec}]")
        for key, raw in cp.items(sec):
            if key not in _SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in section [{sec}]")
            merged[sec][key] = _coerce(sec, key, raw)
    return merged


def validate_config(cfg: dict):
    """Build the typed objects, with specific messages for the rejects."""
    g_sec, p_sec, r_sec = cfg["grid"], cfg["params"], cfg["run"]
    if p_sec["alpha"] == 0:
        raise ConfigError("alpha = 0 is rejected: the axial-flow coefficient must be "
                          "non-zero (its sign selects the boundary conditions)")
    if p_sec["delta"] < 0:
        raise ConfigError("delta must be >= 0 (parabolic regularization strength)")
    if g_sec["npoints"] < 16:
        raise ConfigError("npoints must be at least 16")
    try:
        grid = GridSpec(length=g_sec["length"], npoints=g_sec["npoints"],
                        periodic=g_sec["periodic"])
        params = SimParams(alpha=p_sec["alpha"], delta=p_sec["delta"],
                           stencil_order=p_sec["stencil_order"],
                           cfl_safety=p_sec["cfl_safety"])
    except ValueError as exc:
        raise ConfigError(str(exc))
    ic = cfg["ic"]["file"] if cfg["ic"]["file"] else cfg["ic"]["family"]
    try:
        run_cfg = _ts.RunConfig(params=params, grid=grid, t_final=r_sec["t_final"],
                                dt=r_sec["dt"], ic=ic,
                                project_unit_norm=r_sec["project_unit_norm"],
                                diagnostics_every=r_sec["diagnostics_every"],
                                right_boundary=r_sec["right_boundary"],
                                track_x=r_sec["track_x"])
    except ValueError as exc:
        raise ConfigError(str(exc))
    return run_cfg, cfg["output"]


def echo_config(cfg: dict) -> str:
    """Canonical text form; parse(echo(parse(text))) is lossless."""
    out = []
    for sec in _SCHEMA:
        out.append(f"[{sec}]")
        for key in _SCHEMA[sec]:
            val = cfg[sec][key]
            if val is None:
                continue
            if isinstance(val, bool):
                val = "true" if val else "false"
            elif isinstance(val, float):
                val = _fmt(val)
            out.append(f"{key} = {val}")
        out.append("")
    return "\n".join(out)


# ---------------------------------------------------------------------------
# Command line


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vfax",
                                 description="Vortex filament with axial flow on the "
                                             "half-line: solver and verification tools")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI config file")
        p.add_argument("--alpha", type=float)
        p.add_argument("--delta", type=float)
        p.add_argument("--grid-n", type=int, dest="grid_n")
        p.add_argument("--length", type=float)
        p.add_argument("--dt", type=float)
        p.add_argument("--t-final", type=float, dest="t_final")
        p.add_argument("--ic")
        p.add_argument("--out")
        p.add_argument("--diagnostics-every", type=int, dest="diagnostics_every")
        p.add_argument("--project-unit-norm", action="store_true", default=None,
                       dest="project_unit_norm")

    p_run = sub.add_parser("run", help="evolve per config, write diagnostics CSV")
    common(p_run)
    p_cc = sub.add_parser("check-compat", help="compatibility report for the datum")
    common(p_cc)
    p_cc.add_argument("--order", type=int, default=1)
    p_cc.add_argument("--tol", type=float, default=1e-6)
    p_cd = sub.add_parser("correct-datum", help="emit the delta-corrected datum")
    common(p_cd)
    p_cd.add_argument("--order", type=int, default=1)
    p_cont = sub.add_parser("continuation", help="delta-sweep Cauchy differences")
    common(p_cont)
    p_cont.add_argument("--deltas", default="1e-2,1e-3,1e-4")
    p_cont.add_argument("--order", type=int, default=1)
    p_conv = sub.add_parser("convergence", help="grid refinement study")
    common(p_conv)
    p_conv.add_argument("--levels", type=int, default=3)
    p_hir = sub.add_parser("hirota-check", help="transform a run and report the residual")
    common(p_hir)
    p_hir.add_argument("--samples", type=int, default=5)
    return ap


def _merge_cli(cfg: dict, args) -> dict:
    over = {("params", "alpha"): args.alpha, ("params", "delta"): args.delta,
            ("grid", "npoints"): args.grid_n, ("grid", "length"): args.length,
            ("run", "dt"): args.dt, ("run", "t_final"): args.t_final,
            ("run", "diagnostics_every"): args.diagnostics_every,
            ("run", "project_unit_norm"): args.project_unit_norm}
    for (sec, key), val in over.items():
        if val is not None:
            cfg[sec][key] = val
    if args.ic is not None:
        name = args.ic
        if name in _FAMILIES or ":" in name:
            cfg["ic"]["family"], cfg["ic"]["file"] = name, None
        else:
            cfg["ic"]["file"] = name
    if getattr(args, "out", None):
        cfg["output"]["diagnostics"] = args.out
    return cfg


def _load_cfg(args) -> dict:
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            cfg = parse_config(fh.read())
    else:
        cfg = parse_config("")
    return _merge_cli(cfg, args)


def _cmd_run(args) -> int:
    cfg = _load_cfg(args)
    run_cfg, output = validate_config(cfg)
    result = _ts.run(run_cfg)
    path = output["diagnostics"] or "diagnostics.csv"
    write_diagnostics_csv(result.records, path)
    if output["snapshot"]:
        write_snapshot(output["snapshot"], result.state, run_cfg.grid, run_cfg.params)
    print(f"run finished at t = {_fmt(result.state.t)} after "
          f"{result.state.step_count} steps; diagnostics -> {path}")
    print(f"final unit-norm drift = {_fmt(result.records[-1].unit_norm_drift)}")
    return 0


def _cmd_check_compat(args) -> int:
    cfg = _load_cfg(args)
    run_cfg, output = validate_config(cfg)
    v0 = load_initial_condition(run_cfg.ic if isinstance(run_cfg.ic, str) else "e3",
                                run_cfg.grid, run_cfg.params)
    rep = _compat.check_compatibility(v0, run_cfg.params, args.order, args.tol,
                                      run_cfg.grid)
    lines = [f"compatibility report (tol = {args.tol:g}):"]
    for o in rep.orders:
        res = ", ".join(f"{k} = {v:.6e}" for k, v in o.residuals.items())
        lines.append(f"  order {o.n}: {'pass' if o.passed else 'FAIL'}  ({res})")
    text = "\n".join(lines)
    if output["diagnostics"]:
        with open(output["diagnostics"], "w", encoding="ascii") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def _cmd_correct_datum(args) -> int:
    cfg = _load_cfg(args)
    run_cfg, output = validate_config(cfg)
    v0 = load_initial_condition(run_cfg.ic if isinstance(run_cfg.ic, str) else "e3",
                                run_cfg.grid, run_cfg.params)
    res = _compat.correct_datum(v0, run_cfg.params.delta, args.order, run_cfg.params,
                                run_cfg.grid)
    print(f"corrected datum: max|h| = {_fmt(float(np.max(np.abs(res.h_field.values))))}, "
          f"coefficient scale = {_fmt(res.coefficient_scale)}")
    for n in sorted(res.residual_after):
        print(f"  order {n}: residual {res.residual_before.get(n, float('nan')):.3e} "
              f"-> {res.residual_after[n]:.3e}")
    path = output["snapshot"] or (args.out or "corrected.snap")
    state = _ts.SimState(t=0.0, v=res.corrected)
    write_snapshot(path, state, run_cfg.grid, run_cfg.params)
    print(f"snapshot -> {path}")
    return 0


def _cmd_continuation(args) -> int:
    cfg = _load_cfg(args)
    run_cfg, output = validate_config(cfg)
    deltas = [float(x) for x in args.deltas.split(",") if x]
    result = _ts.delta_continuation(run_cfg, deltas, args.order)
    print("delta continuation (H1 Cauchy differences at t_final):")
    print("  delta_hi      delta_lo      ||v_hi - v_lo||_H1")
    for i, d in enumerate(result.pairwise_h1_diffs):
        print(f"  {result.deltas[i]:<13g} {result.deltas[i + 1]:<13g} {_fmt(d)}")
    print(f"observed log-log rate: {result.observed_rate:.3f}")
    for idx, msg in result.failures.items():
        print(f"  member {idx} (delta = {result.deltas[idx]:g}) failed: {msg}")
    return 0


def _cmd_convergence(args) -> int:
    cfg = _load_cfg(args)
    run_cfg, _ = validate_config(cfg)
    base_n = run_cfg.grid.npoints
    print("refinement study (joint h, dt refinement):")
    print("  N        dt            final drift")
    drifts, finals, grids = [], [], []
    for lvl in range(args.levels):
        n = (base_n - 1) * 2 ** lvl + 1 if not run_cfg.grid.periodic else base_n * 2 ** lvl
        grid = GridSpec(run_cfg.grid.length, n, run_cfg.grid.periodic)
        cfg_l = _ts.replace_config(run_cfg, grid=grid, dt=None)
        result = _ts.run(cfg_l)
        drifts.append(result.records[-1].unit_norm_drift)
        finals.append(result.state.v)
        grids.append(grid)
        print(f"  {n:<8d} {_fmt(run_cfg.dt or _ts.stable_dt(run_cfg.params, grid)):<13s} "
              f"{_fmt(drifts[-1])}")
    for i in range(len(drifts) - 1):
        if drifts[i + 1] > 0:
            print(f"  drift order {i}->{i + 1}: "
                  f"{math.log2(max(drifts[i], 1e-300) / drifts[i + 1]):.2f}")
    return 0


def _cmd_hirota_check(args) -> int:
    cfg = _load_cfg(args)
    run_cfg, _ = validate_config(cfg)
    n_samp = max(3, args.samples)
    times = tuple(run_cfg.t_final * i / (n_samp - 1) for i in range(n_samp))
    cfg_s = _ts.replace_config(run_cfg, snapshot_times=times)
    result = _ts.run(cfg_s)
    qs = [_has.hasimoto_transform(v, run_cfg.grid, run_cfg.params.stencil_order)
          for _, v in result.snapshots]
    dt_s = result.snapshots[1][0] - result.snapshots[0][0]
    raw = _has.hirota_residual(qs, run_cfg.params.alpha, run_cfg.grid, dt_s,
                               run_cfg.params.stencil_order, gauge="none")
    fit = _has.hirota_residual(qs, run_cfg.params.alpha, run_cfg.grid, dt_s,
                               run_cfg.params.stencil_order, gauge="fit")
    print(f"interior residual of the complex evolution equation "
          f"({len(qs)} samples, dt_sample = {_fmt(dt_s)}):")
    print(f"  raw residual:          {_fmt(raw)}")
    print(f"  gauge-fitted residual: {_fmt(fit)}")
    return 0


_COMMANDS = {"run": _cmd_run, "check-compat": _cmd_check_compat,
             "correct-datum": _cmd_correct_datum, "continuation": _cmd_continuation,
             "convergence": _cmd_convergence, "hirota-check": _cmd_hirota_check}


def cli_main(argv=None) -> int:
    """Entry point; exit 0 on success, 2 on validation errors, 3 on numerical
    failure."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, PreconditionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except VfaxError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(cli_main())
