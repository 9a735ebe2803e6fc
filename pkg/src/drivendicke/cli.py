"""Command-line driver: config files, caching, sweeps, CSV export.

Subcommands
-----------
spectrum       (quasi)energy levels per sweep point -> spectrum.csv
floquet        build and cache the Floquet basis and generator (no CSV)
husimi         Husimi map of the stationary cavity state -> husimi*.csv
nonmark        non-Markovianity table (canonical + random pairs) -> nonmark.csv
               plus the best pair's distance trajectory -> nonmark-dtraj*.csv
deltan         drive-on minus drive-off measure per sweep point -> deltan.csv
semiclassical  mean-field trajectory -> semiclassical.csv

Determinism contract: for a fixed config and seed the data files are byte
identical across runs and across --threads settings.  Every write goes
through a temp-file rename.  Timestamps appear only in the sidecar metadata
file, never in data files.

Exit codes: 0 success, 2 config error, 3 convergence failure, 4 cache
corruption.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import __version__
from . import dynamics as _dynamics
from . import io as _io
from . import measures as _measures
from . import model as _model
from . import semiclassical as _semiclassical
from .dissipator import SpectralModel


class ConfigError(ValueError):
    """Bad config file or bad config values, reported with the key name."""


class ConvergenceError(RuntimeError):
    """A run finished but its convergence diagnostics failed."""


@dataclass(frozen=True)
class RunConfig:
    """Flat run description; one key per line in the config file.

    Fields mirror the model, space, spectral, and numerics parameters plus
    the sweep and output plumbing.  n_steps = 0 means derive it from nu_max.
    sc_kappa = 0 means reuse the cavity decay rate gamma * omega_c / omega0.
    """

    n_emitters: int = 1
    omega_c: float = 1.0
    omega_x: float = 1.0
    omega_d: float = 1.0
    omega0: float = 1.0
    g: float = 0.1
    drive_amplitude: float = 0.0
    photon_cutoff: int = 20
    gamma: float = 0.01
    temperature: float = 0.05
    lamb_shift_enabled: bool = False
    omega_cut: float = 10.0
    pv_points: int = 2000
    nu_max: int = 24
    n_steps: int = 0
    propagator_order: int = 4
    dt_per_period: int = 32
    t_max_factor: float = 50.0
    n_samples: int = 200
    seed: int = 12345
    husimi_re_min: float = -6.0
    husimi_re_max: float = 6.0
    husimi_n_re: int = 61
    husimi_im_min: float = -6.0
    husimi_im_max: float = 6.0
    husimi_n_im: int = 61
    sc_kappa: float = 0.0
    sc_t_end: float = 200.0
    sc_dt: float = 0.01
    sc_store_every: int = 10
    sc_alpha0_re: float = 0.0
    sc_alpha0_im: float = 0.0
    sc_beta0_re: float = 0.0
    sc_beta0_im: float = 0.0
    sc_zeta0: float = -1.0
    sweep_key: str = ""
    sweep_values: tuple = ()
    output_dir: str = "out"
    cache_dir: str = "cache"


_SWEEPABLE = ("g", "drive_amplitude", "gamma", "temperature",
              "omega_c", "omega_x", "omega_d")

# keys excluded from the config hash: pure plumbing, no physics content
_UNHASHED = ("output_dir", "cache_dir")


def _parse_value(key, text, default):
    if isinstance(default, bool):
        low = text.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ConfigError(f"key '{key}': expected a boolean, got {text!r}")
    if isinstance(default, int):
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"key '{key}': expected an integer, got {text!r}") from None
    if isinstance(default, float):
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"key '{key}': expected a number, got {text!r}") from None
    if isinstance(default, tuple):
        if not text.strip():
            return ()
        try:
            return tuple(float(tok) for tok in text.split(","))
        except ValueError:
            raise ConfigError(f"key '{key}': expected comma-separated numbers, got {text!r}") from None
    return text


def parse_config_text(text):
    """Parse `key = value` lines; '#' starts a comment; unknown keys rejected."""
    defaults = {f.name: f.default if f.default is not dataclasses.MISSING
                else () for f in fields(RunConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in defaults:
            raise ConfigError(f"line {lineno}: unknown config key '{key}'")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate config key '{key}'")
        values[key] = _parse_value(key, val, defaults[key])
    cfg = RunConfig(**values)
    validate_config(cfg)
    return cfg


def parse_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def validate_config(cfg):
    """Run every module-level invariant and re-raise as ConfigError."""
    try:
        _model.ModelParams(n_emitters=cfg.n_emitters, omega_c=cfg.omega_c,
                           omega_x=cfg.omega_x, omega_d=cfg.omega_d,
                           omega0=cfg.omega0, g=cfg.g,
                           drive_amplitude=cfg.drive_amplitude)
        _model.SpaceConfig(photon_cutoff=cfg.photon_cutoff,
                           n_emitters=cfg.n_emitters)
        SpectralModel(gamma=cfg.gamma, omega0=cfg.omega0,
                      temperature=cfg.temperature,
                      lamb_shift_enabled=cfg.lamb_shift_enabled,
                      omega_cut=cfg.omega_cut, pv_points=cfg.pv_points)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.nu_max < 0:
        raise ConfigError("key 'nu_max': must be >= 0")
    if cfg.n_steps < 0:
        raise ConfigError("key 'n_steps': must be >= 0 (0 derives from nu_max)")
    if cfg.propagator_order not in (2, 4):
        raise ConfigError("key 'propagator_order': must be 2 or 4")
    if cfg.dt_per_period < 4:
        raise ConfigError("key 'dt_per_period': must be >= 4")
    if cfg.t_max_factor <= 0.0:
        raise ConfigError("key 't_max_factor': must be positive")
    if cfg.n_samples < 0:
        raise ConfigError("key 'n_samples': must be >= 0")
    if cfg.seed < 0:
        raise ConfigError("key 'seed': must be >= 0")
    if cfg.sc_dt <= 0.0 or cfg.sc_t_end <= 0.0:
        raise ConfigError("key 'sc_dt'/'sc_t_end': must be positive")
    if cfg.sc_store_every < 1:
        raise ConfigError("key 'sc_store_every': must be >= 1")
    if cfg.sc_kappa < 0.0:
        raise ConfigError("key 'sc_kappa': must be >= 0 (0 reuses gamma)")
    if cfg.sweep_key:
        if cfg.sweep_key not in _SWEEPABLE:
            raise ConfigError(
                f"key 'sweep_key': '{cfg.sweep_key}' is not sweepable "
                f"(choose from {', '.join(_SWEEPABLE)})")
        if not cfg.sweep_values:
            raise ConfigError("key 'sweep_values': required when sweep_key is set")
    elif cfg.sweep_values:
        raise ConfigError("key 'sweep_key': required when sweep_values is set")


def emit_config(cfg):
    """Canonical config text: every field, declaration order, repr values."""
    lines = []
    for f in fields(RunConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = _io.format_cell(value)
        elif isinstance(value, tuple):
            text = ",".join(_io.format_cell(float(v)) for v in value)
        else:
            text = str(value)
        lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"


def config_hash(cfg):
    """Content hash of the physics + numerics subset (plumbing excluded)."""
    canon = [line for line in emit_config(cfg).splitlines()
             if line.split(" = ")[0] not in _UNHASHED]
    digest = hashlib.sha256("\n".join(canon).encode("utf-8")).hexdigest()
    return digest[:16]


def _point_configs(cfg):
    """Expand the sweep into per-point configs, ascending in the swept value."""
    if not cfg.sweep_key:
        return [cfg]
    values = sorted(cfg.sweep_values)
    return [replace(cfg, **{cfg.sweep_key: v, "sweep_key": "", "sweep_values": ()})
            for v in values]


def _point_label(cfg, point):
    if not cfg.sweep_key:
        return None
    return float(getattr(point, cfg.sweep_key))


# ---------------------------------------------------------------------------
# cached system preparation


def _system_key(point):
    """Cache key: the fields that determine FloquetBasis and DissipatorData."""
    relevant = ("n_emitters", "omega_c", "omega_x", "omega_d", "omega0", "g",
                "drive_amplitude", "photon_cutoff", "gamma", "temperature",
                "lamb_shift_enabled", "omega_cut", "pv_points", "nu_max",
                "n_steps", "propagator_order")
    parts = []
    for name in relevant:
        value = getattr(point, name)
        if isinstance(value, bool):
            parts.append(f"{name}={'true' if value else 'false'}")
        elif isinstance(value, float):
            parts.append(f"{name}={value!r}")
        else:
            parts.append(f"{name}={value}")
    return hashlib.sha256("\n".join(parts).encode("utf-8")).hexdigest()[:16]


def _prepare_point(point, cache_dir, log):
    """Build (or reload) the prepared system for one parameter point."""
    params = _model.ModelParams(n_emitters=point.n_emitters, omega_c=point.omega_c,
                                omega_x=point.omega_x, omega_d=point.omega_d,
                                omega0=point.omega0, g=point.g,
                                drive_amplitude=point.drive_amplitude)
    space = _model.SpaceConfig(photon_cutoff=point.photon_cutoff,
                               n_emitters=point.n_emitters)
    spectral = SpectralModel(gamma=point.gamma, omega0=point.omega0,
                             temperature=point.temperature,
                             lamb_shift_enabled=point.lamb_shift_enabled,
                             omega_cut=point.omega_cut, pv_points=point.pv_points)
    n_steps = point.n_steps if point.n_steps > 0 else None
    key = _system_key(point)
    basis_path = os.path.join(cache_dir, f"basis-{key}.npz")
    diss_path = os.path.join(cache_dir, f"diss-{key}.npz")
    try:
        basis = _io.load_floquet_basis(basis_path)
        diss = _io.load_dissipator(diss_path)
        log(f"cache hit {key}")
        return _dynamics.PreparedSystem(params=params, space=space,
                                        spectral=spectral, basis=basis,
                                        dissipator=diss), key, True
    except FileNotFoundError:
        log(f"cache miss {key}")
    except _io.CacheVersionMismatch as exc:
        log(f"cache version mismatch for {key} ({exc}); recomputing")
    system = _dynamics.prepare_system(params, space, spectral,
                                      nu_max=point.nu_max, n_steps=n_steps,
                                      order=point.propagator_order)
    _io.save_floquet_basis(basis_path, system.basis)
    _io.save_dissipator(diss_path, system.dissipator)
    return system, key, False


# ---------------------------------------------------------------------------
# subcommand payloads (pure compute, no file writes; run in worker threads)


def _run_spectrum_point(point, cache_dir, log):
    system, key, hit = _prepare_point(point, cache_dir, log)
    energies = np.sort(system.basis.quasienergies)
    rows = [(float(point.g), i, float(e)) for i, e in enumerate(energies)]
    return {"rows": rows, "key": key, "hit": hit}


def _run_floquet_point(point, cache_dir, log):
    system, key, hit = _prepare_point(point, cache_dir, log)
    return {"key": key, "hit": hit,
            "completeness_min": float(system.basis.completeness.min()),
            "degenerate": bool(system.basis.degenerate)}


def _run_husimi_point(point, cache_dir, log):
    system, key, hit = _prepare_point(point, cache_dir, log)
    p_ss = _dynamics.steady_state(system.w)
    rho_c = _dynamics.stationary_cavity_state(system.basis, p_ss, system.space)
    grid = _measures.AlphaGrid(re_min=point.husimi_re_min, re_max=point.husimi_re_max,
                               n_re=point.husimi_n_re, im_min=point.husimi_im_min,
                               im_max=point.husimi_im_max, n_im=point.husimi_n_im)
    f = _measures.husimi(rho_c, grid)
    rows = []
    for i_im, im in enumerate(f.im_axis):
        for i_re, re in enumerate(f.re_axis):
            rows.append((float(re), float(im), float(f.q[i_im, i_re]),
                         bool(f.trunc_ok[i_im, i_re])))
    return {"rows": rows, "key": key, "hit": hit}


def _run_nonmark_point(point, cache_dir, log):
    system, key, hit = _prepare_point(point, cache_dir, log)
    res = _measures.maximize_nonmarkovianity(system, n_samples=point.n_samples,
                                             seed=point.seed)
    rows = []
    for kind, seed, value, converged in res.table:
        rows.append((float(point.g), float(point.drive_amplitude), float(value),
                     kind, -1 if seed is None else int(seed), bool(converged)))
    dtraj = [(float(t), float(d))
             for t, d in zip(res.best.times, res.best.distances)]
    return {"rows": rows, "dtraj": dtraj, "key": key, "hit": hit,
            "best_converged": bool(res.best.converged)}


def _run_deltan_point(point, cache_dir, log):
    system, key, hit = _prepare_point(point, cache_dir, log)
    res = _measures.delta_n(system, n_samples=point.n_samples, seed=point.seed)
    return {"rows": [(float(point.g), float(res.value))], "key": key, "hit": hit,
            "converged": bool(res.converged), "noise": float(res.noise)}


def _run_semiclassical_point(point, cache_dir, log):
    kappa = point.sc_kappa
    if kappa == 0.0:
        kappa = point.gamma * point.omega_c / point.omega0
    params = _semiclassical.SemiclassicalParams(
        n_emitters=point.n_emitters, g=point.g,
        drive_amplitude=point.drive_amplitude, kappa=kappa,
        delta_c=point.omega_c - point.omega_d,
        delta_x=point.omega_x - point.omega_d)
    n = point.n_emitters
    state0 = _semiclassical.SemiclassicalState(
        alpha=complex(point.sc_alpha0_re, point.sc_alpha0_im),
        beta=np.full(n, complex(point.sc_beta0_re, point.sc_beta0_im)),
        zeta=np.full(n, float(point.sc_zeta0)))
    traj = _semiclassical.integrate(state0, params, t_end=point.sc_t_end,
                                    dt=point.sc_dt,
                                    store_every=point.sc_store_every)
    rows = []
    for i, t in enumerate(traj.times):
        row = [float(t), float(traj.alpha[i].real), float(traj.alpha[i].imag)]
        for j in range(n):
            row.append(float(traj.beta[i, j].real))
            row.append(float(traj.beta[i, j].imag))
        for j in range(n):
            row.append(float(traj.zeta[i, j]))
        row.append(float(traj.total_c[i]))
        rows.append(tuple(row))
    return {"rows": rows, "n_emitters": n,
            "max_drift": float(max(traj.max_length_drift, traj.max_c_drift))}


_SPECTRUM_HEADER = ["g", "level_index", "energy"]
_HUSIMI_HEADER = ["re_alpha", "im_alpha", "Q", "trunc_ok"]
_NONMARK_HEADER = ["g", "omega", "N_value", "pair_kind", "seed", "converged"]
_DELTAN_HEADER = ["g", "delta_N"]
_DTRAJ_HEADER = ["t", "D"]


def _semiclassical_header(n):
    cols = ["t", "re_alpha", "im_alpha"]
    for j in range(1, n + 1):
        cols += [f"beta_re_{j}", f"beta_im_{j}"]
    cols += [f"zeta_{j}" for j in range(1, n + 1)]
    cols.append("C")
    return cols


# ---------------------------------------------------------------------------
# orchestration


def _run_points(points, worker, cache_dir, threads, log):
    """Run one worker per point, preserving point order in the results."""
    if threads <= 1 or len(points) <= 1:
        return [worker(p, cache_dir, log) for p in points]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(worker, p, cache_dir, log) for p in points]
        return [f.result() for f in futures]


def _write_sidecar(out_dir, name, cfg, artifacts, extra=None):
    meta = {
        "subcommand": name,
        "config_hash": config_hash(cfg),
        "code_version": __version__,
        "artifacts": sorted(artifacts),
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    if extra:
        meta.update(extra)
    _io.write_json(os.path.join(out_dir, f"{name}.meta.json"), meta)


def _suffix(index, n_points):
    return "" if n_points == 1 else f"-{index:03d}"


def run_subcommand(name, cfg, threads=1, log=None):
    """Execute one subcommand; returns the list of written artifact names."""
    if log is None:
        log = lambda msg: print(msg, file=sys.stderr)
    os.makedirs(cfg.output_dir, exist_ok=True)
    os.makedirs(cfg.cache_dir, exist_ok=True)
    points = _point_configs(cfg)
    artifacts = []
    extra = {}

    if name == "spectrum":
        results = _run_points(points, _run_spectrum_point, cfg.cache_dir, threads, log)
        rows = [row for res in results for row in res["rows"]]
        path = os.path.join(cfg.output_dir, "spectrum.csv")
        _io.write_csv(path, _SPECTRUM_HEADER, rows)
        artifacts.append("spectrum.csv")
    elif name == "floquet":
        results = _run_points(points, _run_floquet_point, cfg.cache_dir, threads, log)
        extra["points"] = [
            {"key": r["key"], "completeness_min": r["completeness_min"],
             "degenerate": r["degenerate"]} for r in results]
    elif name == "husimi":
        results = _run_points(points, _run_husimi_point, cfg.cache_dir, threads, log)
        for i, res in enumerate(results):
            fname = f"husimi{_suffix(i, len(points))}.csv"
            _io.write_csv(os.path.join(cfg.output_dir, fname),
                          _HUSIMI_HEADER, res["rows"])
            artifacts.append(fname)
    elif name == "nonmark":
        results = _run_points(points, _run_nonmark_point, cfg.cache_dir, threads, log)
        rows = [row for res in results for row in res["rows"]]
        _io.write_csv(os.path.join(cfg.output_dir, "nonmark.csv"),
                      _NONMARK_HEADER, rows)
        artifacts.append("nonmark.csv")
        for i, res in enumerate(results):
            fname = f"nonmark-dtraj{_suffix(i, len(points))}.csv"
            _io.write_csv(os.path.join(cfg.output_dir, fname),
                          _DTRAJ_HEADER, res["dtraj"])
            artifacts.append(fname)
        bad = [i for i, r in enumerate(results) if not r["best_converged"]]
        if bad:
            raise ConvergenceError(
                f"best pair not converged at sweep point(s) {bad}; "
                "try a larger t_max_factor or finer dt_per_period")
    elif name == "deltan":
        results = _run_points(points, _run_deltan_point, cfg.cache_dir, threads, log)
        rows = [row for res in results for row in res["rows"]]
        _io.write_csv(os.path.join(cfg.output_dir, "deltan.csv"),
                      _DELTAN_HEADER, rows)
        artifacts.append("deltan.csv")
        extra["noise"] = [r["noise"] for r in results]
        bad = [i for i, r in enumerate(results) if not r["converged"]]
        if bad:
            raise ConvergenceError(
                f"delta_N not converged at sweep point(s) {bad}; "
                "try a larger t_max_factor or finer dt_per_period")
    elif name == "semiclassical":
        if cfg.sweep_key:
            raise ConfigError("semiclassical does not support sweeps")
        res = _run_semiclassical_point(points[0], cfg.cache_dir, log)
        _io.write_csv(os.path.join(cfg.output_dir, "semiclassical.csv"),
                      _semiclassical_header(res["n_emitters"]), res["rows"])
        artifacts.append("semiclassical.csv")
        extra["max_drift"] = res["max_drift"]
    else:
        raise ConfigError(f"unknown subcommand '{name}'")

    _write_sidecar(cfg.output_dir, name, cfg, artifacts, extra)
    return artifacts


SUBCOMMANDS = ("spectrum", "floquet", "husimi", "nonmark", "deltan",
               "semiclassical")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="drivendicke",
        description="Driven emitter-cavity simulations beyond the "
                    "rotating-wave approximation.")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="path to a key = value config file")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    parser.add_argument("--cache", default=None, help="cache directory (overrides config)")
    parser.add_argument("--seed", default=None, type=int, help="seed override")
    parser.add_argument("--threads", default=1, type=int,
                        help="worker threads across sweep points")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = parse_config(args.config)
        if args.out is not None:
            cfg = replace(cfg, output_dir=args.out)
        if args.cache is not None:
            cfg = replace(cfg, cache_dir=args.cache)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be >= 0")
            cfg = replace(cfg, seed=args.seed)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        artifacts = run_subcommand(args.subcommand, cfg, threads=args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _io.CacheCorruption as exc:
        print(f"cache corruption: {exc}", file=sys.stderr)
        return 4
    except (ConvergenceError, _dynamics.ConvergenceFailure) as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return 3
    except RuntimeError as exc:
        # semiclassical drift guard and similar runtime diagnostics
        print(f"convergence failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        # completeness guard and other numerics preconditions
        print(f"convergence failure: {exc}", file=sys.stderr)
        return 3
    for name in artifacts:
        print(os.path.join(cfg.output_dir, name))
    return 0


if __name__ == "__main__":
    sys.exit(main())
