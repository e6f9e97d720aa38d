"""Experiment driver: flat key=value configs, run directories, resume.

A run directory holds manifest.json (the validated config, master seed,
tool version, timestamps), per-realization npz caches (their presence is
the completion marker for resume), and the merged CSV outputs.  Two runs
from equal manifests produce byte-identical CSVs; timestamps live only in
the manifest.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import hashlib
import json
import math
import os
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import fit_powerlaw_tail, fit_stretched_exponent, scaling_collapse
from .ensemble import (
    ModelKind,
    build_fm,
    build_wm,
    derive_realization_seed,
)
from .errors import ConfigError
from .observables import EnsembleSeries, build_series, series_from_csv, series_to_csv
from .propagate import PropagationTolerances, WavepacketState, fm_reduced_solve, propagate
from .spectra import core_tail_bin_edges, diagonalize_ldos_weights, eigenpairs, evolve_by_diagonalization
from .spectral import CutoffKind, SpectralParams, core_border_gamma0, wigner_time
from .theory import (
    decay_law,
    fm_exact_spread,
    lrt_spread,
    survival_fm_powerlaw,
    survival_wm_stretched,
)

__all__ = ["parse_config_text", "validate_config", "run_experiment", "manifest_config"]

_COMMANDS = ("propagate", "ldos", "theory", "fit", "collapse")

_DEFAULTS = {
    "rho": "1",
    "cutoff": "sharp",
    "method": "eigen",
    "realizations": "1",
    "tpoints": "60",
    "tgrid": "linear",
    "master_seed": "0",
    "average_mode": "profile",
    "workers": str(os.cpu_count() or 1),
    "core_bins": "40",
    "tail_bins_per_decade": "12",
    "steps_per_scale": "20",
}


def parse_config_text(text: str) -> dict:
    """Flat `key = value` lines; '#' starts a comment."""
    out = {}
    problems = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected 'key = value', got {raw!r}")
            continue
        key, val = (part.strip() for part in line.split("=", 1))
        if key in out:
            problems.append(f"line {lineno}: duplicate key {key!r}")
        out[key] = val
    if problems:
        raise ConfigError(problems)
    return out


def _parse_time_spec(text: str, scales: dict) -> float:
    """Absolute time, or multiples of t0/tc via suffix (e.g. '5t0', '80tc')."""
    t = text.strip().lower()
    for suffix in ("t0", "tc"):
        if t.endswith(suffix):
            factor = float(t[: -len(suffix)] or "1")
            base = scales[suffix]
            if base is None:
                raise ValueError(f"scale {suffix} undefined for these parameters")
            return factor * base
    return float(t)


def validate_config(config: dict) -> dict:
    """Normalize and cross-check; all problems are reported in one error."""
    cfg = dict(_DEFAULTS)
    cfg.update({k: str(v).strip() for k, v in config.items()})
    problems = []

    def need(key):
        if key not in cfg:
            problems.append(f"missing required key {key!r}")
            return False
        return True

    def as_float(key, positive=True):
        try:
            val = float(cfg[key])
        except (KeyError, ValueError):
            problems.append(f"{key!r} must be a number, got {cfg.get(key)!r}")
            return None
        if positive and not val > 0:
            problems.append(f"{key!r} must be > 0, got {val}")
            return None
        return val

    def as_int(key, minimum=1):
        try:
            val = int(cfg[key])
        except (KeyError, ValueError):
            problems.append(f"{key!r} must be an integer, got {cfg.get(key)!r}")
            return None
        if val < minimum:
            problems.append(f"{key!r} must be >= {minimum}, got {val}")
            return None
        return val

    if not need("command") or cfg["command"] not in _COMMANDS:
        problems.append(
            f"command must be one of {_COMMANDS}, got {cfg.get('command')!r}"
        )
        raise ConfigError(problems)
    command = cfg["command"]
    norm = {"command": command, "workers": as_int("workers") or 1}

    if command in ("propagate", "ldos", "theory"):
        if need("model"):
            try:
                norm["model"] = ModelKind.parse(cfg["model"]).value
            except Exception:
                problems.append(f"model must be fm or wm, got {cfg['model']!r}")
        s = as_float("s")
        eps = as_float("eps")
        rho = as_float("rho")
        try:
            cutoff = CutoffKind.parse(cfg["cutoff"])
        except Exception:
            problems.append(f"bad cutoff {cfg['cutoff']!r}")
            cutoff = CutoffKind.SHARP
        if "omega_c" in cfg:
            omega_c = as_float("omega_c")
        elif "b" in cfg and rho:
            b = as_int("b")
            omega_c = (b / rho) if b else None
        else:
            problems.append("either omega_c or b is required")
            omega_c = None
        params = None
        if None not in (s, eps, rho, omega_c):
            try:
                params = SpectralParams(
                    s=s, epsilon=eps, omega_c=omega_c, rho=rho, cutoff=cutoff
                )
            except Exception as exc:
                problems.append(str(exc))
        if params is not None:
            norm.update(
                s=params.s,
                eps=params.epsilon,
                omega_c=params.omega_c,
                rho=params.rho,
                cutoff=params.cutoff.value,
            )
            scales = {"tc": params.t_correlation, "t0": None}
            if 0.0 < params.s < 2.0:
                scales["t0"] = wigner_time(params).t0
            if command in ("propagate", "theory") and need("tmax"):
                try:
                    norm["tmax"] = _parse_time_spec(cfg["tmax"], scales)
                except ValueError as exc:
                    problems.append(f"tmax: {exc}")
            if command in ("propagate", "ldos"):
                half = as_int("half_size") if "half_size" in cfg else params.bandwidth + max(
                    40, params.bandwidth // 2
                )
                if half is not None and half < params.bandwidth:
                    problems.append(
                        f"half_size {half} below bandwidth {params.bandwidth}"
                    )
                norm["half_size"] = half
        norm["realizations"] = as_int("realizations") or 1
        norm["tpoints"] = as_int("tpoints", minimum=2) or 2
        if cfg["tgrid"] not in ("linear", "log"):
            problems.append(f"tgrid must be linear or log, got {cfg['tgrid']!r}")
        norm["tgrid"] = cfg["tgrid"]
        norm["master_seed"] = as_int("master_seed", minimum=0)
        if cfg["method"] not in ("eigen", "rk4"):
            problems.append(f"method must be eigen or rk4, got {cfg['method']!r}")
        norm["method"] = cfg["method"]
        if cfg["average_mode"] not in ("profile", "per_realization"):
            problems.append(f"bad average_mode {cfg['average_mode']!r}")
        norm["average_mode"] = cfg["average_mode"]
        norm["core_bins"] = as_int("core_bins", minimum=4)
        norm["tail_bins_per_decade"] = as_int("tail_bins_per_decade", minimum=2)
        norm["steps_per_scale"] = as_int("steps_per_scale", minimum=20)
    elif command == "fit":
        if need("series"):
            norm["series"] = cfg["series"]
        for key in ("window_lo", "window_hi"):
            if need(key):
                val = as_float(key)
                if val is not None:
                    norm[key] = val
        norm["departure_fraction"] = float(cfg.get("departure_fraction", "0.5"))
    elif command == "collapse":
        if need("series"):
            paths = cfg["series"].split(";")
            if len(paths) < 3:
                problems.append("collapse needs >= 3 series paths (';'-separated)")
            norm["series"] = cfg["series"]
        norm["window_lo"] = float(cfg.get("window_lo", "0.2"))
        norm["window_hi"] = float(cfg.get("window_hi", "3.0"))
    if problems:
        raise ConfigError(problems)
    return norm


def manifest_config(run_dir: Path) -> dict:
    """The validated config stored in a run's manifest (round-trip identity)."""
    manifest = json.loads((Path(run_dir) / "manifest.json").read_text())
    return manifest["config"]


def _params_from_norm(norm: dict) -> SpectralParams:
    return SpectralParams(
        s=norm["s"],
        epsilon=norm["eps"],
        omega_c=norm["omega_c"],
        rho=norm["rho"],
        cutoff=CutoffKind(norm["cutoff"]),
    )


def _time_grid(norm: dict, params: SpectralParams) -> np.ndarray:
    n = norm["tpoints"]
    tmax = norm["tmax"]
    if norm["tgrid"] == "linear":
        return np.linspace(0.0, tmax, n)
    start = min(params.t_correlation / 4.0, tmax / 1e3)
    return np.concatenate([[0.0], np.geomspace(start, tmax, n - 1)])


def _atomic_write(path: Path, data: bytes):
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)


# --- realization-level tasks (top level: picklable for the process pool) -----


def _propagate_task(args):
    run_dir, norm, index = args
    out = Path(run_dir) / "realizations" / f"r{index:05d}.npz"
    if out.exists():
        return index
    params = _params_from_norm(norm)
    seed = derive_realization_seed(norm["master_seed"], index)
    kind = ModelKind(norm["model"])
    build = build_fm if kind is ModelKind.FRIEDRICHS else build_wm
    r = build(params, norm["half_size"], seed=seed)
    t_grid = _time_grid(norm, params)
    if norm["method"] == "eigen":
        snaps = evolve_by_diagonalization(r, t_grid, want_profile=True)
    else:
        snaps = propagate(
            r,
            t_grid,
            PropagationTolerances(steps_per_scale=norm["steps_per_scale"]),
        )
    n_lo = min(s.n_lo for s in snaps)
    n_hi = max(s.n_hi for s in snaps)
    prof = np.zeros((len(snaps), n_hi - n_lo + 1), dtype=np.float32)
    surv = np.empty(len(snaps))
    for k, snap in enumerate(snaps):
        prof[k, snap.n_lo - n_lo : snap.n_lo - n_lo + len(snap.amplitudes)] = (
            snap.probabilities()
        )
        surv[k] = snap.survival
    buf = _npz_bytes(
        t=t_grid, n_lo=np.int64(n_lo), prof=prof, surv=surv,
        leak=np.float64(max(s.norm_leak for s in snaps)),
    )
    _atomic_write(out, buf)
    return index


def _ldos_task(args):
    run_dir, norm, index = args
    out = Path(run_dir) / "realizations" / f"r{index:05d}.npz"
    if out.exists():
        return index
    params = _params_from_norm(norm)
    seed = derive_realization_seed(norm["master_seed"], index)
    kind = ModelKind(norm["model"])
    build = build_fm if kind is ModelKind.FRIEDRICHS else build_wm
    r = build(params, norm["half_size"], seed=seed)
    pairs = eigenpairs(r)
    buf = _npz_bytes(energies=pairs.energies, weights=pairs.weights)
    _atomic_write(out, buf)
    return index


def _npz_bytes(**arrays) -> bytes:
    import io

    buf = io.BytesIO()
    np.savez_compressed(buf, **arrays)
    return buf.getvalue()


def _run_tasks(task, run_dir, norm):
    jobs = [(str(run_dir), norm, i) for i in range(norm["realizations"])]
    (Path(run_dir) / "realizations").mkdir(exist_ok=True)
    workers = min(norm["workers"], len(jobs))
    if workers <= 1:
        for job in jobs:
            task(job)
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            list(pool.map(task, jobs))


def _load_realization_tracks(run_dir, norm):
    tracks = []
    for i in range(norm["realizations"]):
        with np.load(Path(run_dir) / "realizations" / f"r{i:05d}.npz") as data:
            t_grid = data["t"]
            n_lo = int(data["n_lo"])
            prof = data["prof"].astype(np.float64)
            surv = data["surv"]
            leak = float(data["leak"])
        track = []
        center = -n_lo
        for k, t in enumerate(t_grid):
            amps = np.sqrt(prof[k]).astype(complex)
            amps[center] = math.sqrt(surv[k])  # survival kept at full precision
            track.append(
                WavepacketState(
                    t=float(t), n_lo=n_lo, n_hi=n_lo + prof.shape[1] - 1,
                    amplitudes=amps, norm_leak=leak,
                )
            )
        tracks.append(track)
    return tracks


def run_experiment(config: dict, out_dir) -> Path:
    """Validate, execute, and persist one experiment; returns the run dir.

    Existing per-realization caches are reused (resume); the merged CSVs
    are rebuilt deterministically from the caches on every call.
    """
    norm = validate_config(config)
    run_dir = Path(out_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config": norm,
        "tool_version": __version__,
        "created_unix": time.time(),
    }
    (run_dir / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
    command = norm["command"]
    if command == "propagate":
        _run_tasks(_propagate_task, run_dir, norm)
        params = _params_from_norm(norm)
        tracks = _load_realization_tracks(run_dir, norm)
        series = build_series(
            tracks,
            ModelKind(norm["model"]),
            params,
            average_mode=norm["average_mode"],
            master_seed=norm["master_seed"],
        )
        _atomic_write(
            run_dir / "series.csv", series_to_csv(series, __version__).encode()
        )
    elif command == "ldos":
        _run_tasks(_ldos_task, run_dir, norm)
        params = _params_from_norm(norm)
        pair_list = []
        for i in range(norm["realizations"]):
            with np.load(run_dir / "realizations" / f"r{i:05d}.npz") as data:
                pair_list.append((data["energies"].copy(), data["weights"].copy()))
        try:
            gamma0 = core_border_gamma0(params)
        except Exception:
            gamma0 = float("nan")
        omega_max = 0.98 * params.omega_c
        log_edges = core_tail_bin_edges(
            gamma0 if math.isfinite(gamma0) else params.omega_c / 20.0,
            omega_max,
            core_bins=norm["core_bins"],
            tail_bins_per_decade=norm["tail_bins_per_decade"],
        )
        lin_edges = np.linspace(-omega_max, omega_max, 2 * norm["core_bins"] * 4 + 1)
        for name, edges in (("ldos_log", log_edges), ("ldos_linear", lin_edges)):
            hist = diagonalize_ldos_weights(pair_list, edges, params, ModelKind(norm["model"]), gamma0)
            _atomic_write(run_dir / f"{name}.csv", _hist_csv(hist).encode())
    elif command == "theory":
        params = _params_from_norm(norm)
        _atomic_write(run_dir / "theory.csv", _theory_csv(norm, params).encode())
    elif command == "fit":
        _fit_command(run_dir, norm)
    elif command == "collapse":
        _collapse_command(run_dir, norm)
    return run_dir


def _hist_csv(hist) -> str:
    p = hist.params
    lines = [
        f"# model={hist.kind.value}",
        f"# s={p.s!r} epsilon={p.epsilon!r} omega_c={p.omega_c!r} rho={p.rho!r}"
        f" cutoff={p.cutoff.value}",
        f"# n_realizations={hist.n_realizations}",
        f"# gamma0={hist.gamma0!r}",
        f"# tool_version={__version__}",
        "bin_center,bin_width,weight_density,stderr",
    ]
    widths = hist.widths
    for k in range(len(hist.weights)):
        lines.append(
            ",".join(
                f"{v:.17g}"
                for v in (
                    hist.centers[k],
                    widths[k],
                    hist.weights[k] / widths[k],
                    hist.stderr[k] / widths[k],
                )
            )
        )
    return "\n".join(lines) + "\n"


def _theory_csv(norm: dict, params: SpectralParams) -> str:
    kind = ModelKind(norm["model"])
    t_grid = _time_grid(norm, params)
    law = decay_law(params, kind)
    cols = ["t"]
    data = [t_grid]
    if kind is ModelKind.WIGNER:
        if 0.0 < params.s < 2.0:
            cols.append("P_stretched")
            data.append(survival_wm_stretched(params, t_grid))
        cols.append("dE_lrt")
        data.append(np.asarray(lrt_spread(params, t_grid)))
    else:
        red = fm_reduced_solve(params, t_grid)
        cols += ["P_kernel"]
        data += [red.survival]
        if 0.0 < params.s < 2.0:
            # divergent below its validity window: emit NaN there
            pl = np.full_like(t_grid, np.nan)
            inside = t_grid >= law.window[0]
            pl[inside] = np.asarray(survival_fm_powerlaw(params, t_grid[inside]))
            cols.append("P_powerlaw")
            data.append(pl)
        cols += ["dE_exact", "dE_lrt"]
        data += [
            fm_exact_spread(red.c, red.cdot, red.cddot, params),
            np.asarray(lrt_spread(params, t_grid)),
        ]
    head = [
        f"# model={kind.value}",
        f"# s={params.s!r} epsilon={params.epsilon!r} omega_c={params.omega_c!r}"
        f" rho={params.rho!r} cutoff={params.cutoff.value}",
        f"# regime={law.regime.value} t0={law.t0!r} t0_prime={law.t0_prime!r}"
        f" window_lo={law.window[0]!r} window_hi={law.window[1]!r}",
        f"# tool_version={__version__}",
        ",".join(cols),
    ]
    rows = [
        ",".join(f"{col[k]:.17g}" for col in data) for k in range(len(t_grid))
    ]
    return "\n".join(head + rows) + "\n"


def _fit_command(run_dir: Path, norm: dict):
    src = Path(norm["series"])
    text = src.read_text()
    series = series_from_csv(text)
    digest = hashlib.sha256(text.encode()).hexdigest()
    window = (norm["window_lo"], norm["window_hi"])
    report = {
        "source": str(src),
        "sha256": digest,
        "window": list(window),
        "departure_fraction": norm["departure_fraction"],
    }
    try:
        fit = fit_stretched_exponent(series.t_grid, series.survival, window)
        report["stretched"] = {
            "beta": fit.beta, "beta_err": fit.beta_err, "t0": fit.t0, "slope": fit.slope,
        }
    except Exception as exc:
        report["stretched"] = {"error": f"{type(exc).__name__}: {exc}"}
    try:
        fit = fit_powerlaw_tail(series.t_grid, series.survival, window)
        report["powerlaw"] = {
            "exponent": fit.exponent,
            "exponent_err": fit.exponent_err,
            "amplitude": fit.amplitude,
        }
    except Exception as exc:
        report["powerlaw"] = {"error": f"{type(exc).__name__}: {exc}"}
    try:
        from .analysis import extract_departure_and_saturation

        t_dep, sat = extract_departure_and_saturation(
            series.t_grid, series.core_width, fraction=norm["departure_fraction"]
        )
        report["core"] = {"t_dep": t_dep, "saturation": sat}
    except Exception as exc:
        report["core"] = {"error": f"{type(exc).__name__}: {exc}"}
    _atomic_write(run_dir / "fit.json", json.dumps(report, indent=1, sort_keys=True).encode())
    lines = [f"fit report for {src} (sha256 {digest[:16]}...)", f"window: {window}"]
    for section in ("stretched", "powerlaw", "core"):
        lines.append(f"[{section}] " + json.dumps(report[section], sort_keys=True))
    _atomic_write(run_dir / "fit.txt", ("\n".join(lines) + "\n").encode())


def _collapse_command(run_dir: Path, norm: dict):
    paths = [Path(p) for p in norm["series"].split(";")]
    tracks = []
    for p in paths:
        series = series_from_csv(p.read_text())
        t0 = wigner_time(series.params).t0
        tracks.append((series.t_grid, series.survival, t0))
    residual = scaling_collapse(tracks, (norm["window_lo"], norm["window_hi"]))
    report = {
        "series": [str(p) for p in paths],
        "t0": [t[2] for t in tracks],
        "window": [norm["window_lo"], norm["window_hi"]],
        "residual": residual,
    }
    _atomic_write(
        run_dir / "collapse.json", json.dumps(report, indent=1, sort_keys=True).encode()
    )
