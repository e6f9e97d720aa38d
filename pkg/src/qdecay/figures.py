"""Deterministic vector-graphics emission for the standard figure set.

Figure ids: ldos_loglog, ldos_linlog, survival, inset_Y, core_scaling,
spread.  Inputs are the CSVs of one run directory plus, for the
multi-run figures, any extra series files.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .analysis import extract_departure_and_saturation
from .ensemble import ModelKind
from .errors import InvalidParamsError
from .observables import series_from_csv
from .spectral import SpectralParams, correlation_function, wigner_time
from .theory import fm_exact_spread, fm_ldos_analytic, lrt_spread, survival_wm_stretched

__all__ = ["FIGURE_IDS", "emit_figure"]

FIGURE_IDS = (
    "ldos_loglog",
    "ldos_linlog",
    "survival",
    "inset_Y",
    "core_scaling",
    "spread",
)

plt.rcParams["svg.hashsalt"] = "qdecay"


def _require(run_dir: Path, names):
    missing = [n for n in names if not (run_dir / n).exists()]
    if missing:
        raise InvalidParamsError(
            f"figure inputs missing from {run_dir}: {', '.join(missing)}"
        )


def _read_hist_csv(path: Path):
    meta, rows = {}, []
    for line in path.read_text().splitlines():
        if line.startswith("#"):
            for token in line[1:].strip().split():
                if "=" in token:
                    k, v = token.split("=", 1)
                    meta[k] = v
        elif line and not line.startswith("bin_center"):
            rows.append([float(x) for x in line.split(",")])
    return meta, np.array(rows)


def _save(fig, out_path: Path):
    out_path = Path(out_path)
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out_path


def _params_from_meta(meta) -> SpectralParams:
    from .spectral import CutoffKind

    return SpectralParams(
        s=float(meta["s"]),
        epsilon=float(meta["epsilon"]),
        omega_c=float(meta["omega_c"]),
        rho=float(meta["rho"]),
        cutoff=CutoffKind(meta["cutoff"]),
    )


def _ldos_figure(run_dir: Path, out_path: Path, loglog: bool):
    name = "ldos_log.csv" if loglog else "ldos_linear.csv"
    _require(run_dir, [name])
    meta, rows = _read_hist_csv(run_dir / name)
    gamma0 = float(meta["gamma0"])
    params = _params_from_meta(meta)
    centers, dens = rows[:, 0], rows[:, 2]
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    if loglog:
        pos = (centers > 0) & (dens > 0)
        ax.loglog(centers[pos] / gamma0, dens[pos] * gamma0, "k.", ms=4, label="ensemble")
        if meta["model"] == ModelKind.FRIEDRICHS.value and 0 < params.s < 2:
            w = np.geomspace(centers[pos].min(), centers[pos].max(), 200)
            ax.loglog(
                w / gamma0,
                fm_ldos_analytic(params, w, shift="finite_cutoff") * gamma0,
                "r-", lw=1, label="resolvent",
            )
        else:
            w = np.geomspace(2 * gamma0, 0.9 * params.omega_c, 60)
            tail = params.epsilon**2 * w ** (params.s - 3.0)
            ax.loglog(w / gamma0, tail * gamma0, "r--", lw=1, label="first-order tail")
    else:
        keep = dens > 0
        ax.semilogy(centers[keep] / gamma0, dens[keep] * gamma0, "k.", ms=4)
    ax.set_xlabel(r"$\omega/\gamma_0$")
    ax.set_ylabel(r"$\gamma_0\,\rho(\omega)$")
    if loglog:
        ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    return _save(fig, out_path)


def _survival_figure(run_dir: Path, out_path: Path, extra_inputs):
    paths = [run_dir / "series.csv"] + [Path(p) for p in (extra_inputs or [])]
    _require(run_dir, ["series.csv"])
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for p in paths:
        series = series_from_csv(p.read_text())
        sp = series.params
        t0 = wigner_time(sp).t0 if 0 < sp.s < 2 else 1.0
        keep = (series.t_grid > 0) & (series.survival > 0)
        ax.loglog(
            series.t_grid[keep] / t0,
            series.survival[keep],
            ".",
            ms=4,
            label=f"s={sp.s:g}, eps={sp.epsilon:g}",
        )
        if series.kind is ModelKind.WIGNER and 0 < sp.s < 2:
            tt = np.geomspace(series.t_grid[keep].min(), series.t_grid[keep].max(), 120)
            ax.loglog(tt / t0, survival_wm_stretched(sp, tt), "-", lw=0.8, color="gray")
    ax.set_xlabel(r"$t/t_0$")
    ax.set_ylabel(r"$P(t)$")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    return _save(fig, out_path)


def _inset_y_figure(run_dir: Path, out_path: Path, extra_inputs):
    paths = [Path(p) for p in (extra_inputs or [])]
    if (run_dir / "series.csv").exists():
        paths.insert(0, run_dir / "series.csv")
    if not paths:
        raise InvalidParamsError("inset_Y needs at least one series.csv")
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for p in paths:
        series = series_from_csv(p.read_text())
        keep = (series.t_grid > 0) & (series.survival > 0) & (series.survival < 1)
        t = series.t_grid[keep]
        y = -np.log(series.survival[keep]) / t
        ax.loglog(t, y, ".", ms=4, label=f"s={series.params.s:g}")
    ax.set_xlabel(r"$t$")
    ax.set_ylabel(r"$-\ln P(t)\,/\,t$")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    return _save(fig, out_path)


def _core_scaling_figure(run_dir: Path, out_path: Path, extra_inputs):
    paths = [Path(p) for p in (extra_inputs or [])]
    if (run_dir / "series.csv").exists():
        paths.insert(0, run_dir / "series.csv")
    if len(paths) < 2:
        raise InvalidParamsError("core_scaling needs several series.csv inputs")
    fig, ax = plt.subplots(figsize=(4.6, 4.0))
    for p in paths:
        series = series_from_csv(p.read_text())
        t_dep, sat = extract_departure_and_saturation(series.t_grid, series.core_width)
        ax.loglog(1.0 / sat, t_dep, "o", ms=5, label=f"eps={series.params.epsilon:g}")
    ax.set_xlabel(r"$1/\mathrm{saturation}$")
    ax.set_ylabel(r"$t_{\mathrm{dep}}$")
    ax.legend(frameon=False, fontsize=7)
    fig.tight_layout()
    return _save(fig, out_path)


def _spread_figure(run_dir: Path, out_path: Path, extra_inputs):
    paths = [run_dir / "series.csv"] + [Path(p) for p in (extra_inputs or [])]
    _require(run_dir, ["series.csv"])
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ref_params = None
    for p in paths:
        series = series_from_csv(p.read_text())
        sp = series.params
        ref_params = ref_params or sp
        unit = math.sqrt(sp.omega_c**sp.s * sp.epsilon**2 / sp.s)
        keep = series.t_grid > 0
        ax.semilogx(
            sp.omega_c * series.t_grid[keep],
            series.spread[keep] / unit,
            ".",
            ms=4,
            label=f"{series.kind.value}",
        )
    sp = ref_params
    unit = math.sqrt(sp.omega_c**sp.s * sp.epsilon**2 / sp.s)
    tt = np.geomspace(0.05 / sp.omega_c, series.t_grid.max(), 200)
    ax.semilogx(sp.omega_c * tt, np.asarray(lrt_spread(sp, tt)) / unit, "-", lw=0.8,
                color="gray", label="linear response")
    ax.set_xlabel(r"$\omega_c t$")
    ax.set_ylabel(r"$\Delta E_{\mathrm{sprd}} / (\omega_c^s \epsilon^2 / s)^{1/2}$")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    return _save(fig, out_path)


def emit_figure(run_dir, figure_id: str, out_path=None, extra_inputs=None) -> Path:
    """Render one figure from a run directory; returns the output path."""
    run_dir = Path(run_dir)
    if figure_id not in FIGURE_IDS:
        raise InvalidParamsError(
            f"unknown figure id {figure_id!r}; choose from {FIGURE_IDS}"
        )
    out = Path(out_path) if out_path else run_dir / f"{figure_id}.svg"
    if figure_id == "ldos_loglog":
        return _ldos_figure(run_dir, out, loglog=True)
    if figure_id == "ldos_linlog":
        return _ldos_figure(run_dir, out, loglog=False)
    if figure_id == "survival":
        return _survival_figure(run_dir, out, extra_inputs)
    if figure_id == "inset_Y":
        return _inset_y_figure(run_dir, out, extra_inputs)
    if figure_id == "core_scaling":
        return _core_scaling_figure(run_dir, out, extra_inputs)
    return _spread_figure(run_dir, out, extra_inputs)
