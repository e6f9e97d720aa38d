"""Fits and scaling extractions for survival and core-width tracks.

Fit windows are always explicit inputs; `suggest_fit_window` proposes one
from curvature but logs what it chose.  All fits are least squares in log
space, so they are invariant under a common rescaling of the time axis.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    InsufficientOverlapError,
    InvalidParamsError,
    NoPlateauError,
    WindowTooShortError,
)

__all__ = [
    "StretchedFit",
    "PowerlawFit",
    "fit_stretched_exponent",
    "fit_powerlaw_tail",
    "extract_departure_and_saturation",
    "scaling_collapse",
    "suggest_fit_window",
]

logger = logging.getLogger(__name__)

_MIN_DECADES = 0.5


def _window_mask(t, window):
    lo, hi = window
    if not hi > lo > 0.0:
        raise InvalidParamsError(f"bad window {window}")
    if math.log10(hi / lo) < _MIN_DECADES:
        raise WindowTooShortError(
            f"window ({lo:g}, {hi:g}) spans {math.log10(hi / lo):.2f} decades, "
            f"need at least {_MIN_DECADES}"
        )
    mask = (t >= lo) & (t <= hi)
    if mask.sum() < 3:
        raise WindowTooShortError(f"only {int(mask.sum())} samples inside {window}")
    return mask


def _ols_loglog(x, y):
    lx, ly = np.log(x), np.log(y)
    n = len(lx)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    if n > 2:
        sigma2 = float(resid @ resid) / (n - 2)
        sxx = float(((lx - lx.mean()) ** 2).sum())
        slope_err = math.sqrt(sigma2 / sxx)
        intercept_err = math.sqrt(sigma2 * (1.0 / n + lx.mean() ** 2 / sxx))
    else:
        slope_err = intercept_err = float("nan")
    return slope, intercept, slope_err, intercept_err


@dataclass(frozen=True)
class StretchedFit:
    beta: float  # exponent of exp[-(t/t0)^beta]
    beta_err: float
    t0: float
    slope: float  # of ln(-ln P / t) vs ln t; beta = slope + 1
    window: tuple[float, float]


@dataclass(frozen=True)
class PowerlawFit:
    exponent: float  # P = amplitude * t^exponent
    exponent_err: float
    amplitude: float
    window: tuple[float, float]


def fit_stretched_exponent(t, survival, window) -> StretchedFit:
    """Slope of Y = -ln P / t against t on log axes.

    For P = exp[-(t/t0)^beta], Y = t^(beta-1)/t0^beta, so the fitted slope
    is beta - 1 and the intercept recovers t0.
    """
    t = np.asarray(t, dtype=float)
    p = np.asarray(survival, dtype=float)
    mask = _window_mask(t, window) & (p > 0.0) & (p < 1.0)
    if mask.sum() < 3:
        raise WindowTooShortError("fewer than 3 usable samples (need 0 < P < 1)")
    y = -np.log(p[mask]) / t[mask]
    slope, intercept, slope_err, _ = _ols_loglog(t[mask], y)
    beta = slope + 1.0
    t0 = math.exp(-intercept / beta) if beta != 0.0 else float("inf")
    return StretchedFit(
        beta=beta, beta_err=slope_err, t0=t0, slope=slope, window=tuple(window)
    )


def fit_powerlaw_tail(t, survival, window) -> PowerlawFit:
    """Log-log line fit P = amplitude * t^exponent over the window."""
    t = np.asarray(t, dtype=float)
    p = np.asarray(survival, dtype=float)
    mask = _window_mask(t, window) & (p > 0.0)
    if mask.sum() < 3:
        raise WindowTooShortError("fewer than 3 usable samples (need P > 0)")
    slope, intercept, slope_err, _ = _ols_loglog(t[mask], p[mask])
    return PowerlawFit(
        exponent=slope,
        exponent_err=slope_err,
        amplitude=math.exp(intercept),
        window=tuple(window),
    )


def extract_departure_and_saturation(
    t, width, fraction: float = 0.5, plateau_rtol: float = 0.10
) -> tuple[float, float]:
    """(departure time, saturation value) of a rising track.

    The plateau is the final decade of the grid and must vary by less than
    plateau_rtol; the departure time is the first (interpolated) crossing
    of fraction * saturation.
    """
    t = np.asarray(t, dtype=float)
    w = np.asarray(width, dtype=float)
    if not 0.0 < fraction < 1.0:
        raise InvalidParamsError("fraction must be in (0, 1)")
    plateau = t >= t[-1] / 10.0
    if plateau.sum() < 2:
        raise NoPlateauError("fewer than 2 samples in the final decade")
    seg = w[plateau]
    sat = float(seg.mean())
    if sat <= 0.0 or (seg.max() - seg.min()) > plateau_rtol * sat:
        raise NoPlateauError(
            f"final decade varies by {(seg.max() - seg.min()) / max(sat, 1e-300):.2%}"
            f" (> {plateau_rtol:.0%})"
        )
    target = fraction * sat
    above = w >= target
    if above[0] or not above.any():
        raise NoPlateauError("track does not cross the departure threshold from below")
    k = int(np.argmax(above))
    t_dep = t[k - 1] + (target - w[k - 1]) * (t[k] - t[k - 1]) / (w[k] - w[k - 1])
    return float(t_dep), sat


def scaling_collapse(
    tracks: Sequence[tuple[np.ndarray, np.ndarray, float]],
    window: tuple[float, float],
    grid_points: int = 60,
) -> float:
    """Worst spread (in P units) between tracks plotted against t/t0.

    Each element of `tracks` is (t, P, t0); the window is in scaled time.
    """
    if len(tracks) < 3:
        raise InvalidParamsError("need at least 3 tracks for a collapse")
    lo = max(max(t[t > 0].min() / t0 for t, _, t0 in tracks), window[0])
    hi = min(min(t.max() / t0 for t, _, t0 in tracks), window[1])
    if not (hi > lo and math.log10(hi / lo) >= 0.3):
        raise InsufficientOverlapError(
            f"common scaled window ({lo:g}, {hi:g}) too small"
        )
    x = np.geomspace(lo, hi, grid_points)
    values = np.array(
        [np.interp(np.log(x), np.log(t[t > 0] / t0), np.asarray(p)[t > 0]) for t, p, t0 in tracks]
    )
    return float((values.max(axis=0) - values.min(axis=0)).max())


def suggest_fit_window(t, survival, floor: float = 1e-6) -> tuple[float, float]:
    """Propose a tail window: past the initial transient, above the floor.

    Heuristic: start where the log-log curvature of P(t) settles (second
    difference below 10% of the first), end where P drops under `floor`.
    The choice is logged; fits always receive it explicitly.
    """
    t = np.asarray(t, dtype=float)
    p = np.asarray(survival, dtype=float)
    good = (t > 0) & (p > floor)
    lt, lp = np.log(t[good]), np.log(p[good])
    start = 1
    if len(lt) > 6:
        d1 = np.gradient(lp, lt)
        d2 = np.abs(np.gradient(d1, lt))
        settled = np.nonzero(d2 < 0.1 * np.abs(d1).max())[0]
        if settled.size:
            start = max(1, settled[0])
    window = (float(np.exp(lt[start])), float(np.exp(lt[-1])))
    logger.info("suggest_fit_window -> (%g, %g)", *window)
    return window
