"""Time evolution under one realization, plus the reduced kernel solver.

`propagate` integrates i dc/dt = H c from c_n(0) = delta_{n,0} with a
fixed-step classical Runge-Kutta scheme on a self-expanding index window.
The fixed step keeps ensemble averages bit-reproducible; the norm defect
is the accuracy monitor.

`fm_reduced_solve` solves the equivalent single-amplitude equation of the
rank-two model, dc/dt = -int_0^t C(t-tau) c(tau) dtau, with a trapezoidal
scheme of order two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import blas as _blas

from .ensemble import ModelKind, Realization
from .errors import (
    BudgetExceededError,
    InvalidParamsError,
    StepTooLargeError,
    WindowOverflowError,
)
from .spectral import (
    SpectralParams,
    correlation_derivative,
    correlation_function,
    wigner_time,
)

__all__ = [
    "PropagationTolerances",
    "WavepacketState",
    "propagate",
    "ReducedAmplitude",
    "fm_reduced_solve",
]


@dataclass(frozen=True)
class PropagationTolerances:
    """Accuracy knobs; defaults sized for ~1e-8 norm defect on short runs."""

    delta_norm: float = 1e-6  # unitarity budget over the whole run
    delta_edge: float = 1e-12  # edge-cell probability that triggers expansion
    steps_per_scale: int = 20  # h = min(t_c, t0, stability cap)/steps_per_scale

    def __post_init__(self):
        if self.steps_per_scale < 20:
            raise InvalidParamsError("steps_per_scale below 20 defeats the step rule")


@dataclass
class WavepacketState:
    """Amplitudes on the window n_lo..n_hi (inclusive, level units)."""

    t: float
    n_lo: int
    n_hi: int
    amplitudes: np.ndarray
    norm_leak: float

    @property
    def center_index(self) -> int:
        return -self.n_lo

    @property
    def survival(self) -> float:
        return float(abs(self.amplitudes[self.center_index]) ** 2)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


class _Applier:
    """H·v on the current window; rebuilt only when the window changes."""

    def __init__(self, realization: Realization, w_lo: int, w_hi: int):
        self.r = realization
        self.set_window(w_lo, w_hi)

    def set_window(self, w_lo: int, w_hi: int):
        r = self.r
        self.w_lo, self.w_hi = w_lo, w_hi
        a = w_lo + r.half_size
        size = w_hi - w_lo + 1
        self.energies = r.energies[a : a + size]
        if r.kind is ModelKind.FRIEDRICHS:
            self.column = r.couplings[a : a + size].astype(complex)
            self.center = -w_lo
        else:
            k = r.band
            ab = np.zeros((k + 1, size), dtype=complex, order="F")
            ab[k, :] = self.energies
            for d in range(1, k + 1):
                if d >= size:
                    break
                ab[k - d, d:] = r.couplings[d, a : a + size - d]
            self.ab = ab
            self.k = k

    def __call__(self, vec: np.ndarray) -> np.ndarray:
        if self.r.kind is ModelKind.FRIEDRICHS:
            out = self.energies * vec
            c0 = vec[self.center]
            out += self.column * c0
            out[self.center] += np.dot(self.column, vec) - self.column[self.center] * c0
            return out
        return _blas.zhbmv(self.k, 1.0, self.ab, vec)


def _stability_cap(realization: Realization) -> float:
    """Upper bound on the spectral radius of H over the largest window."""
    r = realization
    e_max = float(np.max(np.abs(r.energies)))
    c0 = correlation_function(r.params, 0.0)
    return e_max + 4.0 * math.sqrt(c0)


def _base_step(realization: Realization, tol: PropagationTolerances) -> float:
    p = realization.params
    scale = p.t_correlation
    if 0.0 < p.s < 2.0:
        scale = min(scale, wigner_time(p).t0)
    h = scale / tol.steps_per_scale
    # classical RK4 is stable on the imaginary axis up to |h*E| ~ 2.8
    return min(h, 2.5 / _stability_cap(realization))


def _rk4_step(apply_h, c: np.ndarray, h: float) -> np.ndarray:
    k1 = -1j * apply_h(c)
    k2 = -1j * apply_h(c + (0.5 * h) * k1)
    k3 = -1j * apply_h(c + (0.5 * h) * k2)
    k4 = -1j * apply_h(c + h * k3)
    return c + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def propagate(
    realization: Realization,
    t_grid: Sequence[float],
    tolerances: Optional[PropagationTolerances] = None,
    initial: Optional[WavepacketState] = None,
) -> list[WavepacketState]:
    """Snapshots of c_n(t) at the requested times (t_grid[0] must be 0).

    The window starts at +/- 2 band and grows by one band per side whenever
    the edge-cell probability exceeds delta_edge; hitting half_size raises
    WindowOverflowError, a norm defect beyond delta_norm raises
    BudgetExceededError.
    """
    tol = tolerances or PropagationTolerances()
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) == 0 or t_grid[0] != 0.0:
        raise InvalidParamsError("t_grid must be a 1-d grid starting at 0")
    if np.any(np.diff(t_grid) <= 0) and len(t_grid) > 1:
        raise InvalidParamsError("t_grid must be strictly increasing")
    r = realization
    m = r.half_size
    # rank-two coupling cannot populate |n| > band: the window is static there
    static = r.kind is ModelKind.FRIEDRICHS
    if initial is None:
        reach = r.band if static else 2 * r.band
        w_lo, w_hi = -min(reach, m), min(reach, m)
        c = np.zeros(w_hi - w_lo + 1, dtype=complex)
        c[-w_lo] = 1.0
    else:
        w_lo, w_hi = initial.n_lo, initial.n_hi
        c = initial.amplitudes.astype(complex).copy()
        if static and (w_lo > -r.band or w_hi < r.band):
            pad_lo = max(-m, min(w_lo, -r.band))
            pad_hi = min(m, max(w_hi, r.band))
            grown = np.zeros(pad_hi - pad_lo + 1, dtype=complex)
            grown[w_lo - pad_lo : w_lo - pad_lo + len(c)] = c
            c, w_lo, w_hi = grown, pad_lo, pad_hi
    norm0 = float(np.sum(np.abs(c) ** 2))
    apply_h = _Applier(r, w_lo, w_hi)
    h_base = _base_step(r, tol)

    def expand_if_needed():
        nonlocal c, w_lo, w_hi
        if static:
            return
        grew = False
        while abs(c[0]) ** 2 > tol.delta_edge and w_lo > -m:
            new_lo = max(w_lo - r.band, -m)
            c = np.concatenate([np.zeros(w_lo - new_lo, complex), c])
            w_lo = new_lo
            grew = True
        while abs(c[-1]) ** 2 > tol.delta_edge and w_hi < m:
            new_hi = min(w_hi + r.band, m)
            c = np.concatenate([c, np.zeros(new_hi - w_hi, complex)])
            w_hi = new_hi
            grew = True
        if grew:
            apply_h.set_window(w_lo, w_hi)
        if (abs(c[0]) ** 2 > tol.delta_edge and w_lo == -m) or (
            abs(c[-1]) ** 2 > tol.delta_edge and w_hi == m
        ):
            raise WindowOverflowError(
                f"window reached half_size={m} with edge probability above "
                f"{tol.delta_edge}; rebuild with a larger half_size"
            )

    def snapshot(t):
        leak = max(0.0, norm0 - float(np.sum(np.abs(c) ** 2)))
        if leak > tol.delta_norm * norm0:
            raise BudgetExceededError(
                f"norm defect {leak:.3e} exceeds budget {tol.delta_norm:.3e} at t={t:g}"
            )
        return WavepacketState(
            t=t, n_lo=w_lo, n_hi=w_hi, amplitudes=c.copy(), norm_leak=leak
        )

    out = [snapshot(t_grid[0])]
    for t_prev, t_next in zip(t_grid[:-1], t_grid[1:]):
        span = t_next - t_prev
        n_sub = max(1, int(math.ceil(span / h_base - 1e-12)))
        h = span / n_sub
        for _ in range(n_sub):
            expand_if_needed()
            c = _rk4_step(apply_h, c, h)
        out.append(snapshot(t_next))
    return out


# --- reduced single-amplitude solver -----------------------------------------


@dataclass
class ReducedAmplitude:
    """c(t) track of the rank-two model with its first two derivatives."""

    t: np.ndarray
    c: np.ndarray
    cdot: np.ndarray
    cddot: np.ndarray
    params: SpectralParams
    step: float

    @property
    def survival(self) -> np.ndarray:
        return self.c**2


def fm_reduced_solve(
    params: SpectralParams,
    t_grid: Sequence[float],
    step: Optional[float] = None,
) -> ReducedAmplitude:
    """Trapezoidal solution of dc/dt = -int_0^t C(t-tau) c(tau) dtau, c(0)=1.

    Second-order accurate in the step; the derivatives are evaluated from
    the scheme's own right-hand side (cddot via the kernel derivative), not
    by finite differences.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) == 0 or t_grid[0] < 0:
        raise InvalidParamsError("t_grid must be 1-d with nonnegative times")
    t_c = params.t_correlation
    h = step if step is not None else t_c / 20.0
    if h > t_c / 10.0:
        raise StepTooLargeError(
            f"step {h:g} exceeds t_c/10 = {t_c / 10.0:g}; the kernel is unresolved"
        )
    t_max = float(t_grid[-1])
    n = max(2, int(math.ceil(t_max / h - 1e-12)) + 1)
    tt = np.arange(n + 1) * h
    kernel = correlation_function(params, tt)
    c = np.empty(n + 1)
    rhs = np.empty(n + 1)
    c[0], rhs[0] = 1.0, 0.0
    c0k = kernel[0]
    denom = 1.0 + h * h * c0k / 4.0
    for j in range(n):
        # S = quadrature of C(t_{j+1}-tau) c(tau) without the new endpoint
        s = 0.5 * kernel[j + 1] * c[0]
        if j >= 1:
            s += np.dot(kernel[1 : j + 1], c[j:0:-1])
        s *= -h
        c[j + 1] = (c[j] + 0.5 * h * (rhs[j] + s)) / denom
        rhs[j + 1] = s - 0.5 * h * c0k * c[j + 1]
    # cddot = -C(0) c(t) - int_0^t C'(t-tau) c(tau) dtau (C'(0) = 0)
    kdot = correlation_derivative(params, tt)
    conv = _causal_trapezoid_convolution(kdot, c, h)
    cddot_full = -c0k * c - conv
    c_spl = CubicSpline(tt, c)
    cdot_spl = CubicSpline(tt, rhs)
    cddot_spl = CubicSpline(tt, cddot_full)
    return ReducedAmplitude(
        t=t_grid.copy(),
        c=c_spl(t_grid),
        cdot=cdot_spl(t_grid),
        cddot=cddot_spl(t_grid),
        params=params,
        step=h,
    )


def _causal_trapezoid_convolution(kernel: np.ndarray, signal: np.ndarray, h: float):
    """h * trapezoid sum_k kernel[j-k] signal[k] for each j, via FFT."""
    from scipy.signal import fftconvolve

    full = fftconvolve(kernel, signal)[: len(signal)]
    # trapezoid end-point weights: subtract half of both rim terms
    full -= 0.5 * (kernel * signal[0] + kernel[0] * signal)
    return h * full
