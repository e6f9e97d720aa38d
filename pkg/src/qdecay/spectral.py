"""Closed-form spectral kernel: coupling power spectrum and derived scales.

Everything downstream is parameterized by the quadruple (s, epsilon,
omega_c, rho) plus a cutoff shape.  The power spectrum is

    C~(w) = 2 pi epsilon^2 |w|^(s-1) * cutoff(|w|/omega_c)

with an exponential or a sharp cutoff.  Units are hbar = 1 and energies
are measured against the mean level spacing 1/rho (rho defaults to 1).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import (
    InvalidParamsError,
    PerturbativeRegimeError,
    RegimeError,
    SingularPointError,
)

__all__ = [
    "CutoffKind",
    "SpectralParams",
    "TimeScales",
    "spectral_function",
    "correlation_function",
    "correlation_derivative",
    "wigner_time",
    "perturbative_weight_p0",
    "core_border_gamma0",
    "semicircle_width",
    "level_shift_delta",
    "level_shift_pv",
]


class CutoffKind(enum.Enum):
    EXPONENTIAL = "exponential"
    SHARP = "sharp"

    @classmethod
    def parse(cls, text: str) -> "CutoffKind":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise InvalidParamsError(
                f"unknown cutoff kind {text!r} (expected 'exponential' or 'sharp')"
            ) from None


@dataclass(frozen=True)
class SpectralParams:
    """Continuum parameters; sharp cutoff is the dynamics default."""

    s: float
    epsilon: float
    omega_c: float
    rho: float = 1.0
    cutoff: CutoffKind = CutoffKind.SHARP

    def __post_init__(self):
        problems = []
        if not self.s > 0:
            problems.append(f"s must be > 0 (perturbation unbounded otherwise), got {self.s}")
        if not self.epsilon > 0:
            problems.append(f"epsilon must be > 0, got {self.epsilon}")
        if not self.omega_c > 0:
            problems.append(f"omega_c must be > 0, got {self.omega_c}")
        if not self.rho > 0:
            problems.append(f"rho must be > 0, got {self.rho}")
        if problems:
            raise InvalidParamsError("; ".join(problems))
        if self.bandwidth < 1:
            raise InvalidParamsError(
                f"bandwidth b = round(rho*omega_c) = {self.bandwidth} must be >= 1"
            )

    @property
    def bandwidth(self) -> int:
        """Number of level spacings covered by the cutoff, b = round(rho*omega_c)."""
        return int(round(self.rho * self.omega_c))

    @property
    def t_heisenberg(self) -> float:
        return 2.0 * math.pi * self.rho

    @property
    def t_correlation(self) -> float:
        return 2.0 * math.pi / self.omega_c


@dataclass(frozen=True)
class TimeScales:
    """The three dynamical scales; gamma0*t0 == 1 by construction."""

    t_heisenberg: float
    t_correlation: float
    t0: float
    gamma0: float


def spectral_function(params: SpectralParams, omega) -> np.ndarray | float:
    """Power spectrum C~(omega); even in omega, singular at 0 for s < 1."""
    w = np.asarray(omega, dtype=float)
    if params.s < 1 and np.any(w == 0.0):
        raise SingularPointError("C~(0) diverges for s < 1; omega must be nonzero")
    aw = np.abs(w)
    with np.errstate(divide="ignore"):
        out = 2.0 * math.pi * params.epsilon**2 * aw ** (params.s - 1.0)
    if params.cutoff is CutoffKind.EXPONENTIAL:
        out = out * np.exp(-aw / params.omega_c)
    else:
        out = np.where(aw <= params.omega_c, out, 0.0)
    return out if out.ndim else float(out)


# --- trigonometric moments int_0^u x^(s-1) cos/sin x dx ----------------------
#
# Evaluated by a Taylor series for small u and the large-u asymptotic
# expansion of the remainder integral otherwise.  The crossover at u=18
# keeps both branches below ~1e-8 relative error for 0 < s <= 4 (checked
# against mpmath in the test suite).

_MOMENT_SWITCH = 18.0
_SERIES_TERMS = 60
_ASYMP_TERMS = 12


def _moments_series(u, s):
    u = np.asarray(u, dtype=float)
    u2 = u * u
    running = u**s  # (-1)^k u^(s+2k) / (2k)!
    cos_acc = np.zeros_like(u)
    sin_acc = np.zeros_like(u)
    for k in range(_SERIES_TERMS):
        cos_acc += running / (s + 2 * k)
        sin_acc += running * u / ((2 * k + 1) * (s + 2 * k + 1))
        running = running * (-u2) / ((2 * k + 1) * (2 * k + 2))
        if np.all(np.abs(running) <= 1e-18 * (1.0 + np.abs(cos_acc))):
            break
    return cos_acc, sin_acc


def _moments_asymptotic(u, s):
    # int_u^inf x^(s-1) e^{ix} dx = i e^{iu} u^(s-1) sum_k (s-1)...(s-k) (i/u)^k
    u = np.asarray(u, dtype=float)
    z = 1j / u
    acc = np.ones(u.shape, dtype=complex)
    coef = 1.0
    pw = np.ones_like(acc)
    for k in range(1, _ASYMP_TERMS + 1):
        coef *= s - k
        pw = pw * z
        acc += coef * pw
    tail = 1j * np.exp(1j * u) * u ** (s - 1.0) * acc
    full = special.gamma(s) * np.exp(1j * math.pi * s / 2.0)
    partial = full - tail
    return partial.real, partial.imag


def _cosine_sine_moments(u, s):
    """(int_0^u x^(s-1) cos x dx, int_0^u x^(s-1) sin x dx), vectorized in u."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    cos_out = np.empty_like(u)
    sin_out = np.empty_like(u)
    small = u <= _MOMENT_SWITCH
    if small.any():
        c, sn = _moments_series(u[small], s)
        cos_out[small] = c
        sin_out[small] = sn
    if (~small).any():
        c, sn = _moments_asymptotic(u[~small], s)
        cos_out[~small] = c
        sin_out[~small] = sn
    return cos_out, sin_out


def correlation_function(params: SpectralParams, t) -> np.ndarray | float:
    """Time correlation C(t), the inverse transform of the power spectrum.

    Real and even in t; C(0) = 2 eps^2 omega_c^s / s for the sharp cutoff
    and 2 eps^2 Gamma(s) omega_c^s for the exponential one.
    """
    s, eps, wc = params.s, params.epsilon, params.omega_c
    tt = np.abs(np.asarray(t, dtype=float))
    scalar = tt.ndim == 0
    tt = np.atleast_1d(tt)
    if params.cutoff is CutoffKind.EXPONENTIAL:
        out = 2.0 * eps**2 * special.gamma(s) * ((1.0 / wc - 1j * tt) ** (-s)).real
    else:
        out = np.empty_like(tt)
        zero = tt == 0.0
        out[zero] = 2.0 * eps**2 * wc**s / s
        if (~zero).any():
            tnz = tt[~zero]
            g, _ = _cosine_sine_moments(wc * tnz, s)
            out[~zero] = 2.0 * eps**2 * tnz ** (-s) * g
    return float(out[0]) if scalar else out


def correlation_derivative(params: SpectralParams, t) -> np.ndarray | float:
    """dC/dt for t >= 0; vanishes at t = 0."""
    s, eps, wc = params.s, params.epsilon, params.omega_c
    tt = np.asarray(t, dtype=float)
    scalar = tt.ndim == 0
    tt = np.atleast_1d(tt)
    if params.cutoff is CutoffKind.EXPONENTIAL:
        out = 2.0 * eps**2 * special.gamma(s + 1.0) * (
            1j * (1.0 / wc - 1j * tt) ** (-(s + 1.0))
        ).real
    else:
        out = np.zeros_like(tt)
        nz = tt != 0.0
        if nz.any():
            tnz = tt[nz]
            _, h = _cosine_sine_moments(wc * tnz, s + 1.0)
            out[nz] = -2.0 * eps**2 * tnz ** (-(s + 1.0)) * h
    return float(out[0]) if scalar else out


def wigner_time(params: SpectralParams) -> TimeScales:
    """Generalized decay time t0 (and gamma0 = 1/t0) for 0 < s < 2.

    t0 = [2 pi eps^2 / (Gamma(3-s) sin(s pi/2))]^(-1/(2-s)); reduces to the
    golden-rule value 1/(2 pi eps^2) at s = 1.  The prefactor is fixed by
    the 1/|w|^(3-s) tail of the line shape, whose transform carries a
    |t|^(2-s) cusp; the closure test in the suite checks this numerically.
    """
    s = params.s
    if not (0.0 < s < 2.0):
        raise RegimeError(f"t0 formula holds only for 0 < s < 2, got s={s}")
    rate_pow = 2.0 * math.pi * params.epsilon**2 / (
        float(special.gamma(3.0 - s)) * math.sin(s * math.pi / 2.0)
    )
    t0 = rate_pow ** (-1.0 / (2.0 - s))
    return TimeScales(
        t_heisenberg=params.t_heisenberg,
        t_correlation=params.t_correlation,
        t0=t0,
        gamma0=1.0 / t0,
    )


def perturbative_weight_p0(params: SpectralParams, gamma: float) -> float:
    """First-order weight outside |omega| > gamma, both tails counted.

    The border condition p0(gamma0) = 1 defines the core/tail boundary.
    The one-sided integral int_gamma^inf C~(w)/w^2 dw/2pi is doubled here
    so that "weight" means total probability in both tails.
    """
    s, eps, wc = params.s, params.epsilon, params.omega_c
    if gamma < 0:
        raise InvalidParamsError("gamma must be >= 0")
    if gamma == 0.0 and s <= 2.0:
        raise SingularPointError("p0 diverges at gamma=0 for s <= 2")
    if params.cutoff is CutoffKind.SHARP:
        if gamma >= wc:
            return 0.0
        if gamma == 0.0:  # s > 2 only
            return 2.0 * eps**2 * wc ** (s - 2.0) / (s - 2.0)
        if s == 2.0:
            return 2.0 * eps**2 * math.log(wc / gamma)
        return 2.0 * eps**2 * (gamma ** (s - 2.0) - wc ** (s - 2.0)) / (2.0 - s)
    if gamma == 0.0:  # s > 2, exponential cutoff
        return 2.0 * eps**2 * special.gamma(s - 2.0) * wc ** (s - 2.0)
    val, _ = integrate.quad(
        lambda w: w ** (s - 3.0) * math.exp(-w / wc),
        gamma,
        np.inf,
        epsabs=0.0,
        epsrel=1e-12,
        limit=200,
    )
    return 2.0 * eps**2 * val


def core_border_gamma0(params: SpectralParams, rel_tol: float = 1e-10) -> float:
    """Border gamma0 where first-order theory breaks down: p0(gamma0) = 1.

    Solved by bisection; the asymptotic eps^(2/(2-s)) scaling is a test of
    this routine, not its implementation.
    """
    if not (0.0 < params.s < 2.0):
        raise RegimeError(f"core border defined for 0 < s < 2, got s={params.s}")
    hi = params.omega_c
    while perturbative_weight_p0(params, hi) > 1.0:
        hi *= 2.0
        if hi > 1e12 * params.omega_c:
            raise PerturbativeRegimeError("p0 stays above 1 arbitrarily far out")
    lo = hi / 2.0
    while perturbative_weight_p0(params, lo) < 1.0:
        lo /= 2.0
        if lo < 1e-280:
            raise PerturbativeRegimeError(
                "p0 < 1 everywhere: coupling too weak, perturbative regime"
            )
    while (hi - lo) > rel_tol * lo:
        mid = 0.5 * (lo + hi)
        if perturbative_weight_p0(params, mid) >= 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def semicircle_width(params: SpectralParams) -> float:
    """Core width from the power spectrum integrated up to gamma0."""
    gamma0 = core_border_gamma0(params)
    s, eps = params.s, params.epsilon
    if params.cutoff is CutoffKind.SHARP:
        top = min(gamma0, params.omega_c)
        var = eps**2 * top**s / s
    else:
        val, _ = integrate.quad(
            lambda w: w ** (s - 1.0) * math.exp(-w / params.omega_c),
            0.0,
            gamma0,
            epsabs=0.0,
            epsrel=1e-12,
            limit=200,
        )
        var = eps**2 * val
    return math.sqrt(var)


def level_shift_delta(params: SpectralParams, omega) -> np.ndarray | float:
    """Principal-value level shift in the wide-cutoff limit.

    Delta(w) = eps^2 pi cot(s pi/2) |w|^(s-1) sgn(w); odd in w, zero for
    s = 1.  Valid when |w| is well below the cutoff; use level_shift_pv
    for the finite-cutoff integral.
    """
    s = params.s
    if not (0.0 < s < 2.0):
        raise RegimeError(f"closed-form level shift needs 0 < s < 2, got s={s}")
    w = np.asarray(omega, dtype=float)
    if s < 1 and np.any(w == 0.0):
        raise SingularPointError("level shift singular at omega=0 for s < 1")
    if s == 1.0:  # cot(pi/2) = 0 exactly
        out = np.zeros_like(w)
        return out if out.ndim else 0.0
    out = (
        params.epsilon**2
        * math.pi
        * (math.cos(s * math.pi / 2.0) / math.sin(s * math.pi / 2.0))
        * np.abs(w) ** (s - 1.0)
        * np.sign(w)
    )
    return out if out.ndim else float(out)


def level_shift_pv(params: SpectralParams, omega) -> np.ndarray | float:
    """Finite-cutoff principal-value shift, by adaptive Cauchy quadrature.

    Needed when omega is a sizable fraction of omega_c, where the hard band
    edge pulls the shift far from the closed form.
    """
    s, eps, wc = params.s, params.epsilon, params.omega_c
    w_arr = np.atleast_1d(np.asarray(omega, dtype=float))
    if s < 1 and np.any(w_arr == 0.0):
        raise SingularPointError("level shift singular at omega=0 for s < 1")
    upper = wc if params.cutoff is CutoffKind.SHARP else 45.0 * wc

    def ctilde_half(x):
        # C~ on the positive axis without the 2pi (folded back at the end)
        val = eps**2 * x ** (s - 1.0)
        if params.cutoff is CutoffKind.EXPONENTIAL:
            val *= math.exp(-x / wc)
        return val

    def log_tail(func, a, b):
        # integrate func over [a, b] in log space; robust over many decades
        if b <= a:
            return 0.0
        val, _ = integrate.quad(
            lambda y: func(math.exp(y)) * math.exp(y),
            math.log(a),
            math.log(b),
            epsabs=0.0,
            epsrel=1e-10,
            limit=800,
        )
        return val

    out = np.empty_like(w_arr)
    for i, w in enumerate(w_arr):
        aw = abs(w)
        if aw == 0.0:
            out[i] = 0.0
            continue
        if aw >= upper:
            # no pole inside the support: single folded integral
            val = log_tail(
                lambda x: ctilde_half(x) * 2.0 * aw / (aw**2 - x**2), 1e-280, upper
            )
        else:
            # pole handled on [0, 2 aw]; beyond, the folded kernel
            # -2 aw / (x^2 - aw^2) is regular and decays like x^-2
            lo = min(2.0 * aw, upper)
            pv, _ = integrate.quad(
                ctilde_half, 0.0, lo, weight="cauchy", wvar=aw, limit=400
            )
            near, _ = integrate.quad(
                lambda x: ctilde_half(x) / (aw + x),
                0.0,
                lo,
                epsabs=0.0,
                epsrel=1e-10,
                limit=400,
            )
            far = log_tail(
                lambda x: ctilde_half(x) * (-2.0 * aw) / (x**2 - aw**2), lo, upper
            )
            val = -pv + near + far
        out[i] = val if w > 0 else -val  # odd in omega
    return out if np.ndim(omega) else float(out[0])
