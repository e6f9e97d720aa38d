"""Closed-form predictions: line shape, decay laws, spreading laws.

Each asymptotic law has an explicit validity window carried by
`decay_law`, so downstream plots can grey out extrapolation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .ensemble import ModelKind
from .errors import (
    NegativeRadicandError,
    NoCrossingError,
    RegimeError,
    SingularPointError,
)
from .spectral import (
    SpectralParams,
    correlation_function,
    level_shift_delta,
    level_shift_pv,
    perturbative_weight_p0,
    spectral_function,
    wigner_time,
)

__all__ = [
    "DecayRegime",
    "DecayLaw",
    "decay_law",
    "fm_ldos_analytic",
    "survival_wm_stretched",
    "survival_fm_powerlaw",
    "fm_powerlaw_amplitude",
    "fm_crossover_time",
    "survival_fm_s2_loglaw",
    "survival_partial_decay",
    "lrt_spread",
    "fm_exact_spread",
]


class DecayRegime(enum.Enum):
    EXPONENTIAL = "exponential"
    STRETCHED_EXPONENTIAL = "stretched_exponential"
    POWER_LAW = "power_law"
    LOG_LAW = "log_law"
    PARTIAL_DECAY = "partial_decay"


@dataclass(frozen=True)
class DecayLaw:
    """Functional form of the long-time survival decay plus its window."""

    regime: DecayRegime
    t0: Optional[float]
    t0_prime: Optional[float]
    exponent: Optional[float]
    window: tuple[float, float]

    def __post_init__(self):
        if self.t0_prime is not None and self.t0 is not None:
            assert self.t0_prime >= self.t0


def fm_powerlaw_amplitude(params: SpectralParams) -> float:
    """|2 sin((s-1) pi) / ((2-s) pi)|, the power-law prefactor at t = t0."""
    s = params.s
    return abs(2.0 * math.sin((s - 1.0) * math.pi) / ((2.0 - s) * math.pi))


def decay_law(params: SpectralParams, kind: ModelKind) -> DecayLaw:
    """Classify the long-time survival law of the given model."""
    s = params.s
    t_c = params.t_correlation
    if s == 1.0:
        t0 = wigner_time(params).t0
        return DecayLaw(DecayRegime.EXPONENTIAL, t0, None, 1.0, (t_c, math.inf))
    if 0.0 < s < 2.0:
        t0 = wigner_time(params).t0
        if kind is ModelKind.WIGNER:
            return DecayLaw(
                DecayRegime.STRETCHED_EXPONENTIAL, t0, None, 2.0 - s, (t_c, math.inf)
            )
        amp = fm_powerlaw_amplitude(params)
        try:
            t0p = fm_crossover_time(params)
        except NoCrossingError:
            t0p = None
        onset = max(t_c, t0 * max(1.0, amp ** (1.0 / (2.0 - s))))
        if t0p is not None:
            onset = max(onset, t0p)
        return DecayLaw(DecayRegime.POWER_LAW, t0, t0p, 2.0 * (2.0 - s), (onset, math.inf))
    if s == 2.0:
        if kind is ModelKind.WIGNER:
            raise RegimeError("no closed-form law for the banded model at s = 2")
        t_cp = t_c * math.exp(1.0 / (2.0 * params.epsilon**2))
        return DecayLaw(DecayRegime.LOG_LAW, None, None, None, (t_c, t_cp))
    return DecayLaw(DecayRegime.PARTIAL_DECAY, None, None, None, (t_c, math.inf))


def fm_ldos_analytic(
    params: SpectralParams, omega, shift: str = "wide_band"
) -> np.ndarray | float:
    """Line shape of the rank-two model from its resolvent.

    rho(w) = (1/pi) (Gamma/2) / ((w - Delta)^2 + (Gamma/2)^2) with
    Gamma(w) = C~(w).  shift="wide_band" uses the closed-form level shift
    (cutoff sent to infinity); shift="finite_cutoff" evaluates the
    principal-value integral over the actual spectrum, which matters once
    w is a sizable fraction of omega_c.
    """
    s = params.s
    if not (0.0 < s < 2.0):
        raise RegimeError(f"line-shape formula needs 0 < s < 2, got s={s}")
    w = np.asarray(omega, dtype=float)
    if s != 1.0 and np.any(w == 0.0):
        raise SingularPointError(
            "line shape diverges (integrably) at omega=0 unless s=1"
        )
    if shift == "wide_band":
        delta = np.asarray(level_shift_delta(params, w))
    elif shift == "finite_cutoff":
        delta = np.asarray(level_shift_pv(params, w))
    else:
        raise RegimeError(f"unknown shift mode {shift!r}")
    half_gamma = np.asarray(spectral_function(params, w)) / 2.0
    out = (1.0 / math.pi) * half_gamma / ((w - delta) ** 2 + half_gamma**2)
    return out if out.ndim else float(out)


def survival_wm_stretched(params: SpectralParams, t) -> np.ndarray | float:
    """exp[-(t/t0)^(2-s)]; the banded-model law past the short transient."""
    s = params.s
    if not (0.0 < s < 2.0):
        raise RegimeError(f"stretched law needs 0 < s < 2, got s={s}")
    t0 = wigner_time(params).t0
    tt = np.asarray(t, dtype=float)
    out = np.exp(-((tt / t0) ** (2.0 - s)))
    return out if out.ndim else float(out)


def survival_fm_powerlaw(params: SpectralParams, t) -> np.ndarray | float:
    """Long-time rank-two law |2 sin((s-1)pi) / ((2-s) pi (t/t0)^(2-s))|^2.

    Identically zero at s=1, where only the exponential survives.
    """
    s = params.s
    if not (0.0 < s < 2.0):
        raise RegimeError(f"power law needs 0 < s < 2, got s={s}")
    tt = np.asarray(t, dtype=float)
    if s == 1.0:
        out = np.zeros_like(tt)
        return out if out.ndim else 0.0
    t0 = wigner_time(params).t0
    amp = fm_powerlaw_amplitude(params)
    out = (amp * (tt / t0) ** (-(2.0 - s))) ** 2
    return out if out.ndim else float(out)


def fm_crossover_time(params: SpectralParams, x_max: float = 1e3) -> float:
    """Time where the stretched branch drops below the power-law branch.

    Root of exp[-(t/t0)^a] = amp^2 (t/t0)^(-2a) on the decreasing side of
    their log-difference (a = 2-s); for strongly non-Ohmic couplings the
    power law dominates from t0 onwards and no crossing exists.
    """
    s = params.s
    if not (0.0 < s < 2.0) or s == 1.0:
        raise RegimeError("crossover defined for 0 < s < 2 away from s=1")
    alpha = 2.0 - s
    amp = fm_powerlaw_amplitude(params)
    t0 = wigner_time(params).t0

    def logdiff(x):
        return -(x**alpha) + 2.0 * alpha * math.log(x) - 2.0 * math.log(amp)

    x_peak = 2.0 ** (1.0 / alpha)
    if logdiff(x_peak) <= 0.0:
        raise NoCrossingError(
            f"power-law amplitude {amp:.4f} >= 2/e: the two branches never "
            "cross beyond t0"
        )
    lo, hi = x_peak, x_max
    if logdiff(hi) > 0.0:
        raise NoCrossingError(f"no crossing below {x_max:g} t0")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if logdiff(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * lo:
            break
    return 0.5 * (lo + hi) * t0


def survival_fm_s2_loglaw(params: SpectralParams, t) -> np.ndarray | float:
    """log^2(t/t_c') shape at s = 2, valid on (t_c, t_c'); its own
    normalization point sits at t = t_c'/e where the value is 1."""
    if params.s != 2.0:
        raise RegimeError(f"log law is the s=2 form, got s={params.s}")
    t_cp = params.t_correlation * math.exp(1.0 / (2.0 * params.epsilon**2))
    tt = np.asarray(t, dtype=float)
    out = np.log(tt / t_cp) ** 2
    return out if out.ndim else float(out)


def survival_partial_decay(params: SpectralParams) -> float:
    """Saturation value |1 - p0|^2 of the immediate partial decay (s > 2)."""
    if not params.s > 2.0:
        raise RegimeError(f"partial decay requires s > 2, got s={params.s}")
    p0 = perturbative_weight_p0(params, 0.0)
    return (1.0 - p0) ** 2


def lrt_spread(params: SpectralParams, t) -> np.ndarray | float:
    """Linear-response spread [2(C(0) - C(t))]^(1/2)."""
    c0 = correlation_function(params, 0.0)
    ct = correlation_function(params, t)
    out = np.sqrt(2.0 * (c0 - np.asarray(ct)))
    return out if out.ndim else float(out)


def fm_exact_spread(c, cdot, cddot, params: SpectralParams) -> np.ndarray:
    """Closed-form rank-two spread [(1+c^2)C(0) - cdot^2 + 2 c cddot]^(1/2).

    Saturates a factor sqrt(2) below the linear-response value once the
    survival has decayed; raises if the radicand goes negative (derivative
    stencil too coarse for the requested times).
    """
    c = np.asarray(c, dtype=float)
    cdot = np.asarray(cdot, dtype=float)
    cddot = np.asarray(cddot, dtype=float)
    c0 = correlation_function(params, 0.0)
    radicand = (1.0 + c**2) * c0 - cdot**2 + 2.0 * c * cddot
    if np.any(radicand < 0.0):
        worst = float(radicand.min())
        raise NegativeRadicandError(
            f"spread radicand reached {worst:.3e}; tighten the solver step"
        )
    return np.sqrt(radicand)
