"""Exact finite-matrix route: eigen-pairs, line-shape histograms, survival.

The eigen-pair path keeps the survival probability exact,
P(t) = |sum_nu w_nu exp(-i E_nu t)|^2 with w_nu = |<nu|0>|^2; histograms
are presentation-only binnings of the same weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import eigh

from .ensemble import ModelKind, Realization, dense_hamiltonian
from .errors import InvalidParamsError
from .propagate import WavepacketState
from .spectral import SpectralParams

__all__ = [
    "EigenPairs",
    "LdosHistogram",
    "eigenpairs",
    "diagonalize_ldos",
    "diagonalize_ldos_weights",
    "survival_from_ldos",
    "evolve_by_diagonalization",
    "core_tail_bin_edges",
]


@dataclass
class EigenPairs:
    """Eigenvalues, prepared-state weights, and optionally full vectors."""

    energies: np.ndarray
    weights: np.ndarray
    vectors: Optional[np.ndarray]
    realization_seed: int

    def completeness_defect(self) -> float:
        return abs(1.0 - float(self.weights.sum()))


@dataclass
class LdosHistogram:
    """Binned line shape; `weights` are probabilities per bin (not densities)."""

    bin_edges: np.ndarray
    weights: np.ndarray
    stderr: np.ndarray
    n_realizations: int
    gamma0: float
    params: SpectralParams
    kind: ModelKind

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.bin_edges)

    @property
    def density(self) -> np.ndarray:
        return self.weights / self.widths


def eigenpairs(realization: Realization, want_vectors: bool = False) -> EigenPairs:
    """Dense symmetric eigendecomposition; surfaces the seed on failure."""
    h = dense_hamiltonian(realization)
    try:
        energies, vectors = eigh(h, driver="evd")
    except Exception as exc:  # pragma: no cover - LAPACK failures are exotic
        raise RuntimeError(
            f"eigensolver failed for {realization.kind.value} seed={realization.seed}"
        ) from exc
    overlaps = vectors[realization.center, :]
    return EigenPairs(
        energies=energies,
        weights=overlaps**2,
        vectors=vectors if want_vectors else None,
        realization_seed=realization.seed,
    )


def core_tail_bin_edges(
    gamma0: float, omega_max: float, core_bins: int = 40, tail_bins_per_decade: int = 12
) -> np.ndarray:
    """Symmetric edges: uniform across the core, logarithmic along both tails."""
    core = np.linspace(0.0, min(2.0 * gamma0, omega_max), core_bins + 1)
    if omega_max > core[-1]:
        n_log = max(2, int(round(tail_bins_per_decade * math.log10(omega_max / core[-1]))))
        tail = np.geomspace(core[-1], omega_max, n_log + 1)[1:]
        positive = np.concatenate([core, tail])
    else:
        positive = core
    return np.concatenate([-positive[::-1][:-1], positive])


def diagonalize_ldos_weights(
    pair_list, bin_edges, params: SpectralParams, kind: ModelKind, gamma0: float
) -> LdosHistogram:
    """Histogram precomputed (energies, weights) pairs and average them."""
    edges = np.asarray(bin_edges, dtype=float)
    per_real = np.zeros((len(pair_list), len(edges) - 1))
    for i, (energies, weights) in enumerate(pair_list):
        per_real[i], _ = np.histogram(energies, bins=edges, weights=weights)
    mean = per_real.mean(axis=0)
    if len(pair_list) > 1:
        stderr = per_real.std(axis=0, ddof=1) / math.sqrt(len(pair_list))
    else:
        stderr = np.zeros_like(mean)
    return LdosHistogram(
        bin_edges=edges,
        weights=mean,
        stderr=stderr,
        n_realizations=len(pair_list),
        gamma0=gamma0,
        params=params,
        kind=kind,
    )


def diagonalize_ldos(
    realizations: Sequence[Realization],
    bin_edges: np.ndarray,
    completeness_tol: float = 1e-10,
) -> LdosHistogram:
    """Average the binned weights |<nu|0>|^2 over realizations.

    Realizations must share parameters and size; per-realization partial
    histograms are merged post hoc, so concurrent diagonalization commutes
    with this reduction.
    """
    if len(realizations) == 0:
        raise InvalidParamsError("need at least one realization")
    first = realizations[0]
    for r in realizations[1:]:
        if r.params != first.params or r.half_size != first.half_size:
            raise InvalidParamsError("realizations must share params and size")
    pair_list = []
    for r in realizations:
        pairs = eigenpairs(r)
        defect = pairs.completeness_defect()
        if defect > completeness_tol:
            raise RuntimeError(
                f"completeness defect {defect:.2e} for seed={r.seed}"
            )
        pair_list.append((pairs.energies - r.energies[r.center], pairs.weights))
    from .spectral import core_border_gamma0

    try:
        gamma0 = core_border_gamma0(first.params)
    except Exception:
        gamma0 = float("nan")
    return diagonalize_ldos_weights(
        pair_list, bin_edges, first.params, first.kind, gamma0
    )


def survival_from_ldos(source, t_grid: Sequence[float]) -> np.ndarray:
    """P(t) = |sum w exp(-i E t)|^2 from eigen-pairs (exact) or a histogram.

    The histogram form substitutes bin centers for eigenvalues and is
    broadened by the binning; pass EigenPairs whenever available.
    """
    t = np.asarray(t_grid, dtype=float)
    if isinstance(source, EigenPairs):
        energies, weights = source.energies, source.weights
    elif isinstance(source, LdosHistogram):
        energies, weights = source.centers, source.weights
    else:
        energies, weights = source  # (energies, weights) tuple
        energies = np.asarray(energies, float)
        weights = np.asarray(weights, float)
    phases = np.exp(-1j * np.outer(t, energies))
    amp = phases @ weights
    return np.abs(amp) ** 2


def evolve_by_diagonalization(
    realization: Realization,
    t_grid: Sequence[float],
    want_profile: bool = True,
) -> list[WavepacketState]:
    """Exact snapshots via the eigenbasis (the fast path for ensembles).

    With want_profile=False the snapshots carry only the prepared-state
    amplitude (enough for survival tracks) on a single-cell window.
    """
    t = np.asarray(t_grid, dtype=float)
    r = realization
    pairs = eigenpairs(r, want_vectors=want_profile)
    out = []
    if want_profile:
        v = pairs.vectors
        u0 = v[r.center, :]
        phases = np.exp(-1j * np.outer(pairs.energies, t)) * u0[:, None]
        amps = v @ phases  # (N, T)
        for k, tk in enumerate(t):
            out.append(
                WavepacketState(
                    t=float(tk),
                    n_lo=-r.half_size,
                    n_hi=r.half_size,
                    amplitudes=amps[:, k],
                    norm_leak=0.0,
                )
            )
    else:
        amp0 = np.exp(-1j * np.outer(t, pairs.energies)) @ pairs.weights
        for k, tk in enumerate(t):
            out.append(
                WavepacketState(
                    t=float(tk),
                    n_lo=0,
                    n_hi=0,
                    amplitudes=np.array([amp0[k]]),
                    norm_leak=0.0,
                )
            )
    return out
