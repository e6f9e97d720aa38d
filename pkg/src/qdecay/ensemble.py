"""Seeded construction of rank-two and banded random-matrix realizations.

Levels form the rigid picket fence E_n = n/rho for n in [-half_size,
half_size]; the coupling statistics discretize the power spectrum:
mean |V_{n,0}|^2 = C~(E_n - E_0) / (2 pi rho).

Wigner-model entries are generated counter-based: the value of V_{n,m}
is a pure function of (seed, n, m), so any sub-block is reproducible
without generating the rest of the matrix.
"""

from __future__ import annotations

import enum
import json
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.special import ndtri

from .errors import InvalidParamsError
from .spectral import CutoffKind, SpectralParams, spectral_function

__all__ = [
    "ModelKind",
    "Realization",
    "build_fm",
    "build_wm",
    "derive_realization_seed",
    "save_realization",
    "load_realization",
]

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
# absolute level index n is offset by this bias to form a nonnegative
# stream position; half_size must stay far below it
_POS_BIAS = 1 << 39
_OFFSET_STRIDE = 1 << 40


class ModelKind(enum.Enum):
    FRIEDRICHS = "fm"
    WIGNER = "wm"

    @classmethod
    def parse(cls, text: str) -> "ModelKind":
        t = text.strip().lower()
        for k in cls:
            if t in (k.value, k.name.lower()):
                return k
        raise InvalidParamsError(f"unknown model kind {text!r} (expected 'fm' or 'wm')")


def derive_realization_seed(master_seed: int, index: int) -> int:
    """Element `index` of the SplitMix64 sequence seeded at `master_seed`.

    Bit-exact on every platform; collision-free in practice for any sane
    number of realizations.
    """
    z = (master_seed + (index + 1) * _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


@dataclass(frozen=True)
class Realization:
    """One sampled Hamiltonian (diagonal energies plus coupling storage).

    couplings layout:
      FRIEDRICHS: shape (N,), the column V_{n,0} (real, zero at n=0 and
                  beyond the band);
      WIGNER:     shape (band+1, N) lower band storage, row d holding
                  V_{i,i+d} at column i (row 0 is the V diagonal, all 0).
    """

    kind: ModelKind
    params: SpectralParams
    half_size: int
    band: int
    seed: int
    energies: np.ndarray
    couplings: np.ndarray

    @property
    def size(self) -> int:
        return 2 * self.half_size + 1

    @property
    def center(self) -> int:
        """Array index of the prepared level n = 0."""
        return self.half_size

    def with_sign_flips(self, flip_indices) -> "Realization":
        """Gauge copy with V_{n,0} -> -V_{n,0} on the given level indices (FM only)."""
        if self.kind is not ModelKind.FRIEDRICHS:
            raise InvalidParamsError("sign-flip gauge applies to the rank-two model")
        v = self.couplings.copy()
        for n in flip_indices:
            v[n + self.half_size] *= -1.0
        return replace(self, couplings=v)


def _coupling_sigma(params: SpectralParams, delta_e: np.ndarray) -> np.ndarray:
    """Root of the discretized variance profile C~(dE)/(2 pi rho)."""
    var = np.asarray(spectral_function(params, delta_e)) / (2.0 * np.pi * params.rho)
    return np.sqrt(var)


def _stream_uniforms(seed: int, offset: int, n_lo: int, n_hi: int) -> np.ndarray:
    """Open-(0,1) uniforms for stream `offset`, level indices n_lo..n_hi.

    Word position (offset*STRIDE + n + BIAS) in a single Philox stream keyed
    by the realization seed; Philox counter blocks hold 4 words each.
    """
    base = offset * _OFFSET_STRIDE + _POS_BIAS
    p_lo, p_hi = base + n_lo, base + n_hi
    blk_lo, blk_hi = p_lo // 4, p_hi // 4
    bg = np.random.Philox(key=seed, counter=[blk_lo, 0, 0, 0])
    words = bg.random_raw(4 * (blk_hi - blk_lo + 1))
    words = words[p_lo - 4 * blk_lo : p_lo - 4 * blk_lo + (n_hi - n_lo + 1)]
    return (words >> np.uint64(11)) * 2.0**-53 + 2.0**-54


def _jittered_energies(params, half_size, seed, jitter):
    n = np.arange(-half_size, half_size + 1, dtype=float)
    energies = n / params.rho
    if jitter > 0.0:
        u = _stream_uniforms(seed, 0, -half_size, half_size)
        energies = energies + jitter * (u - 0.5) / params.rho
    return energies


def build_fm(
    params: SpectralParams,
    half_size: int,
    seed: int = 0,
    jitter: float = 0.0,
) -> Realization:
    """Rank-two realization: level 0 coupled to every level within the band.

    Coupling magnitudes are the deterministic square roots of the variance
    profile; phases are gauged away, so they are taken real positive.
    """
    band = params.bandwidth
    if half_size < band:
        raise InvalidParamsError(
            f"half_size {half_size} smaller than the bandwidth {band}"
        )
    energies = _jittered_energies(params, half_size, seed, jitter)
    n = np.arange(-half_size, half_size + 1)
    v = np.zeros(2 * half_size + 1)
    inside = (n != 0) & (np.abs(n) <= band)
    v[inside] = _coupling_sigma(params, energies[inside])
    return Realization(
        kind=ModelKind.FRIEDRICHS,
        params=params,
        half_size=half_size,
        band=band,
        seed=int(seed),
        energies=energies,
        couplings=v,
    )


def build_wm(
    params: SpectralParams,
    half_size: int,
    seed: int,
    distribution: str = "gaussian",
    jitter: float = 0.0,
) -> Realization:
    """Banded random realization with the spectrum-matched variance profile.

    Entries V_{n,m} for 0 < |n-m| <= b are independent, zero-mean, with
    variance C~(E_n - E_m)/(2 pi rho); the V diagonal is zero (the profile
    is singular at zero frequency for s < 1, and diagonal disorder would
    corrupt the picket-fence density of states).  `distribution` may be
    "gaussian" or "bernoulli" (+/- one standard deviation) to probe
    insensitivity to the entry law.
    """
    band = params.bandwidth
    if half_size < band:
        raise InvalidParamsError(
            f"half_size {half_size} smaller than the bandwidth {band}"
        )
    if distribution not in ("gaussian", "bernoulli"):
        raise InvalidParamsError(f"unknown entry distribution {distribution!r}")
    energies = _jittered_energies(params, half_size, seed, jitter)
    size = 2 * half_size + 1
    bandmat = np.zeros((band + 1, size))
    for d in range(1, band + 1):
        # row n of offset d is the pair (n, n+d); rows run n = -M .. M-d
        n_hi = half_size - d
        u = _stream_uniforms(seed, d, -half_size, n_hi)
        sigma = _coupling_sigma(params, d / params.rho)
        if distribution == "gaussian":
            vals = ndtri(u) * sigma
        else:
            vals = np.where(u < 0.5, -sigma, sigma)
        bandmat[d, : size - d] = vals
    return Realization(
        kind=ModelKind.WIGNER,
        params=params,
        half_size=half_size,
        band=band,
        seed=int(seed),
        energies=energies,
        couplings=bandmat,
    )


def dense_hamiltonian(realization: Realization) -> np.ndarray:
    """Full symmetric matrix H = diag(E) + V (for the dense eigensolver)."""
    n = realization.size
    h = np.zeros((n, n))
    np.fill_diagonal(h, realization.energies)
    if realization.kind is ModelKind.FRIEDRICHS:
        c = realization.center
        h[:, c] += realization.couplings
        h[c, :] += realization.couplings
    else:
        for d in range(1, realization.band + 1):
            row = realization.couplings[d, : n - d]
            idx = np.arange(n - d)
            h[idx, idx + d] = row
            h[idx + d, idx] = row
    return h


# --- binary container --------------------------------------------------------
#
# magic | u32 version | u32 header length | JSON header | payload
# payload: little-endian float64, energies then couplings in band-major order.

_MAGIC = b"QDRZ"
_VERSION = 1


def save_realization(path, realization: Realization) -> None:
    p = realization.params
    header = {
        "kind": realization.kind.value,
        "s": p.s,
        "epsilon": p.epsilon,
        "omega_c": p.omega_c,
        "rho": p.rho,
        "cutoff": p.cutoff.value,
        "half_size": realization.half_size,
        "band": realization.band,
        "size": realization.size,
        "seed": realization.seed,
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(blob)))
        fh.write(blob)
        fh.write(realization.energies.astype("<f8").tobytes())
        fh.write(np.ascontiguousarray(realization.couplings).astype("<f8").tobytes())


def load_realization(path) -> Realization:
    data = Path(path).read_bytes()
    if data[:4] != _MAGIC:
        raise InvalidParamsError(f"{path}: not a realization container")
    version, hlen = struct.unpack("<II", data[4:12])
    if version != _VERSION:
        raise InvalidParamsError(f"{path}: unsupported container version {version}")
    header = json.loads(data[12 : 12 + hlen].decode())
    params = SpectralParams(
        s=header["s"],
        epsilon=header["epsilon"],
        omega_c=header["omega_c"],
        rho=header["rho"],
        cutoff=CutoffKind(header["cutoff"]),
    )
    kind = ModelKind(header["kind"])
    size = header["size"]
    band = header["band"]
    body = np.frombuffer(data[12 + hlen :], dtype="<f8")
    energies = body[:size].copy()
    if kind is ModelKind.FRIEDRICHS:
        couplings = body[size : 2 * size].copy()
    else:
        couplings = body[size : size + (band + 1) * size].reshape(band + 1, size).copy()
    return Realization(
        kind=kind,
        params=params,
        half_size=header["half_size"],
        band=band,
        seed=header["seed"],
        energies=energies,
        couplings=couplings,
    )
