"""Decay of a prepared state into a non-flat continuum: models and theory."""

__version__ = "0.1.0"

from .spectral import (  # noqa: F401
    CutoffKind,
    SpectralParams,
    TimeScales,
    correlation_function,
    core_border_gamma0,
    level_shift_delta,
    perturbative_weight_p0,
    semicircle_width,
    spectral_function,
    wigner_time,
)
from .ensemble import (  # noqa: F401
    ModelKind,
    Realization,
    build_fm,
    build_wm,
    derive_realization_seed,
    load_realization,
    save_realization,
)
from .propagate import (  # noqa: F401
    PropagationTolerances,
    ReducedAmplitude,
    WavepacketState,
    fm_reduced_solve,
    propagate,
)
from .spectra import (  # noqa: F401
    EigenPairs,
    LdosHistogram,
    diagonalize_ldos,
    eigenpairs,
    evolve_by_diagonalization,
    survival_from_ldos,
)
from .theory import (  # noqa: F401
    DecayLaw,
    DecayRegime,
    decay_law,
    fm_crossover_time,
    fm_exact_spread,
    fm_ldos_analytic,
    lrt_spread,
    survival_fm_powerlaw,
    survival_fm_s2_loglaw,
    survival_partial_decay,
    survival_wm_stretched,
)
from .observables import EnsembleSeries, build_series  # noqa: F401
from .analysis import (  # noqa: F401
    fit_powerlaw_tail,
    fit_stretched_exponent,
    extract_departure_and_saturation,
    scaling_collapse,
)
