"""Wave scattering by clusters of subwavelength resonant particles.

Point-scatterer (Foldy-Lax) solves with Born-series ladders, resonance
formulas (dielectric, Minnaert, plasmonic), and a dense Lippmann-Schwinger
volume-integral reference solver for validating the scaling laws.
"""

from .config import (
    Background,
    ClusterConfig,
    ConfigError,
    ContrastParams,
    IncidentWave,
    ReferenceShape,
    Regime,
    SpacingLaw,
    derive_contrasts,
    parse_config,
    serialize,
)
from .foldylax import (
    FoldyLaxSystem,
    assemble,
    check_invertibility,
    interaction_ladder,
    q_from_volume_integral,
    scattered_field,
    solve_born,
    solve_direct,
)
from .oracle import apriori_diagnostics, oracle_scattered_field, solve_lse
from .spectral import (
    SpectralData,
    assemble_newtonian,
    dielectric_resonances,
    eigensystem,
    minnaert_resonance,
    plasmonic_resonances,
    realize_wavenumber,
    scattering_function_w,
)
from .sweeps import SlopeFit, fit_slope, run_sweep

__version__ = "0.1.0"
