"""Simulator and analysis toolkit for a Sagnac-loop polarization-entangled photon source.

Modules:

- ``quantum_core``: two-qubit states, Bloch-sphere measurements, concurrence and tangle
- ``source_model``: crystal spectra, spectral overlap and the dephasing/white-noise state
- ``analyzer``: waveplate analyzers, detector noise and Poisson coincidence counts
- ``tomography``: maximum-likelihood two-qubit state tomography
- ``inequalities``: CHSH, (2,3) beautiful Bell and Leggett tests
- ``experiments`` / ``cli``: end-to-end recipes and the ``sagnacsim`` command
"""
from .quantum_core import (
    AXES,
    PHI_PLUS,
    BlochVector,
    MeasurementBasis,
    concurrence,
    correlation_expectation,
    density_from_ket,
    fidelity,
    tangle,
)
from .source_model import CrystalConfig, SourceConfig, pair_tangle, source_state, spectral_overlap
from .tomography import mle_reconstruct
from .inequalities import chsh_S, bb_S, leggett_L3, leggett_bound, s_max_from_tangle

__version__ = "0.1.0"

__all__ = [
    "AXES", "PHI_PLUS", "BlochVector", "MeasurementBasis", "concurrence", "correlation_expectation",
    "density_from_ket", "fidelity", "tangle", "CrystalConfig", "SourceConfig", "pair_tangle",
    "source_state", "spectral_overlap", "mle_reconstruct", "chsh_S", "bb_S", "leggett_L3",
    "leggett_bound", "s_max_from_tangle",
]
