"""Two-crystal Sagnac source: crystal signal spectra, spectral overlap and the
emitted two-qubit state.

The emitted state is modelled as

    rho = v * rho_O(phase) + (1 - v) * I/4

where ``rho_O`` is the Bell state (|HH> + e^{i phase}|VV>)/sqrt(2) with its
coherence damped by the spectral overlap ``O`` of the two crystals, and ``v``
is a white-noise (Werner) weight lumping every other imperfection.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import FixtureFormatError, NormalizationError, TruncationError
from .quantum_core import check_density_matrix

FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
NORM_TOL = 1e-6
DEFAULT_STEP_NM = 0.01
DEFAULT_HALF_SPAN_FWHM = 5.0
MIN_HALF_SPAN_FWHM = 4.0

# temperature of the VV crystal oven throughout the tangle sweep
VV_TEMPERATURE_C = 165.70
# HH crystal temperatures of the measured density-matrix series
HH_SWEEP_TEMPERATURES_C = (163.70, 164.20, 164.70, 165.20, 165.70, 166.20, 166.70)


@dataclass(frozen=True)
class SpectralDensity:
    """Sampled spectrum on a strictly increasing wavelength grid (nm)."""

    wavelengths: np.ndarray
    density: np.ndarray

    def __post_init__(self):
        wl = np.asarray(self.wavelengths, dtype=float)
        dens = np.asarray(self.density, dtype=float)
        if wl.ndim != 1 or wl.shape != dens.shape:
            raise ValueError("wavelengths and density must be 1-D arrays of equal length")
        if wl.size < 2:
            raise ValueError("a spectrum needs at least two samples")
        if np.any(np.diff(wl) <= 0):
            raise ValueError("wavelengths must be strictly increasing")
        if np.any(dens < 0) or not np.all(np.isfinite(dens)):
            raise ValueError("spectral densities must be finite and non-negative")
        object.__setattr__(self, "wavelengths", wl)
        object.__setattr__(self, "density", dens)

    def area(self):
        return float(np.trapezoid(self.density, self.wavelengths))

    def normalized(self):
        a = self.area()
        if a <= 0:
            raise NormalizationError("spectrum has zero area")
        return SpectralDensity(self.wavelengths, self.density / a)

    def is_normalized(self, tol=NORM_TOL):
        return abs(self.area() - 1.0) <= tol

    def peak_wavelength(self):
        return float(self.wavelengths[np.argmax(self.density)])

    def mean_wavelength(self):
        return float(np.trapezoid(self.wavelengths * self.density, self.wavelengths) / self.area())

    def shifted(self, delta_nm):
        return SpectralDensity(self.wavelengths + delta_nm, self.density)


@dataclass(frozen=True)
class CrystalConfig:
    """Phenomenological PPLN crystal: Gaussian signal spectrum whose centre
    moves linearly with oven temperature."""

    center_wavelength_ref: float = 810.0  # nm
    temp_ref: float = VV_TEMPERATURE_C  # degC
    dlambda_dT: float = 0.20  # nm / degC
    fwhm: float = 0.30  # nm
    role: str = "VV"

    def __post_init__(self):
        if not self.fwhm > 0:
            raise ValueError("fwhm must be positive")
        if not math.isfinite(self.dlambda_dT):
            raise ValueError("dlambda_dT must be finite")
        if self.role not in ("HH", "VV"):
            raise ValueError("role must be 'HH' or 'VV'")

    @property
    def sigma(self):
        return self.fwhm * FWHM_TO_SIGMA

    def center_at(self, temperature):
        return self.center_wavelength_ref + self.dlambda_dT * (temperature - self.temp_ref)


@dataclass(frozen=True)
class SourceConfig:
    phase: float = 0.0  # rad
    overlap: float = 1.0
    purity_weight: float = 1.0
    pair_rate: float = 500.0  # Hz

    def __post_init__(self):
        if not math.isfinite(self.phase):
            raise ValueError("phase must be finite")
        if not 0.0 <= self.overlap <= 1.0:
            raise ValueError(f"overlap {self.overlap} outside [0, 1]")
        if not 0.0 <= self.purity_weight <= 1.0:
            raise ValueError(f"purity_weight {self.purity_weight} outside [0, 1]")
        if not self.pair_rate >= 0:
            raise ValueError("pair_rate must be non-negative")


def wavelength_grid(start, stop, step=DEFAULT_STEP_NM):
    """Inclusive uniform grid; endpoints snapped to multiples of ``step``."""
    if step <= 0 or stop <= start:
        raise ValueError("grid needs step > 0 and stop > start")
    i0 = math.floor(start / step + 1e-9)
    i1 = math.ceil(stop / step - 1e-9)
    return np.round(np.arange(i0, i1 + 1) * step, 9)


def default_grid(crystal, temperature, step=DEFAULT_STEP_NM):
    c = crystal.center_at(temperature)
    half = DEFAULT_HALF_SPAN_FWHM * crystal.fwhm
    return wavelength_grid(c - half, c + half, step)


def _as_grid(grid):
    if isinstance(grid, tuple) and len(grid) in (2, 3):
        return wavelength_grid(*grid)
    return np.asarray(grid, dtype=float)


def gaussian_density(wavelengths, center, sigma):
    return np.exp(-0.5 * ((wavelengths - center) / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))


def signal_spectrum(crystal, temperature, grid=None):
    """Normalized signal spectrum of ``crystal`` at oven ``temperature`` (degC).

    ``grid`` is an array of wavelengths or a ``(start, stop[, step])`` tuple in
    nm; by default +-5 FWHM around the shifted centre at 0.01 nm.
    """
    center = crystal.center_at(temperature)
    wl = default_grid(crystal, temperature) if grid is None else _as_grid(grid)
    lo = center - MIN_HALF_SPAN_FWHM * crystal.fwhm
    hi = center + MIN_HALF_SPAN_FWHM * crystal.fwhm
    if wl[0] > lo + 1e-9 or wl[-1] < hi - 1e-9:
        raise TruncationError(
            f"grid [{wl[0]:.3f}, {wl[-1]:.3f}] nm does not span +-4 FWHM around {center:.3f} nm"
        )
    dens = gaussian_density(wl, center, crystal.sigma)
    raw = float(np.trapezoid(dens, wl))
    if raw < 0.999:
        raise TruncationError(f"grid captures only {raw:.4f} of the spectrum")
    return SpectralDensity(wl, dens).normalized()


def spectral_overlap(s1, s2):
    """Overlap integral of sqrt(S1) sqrt(S2) for two unit-area spectra.

    Both spectra are linearly interpolated onto the union of their grids and
    taken as zero outside their own support.
    """
    for name, s in (("first", s1), ("second", s2)):
        if not s.is_normalized():
            raise NormalizationError(f"{name} spectrum has area {s.area():.8f}, expected 1")
    grid = np.unique(np.round(np.concatenate([s1.wavelengths, s2.wavelengths]), 9))
    d1 = np.interp(grid, s1.wavelengths, s1.density, left=0.0, right=0.0)
    d2 = np.interp(grid, s2.wavelengths, s2.density, left=0.0, right=0.0)
    o = float(np.trapezoid(np.sqrt(d1 * d2), grid))
    return float(np.clip(o, 0.0, 1.0))


def overlap_from_temperatures(hh_crystal, vv_crystal, hh_temp, vv_temp=VV_TEMPERATURE_C):
    return spectral_overlap(
        signal_spectrum(hh_crystal, hh_temp), signal_spectrum(vv_crystal, vv_temp)
    )


def source_state(cfg):
    """Density matrix emitted by the source for a :class:`SourceConfig`."""
    v, o, phase = cfg.purity_weight, cfg.overlap, cfg.phase
    rho_o = np.zeros((4, 4), dtype=complex)
    rho_o[0, 0] = rho_o[3, 3] = 0.5
    rho_o[3, 0] = 0.5 * o * np.exp(1j * phase)
    rho_o[0, 3] = 0.5 * o * np.exp(-1j * phase)
    rho = v * rho_o + (1 - v) * np.eye(4) / 4
    return check_density_matrix(rho)


def pair_tangle(overlap, purity_weight):
    """Closed-form tangle of :func:`source_state` (independent of the phase)."""
    if not (0 <= overlap <= 1 and 0 <= purity_weight <= 1):
        raise ValueError("overlap and purity_weight must lie in [0, 1]")
    c = purity_weight * overlap - (1 - purity_weight) / 2
    return max(0.0, c) ** 2


def calibrate_purity_weight(target_tangle, overlap=1.0):
    """White-noise weight giving ``target_tangle`` at the given overlap."""
    if not 0 < target_tangle <= 1:
        raise ValueError("target tangle must lie in (0, 1]")
    v = (math.sqrt(target_tangle) + 0.5) / (overlap + 0.5)
    if v > 1 + 1e-12:
        raise ValueError(
            f"tangle {target_tangle} is unreachable at overlap {overlap} (needs v = {v:.4f})"
        )
    return min(v, 1.0)


@dataclass(frozen=True)
class VisibilityCalibration:
    purity_weight: float
    overlap: float
    v1: float
    v2: float
    tangle: float


def calibrate_to_visibilities(target_tangle, v1=0.991, dv1=0.007, v2=0.974, dv2=0.009):
    """Pick (v, O) on the constant-tangle curve that best matches two fringe
    visibilities.

    In this model the H-analyzer scan has visibility ``v`` and the
    +-analyzer scan in the coherence plane has ``v * O``. The pair is chosen by
    weighted least squares with the tangle held at ``target_tangle``.
    """
    c = math.sqrt(target_tangle)
    # v * O = c + (1 - v)/2 must not exceed v, so v >= (2c + 1)/3
    v_min = (2 * c + 1) / 3

    def cost(v):
        vis2 = c + (1 - v) / 2
        return ((v - v1) / dv1) ** 2 + ((vis2 - v2) / dv2) ** 2

    res = minimize_scalar(cost, bounds=(v_min, 1.0), method="bounded", options={"xatol": 1e-12})
    v = float(res.x)
    o = min(1.0, (c + (1 - v) / 2) / v)
    return VisibilityCalibration(v, o, v, v * o, pair_tangle(o, v))


def load_spectrum_csv(path):
    """Read a two-column ``wavelength_nm,counts`` CSV and normalize it to unit area.

    A header row is optional. Rows may come in any order; duplicate
    wavelengths are an error.
    """
    path = Path(path)
    rows = []
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row) or row[0].lstrip().startswith("#"):
                continue
            if len(row) < 2:
                raise FixtureFormatError("expected two columns", path, lineno)
            try:
                wl, counts = float(row[0]), float(row[1])
            except ValueError:
                if not rows and lineno == 1:
                    continue  # header
                raise FixtureFormatError(f"non-numeric value in {row!r}", path, lineno) from None
            if counts < 0 or not (math.isfinite(wl) and math.isfinite(counts)):
                raise FixtureFormatError("counts must be finite and non-negative", path, lineno)
            rows.append((wl, counts, lineno))
    if len(rows) < 2:
        raise FixtureFormatError("spectrum file has fewer than two samples", path)
    rows.sort()
    for (w0, _, _), (w1, _, ln) in zip(rows, rows[1:]):
        if w1 == w0:
            raise FixtureFormatError(f"duplicate wavelength {w1}", path, ln)
    wl = np.array([r[0] for r in rows])
    counts = np.array([r[1] for r in rows])
    return SpectralDensity(wl, counts).normalized()


def save_spectrum_csv(spectrum, path):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["wavelength_nm", "counts"])
        for wl, d in zip(spectrum.wavelengths, spectrum.density):
            w.writerow([f"{wl:.6f}", f"{d:.10g}"])
