"""Polarization analyzers (QWP -> HWP -> PBS -> detectors) and seeded
Poissonian coincidence counting.

Jones conventions
-----------------
A waveplate with fast axis at angle ``t`` from horizontal and retardance
``d`` acts as ``R(t) diag(1, e^{i d}) R(-t)`` with ``R`` the 2x2 rotation.
Light meets the QWP first, then the HWP, and the PBS transmits |H> to the
counted detector. An analyzer setting therefore projects onto
``U^dagger |H>`` where ``U = HWP @ QWP``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FixtureFormatError
from .quantum_core import (
    KET_H,
    BlochVector,
    MeasurementBasis,
    bloch_from_ket,
    check_density_matrix,
    ket_from_bloch,
    outcome_probabilities,
)

MIN_SCAN_POINTS = 8
COUNT_COLUMNS = (
    "setting_a",
    "setting_b",
    "c_ab",
    "c_aperp_b",
    "c_a_bperp",
    "c_aperp_bperp",
    "duration_s",
    "seed",
)


def _rotation(t):
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, -s], [s, c]], dtype=complex)


def retarder_jones(angle, retardance):
    return _rotation(angle) @ np.diag([1.0, np.exp(1j * retardance)]) @ _rotation(-angle)


def qwp_jones(angle):
    return retarder_jones(angle, math.pi / 2)


def hwp_jones(angle):
    return retarder_jones(angle, math.pi)


@dataclass(frozen=True)
class AnalyzerSetting:
    """Fast-axis angles (rad, from horizontal), reduced to [0, pi)."""

    qwp_angle: float
    hwp_angle: float

    def __post_init__(self):
        object.__setattr__(self, "qwp_angle", _reduce(self.qwp_angle))
        object.__setattr__(self, "hwp_angle", _reduce(self.hwp_angle))

    def jones(self):
        return hwp_jones(self.hwp_angle) @ qwp_jones(self.qwp_angle)


def _reduce(angle):
    a = math.fmod(float(angle), math.pi)
    if a < 0:
        a += math.pi
    # fold values that round to pi back onto 0
    if math.pi - a < 1e-15:
        a = 0.0
    return a


def bloch_from_waveplates(setting):
    """Bloch vector of the polarization an analyzer setting sends to the counted port."""
    psi = setting.jones().conj().T @ KET_H
    return bloch_from_ket(psi)


def waveplate_angles(target):
    """QWP/HWP angles that route the polarization ``target`` to the |H> port.

    The QWP fast axis is put on the major axis of the polarization ellipse,
    which turns it into linear polarization; the HWP then rotates that onto
    horizontal.
    """
    n = target.as_array() if isinstance(target, BlochVector) else np.asarray(target, float)
    x, _, z = n
    # Stokes orientation: S1 <-> z, S2 <-> x in this Bloch convention
    qwp = 0.5 * math.atan2(x, z)
    psi = qwp_jones(qwp) @ ket_from_bloch(n)
    # remove the global phase so the now-linear state has real components
    k = int(np.argmax(np.abs(psi)))
    psi = psi * np.exp(-1j * np.angle(psi[k]))
    alpha = math.atan2(psi[1].real, psi[0].real)
    return AnalyzerSetting(qwp, alpha / 2)


@dataclass(frozen=True)
class DetectorConfig:
    """Detector figures. ``dark_rate_A`` is informational; Si darks are part of
    ``singles_rate_A``, which is what accidentals are computed from."""

    singles_rate_A: float = 20e3  # Hz
    dark_rate_A: float = 40.0  # Hz
    dark_prob_B_per_ns: float = 5e-5  # 1/ns
    coincidence_window: float = 1.0  # ns
    efficiency_product: float = 1.0

    def __post_init__(self):
        for name in ("singles_rate_A", "dark_rate_A", "dark_prob_B_per_ns"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not self.coincidence_window > 0:
            raise ValueError("coincidence_window must be positive")
        if not 0 < self.efficiency_product <= 1:
            raise ValueError("efficiency_product must lie in (0, 1]")

    @property
    def accidental_rate(self):
        """Total accidental-coincidence rate (Hz) summed over the four outcomes."""
        return self.singles_rate_A * self.dark_prob_B_per_ns * self.coincidence_window

    def accidental_mean(self, duration):
        """Mean accidentals per outcome channel over ``duration`` seconds."""
        return self.accidental_rate * duration / 4


NOISELESS_DETECTORS = DetectorConfig(singles_rate_A=0.0, dark_rate_A=0.0, dark_prob_B_per_ns=0.0)


@dataclass(frozen=True)
class CountRecord:
    """Coincidence counts for one pair of analyzer bases.

    Counts are integers for sampled data; in exact (infinite-statistics) mode
    they hold the Poisson means as floats.
    """

    c_ab: float
    c_aperp_b: float
    c_a_bperp: float
    c_aperp_bperp: float
    duration: float
    setting_a: str = ""
    setting_b: str = ""
    seed: object = None

    def __post_init__(self):
        if min(self.counts) < 0:
            raise ValueError("counts must be non-negative")
        if not self.duration > 0:
            raise ValueError("duration must be positive")

    @property
    def counts(self):
        return (self.c_ab, self.c_aperp_b, self.c_a_bperp, self.c_aperp_bperp)

    @property
    def total(self):
        return sum(self.counts)


def derive_seed(seed, index):
    """Independent stream for task ``index`` of a run seeded with ``seed``."""
    if seed is None:
        return None
    base = list(seed) if isinstance(seed, (tuple, list)) else [int(seed)]
    return [*base, int(index)]


def _seed_label(seed):
    if seed is None:
        return ""
    if isinstance(seed, (tuple, list)):
        return ":".join(str(s) for s in seed)
    return str(seed)


def _basis_vec(b):
    if isinstance(b, MeasurementBasis):
        return b.plus.as_array()
    if isinstance(b, BlochVector):
        return b.as_array()
    return np.asarray(b, dtype=float)


def _label(b):
    return b.label if isinstance(b, MeasurementBasis) else ""


def expected_count_means(rho, a, b, det, duration, pair_rate):
    """Poisson means of the four outcome channels, in CountRecord order."""
    if not duration > 0:
        raise ValueError("duration must be positive")
    if pair_rate < 0:
        raise ValueError("pair_rate must be non-negative")
    probs = outcome_probabilities(check_density_matrix(rho), _basis_vec(a), _basis_vec(b))
    signal = pair_rate * det.efficiency_product * duration
    acc = det.accidental_mean(duration)
    return tuple(signal * p + acc for p in probs)


def simulate_counts(rho, a, b, det, duration, seed, pair_rate=500.0, exact=False):
    """Draw the four coincidence counts for bases ``a`` (analyzer A) and ``b``.

    Each channel is an independent Poisson variable with mean
    ``pair_rate * efficiency * p * duration`` plus a quarter of the accidental
    coincidences. ``exact=True`` skips sampling and returns the means.
    """
    means = expected_count_means(rho, a, b, det, duration, pair_rate)
    if exact:
        counts = means
    else:
        rng = np.random.default_rng(seed)
        counts = tuple(int(c) for c in rng.poisson(means))
    return CountRecord(*counts, duration=duration, setting_a=_label(a), setting_b=_label(b), seed=seed)


@dataclass(frozen=True)
class GreatCircle:
    """Great circle through orthonormal Bloch vectors ``u`` and ``w``.

    Analyzer angle ``theta`` (polarizer-like, period pi) maps to the Bloch
    vector ``cos(2 theta) u + sin(2 theta) w``.
    """

    u: BlochVector
    w: BlochVector

    def __post_init__(self):
        if abs(float(np.dot(self.u.as_array(), self.w.as_array()))) > 1e-9:
            raise ValueError("great circle needs two orthogonal Bloch vectors")

    def point(self, theta):
        v = math.cos(2 * theta) * self.u.as_array() + math.sin(2 * theta) * self.w.as_array()
        return BlochVector.from_array(v, normalize=True)


# circle containing |H>, |V>, |+>, |->
CIRCLE_LINEAR = GreatCircle(BlochVector(0.0, 0.0, 1.0), BlochVector(1.0, 0.0, 0.0))
# circle containing |+>, |->, |R>, |L>
CIRCLE_EQUATOR = GreatCircle(BlochVector(1.0, 0.0, 0.0), BlochVector(0.0, 1.0, 0.0))


def visibility_scan(
    rho, fixed_a, circle, n_points, det, duration, seed, pair_rate=500.0, exact=False
):
    """Coincidences with analyzer A fixed and analyzer B stepped around ``circle``.

    Returns ``(theta, CountRecord)`` pairs at ``n_points`` equally spaced
    analyzer angles in [0, pi).
    """
    if n_points < MIN_SCAN_POINTS:
        raise ValueError(f"a scan needs at least {MIN_SCAN_POINTS} points")
    a = fixed_a if isinstance(fixed_a, MeasurementBasis) else MeasurementBasis(fixed_a, "A")
    scan = []
    for k, theta in enumerate(np.arange(n_points) * math.pi / n_points):
        b = MeasurementBasis(circle.point(theta), f"theta={theta:.6f}")
        rec = simulate_counts(rho, a, b, det, duration, derive_seed(seed, k), pair_rate, exact)
        scan.append((float(theta), rec))
    return scan


@dataclass(frozen=True)
class VisibilityFit:
    visibility: float
    uncertainty: float
    amplitude: float
    phase_offset: float


def fit_visibility(scan):
    """Fit ``A (1 + V cos(2 (theta - theta0)))`` to a scan.

    ``scan`` holds ``(theta, count)`` pairs, where ``count`` is a number or a
    :class:`CountRecord` (its ``c_ab`` channel is used). The model is linear
    in (A, A V cos 2theta0, A V sin 2theta0), fitted with Poisson weights
    1/max(count, 1); the covariance of those three parameters gives the
    uncertainty on V.
    """
    if len(scan) < MIN_SCAN_POINTS:
        raise ValueError(f"a visibility fit needs at least {MIN_SCAN_POINTS} points")
    theta = np.array([float(t) for t, _ in scan])
    y = np.array([float(c.c_ab if isinstance(c, CountRecord) else c) for _, c in scan])
    X = np.column_stack([np.ones_like(theta), np.cos(2 * theta), np.sin(2 * theta)])
    w = 1.0 / np.maximum(y, 1.0)
    xtwx = X.T @ (w[:, None] * X)
    try:
        cov = np.linalg.inv(xtwx)
    except np.linalg.LinAlgError:
        return VisibilityFit(0.0, math.inf, 0.0, 0.0)
    A, B, C = cov @ (X.T @ (w * y))
    if not A > 0:
        return VisibilityFit(0.0, math.inf, float(A), 0.0)
    r = math.hypot(B, C)
    if r < 1e-12 * A:
        dv = math.sqrt(cov[1, 1] + cov[2, 2]) / A
        return VisibilityFit(0.0, dv, float(A), 0.0)
    vis = r / A
    grad = np.array([-vis / A, B / (A * r), C / (A * r)])
    dv = math.sqrt(max(grad @ cov @ grad, 0.0))
    return VisibilityFit(float(min(vis, 1.0)), dv, float(A), 0.5 * math.atan2(C, B))


def write_count_records(records, path):
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(COUNT_COLUMNS)
        for r in records:
            wr.writerow(
                [r.setting_a, r.setting_b, *(_fmt_count(c) for c in r.counts), repr(float(r.duration)), _seed_label(r.seed)]
            )


def _fmt_count(c):
    if isinstance(c, (int, np.integer)):
        return str(int(c))
    return repr(float(c))


def _parse_count(text):
    try:
        return int(text)
    except ValueError:
        return float(text)


def read_count_records(path):
    """Read an analyzer CSV (see ``COUNT_COLUMNS``) into CountRecords."""
    path = Path(path)
    records = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise FixtureFormatError("empty file", path, 1)
        header = [h.strip() for h in header]
        missing = [c for c in COUNT_COLUMNS[:7] if c not in header]
        if missing:
            raise FixtureFormatError(f"missing columns {missing}", path, 1)
        idx = {name: header.index(name) for name in header}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                counts = [_parse_count(row[idx[c]]) for c in COUNT_COLUMNS[2:6]]
                duration = float(row[idx["duration_s"]])
                seed = row[idx["seed"]] if "seed" in idx and idx["seed"] < len(row) else ""
                records.append(
                    CountRecord(
                        *counts,
                        duration=duration,
                        setting_a=row[idx["setting_a"]].strip(),
                        setting_b=row[idx["setting_b"]].strip(),
                        seed=seed or None,
                    )
                )
            except (ValueError, IndexError) as exc:
                raise FixtureFormatError(str(exc), path, lineno) from None
    return records

