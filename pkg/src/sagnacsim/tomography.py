"""Maximum-likelihood two-qubit state tomography.

States are parameterized as rho(t) = T^dagger T / Tr(T^dagger T) with T a
lower-triangular complex 4x4 matrix built from 16 real numbers, so every
parameter vector gives a physical state. The Poisson negative
log-likelihood

    l(t) = sum_k ( m_k - n_k ln m_k ),   m_k = exposure_k * Tr[rho(t) P_k]

is minimized with L-BFGS using an analytic gradient, from two starting
points (the maximally mixed state and a linear-inversion estimate).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .analyzer import derive_seed, simulate_counts
from .quantum_core import (
    AXES,
    PAULI,
    I2,
    MeasurementBasis,
    check_density_matrix,
    nearest_physical,
    projector_from_bloch,
    tangle,
    tensor_product,
)
from .source_model import (
    VV_TEMPERATURE_C,
    CrystalConfig,
    SourceConfig,
    overlap_from_temperatures,
    pair_tangle,
    source_state,
)

STATE_ORDER = ("H", "V", "+", "-", "R", "L")
MEAN_FLOOR = 1e-12
N_PARAMS = 16
# (row, col) of the strictly lower entries of T, in parameter order
_LOWER = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)]
# which Pauli basis measures each analyzer state, and whether it is the "+" outcome
_STATE_BASIS = {"H": ("Z", 0), "V": ("Z", 1), "+": ("X", 0), "-": ("X", 1), "R": ("Y", 0), "L": ("Y", 1)}
_BASIS_PLUS = {"Z": "H", "X": "+", "Y": "R", "H": "H", "+": "+", "R": "R"}


@dataclass(frozen=True)
class TomographySettings:
    """Ordered projector pairs; ``labels[k]`` names the states of pair ``k``."""

    labels: tuple
    pairs: tuple

    def __post_init__(self):
        if len(self.labels) != len(self.pairs):
            raise ValueError("labels and pairs differ in length")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("tomography settings must be distinct")

    def __len__(self):
        return len(self.pairs)

    def index(self, label_a, label_b):
        return self.labels.index((label_a, label_b))

    def projectors(self):
        """Stack of two-qubit projectors, shape (n, 4, 4)."""
        return np.array(
            [tensor_product(projector_from_bloch(a), projector_from_bloch(b)) for a, b in self.pairs]
        )


def standard_settings_36():
    """All 36 pairs of {H, V, +, -, R, L}, A-major: (H,H), (H,V), ..., (L,L)."""
    labels = tuple((a, b) for a in STATE_ORDER for b in STATE_ORDER)
    pairs = tuple((AXES[a], AXES[b]) for a, b in labels)
    return TomographySettings(labels, pairs)


@dataclass(frozen=True)
class TomographyData:
    """Observed counts, one per setting, with their integration times (s)."""

    counts: np.ndarray
    durations: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=float)
        durations = np.broadcast_to(np.asarray(self.durations, dtype=float), counts.shape).copy()
        if counts.ndim != 1:
            raise ValueError("counts must be one-dimensional")
        if np.any(counts < 0) or not np.all(np.isfinite(counts)):
            raise ValueError("counts must be finite and non-negative")
        if np.any(durations <= 0):
            raise ValueError("durations must be positive")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "durations", durations)

    @classmethod
    def from_records(cls, records, n_settings=36):
        """From ``(setting_index, count, duration)`` triples."""
        counts = np.full(n_settings, np.nan)
        durations = np.full(n_settings, np.nan)
        for k, n, d in records:
            if not np.isnan(counts[k]):
                raise ValueError(f"setting {k} appears twice")
            counts[k], durations[k] = n, d
        if np.isnan(counts).any():
            missing = np.flatnonzero(np.isnan(counts)).tolist()
            raise ValueError(f"no data for settings {missing}")
        return cls(counts, durations)

    def records(self):
        return [(k, self.counts[k], self.durations[k]) for k in range(len(self.counts))]


def tomography_data_from_count_records(records, settings=None):
    """Build 36-setting data from nine basis-pair CountRecords.

    Each record's labels name the basis on each side, either as Z/X/Y or by
    its "+" state H/+/R. The four counts of a record fill the four projector
    pairs (a, b), (a_perp, b), (a, b_perp), (a_perp, b_perp).
    """
    settings = settings or standard_settings_36()
    perp = {"H": "V", "+": "-", "R": "L"}
    out = []
    for rec in records:
        try:
            a, b = _BASIS_PLUS[rec.setting_a], _BASIS_PLUS[rec.setting_b]
        except KeyError:
            raise ValueError(
                f"record labels ({rec.setting_a!r}, {rec.setting_b!r}) are not Pauli bases"
            ) from None
        for (sa, sb), n in zip(
            ((a, b), (perp[a], b), (a, perp[b]), (perp[a], perp[b])), rec.counts
        ):
            out.append((settings.index(sa, sb), n, rec.duration))
    return TomographyData.from_records(out, len(settings))


def expected_counts(rho, settings, exposure):
    """Mean counts ``exposure * Tr[rho P_k]`` for every setting."""
    rho = check_density_matrix(rho)
    probs = np.einsum("kij,ji->k", settings.projectors(), rho).real
    return np.asarray(exposure, dtype=float) * np.clip(probs, 0.0, None)


def params_to_T(t):
    t = np.asarray(t, dtype=float)
    if t.shape != (N_PARAMS,):
        raise ValueError(f"expected {N_PARAMS} parameters, got shape {t.shape}")
    T = np.zeros((4, 4), dtype=complex)
    T[np.diag_indices(4)] = t[:4]
    for k, (i, j) in enumerate(_LOWER):
        T[i, j] = t[4 + 2 * k] + 1j * t[5 + 2 * k]
    return T


def rho_from_params(t):
    T = params_to_T(t)
    A = T.conj().T @ T
    return A / np.trace(A).real


def params_from_rho(rho, eps=1e-6):
    """Parameters whose state is ``rho`` (mixed with ``eps`` of I/4 so T exists).

    ``rho = T^dagger T`` with lower-triangular T comes from the Cholesky factor
    of ``rho`` with its basis order reversed.
    """
    rho = (1 - eps) * np.asarray(rho, dtype=complex) + eps * np.eye(4) / 4
    rho = 0.5 * (rho + rho.conj().T)
    J = np.eye(4)[::-1]
    L = np.linalg.cholesky(J @ rho @ J)
    T = J @ L.conj().T @ J
    t = np.empty(N_PARAMS)
    t[:4] = np.diag(T).real
    for k, (i, j) in enumerate(_LOWER):
        t[4 + 2 * k] = T[i, j].real
        t[5 + 2 * k] = T[i, j].imag
    return t


def _nll_and_grad(t, projectors, counts, exposure):
    T = params_to_T(t)
    A = T.conj().T @ T
    tau = np.trace(A).real
    rho = A / tau
    p = np.einsum("kij,ji->k", projectors, rho).real
    m = np.maximum(exposure * p, MEAN_FLOOR)
    nll = float(np.sum(m - counts * np.log(m)))
    # d l / d p_k, with the floor treated as inactive
    w = exposure - counts * exposure / m
    G = np.einsum("k,kij->ij", w, projectors)
    Gp = G - np.trace(G @ rho).real * np.eye(4)
    M = Gp @ T.conj().T
    grad = np.empty(N_PARAMS)
    grad[:4] = (2 / tau) * np.diag(M).real
    for k, (i, j) in enumerate(_LOWER):
        grad[4 + 2 * k] = (2 / tau) * M[j, i].real
        grad[5 + 2 * k] = -(2 / tau) * M[j, i].imag
    return nll, grad


def neg_log_likelihood(params, data, exposure, settings=None, with_grad=False):
    """Poisson negative log-likelihood, constants dropped.

    ``exposure`` is the expected number of pairs per setting (scalar or one per
    setting). With ``with_grad`` the analytic gradient is returned as well.
    """
    settings = settings or standard_settings_36()
    exposure = np.broadcast_to(np.asarray(exposure, dtype=float), data.counts.shape)
    if np.any(exposure <= 0):
        raise ValueError("exposure must be positive")
    nll, grad = _nll_and_grad(params, settings.projectors(), data.counts, exposure)
    return (nll, grad) if with_grad else nll


def linear_inversion(data, exposure, settings=None):
    """Least-squares estimate from count frequencies, projected to a physical state."""
    settings = settings or standard_settings_36()
    exposure = np.broadcast_to(np.asarray(exposure, dtype=float), data.counts.shape)
    freqs = data.counts / exposure
    ops = [np.kron(a, b) for a in (I2, *PAULI) for b in (I2, *PAULI)][1:]
    P = settings.projectors()
    # p_k = 1/4 + sum_j r_j Tr[P_k O_j]/4
    X = np.array([[np.trace(Pk @ O).real / 4 for O in ops] for Pk in P])
    r, *_ = np.linalg.lstsq(X, freqs - 0.25 * np.trace(P, axis1=1, axis2=2).real, rcond=None)
    rho = np.eye(4, dtype=complex) / 4 + sum(rj * O for rj, O in zip(r, ops)) / 4
    return nearest_physical(rho)


@dataclass(frozen=True)
class MLEOptions:
    max_iter: int = 3000
    # convergence: |change in l / total counts| below tol for `patience` iterations
    tol: float = 1e-9
    patience: int = 5
    starts: tuple = ("mixed", "linear")


@dataclass(frozen=True)
class ReconstructionResult:
    rho: np.ndarray
    neg_log_likelihood: float
    tangle: float
    iterations: int
    converged: bool
    history: tuple = field(default=(), repr=False)

    def summary(self):
        return (
            f"tangle={self.tangle:.4f} nll={self.neg_log_likelihood:.6f} "
            f"iterations={self.iterations} converged={self.converged}"
        )


def _plateaued(history, tol, patience):
    if len(history) < patience + 1:
        return False
    tail = np.abs(np.diff(history[-(patience + 1):]))
    return bool(np.all(tail < tol))


def mle_reconstruct(data, settings=None, exposure=None, options=None):
    """Maximum-likelihood state for ``data``.

    ``exposure`` defaults to the per-setting totals inferred from the data
    (sum of the four counts of the basis pair the setting belongs to), which is
    exact for complete 36-setting data.
    """
    settings = settings or standard_settings_36()
    options = options or MLEOptions()
    if len(data.counts) != len(settings):
        raise ValueError(f"data has {len(data.counts)} settings, expected {len(settings)}")
    if exposure is None:
        exposure = infer_exposure(data, settings)
    exposure = np.broadcast_to(np.asarray(exposure, dtype=float), data.counts.shape).copy()
    if np.any(exposure <= 0):
        raise ValueError("exposure must be positive")
    P = settings.projectors()
    scale = max(float(data.counts.sum()), 1.0)

    def fun(t):
        nll, g = _nll_and_grad(t, P, data.counts, exposure)
        return nll / scale, g / scale

    starts = []
    for name in options.starts:
        if name == "mixed":
            starts.append(params_from_rho(np.eye(4) / 4, eps=0.0))
        elif name == "linear":
            starts.append(params_from_rho(linear_inversion(data, exposure, settings), eps=1e-3))
        else:
            raise ValueError(f"unknown start {name!r}")

    best = None
    for t0 in starts:
        history = [fun(t0)[0]]
        res = minimize(
            fun,
            t0,
            jac=True,
            method="L-BFGS-B",
            callback=lambda xk: history.append(fun(xk)[0]),
            options={"maxiter": options.max_iter, "ftol": 1e-15, "gtol": 1e-11, "maxcor": 30},
        )
        converged = bool(res.success) or _plateaued(history, options.tol, options.patience)
        cand = (res.fun, res.x, res.nit, converged, tuple(h * scale for h in history))
        if best is None or cand[0] < best[0]:
            best = cand
    f, x, nit, converged, history = best
    rho = rho_from_params(x)
    rho = 0.5 * (rho + rho.conj().T)
    return ReconstructionResult(
        rho=rho,
        neg_log_likelihood=float(f * scale),
        tangle=tangle(rho),
        iterations=int(nit),
        converged=converged,
        history=history,
    )


def infer_exposure(data, settings=None):
    """Per-setting exposure from basis-pair totals of complete Pauli data."""
    settings = settings or standard_settings_36()
    groups = {}
    for k, (sa, sb) in enumerate(settings.labels):
        key = (_STATE_BASIS[sa][0], _STATE_BASIS[sb][0])
        groups.setdefault(key, []).append(k)
    exposure = np.empty(len(settings))
    for idx in groups.values():
        exposure[idx] = max(data.counts[idx].sum(), 1.0)
    return exposure


def simulate_tomography_data(rho, exposure, seed, settings=None, exact=False):
    """Poisson counts with means ``exposure * Tr[rho P_k]``, one stream per setting."""
    settings = settings or standard_settings_36()
    means = expected_counts(rho, settings, exposure)
    if exact:
        counts = means
    else:
        counts = np.array(
            [np.random.default_rng(derive_seed(seed, k)).poisson(m) for k, m in enumerate(means)],
            dtype=float,
        )
    durations = np.ones(len(settings))
    return TomographyData(counts, durations)


def simulate_tomography_records(rho, det, duration, seed, pair_rate, exact=False):
    """Nine basis-pair CountRecords (Z/X/Y on each side) as the analyzers would record them."""
    out = []
    for k, (la, lb) in enumerate((a, b) for a in "ZXY" for b in "ZXY"):
        a = MeasurementBasis(AXES[_BASIS_PLUS[la]], la)
        b = MeasurementBasis(AXES[_BASIS_PLUS[lb]], lb)
        out.append(simulate_counts(rho, a, b, det, duration, derive_seed(seed, k), pair_rate, exact))
    return out


def bootstrap_tangle(result, exposure, seed, n_replicas=100, settings=None, options=None):
    """Parametric bootstrap of the reconstructed tangle.

    Returns ``(std, replicas)``: the spread of tangles reconstructed from
    Poisson data resampled from ``result.rho``.
    """
    if exposure is None:
        raise ValueError("bootstrap needs the exposure; use infer_exposure for measured data")
    settings = settings or standard_settings_36()
    tangles = []
    for r in range(n_replicas):
        d = simulate_tomography_data(result.rho, exposure, derive_seed(seed, r), settings)
        tangles.append(mle_reconstruct(d, settings, exposure, options).tangle)
    tangles = np.array(tangles)
    return float(tangles.std(ddof=1)), tangles


@dataclass(frozen=True)
class TangleCurvePoint:
    temperature: float
    overlap: float
    tangle_model: float
    tangle_qst: float


def tangle_vs_temperature_curve(
    vv_temp=VV_TEMPERATURE_C,
    hh_temps=(163.70, 164.20, 164.70, 165.20, 165.70, 166.20, 166.70),
    crystals=None,
    purity_weight=1.0,
    exposure=2e4,
    seed=0,
    phase=0.0,
    exact=False,
):
    """Overlap, model tangle and reconstructed tangle as the HH crystal is detuned.

    ``crystals`` is an ``(hh_crystal, vv_crystal)`` pair of CrystalConfig.
    """
    if crystals is None:
        crystals = (CrystalConfig(role="HH"), CrystalConfig(role="VV"))
    hh_crystal, vv_crystal = crystals
    settings = standard_settings_36()
    points = []
    for i, temp in enumerate(hh_temps):
        o = overlap_from_temperatures(hh_crystal, vv_crystal, temp, vv_temp)
        rho = source_state(SourceConfig(phase=phase, overlap=o, purity_weight=purity_weight))
        data = simulate_tomography_data(rho, exposure, derive_seed(seed, i), settings, exact=exact)
        res = mle_reconstruct(data, settings, exposure)
        points.append(TangleCurvePoint(float(temp), o, pair_tangle(o, purity_weight), res.tangle))
    return points

