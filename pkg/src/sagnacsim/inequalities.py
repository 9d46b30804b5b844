"""Correlation coefficients from coincidence counts and the CHSH, (2,3)
"beautiful" Bell and Leggett (L3) inequalities.

Correlation uncertainties use first-order propagation with sigma_C = sqrt(C)
for each of the four channels, independent; inequality uncertainties combine
the terms in quadrature.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analyzer import derive_seed, simulate_counts
from .errors import FixtureFormatError, UndefinedCorrelationError
from .quantum_core import BlochVector, MeasurementBasis, correlation_expectation, correlation_tensor

LOW_STATISTICS_TOTAL = 100
CHSH_LHV_BOUND = 2.0
CHSH_QUANTUM_BOUND = 2 * math.sqrt(2)
BB_LHV_BOUND = 6.0
BB_QUANTUM_BOUND = 4 * math.sqrt(3)
# sign of E(a_i, b_j) in S_BB; rows a0..a2, columns b0..b3
BB_SIGNS = np.array([[1, 1, -1, -1], [1, -1, 1, -1], [1, -1, -1, 1]])


@dataclass(frozen=True)
class CorrelationEstimate:
    value: float
    uncertainty: float = 0.0
    label_a: str = ""
    label_b: str = ""

    def __post_init__(self):
        if abs(self.value) > 1 + 1e-12:
            raise ValueError(f"correlation {self.value} outside [-1, 1]")
        if not (self.uncertainty >= 0 and math.isfinite(self.uncertainty)):
            raise ValueError("uncertainty must be finite and non-negative")

    def flipped(self):
        """Estimate for the same pair with one basis' outcomes swapped."""
        return CorrelationEstimate(-self.value, self.uncertainty, self.label_a, self.label_b)


def correlation_from_counts(rec):
    """E = (C_ab + C_a'b' - C_a'b - C_ab') / total with Poisson error propagation."""
    same = rec.c_ab + rec.c_aperp_bperp
    diff = rec.c_aperp_b + rec.c_a_bperp
    total = same + diff
    if total <= 0:
        raise UndefinedCorrelationError(
            f"no coincidences recorded for ({rec.setting_a}, {rec.setting_b})"
        )
    if total < LOW_STATISTICS_TOTAL:
        warnings.warn(
            f"correlation for ({rec.setting_a}, {rec.setting_b}) rests on only {total} counts; "
            "first-order error propagation is unreliable",
            stacklevel=2,
        )
    e = (same - diff) / total
    var = ((1 - e) ** 2 * same + (1 + e) ** 2 * diff) / total**2
    return CorrelationEstimate(float(e), math.sqrt(var), rec.setting_a, rec.setting_b)


def measure_correlation(rho, a, b, det, duration, seed, pair_rate, exact=False):
    """Simulate one basis pair and turn its counts into a CorrelationEstimate.

    With ``exact`` the correlation of the Poisson means (accidentals included)
    is returned with zero uncertainty.
    """
    rec = simulate_counts(rho, a, b, det, duration, seed, pair_rate, exact)
    est = correlation_from_counts(rec)
    if exact:
        return CorrelationEstimate(est.value, 0.0, _lbl(a), _lbl(b))
    return est


def exact_correlation(rho, a, b):
    return CorrelationEstimate(correlation_expectation(rho, _vec(a), _vec(b)), 0.0, _lbl(a), _lbl(b))


def _vec(b):
    return b.plus if isinstance(b, MeasurementBasis) else b


def _lbl(b):
    return b.label if isinstance(b, MeasurementBasis) else ""


def _equatorial(azimuth, label):
    return MeasurementBasis(
        BlochVector.from_array([math.cos(azimuth), math.sin(azimuth), 0.0], normalize=True), label
    )


# --- CHSH -------------------------------------------------------------------


@dataclass(frozen=True)
class CHSHResult:
    S: float
    dS: float
    terms: tuple  # E11, E12, E21, E22
    bases: tuple = ()

    def significance(self, bound=CHSH_LHV_BOUND):
        return (abs(self.S) - bound) / self.dS if self.dS > 0 else math.inf

    def to_dict(self):
        return {
            "S": self.S,
            "dS": self.dS,
            "lhv_bound": CHSH_LHV_BOUND,
            "quantum_bound": CHSH_QUANTUM_BOUND,
            "terms": [_term_dict(e) for e in self.terms],
        }


def chsh_settings():
    """Equatorial bases saturating S = 2 sqrt(2) on |Phi+>.

    For |Phi+> the correlation of equatorial settings at azimuths alpha and
    beta is cos(alpha + beta); Alice uses 0 and -pi/2, Bob pi/4 and 3pi/4.
    """
    alice = (_equatorial(0.0, "a1"), _equatorial(-math.pi / 2, "a2"))
    bob = (_equatorial(math.pi / 4, "b1"), _equatorial(3 * math.pi / 4, "b2"))
    return alice, bob


def optimal_chsh_settings(rho):
    """State-adapted CHSH bases reaching 2 sqrt(s1^2 + s2^2) (s = singular
    values of the correlation tensor)."""
    T = correlation_tensor(rho)
    U, s, Vt = np.linalg.svd(T)
    v1, v2 = Vt[0], Vt[1]
    theta = math.atan2(s[1], s[0])
    b1 = math.cos(theta) * v1 + math.sin(theta) * v2
    b2 = math.cos(theta) * v1 - math.sin(theta) * v2
    alice = (
        MeasurementBasis(BlochVector.from_array(U[:, 1], normalize=True), "a1"),
        MeasurementBasis(BlochVector.from_array(U[:, 0], normalize=True), "a2"),
    )
    bob = (
        MeasurementBasis(BlochVector.from_array(b1, normalize=True), "b1"),
        MeasurementBasis(BlochVector.from_array(b2, normalize=True), "b2"),
    )
    return alice, bob


def chsh_S(e11, e12, e21, e22):
    """S = E11 - E12 + E21 + E22, uncertainties in quadrature."""
    terms = (e11, e12, e21, e22)
    s = e11.value - e12.value + e21.value + e22.value
    ds = math.sqrt(sum(e.uncertainty**2 for e in terms))
    return CHSHResult(s, ds, terms)


def s_max_from_tangle(tangle_value):
    if not 0 <= tangle_value <= 1:
        raise ValueError("tangle must lie in [0, 1]")
    return 2 * math.sqrt(1 + tangle_value)


def evaluate_chsh(rho, alice=None, bob=None, det=None, duration=40.0, seed=None, pair_rate=500.0, exact=False):
    """CHSH on ``rho`` at the given bases (default :func:`chsh_settings`).

    Without ``det`` the exact expectations are used.
    """
    if alice is None or bob is None:
        alice, bob = chsh_settings()
    es = _measure_grid(rho, alice, bob, det, duration, seed, pair_rate, exact)
    res = chsh_S(es[0][0], es[0][1], es[1][0], es[1][1])
    return CHSHResult(res.S, res.dS, res.terms, (alice, bob))


# --- (2,3) beautiful Bell ----------------------------------------------------


@dataclass(frozen=True)
class BBResult:
    S_BB: float
    dS_BB: float
    terms: tuple  # 3 x 4 nested tuples of CorrelationEstimate

    def significance(self, bound=BB_LHV_BOUND):
        return (self.S_BB - bound) / self.dS_BB if self.dS_BB > 0 else math.inf

    def to_dict(self):
        return {
            "S_BB": self.S_BB,
            "dS_BB": self.dS_BB,
            "lhv_bound": BB_LHV_BOUND,
            "quantum_bound": BB_QUANTUM_BOUND,
            "terms": [
                {**_term_dict(e), "sign": int(BB_SIGNS[i, j]), "a": i, "b": j}
                for i, row in enumerate(self.terms)
                for j, e in enumerate(row)
            ],
        }


def bb_settings():
    """Alice on the three Bloch axes, Bob on four cube diagonals.

    Each Bob vector is the normalized sum of Alice's axes weighted by the
    S_BB signs of its column and mapped through the |Phi+> correlation
    tensor diag(1, -1, 1), so every term contributes 1/sqrt(3).
    """
    alice = (
        MeasurementBasis(BlochVector(1.0, 0.0, 0.0), "a0"),
        MeasurementBasis(BlochVector(0.0, 1.0, 0.0), "a1"),
        MeasurementBasis(BlochVector(0.0, 0.0, 1.0), "a2"),
    )
    bob_dirs = ((1, -1, 1), (1, 1, -1), (-1, -1, -1), (-1, 1, 1))
    bob = tuple(
        MeasurementBasis(BlochVector.from_array(d, normalize=True), f"b{j}")
        for j, d in enumerate(bob_dirs)
    )
    return alice, bob


def bb_S(E):
    """Signed 12-term sum for a 3x4 grid of CorrelationEstimates (rows a0..a2)."""
    if len(E) != 3 or any(len(row) != 4 for row in E):
        raise ValueError("beautiful Bell needs a 3 x 4 grid of correlations")
    s = sum(BB_SIGNS[i, j] * E[i][j].value for i in range(3) for j in range(4))
    ds = math.sqrt(sum(E[i][j].uncertainty ** 2 for i in range(3) for j in range(4)))
    return BBResult(float(s), ds, tuple(tuple(row) for row in E))


def bb_min_visibility():
    """White-noise visibility at which S_BB reaches the LHV bound."""
    return BB_LHV_BOUND / BB_QUANTUM_BOUND


def evaluate_bb(rho, det=None, duration=40.0, seed=None, pair_rate=500.0, exact=False):
    alice, bob = bb_settings()
    return bb_S(_measure_grid(rho, alice, bob, det, duration, seed, pair_rate, exact))


# --- Leggett ----------------------------------------------------------------


@dataclass(frozen=True)
class LeggettResult:
    phi: float
    L3: float
    dL3: float
    bound: float
    terms: tuple  # ((E1, E1'), (E2, E2'), (E3, E3'))

    @property
    def violation(self):
        return self.L3 - self.bound

    def significance(self):
        return self.violation / self.dL3 if self.dL3 > 0 else math.inf

    def to_dict(self):
        return {
            "phi_rad": self.phi,
            "phi_deg": math.degrees(self.phi),
            "L3": self.L3,
            "dL3": self.dL3,
            "bound": self.bound,
            "terms": [_term_dict(e) for pair in self.terms for e in pair],
        }


def leggett_bound(phi):
    return 2 - (2 / 3) * abs(math.sin(phi / 2))


def leggett_settings(phi):
    """Alice along x, y, z; Bob's pair i sits at +-phi/2 from a_i in the XY,
    YZ and XZ planes respectively."""
    if not 0 < phi < math.pi:
        raise ValueError("phi must lie in (0, pi)")
    c, s = math.cos(phi / 2), math.sin(phi / 2)
    alice = (
        MeasurementBasis(BlochVector(1.0, 0.0, 0.0), "a1"),
        MeasurementBasis(BlochVector(0.0, 1.0, 0.0), "a2"),
        MeasurementBasis(BlochVector(0.0, 0.0, 1.0), "a3"),
    )
    dirs = (
        ((c, s, 0.0), (c, -s, 0.0)),
        ((0.0, c, s), (0.0, c, -s)),
        ((s, 0.0, c), (-s, 0.0, c)),
    )
    bob = tuple(
        tuple(
            MeasurementBasis(BlochVector.from_array(d, normalize=True), f"b{i + 1}" + "'" * k)
            for k, d in enumerate(pair)
        )
        for i, pair in enumerate(dirs)
    )
    return alice, bob


def leggett_L3(E_pairs, phi):
    """L3 = (1/3) sum_i |E(a_i, b_i) + E(a_i, b_i')|.

    ``E_pairs`` is three (E, E') pairs or a flat sequence of six estimates.
    The absolute values are resolved with the measured signs before
    propagating, so dL3 = sqrt(sum dE^2) / 3.
    """
    flat = list(E_pairs)
    if len(flat) == 6:
        pairs = [(flat[0], flat[1]), (flat[2], flat[3]), (flat[4], flat[5])]
    elif len(flat) == 3:
        pairs = [tuple(p) for p in flat]
    else:
        raise ValueError("Leggett L3 needs six correlations")
    L3 = sum(abs(e.value + ep.value) for e, ep in pairs) / 3
    dL3 = math.sqrt(sum(e.uncertainty**2 + ep.uncertainty**2 for e, ep in pairs)) / 3
    return LeggettResult(phi, float(L3), dL3, leggett_bound(phi), tuple(pairs))


def evaluate_leggett(rho, phi, det=None, duration=40.0, seed=None, pair_rate=500.0, exact=False):
    alice, bob = leggett_settings(phi)
    pairs = []
    for i, (a, (b, bp)) in enumerate(zip(alice, bob)):
        pairs.append(
            (
                _measure(rho, a, b, det, duration, derive_seed(seed, 2 * i), pair_rate, exact),
                _measure(rho, a, bp, det, duration, derive_seed(seed, 2 * i + 1), pair_rate, exact),
            )
        )
    return leggett_L3(pairs, phi)


# --- shared -----------------------------------------------------------------


def _measure(rho, a, b, det, duration, seed, pair_rate, exact):
    if det is None:
        return exact_correlation(rho, a, b)
    return measure_correlation(rho, a, b, det, duration, seed, pair_rate, exact)


def _measure_grid(rho, alice, bob, det, duration, seed, pair_rate, exact):
    return [
        [
            _measure(rho, a, b, det, duration, derive_seed(seed, i * len(bob) + j), pair_rate, exact)
            for j, b in enumerate(bob)
        ]
        for i, a in enumerate(alice)
    ]


def _term_dict(e):
    return {"setting_a": e.label_a, "setting_b": e.label_b, "E": e.value, "dE": e.uncertainty}


CORRELATION_COLUMNS = ("setting_a", "setting_b", "E", "dE")


def read_correlation_table(path):
    """Read a ``setting_a,setting_b,E,dE`` CSV into CorrelationEstimates (file order)."""
    path = Path(path)
    out = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if any(c not in header for c in CORRELATION_COLUMNS):
            raise FixtureFormatError(f"expected columns {list(CORRELATION_COLUMNS)}", path, 1)
        idx = {c: header.index(c) for c in CORRELATION_COLUMNS}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                out.append(
                    CorrelationEstimate(
                        float(row[idx["E"]]),
                        float(row[idx["dE"]]),
                        row[idx["setting_a"]].strip(),
                        row[idx["setting_b"]].strip(),
                    )
                )
            except (ValueError, IndexError) as exc:
                raise FixtureFormatError(str(exc), path, lineno) from None
    return out


def write_correlation_table(estimates, path):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CORRELATION_COLUMNS)
        for e in estimates:
            w.writerow([e.label_a, e.label_b, repr(e.value), repr(e.uncertainty)])


def bb_grid_from_table(estimates):
    """Arrange twelve labelled estimates (a0..a2 x b0..b3) into the bb_S grid."""
    grid = [[None] * 4 for _ in range(3)]
    for e in estimates:
        i, j = _index(e.label_a, "a"), _index(e.label_b, "b")
        if not (0 <= i < 3 and 0 <= j < 4) or grid[i][j] is not None:
            raise ValueError(f"unexpected or repeated beautiful Bell term ({e.label_a}, {e.label_b})")
        grid[i][j] = e
    if any(e is None for row in grid for e in row):
        raise ValueError("beautiful Bell table is missing terms")
    return grid


def leggett_pairs_from_table(estimates):
    """Order six labelled estimates as ((a1,b1),(a1,b1')), ... for leggett_L3."""
    slots = {}
    for e in estimates:
        i = _index(e.label_a, "a")
        primed = e.label_b.strip().endswith("'")
        if _index(e.label_b.rstrip("'"), "b") != i:
            raise ValueError(f"Leggett term ({e.label_a}, {e.label_b}) pairs mismatched indices")
        slots[(i, primed)] = e
    try:
        return [(slots[(i, False)], slots[(i, True)]) for i in (1, 2, 3)]
    except KeyError as exc:
        raise ValueError(f"Leggett table is missing term {exc}") from None


def _index(label, prefix):
    label = label.strip()
    if not label.startswith(prefix):
        raise ValueError(f"label {label!r} does not start with {prefix!r}")
    return int(label[len(prefix):])
