"""Two-qubit linear algebra: kets, Bloch vectors, projectors, correlations and
entanglement measures.

Conventions used everywhere in the package:

* computational ordering of the two-qubit basis is (HH, HV, VH, VV), qubit A
  (810 nm analyzer) first;
* Bloch sphere: +z is |H>, +x is |+> = (|H> + |V>)/sqrt(2) and +y is
  |R> = (|H> + i|V>)/sqrt(2).

Density matrices are plain ``(4, 4)`` complex numpy arrays. Functions that take
one validate it with :func:`check_density_matrix`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import sqrtm

from .errors import StateValidityError

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
EIGEN_TOL = -1e-9
UNIT_TOL = 1e-12
# density-matrix eigenvalues below this are round-off and treated as zero
ROUNDOFF_EIGEN = 1e-14

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (SX, SY, SZ)
SYSY = np.kron(SY, SY)

_S2 = 1 / np.sqrt(2)
KET_H = np.array([1, 0], dtype=complex)
KET_V = np.array([0, 1], dtype=complex)
KET_PLUS = np.array([_S2, _S2], dtype=complex)
KET_MINUS = np.array([_S2, -_S2], dtype=complex)
KET_R = np.array([_S2, 1j * _S2], dtype=complex)
KET_L = np.array([_S2, -1j * _S2], dtype=complex)
KET_HH = np.kron(KET_H, KET_H)
KET_VV = np.kron(KET_V, KET_V)


def phi_state(phase=0.0):
    """Ket (|HH> + e^{i phase} |VV>)/sqrt(2)."""
    return (KET_HH + np.exp(1j * phase) * KET_VV) / np.sqrt(2)


PHI_PLUS = phi_state(0.0)
PHI_MINUS = phi_state(np.pi)


def check_ket(psi, dim=None):
    psi = np.asarray(psi, dtype=complex).ravel()
    if dim is not None and psi.shape != (dim,):
        raise ValueError(f"expected a ket of length {dim}, got shape {psi.shape}")
    if psi.shape not in ((2,), (4,)):
        raise ValueError(f"kets must have length 2 or 4, got {psi.shape}")
    if abs(np.vdot(psi, psi).real - 1) > UNIT_TOL:
        raise ValueError("ket is not normalized")
    return psi


@dataclass(frozen=True)
class BlochVector:
    x: float
    y: float
    z: float

    def __post_init__(self):
        n2 = self.x**2 + self.y**2 + self.z**2
        if not np.isfinite(n2) or abs(n2 - 1) > UNIT_TOL:
            raise ValueError(f"Bloch vector ({self.x}, {self.y}, {self.z}) is not unit length")

    @classmethod
    def from_array(cls, v, normalize=False):
        v = np.asarray(v, dtype=float).ravel()
        if v.shape != (3,):
            raise ValueError("Bloch vectors have three components")
        if normalize:
            norm = np.linalg.norm(v)
            if norm == 0:
                raise ValueError("cannot normalize the zero vector")
            v = v / norm
        return cls(float(v[0]), float(v[1]), float(v[2]))

    @classmethod
    def from_angles(cls, theta, phi):
        """Polar angle from +z and azimuth from +x."""
        return cls.from_array(
            [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)],
            normalize=True,
        )

    def as_array(self):
        return np.array([self.x, self.y, self.z])

    def __neg__(self):
        return BlochVector(-self.x, -self.y, -self.z)

    def angle_to(self, other):
        c = np.clip(np.dot(self.as_array(), _as_vec(other)), -1.0, 1.0)
        return float(np.arccos(c))


AXES = {
    "H": BlochVector(0.0, 0.0, 1.0),
    "V": BlochVector(0.0, 0.0, -1.0),
    "+": BlochVector(1.0, 0.0, 0.0),
    "-": BlochVector(-1.0, 0.0, 0.0),
    "R": BlochVector(0.0, 1.0, 0.0),
    "L": BlochVector(0.0, -1.0, 0.0),
}


@dataclass(frozen=True)
class MeasurementBasis:
    """Two-outcome projective measurement {plus, -plus}."""

    plus: BlochVector
    label: str = ""

    @property
    def minus(self):
        return -self.plus

    def projectors(self):
        return projector_from_bloch(self.plus), projector_from_bloch(self.minus)

    def flipped(self):
        """Same measurement with the outcome labels exchanged."""
        return MeasurementBasis(self.minus, self.label + "^perp" if self.label else "")


Z_BASIS = MeasurementBasis(AXES["H"], "Z")
X_BASIS = MeasurementBasis(AXES["+"], "X")
Y_BASIS = MeasurementBasis(AXES["R"], "Y")
PAULI_BASES = {"Z": Z_BASIS, "X": X_BASIS, "Y": Y_BASIS}


def _as_vec(n):
    if isinstance(n, BlochVector):
        return n.as_array()
    if isinstance(n, MeasurementBasis):
        return n.plus.as_array()
    v = np.asarray(n, dtype=float).ravel()
    if v.shape != (3,):
        raise ValueError("Bloch vectors have three components")
    if abs(v @ v - 1) > UNIT_TOL:
        raise ValueError(f"Bloch vector {v} is not unit length")
    return v


def sigma_dot(n):
    """n . sigma for a real 3-vector (not required to be unit length)."""
    n = np.asarray(n, dtype=float)
    return n[0] * SX + n[1] * SY + n[2] * SZ


def projector_from_bloch(n):
    """Rank-one projector (I + n.sigma)/2 for a unit Bloch vector ``n``."""
    return 0.5 * (I2 + sigma_dot(_as_vec(n)))


def ket_from_bloch(n):
    """Unit ket with Bloch vector ``n``, global phase fixed so the H amplitude is real."""
    x, y, z = _as_vec(n)
    theta = np.arctan2(np.hypot(x, y), z)
    phi = np.arctan2(y, x)
    return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])


def bloch_from_ket(psi):
    psi = check_ket(psi, 2)
    return BlochVector.from_array(
        [np.vdot(psi, s @ psi).real for s in PAULI], normalize=True
    )


def tensor_product(a, b):
    """Kronecker product ``a (x) b`` with qubit A as the most significant index."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def density_from_ket(psi):
    psi = check_ket(psi)
    return np.outer(psi, psi.conj())


def maximally_mixed(dim=4):
    return np.eye(dim, dtype=complex) / dim


def check_density_matrix(rho):
    """Return ``rho`` as a complex (4, 4) array or raise :class:`StateValidityError`."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise StateValidityError(f"expected a 4x4 density matrix, got shape {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise StateValidityError("density matrix has non-finite entries")
    herm_err = np.max(np.abs(rho - rho.conj().T))
    if herm_err > HERMITIAN_TOL:
        raise StateValidityError(f"density matrix is not Hermitian (max deviation {herm_err:.2e})")
    tr = np.trace(rho).real
    if abs(tr - 1) > TRACE_TOL:
        raise StateValidityError(f"density matrix trace is {tr!r}, not 1")
    lam_min = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
    if lam_min < EIGEN_TOL:
        raise StateValidityError(f"density matrix has negative eigenvalue {lam_min:.3e}")
    return rho


def nearest_physical(rho):
    """Hermitize, clip negative eigenvalues and renormalize.

    Used for tabulated matrices whose rounded entries leave them marginally
    unphysical.
    """
    rho = np.asarray(rho, dtype=complex)
    rho = 0.5 * (rho + rho.conj().T)
    w, v = np.linalg.eigh(rho)
    w = np.clip(w, 0.0, None)
    if w.sum() <= 0:
        raise StateValidityError("matrix has no positive part")
    out = (v * w) @ v.conj().T
    out = 0.5 * (out + out.conj().T)
    return out / np.trace(out).real


def coincidence_probability(rho, na, nb):
    """Probability Tr[rho (Pi_a (x) Pi_b)] that both analyzers click on the given outcomes."""
    rho = check_density_matrix(rho)
    op = tensor_product(projector_from_bloch(na), projector_from_bloch(nb))
    p = np.trace(rho @ op)
    if abs(p.imag) > 1e-10:
        raise StateValidityError("coincidence probability has an imaginary part")
    return float(np.clip(p.real, 0.0, 1.0))


def outcome_probabilities(rho, a, b):
    """The four probabilities P(a,b), P(a_perp,b), P(a,b_perp), P(a_perp,b_perp)."""
    a_vec, b_vec = _as_vec(a), _as_vec(b)
    return (
        coincidence_probability(rho, a_vec, b_vec),
        coincidence_probability(rho, -a_vec, b_vec),
        coincidence_probability(rho, a_vec, -b_vec),
        coincidence_probability(rho, -a_vec, -b_vec),
    )


def correlation_expectation(rho, a, b):
    """Noiseless correlation coefficient E(a, b) in [-1, 1].

    Computed from the four outcome probabilities; equals Tr[rho (a.sigma (x) b.sigma)].
    """
    p_ab, p_pb, p_ap, p_pp = outcome_probabilities(rho, a, b)
    # grouped so that flipping either basis negates E bit for bit
    return float(np.clip((p_ab + p_pp) - (p_pb + p_ap), -1.0, 1.0))


def correlation_tensor(rho):
    """3x3 real matrix T_ij = Tr[rho (sigma_i (x) sigma_j)]."""
    rho = check_density_matrix(rho)
    return np.array(
        [[np.trace(rho @ np.kron(si, sj)).real for sj in PAULI] for si in PAULI]
    )


def concurrence(rho):
    """Wootters concurrence max(0, l1 - l2 - l3 - l4)."""
    rho = check_density_matrix(rho)
    # The l_i (square roots of the eigenvalues of rho (sy sy) rho* (sy sy)) are the
    # singular values of W^T (sy sy) W for any rho = W W^dagger. This avoids square
    # roots of round-off eigenvalues of a non-Hermitian product.
    p, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    p = np.where(p > ROUNDOFF_EIGEN, p, 0.0)
    W = v * np.sqrt(p)
    lam = np.linalg.svd(W.T @ SYSY @ W, compute_uv=False)
    return float(np.clip(lam[0] - lam[1] - lam[2] - lam[3], 0.0, 1.0))


def tangle(rho):
    return concurrence(rho) ** 2


def fidelity(rho, psi):
    """Fidelity <psi|rho|psi> with a pure target state."""
    rho = check_density_matrix(rho)
    psi = check_ket(psi, 4)
    return float(np.clip(np.vdot(psi, rho @ psi).real, 0.0, 1.0))


def state_fidelity(rho, sigma):
    """Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2 between mixed states."""
    rho = check_density_matrix(rho)
    sigma = check_density_matrix(sigma)
    s = sqrtm(rho)
    f = np.trace(sqrtm(s @ sigma @ s)).real ** 2
    return float(np.clip(f, 0.0, 1.0))


def trace_distance(rho, sigma):
    d = np.asarray(rho) - np.asarray(sigma)
    return float(0.5 * np.abs(np.linalg.eigvalsh(0.5 * (d + d.conj().T))).sum())


def random_unitary(rng, dim=2):
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_density_matrix(rng, rank=4):
    g = rng.standard_normal((4, rank)) + 1j * rng.standard_normal((4, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_bloch(rng):
    return BlochVector.from_array(rng.standard_normal(3), normalize=True)


def density_matrix_to_json(rho):
    """JSON-ready dict with row-major "re" and "im" 4x4 arrays."""
    rho = np.asarray(rho, dtype=complex)
    return {"re": rho.real.tolist(), "im": rho.imag.tolist()}


def density_matrix_from_json(obj, validate=True):
    try:
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj["im"], dtype=float)
    except KeyError as exc:
        raise StateValidityError(f"density matrix object is missing field {exc}") from None
    if re.shape != (4, 4) or im.shape != (4, 4):
        raise StateValidityError("density matrix fields must be 4x4 arrays")
    rho = re + 1j * im
    return check_density_matrix(rho) if validate else rho
