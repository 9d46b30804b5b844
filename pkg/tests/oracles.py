"""Independent reference computations used to derive frozen test values.

Each function takes a different route from the library code it checks:
kets from spherical angles instead of Pauli sums, the Hermitian form of the
Wootters R matrix, explicit waveplate matrix entries, and so on.
"""
import math

import numpy as np
from scipy.linalg import sqrtm


def ket_from_angles(n):
    """cos(t/2)|H> + e^{ip} sin(t/2)|V> for the unit vector n."""
    x, y, z = np.asarray(n, dtype=float) / np.linalg.norm(n)
    t = math.atan2(math.hypot(x, y), z)
    p = math.atan2(y, x)
    return np.array([math.cos(t / 2), np.exp(1j * p) * math.sin(t / 2)])


def projector(n):
    k = ket_from_angles(n)
    return np.outer(k, k.conj())


def correlation(rho, na, nb):
    """Four-outcome form: sum over signs of s_a s_b Tr[rho P_a^s (x) P_b^s']."""
    na, nb = np.asarray(na, float), np.asarray(nb, float)
    e = 0.0
    for sa in (1, -1):
        for sb in (1, -1):
            P = np.kron(projector(sa * na), projector(sb * nb))
            e += sa * sb * np.trace(rho @ P).real
    return e


def concurrence(rho):
    """Wootters concurrence from the Hermitian matrix sqrt(sqrt(rho) rho~ sqrt(rho))."""
    yy = np.array([[0, 0, 0, -1], [0, 0, 1, 0], [0, 1, 0, 0], [-1, 0, 0, 0]], dtype=complex)
    rho_tilde = yy @ rho.conj() @ yy
    s = sqrtm(rho)
    R = sqrtm(s @ rho_tilde @ s)
    lam = np.sort(np.linalg.eigvalsh(0.5 * (R + R.conj().T)))[::-1]
    return max(0.0, lam[0] - lam[1] - lam[2] - lam[3])


def tangle(rho):
    return concurrence(rho) ** 2


def phi_plus_fidelity(rho):
    """<Phi+|rho|Phi+> written out entrywise."""
    return ((rho[0, 0] + rho[3, 3]) / 2 + rho[0, 3].real).real


def waveplate(theta, delta):
    """Retarder with fast axis at theta, explicit entries."""
    c, s = math.cos(theta), math.sin(theta)
    e = np.exp(1j * delta)
    off = (1 - e) * c * s
    return np.array([[c * c + e * s * s, off], [off, s * s + e * c * c]])


def analyzer_bloch(qwp, hwp):
    """Bloch vector of the polarization transmitted by QWP -> HWP -> PBS(H)."""
    U = waveplate(hwp, math.pi) @ waveplate(qwp, math.pi / 2)
    a, b = U.conj().T @ np.array([1.0, 0.0])
    return np.array([2 * (a.conjugate() * b).real, 2 * (a.conjugate() * b).imag, abs(a) ** 2 - abs(b) ** 2])


def gaussian_overlap(delta, sigma):
    return math.exp(-(delta**2) / (8 * sigma**2))


def x_state_concurrence(overlap, v):
    """Closed form for v |phi_O><phi_O| + (1-v) I/4 with O-damped coherence."""
    return max(0.0, v * overlap - (1 - v) / 2)
