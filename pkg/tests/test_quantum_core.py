import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from sagnacsim import fixtures
from sagnacsim.errors import StateValidityError
from sagnacsim.quantum_core import (
    AXES,
    I2,
    KET_HH,
    PHI_MINUS,
    PHI_PLUS,
    SZ,
    X_BASIS,
    Y_BASIS,
    Z_BASIS,
    BlochVector,
    MeasurementBasis,
    bloch_from_ket,
    check_density_matrix,
    coincidence_probability,
    concurrence,
    correlation_expectation,
    correlation_tensor,
    density_from_ket,
    density_matrix_from_json,
    density_matrix_to_json,
    fidelity,
    ket_from_bloch,
    maximally_mixed,
    nearest_physical,
    outcome_probabilities,
    phi_state,
    projector_from_bloch,
    random_bloch,
    random_density_matrix,
    random_unitary,
    state_fidelity,
    tangle,
    tensor_product,
    trace_distance,
)

RHO_PHI = density_from_ket(PHI_PLUS)
MIXED = maximally_mixed()

unit_vectors = (
    st.tuples(*[st.floats(-1, 1, allow_nan=False)] * 3)
    .filter(lambda v: np.linalg.norm(v) > 1e-3)
    .map(lambda v: BlochVector.from_array(v, normalize=True))
)


# --- Bloch vectors and projectors --------------------------------------------


def test_projector_poles():
    assert np.allclose(projector_from_bloch(AXES["H"]), np.diag([1, 0]))
    assert np.allclose(projector_from_bloch(AXES["+"]), np.full((2, 2), 0.5))


def test_projector_circular_convention():
    # +y is |R> = (|H> + i|V>)/sqrt(2)
    k = np.array([1, 1j]) / math.sqrt(2)
    assert np.allclose(projector_from_bloch(AXES["R"]), np.outer(k, k.conj()))


@given(unit_vectors)
def test_projector_is_rank_one_projector(n):
    P = projector_from_bloch(n)
    assert np.abs(P @ P - P).max() < 1e-12
    assert abs(np.trace(P) - 1) < 1e-12
    assert np.allclose(P, oracles.projector(n.as_array()), atol=1e-12)


@given(unit_vectors)
def test_ket_bloch_round_trip(n):
    back = bloch_from_ket(ket_from_bloch(n))
    assert np.allclose(back.as_array(), n.as_array(), atol=1e-9)


def test_bloch_vector_rejects_non_unit():
    with pytest.raises(ValueError):
        BlochVector(1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        BlochVector.from_array([0, 0, 0], normalize=True)


def test_bloch_angles_and_negation():
    n = BlochVector.from_angles(math.pi / 2, 0.0)
    assert np.allclose(n.as_array(), [1, 0, 0])
    assert np.allclose((-n).as_array(), [-1, 0, 0])
    assert n.angle_to(AXES["R"]) == pytest.approx(math.pi / 2)


# --- tensor products and probabilities ---------------------------------------


def test_tensor_product_examples():
    assert np.allclose(tensor_product(I2, I2), np.eye(4))
    hh = projector_from_bloch(AXES["H"])
    assert np.allclose(tensor_product(hh, hh), np.diag([1, 0, 0, 0]))
    assert np.allclose(tensor_product(SZ, SZ), np.diag([1, -1, -1, 1]))


def test_basis_order_matches_kets():
    assert np.allclose(KET_HH, [1, 0, 0, 0])
    assert np.allclose(PHI_PLUS, np.array([1, 0, 0, 1]) / math.sqrt(2))
    assert np.allclose(PHI_MINUS, np.array([1, 0, 0, -1]) / math.sqrt(2))


def test_coincidence_probability_examples():
    z, x = AXES["H"], AXES["+"]
    assert coincidence_probability(RHO_PHI, z, z) == pytest.approx(0.5)
    assert coincidence_probability(RHO_PHI, x, -x) == pytest.approx(0.0, abs=1e-15)
    rng = np.random.default_rng(3)
    for _ in range(20):
        p = coincidence_probability(MIXED, random_bloch(rng), random_bloch(rng))
        assert p == pytest.approx(0.25)


def test_correlation_examples():
    assert correlation_expectation(RHO_PHI, Z_BASIS, Z_BASIS) == pytest.approx(1.0)
    assert correlation_expectation(RHO_PHI, X_BASIS, X_BASIS) == pytest.approx(1.0)
    assert correlation_expectation(RHO_PHI, Y_BASIS, Y_BASIS) == pytest.approx(-1.0)
    assert correlation_expectation(MIXED, X_BASIS, Y_BASIS) == pytest.approx(0.0)


def test_correlation_tensor_phi_plus():
    assert np.allclose(correlation_tensor(RHO_PHI), np.diag([1, -1, 1]))


def test_outcome_probabilities_sum_to_one():
    rng = np.random.default_rng(5)
    rho = random_density_matrix(rng)
    assert sum(outcome_probabilities(rho, random_bloch(rng), random_bloch(rng))) == pytest.approx(1.0)


def test_correlation_matches_four_probability_form_1000_triples():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(1000):
        rho = random_density_matrix(rng, rank=int(rng.integers(1, 5)))
        a, b = random_bloch(rng), random_bloch(rng)
        e = correlation_expectation(rho, MeasurementBasis(a), MeasurementBasis(b))
        worst = max(worst, abs(e - oracles.correlation(rho, a.as_array(), b.as_array())))
    assert worst < 1e-10


def test_correlation_flip_antisymmetry():
    rng = np.random.default_rng(2)
    rho = random_density_matrix(rng)
    a, b = MeasurementBasis(random_bloch(rng)), MeasurementBasis(random_bloch(rng))
    e = correlation_expectation(rho, a, b)
    assert correlation_expectation(rho, a.flipped(), b) == pytest.approx(-e, abs=1e-14)
    assert correlation_expectation(rho, a, b.flipped()) == pytest.approx(-e, abs=1e-14)


# --- entanglement measures ---------------------------------------------------


def test_concurrence_limits():
    assert concurrence(RHO_PHI) == pytest.approx(1.0)
    assert tangle(RHO_PHI) == pytest.approx(1.0)
    assert concurrence(MIXED) == pytest.approx(0.0, abs=1e-12)
    assert tangle(MIXED) == pytest.approx(0.0, abs=1e-12)


def test_phase_does_not_change_entanglement():
    for phase in np.linspace(0, 2 * math.pi, 7):
        assert tangle(density_from_ket(phi_state(phase))) == pytest.approx(1.0)


def test_concurrence_matches_hermitian_oracle():
    rng = np.random.default_rng(7)
    for _ in range(200):
        rho = random_density_matrix(rng, rank=int(rng.integers(1, 5)))
        assert concurrence(rho) == pytest.approx(oracles.concurrence(rho), abs=1e-7)


def test_local_unitary_invariance():
    rng = np.random.default_rng(13)
    for _ in range(200):
        rho = random_density_matrix(rng, rank=int(rng.integers(1, 5)))
        U = np.kron(random_unitary(rng), random_unitary(rng))
        assert concurrence(U @ rho @ U.conj().T) == pytest.approx(concurrence(rho), abs=1e-9)


def test_product_states_have_zero_tangle():
    rng = np.random.default_rng(17)
    for _ in range(200):
        ka, kb = ket_from_bloch(random_bloch(rng)), ket_from_bloch(random_bloch(rng))
        rho = density_from_ket(np.kron(ka, kb))
        assert tangle(rho) < 1e-9


@settings(max_examples=200)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_tangle_in_unit_interval(seed, rank):
    t = tangle(random_density_matrix(np.random.default_rng(seed), rank))
    assert 0.0 <= t <= 1.0


def test_table_I_tangle():
    # oracle value on the physical projection of the rounded table: 0.9056
    rho = fixtures.table_I()
    assert tangle(rho) == pytest.approx(0.905, abs=0.010)
    # the oracle takes matrix square roots of a rank-deficient matrix, good to ~1e-8
    assert tangle(rho) == pytest.approx(oracles.tangle(rho), abs=1e-7)


def test_fidelity_examples():
    assert fidelity(RHO_PHI, PHI_PLUS) == pytest.approx(1.0)
    assert fidelity(MIXED, PHI_MINUS) == pytest.approx(0.25)
    raw = fixtures.table_I(physical=False)
    # (rho_11 + rho_44)/2 + Re rho_14 on the tabulated entries
    assert oracles.phi_plus_fidelity(raw) == pytest.approx(0.97395, abs=1e-12)
    assert fidelity(fixtures.table_I(), PHI_PLUS) == pytest.approx(0.974, abs=0.005)


def test_state_fidelity_and_trace_distance():
    assert state_fidelity(RHO_PHI, RHO_PHI) == pytest.approx(1.0, abs=1e-8)
    assert state_fidelity(RHO_PHI, MIXED) == pytest.approx(0.25, abs=1e-8)
    assert trace_distance(RHO_PHI, RHO_PHI) == pytest.approx(0.0, abs=1e-14)
    assert trace_distance(RHO_PHI, density_from_ket(PHI_MINUS)) == pytest.approx(1.0)


# --- validation --------------------------------------------------------------


def test_check_density_matrix_rejects_bad_input():
    with pytest.raises(StateValidityError):
        check_density_matrix(np.eye(3) / 3)
    with pytest.raises(StateValidityError):
        check_density_matrix(np.eye(4) / 2)
    bad = MIXED.copy()
    bad[0, 1] = 0.1
    with pytest.raises(StateValidityError):
        check_density_matrix(bad)
    with pytest.raises(StateValidityError):
        check_density_matrix(np.diag([1.1, -0.1, 0, 0]))


def test_rounded_table_is_marginally_unphysical_and_projection_fixes_it():
    raw = fixtures.table_I(physical=False)
    with pytest.raises(StateValidityError):
        check_density_matrix(raw)
    fixed = nearest_physical(raw)
    check_density_matrix(fixed)
    assert np.abs(fixed - raw).max() < 1e-3


def test_random_states_are_physical():
    rng = np.random.default_rng(19)
    for _ in range(100):
        check_density_matrix(random_density_matrix(rng, rank=int(rng.integers(1, 5))))


def test_json_round_trip():
    rho = random_density_matrix(np.random.default_rng(23))
    back = density_matrix_from_json(density_matrix_to_json(rho))
    assert np.array_equal(back, rho)
    with pytest.raises(StateValidityError):
        density_matrix_from_json({"re": np.eye(4).tolist()})
