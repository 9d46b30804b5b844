import itertools
import math
import warnings

import numpy as np
import pytest
from scipy.optimize import minimize

from sagnacsim import fixtures
from sagnacsim.analyzer import CountRecord, DetectorConfig
from sagnacsim.errors import FixtureFormatError, UndefinedCorrelationError
from sagnacsim.inequalities import (
    BB_SIGNS,
    CorrelationEstimate,
    bb_grid_from_table,
    bb_min_visibility,
    bb_S,
    bb_settings,
    chsh_S,
    chsh_settings,
    correlation_from_counts,
    evaluate_bb,
    evaluate_chsh,
    evaluate_leggett,
    exact_correlation,
    leggett_bound,
    leggett_L3,
    leggett_pairs_from_table,
    leggett_settings,
    measure_correlation,
    optimal_chsh_settings,
    read_correlation_table,
    s_max_from_tangle,
    write_correlation_table,
)
from sagnacsim.quantum_core import (
    PHI_PLUS,
    MeasurementBasis,
    correlation_tensor,
    density_from_ket,
    maximally_mixed,
    random_bloch,
    random_density_matrix,
    tangle,
)
from sagnacsim.source_model import SourceConfig, source_state

RHO_PHI = density_from_ket(PHI_PLUS)
T_PHI = correlation_tensor(RHO_PHI)


def E(value, unc=0.0):
    return CorrelationEstimate(value, unc)


def unit(theta, phi):
    return np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])


# --- correlations from counts ------------------------------------------------


def test_correlation_from_counts_examples():
    e = correlation_from_counts(CountRecord(50, 0, 0, 50, duration=1.0))
    assert (e.value, e.uncertainty) == (1.0, 0.0)
    e = correlation_from_counts(CountRecord(25, 25, 25, 25, duration=1.0))
    assert e.value == 0.0
    assert e.uncertainty == pytest.approx(0.1)
    assert correlation_from_counts(CountRecord(0, 50, 50, 0, duration=1.0)).value == -1.0


def test_uncertainty_is_binomial_form():
    rng = np.random.default_rng(89)
    for c in rng.integers(1, 5000, (50, 4)):
        est = correlation_from_counts(CountRecord(*map(int, c), duration=1.0))
        assert est.uncertainty == pytest.approx(math.sqrt((1 - est.value**2) / c.sum()))


def test_low_statistics_warning_and_empty_record():
    with pytest.warns(UserWarning, match="counts"):
        correlation_from_counts(CountRecord(10, 2, 3, 5, duration=1.0))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        correlation_from_counts(CountRecord(25, 25, 25, 25, duration=1.0))
    with pytest.raises(UndefinedCorrelationError):
        correlation_from_counts(CountRecord(0, 0, 0, 0, duration=1.0))


def test_flip_antisymmetry_exact_and_sampled():
    rng = np.random.default_rng(97)
    rho = random_density_matrix(rng)
    a, b = MeasurementBasis(random_bloch(rng)), MeasurementBasis(random_bloch(rng))
    assert exact_correlation(rho, a.flipped(), b).value == -exact_correlation(rho, a, b).value
    rec = CountRecord(412, 97, 130, 388, duration=40.0)
    # flipping analyzer A's outcome labels swaps c_ab <-> c_a'b and c_ab' <-> c_a'b'
    swapped = CountRecord(rec.c_aperp_b, rec.c_ab, rec.c_aperp_bperp, rec.c_a_bperp, duration=40.0)
    e, f = correlation_from_counts(rec), correlation_from_counts(swapped)
    assert f.value == -e.value
    assert f.uncertainty == e.uncertainty
    assert e.flipped().value == -e.value


def test_sampled_correlation_tracks_exact_value():
    rng = np.random.default_rng(98)
    rho = random_density_matrix(rng)
    a, b = MeasurementBasis(random_bloch(rng)), MeasurementBasis(random_bloch(rng))
    det = DetectorConfig(singles_rate_A=0.0)
    exact = exact_correlation(rho, a, b).value
    pulls = []
    for k in range(200):
        e = measure_correlation(rho, a, b, det, 40.0, [98, k], 500.0)
        pulls.append((e.value - exact) / e.uncertainty)
    assert abs(np.mean(pulls)) < 0.25
    assert 0.8 < np.std(pulls) < 1.2
    assert measure_correlation(rho, a, b, det, 40.0, None, 500.0, exact=True).value == pytest.approx(exact)


def test_estimate_validation():
    with pytest.raises(ValueError):
        CorrelationEstimate(1.5)
    with pytest.raises(ValueError):
        CorrelationEstimate(0.5, -0.1)


# --- CHSH --------------------------------------------------------------------


def test_chsh_saturates_tsirelson_on_phi_plus():
    res = evaluate_chsh(RHO_PHI)
    assert res.S == pytest.approx(2 * math.sqrt(2), abs=1e-9)
    assert res.dS == 0.0
    assert evaluate_chsh(maximally_mixed()).S == pytest.approx(0.0, abs=1e-12)


def test_chsh_settings_are_grid_search_maximum():
    # E = a^T T b; equatorial azimuths on a 2-degree grid
    ang = np.radians(np.arange(0, 360, 2))
    vec = np.stack([np.cos(ang), np.sin(ang), np.zeros_like(ang)], axis=1)
    M = vec @ T_PHI @ vec.T  # M[i, j] = E(a_i, b_j)
    # for fixed Bob angles S separates: max_i1 (M[i1,j1] - M[i1,j2]) + max_i2 (M[i2,j1] + M[i2,j2])
    diff = (M[:, :, None] - M[:, None, :]).max(axis=0)
    summ = (M[:, :, None] + M[:, None, :]).max(axis=0)
    best = (diff + summ).max()
    assert best <= evaluate_chsh(RHO_PHI).S + 1e-6


def test_chsh_algebraic_maximum():
    assert chsh_S(E(1), E(-1), E(1), E(1)).S == 4.0


def test_chsh_uncertainty_in_quadrature():
    res = chsh_S(E(0.7, 0.01), E(-0.7, 0.02), E(0.7, 0.02), E(0.7, 0.04))
    assert res.dS == pytest.approx(0.05)
    assert res.significance() == pytest.approx((2.8 - 2) / 0.05)


def test_s_max_from_tangle():
    assert s_max_from_tangle(1.0) == pytest.approx(2 * math.sqrt(2))
    assert s_max_from_tangle(0.0) == 2.0
    assert s_max_from_tangle(0.884) == pytest.approx(2.745, abs=0.001)
    with pytest.raises(ValueError):
        s_max_from_tangle(1.2)


def test_optimal_settings_reach_horodecki_value():
    rng = np.random.default_rng(101)
    for _ in range(20):
        rho = random_density_matrix(rng)
        s = np.linalg.svd(correlation_tensor(rho), compute_uv=False)
        alice, bob = optimal_chsh_settings(rho)
        assert abs(evaluate_chsh(rho, alice, bob).S) == pytest.approx(2 * math.hypot(s[0], s[1]), abs=1e-9)


def test_simulated_dephased_source_near_tangle_ceiling():
    # dephasing only: v = 1, O = sqrt(0.884), so S_max = 2 sqrt(1 + tangle)
    rho = source_state(SourceConfig(overlap=math.sqrt(0.884)))
    assert tangle(rho) == pytest.approx(0.884)
    alice, bob = optimal_chsh_settings(rho)
    assert evaluate_chsh(rho, alice, bob).S == pytest.approx(s_max_from_tangle(0.884), abs=1e-9)
    res = evaluate_chsh(rho, alice, bob, det=DetectorConfig(), duration=40.0, seed=2026)
    assert abs(res.S - 2.745) <= 3 * res.dS


def test_tsirelson_never_exceeded():
    rng = np.random.default_rng(103)
    worst = 0.0
    for _ in range(1000):
        rho = random_density_matrix(rng, rank=int(rng.integers(1, 5)))
        alice = tuple(MeasurementBasis(random_bloch(rng)) for _ in range(2))
        bob = tuple(MeasurementBasis(random_bloch(rng)) for _ in range(2))
        worst = max(worst, abs(evaluate_chsh(rho, alice, bob).S))
    assert worst <= 2 * math.sqrt(2) + 1e-9


def test_chsh_sampled_is_deterministic():
    det = DetectorConfig()
    a = evaluate_chsh(RHO_PHI, det=det, duration=40.0, seed=8)
    b = evaluate_chsh(RHO_PHI, det=det, duration=40.0, seed=8)
    assert a.S == b.S and a.dS == b.dS
    assert a.dS > 0
    assert a.to_dict()["lhv_bound"] == 2.0


# --- beautiful Bell ----------------------------------------------------------


def test_bb_saturates_on_phi_plus():
    res = evaluate_bb(RHO_PHI)
    assert res.S_BB == pytest.approx(4 * math.sqrt(3), abs=1e-9)
    for row in res.terms:
        for e in row:
            assert abs(e.value) == pytest.approx(1 / math.sqrt(3), abs=1e-12)


def test_bb_zero_grid():
    assert bb_S([[E(0)] * 4 for _ in range(3)]).S_BB == 0.0
    with pytest.raises(ValueError):
        bb_S([[E(0)] * 4 for _ in range(2)])


def _bb_value(T, x):
    a = [unit(x[2 * i], x[2 * i + 1]) for i in range(3)]
    b = [unit(x[6 + 2 * j], x[7 + 2 * j]) for j in range(4)]
    return sum(BB_SIGNS[i, j] * a[i] @ T @ b[j] for i in range(3) for j in range(4))


def test_bb_settings_are_numerical_maximum():
    rng = np.random.default_rng(107)
    best = -np.inf
    for _ in range(30):
        res = minimize(lambda x: -_bb_value(T_PHI, x), rng.uniform(0, 2 * math.pi, 14), method="BFGS")
        best = max(best, -res.fun)
    assert best <= 4 * math.sqrt(3) + 1e-6
    assert best == pytest.approx(evaluate_bb(RHO_PHI).S_BB, abs=1e-6)


def test_bb_quantum_bound_never_exceeded():
    rng = np.random.default_rng(109)
    worst = 0.0
    for _ in range(300):
        rho = random_density_matrix(rng, rank=int(rng.integers(1, 5)))
        T = correlation_tensor(rho)
        worst = max(worst, _bb_value(T, rng.uniform(0, 2 * math.pi, 14)))
    for _ in range(10):
        T = correlation_tensor(random_density_matrix(rng, rank=1))
        res = minimize(lambda x: -_bb_value(T, x), rng.uniform(0, 2 * math.pi, 14), method="BFGS")
        worst = max(worst, -res.fun)
    assert worst <= 4 * math.sqrt(3) + 1e-9


def test_bb_min_visibility():
    assert bb_min_visibility() == pytest.approx(0.8660, abs=1e-4)
    assert evaluate_bb(source_state(SourceConfig(purity_weight=0.87))).S_BB > 6
    assert evaluate_bb(source_state(SourceConfig(purity_weight=0.86))).S_BB < 6


def test_table_A2_fixture():
    res = bb_S(fixtures.table_A2())
    assert res.S_BB == pytest.approx(6.672, abs=0.005)
    assert res.significance() >= 8


# --- Leggett -----------------------------------------------------------------


def test_leggett_bound_values():
    assert leggett_bound(0.0) == 2.0
    assert leggett_bound(math.radians(40)) == pytest.approx(1.7720, abs=5e-4)
    assert leggett_bound(math.pi) == pytest.approx(4 / 3)


def test_leggett_settings_geometry():
    phi = math.radians(40)
    alice, bob = leggett_settings(phi)
    for a, (b, bp) in zip(alice, bob):
        assert b.plus.angle_to(bp.plus) == pytest.approx(phi, abs=1e-12)
        # a_i bisects the pair
        assert a.plus.angle_to(b.plus) == pytest.approx(phi / 2, abs=1e-12)
        assert a.plus.angle_to(bp.plus) == pytest.approx(phi / 2, abs=1e-12)
    with pytest.raises(ValueError):
        leggett_settings(0.0)


def test_leggett_small_angle_limit():
    alice, bob = leggett_settings(1e-9)
    for a, (b, bp) in zip(alice, bob):
        assert np.allclose(b.plus.as_array(), a.plus.as_array(), atol=1e-9)
        assert np.allclose(bp.plus.as_array(), a.plus.as_array(), atol=1e-9)


def test_leggett_phi_plus_per_plane():
    phi = math.radians(40)
    res = evaluate_leggett(RHO_PHI, phi)
    for e, ep in res.terms:
        assert abs(e.value + ep.value) == pytest.approx(2 * math.cos(phi / 2), abs=1e-12)
    assert res.L3 == pytest.approx(1.8794, abs=1e-4)
    assert res.L3 == pytest.approx(2 * math.cos(phi / 2), abs=1e-12)


def test_leggett_pairs_reach_plane_maximum():
    # |a^T T (b + b')| <= |b + b'| = 2 cos(phi/2) for unit |T^T a|; random pairs never beat the settings
    rng = np.random.default_rng(113)
    phi = math.radians(40)
    alice, _ = leggett_settings(phi)
    ours = evaluate_leggett(RHO_PHI, phi)
    for i, a in enumerate(alice):
        target = abs(ours.terms[i][0].value + ours.terms[i][1].value)
        av = a.plus.as_array() @ T_PHI
        for _ in range(500):
            m = rng.normal(size=3)
            m /= np.linalg.norm(m)
            u = np.cross(m, rng.normal(size=3))
            u /= np.linalg.norm(u)
            b, bp = (math.cos(phi / 2) * m + s * math.sin(phi / 2) * u for s in (1, -1))
            assert abs(av @ b + av @ bp) <= target + 1e-12


def test_leggett_zero_and_shape():
    zeros = [E(0)] * 6
    assert leggett_L3(zeros, 0.5).L3 == 0.0
    assert leggett_L3([(E(0), E(0))] * 3, 0.5).L3 == 0.0
    with pytest.raises(ValueError):
        leggett_L3(zeros[:4], 0.5)


def test_leggett_monotone_in_phi_for_perfect_state():
    phis = np.radians(np.arange(1, 90, 1.0))
    L = [evaluate_leggett(RHO_PHI, p).L3 for p in phis]
    assert np.all(np.diff(L) < 0)


def test_table_A3_fixture():
    res = leggett_L3(fixtures.table_A3(), math.radians(40))
    assert res.L3 == pytest.approx(1.8215, abs=0.001)
    assert res.violation > 0
    assert res.dL3 == pytest.approx(math.sqrt(sum(e.uncertainty**2 for p in res.terms for e in p)) / 3)


def test_leggett_sampled_deterministic():
    det = DetectorConfig()
    a = evaluate_leggett(RHO_PHI, 0.7, det=det, duration=40.0, seed=4)
    b = evaluate_leggett(RHO_PHI, 0.7, det=det, duration=40.0, seed=4)
    assert a == b


# --- tables ------------------------------------------------------------------


def test_correlation_table_round_trip(tmp_path):
    p = tmp_path / "e.csv"
    grid = fixtures.table_A2()
    write_correlation_table([e for row in grid for e in row], p)
    back = bb_grid_from_table(read_correlation_table(p))
    assert bb_S(back).S_BB == bb_S(grid).S_BB


def test_table_errors(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("setting_a,setting_b,E\n")
    with pytest.raises(FixtureFormatError):
        read_correlation_table(p)
    p.write_text("setting_a,setting_b,E,dE\na0,b0,0.5,0.01\na0,b1,2.0,0.01\n")
    with pytest.raises(FixtureFormatError) as info:
        read_correlation_table(p)
    assert info.value.line == 3
    with pytest.raises(ValueError):
        bb_grid_from_table([CorrelationEstimate(0.1, 0.0, "a0", "b0")])
    with pytest.raises(ValueError):
        leggett_pairs_from_table([CorrelationEstimate(0.1, 0.0, "a1", "b2")])


def test_fixture_tables_match_published_layout():
    grid = fixtures.table_A2()
    signs = np.sign([[e.value for e in row] for row in grid])
    assert np.array_equal(signs, BB_SIGNS)
    pairs = fixtures.table_A3()
    assert [p[0].label_b for p in pairs] == ["b1", "b2", "b3"]
    assert all(itertools.chain.from_iterable((e.uncertainty > 0 for e in p) for p in pairs))


def test_settings_geometry():
    alice, bob = chsh_settings()
    for m in (*alice, *bob):
        assert m.plus.z == 0.0
    assert [m.label for m in (*alice, *bob)] == ["a1", "a2", "b1", "b2"]
    alice, bob = bb_settings()
    assert np.allclose([m.plus.as_array() for m in alice], np.eye(3))
    for m in bob:
        assert np.allclose(np.abs(m.plus.as_array()), 1 / math.sqrt(3))
