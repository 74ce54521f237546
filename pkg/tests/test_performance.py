import math

import numpy as np
import pytest

from cfxl import performance as pf
from cfxl.clustering import ApAssignment, CoopGraph, coop_indicator, threshold_cluster
from cfxl.config import PowerParams, SystemConfig
from cfxl.errors import NumericalError
from cfxl.scenario import Scenario

from conftest import rel_err


def _unit_params():
    return PowerParams(p_c_ap=1, p_p_ap=1, p_fh_ap=1, p_c_ue=1, p_con_ue=1, p_cpu_fix=1,
                       p_en=1, p_de=1, c_con=0, c_cpu=0)


def _setup(sc, p=(0.2, 0.1)):
    assign = ApAssignment(np.array([[True, False], [True, True]]))
    return assign, coop_indicator(assign), pf.TxPower(np.array(p), sc.n_tx)


# -- fixture computed by hand: N_r=4, N_s=2, D=[[1,0],[1,1]], O all-ones, p=(0.2, 0.1)
#    P_ap = (4+1+1) + (4+2+1) = 13; P_ue = 2.2 + 2.1 = 4.3; P_con = 2*2 + 2*2 = 8
#    P_cpu = 1 + 2*(1+1) = 5; total 30.3
FIXTURE_TOTAL = 30.3
# |A_0| = 2, |A_1| = 1; shared part (P_cpu + sum_m (N_r + 1)) / K = 7.5
FIXTURE_SHARES = (2.2 + 4 + 2 + 7.5, 2.1 + 4 + 1 + 7.5)


def test_power_fixture(tiny_scenario):
    assign, coop, tx = _setup(tiny_scenario)
    se = pf.SeResult(np.array([1.0, 1.0]), "closed-form")
    bd = pf.power_breakdown(tiny_scenario, assign, coop, tx, se, _unit_params())
    np.testing.assert_allclose(bd.p_ap, [6, 7], rtol=1e-12)
    np.testing.assert_allclose(bd.p_ue, [2.2, 2.1], rtol=1e-12)
    np.testing.assert_allclose(bd.p_con, [4, 4], rtol=1e-12)
    assert bd.p_cpu == pytest.approx(5.0, rel=1e-12)
    assert bd.p_total == pytest.approx(FIXTURE_TOTAL, rel=1e-12)
    assert pf.energy_efficiency(se, bd.p_total) == pytest.approx(2 / FIXTURE_TOTAL, rel=1e-12)
    shares = pf.attributed_power(bd, assign)
    np.testing.assert_allclose(shares, FIXTURE_SHARES, rtol=1e-12)
    assert pf.per_ue_ee(0, se, bd, assign) == pytest.approx(1 / FIXTURE_SHARES[0], rel=1e-12)


def test_ue_power_nine_antennas():
    cfg = SystemConfig(n_aps=1, n_ues=1, ap_array=(2, 2), ue_array=(3, 3))
    sc = Scenario(cfg, seed=0)
    a = ApAssignment(np.ones((1, 1), bool))
    bd = pf.power_breakdown(sc, a, coop_indicator(a), pf.TxPower([0.2], 9),
                            pf.SeResult(np.zeros(1), "closed-form"), PowerParams(c_con=0, c_cpu=0))
    assert bd.p_ue[0] == pytest.approx(1.1, rel=1e-12)
    assert bd.p_con[0] == pytest.approx(9 * 0.05, rel=1e-12)


def test_default_complexity_terms_positive(tiny_scenario):
    assign, coop, tx = _setup(tiny_scenario)
    bd = pf.power_breakdown(tiny_scenario, assign, coop, tx, pf.SeResult(np.ones(2), "x"), PowerParams())
    assert bd.c_con > 0 and bd.c_cpu == 8 * 4 * 2 * 3


def test_ee_edge_cases():
    se0 = pf.SeResult(np.zeros(3), "x")
    assert pf.energy_efficiency(se0, 5.0) == 0.0
    se = pf.SeResult(np.array([1.0, 2.0]), "x")
    assert pf.energy_efficiency(se, 2.0) == pytest.approx(2 * pf.energy_efficiency(se, 4.0))
    with pytest.raises(ValueError):
        pf.energy_efficiency(se, 0.0)


def test_tx_power_matrix():
    tx = pf.TxPower([0.2, 0.0], 4)
    P = tx.matrix(0)
    assert np.trace(P @ P.conj().T).real == pytest.approx(0.2)
    np.testing.assert_allclose(tx.trace(), [0.2, 0.0])
    with pytest.raises(ValueError):
        pf.TxPower([-0.1], 2)
    with pytest.raises(ValueError):
        pf.NoiseModel(0.0)


def test_mr_combiner_identity():
    H = np.random.default_rng(0).standard_normal((3, 2)) + 0j
    assert pf.mr_combiner(H) is H


def test_zero_power_zero_se(tiny_scenario):
    sc = tiny_scenario
    a = ApAssignment(np.ones((2, 2), bool))
    tx = pf.TxPower([0.0, 0.0], sc.n_tx)
    noise = pf.NoiseModel(sc.config.noise_power)
    assert np.all(pf.se_theorem1_mc(sc, a, tx, noise, 200, seed=0).se == 0)
    Z, T = pf.closed_form_moments(sc, tx)
    assert np.all(pf.se_closed_mr(Z, T, a, tx, noise).se == 0)
    assert np.all(pf.se_closed_fast(sc, a, tx, noise).se == 0)


def test_mc_rejects_zero_samples(tiny_scenario):
    a = ApAssignment(np.ones((2, 2), bool))
    with pytest.raises(ValueError):
        pf.se_theorem1_mc(tiny_scenario, a, pf.TxPower([0.1, 0.1], 2), pf.NoiseModel(1e-13), 0)


def test_mc_deterministic(tiny_scenario):
    a = ApAssignment(np.ones((2, 2), bool))
    tx, noise = pf.TxPower([0.1, 0.1], 2), pf.NoiseModel(1e-13)
    r1 = pf.se_theorem1_mc(tiny_scenario, a, tx, noise, 500, seed=4).se
    r2 = pf.se_theorem1_mc(tiny_scenario, a, tx, noise, 500, seed=4).se
    assert np.array_equal(r1, r2)


def test_se_decreases_with_noise():
    cfg = SystemConfig(n_aps=1, n_ues=1, ap_array=(4, 1), ue_array=(2, 1), side_length=50.0)
    sc = Scenario(cfg, seed=1)
    a = ApAssignment(np.ones((1, 1), bool))
    tx = pf.TxPower([0.2], 2)
    vals = [pf.se_theorem1_mc(sc, a, tx, pf.NoiseModel(s2), 400, seed=0).se[0]
            for s2 in (1e-14, 1e-10, 1e-6, 1e-2)]
    assert all(x > y for x, y in zip(vals, vals[1:]))
    assert vals[-1] < 1e-3


def test_z_closed_form_scalar_collapse():
    cfg = SystemConfig(n_aps=1, n_ues=1, ap_array=(2, 2), ue_array=(1, 1))
    sc = Scenario(cfg, seed=0)
    Z = pf.moments_Z(0.3, sc.profile, sc.ue_basis(0), sc.n_rx)
    u = sc.ue_basis(0).U[:, 0]
    ref = 0.3 ** 2 * sc.n_rx * sc.n_tx * sc.profile.sigma2.sum() * np.outer(u, u.conj())
    np.testing.assert_allclose(Z, ref, rtol=1e-12)
    assert not np.any(pf.moments_Z(0.0, sc.profile, sc.ue_basis(0), sc.n_rx))


def test_z_closed_form_against_mc():
    from cfxl.channel import variance_profile
    cfg = SystemConfig(n_aps=1, n_ues=1, ap_array=(4, 1), ue_array=(3, 1), side_length=50.0)
    base = Scenario(cfg, seed=2)
    rng = np.random.default_rng(7)
    prof = variance_profile(base.ellipse_r, base.ellipse_s, "custom",
                            rng.uniform(0.2, 1.0, base.ellipse_r.n), rng.uniform(0.2, 1.0, base.ellipse_s.n))
    sc = Scenario(cfg, seed=2, profile=prof)
    Zc = pf.moments_Z(sc.beta[0, 0], prof, sc.ue_basis(0), sc.n_rx)
    n = 10_000
    H = pf.sample_channels(sc, n, np.random.default_rng(8))[:, 0, 0]
    G = np.einsum("nri,nrj->nij", H.conj(), H)
    mean, se = G.mean(axis=0), G.std(axis=0, ddof=1) / math.sqrt(n)
    assert np.linalg.norm(mean - Zc) < 3 * np.linalg.norm(se)


def test_t_zero_power_and_zero_mean(tiny_scenario):
    sc = tiny_scenario
    tx0 = pf.TxPower([0.0, 0.0], 2)
    assert not np.any(pf.moments_T_mc(sc, 0, 0, 0, 0, tx0, 100, seed=0))
    tx = pf.TxPower([0.2, 0.2], 2)
    n = 10_000
    T = pf.moments_T_mc(sc, 0, 1, 0, 1, tx, n, seed=1)
    # oracle: per-sample spread from a second independent run sets the scale
    scale = np.linalg.norm(pf.moments_T_closed(sc, 0, 1, 0, 0, tx))
    assert np.linalg.norm(T) < 3 * scale / math.sqrt(n) * 4
    assert not np.any(pf.moments_T_closed(sc, 0, 1, 0, 1, tx))


def test_t_scalar_case_real_nonnegative():
    cfg = SystemConfig(n_aps=1, n_ues=1, ap_array=(4, 1), ue_array=(1, 1), side_length=50.0)
    sc = Scenario(cfg, seed=0)
    T = pf.moments_T_mc(sc, 0, 0, 0, 0, pf.TxPower([0.2], 1), 2000, seed=0)
    assert T.shape == (1, 1)
    assert abs(T[0, 0].imag) < 1e-12 * abs(T[0, 0]) and T[0, 0].real > 0


@pytest.mark.parametrize("idx", [(0, 0, 0, 0), (0, 0, 0, 1), (0, 1, 0, 0), (1, 0, 1, 1)])
def test_t_closed_form_against_mc(tiny_scenario, idx):
    sc = tiny_scenario
    tx = pf.TxPower([0.2, 0.1], 2)
    Tc = pf.moments_T_closed(sc, *idx, tx)
    Tm = pf.moments_T_mc(sc, *idx, tx, n_samples=20_000, seed=5)
    assert rel_err(Tm, Tc) < 0.05


def test_fast_path_matches_full_assembly():
    cfg = SystemConfig(n_aps=3, n_ues=3, ap_array=(4, 2), ue_array=(3, 1), side_length=60.0)
    sc = Scenario(cfg, seed=3)
    tx = pf.TxPower([0.2, 0.05, 0.13], sc.n_tx)
    noise = pf.NoiseModel(cfg.noise_power)
    a = threshold_cluster(sc.beta, np.median(sc.beta, axis=0))
    Z, T = pf.closed_form_moments(sc, tx)
    np.testing.assert_allclose(pf.se_closed_fast(sc, a, tx, noise).se,
                               pf.se_closed_mr(Z, T, a, tx, noise).se, rtol=1e-9)


def test_closed_assembly_with_mc_moments(tiny_scenario):
    sc = tiny_scenario
    tx = pf.TxPower([0.2, 0.15], 2)
    noise = pf.NoiseModel(sc.config.noise_power)
    a = ApAssignment(np.array([[True, False], [True, True]]))
    Z, _ = pf.closed_form_moments(sc, tx)
    T = np.zeros((2, 2, 2, 2, 2, 2), complex)
    seed = 0
    for k in range(2):
        for l in range(2):
            for m in range(2):
                for mp in range(2):
                    seed += 1
                    T[k, l, m, mp] = pf.moments_T_mc(sc, k, l, m, mp, tx, 20_000, seed=seed)
    se_mc_t = pf.se_closed_mr(Z, T, a, tx, noise).se
    se_exact = pf.se_closed_fast(sc, a, tx, noise).se
    assert np.all(np.abs(se_mc_t - se_exact) / se_exact < 0.02)


def test_interference_and_own_power_monotone():
    cfg = SystemConfig(n_aps=3, n_ues=3, ap_array=(4, 1), ue_array=(2, 1), side_length=80.0)
    sc = Scenario(cfg, seed=6)
    noise = pf.NoiseModel(cfg.noise_power)
    a = ApAssignment(np.ones((3, 3), bool))
    base = pf.se_closed_fast(sc, a, pf.TxPower([0.2, 0.1, 0.0], 2), noise).se
    more = pf.se_closed_fast(sc, a, pf.TxPower([0.2, 0.1, 0.05], 2), noise).se
    assert np.all(more[:2] <= base[:2])
    prev = -1.0
    for p in np.linspace(0, 0.2, 9):
        v = pf.se_closed_fast(sc, a, pf.TxPower([p, 0.1, 0.1], 2), noise).se[0]
        assert v >= prev
        prev = v


def test_ee_permutation_invariant():
    cfg = SystemConfig(n_aps=3, n_ues=3, ap_array=(4, 1), ue_array=(2, 1), side_length=80.0)
    sc = Scenario(cfg, seed=6)
    noise = pf.NoiseModel(cfg.noise_power)
    p = np.array([0.2, 0.1, 0.05])
    a = threshold_cluster(sc.beta, np.median(sc.beta, axis=0))
    se = pf.se_closed_fast(sc, a, pf.TxPower(p, 2), noise)
    bd = pf.power_breakdown(sc, a, coop_indicator(a), pf.TxPower(p, 2), se, PowerParams())
    perm = [2, 0, 1]
    sc2 = Scenario(cfg, seed=6, ue_positions=sc.ue_positions[perm])
    a2 = ApAssignment(a.D[:, perm])
    se2 = pf.se_closed_fast(sc2, a2, pf.TxPower(p[perm], 2), noise)
    bd2 = pf.power_breakdown(sc2, a2, coop_indicator(a2), pf.TxPower(p[perm], 2), se2, PowerParams())
    np.testing.assert_allclose(se2.se, se.se[perm], rtol=1e-12)
    assert pf.energy_efficiency(se2, bd2.p_total) == pytest.approx(pf.energy_efficiency(se, bd.p_total), rel=1e-12)


def test_symmetric_pair_equal_ee():
    cfg = SystemConfig(n_aps=2, n_ues=2, ap_array=(4, 1), ue_array=(2, 1),
                       ap_positions=((250.0, 500.0), (750.0, 500.0)),
                       ue_positions=((250.0, 400.0), (750.0, 400.0)))
    sc = Scenario(cfg, seed=0)
    a = ApAssignment(np.ones((2, 2), bool))
    tx = pf.TxPower([0.2, 0.2], 2)
    se = pf.se_closed_fast(sc, a, tx, pf.NoiseModel(cfg.noise_power))
    bd = pf.power_breakdown(sc, a, coop_indicator(a), tx, se, PowerParams())
    assert pf.per_ue_ee(0, se, bd, a) == pytest.approx(pf.per_ue_ee(1, se, bd, a), rel=1e-12)
    assert pf.attributed_power(bd, a).sum() == pytest.approx(bd.p_total, rel=1e-12)


def test_singular_psi_reports():
    with pytest.raises(NumericalError):
        pf.log2det_sinr(np.eye(2), np.zeros((2, 2)))
