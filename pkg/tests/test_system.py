import numpy as np
import pytest

from iosfd import (BeamformerSet, ChannelSet, IosState, compose_direct,
                   compose_effective, downlink_rate, uplink_rate, weighted_sum_rate)
from iosfd.errors import GeometryError
from iosfd.system import rate_bits

from conftest import random_beamformers, random_channels, random_ios


def scalar_channels(h_ti=2.0, h_iu=1.0, h_ir=1.0, h_tr=0.0, h_uu=0.0):
    one = lambda x: np.array([[complex(x)]])
    return ChannelSet(h_ti=one(h_ti), h_tr=one(h_tr), h_iu=[one(h_iu)],
                      h_ir=one(h_ir), h_uu=[[one(h_uu)]])


def test_ios_state_feasibility():
    good = IosState.balanced(4)
    assert good.is_feasible()
    bad = IosState.balanced(4)
    bad.theta_t = np.full(4, 0.9 + 0j)
    assert not bad.is_feasible()
    with pytest.raises(ValueError):
        bad.validate()


def test_phases_canonical_range(rng):
    v = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    ph = IosState.phases(v)
    assert np.all(ph >= 0) and np.all(ph < 2 * np.pi)


def test_surface_off_reduces_to_direct_terms(rng):
    ch = random_channels(rng, K=2, L=4)
    eff = compose_effective(ch, IosState.zeros(4))
    for k in range(2):
        assert np.allclose(eff.h_kd[k], 0)
        assert np.allclose(eff.h_ku[k], 0)
        for j in range(2):
            assert np.allclose(eff.h_jk[j][k], ch.h_uu[j][k])
    assert np.allclose(eff.h_t, ch.h_tr)


def test_scalar_refraction_product():
    ch = scalar_channels(h_ti=2.0, h_iu=1.0)
    ios = IosState.zeros(1)
    ios.phi_t = np.array([0.5 * np.exp(1j * np.pi)])
    eff = compose_effective(ch, ios)
    # conj(1) * 0.5 e^{j pi} * 2 = -1
    assert eff.h_kd[0][0, 0] == pytest.approx(-1.0)


def test_scalar_reflection_self_coupling():
    ch = scalar_channels(h_ti=1.0, h_ir=1.0, h_tr=0.0)
    ios = IosState.zeros(1)
    ios.theta_t = np.array([1.0 + 0j])
    eff = compose_effective(ch, ios)
    assert eff.h_t[0, 0] == pytest.approx(1.0)


def test_compose_is_linear_in_each_vector(rng):
    ch = random_channels(rng, K=2, L=4)
    a, b = random_ios(rng, 4), random_ios(rng, 4)
    eff_a = compose_effective(ch, a)
    eff_b = compose_effective(ch, b)
    summed = IosState(a.theta_t + b.theta_t, a.phi_t + b.phi_t,
                      a.theta_u + b.theta_u, a.phi_u + b.phi_u)
    eff_s = compose_effective(ch, summed)
    for k in range(2):
        assert np.allclose(eff_s.h_kd[k], eff_a.h_kd[k] + eff_b.h_kd[k])
        assert np.allclose(eff_s.h_ku[k], eff_a.h_ku[k] + eff_b.h_ku[k])
        for j in range(2):
            assert np.allclose(eff_s.h_jk[j][k] - ch.h_uu[j][k],
                               (eff_a.h_jk[j][k] - ch.h_uu[j][k])
                               + (eff_b.h_jk[j][k] - ch.h_uu[j][k]))
    assert np.allclose(eff_s.h_t - ch.h_tr,
                       (eff_a.h_t - ch.h_tr) + (eff_b.h_t - ch.h_tr))


def test_compose_rejects_asymmetric_user_arrays(rng):
    ch = random_channels(rng, K=1, L=4, n_u=2)
    ch.h_uu[0][0] = np.zeros((2, 3), dtype=complex)  # claims 3 transmit antennas
    with pytest.raises(GeometryError):
        compose_effective(ch, IosState.zeros(4))


def test_compose_direct_requires_direct_links(rng):
    ch = random_channels(rng, K=2, L=4, direct=False)
    with pytest.raises(ValueError):
        compose_direct(ch)
    ch = random_channels(rng, K=2, L=4, direct=True)
    eff = compose_direct(ch)
    assert np.allclose(eff.h_kd[0], ch.h_direct_tu[0])
    assert np.allclose(eff.h_ku[1], ch.h_direct_ur[1])
    assert np.allclose(eff.h_t, ch.h_tr)


def test_zero_beamformer_zero_rate(rng):
    ch = random_channels(rng, K=2, L=4)
    eff = compose_effective(ch, random_ios(rng, 4))
    bf = random_beamformers(rng, K=2)
    bf.v_d[0][:] = 0
    assert downlink_rate(eff, bf, 0, 0.1) == pytest.approx(0.0, abs=1e-12)
    bf.v_u[1][:] = 0
    assert uplink_rate(eff, bf, 1, 0.1) == pytest.approx(0.0, abs=1e-12)


def test_scalar_snr_one_gives_one_bit():
    ch = scalar_channels(h_ti=1.0, h_iu=1.0)
    ios = IosState.zeros(1)
    ios.phi_t = np.array([1.0 + 0j])
    eff = compose_effective(ch, ios)
    # |h|^2 p / sigma^2 = 1 with h = conj(1)*1*1, p = 1, sigma^2 = 1
    bf = BeamformerSet([np.array([[1.0 + 0j]])], [np.array([[0.0 + 0j]])])
    assert downlink_rate(eff, bf, 0, 1.0) == pytest.approx(1.0)


def test_scalar_uplink_snr_three_gives_two_bits():
    ch = scalar_channels(h_ti=0.0, h_ir=1.0, h_iu=1.0, h_tr=0.0)
    ios = IosState.zeros(1)
    ios.phi_u = np.array([1.0 + 0j])
    eff = compose_effective(ch, ios)
    bf = BeamformerSet([np.array([[0.0 + 0j]])], [np.array([[np.sqrt(3.0) + 0j]])])
    assert uplink_rate(eff, bf, 0, 1.0) == pytest.approx(2.0)


def test_rate_matches_eigenvalue_oracle(rng):
    """log2 det via Cholesky must agree with a generalized-eigenvalue evaluation."""
    ch = random_channels(rng, K=2, L=4)
    eff = compose_effective(ch, random_ios(rng, 4))
    bf = random_beamformers(rng, K=2)
    for k in range(2):
        sig = eff.h_kd[k] @ bf.v_d[k]
        s = sig @ sig.conj().T
        b = 0.1 * np.eye(2, dtype=complex)
        for j in range(2):
            m = eff.h_jk[j][k] @ bf.v_u[j]
            b += m @ m.conj().T
        eig = np.linalg.eigvals(np.linalg.solve(b, s))
        oracle = float(np.sum(np.log2(1 + eig.real)))
        assert downlink_rate(eff, bf, k, 0.1) == pytest.approx(oracle, rel=1e-9)


def test_uplink_rate_decreases_with_self_coupling(rng):
    ch = random_channels(rng, K=2, L=4)
    eff = compose_effective(ch, random_ios(rng, 4))
    bf = random_beamformers(rng, K=2)
    base = uplink_rate(eff, bf, 0, 0.1)
    eff.h_t = 3.0 * eff.h_t
    worse = uplink_rate(eff, bf, 0, 0.1)
    assert worse < base


def test_rate_scaling_invariance(rng):
    s = np.abs(rng.standard_normal()) + 0.5
    a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    sig = a @ a.conj().T
    b = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    den = b @ b.conj().T + np.eye(3)
    assert rate_bits(s * sig, s * den) == pytest.approx(rate_bits(sig, den), rel=1e-10)


def test_weighted_sum_is_convex_combination(rng):
    ch = random_channels(rng, K=1, L=2)
    eff = compose_effective(ch, random_ios(rng, 2))
    bf = random_beamformers(rng, K=1)
    rep = weighted_sum_rate(eff, bf, np.array([0.5]), np.array([0.5]),
                            np.array([0.1]), 0.1)
    assert rep.weighted_sum == pytest.approx(0.5 * rep.r_down[0] + 0.5 * rep.r_up[0])


def test_weighted_sum_matches_manual_oracle(rng):
    ch = random_channels(rng, K=3, L=4)
    eff = compose_effective(ch, random_ios(rng, 4))
    bf = random_beamformers(rng, K=3)
    gd = rng.uniform(0.1, 0.9, 3)
    gu = rng.uniform(0.1, 0.9, 3)
    rep = weighted_sum_rate(eff, bf, gd, gu, np.full(3, 0.05), 0.07)
    manual = sum(gd[k] * downlink_rate(eff, bf, k, 0.05)
                 + gu[k] * uplink_rate(eff, bf, k, 0.07) for k in range(3))
    assert rep.weighted_sum == pytest.approx(manual, rel=1e-12)
    assert np.all(rep.r_down >= 0) and np.all(rep.r_up >= 0)


def test_weights_outside_unit_interval_rejected(rng):
    ch = random_channels(rng, K=1, L=2)
    eff = compose_effective(ch, random_ios(rng, 2))
    bf = random_beamformers(rng, K=1)
    with pytest.raises(ValueError):
        weighted_sum_rate(eff, bf, np.array([1.0]), np.array([0.5]), np.array([0.1]), 0.1)
