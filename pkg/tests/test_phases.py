import numpy as np
import pytest

from iosfd import (IosState, PgdSettings, build_quadratic_forms, compose_effective,
                   project_feasible, solve_qcqp, vectorize)
from iosfd.linalg import cn_sample, min_eigval
from iosfd.phases import (PhaseQuadratic, g_value, gprime_value, hadamard_quadratic,
                          _validated_psd)
from iosfd.wmmse import constant_term, surrogate_objective, update_state

from conftest import random_instance, random_ios


def build_from_instance(inst):
    ch, ios, eff, bf, st, gd, gu, nu, nr = inst
    return build_quadratic_forms(ch, bf, st, gd, gu, nu, nr)


def test_hadamard_trace_identity(rng):
    """Pins the transpose convention: Tr(Phi^H A Phi B) = phi^H (A o B^T) phi."""
    for _ in range(50):
        L = rng.integers(1, 7)
        a = cn_sample(rng, (L, L))
        a = a @ a.conj().T                      # Hermitian PSD
        b = cn_sample(rng, (L, L))              # arbitrary
        phi = cn_sample(rng, (L,))
        lhs = np.trace(np.diag(phi).conj().T @ a @ np.diag(phi) @ b)
        rhs = phi.conj() @ (hadamard_quadratic(a, b) @ phi)
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_linear_term_identity(rng):
    """Tr(Phi^H C^H) + Tr(Phi C) = 2 Re{phi^H conj(diag(C))}."""
    for _ in range(20):
        L = rng.integers(1, 7)
        c = cn_sample(rng, (L, L))
        phi = cn_sample(rng, (L,))
        p = np.diag(phi)
        lhs = np.trace(p.conj().T @ c.conj().T) + np.trace(p @ c)
        rhs = 2.0 * np.real(phi.conj() @ np.conj(np.diagonal(c)))
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_zero_beamformers_leave_only_constant(rng):
    inst = random_instance(rng)
    ch, ios, eff, bf, st, gd, gu, nu, nr = inst
    bf.v_d = [np.zeros_like(v) for v in bf.v_d]
    bf.v_u = [np.zeros_like(v) for v in bf.v_u]
    qf = build_quadratic_forms(ch, bf, st, gd, gu, nu, nr)
    assert np.allclose(qf.b, 0) and np.allclose(qf.d, 0)
    assert np.allclose(qf.c_lin, 0) and np.allclose(qf.z_lin, 0)
    assert np.allclose(qf.f_lin, 0) and np.allclose(qf.y_lin, 0)
    assert qf.r_cg == pytest.approx(constant_term(st, gd, gu, nu, nr))


def test_scalar_quadratic_factor(rng):
    inst = random_instance(rng, K=1, n_tx=1, n_rx=1, n_u=1, L=1)
    ch, ios, eff, bf, st, gd, gu, nu, nr = inst
    qf = build_from_instance(inst)
    h = ch.h_iu[0][0, 0]
    u = st.u_d[0][0, 0]
    w = st.w_d[0][0, 0]
    expected = gd[0] * h * u * w * np.conj(u) * np.conj(h)
    assert qf.a[0][0, 0] == pytest.approx(expected, rel=1e-12)


def test_quadratic_factors_hermitian_psd(rng):
    qf = build_from_instance(random_instance(rng, K=2, L=5))
    for stack in (qf.a, qf.b, qf.x, qf.d):
        for m in stack:
            assert np.allclose(m, m.conj().T, atol=1e-12)
            assert min_eigval(m) >= -1e-9 * max(1.0, np.trace(m).real)


def test_matrix_objective_matches_surrogate(rng):
    """The whole coefficient-space objective must equal the surrogate, at the
    build point and at fresh random surface states."""
    for _ in range(8):
        inst = random_instance(rng, K=2, L=4)
        ch, ios, eff, bf, st, gd, gu, nu, nr = inst
        qf = build_quadratic_forms(ch, bf, st, gd, gu, nu, nr)
        val = g_value(qf, ios)
        ref = surrogate_objective(eff, bf, st, gd, gu, nu, nr)
        assert abs(val - ref) <= 1e-8 * (1.0 + abs(ref))
        other = random_ios(rng, 4)
        val2 = g_value(qf, other)
        ref2 = surrogate_objective(compose_effective(ch, other), bf, st, gd, gu, nu, nr)
        assert abs(val2 - ref2) <= 1e-8 * (1.0 + abs(ref2))


def test_vectorized_objective_matches_matrix_objective(rng):
    for _ in range(8):
        inst = random_instance(rng, K=2, L=4)
        qf = build_from_instance(inst)
        pq = vectorize(qf)
        state = random_ios(rng, 4)
        g = g_value(qf, state)
        gp = gprime_value(pq, state)
        assert g == pytest.approx(-gp + pq.r_cg, rel=1e-10, abs=1e-10)


def test_aggregated_quadratics_psd(rng):
    qf = build_from_instance(random_instance(rng, K=3, L=6))
    pq = vectorize(qf)
    for q in (pq.q_phi_t, pq.q_theta_t, pq.q_phi_u, pq.q_theta_u):
        assert min_eigval(q) >= -1e-9 * max(1.0, np.trace(q).real)
        _validated_psd(q)


def test_projection_cases():
    th, ph = project_feasible(np.array([0.0 + 0j]), np.array([0.0 + 0j]))
    assert th[0] == 0 and ph[0] == 0
    th, ph = project_feasible(np.array([np.sqrt(2) + 0j]), np.array([np.sqrt(2) + 0j]))
    assert abs(th[0]) ** 2 + abs(ph[0]) ** 2 == pytest.approx(1.0)
    assert th[0] == pytest.approx(np.sqrt(2) / 2)
    inside = project_feasible(np.array([0.3 + 0.1j]), np.array([0.2 - 0.4j]))
    assert inside[0][0] == 0.3 + 0.1j and inside[1][0] == 0.2 - 0.4j


def test_projection_is_nearest_point_on_grid(rng):
    """Radial projection beats every candidate on a fine polar grid."""
    for _ in range(5):
        t = 2.0 * cn_sample(rng, (1,))
        p = 2.0 * cn_sample(rng, (1,))
        pt, pp = project_feasible(t, p)
        best = np.inf
        radii = np.linspace(0, 1, 25)
        angles = np.linspace(0, 2 * np.pi, 41, endpoint=False)
        for rt in radii:
            for at in angles:
                cand_t = rt * np.exp(1j * at)
                max_rp = np.sqrt(max(0.0, 1 - rt ** 2))
                for rp in radii * max_rp:
                    # best phase for the refraction slot is the input's own phase
                    cand_p = rp * np.exp(1j * np.angle(p[0]))
                    d = abs(cand_t - t[0]) ** 2 + abs(cand_p - p[0]) ** 2
                    best = min(best, d)
        achieved = abs(pt[0] - t[0]) ** 2 + abs(pp[0] - p[0]) ** 2
        assert achieved <= best + 1e-3


def _single_block_pq(L, q, c):
    zero_q = np.zeros((L, L), dtype=complex)
    zero_c = np.zeros(L, dtype=complex)
    return PhaseQuadratic(q_phi_t=q, q_theta_t=zero_q.copy(), q_phi_u=zero_q.copy(),
                          q_theta_u=zero_q.copy(), c=c, f=zero_c.copy(),
                          z=zero_c.copy(), y=zero_c.copy(), r_cg=0.0)


def test_pgd_interior_optimum():
    L = 3
    c = np.zeros(L, dtype=complex)
    c[0] = 0.3
    pq = _single_block_pq(L, np.eye(L, dtype=complex), c)
    out = solve_qcqp(pq, IosState.zeros(L), PgdSettings(max_iters=2000, tolerance=1e-14))
    assert np.allclose(out.phi_t, np.conj(c), atol=1e-6)


def test_pgd_boundary_optimum_takes_linear_phase():
    L = 2
    c = np.zeros(L, dtype=complex)
    c[0] = 2.0 * np.exp(1j * 0.7)
    pq = _single_block_pq(L, np.eye(L, dtype=complex), c)
    out = solve_qcqp(pq, IosState.zeros(L), PgdSettings(max_iters=5000, tolerance=1e-14))
    # constrained KKT point: unit amplitude at the conjugated linear phase
    assert abs(out.phi_t[0]) == pytest.approx(1.0, abs=1e-6)
    assert np.angle(out.phi_t[0]) == pytest.approx(-0.7, abs=1e-6)


def test_pgd_descends_and_stays_feasible(rng):
    for _ in range(5):
        inst = random_instance(rng, K=2, L=6)
        pq = vectorize(build_from_instance(inst))
        init = random_ios(rng, 6)
        out = solve_qcqp(pq, init, PgdSettings())
        assert out.is_feasible()
        assert gprime_value(pq, out) <= gprime_value(pq, init) + 1e-12


def test_pgd_improves_surrogate_cross_module(rng):
    for _ in range(5):
        inst = random_instance(rng, K=2, L=5)
        ch, ios, eff, bf, st, gd, gu, nu, nr = inst
        pq = vectorize(build_quadratic_forms(ch, bf, st, gd, gu, nu, nr))
        out = solve_qcqp(pq, ios, PgdSettings())
        before = surrogate_objective(eff, bf, st, gd, gu, nu, nr)
        after = surrogate_objective(compose_effective(ch, out), bf, st, gd, gu, nu, nr)
        assert after >= before - 1e-9


def test_gprime_gradient_matches_finite_differences(rng):
    from conftest import fd_gradient
    for _ in range(5):
        inst = random_instance(rng, K=2, L=4)
        pq = vectorize(build_from_instance(inst))
        state = random_ios(rng, 4)

        def f(phi):
            s = state.copy()
            s.phi_t = phi
            return gprime_value(pq, s)

        grad = fd_gradient(f, state.phi_t, h=1e-6)
        analytic = 2.0 * (pq.q_phi_t @ state.phi_t - np.conj(pq.c))
        scale = max(np.max(np.abs(analytic)), 1e-12)
        assert np.max(np.abs(grad - analytic)) <= 1e-5 * scale


def _grid_minimum(q1, c1, q2, c2, n_phase=17, n_amp=9):
    """Joint polar grid over both vectors of one side (L = 2).

    For fixed amplitudes the coupling constraint is inactive, so the two
    phase grids separate; amplitudes are enumerated jointly per element.
    """
    L = q1.shape[0]
    assert L == 2
    amps = np.linspace(0.0, 1.0, n_amp)
    phases = np.linspace(0.0, 2 * np.pi, n_phase, endpoint=False)

    def block_min(q, c, amp_pairs):
        # amp_pairs: (n, 2) amplitudes per element; scan all phase combos
        e1 = np.exp(1j * phases)
        best = np.full(amp_pairs.shape[0], np.inf)
        for p0 in e1:
            for p1 in e1:
                v = np.stack([amp_pairs[:, 0] * p0, amp_pairs[:, 1] * p1], axis=1)
                quad = np.einsum("ni,ij,nj->n", v.conj(), q, v).real
                lin = 2.0 * (v.conj() @ np.conj(c)).real
                best = np.minimum(best, quad - lin)
        return best

    # enumerate feasible amplitude splits per element: (a1, b1) x (a2, b2)
    pairs = [(a, b) for a in amps for b in amps if a * a + b * b <= 1.0 + 1e-12]
    amp1 = np.array([[p1[0], p2[0]] for p1 in pairs for p2 in pairs])
    amp2 = np.array([[p1[1], p2[1]] for p1 in pairs for p2 in pairs])
    b1 = block_min(q1, c1, amp1)
    b2 = block_min(q2, c2, amp2)
    return float(np.min(b1 + b2))


def test_pgd_matches_grid_search_within_tolerance(rng):
    """Normalized L = 2 instances: PGD must not sit above the dense polar grid."""
    for _ in range(6):
        a = cn_sample(rng, (2, 2))
        q1 = a @ a.conj().T
        q1 /= max(np.trace(q1).real, 1e-12)
        b = cn_sample(rng, (2, 2))
        q2 = b @ b.conj().T
        q2 /= max(np.trace(q2).real, 1e-12)
        c1 = 0.7 * cn_sample(rng, (2,))
        c2 = 0.7 * cn_sample(rng, (2,))
        pq = PhaseQuadratic(q_phi_t=q1, q_theta_t=q2,
                            q_phi_u=np.zeros((2, 2), complex),
                            q_theta_u=np.zeros((2, 2), complex),
                            c=c1, f=c2, z=np.zeros(2, complex), y=np.zeros(2, complex),
                            r_cg=0.0)
        out = solve_qcqp(pq, IosState.zeros(2), PgdSettings(max_iters=3000, tolerance=1e-12))
        pgd_obj = gprime_value(pq, out)
        grid_obj = _grid_minimum(q1, c1, q2, c2)
        assert pgd_obj <= grid_obj + 1e-3
