"""Surface-coefficient optimization as a convex QCQP solved by projected gradient.

With precoders, decoders and weights frozen, the surrogate is a quadratic in
each of the four coefficient vectors.  Collecting the couplings into L-by-L
matrices and using  Tr(Phi^H A Phi B) = phi^H (A o B^T) phi  (o = entrywise
product; the transpose convention is pinned by tests) gives, per side,

    minimize  v^H Q v - 2 Re{v^H conj(c)}

over the per-element disks |theta_l|^2 + |phi_l|^2 <= 1.  The aggregated Q
matrices are entrywise products of PSD matrices, hence PSD, so projected
gradient with a Lipschitz step and per-element radial projection descends to
the optimum.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import ChannelSet
from .errors import NumericalError
from .linalg import hermitize
from .system import BeamformerSet, IosState
from .wmmse import WmmseState, constant_term

_PSD_CLIP = 1e-9      # relative eigenvalue clip for roundoff
_PSD_HARD = 1e-6      # beyond this the build is considered broken


@dataclass
class QuadraticFormSet:
    """Per-link coupling matrices (all L x L) plus the coefficient-free rest.

    a[k], b[k], x[k], d[j] are the PSD quadratic factors; c_lin/z_lin carry the
    refraction signal terms and f_lin/y_lin the reflection cross terms (signs
    included).  r_cg collects every term no coefficient can reach.
    """
    a: np.ndarray          # (K, L, L) user-side decoder couplings
    b: np.ndarray          # (K, L, L) downlink illumination of the surface
    x: np.ndarray          # (K, L, L) receive-side decoder couplings
    d: np.ndarray          # (K, L, L) uplink illumination of the surface
    c_lin: np.ndarray      # (K, L, L)   refraction t-side linear terms
    f_lin: np.ndarray      # (K, K, L, L) reflection t-side linear terms
    y_lin: np.ndarray      # (K, K, L, L) reflection u-side linear terms
    z_lin: np.ndarray      # (K, L, L)   refraction u-side linear terms
    r_cg: float


def build_quadratic_forms(ch: ChannelSet, bf: BeamformerSet, st: WmmseState,
                          gamma_down: np.ndarray, gamma_up: np.ndarray,
                          noise_users: np.ndarray, noise_rx: float) -> QuadraticFormSet:
    K = ch.n_users
    L = ch.h_ti.shape[0]
    a = np.zeros((K, L, L), dtype=complex)
    b = np.zeros((K, L, L), dtype=complex)
    x = np.zeros((K, L, L), dtype=complex)
    d = np.zeros((K, L, L), dtype=complex)
    c_lin = np.zeros((K, L, L), dtype=complex)
    f_lin = np.zeros((K, K, L, L), dtype=complex)
    y_lin = np.zeros((K, K, L, L), dtype=complex)
    z_lin = np.zeros((K, L, L), dtype=complex)

    for k in range(K):
        uwd = st.u_d[k] @ st.w_d[k]                      # (N_ur, s_d)
        uwu = st.u_u[k] @ st.w_u[k]                      # (N_r, s_u)
        a[k] = gamma_down[k] * (ch.h_iu[k] @ uwd @ st.u_d[k].conj().T @ ch.h_iu[k].conj().T)
        tv = ch.h_ti @ bf.v_d[k]                         # (L, s_d)
        b[k] = tv @ tv.conj().T
        x[k] = gamma_up[k] * (ch.h_ir @ uwu @ st.u_u[k].conj().T @ ch.h_ir.conj().T)
        uv = ch.h_iu[k] @ bf.v_u[k]                      # (L, s_u)
        d[k] = uv @ uv.conj().T
        c_lin[k] = gamma_down[k] * (ch.h_ti @ bf.v_d[k] @ st.w_d[k]
                                    @ st.u_d[k].conj().T @ ch.h_iu[k].conj().T)
        z_lin[k] = gamma_up[k] * (ch.h_iu[k] @ bf.v_u[k] @ st.w_u[k]
                                  @ st.u_u[k].conj().T @ ch.h_ir.conj().T)

    # Cross terms between the surface paths and the direct paths.
    r_cg = 0.0
    for k in range(K):
        uwd = st.u_d[k] @ st.w_d[k] @ st.u_d[k].conj().T
        uwu = st.u_u[k] @ st.w_u[k] @ st.u_u[k].conj().T
        for j in range(K):
            vju = bf.v_u[j]
            y_lin[k, j] = -gamma_down[k] * (ch.h_iu[j] @ vju @ vju.conj().T
                                            @ ch.h_uu[j][k].conj().T @ uwd
                                            @ ch.h_iu[k].conj().T)
            vjd = bf.v_d[j]
            f_lin[k, j] = -gamma_up[k] * (ch.h_ti @ vjd @ vjd.conj().T
                                          @ ch.h_tr.conj().T @ uwu @ ch.h_ir.conj().T)
            m = ch.h_uu[j][k] @ vju
            r_cg -= gamma_down[k] * float(np.trace(uwd @ m @ m.conj().T).real)
            md = ch.h_tr @ vjd
            r_cg -= gamma_up[k] * float(np.trace(uwu @ md @ md.conj().T).real)

    r_cg += constant_term(st, gamma_down, gamma_up, noise_users, noise_rx)
    return QuadraticFormSet(a, b, x, d, c_lin, f_lin, y_lin, z_lin, r_cg)


def g_value(qf: QuadraticFormSet, ios: IosState) -> float:
    """Objective from the matrix set, via explicit diagonal-matrix traces.

    Equals the weighted surrogate evaluated at the same operating point; the
    vectorized form below must agree term by term.
    """
    pt = np.diag(ios.phi_t)
    tt = np.diag(ios.theta_t)
    pu = np.diag(ios.phi_u)
    tu = np.diag(ios.theta_u)
    K = qf.a.shape[0]
    total = qf.r_cg
    for k in range(K):
        total -= float(np.trace(pt.conj().T @ qf.a[k] @ pt @ qf.b[k]).real)
        total += 2.0 * float(np.trace(pt @ qf.c_lin[k]).real)
        total += 2.0 * float(np.trace(pu @ qf.z_lin[k]).real)
        for j in range(K):
            total -= float(np.trace(tt.conj().T @ qf.x[k] @ tt @ qf.b[j]).real)
            total -= float(np.trace(tu.conj().T @ qf.a[k] @ tu @ qf.d[j]).real)
            total -= float(np.trace(pu.conj().T @ qf.x[k] @ pu @ qf.d[j]).real)
            total += 2.0 * float(np.trace(tt @ qf.f_lin[k, j]).real)
            total += 2.0 * float(np.trace(tu @ qf.y_lin[k, j]).real)
    return total


@dataclass
class PhaseQuadratic:
    """Vectorized problem data: g' = sum over blocks of v^H Q v - 2 Re{v^H conj(c)}."""
    q_phi_t: np.ndarray
    q_theta_t: np.ndarray
    q_phi_u: np.ndarray
    q_theta_u: np.ndarray
    c: np.ndarray          # phi_t linear vector
    f: np.ndarray          # theta_t linear vector
    z: np.ndarray          # phi_u linear vector
    y: np.ndarray          # theta_u linear vector
    r_cg: float


def hadamard_quadratic(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Q with phi^H Q phi = Tr(Phi^H A Phi B); the convention is Q = A o B^T."""
    return a * b.T


def vectorize(qf: QuadraticFormSet) -> PhaseQuadratic:
    a_sum = qf.a.sum(axis=0)
    b_sum = qf.b.sum(axis=0)
    x_sum = qf.x.sum(axis=0)
    d_sum = qf.d.sum(axis=0)
    return PhaseQuadratic(
        q_phi_t=sum(hadamard_quadratic(qf.a[k], qf.b[k]) for k in range(qf.a.shape[0])),
        q_theta_t=hadamard_quadratic(x_sum, b_sum),
        q_phi_u=hadamard_quadratic(x_sum, d_sum),
        q_theta_u=hadamard_quadratic(a_sum, d_sum),
        c=np.diagonal(qf.c_lin.sum(axis=0)).copy(),
        f=np.diagonal(qf.f_lin.sum(axis=(0, 1))).copy(),
        z=np.diagonal(qf.z_lin.sum(axis=0)).copy(),
        y=np.diagonal(qf.y_lin.sum(axis=(0, 1))).copy(),
        r_cg=qf.r_cg,
    )


def _block_value(q: np.ndarray, c: np.ndarray, v: np.ndarray) -> float:
    return float((v.conj() @ (q @ v)).real - 2.0 * (v.conj() @ c.conj()).real)


def gprime_value(pq: PhaseQuadratic, ios: IosState) -> float:
    """Minimization objective; relates to the matrix form by g = -g' + r_cg."""
    return (_block_value(pq.q_phi_t, pq.c, ios.phi_t)
            + _block_value(pq.q_theta_t, pq.f, ios.theta_t)
            + _block_value(pq.q_phi_u, pq.z, ios.phi_u)
            + _block_value(pq.q_theta_u, pq.y, ios.theta_u))


def project_feasible(theta: np.ndarray, phi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Radial projection of each (theta_l, phi_l) pair onto its unit disk."""
    norm2 = np.abs(theta) ** 2 + np.abs(phi) ** 2
    scale = np.where(norm2 > 1.0, 1.0 / np.sqrt(np.maximum(norm2, 1e-300)), 1.0)
    return theta * scale, phi * scale


@dataclass
class PgdSettings:
    max_iters: int = 500
    tolerance: float = 1e-8
    step_policy: str = "lipschitz"   # or "backtracking" (pure halving from 1.0)
    polish: bool = False

    def __post_init__(self) -> None:
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


def _validated_psd(q: np.ndarray) -> tuple[np.ndarray, float]:
    """Clip roundoff-negative eigenvalues; hard failures raise."""
    q = hermitize(q)
    vals, vecs = np.linalg.eigh(q)
    scale = max(float(np.trace(q).real), 1.0)
    if vals[0] < -_PSD_HARD * scale:
        raise NumericalError(f"aggregated quadratic matrix not PSD (min eig {vals[0]:.3e})")
    if vals[0] < 0.0:
        vals = np.clip(vals, 0.0, None)
        q = (vecs * vals) @ vecs.conj().T
    return q, float(vals[-1])


def _pgd_side(q1, c1, q2, c2, v1, v2, settings: PgdSettings):
    """Minimize the two coupled-constraint blocks of one side."""
    q1, lam1 = _validated_psd(q1)
    q2, lam2 = _validated_psd(q2)
    lam = max(lam1, lam2, 1e-30)
    step = 1.0 if settings.step_policy == "backtracking" else 1.0 / (2.0 * lam)

    v1, v2 = project_feasible(v1.copy(), v2.copy())

    def value(a, b):
        return _block_value(q1, c1, a) + _block_value(q2, c2, b)

    f_cur = value(v1, v2)
    for _ in range(settings.max_iters):
        g1 = 2.0 * (q1 @ v1 - c1.conj())
        g2 = 2.0 * (q2 @ v2 - c2.conj())
        trial = step
        for _ in range(60):
            w1, w2 = project_feasible(v1 - trial * g1, v2 - trial * g2)
            f_new = value(w1, w2)
            if f_new <= f_cur + 1e-15:
                break
            trial *= 0.5
        else:
            break
        moved = f_cur - f_new
        v1, v2, f_cur = w1, w2, f_new
        if moved <= settings.tolerance * max(1.0, abs(f_cur)):
            break
    return v1, v2, f_cur


def solve_qcqp(pq: PhaseQuadratic, init: IosState, settings: PgdSettings | None = None,
               sides: tuple[str, ...] = ("t", "u"), tie_sides: bool = False) -> IosState:
    """Projected-gradient solve; the two sides separate unless tied together."""
    settings = settings or PgdSettings()
    out = init.copy()

    if tie_sides:
        phi, theta, _ = _pgd_side(pq.q_phi_t + pq.q_phi_u, pq.c + pq.z,
                                  pq.q_theta_t + pq.q_theta_u, pq.f + pq.y,
                                  init.phi_t, init.theta_t, settings)
        out.phi_t = out.phi_u = phi
        out.theta_t = out.theta_u = theta
    else:
        if "t" in sides:
            out.phi_t, out.theta_t, _ = _pgd_side(pq.q_phi_t, pq.c, pq.q_theta_t, pq.f,
                                                  init.phi_t, init.theta_t, settings)
        if "u" in sides:
            out.phi_u, out.theta_u, _ = _pgd_side(pq.q_phi_u, pq.z, pq.q_theta_u, pq.y,
                                                  init.phi_u, init.theta_u, settings)
        if settings.polish:
            polished = PgdSettings(settings.max_iters, settings.tolerance, "lipschitz")
            return solve_qcqp(pq, out, polished, sides=sides)

    out.validate()
    if gprime_value(pq, out) > gprime_value(pq, init) + 1e-12:
        raise NumericalError("projected gradient failed to descend")
    return out
