import numpy as np
import pytest

from iosfd import (BeamformerSet, ChannelSet, FadingParams, GeometryConfig,
                   IosState, RunConfig, build_layout, compose_effective,
                   sample_channels, update_state)
from iosfd.linalg import cn_sample
from iosfd.system import stream_counts


def reference_geometry(L=8, K=2, n_tx=2, n_rx=2, n_user=2):
    anchors = np.array([[20.0, 20.0, 1.5], [25.0, -35.0, 1.5], [35.0, -25.0, 1.5]])
    return GeometryConfig(
        n_tx=n_tx, n_rx=n_rx, n_elements=L, n_user_tx=n_user, n_user_rx=n_user,
        tx_anchor=np.array([0.0, 0.0, 5.0]),
        rx_anchor=np.array([0.0, 1.0, 5.0]),
        ios_anchor=np.array([1.0, 1.0, 5.0]),
        user_anchors=anchors[:K],
    )


def random_channels(rng, K=2, n_tx=2, n_rx=2, n_u=2, L=4, scale=1.0, direct=False):
    """Unstructured random link matrices for unit-level oracles."""
    ch = ChannelSet(
        h_ti=scale * cn_sample(rng, (L, n_tx)),
        h_tr=scale * cn_sample(rng, (n_rx, n_tx)),
        h_iu=[scale * cn_sample(rng, (L, n_u)) for _ in range(K)],
        h_ir=scale * cn_sample(rng, (L, n_rx)),
        h_uu=[[scale * cn_sample(rng, (n_u, n_u)) for _ in range(K)] for _ in range(K)],
        h_direct_tu=[scale * cn_sample(rng, (n_u, n_tx)) for _ in range(K)] if direct else None,
        h_direct_ur=[scale * cn_sample(rng, (n_rx, n_u)) for _ in range(K)] if direct else None,
    )
    return ch


def random_ios(rng, L):
    """Feasible random surface state with amplitudes inside the coupling disk."""
    def pair():
        r = rng.uniform(0, 1, size=L)
        split = rng.uniform(0, 1, size=L)
        a = np.sqrt(r * split)
        b = np.sqrt(r * (1 - split))
        return (a * np.exp(2j * np.pi * rng.uniform(size=L)),
                b * np.exp(2j * np.pi * rng.uniform(size=L)))
    theta_t, phi_t = pair()
    theta_u, phi_u = pair()
    return IosState(theta_t, phi_t, theta_u, phi_u)


def random_beamformers(rng, K=2, n_tx=2, n_rx=2, n_u=2, p_b=4.0, p_u=2.0):
    s_d, s_u = stream_counts(n_tx, n_rx, n_u, n_u)
    v_d = [cn_sample(rng, (n_tx, s_d)) for _ in range(K)]
    tot = sum(np.sum(np.abs(v) ** 2) for v in v_d)
    v_d = [v * np.sqrt(p_b / tot) for v in v_d]
    v_u = []
    for _ in range(K):
        v = cn_sample(rng, (n_u, s_u))
        v_u.append(v * np.sqrt(p_u / np.sum(np.abs(v) ** 2)))
    return BeamformerSet(v_d, v_u)


def random_instance(rng, K=2, n_tx=2, n_rx=2, n_u=2, L=4, scale=1.0,
                    noise=0.1, p_b=4.0, p_u=2.0):
    """Channels, surface, beamformers, decoders and weights for one test point."""
    ch = random_channels(rng, K, n_tx, n_rx, n_u, L, scale)
    ios = random_ios(rng, L)
    eff = compose_effective(ch, ios)
    bf = random_beamformers(rng, K, n_tx, n_rx, n_u, p_b, p_u)
    gamma_d = rng.uniform(0.2, 0.8, size=K)
    gamma_u = rng.uniform(0.2, 0.8, size=K)
    noise_users = np.full(K, noise)
    st = update_state(eff, bf, noise_users, noise)
    return ch, ios, eff, bf, st, gamma_d, gamma_u, noise_users, noise


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def fd_gradient(f, x0, h=1e-6):
    """Central finite differences of a real function over a complex array."""
    grad = np.zeros_like(x0, dtype=complex)
    flat = x0.ravel()
    g = grad.ravel()
    for i in range(flat.size):
        for part, mul in ((1.0, 1.0), (1j, 1j)):
            xp = flat.copy(); xp[i] += h * part
            xm = flat.copy(); xm[i] -= h * part
            d = (f(xp.reshape(x0.shape)) - f(xm.reshape(x0.shape))) / (2 * h)
            g[i] += mul * d
    return grad
