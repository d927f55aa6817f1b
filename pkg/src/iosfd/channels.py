"""Monte-Carlo channel realizations for one network drop.

Five links are modeled per realization:

* transmit array -> surface      : pure LoS with the transmit-side gain,
  entry magnitude lam*sqrt(G)/(4*pi*r), phase exp(-j*2*pi*r/lam)
* transmit array -> receive array: Rician with both end gains and
  amplitude path exponent kappa/2 (the in-band self-coupling)
* surface <-> user antennas      : Rician, no gain factor, exponent kappa/2;
  one stored matrix per user serves both directions (reciprocal link)
* surface -> receive array       : pure LoS with the receive-side gain
* user j -> user k               : Rician over the free-space denominator
  4*pi*r (switchable to kappa/2)

NLoS parts are unit-variance circular Gaussians consumed in a fixed order
(transceiver coupling, then each user's surface link, then the user-user
grid row-major, then optional direct links), so a seed pins the realization.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError
from .geometry import (SpatialLayout, antenna_gain, elevations_from_axis,
                       elevations_from_normal, pairwise_distances)
from .linalg import cn_sample

logger = logging.getLogger(__name__)


@dataclass
class FadingParams:
    rician_factor: float            # linear power ratio (chi)
    pathloss_exponent: float = 2.5  # kappa
    gain_exponent_tx: float = 2.0
    gain_exponent_rx: float = 2.0
    uu_free_space: bool = True      # user-user denominator 4*pi*r vs 4*pi*r^(kappa/2)

    def __post_init__(self) -> None:
        if self.rician_factor <= 0:
            raise ValueError("rician_factor must be positive (linear scale)")
        if self.pathloss_exponent < 2:
            logger.warning("pathloss exponent %.3g below free space", self.pathloss_exponent)

    @classmethod
    def from_db(cls, rician_db: float, **kwargs) -> "FadingParams":
        return cls(rician_factor=10.0 ** (rician_db / 10.0), **kwargs)


@dataclass
class ChannelSet:
    """One realization of all link matrices.

    `h_iu[k]` has shape (L, N_u) and is the single stored surface-user matrix;
    the user->surface direction is its entrywise-transposed view
    (`user_to_ios`), never an independent draw.
    """
    h_ti: np.ndarray                    # (L, N_t)
    h_tr: np.ndarray                    # (N_r, N_t)
    h_iu: list[np.ndarray]              # K x (L, N_ur)
    h_ir: np.ndarray                    # (L, N_r)
    h_uu: list[list[np.ndarray]]        # [j][k] -> (N_ur, N_ut), user j tx -> user k rx
    h_direct_tu: list[np.ndarray] | None = None  # K x (N_ur, N_t)
    h_direct_ur: list[np.ndarray] | None = None  # K x (N_r, N_ut)

    @property
    def n_users(self) -> int:
        return len(self.h_iu)

    def user_to_ios(self, j: int) -> np.ndarray:
        """Uplink-direction view of the surface-user link (antenna-major)."""
        return self.h_iu[j].T


def _rician(amplitude: np.ndarray, distances: np.ndarray, wavelength: float,
            chi: float, rng: np.random.Generator) -> np.ndarray:
    los = np.sqrt(chi / (chi + 1.0)) * np.exp(-2j * np.pi * distances / wavelength)
    nlos = np.sqrt(1.0 / (chi + 1.0)) * cn_sample(rng, distances.shape)
    return amplitude * (los + nlos)


def sample_channels(layout: SpatialLayout, fading: FadingParams, seed: int,
                    include_direct: bool = False) -> ChannelSet:
    """Draw one channel realization; identical seeds give identical matrices."""
    rng = np.random.default_rng(seed)
    lam = layout.wavelength
    kappa = fading.pathloss_exponent
    chi = fading.rician_factor

    ios = layout.ios_positions
    tx = layout.tx_positions
    rx = layout.rx_positions

    # Transmit array -> surface (LoS only).
    r_ti = pairwise_distances(ios, tx)
    th_ti = elevations_from_axis(ios, tx, layout.ios_axis)
    h_ti = (lam * np.sqrt(antenna_gain(th_ti, fading.gain_exponent_tx))
            / (4.0 * np.pi * r_ti)) * np.exp(-2j * np.pi * r_ti / lam)

    # Surface -> receive array (LoS only).
    r_ir = pairwise_distances(ios, rx)
    th_ir = elevations_from_axis(ios, rx, layout.ios_axis)
    h_ir = (lam * np.sqrt(antenna_gain(th_ir, fading.gain_exponent_rx))
            / (4.0 * np.pi * r_ir)) * np.exp(-2j * np.pi * r_ir / lam)

    # Transceiver self-coupling, Rician with both end gains.
    r_tr = pairwise_distances(rx, tx)                                   # (N_r, N_t)
    th_at_tx = elevations_from_normal(tx, rx, layout.tx_normal).T       # (N_r, N_t)
    th_at_rx = elevations_from_normal(rx, tx, layout.rx_normal)         # (N_r, N_t)
    amp_tr = (lam * np.sqrt(antenna_gain(th_at_tx, fading.gain_exponent_tx)
                            * antenna_gain(th_at_rx, fading.gain_exponent_rx))
              / (4.0 * np.pi * r_tr ** (kappa / 2.0)))
    h_tr = _rician(amp_tr, r_tr, lam, chi, rng)

    # Surface <-> users (no gain factor); one matrix per user, both directions.
    h_iu = []
    for pos in layout.user_rx_positions:
        r = pairwise_distances(ios, pos)
        amp = lam / (4.0 * np.pi * r ** (kappa / 2.0))
        h_iu.append(_rician(amp, r, lam, chi, rng))

    # User-user grid (includes each user's own tx->rx coupling).
    uu_exp = 1.0 if fading.uu_free_space else kappa / 2.0
    h_uu: list[list[np.ndarray]] = []
    for tx_pos in layout.user_tx_positions:
        row = []
        for rx_pos in layout.user_rx_positions:
            r = pairwise_distances(rx_pos, tx_pos)
            amp = lam / (4.0 * np.pi * r ** uu_exp)
            row.append(_rician(amp, r, lam, chi, rng))
        h_uu.append(row)

    h_direct_tu = h_direct_ur = None
    if include_direct:
        h_direct_tu = []
        for pos in layout.user_rx_positions:
            r = pairwise_distances(pos, tx)
            amp = lam / (4.0 * np.pi * r ** (kappa / 2.0))
            h_direct_tu.append(_rician(amp, r, lam, chi, rng))
        h_direct_ur = []
        for pos in layout.user_tx_positions:
            r = pairwise_distances(rx, pos)
            amp = lam / (4.0 * np.pi * r ** (kappa / 2.0))
            h_direct_ur.append(_rician(amp, r, lam, chi, rng))

    return ChannelSet(h_ti, h_tr, h_iu, h_ir, h_uu, h_direct_tu, h_direct_ur)


def require_reciprocal_user_arrays(ch: ChannelSet) -> None:
    """The surface-user link reuses one matrix for both directions, which only
    typechecks when each user transmits and receives with the same antenna
    count."""
    for j, row in enumerate(ch.h_uu):
        n_ut = row[0].shape[1]
        n_ur = ch.h_iu[j].shape[1]
        if n_ut != n_ur:
            raise GeometryError(
                "surface-assisted schemes need n_user_tx == n_user_rx "
                f"(reciprocal surface link); got {n_ut} != {n_ur}")
