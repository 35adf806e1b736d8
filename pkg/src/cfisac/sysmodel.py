"""Network geometry, large-scale fading and noise for the cell-free uplink.

APs and UEs are dropped uniformly in a D x D square that wraps around at its
edges (torus), so every node sees the same statistical neighbourhood.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

import numpy as np

BOLTZMANN = 1.381e-23  # J/K
T0_KELVIN = 290.0


@dataclass
class SystemConfig:
    """Scalar parameters of one simulated network.

    Defaults reproduce the usual cell-free setup: 1.9 GHz carrier, 20 MHz,
    9 dB noise figure, AP/UE heights 15/1.65 m, 100 mW pilot power, 8 dB
    shadowing and a 1 km wrapped square with 50/10 m path-loss breakpoints.
    """

    L: int = 40
    K: int = 20
    tau: int = 10
    D_m: float = 1000.0
    d0_m: float = 10.0
    d1_m: float = 50.0
    fc_MHz: float = 1900.0
    B_Hz: float = 20e6
    noise_figure_dB: float = 9.0
    h_ap_m: float = 15.0
    h_ue_m: float = 1.65
    sigma_sh_dB: float = 8.0
    p_pilot_W: float = 0.1
    p_uplink_W: float = 0.1
    T: int = 200
    eta: tuple | None = None
    # None -> COST-231 Hata constant from fc and the antenna heights
    pathloss_const_dB: float | None = None
    # log-distance terms are evaluated on distances expressed in this unit
    pathloss_distance_unit: str = "km"
    shadowing_everywhere: bool = False
    sinr_power: str = "pilot"
    duplex_factor: float = 0.5

    def __post_init__(self):
        if self.eta is not None:
            self.eta = tuple(float(e) for e in np.atleast_1d(self.eta))
        self.validate()

    def validate(self):
        if self.L < 1 or self.K < 1:
            raise ValueError("L and K must be >= 1")
        if not 1 <= self.tau <= self.T:
            raise ValueError(f"need 1 <= tau <= T, got tau={self.tau}, T={self.T}")
        if not self.d0_m < self.d1_m < self.D_m:
            raise ValueError("need d0 < d1 < D")
        if min(self.p_pilot_W, self.p_uplink_W, self.B_Hz) <= 0:
            raise ValueError("powers and bandwidth must be positive")
        if self.sigma_sh_dB < 0:
            raise ValueError("sigma_sh_dB must be nonnegative")
        if self.eta is not None:
            if len(self.eta) != self.K:
                raise ValueError("eta must have one entry per UE")
            if any(not 0 < e <= 1 for e in self.eta):
                raise ValueError("eta entries must lie in (0, 1]")
        if self.pathloss_distance_unit not in ("km", "m"):
            raise ValueError("pathloss_distance_unit must be 'km' or 'm'")
        if self.sinr_power not in ("pilot", "uplink"):
            raise ValueError("sinr_power must be 'pilot' or 'uplink'")
        if not 0 < self.duplex_factor <= 1:
            raise ValueError("duplex_factor must lie in (0, 1]")

    def replace(self, **changes) -> "SystemConfig":
        return replace(self, **changes)

    @property
    def eta_vector(self) -> np.ndarray:
        if self.eta is None:
            return np.ones(self.K)
        return np.asarray(self.eta, dtype=float)

    @property
    def pathloss_const(self) -> float:
        if self.pathloss_const_dB is not None:
            return float(self.pathloss_const_dB)
        return cost231_constant_dB(self.fc_MHz, self.h_ap_m, self.h_ue_m)

    @property
    def rho_p(self) -> float:
        """Normalized pilot SNR (transmit power over noise power)."""
        return self.p_pilot_W / noise_power_W(self)

    @property
    def rho_u(self) -> float:
        """Normalized uplink data SNR."""
        return self.p_uplink_W / noise_power_W(self)

    @property
    def rho_sinr(self) -> float:
        """SNR used inside the closed-form SINR, selected by ``sinr_power``."""
        return self.rho_p if self.sinr_power == "pilot" else self.rho_u

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass
class NetworkGeometry:
    ap_xy: np.ndarray  # (L, 2)
    ue_xy: np.ndarray  # (K, 2)
    h_ap_m: float
    h_ue_m: float
    D_m: float

    @property
    def L(self) -> int:
        return self.ap_xy.shape[0]

    @property
    def K(self) -> int:
        return self.ue_xy.shape[0]


@dataclass
class BetaMatrix:
    """Large-scale fading gains, linear scale, shape (L, K)."""

    beta: np.ndarray

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        if self.beta.ndim != 2:
            raise ValueError("beta must be an L x K matrix")
        if not np.all(np.isfinite(self.beta)) or np.any(self.beta <= 0):
            raise ValueError("beta entries must be finite and strictly positive")

    @property
    def shape(self):
        return self.beta.shape


@dataclass
class ChannelRealization:
    g: np.ndarray  # (L, K) complex


def cost231_constant_dB(fc_MHz: float, h_ap_m: float, h_ue_m: float) -> float:
    """COST-231 Hata constant term used by the three-slope model."""
    lf = math.log10(fc_MHz)
    return (46.3 + 33.9 * lf - 13.82 * math.log10(h_ap_m)
            - (1.1 * lf - 0.7) * h_ue_m + (1.56 * lf - 0.8))


def place_network(cfg: SystemConfig, rng: np.random.Generator) -> NetworkGeometry:
    """Drop ``cfg.L`` APs and ``cfg.K`` UEs i.i.d. uniformly on [0, D)^2."""
    ap = rng.uniform(0.0, cfg.D_m, size=(cfg.L, 2))
    ue = rng.uniform(0.0, cfg.D_m, size=(cfg.K, 2))
    return NetworkGeometry(ap, ue, cfg.h_ap_m, cfg.h_ue_m, cfg.D_m)


_SHIFTS = np.array([(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)], dtype=float)


def wrapped_distance(a, b, cfg: SystemConfig) -> np.ndarray:
    """3-D distance between planar points ``a`` and ``b`` on the wrapped square.

    The planar part is the minimum over the nine translated copies of ``b``;
    the vertical part is the AP/UE height difference. ``a`` and ``b``
    broadcast against each other with a trailing axis of size 2.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    diff = a - b
    copies = diff[..., None, :] + cfg.D_m * _SHIFTS
    planar_sq = np.min(np.sum(copies ** 2, axis=-1), axis=-1)
    dh = cfg.h_ap_m - cfg.h_ue_m
    return np.sqrt(planar_sq + dh ** 2)


def distance_matrix(geom: NetworkGeometry, cfg: SystemConfig) -> np.ndarray:
    """(L, K) wrapped AP-UE distances."""
    return wrapped_distance(geom.ap_xy[:, None, :], geom.ue_xy[None, :, :], cfg)


def path_loss_dB(d, cfg: SystemConfig) -> np.ndarray:
    """Three-slope path loss in dB (a negative number) for distances in metres."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    scale = 1e-3 if cfg.pathloss_distance_unit == "km" else 1.0
    L0 = cfg.pathloss_const
    far = -L0 - 35.0 * np.log10(d * scale)
    mid = -L0 - 15.0 * np.log10(cfg.d1_m * scale) - 20.0 * np.log10(d * scale)
    near = -L0 - 15.0 * np.log10(cfg.d1_m * scale) - 20.0 * np.log10(cfg.d0_m * scale)
    return np.where(d > cfg.d1_m, far, np.where(d > cfg.d0_m, mid, near))


def path_loss_linear(d, cfg: SystemConfig) -> np.ndarray:
    return 10.0 ** (path_loss_dB(d, cfg) / 10.0)


def large_scale_fading(geom: NetworkGeometry, cfg: SystemConfig,
                       rng: np.random.Generator) -> BetaMatrix:
    """beta = PL * 10^(sigma_sh z / 10), z ~ N(0, 1) per link.

    Shadowing is only applied beyond the first breakpoint ``d1`` unless
    ``cfg.shadowing_everywhere`` is set.
    """
    d = distance_matrix(geom, cfg)
    pl_dB = path_loss_dB(d, cfg)
    z = rng.standard_normal(d.shape)
    shadow_dB = cfg.sigma_sh_dB * z
    if not cfg.shadowing_everywhere:
        shadow_dB = np.where(d > cfg.d1_m, shadow_dB, 0.0)
    return BetaMatrix(10.0 ** ((pl_dB + shadow_dB) / 10.0))


def noise_power_W(cfg: SystemConfig) -> float:
    """Thermal noise power B * k_B * T0 * NF over the signal bandwidth."""
    if cfg.B_Hz <= 0:
        raise ValueError("bandwidth must be positive")
    return cfg.B_Hz * BOLTZMANN * T0_KELVIN * 10.0 ** (cfg.noise_figure_dB / 10.0)


def draw_channel(beta: BetaMatrix, rng: np.random.Generator) -> ChannelRealization:
    """g = sqrt(beta) * h with h ~ CN(0, 1) i.i.d."""
    b = beta.beta
    h = (rng.standard_normal(b.shape) + 1j * rng.standard_normal(b.shape)) / np.sqrt(2.0)
    return ChannelRealization(np.sqrt(b) * h)


def drop_network(cfg: SystemConfig, rng: np.random.Generator) -> BetaMatrix:
    """Geometry plus large-scale fading in one call."""
    return large_scale_fading(place_network(cfg, rng), cfg, rng)
