"""Scalar link model: urban-micro path loss, SNR, link adaptation, block errors.

Link geometry maps to a single SNR per link per run (path loss plus one
lognormal shadowing draw). Link adaptation converts SNR to a capped spectral
efficiency and a per-symbol transport capacity. All functions are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

THERMAL_NOISE_DBM_PER_HZ = -174.0


@dataclass(frozen=True)
class ChannelConfig:
    carrier_freq_ghz: float = 28.0
    bandwidth_hz: float = 1e9
    tx_power_dbm: float = 30.0
    gnb_gain_dbi: float = 18.0  # 64-element array at the donor/relay side
    ue_gain_dbi: float = 12.0  # 16-element array at the terminal
    noise_figure_db: float = 5.0  # infrastructure receivers
    ue_noise_figure_db: float = 10.0  # terminal receivers
    max_phy_rate_bps: float = 3.2e9
    shannon_gap: float = 0.75  # implementation-loss factor on log2(1+SNR)
    outage_snr_db: float = -5.0
    shadowing_sigma_los_db: float = 4.0
    shadowing_sigma_nlos_db: float = 7.8
    bler_target: float = 0.1  # first-transmission error probability at selection
    bler_db_per_decade: float = 1.0

    def __post_init__(self) -> None:
        if self.bandwidth_hz <= 0:
            raise ConfigurationError("bandwidth must be positive")
        if self.max_phy_rate_bps <= 0:
            raise ConfigurationError("max PHY rate must be positive")

    @property
    def max_spectral_efficiency(self) -> float:
        return self.max_phy_rate_bps / self.bandwidth_hz

    def noise_power_dbm(self, rx_is_gnb: bool = False) -> float:
        nf = self.noise_figure_db if rx_is_gnb else self.ue_noise_figure_db
        return THERMAL_NOISE_DBM_PER_HZ + 10.0 * math.log10(self.bandwidth_hz) + nf


@dataclass(frozen=True)
class LinkState:
    """Static per-run radio state of one directed link."""

    node_a: int
    node_b: int
    distance_3d: float
    los: bool
    snr_db: float
    spectral_efficiency: float
    per_symbol_capacity_bits: int


def path_loss_db(distance_m: float, los: bool, carrier_freq_ghz: float) -> float:
    """Urban-micro street-canyon closed form (distance clamped to 1 m)."""
    d = max(distance_m, 1.0)
    exponent = 21.0 if los else 31.9
    return 32.4 + exponent * math.log10(d) + 20.0 * math.log10(carrier_freq_ghz)


def compute_snr(
    config: ChannelConfig,
    distance_m: float,
    los: bool,
    shadowing_db: float = 0.0,
    rx_gain_dbi: float | None = None,
    rx_is_gnb: bool = False,
) -> float:
    """Downlink budget in dB; the receiver side picks antenna gain and noise
    figure (defaults describe a terminal)."""
    rx_gain = config.ue_gain_dbi if rx_gain_dbi is None else rx_gain_dbi
    pl = path_loss_db(distance_m, los, config.carrier_freq_ghz)
    return (
        config.tx_power_dbm
        + config.gnb_gain_dbi
        + rx_gain
        - pl
        - shadowing_db
        - config.noise_power_dbm(rx_is_gnb)
    )


def link_adapt(
    config: ChannelConfig,
    snr_db: float,
    symbols_per_subframe: int,
    subframe_duration_s: float,
) -> tuple[float, int]:
    """Pick (spectral_efficiency, per_symbol_capacity_bits) for an SNR.

    Efficiency is the gapped Shannon rate capped by the maximum PHY rate; a
    link below the outage threshold carries nothing.
    """
    if not math.isfinite(snr_db):
        raise ConfigurationError(f"non-finite SNR {snr_db}")
    if snr_db < config.outage_snr_db:
        return 0.0, 0
    linear = 10.0 ** (snr_db / 10.0)
    efficiency = min(
        config.shannon_gap * math.log2(1.0 + linear), config.max_spectral_efficiency
    )
    per_symbol = int(
        efficiency
        * config.bandwidth_hz
        * subframe_duration_s
        / symbols_per_subframe
    )
    return efficiency, per_symbol


def tb_error_prob(
    snr_db: float,
    spectral_efficiency: float,
    *,
    shannon_gap: float = 0.75,
    bler_target: float = 0.1,
    db_per_decade: float = 1.0,
) -> float:
    """First-transmission block error probability.

    Equal to ``bler_target`` when the efficiency is exactly what link
    adaptation selects at this SNR, and falls off by a decade per
    ``db_per_decade`` of extra margin.
    """
    if spectral_efficiency <= 0.0:
        return 1.0
    snr_selection_db = 10.0 * math.log10(2.0 ** (spectral_efficiency / shannon_gap) - 1.0)
    margin = snr_db - snr_selection_db
    return float(min(1.0, bler_target * 10.0 ** (-margin / db_per_decade)))


def draw_shadowing(config: ChannelConfig, rng: np.random.Generator, los: bool) -> float:
    sigma = config.shadowing_sigma_los_db if los else config.shadowing_sigma_nlos_db
    return float(rng.normal(0.0, sigma))


def build_link(
    config: ChannelConfig,
    node_a: int,
    node_b: int,
    distance_3d: float,
    los: bool,
    shadowing_db: float,
    rx_is_gnb: bool,
    symbols_per_subframe: int,
    subframe_duration_s: float,
) -> LinkState:
    """Assemble the static link state used by the MAC and data plane."""
    rx_gain = config.gnb_gain_dbi if rx_is_gnb else config.ue_gain_dbi
    snr = compute_snr(
        config, distance_3d, los, shadowing_db, rx_gain_dbi=rx_gain, rx_is_gnb=rx_is_gnb
    )
    efficiency, per_symbol = link_adapt(
        config, snr, symbols_per_subframe, subframe_duration_s
    )
    return LinkState(
        node_a=node_a,
        node_b=node_b,
        distance_3d=distance_3d,
        los=los,
        snr_db=snr,
        spectral_efficiency=efficiency,
        per_symbol_capacity_bits=per_symbol,
    )
