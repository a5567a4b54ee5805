"""Semiclassical radiometry of the readout chain.

Forward model of the spectrum-analyzer noise powers for the hot/cold
load measurement in frequency-translating mode, and the (modified)
Y-factor inversion to system noise and amplifier added noise.  All
noise levels are photon occupations referred to the stated frequency;
the single hbar*omega*B conversion to watts happens at the chain
output.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.constants as sc


class NoiseError(Exception):
    """Base class for noise-chain failures."""


class InversionError(NoiseError):
    """Y-factor at or below 1; the inversion is singular."""


class InconsistentInputsError(NoiseError):
    """Measured Y exceeds the physical bound set by the load noises."""


def photon_occupation(f_hz, t_k):
    """Thermal occupation N = coth(hf / 2 k_B T) / 2 in photon units.

    Uses the small-argument expansion 1/x + x/12 for x = hf/k_BT below
    1e-6, where the direct coth evaluation loses precision.
    """
    f_hz = np.asarray(f_hz, dtype=float)
    t_k = np.asarray(t_k, dtype=float)
    if np.any(f_hz <= 0) or np.any(t_k <= 0):
        raise ValueError("frequency and temperature must be positive")
    x = sc.h * f_hz / (sc.k * t_k)
    small = x < 1e-6
    x_safe = np.where(small, 1.0, x)
    n = np.where(small, 1.0 / np.where(small, x, 1.0) + x / 12.0,
                 0.5 / np.tanh(x_safe / 2.0))
    return float(n) if n.ndim == 0 else n


def hot_load_correction(n_h, n_t, l1):
    """Effective hot-load occupation behind the input path: L1*N_H + (1-L1)*N_T."""
    if not 0.0 <= l1 <= 1.0:
        raise ValueError("L1 must be a power transmission in [0, 1]")
    return l1 * n_h + (1.0 - l1) * n_t


@dataclass(frozen=True)
class NoiseChain:
    """Parameters of the hot/cold load radiometry chain.

    Gains are linear power ratios; added noises are photon occupations
    (A_HEMT, A_R referred to the idler frequency; A'_PA is the amplifier
    added noise in excess of the noise entering at the idler input).
    """

    t_hot: float                # K
    t_cold: float               # K
    t_mxc: float                # K
    l1: float                   # input-path power transmission
    l2: float                   # device-to-HEMT power transmission
    g_ii: float                 # idler-to-idler power gain
    a_pa_prime: float           # photons
    a_hemt: float               # photons
    f_signal_hz: float
    f_idler_hz: float
    g_hemt: float = 1e5
    a_room: float = 1000.0      # photons
    g_room: float = 1e5
    bandwidth_hz: float = 1e6

    def __post_init__(self):
        if min(self.t_hot, self.t_cold, self.t_mxc) <= 0:
            raise ValueError("temperatures must be positive")
        if not (0.0 <= self.l1 <= 1.0 and 0.0 <= self.l2 <= 1.0):
            raise ValueError("L1, L2 must be power transmissions in [0, 1]")
        if min(self.g_ii, self.g_hemt, self.g_room) < 1.0:
            raise ValueError("gains must be >= 1")
        if min(self.a_hemt, self.a_room) < 0.0:
            raise ValueError("added noises must be nonnegative")
        if min(self.f_signal_hz, self.f_idler_hz, self.bandwidth_hz) <= 0:
            raise ValueError("frequencies and bandwidth must be positive")
        # A'_PA is referred in excess of the idler-input occupation, so it
        # may dip below zero by at most that occupation (A_PA >= 0).
        if self.a_pa_prime + self.n_t_idler < 0.0:
            raise ValueError("total amplifier added noise must be nonnegative")

    @property
    def g_si(self) -> float:
        """Frequency-translating gain implied by G_ii (Eq. 4 form)."""
        return (self.g_ii - 1.0) * self.f_idler_hz / self.f_signal_hz

    @property
    def n_t_signal(self) -> float:
        return photon_occupation(self.f_signal_hz, self.t_mxc)

    @property
    def n_t_idler(self) -> float:
        return photon_occupation(self.f_idler_hz, self.t_mxc)

    @property
    def n_hot(self) -> float:
        return photon_occupation(self.f_signal_hz, self.t_hot)

    @property
    def n_cold(self) -> float:
        return photon_occupation(self.f_signal_hz, self.t_cold)

    @property
    def n_hot_eff(self) -> float:
        return hot_load_correction(self.n_hot, self.n_t_signal, self.l1)

    def replace(self, **kw) -> "NoiseChain":
        return replace(self, **kw)


def forward_chain_power(chain: NoiseChain, which: str) -> float:
    """Spectrum-analyzer noise power (W) for 'hot', 'cold' or 'pump_off'."""
    hw_s = sc.hbar * 2.0 * np.pi * chain.f_signal_hz
    hw_i = sc.hbar * 2.0 * np.pi * chain.f_idler_hz
    if which == "pump_off":
        return hw_i * ((chain.n_t_idler + chain.a_hemt) * chain.g_hemt
                       + chain.a_room) * chain.g_room * chain.bandwidth_hz
    if which == "hot":
        n_in = chain.n_hot_eff
    elif which == "cold":
        n_in = chain.n_cold
    else:
        raise ValueError("which must be 'hot', 'cold' or 'pump_off'")
    device_out = (hw_s * chain.g_si * (n_in + chain.a_pa_prime)
                  + hw_i * chain.g_ii * chain.n_t_idler)
    hemt_in = device_out * chain.l2 + hw_i * ((1.0 - chain.l2) * chain.n_t_idler
                                              + chain.a_hemt)
    return (hemt_in * chain.g_hemt + chain.a_room * hw_i) \
        * chain.g_room * chain.bandwidth_hz


def y_factor(p_hot: float, p_cold: float) -> float:
    """Plain Y-factor: hot/cold power ratio."""
    if p_cold <= 0:
        raise ValueError("cold-load power must be positive")
    return p_hot / p_cold


def modified_y(p_hot: float, p_cold: float, p_off: float) -> float:
    """Pump-off-subtracted Y-factor (P_H - P_off) / (P_C - P_off)."""
    if p_cold - p_off <= 0:
        raise InversionError(
            "cold-load power does not exceed the pump-off baseline")
    return (p_hot - p_off) / (p_cold - p_off)


def system_noise(y: float, n_h_eff: float, n_c: float) -> float:
    """Total system noise N_sys = (N'_H - Y N_C)/(Y - 1) in photons."""
    if y <= 1.0:
        raise InversionError("Y-factor must exceed 1")
    n_sys = (n_h_eff - y * n_c) / (y - 1.0)
    if n_sys < 0.0:
        raise InconsistentInputsError(
            "Y exceeds the physical bound N'_H/N_C; inputs inconsistent")
    return n_sys


def added_noise(y_prime: float, n_h_eff: float, n_c: float) -> float:
    """Amplifier added noise A_PA = (N'_H - Y' N_C)/(Y' - 1) in photons.

    This is the common convention including the noise present at the
    idler input; subtract N_T(idler) for the excess form A'_PA.
    """
    return system_noise(y_prime, n_h_eff, n_c)


@dataclass
class NoiseResult:
    """Y-factor inversion products at one frequency point."""

    y: float
    y_prime: float
    n_sys: float                # photons
    a_pa: float                 # photons, idler-input noise included
    a_pa_prime: float           # photons, excess over idler-input noise
    band_n_sys: float = 0.0     # photons, half width from hot-load dT
    band_a_pa: float = 0.0


def invert_chain(p_hot: float, p_cold: float, p_off: float,
                 n_h_eff: float, n_c: float, n_t_idler: float) -> NoiseResult:
    """Invert measured hot/cold/pump-off powers to N_sys and A_PA."""
    y = y_factor(p_hot, p_cold)
    yp = modified_y(p_hot, p_cold, p_off)
    n_sys = system_noise(y, n_h_eff, n_c)
    a_pa = added_noise(yp, n_h_eff, n_c)
    return NoiseResult(y=y, y_prime=yp, n_sys=n_sys, a_pa=a_pa,
                       a_pa_prime=a_pa - n_t_idler)


def round_trip(chain: NoiseChain) -> NoiseResult:
    """Forward powers from the chain, then the full Y-factor inversion."""
    p_h = forward_chain_power(chain, "hot")
    p_c = forward_chain_power(chain, "cold")
    p_off = forward_chain_power(chain, "pump_off")
    return invert_chain(p_h, p_c, p_off, chain.n_hot_eff, chain.n_cold,
                        chain.n_t_idler)


def uncertainty_band(chain: NoiseChain, delta_t_hot: float) -> tuple[float, float]:
    """Half-width of (N_sys, A_PA) from a hot-load temperature uncertainty.

    The measured Y-factors are held fixed; only the inferred hot-load
    occupation moves with T_H +- delta_t_hot.
    """
    if delta_t_hot < 0:
        raise ValueError("temperature uncertainty must be nonnegative")
    if delta_t_hot == 0:
        return 0.0, 0.0
    res = round_trip(chain)
    vals_sys, vals_pa = [], []
    for sgn in (-1.0, 1.0):
        shifted = chain.replace(t_hot=chain.t_hot + sgn * delta_t_hot)
        n_h_eff = shifted.n_hot_eff
        vals_sys.append(system_noise(res.y, n_h_eff, chain.n_cold))
        vals_pa.append(added_noise(res.y_prime, n_h_eff, chain.n_cold))
    return (abs(vals_sys[1] - vals_sys[0]) / 2.0,
            abs(vals_pa[1] - vals_pa[0]) / 2.0)
