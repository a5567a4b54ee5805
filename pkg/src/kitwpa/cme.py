"""Four-wave-mixing coupled-mode equations along the nonlinear line.

The tone set (pump, signal, idler, third harmonic, upper sidebands, or a
two-tone extension) is closed under the cubic kinetic-inductance mixing;
each target amplitude evolves as

    dA_t/dz = i k_t/(24 I*^2) * sum_terms mult * prod(sources) * exp(i dk z)
              - (alpha_t/2) A_t

in a rotating frame where the linear phases k_m z are absorbed into the
per-term mismatch dk.  The multiplicities are the multinomial counts of
the cubic expansion, which makes the 3-mode reduction carry the familiar
1:2 self/cross phase modulation weights and conserves the Manley-Rowe
photon fluxes exactly.

Amplitudes are currents in amperes; powers refer to a 50 ohm line via
P = |A|^2 Z0 / 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from math import factorial

import numpy as np
from numba import njit

from .device import DeviceSpec, DispersionCurve

Z0_REF = 50.0


class CmeError(Exception):
    """Base class for coupled-mode failures."""


class ModeInStopbandError(CmeError):
    """A derived tone falls inside a dispersion stop band."""


class StiffnessError(CmeError):
    """Adaptive step size underflowed."""


class ModeSetTooLargeError(CmeError):
    """Extended mode set exceeds the supported size."""


def amp_from_watt(p_w: float) -> float:
    """Current amplitude for power on the 50 ohm reference."""
    return np.sqrt(2.0 * p_w / Z0_REF)


def watt_from_amp(a) -> float:
    return np.abs(a) ** 2 * Z0_REF / 2.0


def amp_from_dbm(p_dbm: float) -> float:
    return amp_from_watt(1e-3 * 10.0 ** (p_dbm / 10.0))


def dbm_from_amp(a) -> float:
    p = watt_from_amp(a)
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(p / 1e-3)


@dataclass(frozen=True)
class PumpConfig:
    """Pump tone and mode-set selection.

    mode_selection: "3-mode" keeps the canonical pump/signal/idler
    triplet; "6-mode" adds the third harmonic and both upper sidebands;
    "two-tone" selects the extended two-signal intermodulation set.
    """

    f_pump_hz: float
    i_pump: float                      # A
    mode_selection: str = "6-mode"

    def __post_init__(self):
        if self.f_pump_hz <= 0:
            raise ValueError("pump frequency must be positive")
        if self.i_pump < 0:
            raise ValueError("pump amplitude must be nonnegative")
        if self.mode_selection not in ("3-mode", "6-mode", "two-tone"):
            raise ValueError(f"unknown mode selection {self.mode_selection!r}")

    @classmethod
    def from_power_dbm(cls, f_pump_hz, p_pump_dbm, **kw) -> "PumpConfig":
        return cls(f_pump_hz, amp_from_dbm(p_pump_dbm), **kw)

    @property
    def power_w(self) -> float:
        return watt_from_amp(self.i_pump)


@dataclass(frozen=True)
class Mode:
    label: str
    freq_hz: float
    k: float                 # rad/m
    alpha: float             # Np/m
    coeff: tuple[int, ...]   # integer combination of the base frequencies


@dataclass(frozen=True)
class MixingTerm:
    """One cubic product driving a target mode.

    sources are indices into the mode list, each with a conjugation
    flag; multiplicity is the number of distinct ordered arrangements of
    the source triple; delta_k the residual wavenumber mismatch in the
    rotating frame.
    """

    target: int
    sources: tuple[int, int, int]
    conj: tuple[bool, bool, bool]
    multiplicity: int
    delta_k: float


@dataclass
class ModeSet:
    modes: list[Mode]
    terms: list[MixingTerm]
    i_star: float
    amplitudes: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.amplitudes is None:
            self.amplitudes = np.zeros(len(self.modes), dtype=complex)
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if len(self.amplitudes) != len(self.modes):
            raise ValueError("amplitude vector length mismatch")

    def index(self, label: str) -> int:
        for j, m in enumerate(self.modes):
            if m.label == label:
                return j
        raise KeyError(label)

    def seeded(self, **label_amps) -> "ModeSet":
        """Copy with the given labels set to the given complex amplitudes."""
        amps = self.amplitudes.copy()
        for label, a in label_amps.items():
            amps[self.index(label)] = a
        return ModeSet(self.modes, self.terms, self.i_star, amps)


def enumerate_mixing_terms(modes: list[Mode]) -> list[MixingTerm]:
    """All conjugation-signed source triples closed on the mode set.

    Enumerates multisets of signed modes whose integer frequency
    coefficients sum exactly to another mode of the set; exactness of
    the closure relies on the integer bookkeeping, not on floats.
    """
    coeffs = {m.coeff: j for j, m in enumerate(modes)}
    signed = [(j, s) for j in range(len(modes)) for s in (+1, -1)]
    terms = []
    for triple in combinations_with_replacement(signed, 3):
        total = tuple(
            sum(s * modes[j].coeff[q] for j, s in triple)
            for q in range(len(modes[0].coeff)))
        tgt = coeffs.get(total)
        if tgt is None:
            continue
        counts: dict[tuple[int, int], int] = {}
        for item in triple:
            counts[item] = counts.get(item, 0) + 1
        mult = factorial(3)
        for c in counts.values():
            mult //= factorial(c)
        dk = sum(s * modes[j].k for j, s in triple) - modes[tgt].k
        terms.append(MixingTerm(
            target=tgt,
            sources=tuple(j for j, _ in triple),
            conj=tuple(s < 0 for _, s in triple),
            multiplicity=mult,
            delta_k=float(dk),
        ))
    return terms


def _make_mode(label, coeff, base_freqs, curve, spec) -> Mode:
    f = float(np.dot(coeff, base_freqs))
    if f <= 0:
        raise CmeError(f"derived tone {label!r} has nonpositive frequency")
    if not curve.covers(f):
        raise CmeError(
            f"tone {label!r} at {f:.4g} Hz is outside the dispersion grid")
    if curve.in_stopband(f):
        raise ModeInStopbandError(
            f"tone {label!r} at {f:.4g} Hz falls inside a stop band")
    return Mode(label=label, freq_hz=f, k=float(curve.k_at(f).real),
                alpha=float(spec.alpha(f)), coeff=tuple(coeff))


def build_mode_set(pump: PumpConfig, f_signal_hz: float,
                   curve: DispersionCurve, spec: DeviceSpec) -> ModeSet:
    """Mode set and mixing-term table for a pump/signal pair.

    The pump amplitude is preloaded; seed the signal (or idler) with
    ModeSet.seeded before integrating.
    """
    if f_signal_hz <= 0:
        raise ValueError("signal frequency must be positive")
    if f_signal_hz == pump.f_pump_hz:
        raise ValueError("signal must differ from the pump (degenerate input)")
    if pump.i_pump >= spec.i_star:
        raise ValueError("pump amplitude must stay below I*")

    base = (pump.f_pump_hz, f_signal_hz)
    layout = [("pump", (1, 0)), ("signal", (0, 1)), ("idler", (2, -1))]
    if pump.mode_selection == "6-mode":
        layout += [("third_harmonic", (3, 0)),
                   ("usb_s", (2, 1)), ("usb_i", (4, -1))]
    modes = [_make_mode(lbl, cf, base, curve, spec) for lbl, cf in layout]
    freqs = [m.freq_hz for m in modes]
    if len(set(freqs)) != len(freqs):
        raise CmeError("degenerate tone frequencies in the mode set")
    mset = ModeSet(modes, enumerate_mixing_terms(modes), spec.i_star)
    mset.amplitudes[0] = pump.i_pump
    return mset


def build_two_tone_set(pump: PumpConfig, f1_hz: float, f2_hz: float,
                       curve: DispersionCurve, spec: DeviceSpec) -> ModeSet:
    """Two-signal mode set with third-order intermods and their idlers."""
    if f1_hz == f2_hz:
        raise ValueError("two-tone frequencies must differ")
    base = (pump.f_pump_hz, f1_hz, f2_hz)
    layout = [
        ("pump", (1, 0, 0)),
        ("signal_1", (0, 1, 0)), ("signal_2", (0, 0, 1)),
        ("idler_1", (2, -1, 0)), ("idler_2", (2, 0, -1)),
        ("imd_21", (0, 2, -1)), ("imd_12", (0, -1, 2)),
        ("imd_idler_21", (2, -2, 1)), ("imd_idler_12", (2, 1, -2)),
    ]
    if len(layout) > 16:
        raise ModeSetTooLargeError("extended mode set capped at 16 modes")
    modes = [_make_mode(lbl, cf, base, curve, spec) for lbl, cf in layout]
    freqs = [m.freq_hz for m in modes]
    if len(set(freqs)) != len(freqs):
        raise ModeSetTooLargeError(
            "two-tone spacing produces coincident tones; adjust f1/f2")
    mset = ModeSet(modes, enumerate_mixing_terms(modes), spec.i_star)
    mset.amplitudes[0] = pump.i_pump
    return mset


def phase_mismatch(f_signal_hz, pump: PumpConfig, curve: DispersionCurve,
                   i_star: float):
    """Residual of the four-wave-mixing phase-matching condition.

    kappa = k_s + k_i - 2 k_p + k_p I_p^2 / (4 I*^2); a zero marks a
    phase-matched band center.
    """
    f_s = np.asarray(f_signal_hz, dtype=float)
    f_i = 2.0 * pump.f_pump_hz - f_s
    k_s = curve.k_at(f_s).real
    k_i = curve.k_at(f_i).real
    k_p = curve.k_at(pump.f_pump_hz).real
    return k_s + k_i - 2.0 * k_p + k_p * pump.i_pump ** 2 / (4.0 * i_star ** 2)


# ---------------------------------------------------------------------------
# Integration kernel: embedded Dormand-Prince 5(4) on the complex envelopes.
# scipy's generic solver loop dominates the runtime for sweeps of thousands
# of short integrations, so the whole adaptive loop is jitted.

_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = np.array([
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1 / 5, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3 / 40, 9 / 40, 0.0, 0.0, 0.0, 0.0],
    [44 / 45, -56 / 15, 32 / 9, 0.0, 0.0, 0.0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0.0, 0.0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0.0],
])
_DP_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_DP_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920,
                  -17253 / 339200, 22 / 525, -1 / 40])


@njit(cache=True, nogil=True, fastmath=True)
def _rhs(z, a, tgt, src, cj, coef, dk, alpha, out):
    n = a.shape[0]
    for m in range(n):
        out[m] = -0.5 * alpha[m] * a[m]
    for t in range(tgt.shape[0]):
        p = 1.0 + 0.0j
        for q in range(3):
            s = a[src[t, q]]
            if cj[t, q]:
                s = s.conjugate()
            p *= s
        out[tgt[t]] += 1j * coef[t] * p * np.exp(1j * dk[t] * z)


@njit(cache=True, nogil=True, fastmath=True)
def _integrate(a0, z_end, rtol, atol, tgt, src, cj, coef, dk, alpha,
               c_nodes, a_tab, b_tab, e_tab, record, rec_cap):
    """Adaptive DP5(4); returns (status, final, z_rec, a_rec, n_rec, max_amp).

    status: 0 ok, 1 step underflow, 2 trajectory buffer exhausted.
    """
    n = a0.shape[0]
    a = a0.copy()
    k_st = np.zeros((7, n), dtype=np.complex128)
    tmp = np.zeros(n, dtype=np.complex128)
    z = 0.0
    h = z_end * 1e-4
    h_min = z_end * 1e-14
    max_amp = 0.0
    for m in range(n):
        if abs(a[m]) > max_amp:
            max_amp = abs(a[m])

    z_rec = np.zeros(rec_cap if record else 1)
    a_rec = np.zeros((rec_cap if record else 1, n), dtype=np.complex128)
    n_rec = 0
    if record:
        z_rec[0] = 0.0
        a_rec[0] = a
        n_rec = 1

    _rhs(z, a, tgt, src, cj, coef, dk, alpha, k_st[0])
    while z < z_end:
        if h < h_min:
            return 1, a, z_rec, a_rec, n_rec, max_amp
        if z + h > z_end:
            h = z_end - z
        for i in range(1, 6):
            for m in range(n):
                tmp[m] = a[m]
            for j in range(i):
                w = a_tab[i, j] * h
                for m in range(n):
                    tmp[m] += w * k_st[j, m]
            _rhs(z + c_nodes[i] * h, tmp, tgt, src, cj, coef, dk, alpha, k_st[i])
        # 5th-order solution
        for m in range(n):
            tmp[m] = a[m]
        for j in range(6):
            w = b_tab[j] * h
            for m in range(n):
                tmp[m] += w * k_st[j, m]
        _rhs(z + h, tmp, tgt, src, cj, coef, dk, alpha, k_st[6])
        # embedded error estimate
        err = 0.0
        for m in range(n):
            e = 0.0 + 0.0j
            for j in range(7):
                e += e_tab[j] * k_st[j, m]
            e *= h
            sc_m = atol + rtol * max(abs(a[m]), abs(tmp[m]))
            r = abs(e) / sc_m
            err += r * r
        err = np.sqrt(err / n)
        if err <= 1.0:
            z += h
            for m in range(n):
                a[m] = tmp[m]
                if abs(a[m]) > max_amp:
                    max_amp = abs(a[m])
            for m in range(n):
                k_st[0, m] = k_st[6, m]     # FSAL
            if record:
                if n_rec >= rec_cap:
                    return 2, a, z_rec, a_rec, n_rec, max_amp
                z_rec[n_rec] = z
                a_rec[n_rec] = a
                n_rec += 1
        if err == 0.0:
            fac = 5.0
        else:
            fac = 0.9 * err ** (-0.2)
            if fac > 5.0:
                fac = 5.0
            elif fac < 0.2:
                fac = 0.2
        h *= fac
    return 0, a, z_rec, a_rec, n_rec, max_amp


@dataclass
class CmeResult:
    """Trajectory of the coupled-mode integration."""

    labels: list[str]
    final: np.ndarray          # complex amplitudes at z = z_end
    z: np.ndarray | None       # accepted step locations (record=True)
    trajectory: np.ndarray | None
    max_amp: float
    amp_warning: bool          # amplitude exceeded I* somewhere

    def power_dbm(self, label: str) -> float:
        return dbm_from_amp(self.final[self.labels.index(label)])


def _term_arrays(mset: ModeSet, freeze_pump: bool):
    terms = mset.terms
    if freeze_pump:
        pump = mset.index("pump")
        kept = []
        for t in terms:
            if t.target != pump:
                kept.append(t)
            elif t.sources == (pump, pump, pump) and sorted(t.conj) == [False, False, True]:
                kept.append(t)      # keep the pump's own phase rotation
        terms = kept
    n_t = len(terms)
    tgt = np.zeros(n_t, dtype=np.int64)
    src = np.zeros((n_t, 3), dtype=np.int64)
    cj = np.zeros((n_t, 3), dtype=np.bool_)
    coef = np.zeros(n_t)
    dk = np.zeros(n_t)
    gamma = np.array([m.k / (24.0 * mset.i_star ** 2) for m in mset.modes])
    for j, t in enumerate(terms):
        tgt[j] = t.target
        src[j] = t.sources
        cj[j] = t.conj
        coef[j] = gamma[t.target] * t.multiplicity
        dk[j] = t.delta_k
    return tgt, src, cj, coef, dk


def cme_integrate(mset: ModeSet, spec: DeviceSpec, z_span: float | None = None,
                  rtol: float = 1e-9, freeze_pump: bool = False,
                  include_loss: bool = True, record: bool = False,
                  rec_cap: int = 200_000) -> CmeResult:
    """Integrate the coupled-mode equations over the line length.

    freeze_pump drops every pump-depleting term, leaving the pump with
    its self-phase rotation only (undepleted approximation).
    """
    if not 1e-12 <= rtol <= 1e-3:
        raise ValueError("rtol outside [1e-12, 1e-3]")
    if not np.all(np.isfinite(mset.amplitudes)):
        raise ValueError("initial amplitudes must be finite")
    z_end = spec.length if z_span is None else float(z_span)
    if z_end <= 0:
        raise ValueError("integration span must be positive")

    tgt, src, cj, coef, dk = _term_arrays(mset, freeze_pump)
    alpha = np.array([m.alpha for m in mset.modes]) if include_loss \
        else np.zeros(len(mset.modes))
    scale = np.max(np.abs(mset.amplitudes))
    atol = max(scale * rtol * 1e-3, 1e-30)

    status, final, z_rec, a_rec, n_rec, max_amp = _integrate(
        mset.amplitudes.astype(np.complex128), z_end, rtol, atol,
        tgt, src, cj, coef, dk, alpha,
        _DP_C, _DP_A, _DP_B, _DP_E, record, rec_cap)
    if status == 1:
        raise StiffnessError("step size underflow in the coupled-mode solver")
    if status == 2:
        raise CmeError("trajectory buffer exhausted; raise rec_cap")
    return CmeResult(
        labels=[m.label for m in mset.modes],
        final=final,
        z=z_rec[:n_rec] if record else None,
        trajectory=a_rec[:n_rec] if record else None,
        max_amp=float(max_amp),
        amp_warning=bool(max_amp > mset.i_star),
    )


def translate_gain(g_ss, w_s, w_i):
    """Frequency-translating power gain G_si = (G_ss - 1) w_i / w_s."""
    g_ss = np.asarray(g_ss, dtype=float)
    if np.any(g_ss < 1.0):
        raise ValueError("translation formula needs G_ss >= 1 (loss-dominated point)")
    return (g_ss - 1.0) * (w_i / w_s)


DEFAULT_SEED_DBM = -110.0


def gain_sweep(pump: PumpConfig, f_grid, spec: DeviceSpec,
               curve: DispersionCurve, seed_dbm: float = DEFAULT_SEED_DBM,
               rtol: float = 1e-9, include_loss: bool = True,
               compute_gii: bool = True, workers: int = 1):
    """Signal/idler/translating gain versus signal frequency.

    For each grid point the line is integrated seeding the signal tone
    (G_ss, G_si) and, when ``compute_gii`` is set, once more seeding the
    idler tone (G_ii); gains are output/input power ratios in dB.
    Per-row failures (tone in a stop band, outside the grid, ...) are
    recorded in the status column.  ``workers`` > 1 threads the grid
    points; the jitted kernel releases the GIL, so this scales and
    leaves results bit-identical to the serial order.
    """
    from .results import SweepResult

    f_grid = np.asarray(f_grid, dtype=float)
    seed = amp_from_dbm(seed_dbm)
    g_ss = np.full(len(f_grid), np.nan)
    g_ii = np.full(len(f_grid), np.nan)
    g_si = np.full(len(f_grid), np.nan)
    status = [""] * len(f_grid)

    def one(j):
        f_s = f_grid[j]
        try:
            mset = build_mode_set(pump, f_s, curve, spec)
            res_s = cme_integrate(mset.seeded(signal=seed), spec, rtol=rtol,
                                  include_loss=include_loss)
            i_s = mset.index("signal")
            i_i = mset.index("idler")
            g_ss[j] = np.abs(res_s.final[i_s] / seed) ** 2
            g_si[j] = np.abs(res_s.final[i_i] / seed) ** 2
            if compute_gii:
                res_i = cme_integrate(mset.seeded(idler=seed), spec,
                                      rtol=rtol, include_loss=include_loss)
                g_ii[j] = np.abs(res_i.final[i_i] / seed) ** 2
            status[j] = "warn-amplitude" if res_s.amp_warning else "ok"
        except (CmeError, ValueError) as exc:
            status[j] = type(exc).__name__

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(one, range(len(f_grid))))
    else:
        for j in range(len(f_grid)):
            one(j)
    to_db = lambda g: 10.0 * np.log10(g)
    with np.errstate(invalid="ignore", divide="ignore"):
        return SweepResult(
            axis_name="f_Hz", axis=f_grid,
            columns={"Gss_dB": to_db(g_ss), "Gii_dB": to_db(g_ii),
                     "Gsi_dB": to_db(g_si)},
            status=status)


def output_spectrum(pump: PumpConfig, f_signal_hz: float, p_signal_dbm: float,
                    spec: DeviceSpec, curve: DispersionCurve,
                    rtol: float = 1e-9, include_loss: bool = True):
    """Per-tone output powers (dBm) of the six-mode simulation."""
    if pump.mode_selection != "6-mode":
        pump = PumpConfig(pump.f_pump_hz, pump.i_pump, "6-mode")
    mset = build_mode_set(pump, f_signal_hz, curve, spec)
    if p_signal_dbm is not None:
        mset = mset.seeded(signal=amp_from_dbm(p_signal_dbm))
    res = cme_integrate(mset, spec, rtol=rtol, include_loss=include_loss)
    return [(m.label, m.freq_hz, float(dbm_from_amp(res.final[j])))
            for j, m in enumerate(mset.modes)]


def two_tone_spectrum(f1_hz: float, f2_hz: float, p_in_dbm: float,
                      pump: PumpConfig, spec: DeviceSpec,
                      curve: DispersionCurve, rtol: float = 1e-9,
                      include_loss: bool = True):
    """Output powers of all tones for equal-power two-tone drive."""
    mset = build_two_tone_set(pump, f1_hz, f2_hz, curve, spec)
    a_in = amp_from_dbm(p_in_dbm)
    mset = mset.seeded(signal_1=a_in, signal_2=a_in)
    res = cme_integrate(mset, spec, rtol=rtol, include_loss=include_loss)
    return [(m.label, m.freq_hz, float(dbm_from_amp(res.final[j])))
            for j, m in enumerate(mset.modes)]
