"""Parameter extraction: bandgap-shift fits, P1dB, IP3 and smoothing."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares


class ExtractError(Exception):
    """Base class for extraction failures."""


class FitConvergenceError(ExtractError):
    """Nonlinear fit failed to converge."""


class AmbiguousCompressionError(ExtractError):
    """Gain curve is non-monotone; several -1 dB crossings exist."""


class InvalidRegimeError(ExtractError):
    """Small-signal slopes outside the expected 1/3 pattern."""


class CompressionNotFoundError(ExtractError):
    """Sweep never compresses by 1 dB."""


@dataclass
class FitResult:
    """Bandgap-shift fit output.

    i_quartic is NaN when the quartic term is unconstrained by the data
    (quartic_degenerate set); the quadratic-only result is returned.
    """

    i_star: float               # A
    i_quartic: float            # A
    covariance: np.ndarray      # A^2, over (i_star, i_quartic)
    residual_norm: float
    converged: bool
    quartic_degenerate: bool = False


@dataclass
class PowerSweep:
    """Input/output power rows of a compression or two-tone sweep (dBm)."""

    p_in_dbm: np.ndarray
    p_out_dbm: np.ndarray
    p_imd_dbm: np.ndarray | None = None

    def __post_init__(self):
        self.p_in_dbm = np.asarray(self.p_in_dbm, dtype=float)
        self.p_out_dbm = np.asarray(self.p_out_dbm, dtype=float)
        if self.p_imd_dbm is not None:
            self.p_imd_dbm = np.asarray(self.p_imd_dbm, dtype=float)
            if len(self.p_imd_dbm) != len(self.p_in_dbm):
                raise ValueError("intermod column length mismatch")
        if len(self.p_in_dbm) != len(self.p_out_dbm):
            raise ValueError("input/output column length mismatch")
        if len(self.p_in_dbm) < 6:
            raise ValueError("power sweep needs at least 6 rows")
        if np.any(np.diff(self.p_in_dbm) <= 0):
            raise ValueError("input powers must be strictly increasing")
        if self.p_in_dbm[-1] - self.p_in_dbm[0] < 15.0:
            raise ValueError("power sweep must span at least 15 dB")

    @property
    def gain_db(self) -> np.ndarray:
        return self.p_out_dbm - self.p_in_dbm


def _quadratic_seed(i_dc, y):
    """Linear least squares on shift = -(a I^2 + b I^4)/2; returns (a, b)."""
    basis = np.column_stack([i_dc ** 2, i_dc ** 4])
    coef, *_ = np.linalg.lstsq(basis, -2.0 * y, rcond=None)
    return coef


def fit_bandgap_shift(i_dc_a, f_gap_hz, f_gap0_hz: float | None = None,
                      degeneracy_rtol: float = 1e-3) -> FitResult:
    """Fit the fractional bandgap shift -[(I/I*)^2 + (I/I4)^4]/2.

    The zero-bias frequency comes from the I = 0 row unless supplied.
    Damped nonlinear least squares seeded by a quadratic-plus-quartic
    linear fit; a quartic coefficient indistinguishable from zero is
    flagged and the quadratic-only answer returned with i_quartic NaN.
    """
    i_dc = np.asarray(i_dc_a, dtype=float)
    f_gap = np.asarray(f_gap_hz, dtype=float)
    if len(i_dc) != len(f_gap):
        raise ValueError("current/frequency length mismatch")
    if len(i_dc) < 5:
        raise ValueError("need at least 5 bias points")
    if f_gap0_hz is None:
        at_zero = np.isclose(i_dc, 0.0)
        if not np.any(at_zero):
            raise ValueError("no zero-bias row and no f_gap0_hz supplied")
        f_gap0_hz = float(np.mean(f_gap[at_zero]))
    y = f_gap / f_gap0_hz - 1.0
    mask = ~np.isclose(i_dc, 0.0)
    i_fit, y_fit = i_dc[mask], y[mask]

    a, b = _quadratic_seed(i_fit, y_fit)
    if a <= 0:
        raise FitConvergenceError("no quadratic softening in the data")
    i_star0 = 1.0 / np.sqrt(a)
    if i_fit.max() < 0.3 * i_star0:
        raise ValueError("bias currents span less than 0.3 I*")

    quartic_scale = (i_fit.max() ** 4) * abs(b)
    quad_scale = (i_fit.max() ** 2) * a
    if b <= 0 or quartic_scale < degeneracy_rtol * quad_scale:
        resid = y_fit + 0.5 * a * i_fit ** 2
        jac = (i_fit ** 2 / i_star0 ** 3)[:, None]
        dof = max(len(i_fit) - 1, 1)
        s2 = float(resid @ resid) / dof
        cov11 = s2 / float(jac[:, 0] @ jac[:, 0])
        cov = np.array([[cov11, 0.0], [0.0, np.inf]])
        return FitResult(i_star=float(i_star0), i_quartic=float("nan"),
                         covariance=cov, residual_norm=float(np.linalg.norm(resid)),
                         converged=True, quartic_degenerate=True)

    i_quart0 = b ** -0.25

    def model(p):
        i_s, i_q = p
        return -0.5 * ((i_fit / i_s) ** 2 + (i_fit / i_q) ** 4)

    def resid(p):
        return model(p) - y_fit

    sol = least_squares(resid, x0=[i_star0, i_quart0], method="trf",
                        bounds=([1e-12, 1e-12], [np.inf, np.inf]),
                        xtol=1e-14, ftol=1e-14, gtol=1e-14)
    if not sol.success:
        raise FitConvergenceError(sol.message)
    dof = max(len(i_fit) - 2, 1)
    s2 = float(sol.fun @ sol.fun) / dof
    jtj = sol.jac.T @ sol.jac
    try:
        cov = np.linalg.inv(jtj) * s2
    except np.linalg.LinAlgError:
        cov = np.full((2, 2), np.inf)
    return FitResult(i_star=float(sol.x[0]), i_quartic=float(sol.x[1]),
                     covariance=cov, residual_norm=float(np.linalg.norm(sol.fun)),
                     converged=True)


def bandgap_model(i_dc_a, i_star: float, i_quartic: float, f_gap0_hz: float):
    """Bandgap frequency versus bias for given characteristic currents."""
    i_dc = np.asarray(i_dc_a, dtype=float)
    shift = -0.5 * ((i_dc / i_star) ** 2 + (i_dc / i_quartic) ** 4)
    return f_gap0_hz * (1.0 + shift)


def p1db(sweep: PowerSweep, flat_tol_db: float = 0.1) -> float:
    """Input-referred 1 dB compression point of a power sweep.

    The small-signal gain is the median over the initial flat region
    (gain within flat_tol_db of the first point); P1dB is the linearly
    interpolated input power where gain drops 1 dB below it.
    """
    gain = sweep.gain_db
    flat = np.flatnonzero(np.abs(gain - gain[0]) > flat_tol_db)
    n_flat = flat[0] if len(flat) else len(gain)
    if n_flat < 3:
        raise ExtractError("no small-signal linear region (need 3 flat points)")
    g0 = float(np.median(gain[:n_flat]))
    below = gain < g0 - 1.0
    if not np.any(below):
        raise CompressionNotFoundError("gain never drops 1 dB below small-signal")
    crossings = np.flatnonzero(np.diff(below.astype(int)) == 1)
    if len(crossings) > 1:
        raise AmbiguousCompressionError(
            f"non-monotone gain; candidate crossings near inputs "
            f"{sweep.p_in_dbm[crossings + 1].tolist()} dBm")
    j = int(np.argmax(below))
    if j == 0:
        raise ExtractError("sweep starts already compressed")
    x0, x1 = sweep.p_in_dbm[j - 1], sweep.p_in_dbm[j]
    y0, y1 = gain[j - 1], gain[j]
    return float(x0 + (g0 - 1.0 - y0) * (x1 - x0) / (y1 - y0))


def ip3(sweep: PowerSweep, fit_span_db: float = 10.0,
        slope_tol: float = 0.15) -> float:
    """Input-referred third-order intercept from a two-tone sweep.

    Free-slope fits over the lowest fit_span_db of input power must come
    out near 1 (fundamental) and 3 (intermod); the returned IP3 is the
    intersection of the slope-constrained least-squares lines.
    """
    if sweep.p_imd_dbm is None:
        raise ValueError("two-tone sweep needs an intermod column")
    sel = sweep.p_in_dbm <= sweep.p_in_dbm[0] + fit_span_db
    if np.count_nonzero(sel) < 3:
        raise ValueError("fewer than 3 points in the small-signal span")
    x = sweep.p_in_dbm[sel]
    s1 = np.polyfit(x, sweep.p_out_dbm[sel], 1)[0]
    s3 = np.polyfit(x, sweep.p_imd_dbm[sel], 1)[0]
    if abs(s1 - 1.0) > slope_tol or abs(s3 - 3.0) > slope_tol:
        raise InvalidRegimeError(
            f"small-signal slopes {s1:.3f}/{s3:.3f} outside 1/3 tolerance")
    b1 = float(np.mean(sweep.p_out_dbm[sel] - x))
    b3 = float(np.mean(sweep.p_imd_dbm[sel] - 3.0 * x))
    return (b1 - b3) / 2.0


def smooth(y, window: int):
    """Centered moving average; edge windows are truncated to the trace."""
    if window % 2 == 0:
        raise ValueError("window must be odd")
    y = np.asarray(y, dtype=float)
    if window > len(y):
        raise ValueError("window longer than trace")
    if window == 1:
        return y.copy()
    half = window // 2
    out = np.empty_like(y)
    for j in range(len(y)):
        lo = max(0, j - half)
        hi = min(len(y), j + half + 1)
        out[j] = y[lo:hi].mean()
    return out
