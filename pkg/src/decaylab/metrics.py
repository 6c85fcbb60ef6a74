"""Norms, level truncations, decay envelopes, fits and envelope checks.

This is the verification toolkit: everything needed to turn a recorded norm
series into pass/fail evidence against the closed-form predictions.  It is
deliberately independent of the evolution code so that checks can be re-run
from CSV files alone.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .fileio import atomic_write_text, fmt_float


class InsufficientDataError(ValueError):
    """Too few samples in the requested window."""


class DegenerateWindowError(ValueError):
    """Window contains values at the extinction floor; a log fit is meaningless."""


# ---------------------------------------------------------------------------
# level truncations


def level_split(z, k: float):
    """Split z into (excess, capped) parts at level k >= 0.

    excess is z pushed toward 0 by k (zero inside [-k, k]); capped is the
    remainder.  The capped part is computed as z - excess rather than by
    clipping: that choice makes excess + capped == z EXACT in floating point
    for every input (Sterbenz: either |z| <= 2k so z - sign(z)k is exact, or
    the recomputed difference z - excess is), at the price of the capped part
    deviating from clip(z, -k, k) by at most one ulp for huge |z|.
    """
    if not (k >= 0.0 and math.isfinite(k)):
        raise ValueError(f"truncation level must be finite and >= 0, got {k}")
    z = np.asarray(z, dtype=float)
    excess = np.where(np.abs(z) <= k, 0.0, z - np.sign(z) * k)
    capped = z - excess
    return excess, capped


def truncate_excess(z, k: float):
    """Part of z exceeding level k, signed: 0 inside [-k, k]."""
    return level_split(z, k)[0]


def truncate_capped(z, k: float):
    """z capped at level k (exact complement of truncate_excess)."""
    return level_split(z, k)[1]


# ---------------------------------------------------------------------------
# norms and distribution tails


def _values_and_weight(fld, weight: Optional[float]):
    if hasattr(fld, "values") and hasattr(fld, "grid"):
        return np.asarray(fld.values, dtype=float), float(fld.grid.quad_weight)
    if weight is None:
        raise ValueError("raw arrays need an explicit quadrature weight")
    return np.asarray(fld, dtype=float), float(weight)


def lr_norm(fld, r: float, weight: Optional[float] = None) -> float:
    """Discrete Lebesgue norm of order r in [1, inf] with node weight."""
    values, w = _values_and_weight(fld, weight)
    if math.isinf(r):
        return float(np.max(np.abs(values), initial=0.0))
    if r < 1.0:
        raise ValueError(f"norm order must be >= 1, got {r}")
    return float(np.sum(np.abs(values) ** r) * w) ** (1.0 / r)


def distribution_tail(fld, level: float, weight: Optional[float] = None) -> float:
    """Measure of {|u| > level}."""
    if level < 0.0:
        raise ValueError("level must be >= 0")
    values, w = _values_and_weight(fld, weight)
    return float(np.count_nonzero(np.abs(values) > level)) * w


def marcinkiewicz_quasinorm(
    fld, exponent: float, weight: Optional[float] = None, n_levels: int = 50
) -> float:
    """sup of s * measure{|u| > s}^(1/exponent) over a geometric level sweep.

    Levels run from 1e-3 * max|u| to max|u|; a zero field gives 0.
    """
    if exponent <= 0.0:
        raise ValueError("exponent must be > 0")
    values, w = _values_and_weight(fld, weight)
    top = float(np.max(np.abs(values), initial=0.0))
    if top == 0.0:
        return 0.0
    levels = np.geomspace(1e-3 * top, top, n_levels)
    best = 0.0
    for s in levels:
        tail = float(np.count_nonzero(np.abs(values) > s)) * w
        best = max(best, s * tail ** (1.0 / exponent))
    return best


# ---------------------------------------------------------------------------
# recorded norm series


@dataclass
class NormSeries:
    """Sampled time series of named norms; column order is meaningful."""

    times: np.ndarray
    columns: dict

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1:
            raise ValueError("times must be a 1D array")
        if t.size >= 2 and not np.all(np.diff(t) > 0.0):
            raise ValueError("timestamps must be strictly increasing")
        cols = {}
        for label, vals in self.columns.items():
            arr = np.asarray(vals, dtype=float)
            if arr.shape != t.shape:
                raise ValueError(f"column {label!r} has {arr.size} entries, need {t.size}")
            cols[str(label)] = arr
        self.times = t
        self.columns = cols

    @property
    def labels(self) -> list:
        return list(self.columns.keys())

    @property
    def n(self) -> int:
        return int(self.times.size)

    def column(self, label: str) -> np.ndarray:
        if label not in self.columns:
            raise KeyError(f"no series column {label!r}; available: {self.labels}")
        return self.columns[label]

    @classmethod
    def from_rows(cls, rows: Sequence) -> "NormSeries":
        if not rows:
            raise ValueError("cannot build a series from zero rows")
        labels = list(rows[0][1].keys())
        times = [r[0] for r in rows]
        cols = {lab: [] for lab in labels}
        for _, named in rows:
            if list(named.keys()) != labels:
                raise ValueError("inconsistent labels across rows")
            for lab in labels:
                cols[lab].append(named[lab])
        return cls(np.asarray(times, dtype=float), {l: np.asarray(v) for l, v in cols.items()})

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t"] + self.labels)
        for i in range(self.n):
            writer.writerow(
                [fmt_float(self.times[i])]
                + [fmt_float(self.columns[lab][i]) for lab in self.labels]
            )
        return buf.getvalue()

    def write_csv(self, path) -> None:
        atomic_write_text(path, self.to_csv_text())

    @classmethod
    def from_csv(cls, path) -> "NormSeries":
        with open(path, newline="") as handle:
            rows = list(csv.reader(handle))
        if not rows or not rows[0] or rows[0][0] != "t":
            raise ValueError("series CSV must start with a 't' header column")
        labels = rows[0][1:]
        if len(set(labels)) != len(labels) or not labels:
            raise ValueError("series CSV needs unique, nonempty norm columns")
        body = rows[1:]
        times = []
        cols = {lab: [] for lab in labels}
        for row in body:
            if len(row) != len(labels) + 1:
                raise ValueError(f"series CSV row width {len(row)} != {len(labels) + 1}")
            times.append(float(row[0]))
            for lab, cell in zip(labels, row[1:]):
                cols[lab].append(float(cell))
        return cls(np.asarray(times), {lab: np.asarray(v) for lab, v in cols.items()})


# ---------------------------------------------------------------------------
# closed-form decay envelopes


def gronwall_envelope(y0: float, rate: float, m: float, t):
    """Exact solution of y' = -rate * y^m, y(0) = y0 >= 0, evaluated at t >= 0.

    m > 1: algebraic decay; m = 1: exponential; m < 1: hits zero at the
    finite time y0^(1-m) / (rate (1-m)) and stays there.
    """
    if y0 < 0.0:
        raise ValueError("y0 must be >= 0")
    if rate <= 0.0:
        raise ValueError("rate must be > 0")
    if m <= 0.0:
        raise ValueError("exponent m must be > 0")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0):
        raise ValueError("t must be >= 0")
    scalar = np.isscalar(t) or t_arr.ndim == 0
    if m == 1.0:
        out = y0 * np.exp(-rate * t_arr)
    elif m > 1.0:
        if y0 == 0.0:
            out = np.zeros_like(t_arr)
        else:
            out = (y0 ** (1.0 - m) + rate * (m - 1.0) * t_arr) ** (-1.0 / (m - 1.0))
    else:
        base = np.maximum(y0 ** (1.0 - m) - rate * (1.0 - m) * t_arr, 0.0)
        out = base ** (1.0 / (1.0 - m))
    return float(out) if scalar else out


def envelope_extinction_time(y0: float, rate: float, m: float) -> float:
    """Time at which the m < 1 envelope reaches zero."""
    if not m < 1.0:
        raise ValueError(f"finite extinction needs m < 1, got m={m}")
    if rate <= 0.0:
        raise ValueError("rate must be > 0")
    if y0 < 0.0:
        raise ValueError("y0 must be >= 0")
    return y0 ** (1.0 - m) / (rate * (1.0 - m))


# ---------------------------------------------------------------------------
# fits


@dataclass(frozen=True)
class FitResult:
    label: str
    kind: str  # "power": log v vs log t; "exponential": log v vs t
    slope: float
    intercept: float
    residual_rms: float
    n_points: int
    window: tuple

    @property
    def rate(self) -> float:
        """Decay rate for exponential fits (-slope)."""
        return -self.slope

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "kind": self.kind,
            "slope": self.slope,
            "intercept": self.intercept,
            "residual_rms": self.residual_rms,
            "n_points": self.n_points,
            "window": list(self.window),
        }


def _window_select(series: NormSeries, label: str, window, positive_t: bool):
    lo, hi = float(window[0]), float(window[1])
    if not lo < hi:
        raise ValueError(f"bad window {window}")
    t = series.times
    v = series.column(label)
    mask = (t >= lo) & (t <= hi)
    if positive_t:
        mask &= t > 0.0
    return t[mask], v[mask], (lo, hi)


def _ls_fit(x: np.ndarray, y: np.ndarray):
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (intercept + slope * x)
    return float(slope), float(intercept), float(np.sqrt(np.mean(resid**2)))


def fit_power_decay(
    series: NormSeries, label: str, window, floor: float = 0.0
) -> FitResult:
    """Least squares slope of log(value) against log(t) inside the window."""
    t, v, win = _window_select(series, label, window, positive_t=True)
    if np.any(v <= floor):
        raise DegenerateWindowError(
            f"column {label!r} touches the floor {floor} inside window {win}"
        )
    if t.size < 8:
        raise InsufficientDataError(f"need >= 8 samples in window {win}, got {t.size}")
    slope, intercept, rms = _ls_fit(np.log(t), np.log(v))
    return FitResult(label, "power", slope, intercept, rms, int(t.size), win)


def fit_exponential_decay(
    series: NormSeries, label: str, window, floor: float = 0.0
) -> FitResult:
    """Least squares slope of log(value) against t inside the window."""
    t, v, win = _window_select(series, label, window, positive_t=False)
    if np.any(v <= floor):
        raise DegenerateWindowError(
            f"column {label!r} touches the floor {floor} inside window {win}"
        )
    if t.size < 8:
        raise InsufficientDataError(f"need >= 8 samples in window {win}, got {t.size}")
    slope, intercept, rms = _ls_fit(t, np.log(v))
    return FitResult(label, "exponential", slope, intercept, rms, int(t.size), win)


# ---------------------------------------------------------------------------
# envelope domination checks and rate calibration


@dataclass
class EnvelopeReport:
    passed: bool
    n_checked: int
    vacuous: bool
    violations: list = dc_field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "n_checked": self.n_checked,
            "vacuous": self.vacuous,
            "violations": [list(v) for v in self.violations],
        }


def check_envelope(
    series: NormSeries,
    label: str,
    bound: Union[Callable, Sequence],
    slack: float = 1.0,
    window=None,
    atol: float = 0.0,
) -> EnvelopeReport:
    """Verify measured <= slack * bound (+ atol) at every sample in the window."""
    if slack <= 0.0:
        raise ValueError("slack must be > 0")
    t = series.times
    v = series.column(label)
    if window is not None:
        mask = (t >= float(window[0])) & (t <= float(window[1]))
        t, v = t[mask], v[mask]
    if callable(bound):
        b = np.asarray(bound(t), dtype=float)
    else:
        b = np.asarray(bound, dtype=float)
        if window is not None:
            b = b[mask]
    if b.shape != t.shape:
        raise ValueError("bound values must match the selected samples")
    bad = v > slack * b + atol
    violations = [(float(ti), float(vi), float(bi)) for ti, vi, bi in zip(t[bad], v[bad], b[bad])]
    return EnvelopeReport(
        passed=not violations,
        n_checked=int(t.size),
        vacuous=t.size == 0,
        violations=violations,
    )


def calibrate_decay_rate(series: NormSeries, label: str, m: float) -> float:
    """Weakest per-interval Gronwall rate consistent with the measured series.

    In the linearizing variable z = v^(1-m) (z = log v for m = 1) each
    consecutive sample pair yields the exact rate that reproduces the drop
    over that interval; the minimum over pairs gives an envelope that
    dominates the whole series by telescoping.  Pairs starting at zero are
    skipped; for m >= 1 pairs ending at zero are too (z is not finite there).
    """
    if m <= 0.0:
        raise ValueError("exponent m must be > 0")
    t = series.times
    v = series.column(label)
    rates = []
    for i in range(t.size - 1):
        dt = t[i + 1] - t[i]
        if dt <= 0.0 or v[i] <= 0.0:
            continue
        if m == 1.0:
            if v[i + 1] <= 0.0:
                continue
            rates.append((math.log(v[i]) - math.log(v[i + 1])) / dt)
        elif m < 1.0:
            z0, z1 = v[i] ** (1.0 - m), v[i + 1] ** (1.0 - m)
            rates.append((z0 - z1) / ((1.0 - m) * dt))
        else:
            if v[i + 1] <= 0.0:
                continue
            z0, z1 = v[i] ** (1.0 - m), v[i + 1] ** (1.0 - m)
            rates.append((z1 - z0) / ((m - 1.0) * dt))
    if not rates:
        raise InsufficientDataError("no usable sample pairs for rate calibration")
    return float(min(rates))


def truncation_level_for(fld, sigma: float, target: float, weight=None) -> float:
    """Smallest level k whose excess-part sigma-power is at or below target."""
    if target <= 0.0:
        raise ValueError("target must be > 0")
    if sigma < 1.0:
        raise ValueError("sigma must be >= 1")
    values, w = _values_and_weight(fld, weight)

    def power(k):
        return float(np.sum(np.abs(truncate_excess(values, k)) ** sigma) * w)

    if power(0.0) <= target:
        return 0.0
    lo, hi = 0.0, float(np.max(np.abs(values)))
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if power(mid) <= target:
            hi = mid
        else:
            lo = mid
    return hi
