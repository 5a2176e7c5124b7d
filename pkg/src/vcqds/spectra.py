"""Damped Fourier transforms of observable records and the response functions built on them.

Transform convention: ``F(w) = sum_k f_k exp(-gamma t_k) exp(i w t_k) dt``. A record
``cos(w0 t)`` gives lines ``1/(gamma - i(w -+ w0))`` at ``+-w0``; their absorptive parts are
Lorentzians of full width ``2 gamma``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

SPEED_OF_LIGHT_AU = 137.035999
HARTREE_EV = 27.211386245988
PAD_FACTOR = 8


@dataclass(frozen=True)
class TimeSeries:
    t0: float
    dt: float
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        values = np.asarray(self.values)
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if values.ndim != 1 or values.size < 2:
            raise ValueError("a time series needs at least two samples")
        object.__setattr__(self, "values", values)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.size)

    def __len__(self) -> int:
        return self.values.size

    def shifted(self, offset: float | None = None) -> "TimeSeries":
        """Subtract ``offset`` (default: the first sample)."""
        off = self.values[0] if offset is None else offset
        return TimeSeries(self.t0, self.dt, self.values - off, self.label)


@dataclass(frozen=True)
class Spectrum:
    omegas: np.ndarray
    values: np.ndarray
    label: str = ""

    @property
    def d_omega(self) -> float:
        return float(self.omegas[1] - self.omegas[0])

    def value_at(self, omega: float) -> complex:
        i = int(np.argmin(np.abs(self.omegas - omega)))
        return self.values[i]

    def __add__(self, other: "Spectrum") -> "Spectrum":
        _check_grid(self, other)
        return Spectrum(self.omegas, self.values + other.values, self.label)

    def scaled(self, factor: complex) -> "Spectrum":
        return Spectrum(self.omegas, self.values * factor, self.label)


class GridMismatch(ValueError):
    pass


def _check_grid(a: Spectrum, b: Spectrum) -> None:
    if a.omegas.shape != b.omegas.shape or not np.allclose(a.omegas, b.omegas, rtol=0, atol=1e-12 * max(1.0, abs(a.omegas).max())):
        raise GridMismatch("spectra are on different frequency grids")


def frequency_grid(n_samples: int, dt: float, pad: int = PAD_FACTOR) -> np.ndarray:
    n = pad * n_samples
    return np.fft.fftshift(np.fft.fftfreq(n, d=dt)) * 2 * np.pi


def damped_dft(series: TimeSeries, gamma: float, pad: int = PAD_FACTOR) -> Spectrum:
    """Exponentially damped transform on the zero-padded grid ``2 pi m / (pad N dt)``, centred on 0."""
    if gamma < 0:
        raise ValueError(f"gamma must be non-negative, got {gamma}")
    t = series.times
    f = series.values * np.exp(-gamma * t)
    n = pad * len(series)
    # sum_k f_k e^{i w t_k} = e^{i w t0} * n * ifft(f)[m] with w = 2 pi m / (n dt)
    raw = np.fft.ifft(f, n=n) * n
    omegas = np.fft.fftfreq(n, d=series.dt) * 2 * np.pi
    raw = raw * np.exp(1j * omegas * series.t0) * series.dt
    return Spectrum(np.fft.fftshift(omegas), np.fft.fftshift(raw), series.label)


def polarizability(d: Spectrum, field: Spectrum, e0: float | None = None, floor: float = 1e-12) -> Spectrum:
    """``d(w) / E(w)``; frequencies where ``|E| < floor * E0`` are masked with NaN."""
    _check_grid(d, field)
    scale = e0 if e0 is not None else np.abs(field.values).max()
    mask = np.abs(field.values) < floor * abs(scale)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = d.values / field.values
    vals = np.where(mask, np.nan + 0j, vals)
    return Spectrum(d.omegas, vals, d.label)


def absorption_cross_section(alpha: Spectrum, shift: float = 0.0) -> Spectrum:
    """``sigma(w) = 4 pi w / c * Im alpha(w)`` (real); ``shift`` moves the frequency axis afterwards."""
    sigma = 4 * np.pi * alpha.omegas / SPEED_OF_LIGHT_AU * np.imag(alpha.values)
    return Spectrum(alpha.omegas + shift, sigma.astype(float), alpha.label)


def susceptibility(dsz: Spectrum, e0: float) -> Spectrum:
    if e0 == 0:
        raise ValueError("field strength E0 must be non-zero")
    return dsz.scaled(1.0 / e0)


def correlation_from_susceptibility(chi: Spectrum) -> Spectrum:
    """``Re C = Re chi``, ``Im C = sgn(w) Im chi``."""
    vals = chi.values.real + 1j * np.sign(chi.omegas) * chi.values.imag
    return Spectrum(chi.omegas, vals, chi.label)


def magnon_spectrum(
    correlations: Mapping[tuple[int, int], TimeSeries],
    positions,
    gamma: float,
    n_sites: int | None = None,
    pad: int = PAD_FACTOR,
) -> dict[float, Spectrum]:
    """Spatial transform over ``r_i - r_j`` then damped temporal transform, one spectrum per ``q``.

    ``q`` runs over ``2 pi m / N``. The input maps ``(i, j)`` to ``<O_i(t) O_j(0)>``; every ``i``
    must be present for at least one ``j``.
    """
    positions = np.asarray(positions, dtype=float)
    n = n_sites or len(positions)
    refs = sorted({j for _, j in correlations})
    for j in refs:
        missing = [i for i in range(n) if (i, j) not in correlations]
        if missing:
            raise ValueError(f"correlation matrix incomplete: missing (i, {j}) for i in {missing}")
    first = next(iter(correlations.values()))
    out = {}
    for m in range(n):
        q = 2 * np.pi * m / n
        acc = np.zeros(len(first), dtype=complex)
        for j in refs:
            for i in range(n):
                series = correlations[(i, j)]
                if len(series) != len(first) or series.dt != first.dt:
                    raise GridMismatch("correlation records are sampled differently")
                acc += np.exp(-1j * q * (positions[i] - positions[j])) * series.values
        acc /= n * len(refs)
        out[q] = damped_dft(TimeSeries(first.t0, first.dt, acc, f"q={q:.6g}"), gamma, pad)
    return out


# ---------------------------------------------------------------------------
# peak analysis
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Peak:
    omega: float
    height: float
    fwhm: float
    index: int


def _interp_peak(y: np.ndarray, i: int) -> tuple[float, float]:
    """Parabolic vertex through (i-1, i, i+1); returns (fractional offset, height)."""
    if i <= 0 or i >= len(y) - 1:
        return 0.0, float(y[i])
    a, b, c = y[i - 1], y[i], y[i + 1]
    denom = a - 2 * b + c
    if denom == 0:
        return 0.0, float(b)
    off = 0.5 * (a - c) / denom
    return float(off), float(b - 0.25 * (a - c) * off)


def _fwhm(omegas: np.ndarray, y: np.ndarray, i: int) -> float:
    half = y[i] / 2
    below = np.nonzero(y[:i] <= half)[0]
    lo = below[-1] if below.size else 0
    below = np.nonzero(y[i:] <= half)[0]
    hi = i + below[0] if below.size else len(y) - 1
    return float(omegas[hi] - omegas[lo])


def find_peaks(
    omegas: np.ndarray, y: np.ndarray, rel_height: float = 0.0, omega_min: float | None = None, max_peaks: int = 32
) -> list[Peak]:
    """The ``max_peaks`` highest local maxima of ``y`` above ``rel_height * max(y)``, with interpolated positions."""
    y = np.asarray(y, dtype=float)
    sel = np.ones_like(y, dtype=bool) if omega_min is None else omegas >= omega_min
    ys = np.where(sel & np.isfinite(y), y, -np.inf)
    top = ys.max()
    mid = ys[1:-1]
    is_peak = (mid > ys[:-2]) & (mid >= ys[2:]) & np.isfinite(ys[:-2]) & np.isfinite(ys[2:])
    is_peak &= (mid > rel_height * top) & (mid > 0)
    idx = np.nonzero(is_peak)[0] + 1
    idx = idx[np.argsort(-ys[idx], kind="stable")][:max_peaks]
    dw = omegas[1] - omegas[0]
    peaks = []
    for i in idx:
        off, h = _interp_peak(ys, i)
        peaks.append(Peak(float(omegas[i] + off * dw), h, _fwhm(omegas, ys, i), int(i)))
    peaks.sort(key=lambda p: -p.height)
    return peaks


def peak_position(spectrum: Spectrum, omega_min: float | None = None, part: str = "abs") -> float:
    y = _part(spectrum.values, part)
    peaks = find_peaks(spectrum.omegas, y, omega_min=omega_min)
    if not peaks:
        raise ValueError("spectrum has no peak")
    return peaks[0].omega


def _part(values: np.ndarray, part: str) -> np.ndarray:
    return {"abs": np.abs, "real": np.real, "imag": np.imag}[part](values)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def write_series_csv(path: str | Path, series: TimeSeries) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "value"])
        for t, val in zip(series.times, series.values):
            w.writerow([repr(float(t)), repr(float(np.real(val)))])


def read_series_csv(path: str | Path, label: str | None = None) -> TimeSeries:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    t, vals = data[:, 0], data[:, 1]
    dt = float(t[1] - t[0])
    if not np.allclose(np.diff(t), dt, rtol=1e-9, atol=1e-12):
        raise GridMismatch(f"{path} is not uniformly sampled")
    return TimeSeries(float(t[0]), dt, vals, label or path.stem)


def write_spectrum_csv(path: str | Path, spectrum: Spectrum) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if np.isrealobj(spectrum.values):
            w.writerow(["omega", "sigma"])
            for om, s in zip(spectrum.omegas, spectrum.values):
                w.writerow([repr(float(om)), repr(float(s))])
        else:
            w.writerow(["omega", "re", "im"])
            for om, v in zip(spectrum.omegas, spectrum.values):
                w.writerow([repr(float(om)), repr(float(v.real)), repr(float(v.imag))])


def read_spectrum_csv(path: str | Path) -> Spectrum:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if header == ["omega", "sigma"]:
        return Spectrum(data[:, 0], data[:, 1])
    return Spectrum(data[:, 0], data[:, 1] + 1j * data[:, 2])
