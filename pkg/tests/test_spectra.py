import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vcqds.spectra import (
    GridMismatch,
    Spectrum,
    TimeSeries,
    absorption_cross_section,
    correlation_from_susceptibility,
    damped_dft,
    find_peaks,
    frequency_grid,
    magnon_spectrum,
    peak_position,
    polarizability,
    read_series_csv,
    read_spectrum_csv,
    susceptibility,
    write_series_csv,
    write_spectrum_csv,
)


def cosine(w0, dt=0.05, n=4000, t0=0.0):
    t = t0 + dt * np.arange(n)
    return TimeSeries(t0, dt, np.cos(w0 * t))


@given(st.floats(0.5, 20.0))
def test_cosine_peak_within_one_bin(w0):
    spec = damped_dft(cosine(w0), 0.01)
    assert abs(peak_position(spec, omega_min=1e-9) - w0) <= spec.d_omega


def test_lorentzian_line_shape():
    # cos(w0 t) -> 1/(2 (gamma - i(w - w0))) near +w0: absorptive height 1/(2 gamma), FWHM 2 gamma
    gamma, w0 = 0.05, 3.0
    spec = damped_dft(cosine(w0, dt=0.02, n=20000), gamma)
    re = spec.values.real
    peaks = find_peaks(spec.omegas, re, omega_min=0)
    assert peaks[0].height == pytest.approx(1 / (2 * gamma), rel=2e-2)
    assert peaks[0].fwhm == pytest.approx(2 * gamma, abs=2 * spec.d_omega)


def test_grid_and_t0_phase():
    s = cosine(2.0, t0=0.0)
    shifted = TimeSeries(1.5, s.dt, np.cos(2.0 * (s.times + 1.5)))
    a, b = damped_dft(shifted, 0.0), damped_dft(TimeSeries(0.0, s.dt, shifted.values), 0.0)
    np.testing.assert_allclose(a.values, b.values * np.exp(1j * a.omegas * 1.5), atol=1e-9)
    np.testing.assert_allclose(a.omegas, frequency_grid(len(s), s.dt))


def test_direct_sum_matches_fft():
    rng = np.random.default_rng(0)
    s = TimeSeries(0.3, 0.1, rng.normal(size=64))
    spec = damped_dft(s, 0.2, pad=2)
    for k in (3, 50, 100):
        w = spec.omegas[k]
        direct = np.sum(s.values * np.exp(-0.2 * s.times) * np.exp(1j * w * s.times)) * s.dt
        assert spec.values[k] == pytest.approx(direct, abs=1e-10)


def test_linearity_and_grid_checks():
    a = damped_dft(cosine(1.0), 0.01)
    b = damped_dft(cosine(2.0), 0.01)
    both = damped_dft(TimeSeries(0, 0.05, cosine(1.0).values + cosine(2.0).values), 0.01)
    np.testing.assert_allclose((a + b).values, both.values, atol=1e-9)
    with pytest.raises(GridMismatch):
        a + damped_dft(cosine(1.0, dt=0.1), 0.01)


def test_polarizability_masks_small_field():
    om = np.linspace(-1, 1, 5)
    d = Spectrum(om, np.ones(5, dtype=complex))
    e = Spectrum(om, np.array([1, 1e-20, 2, 1, 1], dtype=complex))
    a = polarizability(d, e, e0=1.0)
    assert np.isnan(a.values[1]) and a.values[2] == 0.5


def test_absorption_sign_and_shift():
    om = np.linspace(0.1, 1, 4)
    alpha = Spectrum(om, 1j * np.ones(4))
    sigma = absorption_cross_section(alpha, shift=0.5)
    assert np.all(sigma.values > 0) and np.isrealobj(sigma.values)
    np.testing.assert_allclose(sigma.omegas, om + 0.5)


def test_susceptibility_and_correlation():
    om = np.array([-2.0, -1.0, 1.0, 2.0])
    d = Spectrum(om, np.array([1 + 1j, 2 - 1j, 3 + 2j, 4 - 2j]))
    chi = susceptibility(d, 0.5)
    np.testing.assert_allclose(chi.values, 2 * d.values)
    c = correlation_from_susceptibility(chi)
    np.testing.assert_allclose(c.values.imag, np.sign(om) * chi.values.imag)
    with pytest.raises(ValueError):
        susceptibility(d, 0.0)


def test_magnon_spectrum_single_mode():
    # a travelling wave exp(i(q r - w t)) puts all weight in its q sector
    n, dt, steps = 4, 0.05, 4000
    t = dt * np.arange(steps)
    q0, w0 = 2 * np.pi / 4, 3.0
    corr = {(i, 0): TimeSeries(0, dt, np.exp(1j * (q0 * i - w0 * t))) for i in range(n)}
    spectra = magnon_spectrum(corr, np.arange(n), 0.01)
    strong = max(spectra, key=lambda q: np.abs(spectra[q].values).max())
    assert strong == pytest.approx(q0)
    # e^{-i w0 t} times the e^{+i w t} kernel is stationary at omega = +w0
    assert abs(peak_position(spectra[strong]) - w0) <= spectra[strong].d_omega


def test_magnon_spectrum_validation():
    s = TimeSeries(0, 0.1, np.ones(10))
    with pytest.raises(ValueError, match="incomplete"):
        magnon_spectrum({(0, 0): s, (1, 0): s}, np.arange(3), 0.1)
    with pytest.raises(GridMismatch):
        magnon_spectrum({(0, 0): s, (1, 0): TimeSeries(0, 0.2, np.ones(10))}, np.arange(2), 0.1)


def test_find_peaks_ignores_nan_and_orders_by_height():
    om = np.linspace(0, 10, 1001)
    y = np.exp(-((om - 3) ** 2) * 20) + 0.5 * np.exp(-((om - 7) ** 2) * 20)
    y[:5] = np.nan
    peaks = find_peaks(om, y)
    assert [round(p.omega, 2) for p in peaks[:2]] == [3.0, 7.0]
    assert find_peaks(om, y, rel_height=0.6)[0].omega == pytest.approx(3.0, abs=1e-3)
    assert len(find_peaks(om, y, rel_height=0.6)) == 1
    with pytest.raises(ValueError):
        peak_position(Spectrum(om, np.zeros_like(om)))


def test_time_series_validation():
    with pytest.raises(ValueError):
        TimeSeries(0, 0, np.ones(3))
    with pytest.raises(ValueError):
        TimeSeries(0, 0.1, np.ones(1))
    assert TimeSeries(0, 0.1, np.array([2.0, 3.0])).shifted().values.tolist() == [0.0, 1.0]


def test_csv_round_trips(tmp_path):
    s = TimeSeries(0.0, 0.05, np.sin(np.arange(50) * 0.3))
    write_series_csv(tmp_path / "s.csv", s)
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "t,value"
    back = read_series_csv(tmp_path / "s.csv")
    np.testing.assert_array_equal(back.values, s.values)
    spec = damped_dft(s, 0.1)
    write_spectrum_csv(tmp_path / "c.csv", spec)
    assert (tmp_path / "c.csv").read_text().startswith("omega,re,im")
    np.testing.assert_array_equal(read_spectrum_csv(tmp_path / "c.csv").values, spec.values)
    sigma = Spectrum(spec.omegas, spec.values.real)
    write_spectrum_csv(tmp_path / "r.csv", sigma)
    assert (tmp_path / "r.csv").read_text().startswith("omega,sigma")
    np.testing.assert_array_equal(read_spectrum_csv(tmp_path / "r.csv").values, sigma.values)


def test_csv_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_series_csv(tmp_path / "missing.csv")
    (tmp_path / "bad.csv").write_text("t,value\n0,1\n0.1,2\n0.3,3\n")
    with pytest.raises(GridMismatch):
        read_series_csv(tmp_path / "bad.csv")
