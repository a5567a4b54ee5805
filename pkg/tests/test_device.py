import numpy as np
import pytest
import scipy.constants as sc
from hypothesis import given, settings, strategies as st

from kitwpa import device


def test_supercell_has_31_cells(dev):
    assert dev.n_cells == 31
    assert dev.n_cells * dev.cell_pitch == pytest.approx(dev.mod_period)


def test_stub_length_modulation_pattern(dev):
    lengths = np.array([dev.stub_length_at(n) for n in range(dev.n_cells)])
    assert lengths.min() >= dev.stub_len - dev.stub_mod_depth - 1e-12
    assert lengths.max() <= dev.stub_len + dev.stub_mod_depth + 1e-12
    assert lengths.mean() == pytest.approx(dev.stub_len, rel=1e-6)
    assert dev.stub_length_at(0) == pytest.approx(dev.stub_len)


def test_spec_validation_rejects_bad_geometry():
    good = device.paper_device()
    with pytest.raises(ValueError):
        good.replace(stub_mod_depth=good.stub_len)
    with pytest.raises(ValueError):
        good.replace(mod_period=good.pitch / 2)
    with pytest.raises(ValueError):
        good.replace(i_star=0.0)
    with pytest.raises(ValueError):
        good.replace(loss_freq_hz=(1e9,), loss_np_per_m=())


def test_stub_admittance_open_stub_limits(dev):
    # short stub at low frequency: small capacitive (positive imag) admittance
    y = device.stub_admittance(0.1e9, dev)
    assert y.real == pytest.approx(0.0)
    assert 0 < y.imag < 1e-2


def test_bloch_impedance_real_in_passband(curve):
    below = (curve.freq_hz > 0.1e9) & (curve.freq_hz < 1.9e9)
    ratio = np.abs(curve.z_bloch[below].imag) / np.abs(curve.z_bloch[below])
    assert ratio.max() < 1e-9
    assert 30 < curve.z_bloch[below].real.mean() < 80


def test_dispersion_k_increases_in_passband(curve):
    below = (curve.freq_hz > 0.05e9) & (curve.freq_hz < 2.0e9)
    k = curve.k[below].real
    assert np.all(np.diff(k) > 0)


def test_k_imag_positive_only_in_stopbands(curve):
    lossy = curve.k.imag > 1e-6
    for f in curve.freq_hz[lossy]:
        assert curve.in_stopband(f)


def test_primary_stopband_location(curve):
    band = device.find_stopband(curve, 1.5e9, 3.0e9)
    assert band is not None
    assert 2.0e9 < band.center_hz < 2.4e9
    assert band.width_hz > 50e6


def test_find_stopband_range_check(curve):
    with pytest.raises(ValueError):
        device.find_stopband(curve, 0.0, 1e9)
    assert device.find_stopband(curve, 0.1e9, 1.0e9) is None


def test_grid_too_coarse_raises(dev):
    # the stub-resonance fan above ~6.3 GHz cannot be branch-tracked
    with pytest.raises(device.GridTooCoarseError):
        device.bloch_dispersion(dev, np.linspace(0.02e9, 8.0e9, 400))


def test_calibrate_places_gap_center(dev_nl):
    grid = np.linspace(0.02e9, 3.2e9, 1600)
    curve = device.bloch_dispersion(dev_nl, grid)
    band = device.find_stopband(curve, 1.5e9, 3.0e9)
    assert band.center_hz == pytest.approx(2.2e9, rel=2e-3)


def test_loaded_line_impedance_near_50_ohm(dev_nl):
    grid = np.linspace(0.02e9, 0.5e9, 200)
    curve = device.bloch_dispersion(dev_nl, grid)
    assert curve.z_bloch.real.mean() == pytest.approx(50.0, rel=0.05)


def test_loss_table_interpolation(dev):
    a = dev.alpha([0.5e9, 2.5e9])
    db = a * dev.length * 20.0 / np.log(10.0)
    assert db[0] == pytest.approx(0.85, rel=1e-6)
    assert db[1] == pytest.approx(1.5, rel=1e-6)
    assert np.all(dev.alpha(1.5e9) > a[0])


def test_lossless_device_has_zero_alpha(dev_nl):
    assert np.all(dev_nl.alpha([0.5e9, 2.5e9]) == 0.0)


@given(st.floats(min_value=-8e-4, max_value=8e-4))
@settings(max_examples=50, deadline=None)
def test_bandgap_shift_even_and_nonpositive(i_dc):
    s = device.bandgap_shift(i_dc, 0.89e-3, 0.86e-3)
    assert s <= 0.0
    assert s == pytest.approx(device.bandgap_shift(-i_dc, 0.89e-3, 0.86e-3))


def test_biased_dispersion_compresses_axis(dev_nl, curve_nl):
    biased = device.biased_dispersion(dev_nl, curve_nl, 0.3e-3)
    b0 = device.find_stopband(curve_nl, 1.5e9, 3.0e9)
    b1 = device.find_stopband(biased, 1.5e9, 3.0e9)
    expected = 1.0 + device.bandgap_shift(0.3e-3, dev_nl.i_star, dev_nl.i_quartic)
    assert b1.center_hz / b0.center_hz == pytest.approx(expected, rel=1e-12)


def test_bias_out_of_range(dev_nl, curve_nl):
    with pytest.raises(device.BiasOutOfRangeError):
        device.biased_dispersion(dev_nl, curve_nl, dev_nl.i_star)


def test_i_star_from_material_scaling():
    mat = device.Material(delta_ev=2.8e-4, lambda_l=1e-6, n0_per_ev_m3=6e46)
    base = device.i_star_from_material(mat, 320e-9, 50e-9)
    assert base > 0
    # linear in cross-section dimensions and kappa, inverse in lambda_L
    assert device.i_star_from_material(mat, 640e-9, 50e-9) == pytest.approx(2 * base)
    assert device.i_star_from_material(mat, 320e-9, 100e-9) == pytest.approx(2 * base)
    doubled = device.Material(delta_ev=2.8e-4, lambda_l=2e-6, n0_per_ev_m3=6e46)
    assert device.i_star_from_material(doubled, 320e-9, 50e-9) == pytest.approx(base / 2)
    with pytest.raises(ValueError):
        device.i_star_from_material(mat, -1.0, 50e-9)


def test_material_validation():
    with pytest.raises(ValueError):
        device.Material(delta_ev=-1.0, lambda_l=1e-6, n0_per_ev_m3=1e46)
    with pytest.raises(ValueError):
        device.Material(delta_ev=1e-4, lambda_l=1e-6, n0_per_ev_m3=1e46,
                        kappa_star=5.0)
