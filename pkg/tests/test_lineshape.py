"""Tests for the closed-form lineshape, spectra, strain averaging, and noise."""

import numpy as np
import pytest

from nvtherm.lineshape import (
    CSV_HEADER,
    BosonicModelParams,
    Spectrum,
    StrainDistribution,
    conventional_spectrum,
    dressed_depletion,
    ensemble_spectrum,
    lorentzian_spectrum,
    map_drive_to_model,
    p0,
    spectrum,
    synthesize_measurement,
)
from nvtherm.spin import DriveConfig, PhysicalEnvironment, dressed_resonances

ENV = PhysicalEnvironment(ex=8.0, b_transverse=80.0)
DRIVE = DriveConfig(omega_mw=2870.0, rabi_mw=0.5, omega_rf=16.0, rabi_rf=5.0)


def _fwhm_of_deepest_dip(grid, signal):
    """Half-depth full width of the deepest dip by linear interpolation."""
    depth = 1.0 - signal
    m = int(np.argmax(depth))
    half = 1.0 - depth[m] / 2.0
    left = right = None
    for i in range(m, 0, -1):
        if signal[i - 1] >= half:
            f = (half - signal[i]) / (signal[i - 1] - signal[i])
            left = grid[i] + f * (grid[i - 1] - grid[i])
            break
    for i in range(m, len(grid) - 1):
        if signal[i + 1] >= half:
            f = (half - signal[i]) / (signal[i + 1] - signal[i])
            right = grid[i] + f * (grid[i + 1] - grid[i])
            break
    assert left is not None and right is not None
    return right - left


class TestBosonicModelParams:
    def test_rejects_nonpositive_rates(self):
        with pytest.raises(ValueError, match="gamma"):
            BosonicModelParams(0.0, 0.0, 1.0, 0.1, 0.0, 0.1)
        with pytest.raises(ValueError, match="gamma"):
            BosonicModelParams(0.0, 0.0, 1.0, 0.1, 1.0, -0.1)


class TestMapDriveToModel:
    def test_on_bright_resonance(self):
        m = map_drive_to_model(ENV, DRIVE, omega_mw=2878.0)
        assert m.omega_b == pytest.approx(0.0)

    def test_two_photon_resonance(self):
        m = map_drive_to_model(ENV, DRIVE, omega_mw=2878.0)
        # omega_rf = 2*ex makes the dark mode resonant simultaneously.
        assert m.omega_d == pytest.approx(0.0)

    def test_half_factors(self):
        m = map_drive_to_model(ENV, DriveConfig(rabi_mw=0.2, rabi_rf=2.0), 2870.0)
        assert m.j == pytest.approx(1.0)
        assert m.lambda_b == pytest.approx(0.1)

    def test_requires_transverse_mode(self):
        with pytest.raises(ValueError, match="transverse"):
            map_drive_to_model(
                PhysicalEnvironment(b_parallel=150.0), DRIVE, 2870.0
            )


class TestP0:
    def test_no_drive_full_population(self):
        m = BosonicModelParams(0.0, 0.0, 1.0, 0.0, 1.0, 0.1)
        assert p0(m) == 1.0

    def test_single_mode_on_resonance(self):
        m = BosonicModelParams(0.0, 5.0, 0.0, 0.1, 1.0, 0.1)
        assert p0(m) == pytest.approx(0.99)

    def test_coupled_on_resonance_value(self):
        # Frozen from direct complex evaluation: the RF coupling protects
        # the population relative to plain broadening of the j=0 dip.
        m = BosonicModelParams(0.0, 0.0, 1.0, 0.1, 1.0, 0.01)
        assert p0(m) == pytest.approx(0.9901960592098427, rel=1e-12)

    def test_sharp_dip_protection(self):
        no_rf = BosonicModelParams(0.0, 0.0, 0.0, 0.05, 1.0, 0.01)
        with_rf = BosonicModelParams(0.0, 0.0, 2.0, 0.05, 1.0, 0.01)
        assert p0(with_rf) > p0(no_rf)

    def test_quadratic_in_drive(self):
        weak = BosonicModelParams(0.3, -0.2, 1.0, 0.01, 1.0, 0.1)
        strong = BosonicModelParams(0.3, -0.2, 1.0, 0.02, 1.0, 0.1)
        assert (1.0 - p0(strong)) == pytest.approx(4.0 * (1.0 - p0(weak)))


class TestSpectrum:
    def test_zero_contrast_is_flat(self):
        grid = np.linspace(2860.0, 2880.0, 101)
        s = spectrum(ENV, DRIVE, grid, contrast=0.0)
        np.testing.assert_array_equal(s.signal, np.ones_like(grid))

    def test_minima_at_dressed_resonances(self):
        grid = np.linspace(2855.0, 2885.0, 6001)
        s = spectrum(ENV, DRIVE, grid, gamma_b=0.2, gamma_d=0.02)
        expected = dressed_resonances(2870.0, 8.0, 16.0, 5.0)
        depth = 1.0 - s.signal
        from scipy.signal import find_peaks

        idx, _ = find_peaks(depth, prominence=0.1 * depth.max())
        found = grid[idx]
        assert len(found) == 4
        np.testing.assert_allclose(np.sort(found), expected, atol=0.01)

    def test_upper_branch_has_two_dips(self):
        grid = np.linspace(2855.0, 2885.0, 6001)
        s = spectrum(ENV, DRIVE, grid, gamma_b=0.2, gamma_d=0.02, branches="upper")
        depth = 1.0 - s.signal
        from scipy.signal import find_peaks

        idx, _ = find_peaks(depth, prominence=0.1 * depth.max())
        assert len(idx) == 2

    def test_depletion_quadratic_in_mw_drive(self):
        grid = np.linspace(2860.0, 2880.0, 301)
        weak = spectrum(ENV, DRIVE, grid)
        strong = spectrum(
            ENV,
            DriveConfig(rabi_mw=1.0, omega_rf=16.0, rabi_rf=5.0),
            grid,
        )
        np.testing.assert_allclose(
            1.0 - strong.signal, 4.0 * (1.0 - weak.signal), rtol=1e-12
        )

    def test_invalid_branches_rejected(self):
        with pytest.raises(ValueError, match="branches"):
            dressed_depletion(
                2870.0, 8.0, 16.0, np.linspace(2860, 2880, 11), 5.0, 0.5, 1.0, 0.1,
                branches="lower",
            )


class TestEnsembleSpectrum:
    def test_zero_spread_reduces_exactly(self):
        grid = np.linspace(2860.0, 2880.0, 301)
        plain = spectrum(ENV, DRIVE, grid)
        ens = ensemble_spectrum(
            ENV, DRIVE, grid, strain=StrainDistribution(mean_ex=8.0, sigma_ex=0.0)
        )
        np.testing.assert_array_equal(plain.signal, ens.signal)

    def test_single_node_reduces_exactly(self):
        grid = np.linspace(2860.0, 2880.0, 301)
        plain = spectrum(ENV, DRIVE, grid)
        ens = ensemble_spectrum(
            ENV, DRIVE, grid,
            strain=StrainDistribution(mean_ex=8.0, sigma_ex=0.5, nodes=1),
        )
        np.testing.assert_array_equal(plain.signal, ens.signal)

    def test_node_count_converged(self):
        grid = np.linspace(2860.0, 2880.0, 301)
        kw = dict(gamma_b=1.0, gamma_d=0.1)
        a = ensemble_spectrum(
            ENV, DRIVE, grid,
            strain=StrainDistribution(mean_ex=8.0, sigma_ex=0.5, nodes=21), **kw,
        )
        b = ensemble_spectrum(
            ENV, DRIVE, grid,
            strain=StrainDistribution(mean_ex=8.0, sigma_ex=0.5, nodes=41), **kw,
        )
        assert np.max(np.abs(a.signal - b.signal)) < 1e-6

    def test_width_grows_with_spread_when_undressed(self):
        # Without RF dressing the strain spread broadens the line directly.
        env = PhysicalEnvironment(ex=8.0, b_transverse=80.0)
        drive = DriveConfig(rabi_mw=0.2, omega_rf=0.0, rabi_rf=0.0)
        grid = np.linspace(2870.0, 2886.0, 4001)
        widths = []
        for sig in (0.0, 0.5, 1.0):
            s = ensemble_spectrum(
                env, drive, grid, 0.3, 0.3, 0.05,
                strain=StrainDistribution(mean_ex=8.0, sigma_ex=sig, nodes=41),
            )
            widths.append(_fwhm_of_deepest_dip(grid, s.signal))
        assert widths[0] < widths[1] < widths[2]

    def test_rejects_bad_distribution(self):
        with pytest.raises(ValueError, match="sigma_ex"):
            StrainDistribution(mean_ex=8.0, sigma_ex=-0.1)
        with pytest.raises(ValueError, match="nodes"):
            StrainDistribution(mean_ex=8.0, sigma_ex=0.1, nodes=4)


class TestLorentzianSpectrum:
    def test_no_peaks_flat(self):
        grid = np.linspace(0.0, 10.0, 11)
        s = lorentzian_spectrum([], [], [], grid)
        np.testing.assert_array_equal(s.signal, np.ones_like(grid))

    def test_depth_at_center(self):
        s = lorentzian_spectrum([5.0], [2.0], [0.05], np.array([4.0, 5.0, 6.0]))
        assert s.signal[1] == pytest.approx(0.95)

    def test_half_depth_at_half_width(self):
        s = lorentzian_spectrum([5.0], [2.0], [0.05], np.array([4.0, 5.0, 6.0]))
        assert s.signal[0] == pytest.approx(1.0 - 0.025)
        assert s.signal[2] == pytest.approx(1.0 - 0.025)

    def test_rejects_bad_inputs(self):
        grid = np.linspace(0.0, 10.0, 11)
        with pytest.raises(ValueError, match="equal length"):
            lorentzian_spectrum([1.0], [1.0, 2.0], [0.1], grid)
        with pytest.raises(ValueError, match="widths"):
            lorentzian_spectrum([1.0], [0.0], [0.1], grid)


class TestConventionalSpectrum:
    def test_two_dips_at_parallel_splitting(self):
        env = PhysicalEnvironment(b_parallel=150.0)
        grid = np.linspace(2690.0, 3050.0, 3601)
        s = conventional_spectrum(env, grid, fwhm=7.92, contrast=0.05)
        depth = 1.0 - s.signal
        from scipy.signal import find_peaks

        idx, _ = find_peaks(depth, prominence=0.02)
        np.testing.assert_allclose(grid[idx], [2720.0, 3020.0], atol=0.1)

    def test_single_dip_without_field(self):
        env = PhysicalEnvironment()
        grid = np.linspace(2850.0, 2890.0, 401)
        s = conventional_spectrum(env, grid, fwhm=8.0)
        assert grid[np.argmin(s.signal)] == pytest.approx(2870.0, abs=0.1)


class TestSynthesizeMeasurement:
    def _clean(self, n=10000):
        grid = np.linspace(2800.0, 2900.0, n)
        return Spectrum(grid, np.full(n, 0.98), np.zeros(n))

    def test_deterministic_under_seed(self):
        clean = self._clean(500)
        a = synthesize_measurement(clean, 1e6, 1.0, seed=42)
        b = synthesize_measurement(clean, 1e6, 1.0, seed=42)
        np.testing.assert_array_equal(a.signal, b.signal)

    def test_different_seeds_differ(self):
        clean = self._clean(500)
        a = synthesize_measurement(clean, 1e6, 1.0, seed=1)
        b = synthesize_measurement(clean, 1e6, 1.0, seed=2)
        assert np.any(a.signal != b.signal)

    def test_noise_scale_matches_counts(self):
        clean = self._clean(10000)
        noisy = synthesize_measurement(clean, 1e6, 1.0, seed=3)
        resid = noisy.signal - clean.signal
        # ~1e-3 relative at 1e6 counts/point.
        assert np.std(resid) == pytest.approx(1e-3, rel=0.1)
        np.testing.assert_allclose(noisy.sigma, 0.98 / np.sqrt(1e6 * 0.98))

    def test_converges_to_clean_at_high_rate(self):
        clean = self._clean(200)
        noisy = synthesize_measurement(clean, 1e18, 1.0, seed=4)
        np.testing.assert_allclose(noisy.signal, clean.signal, atol=1e-6)

    def test_rejects_nonpositive_rate_or_dwell(self):
        clean = self._clean(20)
        with pytest.raises(ValueError):
            synthesize_measurement(clean, 0.0, 1.0, seed=0)
        with pytest.raises(ValueError):
            synthesize_measurement(clean, 1e6, 0.0, seed=0)


class TestSpectrumContainer:
    def _sample(self):
        rng = np.random.default_rng(7)
        grid = np.sort(rng.uniform(2800.0, 2900.0, 50))
        signal = 1.0 - 0.05 * rng.random(50)
        sigma = 1e-3 * rng.random(50)
        return Spectrum(grid, signal, sigma, {"note": "sample"})

    def test_csv_round_trip_bit_exact(self):
        s = self._sample()
        back = Spectrum.from_csv(s.to_csv())
        np.testing.assert_array_equal(s.frequencies, back.frequencies)
        np.testing.assert_array_equal(s.signal, back.signal)
        np.testing.assert_array_equal(s.sigma, back.sigma)

    def test_json_round_trip(self):
        s = self._sample()
        back = Spectrum.from_json(s.to_json())
        np.testing.assert_array_equal(s.signal, back.signal)
        assert back.metadata == s.metadata

    def test_csv_header_enforced(self):
        with pytest.raises(ValueError, match="header"):
            Spectrum.from_csv("a,b,c\n1,2,3\n")
        assert CSV_HEADER == "frequency_mhz,signal,sigma"

    def test_validation(self):
        with pytest.raises(ValueError, match="ascending"):
            Spectrum([2.0, 1.0], [1.0, 1.0], [0.0, 0.0])
        with pytest.raises(ValueError, match="equal length"):
            Spectrum([1.0, 2.0], [1.0], [0.0, 0.0])
        with pytest.raises(ValueError, match="sigma"):
            Spectrum([1.0, 2.0], [1.0, 1.0], [0.0, -1.0])
