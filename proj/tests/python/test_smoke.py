"""Smoke tests for the python bindings.

numpy/scipy serve as independent references for the DFT and the
1-Wasserstein distance.
"""

import math

import numpy as np
import pytest

import noisetrans as nt


def test_prng_determinism():
    a = nt.Prng(42)
    b = nt.Prng(42)
    assert [a.next_u64() for _ in range(8)] == [b.next_u64() for _ in range(8)]
    child = nt.Prng(42).split_named("stream")
    child2 = nt.Prng(42).split_named("stream")
    assert child.next_u64() == child2.next_u64()


def test_sample_gaussian_matches_requested_moments():
    rng = nt.Prng(7)
    field = nt.sample_gaussian(rng, 64, 64, 3, 0.0, 15.0 / 255.0)
    assert field.shape == (3, 64, 64)
    mu, sigma = nt.empirical_moments(field)
    assert abs(mu) < 4 * (15.0 / 255.0) / math.sqrt(field.size)
    assert sigma == pytest.approx(15.0 / 255.0, rel=0.03)


def test_w1_sorted_matches_scipy():
    scipy_stats = pytest.importorskip("scipy.stats")
    rng = np.random.default_rng(3)
    x = rng.normal(size=257)
    y = rng.normal(loc=0.3, size=257)
    ours = nt.w1_sorted(x, y)
    reference = scipy_stats.wasserstein_distance(x, y)
    assert ours == pytest.approx(reference, rel=1e-10)


def test_w1_oracle_agrees_with_sorted_form():
    rng = np.random.default_rng(5)
    for n in (3, 8, 16, 64):
        x = rng.normal(size=n)
        y = rng.normal(size=n)
        assert nt.w1_oracle(x, y) == pytest.approx(nt.w1_sorted(x, y), abs=1e-9)


def test_dft2_matches_numpy():
    rng = np.random.default_rng(11)
    field = rng.normal(size=(2, 8, 8))
    ours = nt.dft2(field)
    reference = np.fft.fft2(field, axes=(1, 2))
    assert np.allclose(ours, reference, atol=1e-9)


def test_rayleigh_scale_and_pdf():
    assert nt.gaussian_spectrum_scale(1.0, 8, 8) == pytest.approx(math.sqrt(32.0))
    assert nt.rayleigh_pdf(1.0, 1.0) == pytest.approx(math.exp(-0.5))


def test_spectrum_magnitudes_excludes_special_bins():
    rng = nt.Prng(13)
    field = nt.sample_gaussian(rng, 8, 8, 1, 0.0, 1.0)
    mags = nt.spectrum_magnitudes(field, True)
    assert len(mags) == 1
    assert len(mags[0]) == 8 * 8 - 4  # DC + three real Nyquist bins dropped


def test_psnr_and_ssim_reference_points():
    a = np.full((1, 16, 16), 0.5)
    b = a + 16.0 / 255.0
    assert nt.psnr(a, b) == pytest.approx(20 * math.log10(255.0 / 16.0), abs=1e-9)
    assert math.isinf(nt.psnr(a, a))
    assert nt.ssim(a, a) == 1.0


def test_loss_breakdown_composition():
    rng = nt.Prng(17)
    noise = nt.sample_gaussian(rng, 16, 16, 1, 0.0, 0.05)
    ref = nt.sample_gaussian(rng, 16, 16, 1, 0.0, 0.05)
    denoised = np.full((1, 16, 16), 0.4)
    clean = np.full((1, 16, 16), 0.5)
    b = nt.loss_breakdown(noise, ref, 5e-2, 2e-3, denoised, clean)
    assert b["l_explicit"] == b["l_spatial"] + 2e-3 * b["l_freq"]
    assert b["l_total"] == b["l_implicit"] + 5e-2 * b["l_explicit"]
    assert b["l_implicit"] == pytest.approx(0.1)


def test_correlated_noise_is_gaussian_marginally_but_not_spectrally():
    rng = nt.Prng(19)
    sigma = 12.0 / 255.0
    corr = nt.synth_correlated(rng, 64, 64, 1, sigma)
    mu, sig = nt.empirical_moments(corr)
    ref = nt.sample_gaussian(nt.Prng(1019), 64, 64, 1, mu, sig)
    assert nt.w1_sorted(corr, ref) < 0.05 * sigma

    scale = nt.gaussian_spectrum_scale(sig, 64, 64)
    mags = np.asarray(nt.spectrum_magnitudes(corr, True)[0])
    ray = nt.sample_rayleigh(nt.Prng(2019), mags.size, scale)
    assert nt.w1_sorted(mags, np.asarray(ray)) > 3 * 0.05 * scale


def test_signal_dependent_noise_variance_grows_with_intensity():
    rng = nt.Prng(23)
    clean = np.concatenate(
        [np.full((1, 64, 32), 0.1), np.full((1, 64, 32), 0.9)], axis=2
    )
    noise = nt.synth_signal_dependent(rng, clean, 0.01, 1e-5)
    lo = noise[0, :, :32].var()
    hi = noise[0, :, 32:].var()
    assert hi / lo == pytest.approx((0.9 * 0.01 + 1e-5) / (0.1 * 0.01 + 1e-5), rel=0.2)
