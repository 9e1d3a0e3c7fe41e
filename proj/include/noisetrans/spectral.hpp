#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "noisetrans/rng.hpp"

namespace noisetrans::spectral {

using cplx = std::complex<double>;

/// Channel-wise 2-D discrete Fourier coefficients, [C][H][W] row-major with
/// the DC bin at (u,v) = (0,0). Forward transform is unnormalised, so
/// Parseval reads sum |F|^2 = H*W * sum n^2.
struct Spectrum {
  std::int64_t channels = 0;
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::vector<cplx> coeffs;

  cplx at(std::int64_t c, std::int64_t u, std::int64_t v) const {
    return coeffs[static_cast<std::size_t>((c * height + u) * width + v)];
  }
};

/// Per-channel |F(u,v)|, optionally with the DC and real-valued Nyquist bins
/// of a real-input transform removed (those are not Rayleigh distributed).
struct SpectrumMagnitude {
  std::int64_t channels = 0;
  std::int64_t height = 0;
  std::int64_t width = 0;
  bool special_bins_excluded = false;
  std::vector<std::vector<double>> per_channel;

  std::string to_csv() const;  // flattened, one row per (channel, value)
};

// Plane-level transforms (H rows by W columns, row-major). Power-of-two
// extents take the iterative radix-2 path; anything else falls back to the
// direct evaluation.
std::vector<cplx> dft2_plane(std::span<const double> plane, std::int64_t height, std::int64_t width);
std::vector<cplx> idft2_plane(std::span<const cplx> spec, std::int64_t height, std::int64_t width);

Spectrum dft2_channelwise(const NoiseField& field);
NoiseField idft2_channelwise(const Spectrum& spec);

/// True for the self-conjugate bins of a real-input transform: DC plus the
/// Nyquist rows/columns present when an extent is even.
bool is_special_bin(std::int64_t u, std::int64_t v, std::int64_t height, std::int64_t width);
std::int64_t special_bin_count(std::int64_t height, std::int64_t width);

SpectrumMagnitude magnitude(const Spectrum& spec, bool exclude_special_bins);

/// Rayleigh density (x/sigma^2) exp(-x^2 / (2 sigma^2)); x >= 0, sigma > 0.
double rayleigh_pdf(double x, double sigma);

/// Rayleigh scale of the non-special spectrum bins of an HxW white-Gaussian
/// field with pixel standard deviation sigma: sigma * sqrt(H*W/2).
double gaussian_spectrum_scale(double sigma, std::int64_t height, std::int64_t width);

/// Max relative Parseval mismatch |sum|F|^2 - HW*sum n^2| / (HW*sum n^2).
double parseval_mismatch(const NoiseField& field, const Spectrum& spec);

}  // namespace noisetrans::spectral
