#include "noisetrans/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>

namespace noisetrans::spectral {

namespace {

bool is_pow2(std::int64_t n) { return n > 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 Cooley-Tukey, in place. sign = -1 forward, +1 inverse
// (unscaled).
void fft_pow2(cplx* a, std::int64_t n, int sign) {
  for (std::int64_t i = 1, j = 0; i < n; ++i) {
    std::int64_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::int64_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
    const cplx wl(std::cos(ang), std::sin(ang));
    for (std::int64_t i = 0; i < n; i += len) {
      cplx w(1.0, 0.0);
      for (std::int64_t k = 0; k < len / 2; ++k) {
        const cplx u = a[i + k];
        const cplx v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

// Direct O(n^2) evaluation for non-power-of-two extents. Twiddles are
// indexed by (k*j mod n) for accuracy.
void dft_direct(const cplx* in, cplx* out, std::int64_t n, int sign) {
  std::vector<cplx> tw(static_cast<std::size_t>(n));
  for (std::int64_t k = 0; k < n; ++k) {
    const double ang = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    tw[static_cast<std::size_t>(k)] = cplx(std::cos(ang), std::sin(ang));
  }
  for (std::int64_t k = 0; k < n; ++k) {
    cplx acc(0.0, 0.0);
    for (std::int64_t j = 0; j < n; ++j) {
      acc += in[j] * tw[static_cast<std::size_t>((k * j) % n)];
    }
    out[k] = acc;
  }
}

void transform_1d(cplx* data, std::int64_t n, int sign, std::vector<cplx>& scratch) {
  if (is_pow2(n)) {
    fft_pow2(data, n, sign);
  } else {
    scratch.assign(data, data + n);
    dft_direct(scratch.data(), data, n, sign);
  }
}

// 2-D transform of one plane: rows, then columns. No normalisation.
void transform_plane(std::vector<cplx>& plane, std::int64_t height, std::int64_t width, int sign) {
  std::vector<cplx> scratch;
  for (std::int64_t y = 0; y < height; ++y) {
    transform_1d(plane.data() + y * width, width, sign, scratch);
  }
  std::vector<cplx> column(static_cast<std::size_t>(height));
  for (std::int64_t x = 0; x < width; ++x) {
    for (std::int64_t y = 0; y < height; ++y) column[static_cast<std::size_t>(y)] = plane[y * width + x];
    transform_1d(column.data(), height, sign, scratch);
    for (std::int64_t y = 0; y < height; ++y) plane[y * width + x] = column[static_cast<std::size_t>(y)];
  }
}

}  // namespace

std::vector<cplx> dft2_plane(std::span<const double> plane, std::int64_t height, std::int64_t width) {
  if (static_cast<std::int64_t>(plane.size()) != height * width) {
    throw std::invalid_argument("dft2_plane: plane size does not match extents");
  }
  std::vector<cplx> out(plane.size());
  for (std::size_t i = 0; i < plane.size(); ++i) out[i] = cplx(plane[i], 0.0);
  transform_plane(out, height, width, -1);
  return out;
}

std::vector<cplx> idft2_plane(std::span<const cplx> spec, std::int64_t height, std::int64_t width) {
  if (static_cast<std::int64_t>(spec.size()) != height * width) {
    throw std::invalid_argument("idft2_plane: spectrum size does not match extents");
  }
  std::vector<cplx> out(spec.begin(), spec.end());
  transform_plane(out, height, width, +1);
  const double norm = 1.0 / static_cast<double>(height * width);
  for (cplx& v : out) v *= norm;
  return out;
}

Spectrum dft2_channelwise(const NoiseField& field) {
  Spectrum spec;
  spec.channels = field.channels;
  spec.height = field.height;
  spec.width = field.width;
  spec.coeffs.resize(static_cast<std::size_t>(field.numel()));
  const auto plane = static_cast<std::size_t>(field.height * field.width);
  for (std::int64_t c = 0; c < field.channels; ++c) {
    auto ch = dft2_plane(
        std::span<const double>(field.values.data() + static_cast<std::size_t>(c) * plane, plane),
        field.height, field.width);
    std::copy(ch.begin(), ch.end(), spec.coeffs.begin() + static_cast<std::ptrdiff_t>(c) * static_cast<std::ptrdiff_t>(plane));
  }
  return spec;
}

NoiseField idft2_channelwise(const Spectrum& spec) {
  const auto plane = static_cast<std::size_t>(spec.height * spec.width);
  std::vector<double> vals(plane * static_cast<std::size_t>(spec.channels));
  for (std::int64_t c = 0; c < spec.channels; ++c) {
    auto ch = idft2_plane(
        std::span<const cplx>(spec.coeffs.data() + static_cast<std::size_t>(c) * plane, plane),
        spec.height, spec.width);
    for (std::size_t i = 0; i < plane; ++i) {
      vals[static_cast<std::size_t>(c) * plane + i] = ch[i].real();
    }
  }
  return NoiseField(spec.height, spec.width, spec.channels, std::move(vals));
}

bool is_special_bin(std::int64_t u, std::int64_t v, std::int64_t height, std::int64_t width) {
  const bool u_self = (u == 0) || (height % 2 == 0 && u == height / 2);
  const bool v_self = (v == 0) || (width % 2 == 0 && v == width / 2);
  return u_self && v_self;
}

std::int64_t special_bin_count(std::int64_t height, std::int64_t width) {
  return (height % 2 == 0 ? 2 : 1) * (width % 2 == 0 ? 2 : 1);
}

SpectrumMagnitude magnitude(const Spectrum& spec, bool exclude_special_bins) {
  SpectrumMagnitude mag;
  mag.channels = spec.channels;
  mag.height = spec.height;
  mag.width = spec.width;
  mag.special_bins_excluded = exclude_special_bins;
  mag.per_channel.resize(static_cast<std::size_t>(spec.channels));
  for (std::int64_t c = 0; c < spec.channels; ++c) {
    auto& out = mag.per_channel[static_cast<std::size_t>(c)];
    out.reserve(static_cast<std::size_t>(spec.height * spec.width));
    for (std::int64_t u = 0; u < spec.height; ++u) {
      for (std::int64_t v = 0; v < spec.width; ++v) {
        if (exclude_special_bins && is_special_bin(u, v, spec.height, spec.width)) continue;
        out.push_back(std::abs(spec.at(c, u, v)));
      }
    }
  }
  return mag;
}

double rayleigh_pdf(double x, double sigma) {
  if (x < 0.0) throw std::invalid_argument("rayleigh_pdf: x must be >= 0");
  if (sigma <= 0.0) throw std::invalid_argument("rayleigh_pdf: sigma must be > 0");
  const double s2 = sigma * sigma;
  return (x / s2) * std::exp(-x * x / (2.0 * s2));
}

double gaussian_spectrum_scale(double sigma, std::int64_t height, std::int64_t width) {
  if (sigma < 0.0) throw std::invalid_argument("gaussian_spectrum_scale: sigma must be >= 0");
  return sigma * std::sqrt(static_cast<double>(height * width) / 2.0);
}

double parseval_mismatch(const NoiseField& field, const Spectrum& spec) {
  double spatial = 0.0;
  for (double v : field.values) spatial += v * v;
  double spectral_sum = 0.0;
  for (const cplx& f : spec.coeffs) spectral_sum += std::norm(f);
  const double expected = static_cast<double>(field.height * field.width) * spatial;
  if (expected == 0.0) return spectral_sum == 0.0 ? 0.0 : 1.0;
  return std::abs(spectral_sum - expected) / expected;
}

std::string SpectrumMagnitude::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "channel,magnitude\n";
  for (std::size_t c = 0; c < per_channel.size(); ++c) {
    for (double v : per_channel[c]) os << c << ',' << v << '\n';
  }
  return os.str();
}

}  // namespace noisetrans::spectral
