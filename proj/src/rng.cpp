#include "noisetrans/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace noisetrans {

namespace {

std::uint64_t splitmix64(std::uint64_t& s) {
  s += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Prng::Prng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t s = seed;
  for (auto& word : state_) word = splitmix64(s);
}

std::uint64_t Prng::next_u64() {
  const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double Prng::uniform01() {
  // 53-bit mantissa, shifted into (0, 1] so log() is always defined.
  return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double Prng::uniform(double lo, double hi) {
  if (hi < lo) throw std::invalid_argument("uniform: hi < lo");
  return lo + (hi - lo) * uniform01();
}

double Prng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform01();
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(angle);
  has_spare_ = true;
  return r * std::cos(angle);
}

double Prng::normal(double mu, double sigma) { return mu + sigma * normal(); }

double Prng::rayleigh(double sigma) {
  if (sigma <= 0.0) throw std::invalid_argument("rayleigh: sigma must be > 0");
  return sigma * std::sqrt(-2.0 * std::log(uniform01()));
}

Prng Prng::split(std::uint64_t stream_id) const {
  std::uint64_t s = seed_ ^ stream_id;
  return Prng(splitmix64(s));
}

Prng Prng::split(std::string_view stream_name) const { return split(fnv1a64(stream_name)); }

NoiseField::NoiseField(std::int64_t h, std::int64_t w, std::int64_t c, std::vector<double> vals)
    : height(h), width(w), channels(c), values(std::move(vals)) {
  if (h <= 0 || w <= 0 || c <= 0) throw std::invalid_argument("noise field extents must be positive");
  if (static_cast<std::int64_t>(values.size()) != numel()) {
    throw std::invalid_argument("noise field value count does not match " + std::to_string(h) + "x" +
                                std::to_string(w) + "x" + std::to_string(c));
  }
  bool constant = true;
  for (double v : values) {
    if (v != values.front()) {
      constant = false;
      break;
    }
  }
  if (constant) {
    // Exact degenerate moments for a constant field.
    mu_hat = values.front();
    sigma_hat = 0.0;
    return;
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  mu_hat = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - mu_hat) * (v - mu_hat);
  sigma_hat = std::sqrt(sq / static_cast<double>(values.size()));
}

Tensor NoiseField::to_tensor() const { return Tensor({channels, height, width}, values); }

NoiseField NoiseField::from_tensor(const Tensor& t) {
  const auto& s = t.shape();
  if (t.rank() == 3) {
    return NoiseField(s[1], s[2], s[0], std::vector<double>(t.data().begin(), t.data().end()));
  }
  if (t.rank() == 4 && s[0] == 1) {
    return NoiseField(s[2], s[3], s[1], std::vector<double>(t.data().begin(), t.data().end()));
  }
  throw std::invalid_argument("expected a [C,H,W] or [1,C,H,W] tensor, got " + shape_to_string(s));
}

NoiseField sample_gaussian(Prng& rng, std::int64_t height, std::int64_t width,
                           std::int64_t channels, double mu, double sigma) {
  if (sigma < 0.0) throw std::invalid_argument("sample_gaussian: sigma must be >= 0");
  std::vector<double> vals(static_cast<std::size_t>(height * width * channels));
  if (sigma == 0.0) {
    for (double& v : vals) v = mu;
  } else {
    for (double& v : vals) v = rng.normal(mu, sigma);
  }
  return NoiseField(height, width, channels, std::move(vals));
}

NoiseField synth_correlated(Prng& rng, std::int64_t height, std::int64_t width,
                            std::int64_t channels, double sigma) {
  if (height < 3 || width < 3) {
    throw std::invalid_argument("synth_correlated: field must be at least 3x3, got " +
                                std::to_string(height) + "x" + std::to_string(width));
  }
  if (sigma < 0.0) throw std::invalid_argument("synth_correlated: sigma must be >= 0");
  const auto plane = static_cast<std::size_t>(height * width);
  std::vector<double> white(plane * static_cast<std::size_t>(channels));
  for (double& v : white) v = rng.normal();

  // Interior std of the box-filtered unit-variance field is 1/3; scaling by
  // 3*sigma restores the requested level there. Borders keep reduced
  // variance from the zero padding.
  const double gain = 3.0 * sigma / 9.0;
  std::vector<double> vals(white.size(), 0.0);
  for (std::int64_t c = 0; c < channels; ++c) {
    const double* src = &white[static_cast<std::size_t>(c) * plane];
    double* dst = &vals[static_cast<std::size_t>(c) * plane];
    for (std::int64_t y = 0; y < height; ++y) {
      for (std::int64_t x = 0; x < width; ++x) {
        double acc = 0.0;
        for (std::int64_t dy = -1; dy <= 1; ++dy) {
          const std::int64_t yy = y + dy;
          if (yy < 0 || yy >= height) continue;
          for (std::int64_t dx = -1; dx <= 1; ++dx) {
            const std::int64_t xx = x + dx;
            if (xx < 0 || xx >= width) continue;
            acc += src[yy * width + xx];
          }
        }
        dst[y * width + x] = gain * acc;
      }
    }
  }
  return NoiseField(height, width, channels, std::move(vals));
}

NoiseField synth_signal_dependent(Prng& rng, const Tensor& clean, double a, double b) {
  if (a < 0.0 || b < 0.0) {
    throw std::invalid_argument("synth_signal_dependent: coefficients must be >= 0");
  }
  if (clean.rank() != 3) {
    throw std::invalid_argument("synth_signal_dependent: clean image must be [C,H,W], got " +
                                shape_to_string(clean.shape()));
  }
  for (double v : clean.data()) {
    if (v < 0.0 || v > 1.0) {
      throw std::invalid_argument("synth_signal_dependent: clean values must lie in [0,1]");
    }
  }
  std::vector<double> vals(static_cast<std::size_t>(clean.numel()));
  for (std::int64_t i = 0; i < clean.numel(); ++i) {
    vals[static_cast<std::size_t>(i)] = rng.normal(0.0, std::sqrt(a * clean[i] + b));
  }
  return NoiseField(clean.dim(1), clean.dim(2), clean.dim(0), std::move(vals));
}

std::vector<double> sample_rayleigh(Prng& rng, std::int64_t count, double sigma) {
  if (sigma <= 0.0) throw std::invalid_argument("sample_rayleigh: sigma must be > 0");
  std::vector<double> out(static_cast<std::size_t>(count));
  for (double& v : out) v = rng.rayleigh(sigma);
  return out;
}

}  // namespace noisetrans
