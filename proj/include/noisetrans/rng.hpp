#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "noisetrans/tensor.hpp"

namespace noisetrans {

/// xoshiro256** seeded through a splitmix64 expansion of a 64-bit seed.
/// The same seed yields the same stream on every platform and run. Normals
/// come from the basic (trigonometric) Box-Muller transform with the second
/// value cached; Rayleigh draws use the inverse CDF. A Prng is single-owner
/// mutable state: use one instance per thread or stream.
class Prng {
 public:
  explicit Prng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform in (0, 1].
  double uniform01();
  double uniform(double lo, double hi);
  double normal();  // standard normal
  double normal(double mu, double sigma);
  /// Inverse-CDF Rayleigh draw, x = sigma * sqrt(-2 ln u); sigma must be > 0.
  double rayleigh(double sigma);

  /// Child stream: seeded with splitmix64(seed ^ hash(stream_id)), so streams
  /// derived from the same parent seed and id are reproducible and
  /// independent of the parent's position.
  Prng split(std::uint64_t stream_id) const;
  Prng split(std::string_view stream_name) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_ = 0;
  std::array<std::uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// One realization of residual noise, stored as [C][H][W] planes in
/// normalized pixel units (1.0 = 255 eight-bit levels), with the empirical
/// mean and population standard deviation cached at construction.
struct NoiseField {
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::int64_t channels = 0;
  std::vector<double> values;
  double mu_hat = 0.0;
  double sigma_hat = 0.0;

  NoiseField() = default;
  NoiseField(std::int64_t h, std::int64_t w, std::int64_t c, std::vector<double> vals);

  std::int64_t numel() const { return height * width * channels; }
  double at(std::int64_t c, std::int64_t y, std::int64_t x) const {
    return values[static_cast<std::size_t>((c * height + y) * width + x)];
  }

  Tensor to_tensor() const;  // [C,H,W]
  /// Accepts [C,H,W] or [1,C,H,W].
  static NoiseField from_tensor(const Tensor& t);
};

/// I.i.d. Gaussian field; sigma = 0 degenerates to a constant field of mu.
NoiseField sample_gaussian(Prng& rng, std::int64_t height, std::int64_t width,
                           std::int64_t channels, double mu, double sigma);

/// Spatially correlated stationary field: white Gaussian smoothed by a 3x3
/// box filter with zero-padded borders, rescaled so the interior standard
/// deviation is sigma. Interior lag-1 autocorrelation is 2/3 by
/// construction (six of nine taps shared between neighbours).
NoiseField synth_correlated(Prng& rng, std::int64_t height, std::int64_t width,
                            std::int64_t channels, double sigma);

/// Signal-dependent field: per-pixel Gaussian with variance a*x + b, the
/// Gaussian approximation of a Poisson-Gaussian camera model. `clean` is a
/// [C,H,W] tensor with values in [0,1].
NoiseField synth_signal_dependent(Prng& rng, const Tensor& clean, double a, double b);

std::vector<double> sample_rayleigh(Prng& rng, std::int64_t count, double sigma);

}  // namespace noisetrans
