#pragma once

#include <cstdint>

#include "noisetrans/config.hpp"
#include "noisetrans/rng.hpp"
#include "noisetrans/tensor.hpp"

namespace noisetrans {

/// Procedural piecewise-smooth test image in [0,1]: low-frequency gradients
/// plus a handful of constant-intensity shapes with a little texture, loosely
/// mimicking natural-image statistics at desk scale. [C,H,W].
Tensor synth_clean_image(Prng& rng, std::int64_t height, std::int64_t width,
                         std::int64_t channels);

/// One draw of the synthetic stand-in for real camera noise: a seeded coin
/// flip picks either the spatially correlated family or the signal-dependent
/// family, with levels from `spec`.
struct RealNoiseDraw {
  NoiseField field;
  bool correlated = false;  // false = signal-dependent
};
RealNoiseDraw synth_real_noise(Prng& rng, const Tensor& clean, const RealNoiseSpec& spec);

/// clean + noise, clamped to [0,1].
Tensor apply_noise(const Tensor& clean, const NoiseField& noise);

Tensor clamp01(const Tensor& t);

}  // namespace noisetrans
