#include "noisetrans/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace noisetrans {

Tensor synth_clean_image(Prng& rng, std::int64_t height, std::int64_t width,
                         std::int64_t channels) {
  const std::int64_t plane = height * width;
  Tensor img({channels, height, width});

  // Smooth base: a few random low-frequency cosine ripples shared across
  // channels, with small per-channel offsets so channels stay correlated.
  const int ripples = 2 + static_cast<int>(rng.next_u64() % 3);
  std::vector<double> base(static_cast<std::size_t>(plane), 0.0);
  for (int r = 0; r < ripples; ++r) {
    const double fy = rng.uniform(0.3, 2.2) * std::numbers::pi / static_cast<double>(height);
    const double fx = rng.uniform(0.3, 2.2) * std::numbers::pi / static_cast<double>(width);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double amp = rng.uniform(0.05, 0.18);
    for (std::int64_t y = 0; y < height; ++y) {
      for (std::int64_t x = 0; x < width; ++x) {
        base[static_cast<std::size_t>(y * width + x)] +=
            amp * std::cos(fy * static_cast<double>(y) + fx * static_cast<double>(x) + phase);
      }
    }
  }
  const double floor_level = rng.uniform(0.25, 0.55);
  std::vector<double> chroma(static_cast<std::size_t>(channels));
  for (auto& c : chroma) c = rng.uniform(-0.06, 0.06);
  for (std::int64_t c = 0; c < channels; ++c) {
    for (std::int64_t p = 0; p < plane; ++p) {
      img[c * plane + p] = floor_level + chroma[static_cast<std::size_t>(c)] +
                           base[static_cast<std::size_t>(p)];
    }
  }

  // Flat shapes: rectangles and disks with their own intensity per channel.
  const int shapes = 3 + static_cast<int>(rng.next_u64() % 4);
  for (int s = 0; s < shapes; ++s) {
    const bool disk = (rng.next_u64() & 1) != 0;
    const double cy = rng.uniform(0.1, 0.9) * static_cast<double>(height);
    const double cx = rng.uniform(0.1, 0.9) * static_cast<double>(width);
    const double ry = rng.uniform(0.06, 0.22) * static_cast<double>(height);
    const double rx = rng.uniform(0.06, 0.22) * static_cast<double>(width);
    std::vector<double> level(static_cast<std::size_t>(channels));
    const double base_level = rng.uniform(0.15, 0.85);
    for (auto& l : level) l = base_level + rng.uniform(-0.08, 0.08);
    for (std::int64_t y = 0; y < height; ++y) {
      for (std::int64_t x = 0; x < width; ++x) {
        const double dy = (static_cast<double>(y) - cy) / ry;
        const double dx = (static_cast<double>(x) - cx) / rx;
        const bool inside = disk ? (dy * dy + dx * dx <= 1.0)
                                 : (std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0);
        if (!inside) continue;
        for (std::int64_t c = 0; c < channels; ++c) {
          img[c * plane + y * width + x] = level[static_cast<std::size_t>(c)];
        }
      }
    }
  }

  // Faint diagonal texture on a random band, to give the denoiser some
  // structure to preserve.
  const double tex_amp = rng.uniform(0.0, 0.04);
  const double tex_freq = rng.uniform(0.4, 1.2);
  for (std::int64_t c = 0; c < channels; ++c) {
    for (std::int64_t y = 0; y < height; ++y) {
      for (std::int64_t x = 0; x < width; ++x) {
        img[c * plane + y * width + x] +=
            tex_amp * std::sin(tex_freq * static_cast<double>(x + 2 * y));
      }
    }
  }

  for (auto& v : img.data()) v = std::clamp(v, 0.02, 0.98);
  return img;
}

RealNoiseDraw synth_real_noise(Prng& rng, const Tensor& clean, const RealNoiseSpec& spec) {
  const bool correlated = (rng.next_u64() & 1) != 0;
  if (correlated) {
    const double sigma = rng.uniform(spec.corr_sigma_lo, spec.corr_sigma_hi) / 255.0;
    return {synth_correlated(rng, clean.dim(1), clean.dim(2), clean.dim(0), sigma), true};
  }
  return {synth_signal_dependent(rng, clean, spec.sd_a, spec.sd_b), false};
}

Tensor apply_noise(const Tensor& clean, const NoiseField& noise) {
  Tensor noisy = clean;
  const Tensor n = noise.to_tensor();
  if (!noisy.same_shape(n)) {
    throw std::invalid_argument("apply_noise: image " + shape_to_string(clean.shape()) +
                                " vs noise " + shape_to_string(n.shape()));
  }
  for (std::int64_t i = 0; i < noisy.numel(); ++i) {
    noisy[i] = std::clamp(noisy[i] + n[i], 0.0, 1.0);
  }
  return noisy;
}

Tensor clamp01(const Tensor& t) {
  Tensor out = t;
  for (auto& v : out.data()) v = std::clamp(v, 0.0, 1.0);
  return out;
}

}  // namespace noisetrans
