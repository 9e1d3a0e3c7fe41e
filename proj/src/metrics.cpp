#include "noisetrans/metrics.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace noisetrans {

double psnr(const Tensor& a, const Tensor& b, double peak) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("psnr: shape mismatch " + shape_to_string(a.shape()) + " vs " +
                                shape_to_string(b.shape()));
  }
  if (a.numel() == 0) throw std::invalid_argument("psnr: empty images");
  double mse = 0.0;
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    const double d = a[i] - b[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.numel());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

namespace {

constexpr int kWindow = 11;

std::array<double, kWindow * kWindow> gaussian_window() {
  std::array<double, kWindow * kWindow> w{};
  const double sigma = 1.5;
  double total = 0.0;
  for (int y = 0; y < kWindow; ++y) {
    for (int x = 0; x < kWindow; ++x) {
      const double dy = y - (kWindow - 1) / 2.0;
      const double dx = x - (kWindow - 1) / 2.0;
      w[static_cast<std::size_t>(y * kWindow + x)] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      total += w[static_cast<std::size_t>(y * kWindow + x)];
    }
  }
  for (double& v : w) v /= total;
  return w;
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("ssim: shape mismatch " + shape_to_string(a.shape()) + " vs " +
                                shape_to_string(b.shape()));
  }
  if (a.rank() != 3) {
    throw std::invalid_argument("ssim: expected [C,H,W], got " + shape_to_string(a.shape()));
  }
  const std::int64_t C = a.dim(0), H = a.dim(1), W = a.dim(2);
  if (H < kWindow || W < kWindow) {
    throw std::invalid_argument("ssim: image " + shape_to_string(a.shape()) +
                                " is smaller than the 11x11 window");
  }
  static const auto window = gaussian_window();
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;

  const std::int64_t plane = H * W;
  double total = 0.0;
  std::int64_t positions = 0;
  for (std::int64_t c = 0; c < C; ++c) {
    const double* pa = a.raw() + c * plane;
    const double* pb = b.raw() + c * plane;
    for (std::int64_t y = 0; y + kWindow <= H; ++y) {
      for (std::int64_t x = 0; x + kWindow <= W; ++x) {
        double mu_a = 0.0, mu_b = 0.0, aa = 0.0, bb = 0.0, ab = 0.0;
        for (int wy = 0; wy < kWindow; ++wy) {
          const double* ra = pa + (y + wy) * W + x;
          const double* rb = pb + (y + wy) * W + x;
          const double* wr = window.data() + wy * kWindow;
          for (int wx = 0; wx < kWindow; ++wx) {
            const double va = ra[wx];
            const double vb = rb[wx];
            const double wv = wr[wx];
            mu_a += wv * va;
            mu_b += wv * vb;
            aa += wv * va * va;
            bb += wv * vb * vb;
            ab += wv * va * vb;
          }
        }
        const double var_a = aa - mu_a * mu_a;
        const double var_b = bb - mu_b * mu_b;
        const double cov = ab - mu_a * mu_b;
        const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
        const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
        total += num / den;
        ++positions;
      }
    }
  }
  return total / static_cast<double>(positions);
}

}  // namespace noisetrans
