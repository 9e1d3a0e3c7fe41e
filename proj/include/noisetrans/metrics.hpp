#pragma once

#include "noisetrans/tensor.hpp"

namespace noisetrans {

/// 10*log10(peak^2 / MSE); returns +infinity when the images are identical.
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0);

/// Mean local structural similarity over valid 11x11 window positions
/// (Gaussian window, sigma 1.5; C1 = 0.01^2, C2 = 0.03^2 at peak 1),
/// averaged over channels. Requires H, W >= 11.
double ssim(const Tensor& a, const Tensor& b);

}  // namespace noisetrans
