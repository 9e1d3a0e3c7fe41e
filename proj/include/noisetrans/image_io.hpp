#pragma once

#include <filesystem>

#include "noisetrans/tensor.hpp"

namespace noisetrans {

/// Loads a binary netpbm image (P5 PGM or P6 PPM, maxval 255) as a [C,H,W]
/// tensor with values in [0,1]. Other formats or bit depths raise an error
/// naming the file.
Tensor load_image(const std::filesystem::path& path);

/// Writes a [1,H,W] tensor as P5 or a [3,H,W] tensor as P6, quantised by
/// round(v*255) with clamping. 8-bit data round-trips bit-exactly.
void save_image(const std::filesystem::path& path, const Tensor& image);

}  // namespace noisetrans
