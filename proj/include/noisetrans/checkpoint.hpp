#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "noisetrans/tensor.hpp"

namespace noisetrans {

/// Serialized model container. Layout:
///   magic "NTNT" | u32 LE version | u64 LE manifest length | manifest JSON |
///   payload of little-endian 32-bit floats, row-major, in manifest order.
/// The manifest carries the architecture hyperparameters, training config,
/// iteration counter, and the named tensor index. save(load(x)) is
/// byte-identical to x.
struct Checkpoint {
  nlohmann::json manifest;
  std::vector<std::pair<std::string, Tensor>> tensors;  // manifest order

  static constexpr std::uint32_t kVersion = 1;

  const Tensor& tensor(const std::string& name) const;
};

Checkpoint make_checkpoint(const std::string& kind, nlohmann::json meta,
                           const std::vector<std::pair<std::string, const Tensor*>>& tensors);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace noisetrans
