#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

namespace noisetrans {

/// Parameters of the synthetic camera-like noise used as the stand-in for
/// real noise: a per-image coin flip selects either the spatially correlated
/// family (box-filtered Gaussian, level drawn from [corr_sigma_lo,
/// corr_sigma_hi] eight-bit units) or the signal-dependent family
/// (variance = sd_a * intensity + sd_b).
struct RealNoiseSpec {
  double corr_sigma_lo = 8.0;
  double corr_sigma_hi = 20.0;
  double sd_a = 0.01;
  double sd_b = (5.0 / 255.0) * (5.0 / 255.0);
};

struct TrainConfig {
  std::uint64_t seed = 1;
  std::int64_t crop = 64;
  std::int64_t batch = 2;             // denoiser pretraining (half-and-half sources)
  std::int64_t translator_batch = 4;  // translator training
  std::int64_t denoiser_iters = 2000;
  std::int64_t translator_iters = 1000;
  double denoiser_lr_init = 1e-3;
  double denoiser_lr_final = 1e-7;
  double translator_lr_init = 1e-3;
  double translator_lr_final = 1e-5;
  double pretrain_sigma = 15.0;  // eight-bit units; internal scale is /255
  double aug_lo = 0.0;
  double aug_hi = 15.0;
  double sigma_tilde = 100.0;
  double alpha = 5e-2;
  double beta = 2e-3;
  std::int64_t denoiser_width = 32;
  std::int64_t denoiser_layers = 6;
  std::int64_t translator_width = 4;
  std::int64_t translator_depth = 1;
  std::int64_t channels = 3;
  std::int64_t threads = 0;  // 0 = hardware concurrency
  std::string corpus_dir;
  RealNoiseSpec real_noise;

  void validate() const;  // throws std::invalid_argument on bad values
  std::int64_t worker_count() const;
};

void to_json(nlohmann::json& j, const RealNoiseSpec& s);
void from_json(const nlohmann::json& j, RealNoiseSpec& s);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

TrainConfig load_config(const std::filesystem::path& path);

}  // namespace noisetrans
