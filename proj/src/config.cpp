#include "noisetrans/config.hpp"

#include <fstream>
#include <stdexcept>
#include <thread>

namespace noisetrans {

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("config: ") + what);
  };
  require(crop >= 8, "crop must be at least 8");
  require(batch >= 1 && translator_batch >= 1, "batch sizes must be positive");
  require(denoiser_iters >= 1 && translator_iters >= 1, "iteration counts must be positive");
  require(pretrain_sigma >= 0.0, "pretrain sigma must be >= 0");
  require(aug_lo >= 0.0 && aug_hi >= aug_lo, "augmentation range needs 0 <= lo <= hi");
  require(sigma_tilde >= 0.0, "sigma_tilde must be >= 0");
  require(alpha >= 0.0 && beta >= 0.0, "loss weights must be >= 0");
  require(denoiser_width >= 1 && denoiser_layers >= 0, "denoiser architecture invalid");
  require(translator_width >= 1 && translator_depth >= 0, "translator architecture invalid");
  require(channels == 1 || channels == 3, "channels must be 1 or 3");
  require(real_noise.corr_sigma_lo >= 0.0 && real_noise.corr_sigma_hi >= real_noise.corr_sigma_lo,
          "correlated-noise range needs 0 <= lo <= hi");
  require(real_noise.sd_a >= 0.0 && real_noise.sd_b >= 0.0,
          "signal-dependent coefficients must be >= 0");
  require(denoiser_lr_init > 0.0 && translator_lr_init > 0.0, "learning rates must be positive");
}

std::int64_t TrainConfig::worker_count() const {
  if (threads > 0) return threads;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<std::int64_t>(hc);
}

void to_json(nlohmann::json& j, const RealNoiseSpec& s) {
  j = {{"corr_sigma_lo", s.corr_sigma_lo},
       {"corr_sigma_hi", s.corr_sigma_hi},
       {"sd_a", s.sd_a},
       {"sd_b", s.sd_b}};
}

void from_json(const nlohmann::json& j, RealNoiseSpec& s) {
  s.corr_sigma_lo = j.value("corr_sigma_lo", s.corr_sigma_lo);
  s.corr_sigma_hi = j.value("corr_sigma_hi", s.corr_sigma_hi);
  s.sd_a = j.value("sd_a", s.sd_a);
  s.sd_b = j.value("sd_b", s.sd_b);
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"seed", c.seed},
       {"crop", c.crop},
       {"batch", c.batch},
       {"translator_batch", c.translator_batch},
       {"denoiser_iters", c.denoiser_iters},
       {"translator_iters", c.translator_iters},
       {"denoiser_lr_init", c.denoiser_lr_init},
       {"denoiser_lr_final", c.denoiser_lr_final},
       {"translator_lr_init", c.translator_lr_init},
       {"translator_lr_final", c.translator_lr_final},
       {"pretrain_sigma", c.pretrain_sigma},
       {"aug_lo", c.aug_lo},
       {"aug_hi", c.aug_hi},
       {"sigma_tilde", c.sigma_tilde},
       {"alpha", c.alpha},
       {"beta", c.beta},
       {"denoiser_width", c.denoiser_width},
       {"denoiser_layers", c.denoiser_layers},
       {"translator_width", c.translator_width},
       {"translator_depth", c.translator_depth},
       {"channels", c.channels},
       {"threads", c.threads},
       {"corpus_dir", c.corpus_dir},
       {"real_noise", c.real_noise}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.seed = j.value("seed", c.seed);
  c.crop = j.value("crop", c.crop);
  c.batch = j.value("batch", c.batch);
  c.translator_batch = j.value("translator_batch", c.translator_batch);
  c.denoiser_iters = j.value("denoiser_iters", c.denoiser_iters);
  c.translator_iters = j.value("translator_iters", c.translator_iters);
  c.denoiser_lr_init = j.value("denoiser_lr_init", c.denoiser_lr_init);
  c.denoiser_lr_final = j.value("denoiser_lr_final", c.denoiser_lr_final);
  c.translator_lr_init = j.value("translator_lr_init", c.translator_lr_init);
  c.translator_lr_final = j.value("translator_lr_final", c.translator_lr_final);
  c.pretrain_sigma = j.value("pretrain_sigma", c.pretrain_sigma);
  c.aug_lo = j.value("aug_lo", c.aug_lo);
  c.aug_hi = j.value("aug_hi", c.aug_hi);
  c.sigma_tilde = j.value("sigma_tilde", c.sigma_tilde);
  c.alpha = j.value("alpha", c.alpha);
  c.beta = j.value("beta", c.beta);
  c.denoiser_width = j.value("denoiser_width", c.denoiser_width);
  c.denoiser_layers = j.value("denoiser_layers", c.denoiser_layers);
  c.translator_width = j.value("translator_width", c.translator_width);
  c.translator_depth = j.value("translator_depth", c.translator_depth);
  c.channels = j.value("channels", c.channels);
  c.threads = j.value("threads", c.threads);
  c.corpus_dir = j.value("corpus_dir", c.corpus_dir);
  if (j.contains("real_noise")) j.at("real_noise").get_to(c.real_noise);
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config '" + path.string() + "': cannot open");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("config '" + path.string() + "': parse error: " + e.what());
  }
  TrainConfig c;
  from_json(j, c);
  c.validate();
  return c;
}

}  // namespace noisetrans
