#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "noisetrans/checkpoint.hpp"
#include "noisetrans/config.hpp"
#include "noisetrans/losses.hpp"
#include "noisetrans/nets.hpp"
#include "noisetrans/rng.hpp"
#include "noisetrans/stats.hpp"
#include "noisetrans/tensor.hpp"

namespace noisetrans {

// --- data -------------------------------------------------------------------

enum class Provenance {
  SyntheticGaussian,
  SyntheticCorrelated,
  SyntheticSignalDependent,
  ExternalPair,
};

const char* provenance_name(Provenance p);

struct ImagePair {
  Tensor clean;  // [C,H,W] in [0,1]
  Tensor noisy;  // same shape, clamped to [0,1]
  Provenance provenance = Provenance::ExternalPair;
};

struct CorpusImage {
  std::string name;
  Tensor pixels;  // [C,H,W]
};

/// Loads every P5/P6 image in a directory, sorted lexicographically by
/// filename. Unreadable or malformed files raise an error naming the file.
std::vector<CorpusImage> load_corpus(const std::filesystem::path& dir);

/// Loads matched clean/ and noisy/ subdirectories into pairs.
std::vector<ImagePair> load_pair_corpus(const std::filesystem::path& dir);

enum class TrainPhase { DenoiserPretrain, TranslatorTrain };

/// Random crops with phase-appropriate corruption. Pretraining batches
/// alternate between source A (clean + Gaussian at pretrain_sigma) and
/// source B (synthetic real noise + the same Gaussian); translator batches
/// are synthetic-real noisy inputs further augmented by a uniformly drawn
/// Gaussian level in [aug_lo, aug_hi]. The target is always the clean crop.
std::vector<ImagePair> make_batch(Prng& rng, const TrainConfig& config,
                                  const std::vector<CorpusImage>& corpus, TrainPhase phase,
                                  std::int64_t batch_size);

// --- training ----------------------------------------------------------------

struct TrainLogEntry {
  std::int64_t iteration = 0;
  double lr = 0.0;
  LossBreakdown losses;
};

struct PretrainResult {
  Denoiser denoiser;
  std::vector<TrainLogEntry> log;
};

struct TranslateTrainResult {
  Translator translator;
  std::vector<TrainLogEntry> log;
};

using TrainLogger = std::function<void(const TrainLogEntry&)>;

/// Trains the Gaussian-specialised denoiser with L1 loss, AdamW and the
/// cosine schedule. Aborts with a diagnostic (iteration, lr, loss tail) if
/// the loss goes non-finite.
PretrainResult pretrain_denoiser(const TrainConfig& config, const std::vector<CorpusImage>& corpus,
                                 const TrainLogger& logger = {});

/// Trains the translator against a frozen denoiser. The denoiser parameters
/// are bit-identical before and after.
TranslateTrainResult train_translator(const TrainConfig& config, const Denoiser& frozen,
                                      const std::vector<CorpusImage>& corpus,
                                      const TrainLogger& logger = {});

// --- inference ----------------------------------------------------------------

struct PipelineTrace {
  bool input_augmented = false;  // inference never adds Gaussian noise
  bool injection_active = false;
};

struct DenoiseResult {
  Tensor translated;  // I_T, unclamped
  Tensor denoised;    // final output, clamped to [0,1]
  PipelineTrace trace;
};

/// Full pipeline: translate, then denoise with the frozen model. Inputs whose
/// extents are not divisible by 2^depth are reflect-padded and cropped back.
DenoiseResult denoise_pipeline(const Tensor& noisy, const Translator& translator,
                               const Denoiser& denoiser, Prng& rng);

/// Denoiser alone (no translation).
Tensor denoise_only(const Tensor& noisy, const Denoiser& denoiser);

/// Translator alone; returns the unclamped I_T (reflect-padded and cropped
/// back like the full pipeline).
Tensor translate_only(const Tensor& noisy, const Translator& translator, Prng& rng);

// --- model <-> checkpoint -----------------------------------------------------

Checkpoint denoiser_checkpoint(const Denoiser& model, const TrainConfig& config,
                               std::int64_t iteration);
Checkpoint translator_checkpoint(const Translator& model, const TrainConfig& config,
                                 std::int64_t iteration);
Denoiser denoiser_from_checkpoint(const Checkpoint& ckpt);
Translator translator_from_checkpoint(const Checkpoint& ckpt);

/// FNV-1a digest over the serialized parameter bytes, for frozen-weights
/// assertions.
std::uint64_t param_digest(const std::vector<ParamRef>& params);

// --- analysis ----------------------------------------------------------------

struct NoiseReport {
  double mu_hat = 0.0;
  double sigma_hat = 0.0;
  bool no_noise = false;
  double spatial_w1 = 0.0;
  double spatial_threshold = 0.0;  // 0.05 * sigma_hat
  double freq_w1 = 0.0;
  double freq_threshold = 0.0;  // 0.05 * rayleigh scale
  double rayleigh_scale = 0.0;
  double lag1_horizontal = 0.0;
  double lag1_vertical = 0.0;
  double signal_dependency_slope = 0.0;
  Histogram spatial_hist;
  Histogram freq_hist;

  nlohmann::json to_json() const;
};

/// Spatial/frequency Gaussianity metrics of the residual noisy - clean.
NoiseReport analyze_noise(const Tensor& noisy, const Tensor& clean, Prng& rng);

// --- evaluation ----------------------------------------------------------------

struct EvalImageMetrics {
  std::string name;
  double psnr_noisy = 0.0;
  double ssim_noisy = 0.0;
  double psnr_denoised = 0.0;
  double ssim_denoised = 0.0;
  std::optional<double> psnr_translated;
  std::optional<double> ssim_translated;
};

struct EvalSummary {
  std::vector<EvalImageMetrics> images;
  nlohmann::json to_json() const;  // per-image rows plus means
};

/// Evaluates the denoiser alone and, when a translator is given, the full
/// pipeline, over a paired test set. Images fan out across workers and are
/// merged in input order.
EvalSummary evaluate_pairs(const std::vector<ImagePair>& pairs,
                           const std::vector<std::string>& names, const Denoiser& denoiser,
                           const Translator* translator, Prng& rng, std::int64_t workers);

struct AblationRow {
  double level = 0.0;  // eight-bit units; -1 marks the translated row
  std::string label;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
};

struct AblationTable {
  std::vector<AblationRow> rows;
  nlohmann::json to_json() const;
};

/// Feeds noisy + N(0,(L/255)^2) to the denoiser alone for each level L, plus
/// one row for the translated pipeline when a translator is given.
AblationTable ablate_gaussian_addition(const std::vector<ImagePair>& pairs,
                                       const Denoiser& denoiser,
                                       const std::vector<double>& levels,
                                       const Translator* translator, Prng& rng,
                                       std::int64_t workers);

// --- misc ----------------------------------------------------------------------

/// Reflect-pads H and W up to multiples of `divisor` (no-op when divisible).
Tensor reflect_pad_to_multiple(const Tensor& image, std::int64_t divisor);

/// Runs fn(i) for i in [0, count) on `workers` threads; results must be
/// written to index i of a pre-sized buffer so merging stays input-ordered.
void parallel_for(std::int64_t count, std::int64_t workers,
                  const std::function<void(std::int64_t)>& fn);

}  // namespace noisetrans
