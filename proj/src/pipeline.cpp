#include "noisetrans/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "noisetrans/image_io.hpp"
#include "noisetrans/metrics.hpp"
#include "noisetrans/spectral.hpp"
#include "noisetrans/synthdata.hpp"

namespace noisetrans {

namespace {

Tensor wrap4(const Tensor& chw) {
  return Tensor({1, chw.dim(0), chw.dim(1), chw.dim(2)},
                std::vector<double>(chw.data().begin(), chw.data().end()));
}

Tensor squeeze4(const Tensor& nchw) {
  return Tensor({nchw.dim(1), nchw.dim(2), nchw.dim(3)},
                std::vector<double>(nchw.data().begin(), nchw.data().end()));
}

nlohmann::json json_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return v;
}

}  // namespace

const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::SyntheticGaussian: return "synthetic-gaussian";
    case Provenance::SyntheticCorrelated: return "synthetic-correlated";
    case Provenance::SyntheticSignalDependent: return "synthetic-signal-dependent";
    case Provenance::ExternalPair: return "external-pair";
  }
  return "unknown";
}

std::vector<CorpusImage> load_corpus(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw std::runtime_error("corpus '" + dir.string() + "' is not a directory");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".pgm" || ext == ".ppm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.filename() < b.filename(); });
  std::vector<CorpusImage> corpus;
  corpus.reserve(files.size());
  for (const auto& f : files) {
    corpus.push_back({f.filename().string(), load_image(f)});
  }
  if (corpus.empty()) {
    throw std::runtime_error("corpus '" + dir.string() + "' contains no PGM/PPM images");
  }
  return corpus;
}

std::vector<ImagePair> load_pair_corpus(const std::filesystem::path& dir) {
  auto clean = load_corpus(dir / "clean");
  auto noisy = load_corpus(dir / "noisy");
  if (clean.size() != noisy.size()) {
    throw std::runtime_error("pair corpus '" + dir.string() + "': clean has " +
                             std::to_string(clean.size()) + " images, noisy has " +
                             std::to_string(noisy.size()));
  }
  std::vector<ImagePair> pairs;
  pairs.reserve(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (clean[i].name != noisy[i].name) {
      throw std::runtime_error("pair corpus: name mismatch '" + clean[i].name + "' vs '" +
                               noisy[i].name + "'");
    }
    if (!clean[i].pixels.same_shape(noisy[i].pixels)) {
      throw std::runtime_error("pair corpus: shape mismatch for '" + clean[i].name + "'");
    }
    pairs.push_back({clean[i].pixels, noisy[i].pixels, Provenance::ExternalPair});
  }
  return pairs;
}

namespace {

Tensor crop(const Tensor& img, std::int64_t y0, std::int64_t x0, std::int64_t size) {
  const std::int64_t C = img.dim(0), H = img.dim(1), W = img.dim(2);
  Tensor out({C, size, size});
  for (std::int64_t c = 0; c < C; ++c) {
    for (std::int64_t y = 0; y < size; ++y) {
      const double* src = img.raw() + (c * H + y0 + y) * W + x0;
      double* dst = out.raw() + (c * size + y) * size;
      std::copy(src, src + size, dst);
    }
  }
  return out;
}

Tensor add_gaussian_clamped(const Tensor& img, Prng& rng, double sigma) {
  Tensor out = img;
  if (sigma > 0.0) {
    for (auto& v : out.data()) v = std::clamp(v + rng.normal(0.0, sigma), 0.0, 1.0);
  }
  return out;
}

}  // namespace

std::vector<ImagePair> make_batch(Prng& rng, const TrainConfig& config,
                                  const std::vector<CorpusImage>& corpus, TrainPhase phase,
                                  std::int64_t batch_size) {
  if (corpus.empty()) throw std::invalid_argument("make_batch: empty corpus");
  std::vector<ImagePair> batch;
  batch.reserve(static_cast<std::size_t>(batch_size));
  for (std::int64_t i = 0; i < batch_size; ++i) {
    const auto& img = corpus[static_cast<std::size_t>(rng.next_u64() % corpus.size())];
    const std::int64_t H = img.pixels.dim(1), W = img.pixels.dim(2);
    if (config.crop > H || config.crop > W) {
      throw std::invalid_argument("make_batch: crop " + std::to_string(config.crop) +
                                  " exceeds image '" + img.name + "' (" + std::to_string(H) + "x" +
                                  std::to_string(W) + ")");
    }
    const std::int64_t y0 = static_cast<std::int64_t>(rng.next_u64() % static_cast<std::uint64_t>(H - config.crop + 1));
    const std::int64_t x0 = static_cast<std::int64_t>(rng.next_u64() % static_cast<std::uint64_t>(W - config.crop + 1));
    const Tensor clean = crop(img.pixels, y0, x0, config.crop);

    ImagePair pair;
    pair.clean = clean;
    if (phase == TrainPhase::DenoiserPretrain) {
      const double sigma = config.pretrain_sigma / 255.0;
      if (i % 2 == 0) {
        // Source A: clean corrupted by Gaussian noise alone.
        pair.noisy = add_gaussian_clamped(clean, rng, sigma);
        pair.provenance = Provenance::SyntheticGaussian;
      } else {
        // Source B: synthetic-real noisy pair, further corrupted by the same
        // Gaussian level.
        const RealNoiseDraw real = synth_real_noise(rng, clean, config.real_noise);
        pair.noisy = add_gaussian_clamped(apply_noise(clean, real.field), rng, sigma);
        pair.provenance = real.correlated ? Provenance::SyntheticCorrelated
                                          : Provenance::SyntheticSignalDependent;
      }
    } else {
      const RealNoiseDraw real = synth_real_noise(rng, clean, config.real_noise);
      const double level = rng.uniform(config.aug_lo, config.aug_hi) / 255.0;
      pair.noisy = add_gaussian_clamped(apply_noise(clean, real.field), rng, level);
      pair.provenance = real.correlated ? Provenance::SyntheticCorrelated
                                        : Provenance::SyntheticSignalDependent;
    }
    batch.push_back(std::move(pair));
  }
  return batch;
}

void parallel_for(std::int64_t count, std::int64_t workers,
                  const std::function<void(std::int64_t)>& fn) {
  workers = std::max<std::int64_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::int64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (std::int64_t t = 0; t < workers; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::int64_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

namespace {

struct SampleGrads {
  std::vector<Tensor> grads;  // aligned with the model parameter order
  LossBreakdown losses;
};

std::vector<Tensor> extract_grads(const Gradients& grads, const std::vector<Var>& bound) {
  std::vector<Tensor> out;
  out.reserve(bound.size());
  for (const Var& v : bound) out.push_back(grads.at(v));
  return out;
}

// Mean of per-sample gradients, accumulated in sample order.
std::vector<Tensor> mean_grads(std::vector<SampleGrads>& samples) {
  const auto count = static_cast<double>(samples.size());
  std::vector<Tensor> total = std::move(samples[0].grads);
  for (std::size_t s = 1; s < samples.size(); ++s) {
    for (std::size_t p = 0; p < total.size(); ++p) {
      const Tensor& g = samples[s].grads[p];
      for (std::int64_t i = 0; i < total[p].numel(); ++i) total[p][i] += g[i];
    }
  }
  for (auto& t : total) {
    for (auto& v : t.data()) v /= count;
  }
  return total;
}

[[noreturn]] void abort_non_finite(const char* phase, std::int64_t iteration, double lr,
                                   const std::vector<TrainLogEntry>& log,
                                   const std::string& component) {
  std::ostringstream os;
  os.precision(17);
  os << phase << ": non-finite loss at iteration " << iteration << " (lr " << lr << ", component "
     << component << "); loss tail:";
  const std::size_t tail = std::min<std::size_t>(5, log.size());
  for (std::size_t i = log.size() - tail; i < log.size(); ++i) {
    os << " " << log[i].losses.total;
  }
  throw std::runtime_error(os.str());
}

}  // namespace

PretrainResult pretrain_denoiser(const TrainConfig& config,
                                 const std::vector<CorpusImage>& corpus,
                                 const TrainLogger& logger) {
  config.validate();
  Prng master(config.seed);
  Prng init_rng = master.split("denoiser-init");
  Prng batch_rng = master.split("denoiser-batches");

  PretrainResult result{
      Denoiser({config.channels, config.denoiser_width, config.denoiser_layers}), {}};
  result.denoiser.init(init_rng);
  AdamW opt(result.denoiser.params());
  const std::int64_t workers = config.worker_count();

  for (std::int64_t it = 0; it < config.denoiser_iters; ++it) {
    const double lr =
        cosine_lr(it, config.denoiser_iters, config.denoiser_lr_init, config.denoiser_lr_final);
    const auto batch = make_batch(batch_rng, config, corpus, TrainPhase::DenoiserPretrain,
                                  config.batch);
    std::vector<SampleGrads> samples(batch.size());
    parallel_for(static_cast<std::int64_t>(batch.size()), workers, [&](std::int64_t i) {
      const auto& pair = batch[static_cast<std::size_t>(i)];
      Graph g;
      Var x = g.leaf(wrap4(pair.noisy), false);
      Var target = g.leaf(wrap4(pair.clean), false);
      std::vector<Var> bound;
      Var out = result.denoiser.forward(g, x, true, &bound);
      Var loss = l1_mean(out, target);
      auto grads = g.backward(loss);
      samples[static_cast<std::size_t>(i)] = {extract_grads(grads, bound),
                                              make_breakdown(loss.value().item(), 0, 0, 0, 0)};
    });
    double mean_loss = 0.0;
    for (const auto& s : samples) mean_loss += s.losses.total;
    mean_loss /= static_cast<double>(samples.size());
    if (!std::isfinite(mean_loss)) {
      abort_non_finite("pretrain_denoiser", it, lr, result.log, "l1");
    }
    opt.step(mean_grads(samples), lr);

    TrainLogEntry entry{it, lr, make_breakdown(mean_loss, 0, 0, 0, 0)};
    result.log.push_back(entry);
    if (logger) logger(entry);
  }
  return result;
}

TranslateTrainResult train_translator(const TrainConfig& config, const Denoiser& frozen,
                                      const std::vector<CorpusImage>& corpus,
                                      const TrainLogger& logger) {
  config.validate();
  if (frozen.config().channels != config.channels) {
    throw std::invalid_argument("train_translator: denoiser expects " +
                                std::to_string(frozen.config().channels) + " channels, config has " +
                                std::to_string(config.channels));
  }
  Prng master(config.seed);
  Prng init_rng = master.split("translator-init");
  Prng batch_rng = master.split("translator-batches");
  const Prng injection_base = master.split("translator-injection");
  const Prng reference_base = master.split("gaussian-reference");

  TranslateTrainResult result{
      Translator({config.channels, config.translator_width, config.translator_depth,
                  config.sigma_tilde}),
      {}};
  result.translator.init(init_rng);
  AdamW opt(result.translator.params());
  const std::int64_t workers = config.worker_count();

  for (std::int64_t it = 0; it < config.translator_iters; ++it) {
    const double lr = cosine_lr(it, config.translator_iters, config.translator_lr_init,
                                config.translator_lr_final);
    const auto batch =
        make_batch(batch_rng, config, corpus, TrainPhase::TranslatorTrain, config.translator_batch);
    std::vector<SampleGrads> samples(batch.size());
    parallel_for(static_cast<std::int64_t>(batch.size()), workers, [&](std::int64_t i) {
      const auto& pair = batch[static_cast<std::size_t>(i)];
      const std::uint64_t sample_id =
          static_cast<std::uint64_t>(it) * static_cast<std::uint64_t>(config.translator_batch) +
          static_cast<std::uint64_t>(i);
      Prng inj = injection_base.split(sample_id);
      Prng ref_rng = reference_base.split(sample_id);

      Graph g;
      Var x = g.leaf(wrap4(pair.noisy), false);
      Var target = g.leaf(wrap4(pair.clean), false);
      std::vector<Var> bound;
      Var translated = result.translator.forward(g, x, &inj, true, &bound);
      Var noise = sub(translated, target);

      const NoiseField noise_field = NoiseField::from_tensor(noise.value());
      const NoiseField reference = gaussian_reference(ref_rng, noise_field);
      Var spatial = loss_spatial(noise, reference);
      Var freq = loss_freq(noise, reference);

      Var denoised = frozen.forward(g, translated, false);
      Var implicit = loss_implicit(denoised, target);
      Var explicit_term = loss_explicit(spatial, freq, config.beta);
      Var total = loss_total(implicit, explicit_term, config.alpha);

      auto grads = g.backward(total);
      samples[static_cast<std::size_t>(i)] = {
          extract_grads(grads, bound),
          make_breakdown(implicit.value().item(), spatial.value().item(), freq.value().item(),
                         config.alpha, config.beta)};
    });

    double mean_imp = 0.0, mean_spat = 0.0, mean_freq = 0.0;
    for (const auto& s : samples) {
      mean_imp += s.losses.implicit;
      mean_spat += s.losses.spatial;
      mean_freq += s.losses.freq;
    }
    const auto count = static_cast<double>(samples.size());
    const LossBreakdown breakdown =
        make_breakdown(mean_imp / count, mean_spat / count, mean_freq / count, config.alpha,
                       config.beta);
    if (!std::isfinite(breakdown.total)) {
      const std::string component = !std::isfinite(breakdown.implicit) ? "l_implicit"
                                    : !std::isfinite(breakdown.spatial) ? "l_spatial"
                                    : !std::isfinite(breakdown.freq)    ? "l_freq"
                                                                        : "l_total";
      abort_non_finite("train_translator", it, lr, result.log, component);
    }
    opt.step(mean_grads(samples), lr);

    TrainLogEntry entry{it, lr, breakdown};
    result.log.push_back(entry);
    if (logger) logger(entry);
  }
  return result;
}

Tensor reflect_pad_to_multiple(const Tensor& image, std::int64_t divisor) {
  const std::int64_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
  const std::int64_t Hp = (H + divisor - 1) / divisor * divisor;
  const std::int64_t Wp = (W + divisor - 1) / divisor * divisor;
  if (Hp == H && Wp == W) return image;
  if (Hp - H >= H || Wp - W >= W) {
    throw std::invalid_argument("reflect_pad_to_multiple: image " + shape_to_string(image.shape()) +
                                " too small to pad to a multiple of " + std::to_string(divisor));
  }
  Tensor out({C, Hp, Wp});
  for (std::int64_t c = 0; c < C; ++c) {
    for (std::int64_t y = 0; y < Hp; ++y) {
      const std::int64_t sy = y < H ? y : 2 * H - 2 - y;
      for (std::int64_t x = 0; x < Wp; ++x) {
        const std::int64_t sx = x < W ? x : 2 * W - 2 - x;
        out[(c * Hp + y) * Wp + x] = image[(c * H + sy) * W + sx];
      }
    }
  }
  return out;
}

namespace {

Tensor crop_back(const Tensor& padded, std::int64_t H, std::int64_t W) {
  const std::int64_t C = padded.dim(0);
  if (padded.dim(1) == H && padded.dim(2) == W) return padded;
  Tensor out({C, H, W});
  for (std::int64_t c = 0; c < C; ++c) {
    for (std::int64_t y = 0; y < H; ++y) {
      const double* src = padded.raw() + (c * padded.dim(1) + y) * padded.dim(2);
      std::copy(src, src + W, out.raw() + (c * H + y) * W);
    }
  }
  return out;
}

}  // namespace

DenoiseResult denoise_pipeline(const Tensor& noisy, const Translator& translator,
                               const Denoiser& denoiser, Prng& rng) {
  if (noisy.dim(0) != denoiser.config().channels) {
    throw std::invalid_argument("denoise_pipeline: image has " + std::to_string(noisy.dim(0)) +
                                " channels, checkpointed models expect " +
                                std::to_string(denoiser.config().channels));
  }
  const std::int64_t H = noisy.dim(1), W = noisy.dim(2);
  const std::int64_t divisor = std::int64_t{1} << translator.config().depth;
  const Tensor padded = reflect_pad_to_multiple(noisy, divisor);

  // The noisy input goes straight to the translator; only the per-block
  // injection inside the network adds Gaussian noise at inference.
  Graph g;
  Var x = g.leaf(wrap4(padded), false);
  Var translated = translator.forward(g, x, &rng, false);
  Var denoised = denoiser.forward(g, translated, false);

  DenoiseResult result;
  result.translated = crop_back(squeeze4(translated.value()), H, W);
  result.denoised = clamp01(crop_back(squeeze4(denoised.value()), H, W));
  result.trace.input_augmented = false;
  result.trace.injection_active = translator.config().sigma_tilde > 0.0;
  return result;
}

Tensor denoise_only(const Tensor& noisy, const Denoiser& denoiser) {
  Graph g;
  Var x = g.leaf(wrap4(noisy), false);
  Var out = denoiser.forward(g, x, false);
  return clamp01(squeeze4(out.value()));
}

Tensor translate_only(const Tensor& noisy, const Translator& translator, Prng& rng) {
  const std::int64_t H = noisy.dim(1), W = noisy.dim(2);
  const std::int64_t divisor = std::int64_t{1} << translator.config().depth;
  const Tensor padded = reflect_pad_to_multiple(noisy, divisor);
  Graph g;
  Var x = g.leaf(wrap4(padded), false);
  Var translated = translator.forward(g, x, &rng, false);
  return crop_back(squeeze4(translated.value()), H, W);
}

Checkpoint denoiser_checkpoint(const Denoiser& model, const TrainConfig& config,
                               std::int64_t iteration) {
  nlohmann::json meta = {{"arch",
                          {{"channels", model.config().channels},
                           {"width", model.config().width},
                           {"middle_layers", model.config().middle_layers}}},
                         {"train_config", config},
                         {"iteration", iteration}};
  std::vector<std::pair<std::string, const Tensor*>> tensors;
  for (const auto& p : model.params()) tensors.emplace_back(p.name, p.tensor);
  return make_checkpoint("denoiser", std::move(meta), tensors);
}

Checkpoint translator_checkpoint(const Translator& model, const TrainConfig& config,
                                 std::int64_t iteration) {
  nlohmann::json meta = {{"arch",
                          {{"channels", model.config().channels},
                           {"base_width", model.config().base_width},
                           {"depth", model.config().depth},
                           {"sigma_tilde", model.config().sigma_tilde}}},
                         {"train_config", config},
                         {"iteration", iteration}};
  std::vector<std::pair<std::string, const Tensor*>> tensors;
  for (const auto& p : model.params()) tensors.emplace_back(p.name, p.tensor);
  return make_checkpoint("translator", std::move(meta), tensors);
}

namespace {

void require_kind(const Checkpoint& ckpt, const char* kind) {
  if (ckpt.manifest.value("kind", "") != kind) {
    throw std::runtime_error(std::string("checkpoint kind '") +
                             ckpt.manifest.value("kind", "<none>") + "' does not match " + kind);
  }
}

void load_params(const Checkpoint& ckpt, std::vector<ParamRef> params, const char* kind) {
  require_kind(ckpt, kind);
  for (auto& p : params) {
    const Tensor& stored = ckpt.tensor(p.name);
    if (!stored.same_shape(*p.tensor)) {
      throw std::runtime_error("checkpoint tensor '" + p.name + "' has shape " +
                               shape_to_string(stored.shape()) + ", model expects " +
                               shape_to_string(p.tensor->shape()));
    }
    *p.tensor = stored;
  }
}

}  // namespace

Denoiser denoiser_from_checkpoint(const Checkpoint& ckpt) {
  require_kind(ckpt, "denoiser");
  const auto& arch = ckpt.manifest.at("meta").at("arch");
  Denoiser model({arch.at("channels").get<std::int64_t>(), arch.at("width").get<std::int64_t>(),
                  arch.at("middle_layers").get<std::int64_t>()});
  load_params(ckpt, model.params(), "denoiser");
  return model;
}

Translator translator_from_checkpoint(const Checkpoint& ckpt) {
  require_kind(ckpt, "translator");
  const auto& arch = ckpt.manifest.at("meta").at("arch");
  Translator model({arch.at("channels").get<std::int64_t>(),
                    arch.at("base_width").get<std::int64_t>(), arch.at("depth").get<std::int64_t>(),
                    arch.at("sigma_tilde").get<double>()});
  load_params(ckpt, model.params(), "translator");
  return model;
}

std::uint64_t param_digest(const std::vector<ParamRef>& params) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  auto mix = [&h](const unsigned char* bytes, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001B3ULL;
    }
  };
  for (const auto& p : params) {
    for (double v : p.tensor->data()) {
      mix(reinterpret_cast<const unsigned char*>(&v), sizeof(double));
    }
  }
  return h;
}

NoiseReport analyze_noise(const Tensor& noisy, const Tensor& clean, Prng& rng) {
  if (!noisy.same_shape(clean)) {
    throw std::invalid_argument("analyze_noise: shape mismatch " +
                                shape_to_string(noisy.shape()) + " vs " +
                                shape_to_string(clean.shape()));
  }
  const std::int64_t C = noisy.dim(0), H = noisy.dim(1), W = noisy.dim(2);
  std::vector<double> residual(static_cast<std::size_t>(noisy.numel()));
  for (std::int64_t i = 0; i < noisy.numel(); ++i) residual[static_cast<std::size_t>(i)] = noisy[i] - clean[i];
  const NoiseField noise(H, W, C, std::move(residual));

  NoiseReport report;
  report.mu_hat = noise.mu_hat;
  report.sigma_hat = noise.sigma_hat;
  report.no_noise = noise.sigma_hat == 0.0;
  report.rayleigh_scale = spectral::gaussian_spectrum_scale(noise.sigma_hat, H, W);
  report.spatial_threshold = 0.05 * noise.sigma_hat;
  report.freq_threshold = 0.05 * report.rayleigh_scale;

  const double hist_span = std::max(4.0 * noise.sigma_hat, 1e-3);
  report.spatial_hist = histogram(noise.values, 64, noise.mu_hat - hist_span, noise.mu_hat + hist_span);

  if (!report.no_noise) {
    const NoiseField gauss_ref = sample_gaussian(rng, H, W, C, noise.mu_hat, noise.sigma_hat);
    report.spatial_w1 = w1_sorted(noise, gauss_ref);

    const auto spec = spectral::dft2_channelwise(noise);
    const auto mags = spectral::magnitude(spec, true);
    std::vector<SampleVector> observed, reference;
    std::vector<double> pooled;
    for (const auto& ch : mags.per_channel) {
      observed.emplace_back(ch);
      reference.emplace_back(
          sample_rayleigh(rng, static_cast<std::int64_t>(ch.size()), report.rayleigh_scale));
      pooled.insert(pooled.end(), ch.begin(), ch.end());
    }
    report.freq_w1 = w1_sorted(observed, reference);
    report.freq_hist = histogram(pooled, 64, 0.0, 5.0 * report.rayleigh_scale);
  } else {
    report.freq_hist = histogram(std::vector<double>{}, 64, 0.0, 1.0);
  }

  // Lag-1 autocorrelation, channel means removed, interior sums pooled.
  double num_h = 0.0, num_v = 0.0, den = 0.0;
  const std::int64_t plane = H * W;
  for (std::int64_t c = 0; c < C; ++c) {
    const double* p = noise.values.data() + c * plane;
    double mean = 0.0;
    for (std::int64_t i = 0; i < plane; ++i) mean += p[i];
    mean /= static_cast<double>(plane);
    for (std::int64_t y = 0; y < H; ++y) {
      for (std::int64_t x = 0; x < W; ++x) {
        const double v = p[y * W + x] - mean;
        den += v * v;
        if (x + 1 < W) num_h += v * (p[y * W + x + 1] - mean);
        if (y + 1 < H) num_v += v * (p[(y + 1) * W + x] - mean);
      }
    }
  }
  report.lag1_horizontal = den > 0.0 ? num_h / den : 0.0;
  report.lag1_vertical = den > 0.0 ? num_v / den : 0.0;

  // Regression of local noise variance on local clean intensity over 8x8
  // blocks, pooled across channels.
  const std::int64_t block = 8;
  std::vector<double> xs, ys;
  for (std::int64_t c = 0; c < C; ++c) {
    for (std::int64_t by = 0; by + block <= H; by += block) {
      for (std::int64_t bx = 0; bx + block <= W; bx += block) {
        double mean_clean = 0.0, mean_noise = 0.0;
        for (std::int64_t y = 0; y < block; ++y) {
          for (std::int64_t x = 0; x < block; ++x) {
            mean_clean += clean[(c * H + by + y) * W + bx + x];
            mean_noise += noise.at(c, by + y, bx + x);
          }
        }
        const double inv = 1.0 / static_cast<double>(block * block);
        mean_clean *= inv;
        mean_noise *= inv;
        double var = 0.0;
        for (std::int64_t y = 0; y < block; ++y) {
          for (std::int64_t x = 0; x < block; ++x) {
            const double d = noise.at(c, by + y, bx + x) - mean_noise;
            var += d * d;
          }
        }
        xs.push_back(mean_clean);
        ys.push_back(var * inv);
      }
    }
  }
  if (xs.size() >= 2) {
    const double n = static_cast<double>(xs.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sx += xs[i];
      sy += ys[i];
      sxx += xs[i] * xs[i];
      sxy += xs[i] * ys[i];
    }
    const double denom = n * sxx - sx * sx;
    report.signal_dependency_slope = denom != 0.0 ? (n * sxy - sx * sy) / denom : 0.0;
  }
  return report;
}

nlohmann::json NoiseReport::to_json() const {
  return {{"mu_hat", json_number(mu_hat)},
          {"sigma_hat", json_number(sigma_hat)},
          {"no_noise", no_noise},
          {"spatial_w1", json_number(spatial_w1)},
          {"spatial_threshold", json_number(spatial_threshold)},
          {"freq_w1", json_number(freq_w1)},
          {"freq_threshold", json_number(freq_threshold)},
          {"rayleigh_scale", json_number(rayleigh_scale)},
          {"lag1_horizontal", json_number(lag1_horizontal)},
          {"lag1_vertical", json_number(lag1_vertical)},
          {"signal_dependency_slope", json_number(signal_dependency_slope)}};
}

EvalSummary evaluate_pairs(const std::vector<ImagePair>& pairs,
                           const std::vector<std::string>& names, const Denoiser& denoiser,
                           const Translator* translator, Prng& rng, std::int64_t workers) {
  EvalSummary summary;
  summary.images.resize(pairs.size());
  const Prng base = rng.split("eval-images");
  parallel_for(static_cast<std::int64_t>(pairs.size()), workers, [&](std::int64_t i) {
    const auto& pair = pairs[static_cast<std::size_t>(i)];
    EvalImageMetrics m;
    m.name = i < static_cast<std::int64_t>(names.size()) ? names[static_cast<std::size_t>(i)]
                                                         : "image_" + std::to_string(i);
    m.psnr_noisy = psnr(pair.noisy, pair.clean);
    m.ssim_noisy = ssim(pair.noisy, pair.clean);
    const Tensor denoised = denoise_only(pair.noisy, denoiser);
    m.psnr_denoised = psnr(denoised, pair.clean);
    m.ssim_denoised = ssim(denoised, pair.clean);
    if (translator != nullptr) {
      Prng img_rng = base.split(static_cast<std::uint64_t>(i));
      const auto out = denoise_pipeline(pair.noisy, *translator, denoiser, img_rng);
      m.psnr_translated = psnr(out.denoised, pair.clean);
      m.ssim_translated = ssim(out.denoised, pair.clean);
    }
    summary.images[static_cast<std::size_t>(i)] = std::move(m);
  });
  return summary;
}

nlohmann::json EvalSummary::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  double p_noisy = 0.0, s_noisy = 0.0, p_den = 0.0, s_den = 0.0, p_tr = 0.0, s_tr = 0.0;
  std::int64_t translated_count = 0;
  for (const auto& m : images) {
    nlohmann::json row = {{"name", m.name},
                          {"psnr_noisy", json_number(m.psnr_noisy)},
                          {"ssim_noisy", json_number(m.ssim_noisy)},
                          {"psnr_denoised", json_number(m.psnr_denoised)},
                          {"ssim_denoised", json_number(m.ssim_denoised)}};
    if (m.psnr_translated) {
      row["psnr_translated"] = json_number(*m.psnr_translated);
      row["ssim_translated"] = json_number(*m.ssim_translated);
      p_tr += *m.psnr_translated;
      s_tr += *m.ssim_translated;
      ++translated_count;
    }
    rows.push_back(std::move(row));
    p_noisy += m.psnr_noisy;
    s_noisy += m.ssim_noisy;
    p_den += m.psnr_denoised;
    s_den += m.ssim_denoised;
  }
  const double n = images.empty() ? 1.0 : static_cast<double>(images.size());
  nlohmann::json mean = {{"psnr_noisy", json_number(p_noisy / n)},
                         {"ssim_noisy", json_number(s_noisy / n)},
                         {"psnr_denoised", json_number(p_den / n)},
                         {"ssim_denoised", json_number(s_den / n)}};
  if (translated_count > 0) {
    mean["psnr_translated"] = json_number(p_tr / static_cast<double>(translated_count));
    mean["ssim_translated"] = json_number(s_tr / static_cast<double>(translated_count));
  }
  return {{"images", std::move(rows)}, {"mean", std::move(mean)}};
}

AblationTable ablate_gaussian_addition(const std::vector<ImagePair>& pairs,
                                       const Denoiser& denoiser,
                                       const std::vector<double>& levels,
                                       const Translator* translator, Prng& rng,
                                       std::int64_t workers) {
  AblationTable table;
  const Prng base = rng.split("ablation");
  for (std::size_t li = 0; li < levels.size(); ++li) {
    const double level = levels[li];
    std::vector<double> psnrs(pairs.size());
    std::vector<double> ssims(pairs.size());
    parallel_for(static_cast<std::int64_t>(pairs.size()), workers, [&](std::int64_t i) {
      const auto& pair = pairs[static_cast<std::size_t>(i)];
      Prng img_rng = base.split(static_cast<std::uint64_t>(li * 1000003 + static_cast<std::size_t>(i)));
      const Tensor augmented = add_gaussian_clamped(pair.noisy, img_rng, level / 255.0);
      const Tensor denoised = denoise_only(augmented, denoiser);
      psnrs[static_cast<std::size_t>(i)] = psnr(denoised, pair.clean);
      ssims[static_cast<std::size_t>(i)] = ssim(denoised, pair.clean);
    });
    AblationRow row;
    row.level = level;
    row.label = "gaussian+" + std::to_string(static_cast<int>(level));
    row.mean_psnr = std::accumulate(psnrs.begin(), psnrs.end(), 0.0) / static_cast<double>(pairs.size());
    row.mean_ssim = std::accumulate(ssims.begin(), ssims.end(), 0.0) / static_cast<double>(pairs.size());
    table.rows.push_back(std::move(row));
  }
  if (translator != nullptr) {
    std::vector<double> psnrs(pairs.size());
    std::vector<double> ssims(pairs.size());
    const Prng tr_base = base.split("translated");
    parallel_for(static_cast<std::int64_t>(pairs.size()), workers, [&](std::int64_t i) {
      const auto& pair = pairs[static_cast<std::size_t>(i)];
      Prng img_rng = tr_base.split(static_cast<std::uint64_t>(i));
      const auto out = denoise_pipeline(pair.noisy, *translator, denoiser, img_rng);
      psnrs[static_cast<std::size_t>(i)] = psnr(out.denoised, pair.clean);
      ssims[static_cast<std::size_t>(i)] = ssim(out.denoised, pair.clean);
    });
    AblationRow row;
    row.level = -1.0;
    row.label = "translated";
    row.mean_psnr = std::accumulate(psnrs.begin(), psnrs.end(), 0.0) / static_cast<double>(pairs.size());
    row.mean_ssim = std::accumulate(ssims.begin(), ssims.end(), 0.0) / static_cast<double>(pairs.size());
    table.rows.push_back(std::move(row));
  }
  return table;
}

nlohmann::json AblationTable::to_json() const {
  nlohmann::json out_rows = nlohmann::json::array();
  for (const auto& r : rows) {
    out_rows.push_back({{"label", r.label},
                        {"level", r.level},
                        {"mean_psnr", json_number(r.mean_psnr)},
                        {"mean_ssim", json_number(r.mean_ssim)}});
  }
  return {{"rows", std::move(out_rows)}};
}

}  // namespace noisetrans
