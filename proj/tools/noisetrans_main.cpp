// Command-line surface for the noise-translation denoising toolkit.
//
// Subcommands: synth, pretrain, train-translator, denoise, eval, analyze,
// ablate-addition. Errors exit non-zero with a JSON object on stderr.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "noisetrans/checkpoint.hpp"
#include "noisetrans/config.hpp"
#include "noisetrans/image_io.hpp"
#include "noisetrans/metrics.hpp"
#include "noisetrans/pipeline.hpp"
#include "noisetrans/synthdata.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace noisetrans;

namespace {

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
};

void add_config_overrides(CLI::App* cmd, TrainConfig& cfg) {
  cmd->add_option("--crop", cfg.crop, "training crop size");
  cmd->add_option("--batch", cfg.batch, "denoiser pretraining batch size");
  cmd->add_option("--translator-batch", cfg.translator_batch, "translator batch size");
  cmd->add_option("--denoiser-iters", cfg.denoiser_iters, "denoiser training iterations");
  cmd->add_option("--translator-iters", cfg.translator_iters, "translator training iterations");
  cmd->add_option("--denoiser-lr-init", cfg.denoiser_lr_init, "denoiser initial learning rate");
  cmd->add_option("--denoiser-lr-final", cfg.denoiser_lr_final, "denoiser final learning rate");
  cmd->add_option("--translator-lr-init", cfg.translator_lr_init, "translator initial learning rate");
  cmd->add_option("--translator-lr-final", cfg.translator_lr_final, "translator final learning rate");
  cmd->add_option("--pretrain-sigma", cfg.pretrain_sigma, "pretraining noise level (8-bit units)");
  cmd->add_option("--aug-lo", cfg.aug_lo, "augmentation range lower bound (8-bit units)");
  cmd->add_option("--aug-hi", cfg.aug_hi, "augmentation range upper bound (8-bit units)");
  cmd->add_option("--sigma-tilde", cfg.sigma_tilde, "injection level (8-bit units)");
  cmd->add_option("--alpha", cfg.alpha, "explicit loss weight");
  cmd->add_option("--beta", cfg.beta, "frequency loss weight");
  cmd->add_option("--denoiser-width", cfg.denoiser_width, "denoiser channel width");
  cmd->add_option("--denoiser-layers", cfg.denoiser_layers, "denoiser middle layer count");
  cmd->add_option("--translator-width", cfg.translator_width, "translator base width");
  cmd->add_option("--translator-depth", cfg.translator_depth, "translator downsample count");
  cmd->add_option("--channels", cfg.channels, "image channel count (1 or 3)");
  cmd->add_option("--threads", cfg.threads, "worker threads (0 = all cores)");
  cmd->add_option("--corr-sigma-lo", cfg.real_noise.corr_sigma_lo,
                  "correlated family: lowest level (8-bit units)");
  cmd->add_option("--corr-sigma-hi", cfg.real_noise.corr_sigma_hi,
                  "correlated family: highest level (8-bit units)");
  cmd->add_option("--sd-a", cfg.real_noise.sd_a, "signal-dependent family: intensity coefficient");
  cmd->add_option("--sd-b", cfg.real_noise.sd_b, "signal-dependent family: variance floor");
}

TrainConfig resolve_config(const CommonOpts& common, const TrainConfig& overridden) {
  TrainConfig cfg = overridden;
  if (common.seed) cfg.seed = *common.seed;
  cfg.validate();
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::ofstream open_log(const fs::path& dir, const std::string& name) {
  fs::create_directories(dir);
  std::ofstream log(dir / name, std::ios::binary);
  if (!log) throw std::runtime_error("cannot write '" + (dir / name).string() + "'");
  return log;
}

int run(int argc, char** argv) {
  CLI::App app{"noise-translation denoising toolkit"};
  app.require_subcommand(1);

  CommonOpts common;
  TrainConfig cfg;
  app.add_option("--config", common.config_path, "JSON config file");
  app.add_option("--seed", common.seed, "master seed override");
  app.add_option("--out", common.out_dir, "output directory");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic image corpus");
  std::int64_t synth_count = 16;
  std::int64_t synth_size = 128;
  bool synth_pairs = false;
  synth->add_option("--count", synth_count, "number of images");
  synth->add_option("--size", synth_size, "image side length");
  synth->add_flag("--pairs", synth_pairs, "also emit noisy counterparts (clean/ + noisy/)");
  add_config_overrides(synth, cfg);

  // pretrain
  auto* pretrain = app.add_subcommand("pretrain", "train the Gaussian denoiser");
  std::string corpus_dir;
  pretrain->add_option("--corpus", corpus_dir, "directory of clean PGM/PPM images")->required();
  add_config_overrides(pretrain, cfg);

  // train-translator
  auto* traint = app.add_subcommand("train-translator", "train the noise translator");
  std::string denoiser_path;
  traint->add_option("--corpus", corpus_dir, "directory of clean PGM/PPM images")->required();
  traint->add_option("--denoiser", denoiser_path, "frozen denoiser checkpoint")->required();
  add_config_overrides(traint, cfg);

  // denoise
  auto* denoise = app.add_subcommand("denoise", "run the full pipeline on one image");
  std::string input_path, translator_path;
  denoise->add_option("--input", input_path, "noisy image (PGM/PPM)")->required();
  denoise->add_option("--denoiser", denoiser_path, "denoiser checkpoint")->required();
  denoise->add_option("--translator", translator_path, "translator checkpoint");
  add_config_overrides(denoise, cfg);

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate on a paired test set");
  std::string pairs_dir;
  eval->add_option("--pairs", pairs_dir, "directory with clean/ and noisy/ subdirectories")
      ->required();
  eval->add_option("--denoiser", denoiser_path, "denoiser checkpoint")->required();
  eval->add_option("--translator", translator_path, "translator checkpoint");
  add_config_overrides(eval, cfg);

  // analyze
  auto* analyze = app.add_subcommand("analyze", "noise Gaussianity report for one pair");
  std::string clean_path;
  analyze->add_option("--noisy", input_path, "noisy image")->required();
  analyze->add_option("--clean", clean_path, "clean image")->required();
  analyze->add_option("--denoiser", denoiser_path, "denoiser checkpoint");
  analyze->add_option("--translator", translator_path, "translator checkpoint");
  add_config_overrides(analyze, cfg);

  // ablate-addition
  auto* ablate = app.add_subcommand("ablate-addition", "Gaussian-addition baseline sweep");
  std::vector<double> levels{0.0, 5.0, 10.0, 15.0};
  ablate->add_option("--pairs", pairs_dir, "directory with clean/ and noisy/ subdirectories")
      ->required();
  ablate->add_option("--denoiser", denoiser_path, "denoiser checkpoint")->required();
  ablate->add_option("--translator", translator_path, "translator checkpoint");
  ablate->add_option("--levels", levels, "addition levels in 8-bit units");
  add_config_overrides(ablate, cfg);

  // Parse twice so --config applies before the per-flag overrides.
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    json err = {{"error", {{"message", e.what()}, {"kind", "usage"}}}};
    std::cerr << err.dump() << "\n";
    return 2;
  }
  if (!common.config_path.empty()) {
    cfg = load_config(common.config_path);
    // Re-parse so explicit flags override file values.
    app.clear();
    app.parse(argc, argv);
  }

  const fs::path out_dir(common.out_dir);

  if (*synth) {
    const TrainConfig c = resolve_config(common, cfg);
    Prng rng = Prng(c.seed).split("synth-corpus");
    fs::create_directories(out_dir / "clean");
    if (synth_pairs) fs::create_directories(out_dir / "noisy");
    json index = json::array();
    for (std::int64_t i = 0; i < synth_count; ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "img_%04d.%s", static_cast<int>(i),
                    c.channels == 1 ? "pgm" : "ppm");
      const Tensor clean = synth_clean_image(rng, synth_size, synth_size, c.channels);
      save_image(out_dir / "clean" / name, clean);
      json row = {{"name", name}};
      if (synth_pairs) {
        const RealNoiseDraw draw = synth_real_noise(rng, clean, c.real_noise);
        save_image(out_dir / "noisy" / name, apply_noise(clean, draw.field));
        row["family"] = draw.correlated ? "synthetic-correlated" : "synthetic-signal-dependent";
      }
      index.push_back(std::move(row));
    }
    write_json(out_dir / "corpus.json", {{"count", synth_count}, {"images", index}});
    std::cout << "wrote " << synth_count << " images to " << out_dir.string() << "\n";
    return 0;
  }

  if (*pretrain) {
    TrainConfig c = resolve_config(common, cfg);
    c.corpus_dir = corpus_dir;
    const auto corpus = load_corpus(corpus_dir);
    auto log = open_log(out_dir, "pretrain_log.jsonl");
    auto result = pretrain_denoiser(c, corpus, [&log](const TrainLogEntry& e) {
      log << "{\"iter\":" << e.iteration << ",\"lr\":" << e.lr << ",\"loss\":" << e.losses.total
          << "}\n";
    });
    save_checkpoint(out_dir / "denoiser.ntnt",
                    denoiser_checkpoint(result.denoiser, c, c.denoiser_iters));
    std::cout << "denoiser checkpoint: " << (out_dir / "denoiser.ntnt").string() << "\n";
    return 0;
  }

  if (*traint) {
    TrainConfig c = resolve_config(common, cfg);
    c.corpus_dir = corpus_dir;
    const auto corpus = load_corpus(corpus_dir);
    const Denoiser frozen = denoiser_from_checkpoint(load_checkpoint(denoiser_path));
    auto log = open_log(out_dir, "translator_log.jsonl");
    auto result = train_translator(c, frozen, corpus, [&log](const TrainLogEntry& e) {
      log << e.losses.to_json() << "\n";
    });
    save_checkpoint(out_dir / "translator.ntnt",
                    translator_checkpoint(result.translator, c, c.translator_iters));
    std::cout << "translator checkpoint: " << (out_dir / "translator.ntnt").string() << "\n";
    return 0;
  }

  if (*denoise) {
    const TrainConfig c = resolve_config(common, cfg);
    const Tensor noisy = load_image(input_path);
    const Denoiser den = denoiser_from_checkpoint(load_checkpoint(denoiser_path));
    fs::create_directories(out_dir);
    const std::string stem = fs::path(input_path).stem().string();
    const std::string ext = noisy.dim(0) == 1 ? ".pgm" : ".ppm";
    if (!translator_path.empty()) {
      const Translator tr = translator_from_checkpoint(load_checkpoint(translator_path));
      Prng rng = Prng(c.seed).split("denoise");
      const auto result = denoise_pipeline(noisy, tr, den, rng);
      save_image(out_dir / (stem + "_translated" + ext), clamp01(result.translated));
      save_image(out_dir / (stem + "_denoised" + ext), result.denoised);
    } else {
      save_image(out_dir / (stem + "_denoised" + ext), denoise_only(noisy, den));
    }
    std::cout << "outputs in " << out_dir.string() << "\n";
    return 0;
  }

  if (*eval) {
    const TrainConfig c = resolve_config(common, cfg);
    const auto pairs = load_pair_corpus(pairs_dir);
    std::vector<std::string> names;
    for (const auto& img : load_corpus(fs::path(pairs_dir) / "clean")) names.push_back(img.name);
    const Denoiser den = denoiser_from_checkpoint(load_checkpoint(denoiser_path));
    std::optional<Translator> tr;
    if (!translator_path.empty()) {
      tr = translator_from_checkpoint(load_checkpoint(translator_path));
    }
    Prng rng = Prng(c.seed).split("eval");
    const auto summary =
        evaluate_pairs(pairs, names, den, tr ? &*tr : nullptr, rng, c.worker_count());
    write_json(out_dir / "metrics.json", summary.to_json());
    std::cout << summary.to_json()["mean"].dump() << "\n";
    return 0;
  }

  if (*analyze) {
    const TrainConfig c = resolve_config(common, cfg);
    const Tensor noisy = load_image(input_path);
    const Tensor clean = load_image(clean_path);
    Prng rng = Prng(c.seed).split("analyze");
    const NoiseReport before = analyze_noise(noisy, clean, rng);
    json out = {{"input", before.to_json()}};
    write_text(out_dir / "input_spatial_hist.csv", before.spatial_hist.to_csv());
    write_text(out_dir / "input_freq_hist.csv", before.freq_hist.to_csv());
    if (!translator_path.empty()) {
      const Translator tr = translator_from_checkpoint(load_checkpoint(translator_path));
      Prng pipeline_rng = Prng(c.seed).split("analyze-pipeline");
      const Tensor translated = translate_only(noisy, tr, pipeline_rng);
      const NoiseReport after = analyze_noise(translated, clean, rng);
      out["translated"] = after.to_json();
      write_text(out_dir / "translated_spatial_hist.csv", after.spatial_hist.to_csv());
      write_text(out_dir / "translated_freq_hist.csv", after.freq_hist.to_csv());
      if (!denoiser_path.empty()) {
        const Denoiser den = denoiser_from_checkpoint(load_checkpoint(denoiser_path));
        Prng rng2 = Prng(c.seed).split("analyze-pipeline");
        const auto result = denoise_pipeline(noisy, tr, den, rng2);
        out["psnr_pipeline"] = psnr(result.denoised, clean);
        out["psnr_denoiser_only"] = psnr(denoise_only(noisy, den), clean);
      }
    }
    write_json(out_dir / "noise_report.json", out);
    std::cout << out.dump(2) << "\n";
    return 0;
  }

  if (*ablate) {
    const TrainConfig c = resolve_config(common, cfg);
    const auto pairs = load_pair_corpus(pairs_dir);
    const Denoiser den = denoiser_from_checkpoint(load_checkpoint(denoiser_path));
    std::optional<Translator> tr;
    if (!translator_path.empty()) {
      tr = translator_from_checkpoint(load_checkpoint(translator_path));
    }
    Prng rng = Prng(c.seed).split("ablate");
    const auto table =
        ablate_gaussian_addition(pairs, den, levels, tr ? &*tr : nullptr, rng, c.worker_count());
    write_json(out_dir / "ablation.json", table.to_json());
    std::cout << table.to_json().dump(2) << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    json err = {{"error", {{"message", e.what()}, {"kind", "runtime"}}}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
}
