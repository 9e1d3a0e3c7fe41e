#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "noisetrans/image_io.hpp"
#include "noisetrans/metrics.hpp"
#include "noisetrans/pipeline.hpp"
#include "noisetrans/synthdata.hpp"

using namespace noisetrans;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("noisetrans_test_" + std::to_string(static_cast<unsigned>(std::rand())) +
            std::to_string(static_cast<unsigned>(std::time(nullptr) & 0xFFFF)));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("image io: P5/P6 read, normalization, round trips, errors") {
  TempDir tmp;
  SUBCASE("P5 single channel") {
    const fs::path p = tmp.path / "gray.pgm";
    {
      std::ofstream out(p, std::ios::binary);
      out << "P5\n# a comment\n2 2\n255\n";
      const unsigned char px[4] = {0, 128, 255, 64};
      out.write(reinterpret_cast<const char*>(px), 4);
    }
    const Tensor img = load_image(p);
    CHECK(img.shape() == std::vector<std::int64_t>{1, 2, 2});
    CHECK(img[0] == 0.0);
    CHECK(img[2] == 1.0);
    CHECK(img[1] == doctest::Approx(128.0 / 255.0));
  }
  SUBCASE("P6 pixel normalization") {
    const fs::path p = tmp.path / "rgb.ppm";
    {
      std::ofstream out(p, std::ios::binary);
      out << "P6\n1 1\n255\n";
      const unsigned char px[3] = {255, 0, 0};
      out.write(reinterpret_cast<const char*>(px), 3);
    }
    const Tensor img = load_image(p);
    CHECK(img[0] == 1.0);
    CHECK(img[1] == 0.0);
    CHECK(img[2] == 0.0);
  }
  SUBCASE("save -> load is bit-exact for 8-bit data, and files byte-identical") {
    Prng rng(3);
    Tensor img({3, 5, 7});
    for (auto& v : img.data()) {
      v = static_cast<double>(rng.next_u64() % 256) / 255.0;  // exactly representable levels
    }
    const fs::path p1 = tmp.path / "a.ppm";
    const fs::path p2 = tmp.path / "b.ppm";
    save_image(p1, img);
    const Tensor loaded = load_image(p1);
    for (std::int64_t i = 0; i < img.numel(); ++i) CHECK(loaded[i] == img[i]);
    save_image(p2, loaded);
    CHECK(slurp(p1) == slurp(p2));
  }
  SUBCASE("unsupported depth and malformed files raise naming the file") {
    const fs::path p = tmp.path / "deep.pgm";
    {
      std::ofstream out(p, std::ios::binary);
      out << "P5\n2 2\n65535\n";
      out.write("\0\0\0\0\0\0\0\0", 8);
    }
    CHECK_THROWS_WITH_AS(load_image(p), doctest::Contains("deep.pgm"), std::runtime_error);
    const fs::path truncated = tmp.path / "short.pgm";
    {
      std::ofstream out(truncated, std::ios::binary);
      out << "P5\n4 4\n255\n";
      out.write("\0\0", 2);
    }
    CHECK_THROWS_AS(load_image(truncated), std::runtime_error);
    CHECK_THROWS_AS(load_image(tmp.path / "missing.pgm"), std::runtime_error);
  }
}

TEST_CASE("checkpoint: save -> load -> save is byte-identical") {
  TempDir tmp;
  Prng rng(7);
  Tensor a({2, 3});
  Tensor b({4});
  for (auto& v : a.data()) v = rng.normal();
  for (auto& v : b.data()) v = rng.normal();
  const Checkpoint ckpt = make_checkpoint(
      "denoiser", {{"arch", {{"width", 4}}}, {"note", "roundtrip"}}, {{"a", &a}, {"b", &b}});

  const fs::path p1 = tmp.path / "model.ntnt";
  const fs::path p2 = tmp.path / "model2.ntnt";
  save_checkpoint(p1, ckpt);
  const Checkpoint loaded = load_checkpoint(p1);
  save_checkpoint(p2, loaded);
  CHECK(slurp(p1) == slurp(p2));
  CHECK(loaded.tensor("a").shape() == a.shape());
  // Values survive the f32 payload exactly once quantised.
  const Checkpoint again = load_checkpoint(p2);
  CHECK(loaded.tensor("b").data()[2] == again.tensor("b").data()[2]);

  CHECK_THROWS_AS(load_checkpoint(tmp.path / "nope.ntnt"), std::runtime_error);
  const fs::path bad = tmp.path / "bad.ntnt";
  {
    std::ofstream out(bad, std::ios::binary);
    out << "XXXX";
  }
  CHECK_THROWS_AS(load_checkpoint(bad), std::runtime_error);
}

TEST_CASE("model checkpoints restore parameters and reject mismatches") {
  TempDir tmp;
  Prng rng(11);
  TrainConfig cfg;
  Denoiser den({3, 8, 2});
  den.init(rng);
  for (auto& p : den.params()) {
    for (auto& v : p.tensor->data()) v = rng.normal(0.0, 0.1);
  }
  const fs::path path = tmp.path / "den.ntnt";
  save_checkpoint(path, denoiser_checkpoint(den, cfg, 123));
  const Checkpoint loaded = load_checkpoint(path);
  CHECK(loaded.manifest.at("meta").at("iteration") == 123);
  Denoiser restored = denoiser_from_checkpoint(loaded);
  // f32 payload: compare at float precision.
  const auto orig = den.params();
  const auto rest = restored.params();
  for (std::size_t i = 0; i < orig.size(); ++i) {
    for (std::int64_t j = 0; j < orig[i].tensor->numel(); ++j) {
      CHECK(static_cast<float>((*orig[i].tensor)[j]) ==
            static_cast<float>((*rest[i].tensor)[j]));
    }
  }
  CHECK_THROWS_AS(translator_from_checkpoint(loaded), std::runtime_error);
}

TEST_CASE("load_corpus: deterministic order and parse errors name the file") {
  TempDir tmp;
  Prng rng(13);
  for (const char* name : {"b.pgm", "a.pgm", "c.pgm"}) {
    Tensor img({1, 8, 8});
    for (auto& v : img.data()) v = rng.uniform(0.0, 1.0);
    save_image(tmp.path / name, img);
  }
  const auto corpus = load_corpus(tmp.path);
  REQUIRE(corpus.size() == 3);
  CHECK(corpus[0].name == "a.pgm");
  CHECK(corpus[1].name == "b.pgm");
  CHECK(corpus[2].name == "c.pgm");

  {
    std::ofstream out(tmp.path / "broken.pgm", std::ios::binary);
    out << "P5\n8 8\n255\n";  // truncated raster
  }
  CHECK_THROWS_WITH_AS(load_corpus(tmp.path), doctest::Contains("broken.pgm"),
                       std::runtime_error);
  CHECK_THROWS_AS(load_corpus(tmp.path / "missing"), std::runtime_error);
}

TEST_CASE("make_batch: composition, degenerate range, determinism, crop errors") {
  Prng corpus_rng(17);
  std::vector<CorpusImage> corpus;
  for (int i = 0; i < 3; ++i) {
    corpus.push_back({"img" + std::to_string(i), synth_clean_image(corpus_rng, 96, 96, 3)});
  }
  TrainConfig cfg;
  cfg.crop = 32;

  SUBCASE("pretraining batch of 8 is exactly half source A, half source B") {
    Prng rng(19);
    const auto batch = make_batch(rng, cfg, corpus, TrainPhase::DenoiserPretrain, 8);
    REQUIRE(batch.size() == 8);
    int gaussian = 0, real = 0;
    for (const auto& pair : batch) {
      if (pair.provenance == Provenance::SyntheticGaussian) {
        ++gaussian;
      } else {
        ++real;
      }
      CHECK(pair.clean.shape() == std::vector<std::int64_t>{3, 32, 32});
      CHECK(pair.noisy.same_shape(pair.clean));
    }
    CHECK(gaussian == 4);
    CHECK(real == 4);
  }
  SUBCASE("degenerate augmentation range leaves only the synthetic real noise") {
    TrainConfig no_aug = cfg;
    no_aug.aug_lo = 0.0;
    no_aug.aug_hi = 0.0;
    // With level 0 the Gaussian step adds nothing: reconstruct by comparing
    // against a replay with the same stream.
    Prng r1(23), r2(23);
    const auto batch = make_batch(r1, no_aug, corpus, TrainPhase::TranslatorTrain, 2);
    const auto replay = make_batch(r2, no_aug, corpus, TrainPhase::TranslatorTrain, 2);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      CHECK(batch[i].noisy.data()[10] == replay[i].noisy.data()[10]);
    }
    for (const auto& pair : batch) {
      CHECK((pair.provenance == Provenance::SyntheticCorrelated ||
             pair.provenance == Provenance::SyntheticSignalDependent));
    }
  }
  SUBCASE("identical seeds give identical batches") {
    Prng r1(29), r2(29);
    const auto b1 = make_batch(r1, cfg, corpus, TrainPhase::DenoiserPretrain, 4);
    const auto b2 = make_batch(r2, cfg, corpus, TrainPhase::DenoiserPretrain, 4);
    for (std::size_t i = 0; i < b1.size(); ++i) {
      CHECK(b1[i].noisy.data()[5] == b2[i].noisy.data()[5]);
      CHECK(b1[i].clean.data()[5] == b2[i].clean.data()[5]);
    }
  }
  SUBCASE("crop larger than the corpus images is an error") {
    TrainConfig big = cfg;
    big.crop = 128;
    Prng rng(31);
    CHECK_THROWS_AS(make_batch(rng, big, corpus, TrainPhase::DenoiserPretrain, 2),
                    std::invalid_argument);
  }
}

TEST_CASE("psnr: trivial and derived cases") {
  const Tensor a = Tensor::full({1, 4, 4}, 0.5);
  CHECK(std::isinf(psnr(a, a)));

  Tensor b = a;
  for (auto& v : b.data()) v += 1.0;
  CHECK(psnr(a, b) == doctest::Approx(0.0).epsilon(1e-12));

  Tensor c = a;
  for (auto& v : c.data()) v += 16.0 / 255.0;
  CHECK(psnr(a, c) == doctest::Approx(20.0 * std::log10(255.0 / 16.0)).epsilon(1e-12));

  CHECK_THROWS_AS(psnr(a, Tensor({1, 4, 5})), std::invalid_argument);
}

TEST_CASE("ssim: identity, strong dissimilarity, monotone degradation") {
  Prng rng(37);
  const Tensor img = synth_clean_image(rng, 32, 32, 1);
  CHECK(ssim(img, img) == 1.0);

  // Binary image against its inversion.
  Tensor binary({1, 16, 16});
  for (std::int64_t i = 0; i < binary.numel(); ++i) binary[i] = (i / 16 + i % 16) % 2 == 0 ? 0.0 : 1.0;
  Tensor inverted = binary;
  for (auto& v : inverted.data()) v = 1.0 - v;
  CHECK(ssim(binary, inverted) < 0.2);

  double last = 1.0;
  for (const double level : {5.0, 15.0, 25.0}) {
    Prng noise_rng(41);
    Tensor noisy = img;
    for (auto& v : noisy.data()) {
      v = std::clamp(v + noise_rng.normal(0.0, level / 255.0), 0.0, 1.0);
    }
    const double s = ssim(img, noisy);
    CHECK(s < last);
    last = s;
  }
  CHECK_THROWS_AS(ssim(Tensor({1, 8, 8}), Tensor({1, 8, 8})), std::invalid_argument);
}

TEST_CASE("analyze_noise: white vs correlated vs degenerate") {
  Prng rng(43);
  const Tensor clean = synth_clean_image(rng, 64, 64, 3);
  const double sigma = 12.0 / 255.0;

  SUBCASE("white Gaussian residual passes both thresholds") {
    Prng noise_rng(47);
    const auto noise = sample_gaussian(noise_rng, 64, 64, 3, 0.0, sigma);
    Tensor noisy = clean;
    for (std::int64_t i = 0; i < noisy.numel(); ++i) noisy[i] += noise.to_tensor()[i];
    Prng analysis_rng(53);
    const auto report = analyze_noise(noisy, clean, analysis_rng);
    CHECK(!report.no_noise);
    CHECK(report.spatial_w1 < report.spatial_threshold);
    CHECK(report.freq_w1 < report.freq_threshold);
    CHECK(std::abs(report.lag1_horizontal) < 0.05);
    CHECK(std::abs(report.signal_dependency_slope) < 0.01);
  }
  SUBCASE("correlated residual fails the frequency fit by a factor of 3") {
    Prng noise_rng(59);
    const auto noise = synth_correlated(noise_rng, 64, 64, 3, sigma);
    Tensor noisy = clean;
    for (std::int64_t i = 0; i < noisy.numel(); ++i) noisy[i] += noise.to_tensor()[i];
    Prng analysis_rng(61);
    const auto report = analyze_noise(noisy, clean, analysis_rng);
    CHECK(report.freq_w1 > 3.0 * report.freq_threshold);
    CHECK(report.lag1_horizontal > 0.5);
  }
  SUBCASE("clean == noisy reports the no-noise flag") {
    Prng analysis_rng(67);
    const auto report = analyze_noise(clean, clean, analysis_rng);
    CHECK(report.no_noise);
    CHECK(report.sigma_hat == 0.0);
    CHECK(report.spatial_w1 == 0.0);
    const auto j = report.to_json();
    CHECK(j.at("no_noise").get<bool>());
  }
  SUBCASE("signal-dependent residual shows a positive slope") {
    Prng noise_rng(71);
    const auto noise = synth_signal_dependent(noise_rng, clean, 0.01, 1e-5);
    Tensor noisy = clean;
    for (std::int64_t i = 0; i < noisy.numel(); ++i) noisy[i] += noise.to_tensor()[i];
    Prng analysis_rng(73);
    const auto report = analyze_noise(noisy, clean, analysis_rng);
    CHECK(report.signal_dependency_slope > 0.004);
  }
}

TEST_CASE("reflect padding: contract and crop-back") {
  Prng rng(79);
  Tensor img({3, 10, 13});
  for (auto& v : img.data()) v = rng.uniform(0.0, 1.0);
  const Tensor padded = reflect_pad_to_multiple(img, 4);
  CHECK(padded.dim(1) == 12);
  CHECK(padded.dim(2) == 16);
  // Mirror rows: padded row 10 equals source row 8.
  CHECK(padded[(0 * 12 + 10) * 16 + 0] == img[(0 * 10 + 8) * 13 + 0]);
  const Tensor same = reflect_pad_to_multiple(img, 1);
  CHECK(same.same_shape(img));
}

TEST_CASE("denoise pipeline: identity translator composes with the denoiser") {
  Prng rng(83);
  Translator tr({3, 4, 1, 100.0});
  tr.init(rng);  // identity at init
  Denoiser den({3, 8, 2});
  den.init(rng);
  // Give the denoiser a non-trivial output conv so the two paths must agree
  // through actual computation.
  for (auto& p : den.params()) {
    for (auto& v : p.tensor->data()) v = rng.normal(0.0, 0.05);
  }
  const Tensor noisy = synth_clean_image(rng, 20, 20, 3);  // 20 not divisible by 2 -> padded

  Prng pipe_rng(89);
  const auto result = denoise_pipeline(noisy, tr, den, pipe_rng);
  CHECK(result.translated.same_shape(noisy));
  CHECK(result.denoised.same_shape(noisy));
  CHECK(result.trace.input_augmented == false);
  CHECK(result.trace.injection_active == true);
  // Identity translator: I_T == I even at odd sizes (reflect pad + crop back).
  for (std::int64_t i = 0; i < noisy.numel(); ++i) CHECK(result.translated[i] == noisy[i]);
  for (double v : result.denoised.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }

  // Channel mismatch is rejected.
  Prng rng2(91);
  CHECK_THROWS_AS(denoise_pipeline(Tensor({1, 16, 16}), tr, den, rng2), std::invalid_argument);
}

TEST_CASE("evaluate_pairs and ablation: ordering, determinism, level-0 equivalence") {
  Prng rng(97);
  Denoiser den({3, 8, 2});
  den.init(rng);
  for (auto& p : den.params()) {
    for (auto& v : p.tensor->data()) v = rng.normal(0.0, 0.03);
  }
  Translator tr({3, 4, 1, 100.0});
  tr.init(rng);

  std::vector<ImagePair> pairs;
  std::vector<std::string> names;
  for (int i = 0; i < 4; ++i) {
    const Tensor clean = synth_clean_image(rng, 32, 32, 3);
    const RealNoiseDraw draw = synth_real_noise(rng, clean, RealNoiseSpec{});
    pairs.push_back({clean, apply_noise(clean, draw.field), Provenance::SyntheticCorrelated});
    names.push_back("pair" + std::to_string(i));
  }

  Prng eval_rng(101);
  const auto summary = evaluate_pairs(pairs, names, den, &tr, eval_rng, 2);
  REQUIRE(summary.images.size() == 4);
  CHECK(summary.images[0].name == "pair0");
  CHECK(summary.images[3].name == "pair3");
  CHECK(summary.images[0].psnr_translated.has_value());

  Prng eval_rng2(101);
  const auto summary2 = evaluate_pairs(pairs, names, den, &tr, eval_rng2, 1);
  CHECK(summary.to_json().dump() == summary2.to_json().dump());  // worker count cannot matter

  Prng ab_rng(103);
  const auto table = ablate_gaussian_addition(pairs, den, {0.0, 5.0}, nullptr, ab_rng, 2);
  REQUIRE(table.rows.size() == 2);
  // Level 0 equals the plain denoiser evaluation.
  double mean_plain = 0.0;
  for (const auto& m : summary.images) mean_plain += m.psnr_denoised;
  mean_plain /= 4.0;
  CHECK(table.rows[0].mean_psnr == doctest::Approx(mean_plain).epsilon(1e-12));
}
