#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "noisetrans/rng.hpp"
#include "noisetrans/stats.hpp"

using namespace noisetrans;

TEST_CASE("prng: identical seeds give identical streams, split streams differ") {
  Prng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Prng c(42);
  Prng child1 = c.split("stream-a");
  Prng child2 = c.split("stream-b");
  Prng child1_again = c.split("stream-a");
  CHECK(child1.next_u64() == child1_again.next_u64());
  CHECK(child1.next_u64() != child2.next_u64());
}

TEST_CASE("sample_gaussian: degenerate sigma, moments, determinism, errors") {
  Prng rng(7);
  SUBCASE("sigma = 0 gives a constant field") {
    const auto field = sample_gaussian(rng, 4, 4, 2, 0.25, 0.0);
    for (double v : field.values) CHECK(v == 0.25);
    CHECK(field.sigma_hat == 0.0);
    CHECK(field.mu_hat == 0.25);
  }
  SUBCASE("empirical std within 3% at 64x64x3") {
    const double sigma = 15.0 / 255.0;
    const auto field = sample_gaussian(rng, 64, 64, 3, 0.0, sigma);
    CHECK(field.sigma_hat == doctest::Approx(sigma).epsilon(0.03));
    // CLT bound on the mean: 4*sigma/sqrt(N) with N = 64*64*3.
    const double bound = 4.0 * sigma / std::sqrt(static_cast<double>(field.numel()));
    CHECK(std::abs(field.mu_hat) < bound);
  }
  SUBCASE("same seed, same field") {
    Prng r1(99), r2(99);
    const auto f1 = sample_gaussian(r1, 8, 8, 1, 0.0, 1.0);
    const auto f2 = sample_gaussian(r2, 8, 8, 1, 0.0, 1.0);
    CHECK(f1.values == f2.values);
  }
  SUBCASE("negative sigma is an error") {
    CHECK_THROWS_AS(sample_gaussian(rng, 4, 4, 1, 0.0, -1.0), std::invalid_argument);
  }
}

TEST_CASE("synth_correlated: lag-1 autocorrelation near 2/3, vanishing at lag 5") {
  Prng rng(11);
  const double sigma = 12.0 / 255.0;
  const auto field = synth_correlated(rng, 128, 128, 1, sigma);

  // Interior statistics only; the zero-padded border is excluded.
  auto lag_corr = [&](std::int64_t dy, std::int64_t dx) {
    double num = 0.0, den = 0.0, mean = 0.0;
    std::int64_t count = 0;
    for (std::int64_t y = 2; y < 126; ++y) {
      for (std::int64_t x = 2; x < 126; ++x) {
        mean += field.at(0, y, x);
        ++count;
      }
    }
    mean /= static_cast<double>(count);
    for (std::int64_t y = 2; y < 126 - dy; ++y) {
      for (std::int64_t x = 2; x < 126 - dx; ++x) {
        num += (field.at(0, y, x) - mean) * (field.at(0, y + dy, x + dx) - mean);
      }
    }
    for (std::int64_t y = 2; y < 126; ++y) {
      for (std::int64_t x = 2; x < 126; ++x) {
        const double v = field.at(0, y, x) - mean;
        den += v * v;
      }
    }
    return num / den;
  };
  const double rho_h = lag_corr(0, 1);
  const double rho_v = lag_corr(1, 0);
  CHECK(rho_h > 0.60);
  CHECK(rho_h < 0.73);
  CHECK(rho_v > 0.60);
  CHECK(rho_v < 0.73);
  CHECK(std::abs(lag_corr(0, 5)) < 0.1);
  CHECK(std::abs(lag_corr(5, 0)) < 0.1);

  // Interior std restored to sigma.
  double var = 0.0, mean = 0.0;
  std::int64_t count = 0;
  for (std::int64_t y = 2; y < 126; ++y)
    for (std::int64_t x = 2; x < 126; ++x) {
      mean += field.at(0, y, x);
      ++count;
    }
  mean /= static_cast<double>(count);
  for (std::int64_t y = 2; y < 126; ++y)
    for (std::int64_t x = 2; x < 126; ++x) {
      var += (field.at(0, y, x) - mean) * (field.at(0, y, x) - mean);
    }
  CHECK(std::sqrt(var / static_cast<double>(count)) == doctest::Approx(sigma).epsilon(0.05));
}

TEST_CASE("synth_correlated: degenerate sigma and too-small shapes") {
  Prng rng(3);
  const auto zero = synth_correlated(rng, 8, 8, 1, 0.0);
  for (double v : zero.values) CHECK(v == 0.0);
  CHECK_THROWS_AS(synth_correlated(rng, 2, 8, 1, 1.0), std::invalid_argument);
}

TEST_CASE("synth_signal_dependent: degeneration, regional variance ratio, determinism") {
  SUBCASE("a = 0 reduces to sample_gaussian with sigma = sqrt(b)") {
    const double b = 0.01;
    Prng r1(5), r2(5);
    const Tensor clean = Tensor::full({1, 16, 16}, 0.7);
    const auto sd = synth_signal_dependent(r1, clean, 0.0, b);
    const auto ref = sample_gaussian(r2, 16, 16, 1, 0.0, std::sqrt(b));
    CHECK(sd.values == ref.values);
  }
  SUBCASE("step image gives the predicted variance ratio") {
    const double a = 0.02, b = 1e-4;
    const std::int64_t side = 160;  // 2 * 160*80 > 1e4 pixels per region
    Tensor clean({1, side, side});
    for (std::int64_t y = 0; y < side; ++y) {
      for (std::int64_t x = 0; x < side; ++x) {
        clean[y * side + x] = (x < side / 2) ? 0.1 : 0.9;
      }
    }
    Prng rng(13);
    const auto field = synth_signal_dependent(rng, clean, a, b);
    auto region_var = [&](std::int64_t x0, std::int64_t x1) {
      double mean = 0.0, var = 0.0;
      std::int64_t count = 0;
      for (std::int64_t y = 0; y < side; ++y)
        for (std::int64_t x = x0; x < x1; ++x) {
          mean += field.at(0, y, x);
          ++count;
        }
      mean /= static_cast<double>(count);
      for (std::int64_t y = 0; y < side; ++y)
        for (std::int64_t x = x0; x < x1; ++x) {
          var += (field.at(0, y, x) - mean) * (field.at(0, y, x) - mean);
        }
      return var / static_cast<double>(count);
    };
    const double ratio = region_var(side / 2, side) / region_var(0, side / 2);
    const double expected = (0.9 * a + b) / (0.1 * a + b);
    CHECK(ratio == doctest::Approx(expected).epsilon(0.1));
  }
  SUBCASE("errors on negative coefficients and out-of-range cleans") {
    Prng rng(1);
    const Tensor clean = Tensor::full({1, 8, 8}, 0.5);
    CHECK_THROWS_AS(synth_signal_dependent(rng, clean, -0.1, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(synth_signal_dependent(rng, Tensor::full({1, 8, 8}, 1.5), 0.1, 0.0),
                    std::invalid_argument);
  }
}

TEST_CASE("sample_rayleigh: moments, mode, determinism, domain") {
  const double sigma = 2.5;
  const std::int64_t count = 100000;
  Prng rng(17);
  const auto samples = sample_rayleigh(rng, count, sigma);

  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= static_cast<double>(count);
  const double expected_mean = sigma * std::sqrt(std::numbers::pi / 2.0);
  const double sd = sigma * std::sqrt((4.0 - std::numbers::pi) / 2.0);
  CHECK(std::abs(mean - expected_mean) < 3.0 * sd / std::sqrt(static_cast<double>(count)));

  // Histogram peak near x = sigma (the mode).
  const auto hist = histogram(samples, 50, 0.0, 5.0 * sigma);
  std::size_t peak = 0;
  for (std::size_t i = 1; i < hist.counts.size(); ++i) {
    if (hist.counts[i] > hist.counts[peak]) peak = i;
  }
  const double peak_center = 0.5 * (hist.edges[peak] + hist.edges[peak + 1]);
  CHECK(peak_center == doctest::Approx(sigma).epsilon(0.2));

  Prng r2(17);
  const auto again = sample_rayleigh(r2, 10, sigma);
  for (int i = 0; i < 10; ++i) CHECK(again[i] == samples[static_cast<std::size_t>(i)]);

  CHECK_THROWS_AS(sample_rayleigh(rng, 5, 0.0), std::invalid_argument);
}

TEST_CASE("gaussian draws pass the W1 sanity bound against an independent draw") {
  const double sigma = 15.0 / 255.0;
  Prng r1(23), r2(1023);
  const auto a = sample_gaussian(r1, 100, 100, 1, 0.0, sigma);
  const auto b = sample_gaussian(r2, 100, 100, 1, 0.0, sigma);
  CHECK(w1_sorted(a, b) < 0.05 * sigma);
}

TEST_CASE("synth_correlated keeps a Gaussian marginal while breaking the spectrum") {
  // The correlated field must look Gaussian sample-wise (small spatial W1)
  // while being far from white in the frequency domain. The spectral side is
  // asserted in the spectral suite; here: the marginal match.
  const double sigma = 12.0 / 255.0;
  Prng r1(29), r2(1029);
  const auto corr = synth_correlated(r1, 64, 64, 3, sigma);
  const auto ref = sample_gaussian(r2, 64, 64, 3, corr.mu_hat, corr.sigma_hat);
  CHECK(w1_sorted(corr, ref) < 0.05 * sigma);
}
