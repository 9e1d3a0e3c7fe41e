#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "noisetrans/losses.hpp"
#include "noisetrans/spectral.hpp"
#include "noisetrans/stats.hpp"

using namespace noisetrans;

namespace {

Tensor field_tensor(Prng& rng, std::int64_t c, std::int64_t h, std::int64_t w, double sigma) {
  Tensor t({c, h, w});
  for (auto& v : t.data()) v = rng.normal(0.0, sigma);
  return t;
}

}  // namespace

TEST_CASE("gaussian_reference: degenerate, moment match, determinism") {
  SUBCASE("constant noise gives a constant reference") {
    const NoiseField constant(4, 4, 1, std::vector<double>(16, 0.2));
    Prng rng(3);
    const auto ref = gaussian_reference(rng, constant);
    for (double v : ref.values) CHECK(v == 0.2);
  }
  SUBCASE("reference moments track the source within sampling bounds") {
    Prng rng(5);
    const auto noise = sample_gaussian(rng, 64, 64, 3, 0.1, 0.06);
    Prng ref_rng(7);
    const auto ref = gaussian_reference(ref_rng, noise);
    const double n = static_cast<double>(ref.numel());
    CHECK(std::abs(ref.mu_hat - noise.mu_hat) < 4.0 * noise.sigma_hat / std::sqrt(n));
    CHECK(ref.sigma_hat == doctest::Approx(noise.sigma_hat).epsilon(0.03));
  }
  SUBCASE("fixed seed, fixed reference") {
    Prng rng(11);
    const auto noise = sample_gaussian(rng, 8, 8, 1, 0.0, 0.05);
    Prng r1(13), r2(13);
    CHECK(gaussian_reference(r1, noise).values == gaussian_reference(r2, noise).values);
  }
}

TEST_CASE("loss_implicit: zero, uniform offset, identity-denoiser gradient") {
  Prng rng(17);
  const Tensor gt = field_tensor(rng, 1, 4, 4, 1.0);

  SUBCASE("equal inputs give zero") {
    Graph g;
    CHECK(loss_implicit(g.leaf(gt), g.leaf(gt)).value().item() == 0.0);
  }
  SUBCASE("uniform offset d gives |d|") {
    Tensor shifted = gt;
    for (auto& v : shifted.data()) v += 0.3;
    Graph g;
    CHECK(loss_implicit(g.leaf(shifted), g.leaf(gt)).value().item() ==
          doctest::Approx(0.3).epsilon(1e-12));
  }
  SUBCASE("with an identity denoiser the gradient is sign(I_T - I_GT)/N") {
    Tensor translated = gt;
    for (std::int64_t i = 0; i < translated.numel(); ++i) {
      translated[i] += (i % 2 == 0) ? 0.4 : -0.4;
    }
    Graph g;
    Var leaf = g.leaf(translated, true);
    const Gradients grads = g.backward(loss_implicit(leaf, g.leaf(gt)));
    const Tensor& grad = grads.at(leaf);
    const double n = static_cast<double>(gt.numel());
    for (std::int64_t i = 0; i < gt.numel(); ++i) {
      const double expect = (i % 2 == 0 ? 1.0 : -1.0) / n;
      CHECK(grad[i] == doctest::Approx(expect).epsilon(1e-12));
    }
    auto f = [&](Graph& gg, Var v) { return loss_implicit(v, gg.leaf(gt)); };
    CHECK(gradcheck(f, translated, 1e-5, 1e-4).pass);
  }
  SUBCASE("shape mismatch is an error") {
    Graph g;
    CHECK_THROWS_AS(loss_implicit(g.leaf(Tensor({1, 4, 4})), g.leaf(Tensor({1, 4, 5}))),
                    std::invalid_argument);
  }
}

TEST_CASE("loss_spatial: multiset zero, shift case, finite differences") {
  Prng rng(19);
  SUBCASE("equal multisets per channel give zero") {
    const auto ref = sample_gaussian(rng, 4, 4, 2, 0.0, 1.0);
    Tensor reordered = ref.to_tensor();
    // Reverse each channel plane; per-channel multisets are unchanged.
    for (std::int64_t c = 0; c < 2; ++c) {
      std::reverse(reordered.data().begin() + c * 16, reordered.data().begin() + (c + 1) * 16);
    }
    Graph g;
    CHECK(loss_spatial(g.leaf(reordered), ref).value().item() == 0.0);
  }
  SUBCASE("constant shift gives |c| with a uniform gradient sign") {
    const auto ref = sample_gaussian(rng, 4, 4, 1, 0.0, 1.0);
    Tensor shifted = ref.to_tensor();
    for (auto& v : shifted.data()) v += 0.25;
    Graph g;
    Var leaf = g.leaf(shifted, true);
    Var loss = loss_spatial(leaf, ref);
    CHECK(loss.value().item() == doctest::Approx(0.25).epsilon(1e-12));
    const Gradients grads = g.backward(loss);
    const Tensor& grad = grads.at(leaf);
    for (std::int64_t i = 0; i < grad.numel(); ++i) {
      CHECK(grad[i] == doctest::Approx(1.0 / 16.0).epsilon(1e-12));
    }
  }
  SUBCASE("gradient matches finite differences away from ties") {
    const auto ref = sample_gaussian(rng, 4, 4, 1, 0.0, 1.0);
    const Tensor x = field_tensor(rng, 1, 4, 4, 1.0);
    auto f = [&](Graph& g, Var v) { return loss_spatial(v, ref); };
    CHECK(gradcheck(f, x, 1e-6, 1e-4).pass);
  }
  SUBCASE("shape mismatch is an error") {
    const auto ref = sample_gaussian(rng, 4, 4, 1, 0.0, 1.0);
    Graph g;
    CHECK_THROWS_AS(loss_spatial(g.leaf(Tensor({1, 4, 5})), ref), std::invalid_argument);
  }
}

TEST_CASE("loss_freq: identical and negated fields, finite differences") {
  Prng rng(23);
  const auto ref = sample_gaussian(rng, 4, 4, 1, 0.0, 1.0);

  SUBCASE("identical fields give zero") {
    Graph g;
    CHECK(loss_freq(g.leaf(ref.to_tensor()), ref).value().item() == doctest::Approx(0.0));
  }
  SUBCASE("negation leaves the loss at zero: |F(-n)| = |F(n)|") {
    Tensor negated = ref.to_tensor();
    for (auto& v : negated.data()) v = -v;
    Graph g;
    CHECK(loss_freq(g.leaf(negated), ref).value().item() == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("gradient matches finite differences at the looser tolerance") {
    const Tensor x = field_tensor(rng, 1, 4, 4, 1.0);
    auto f = [&](Graph& g, Var v) { return loss_freq(v, ref); };
    const auto report = gradcheck(f, x, 1e-6, 1e-3);
    CHECK(report.pass);
  }
}

TEST_CASE("loss_explicit and loss_total: composition identities") {
  Prng rng(29);
  const auto ref = sample_gaussian(rng, 4, 4, 1, 0.0, 1.0);
  const Tensor x = field_tensor(rng, 1, 4, 4, 1.0);
  const double alpha = 5e-2;
  const double beta = 2e-3;

  Graph g;
  Var leaf = g.leaf(x, true);
  Var spatial = loss_spatial(leaf, ref);
  Var freq = loss_freq(leaf, ref);
  Var explicit_term = loss_explicit(spatial, freq, beta);
  // An implicit term built on the same graph.
  Var implicit = l1_mean(leaf, g.leaf(ref.to_tensor()));
  Var total = loss_total(implicit, explicit_term, alpha);

  const LossBreakdown b = make_breakdown(implicit.value().item(), spatial.value().item(),
                                         freq.value().item(), alpha, beta);
  CHECK(b.explicit_term == spatial.value().item() + beta * freq.value().item());
  CHECK(b.total == b.implicit + alpha * b.explicit_term);
  CHECK(explicit_term.value().item() == b.explicit_term);
  CHECK(total.value().item() == b.total);

  SUBCASE("beta = 0 reduces the explicit loss to the spatial term") {
    Var e0 = loss_explicit(spatial, freq, 0.0);
    CHECK(e0.value().item() == spatial.value().item());
  }
  SUBCASE("alpha = 0 reduces the total to the implicit term") {
    Var t0 = loss_total(implicit, explicit_term, 0.0);
    CHECK(t0.value().item() == implicit.value().item());
  }
  SUBCASE("negative weights are rejected") {
    CHECK_THROWS_AS(loss_explicit(spatial, freq, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(loss_total(implicit, explicit_term, -1.0), std::invalid_argument);
  }
  SUBCASE("breakdown serializes to one JSON object") {
    const std::string json = b.to_json();
    CHECK(json.find("\"l_total\":") != std::string::npos);
    CHECK(json.find("\"l_explicit\":") != std::string::npos);
  }
}

TEST_CASE("discrimination: correlated noise scores > 2x white noise on the explicit loss") {
  const double beta = 2e-3;
  double mean_white = 0.0;
  double mean_corr = 0.0;
  const int trials = 50;
  for (int t = 0; t < trials; ++t) {
    Prng rng(1000 + static_cast<std::uint64_t>(t));
    Prng ref_rng(9000 + static_cast<std::uint64_t>(t));
    const double sigma = 15.0 / 255.0;

    const auto white = sample_gaussian(rng, 64, 64, 3, 0.0, sigma);
    const auto white_ref = gaussian_reference(ref_rng, white);
    const auto corr = synth_correlated(rng, 64, 64, 3, sigma);
    const auto corr_ref = gaussian_reference(ref_rng, corr);

    Graph g;
    Var lw = loss_explicit(loss_spatial(g.leaf(white.to_tensor()), white_ref),
                           loss_freq(g.leaf(white.to_tensor()), white_ref), beta);
    Var lc = loss_explicit(loss_spatial(g.leaf(corr.to_tensor()), corr_ref),
                           loss_freq(g.leaf(corr.to_tensor()), corr_ref), beta);
    mean_white += lw.value().item();
    mean_corr += lc.value().item();
  }
  mean_white /= trials;
  mean_corr /= trials;
  CHECK(mean_corr > 2.0 * mean_white);
}

TEST_CASE("loss components stay non-negative with finite gradients near zero fields") {
  Prng rng(31);
  for (int t = 0; t < 10; ++t) {
    const double sigma = (t < 5) ? 1e-7 : 0.05;  // include near-zero fields
    const auto ref = sample_gaussian(rng, 8, 8, 1, 0.0, sigma);
    Tensor x({1, 8, 8});
    for (auto& v : x.data()) v = rng.normal(0.0, sigma);

    Graph g;
    Var leaf = g.leaf(x, true);
    Var spatial = loss_spatial(leaf, ref);
    Var freq = loss_freq(leaf, ref);
    Var total = loss_total(l1_mean(leaf, g.leaf(ref.to_tensor())),
                           loss_explicit(spatial, freq, 2e-3), 5e-2);
    CHECK(spatial.value().item() >= 0.0);
    CHECK(freq.value().item() >= 0.0);
    CHECK(total.value().item() >= 0.0);
    const Gradients grads = g.backward(total);
    CHECK(all_finite(grads.at(leaf)));
  }
}
