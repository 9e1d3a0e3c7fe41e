#include <doctest.h>

#include <cmath>
#include <complex>
#include <stdexcept>

#include "noisetrans/graph.hpp"
#include "noisetrans/rng.hpp"
#include "noisetrans/spectral.hpp"
#include "noisetrans/stats.hpp"

using namespace noisetrans;
namespace sp = noisetrans::spectral;

namespace {

NoiseField random_field(Prng& rng, std::int64_t h, std::int64_t w, std::int64_t c,
                        double sigma = 1.0) {
  return sample_gaussian(rng, h, w, c, 0.0, sigma);
}

}  // namespace

TEST_CASE("dft2: delta has a flat spectrum, constants are DC-only") {
  SUBCASE("delta at (0,0)") {
    std::vector<double> vals(16, 0.0);
    vals[0] = 1.0;
    const NoiseField delta(4, 4, 1, std::move(vals));
    const auto spec = sp::dft2_channelwise(delta);
    for (std::int64_t u = 0; u < 4; ++u) {
      for (std::int64_t v = 0; v < 4; ++v) {
        CHECK(std::abs(spec.at(0, u, v)) == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }
  SUBCASE("constant field") {
    const double a = 0.4;
    const NoiseField constant(4, 4, 1, std::vector<double>(16, a));
    const auto spec = sp::dft2_channelwise(constant);
    CHECK(spec.at(0, 0, 0).real() == doctest::Approx(16.0 * a).epsilon(1e-12));
    CHECK(spec.at(0, 0, 0).imag() == doctest::Approx(0.0));
    for (std::int64_t u = 0; u < 4; ++u) {
      for (std::int64_t v = 0; v < 4; ++v) {
        if (u == 0 && v == 0) continue;
        CHECK(std::abs(spec.at(0, u, v)) < 1e-12);
      }
    }
  }
}

TEST_CASE("dft2/idft2: Parseval and round-trip identities") {
  Prng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    // Mix power-of-two (fast path) and odd sizes (direct path).
    const std::int64_t h = (trial % 3 == 0) ? 6 : 8;
    const std::int64_t w = (trial % 4 == 0) ? 5 : 8;
    const auto field = random_field(rng, h, w, 2);
    const auto spec = sp::dft2_channelwise(field);
    CHECK(sp::parseval_mismatch(field, spec) < 1e-9);

    const auto back = sp::idft2_channelwise(spec);
    for (std::size_t i = 0; i < field.values.size(); ++i) {
      CHECK(back.values[i] == doctest::Approx(field.values[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("idft2: zero spectrum and DC-only spectrum") {
  sp::Spectrum spec;
  spec.channels = 1;
  spec.height = 4;
  spec.width = 4;
  spec.coeffs.assign(16, sp::cplx(0.0, 0.0));
  const auto zero = sp::idft2_channelwise(spec);
  for (double v : zero.values) CHECK(v == 0.0);

  const double a = 0.7;
  spec.coeffs[0] = sp::cplx(16.0 * a, 0.0);
  const auto constant = sp::idft2_channelwise(spec);
  for (double v : constant.values) CHECK(v == doctest::Approx(a).epsilon(1e-12));
}

TEST_CASE("dft2 linearity and Hermitian symmetry for real inputs") {
  Prng rng(11);
  const auto x = random_field(rng, 8, 8, 1);
  const auto y = random_field(rng, 8, 8, 1);
  const double a = 1.3, b = -0.6;
  std::vector<double> mix(x.values.size());
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = a * x.values[i] + b * y.values[i];
  const auto sx = sp::dft2_channelwise(x);
  const auto sy = sp::dft2_channelwise(y);
  const auto sm = sp::dft2_channelwise(NoiseField(8, 8, 1, std::move(mix)));
  for (std::size_t i = 0; i < sm.coeffs.size(); ++i) {
    const auto expect = a * sx.coeffs[i] + b * sy.coeffs[i];
    CHECK(std::abs(sm.coeffs[i] - expect) < 1e-9);
  }
  for (std::int64_t u = 0; u < 8; ++u) {
    for (std::int64_t v = 0; v < 8; ++v) {
      const auto f = sx.at(0, u, v);
      const auto conj = std::conj(sx.at(0, (8 - u) % 8, (8 - v) % 8));
      CHECK(std::abs(f - conj) < 1e-9);
    }
  }
}

TEST_CASE("magnitude: simple values and special-bin exclusion") {
  sp::Spectrum spec;
  spec.channels = 1;
  spec.height = 2;
  spec.width = 2;
  spec.coeffs = {sp::cplx(-2.5, 0.0), sp::cplx(3.0, 4.0), sp::cplx(0.0, 1.0), sp::cplx(1.0, 0.0)};
  const auto all = sp::magnitude(spec, false);
  CHECK(all.per_channel[0][0] == 2.5);
  CHECK(all.per_channel[0][1] == doctest::Approx(5.0));  // |3+4i|

  // For 2x2 every bin is self-conjugate, so exclusion removes all of them.
  const auto excl = sp::magnitude(spec, true);
  CHECK(excl.per_channel[0].empty());
  CHECK(sp::special_bin_count(2, 2) == 4);
  CHECK(sp::special_bin_count(8, 8) == 4);
  CHECK(sp::special_bin_count(5, 8) == 2);
  CHECK(sp::is_special_bin(0, 0, 8, 8));
  CHECK(sp::is_special_bin(4, 0, 8, 8));
  CHECK(!sp::is_special_bin(1, 0, 8, 8));
}

TEST_CASE("|z| gradient wrt (Re, Im) via the spectral loss finite differences") {
  // The |F| gradient (Re/|z|, Im/|z|) is exercised end to end through the
  // frequency-domain distance node.
  Prng rng(13);
  const auto ref = random_field(rng, 4, 4, 1, 0.8);
  Tensor x({1, 4, 4});
  for (auto& v : x.data()) v = rng.normal(0.0, 0.8);
  auto f = [&](Graph& g, Var v) { return spectral_w1_to_reference(v, ref.to_tensor()); };
  const auto report = gradcheck(f, x, 1e-6, 1e-3);
  CHECK(report.pass);
}

TEST_CASE("rayleigh_pdf: pointwise values and quadrature") {
  CHECK(sp::rayleigh_pdf(1.0, 1.0) == doctest::Approx(std::exp(-0.5)).epsilon(1e-9));
  CHECK(sp::rayleigh_pdf(0.0, 2.0) == 0.0);
  CHECK_THROWS_AS(sp::rayleigh_pdf(-1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(sp::rayleigh_pdf(1.0, 0.0), std::invalid_argument);

  // Midpoint rule over [0, 10 sigma].
  const double sigma = 1.7;
  const int steps = 200000;
  const double dx = 10.0 * sigma / steps;
  double integral = 0.0;
  for (int i = 0; i < steps; ++i) {
    integral += sp::rayleigh_pdf((i + 0.5) * dx, sigma) * dx;
  }
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("gaussian_spectrum_scale: formula and degenerate value") {
  CHECK(sp::gaussian_spectrum_scale(1.0, 8, 8) == doctest::Approx(std::sqrt(32.0)).epsilon(1e-12));
  CHECK(sp::gaussian_spectrum_scale(0.0, 64, 64) == 0.0);
}

TEST_CASE("Rayleigh law: white Gaussian spectra fit, correlated spectra fail by 3x") {
  const double sigma = 15.0 / 255.0;
  Prng rng(17);
  Prng ref_rng(1700);
  const double scale = sp::gaussian_spectrum_scale(sigma, 64, 64);

  auto fit_distance = [&](const NoiseField& field) {
    const auto mags = sp::magnitude(sp::dft2_channelwise(field), true);
    const SampleVector observed(mags.per_channel[0]);
    const SampleVector reference(
        sample_rayleigh(ref_rng, static_cast<std::int64_t>(mags.per_channel[0].size()), scale));
    return w1_sorted(observed, reference);
  };

  const auto white = sample_gaussian(rng, 64, 64, 1, 0.0, sigma);
  const double d_white = fit_distance(white);
  CHECK(d_white < 0.05 * scale);

  auto corr = synth_correlated(rng, 64, 64, 1, sigma);
  const double d_corr = fit_distance(corr);
  CHECK(d_corr > 3.0 * 0.05 * scale);
}
