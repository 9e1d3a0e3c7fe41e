#include "noisetrans/losses.hpp"

#include <sstream>
#include <stdexcept>

namespace noisetrans {

LossBreakdown make_breakdown(double implicit, double spatial, double freq, double alpha,
                             double beta) {
  LossBreakdown b;
  b.implicit = implicit;
  b.spatial = spatial;
  b.freq = freq;
  b.alpha = alpha;
  b.beta = beta;
  b.explicit_term = spatial + beta * freq;
  b.total = implicit + alpha * b.explicit_term;
  return b;
}

std::string LossBreakdown::to_json() const {
  std::ostringstream os;
  os.precision(17);
  os << "{\"l_implicit\":" << implicit << ",\"l_spatial\":" << spatial << ",\"l_freq\":" << freq
     << ",\"l_explicit\":" << explicit_term << ",\"l_total\":" << total << ",\"alpha\":" << alpha
     << ",\"beta\":" << beta << "}";
  return os.str();
}

NoiseField gaussian_reference(Prng& rng, const NoiseField& translated_noise) {
  if (translated_noise.values.empty()) {
    throw std::invalid_argument("gaussian_reference: empty noise field");
  }
  return sample_gaussian(rng, translated_noise.height, translated_noise.width,
                         translated_noise.channels, translated_noise.mu_hat,
                         translated_noise.sigma_hat);
}

Var loss_implicit(Var denoised, Var ground_truth) {
  if (!denoised.value().same_shape(ground_truth.value())) {
    throw std::invalid_argument("loss_implicit: shape mismatch " +
                                shape_to_string(denoised.value().shape()) + " vs " +
                                shape_to_string(ground_truth.value().shape()));
  }
  return l1_mean(denoised, ground_truth);
}

namespace {

// Reference values reshaped to the node's layout ([C,H,W] vs [1,C,H,W] share
// the same contiguous data).
Tensor reference_like(const Var& node, const NoiseField& reference, const char* op) {
  Tensor ref = reference.to_tensor();
  const Tensor& x = node.value();
  if (x.rank() == 4 && x.dim(0) == 1 && ref.numel() == x.numel()) {
    ref = Tensor(x.shape(), std::vector<double>(ref.data().begin(), ref.data().end()));
  }
  if (!ref.same_shape(x)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_to_string(x.shape()) + " vs reference " +
                                shape_to_string(reference.to_tensor().shape()));
  }
  return ref;
}

}  // namespace

Var loss_spatial(Var translated_noise, const NoiseField& reference) {
  return sorted_w1_to_reference(translated_noise,
                                reference_like(translated_noise, reference, "loss_spatial"));
}

Var loss_freq(Var translated_noise, const NoiseField& reference) {
  return spectral_w1_to_reference(translated_noise,
                                  reference_like(translated_noise, reference, "loss_freq"));
}

Var loss_explicit(Var spatial, Var freq, double beta) {
  if (beta < 0.0) throw std::invalid_argument("loss_explicit: beta must be >= 0");
  return add(spatial, scale(freq, beta));
}

Var loss_total(Var implicit, Var explicit_term, double alpha) {
  if (alpha < 0.0) throw std::invalid_argument("loss_total: alpha must be >= 0");
  return add(implicit, scale(explicit_term, alpha));
}

}  // namespace noisetrans
