#pragma once

#include <string>

#include "noisetrans/graph.hpp"
#include "noisetrans/rng.hpp"

namespace noisetrans {

/// Scalar components of one training step. The composition identities
///   explicit_term == spatial + beta * freq
///   total == implicit + alpha * explicit_term
/// hold exactly because both are evaluated from the same expressions.
struct LossBreakdown {
  double implicit = 0.0;
  double spatial = 0.0;
  double freq = 0.0;
  double explicit_term = 0.0;
  double total = 0.0;
  double alpha = 0.0;
  double beta = 0.0;

  std::string to_json() const;  // one compact object, for the training log
};

LossBreakdown make_breakdown(double implicit, double spatial, double freq, double alpha,
                             double beta);

/// I.i.d. Gaussian reference field with the empirical moments of the
/// translated noise. The reference is a constant in differentiation: no
/// gradient flows into the moments.
NoiseField gaussian_reference(Prng& rng, const NoiseField& translated_noise);

/// Mean L1 between the denoised output and the clean target.
Var loss_implicit(Var denoised, Var ground_truth);

/// Order-statistics 1-Wasserstein distance between the translated noise and
/// the Gaussian reference, differentiable w.r.t. the noise field.
Var loss_spatial(Var translated_noise, const NoiseField& reference);

/// Same distance between the sorted spectrum magnitudes of the two fields
/// (all frequency bins included).
Var loss_freq(Var translated_noise, const NoiseField& reference);

Var loss_explicit(Var spatial, Var freq, double beta);
Var loss_total(Var implicit, Var explicit_term, double alpha);

}  // namespace noisetrans
