#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "noisetrans/graph.hpp"
#include "noisetrans/rng.hpp"

namespace noisetrans {

/// Named view of one learnable tensor inside a model.
struct ParamRef {
  std::string name;
  Tensor* tensor;
};

std::int64_t count_params(const std::vector<ParamRef>& params);

/// Cosine annealing: lr_final + (lr_init - lr_final) * (1 + cos(pi*step/total)) / 2.
double cosine_lr(std::int64_t step, std::int64_t total, double lr_init, double lr_final);

struct Conv2dLayer {
  Tensor weight;  // [Co,Ci,kh,kw]
  Tensor bias;    // [Co]
  int stride = 1;
  int padding = 0;

  Conv2dLayer() = default;
  Conv2dLayer(std::int64_t out_ch, std::int64_t in_ch, std::int64_t ksize, int stride, int padding);
  void init_uniform(Prng& rng);  // U(-1/sqrt(fan_in), 1/sqrt(fan_in))
  void collect(const std::string& prefix, std::vector<ParamRef>& out);
  Var apply(Graph& g, Var x, bool trainable, std::vector<Var>* bound) const;
};

/// Residual activation-free block with fresh Gaussian noise added to its
/// input features on every call:
///   y = x + proj(gate(expand(norm(x + eps)))),  eps ~ N(0, (sigma_tilde/255)^2).
/// The projection is zero-initialised, so an untrained block is the identity.
struct GiBlock {
  Tensor norm_gain;   // [C]
  Tensor norm_bias;   // [C]
  Conv2dLayer expand;  // C -> 2C, 3x3
  Conv2dLayer proj;    // C -> C, 1x1, zero-initialised
  double sigma_tilde = 100.0;  // injection level in 8-bit units
  double norm_eps = 1e-6;

  GiBlock() = default;
  GiBlock(std::int64_t channels, double sigma_tilde);
  void init(Prng& rng);
  void collect(const std::string& prefix, std::vector<ParamRef>& out);
  /// `injection` may be null only when sigma_tilde == 0.
  Var apply(Graph& g, Var x, Prng* injection, bool trainable, std::vector<Var>* bound) const;
};

struct TranslatorConfig {
  std::int64_t channels = 3;
  std::int64_t base_width = 4;
  std::int64_t depth = 1;  // number of 2x downsamples
  double sigma_tilde = 100.0;
};

/// Residual U-Net noise translator. The output convolution and every block
/// projection are zero-initialised, so a freshly constructed translator is a
/// bit-exact identity map.
class Translator {
 public:
  explicit Translator(TranslatorConfig cfg);
  void init(Prng& rng);

  const TranslatorConfig& config() const { return cfg_; }
  std::vector<ParamRef> params();
  std::vector<ParamRef> params() const;
  std::int64_t param_count() const;

  /// I_T = I + f(I). Input spatial extents must be divisible by 2^depth.
  Var forward(Graph& g, Var image, Prng* injection, bool trainable,
              std::vector<Var>* bound = nullptr) const;

 private:
  TranslatorConfig cfg_;
  Conv2dLayer stem_;
  struct Stage {
    GiBlock block_a;
    GiBlock block_b;
  };
  std::vector<Stage> encoder_;
  std::vector<Conv2dLayer> down_;
  Stage bottleneck_;
  std::vector<Conv2dLayer> up_;  // post-upsample width-halving convs
  std::vector<Stage> decoder_;
  Conv2dLayer out_;
};

struct DenoiserConfig {
  std::int64_t channels = 3;
  std::int64_t width = 32;
  std::int64_t middle_layers = 6;
};

/// Residual denoising CNN: predicts the noise and subtracts it. The output
/// convolution starts at zero, so an untrained denoiser returns its input.
class Denoiser {
 public:
  explicit Denoiser(DenoiserConfig cfg);
  void init(Prng& rng);

  const DenoiserConfig& config() const { return cfg_; }
  std::vector<ParamRef> params();
  std::vector<ParamRef> params() const;
  std::int64_t param_count() const;

  Var forward(Graph& g, Var image, bool trainable, std::vector<Var>* bound = nullptr) const;

 private:
  DenoiserConfig cfg_;
  Conv2dLayer stem_;
  std::vector<Conv2dLayer> middle_;  // width -> 2*width, gated back to width
  Conv2dLayer out_;
};

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// AdamW with decoupled weight decay:
///   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p).
class AdamW {
 public:
  AdamW(std::vector<ParamRef> params, AdamWConfig cfg = {});

  /// `grads` must align with the parameter list passed at construction.
  void step(const std::vector<Tensor>& grads, double lr);
  std::int64_t steps_taken() const { return steps_; }
  const std::vector<ParamRef>& params() const { return params_; }

 private:
  std::vector<ParamRef> params_;
  AdamWConfig cfg_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::int64_t steps_ = 0;
};

}  // namespace noisetrans
