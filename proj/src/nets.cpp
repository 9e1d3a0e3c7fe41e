#include "noisetrans/nets.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace noisetrans {

std::int64_t count_params(const std::vector<ParamRef>& params) {
  std::int64_t total = 0;
  for (const ParamRef& p : params) total += p.tensor->numel();
  return total;
}

double cosine_lr(std::int64_t step, std::int64_t total, double lr_init, double lr_final) {
  if (total <= 0) throw std::invalid_argument("cosine_lr: total must be positive");
  if (step < 0 || step > total) {
    throw std::invalid_argument("cosine_lr: step " + std::to_string(step) + " outside [0, " +
                                std::to_string(total) + "]");
  }
  const double phase = std::numbers::pi * static_cast<double>(step) / static_cast<double>(total);
  return lr_final + 0.5 * (lr_init - lr_final) * (1.0 + std::cos(phase));
}

Conv2dLayer::Conv2dLayer(std::int64_t out_ch, std::int64_t in_ch, std::int64_t ksize, int stride,
                         int padding)
    : weight({out_ch, in_ch, ksize, ksize}), bias({out_ch}), stride(stride), padding(padding) {}

void Conv2dLayer::init_uniform(Prng& rng) {
  const double fan_in =
      static_cast<double>(weight.dim(1) * weight.dim(2) * weight.dim(3));
  const double bound = 1.0 / std::sqrt(fan_in);
  for (auto& w : weight.data()) w = rng.uniform(-bound, bound);
  for (auto& b : bias.data()) b = rng.uniform(-bound, bound);
}

void Conv2dLayer::collect(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".weight", &weight});
  out.push_back({prefix + ".bias", &bias});
}

Var Conv2dLayer::apply(Graph& g, Var x, bool trainable, std::vector<Var>* bound) const {
  Var w = g.leaf(weight, trainable);
  Var b = g.leaf(bias, trainable);
  if (bound) {
    bound->push_back(w);
    bound->push_back(b);
  }
  return conv2d(x, w, b, stride, padding);
}

GiBlock::GiBlock(std::int64_t channels, double sigma_tilde)
    : norm_gain({channels}),
      norm_bias({channels}),
      expand(2 * channels, channels, 3, 1, 1),
      proj(channels, channels, 1, 1, 0),
      sigma_tilde(sigma_tilde) {
  norm_gain.fill(1.0);
}

void GiBlock::init(Prng& rng) {
  norm_gain.fill(1.0);
  norm_bias.fill(0.0);
  expand.init_uniform(rng);
  proj.weight.fill(0.0);  // identity block until trained
  proj.bias.fill(0.0);
}

void GiBlock::collect(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".norm_gain", &norm_gain});
  out.push_back({prefix + ".norm_bias", &norm_bias});
  expand.collect(prefix + ".expand", out);
  proj.collect(prefix + ".proj", out);
}

Var GiBlock::apply(Graph& g, Var x, Prng* injection, bool trainable,
                   std::vector<Var>* bound) const {
  Var gain = g.leaf(norm_gain, trainable);
  Var bias = g.leaf(norm_bias, trainable);
  if (bound) {
    bound->push_back(gain);
    bound->push_back(bias);
  }
  Var h = x;
  if (sigma_tilde > 0.0) {
    if (injection == nullptr) {
      throw std::invalid_argument("GiBlock: injection generator required when sigma_tilde > 0");
    }
    const double sigma = sigma_tilde / 255.0;
    Tensor eps(x.value().shape());
    for (auto& v : eps.data()) v = injection->normal(0.0, sigma);
    h = add(h, g.leaf(std::move(eps), false));
  }
  h = layer_norm_channels(h, gain, bias, norm_eps);
  h = expand.apply(g, h, trainable, bound);
  h = simple_gate(h);
  h = proj.apply(g, h, trainable, bound);
  return add(x, h);
}

Translator::Translator(TranslatorConfig cfg) : cfg_(cfg) {
  if (cfg_.channels < 1 || cfg_.base_width < 1 || cfg_.depth < 0) {
    throw std::invalid_argument("Translator: invalid configuration");
  }
  stem_ = Conv2dLayer(cfg_.base_width, cfg_.channels, 3, 1, 1);
  std::int64_t width = cfg_.base_width;
  for (std::int64_t d = 0; d < cfg_.depth; ++d) {
    encoder_.push_back({GiBlock(width, cfg_.sigma_tilde), GiBlock(width, cfg_.sigma_tilde)});
    // 2x2 stride-2 convolution tiles even extents exactly while doubling width.
    down_.emplace_back(2 * width, width, 2, 2, 0);
    width *= 2;
  }
  bottleneck_ = {GiBlock(width, cfg_.sigma_tilde), GiBlock(width, cfg_.sigma_tilde)};
  for (std::int64_t d = cfg_.depth - 1; d >= 0; --d) {
    up_.emplace_back(width / 2, width, 3, 1, 1);
    width /= 2;
    decoder_.push_back({GiBlock(width, cfg_.sigma_tilde), GiBlock(width, cfg_.sigma_tilde)});
  }
  out_ = Conv2dLayer(cfg_.channels, cfg_.base_width, 3, 1, 1);
}

void Translator::init(Prng& rng) {
  stem_.init_uniform(rng);
  for (auto& s : encoder_) {
    s.block_a.init(rng);
    s.block_b.init(rng);
  }
  for (auto& c : down_) c.init_uniform(rng);
  bottleneck_.block_a.init(rng);
  bottleneck_.block_b.init(rng);
  for (auto& c : up_) c.init_uniform(rng);
  for (auto& s : decoder_) {
    s.block_a.init(rng);
    s.block_b.init(rng);
  }
  out_.weight.fill(0.0);  // identity translation until trained
  out_.bias.fill(0.0);
}

std::vector<ParamRef> Translator::params() {
  std::vector<ParamRef> out;
  stem_.collect("stem", out);
  for (std::size_t d = 0; d < encoder_.size(); ++d) {
    const std::string p = "enc" + std::to_string(d);
    encoder_[d].block_a.collect(p + ".block_a", out);
    encoder_[d].block_b.collect(p + ".block_b", out);
    down_[d].collect(p + ".down", out);
  }
  bottleneck_.block_a.collect("bottleneck.block_a", out);
  bottleneck_.block_b.collect("bottleneck.block_b", out);
  for (std::size_t d = 0; d < decoder_.size(); ++d) {
    const std::string p = "dec" + std::to_string(d);
    up_[d].collect(p + ".up", out);
    decoder_[d].block_a.collect(p + ".block_a", out);
    decoder_[d].block_b.collect(p + ".block_b", out);
  }
  out_.collect("out", out);
  return out;
}

std::vector<ParamRef> Translator::params() const {
  return const_cast<Translator*>(this)->params();
}

std::int64_t Translator::param_count() const { return count_params(params()); }

Var Translator::forward(Graph& g, Var image, Prng* injection, bool trainable,
                        std::vector<Var>* bound) const {
  const Tensor& in = image.value();
  if (in.rank() != 4 || in.dim(1) != cfg_.channels) {
    throw std::invalid_argument("Translator: expected [N," + std::to_string(cfg_.channels) +
                                ",H,W], got " + shape_to_string(in.shape()));
  }
  const std::int64_t div = std::int64_t{1} << cfg_.depth;
  if (in.dim(2) % div != 0 || in.dim(3) % div != 0) {
    throw std::invalid_argument("Translator: spatial extents of " + shape_to_string(in.shape()) +
                                " must be divisible by " + std::to_string(div));
  }

  Var h = stem_.apply(g, image, trainable, bound);
  std::vector<Var> skips;
  for (std::size_t d = 0; d < encoder_.size(); ++d) {
    h = encoder_[d].block_a.apply(g, h, injection, trainable, bound);
    h = encoder_[d].block_b.apply(g, h, injection, trainable, bound);
    skips.push_back(h);
    h = down_[d].apply(g, h, trainable, bound);
  }
  h = bottleneck_.block_a.apply(g, h, injection, trainable, bound);
  h = bottleneck_.block_b.apply(g, h, injection, trainable, bound);
  for (std::size_t d = 0; d < decoder_.size(); ++d) {
    h = upsample_nearest2x(h);
    h = up_[d].apply(g, h, trainable, bound);
    h = add(h, skips[skips.size() - 1 - d]);
    h = decoder_[d].block_a.apply(g, h, injection, trainable, bound);
    h = decoder_[d].block_b.apply(g, h, injection, trainable, bound);
  }
  Var residual = out_.apply(g, h, trainable, bound);
  return add(image, residual);
}

Denoiser::Denoiser(DenoiserConfig cfg) : cfg_(cfg) {
  if (cfg_.channels < 1 || cfg_.width < 1 || cfg_.middle_layers < 0) {
    throw std::invalid_argument("Denoiser: invalid configuration");
  }
  stem_ = Conv2dLayer(cfg_.width, cfg_.channels, 3, 1, 1);
  for (std::int64_t k = 0; k < cfg_.middle_layers; ++k) {
    middle_.emplace_back(2 * cfg_.width, cfg_.width, 3, 1, 1);
  }
  out_ = Conv2dLayer(cfg_.channels, cfg_.width, 3, 1, 1);
}

void Denoiser::init(Prng& rng) {
  stem_.init_uniform(rng);
  for (auto& c : middle_) c.init_uniform(rng);
  // A freshly constructed (un-inited) denoiser keeps the zero output conv and
  // returns its input; training starts from a proper fan-in init so gradients
  // reach the body from the first step.
  out_.init_uniform(rng);
}

std::vector<ParamRef> Denoiser::params() {
  std::vector<ParamRef> out;
  stem_.collect("stem", out);
  for (std::size_t k = 0; k < middle_.size(); ++k) {
    middle_[k].collect("mid" + std::to_string(k), out);
  }
  out_.collect("out", out);
  return out;
}

std::vector<ParamRef> Denoiser::params() const { return const_cast<Denoiser*>(this)->params(); }

std::int64_t Denoiser::param_count() const { return count_params(params()); }

Var Denoiser::forward(Graph& g, Var image, bool trainable, std::vector<Var>* bound) const {
  const Tensor& in = image.value();
  if (in.rank() != 4 || in.dim(1) != cfg_.channels) {
    throw std::invalid_argument("Denoiser: expected [N," + std::to_string(cfg_.channels) +
                                ",H,W], got " + shape_to_string(in.shape()));
  }
  Var h = stem_.apply(g, image, trainable, bound);
  for (const auto& conv : middle_) {
    // Residual gated layer; plain stacked gates shrink feature scale
    // geometrically and stall training.
    h = add(h, simple_gate(conv.apply(g, h, trainable, bound)));
  }
  Var residual = out_.apply(g, h, trainable, bound);
  return sub(image, residual);
}

AdamW::AdamW(std::vector<ParamRef> params, AdamWConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const ParamRef& p : params_) {
    m_.emplace_back(p.tensor->shape());
    v_.emplace_back(p.tensor->shape());
  }
}

void AdamW::step(const std::vector<Tensor>& grads, double lr) {
  if (grads.size() != params_.size()) {
    throw std::invalid_argument("AdamW::step: expected " + std::to_string(params_.size()) +
                                " gradients, got " + std::to_string(grads.size()));
  }
  ++steps_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = *params_[i].tensor;
    const Tensor& g = grads[i];
    if (!p.same_shape(g)) {
      throw std::invalid_argument("AdamW::step: gradient shape " + shape_to_string(g.shape()) +
                                  " does not match parameter " + params_[i].name + " " +
                                  shape_to_string(p.shape()));
    }
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::int64_t j = 0; j < p.numel(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      p[j] -= lr * (m_hat / (std::sqrt(v_hat) + cfg_.eps) + cfg_.weight_decay * p[j]);
    }
  }
}

}  // namespace noisetrans
