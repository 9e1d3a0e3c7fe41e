#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "noisetrans/graph.hpp"
#include "noisetrans/spectral.hpp"

namespace noisetrans {

namespace {

void require_same_graph(std::initializer_list<Var> vars, const char* op) {
  const Graph* g = vars.begin()->graph;
  for (const Var& v : vars) {
    if (!v.valid() || v.graph != g) {
      throw std::invalid_argument(std::string(op) + ": operands belong to different graphs");
    }
  }
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " +
                              shape_to_string(a.shape()) + " and " + shape_to_string(b.shape()));
}

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// --- convolution kernels -----------------------------------------------------

// out[y][x] += sum_ky sum_kx w[ky][kx] * in[y*s+ky-p][x*s+kx-p], one (co,ci)
// channel pair, generic stride/extent.
void conv_accum_generic(const double* in, double* out, const double* w, std::int64_t H,
                        std::int64_t W, std::int64_t Ho, std::int64_t Wo, std::int64_t kh,
                        std::int64_t kw, std::int64_t stride, std::int64_t pad) {
  for (std::int64_t ky = 0; ky < kh; ++ky) {
    for (std::int64_t kx = 0; kx < kw; ++kx) {
      const double wk = w[ky * kw + kx];
      if (wk == 0.0) continue;
      for (std::int64_t yo = 0; yo < Ho; ++yo) {
        const std::int64_t yi = yo * stride + ky - pad;
        if (yi < 0 || yi >= H) continue;
        const double* irow = in + yi * W;
        double* orow = out + yo * Wo;
        for (std::int64_t xo = 0; xo < Wo; ++xo) {
          const std::int64_t xi = xo * stride + kx - pad;
          if (xi < 0 || xi >= W) continue;
          orow[xo] += wk * irow[xi];
        }
      }
    }
  }
}

// Fast path for the hot 3x3 / stride 1 / pad 1 configuration: all three
// column taps fused into one vectorisable row sweep.
void conv_accum_3x3_s1p1(const double* in, double* out, const double* w, std::int64_t H,
                         std::int64_t W) {
  for (std::int64_t y = 0; y < H; ++y) {
    double* orow = out + y * W;
    for (std::int64_t ky = 0; ky < 3; ++ky) {
      const std::int64_t yy = y + ky - 1;
      if (yy < 0 || yy >= H) continue;
      const double* irow = in + yy * W;
      const double w0 = w[ky * 3], w1 = w[ky * 3 + 1], w2 = w[ky * 3 + 2];
      for (std::int64_t x = 1; x < W - 1; ++x) {
        orow[x] += w0 * irow[x - 1] + w1 * irow[x] + w2 * irow[x + 1];
      }
      orow[0] += w1 * irow[0] + w2 * irow[1];
      orow[W - 1] += w0 * irow[W - 2] + w1 * irow[W - 1];
    }
  }
}

// Same sweep feeding two output planes at once, so each input row is loaded
// once per pair.
void conv_accum_3x3_s1p1_x2(const double* in, double* out_a, double* out_b, const double* wa,
                            const double* wb, std::int64_t H, std::int64_t W) {
  for (std::int64_t y = 0; y < H; ++y) {
    double* ra = out_a + y * W;
    double* rb = out_b + y * W;
    for (std::int64_t ky = 0; ky < 3; ++ky) {
      const std::int64_t yy = y + ky - 1;
      if (yy < 0 || yy >= H) continue;
      const double* irow = in + yy * W;
      const double a0 = wa[ky * 3], a1 = wa[ky * 3 + 1], a2 = wa[ky * 3 + 2];
      const double b0 = wb[ky * 3], b1 = wb[ky * 3 + 1], b2 = wb[ky * 3 + 2];
      for (std::int64_t x = 1; x < W - 1; ++x) {
        const double l = irow[x - 1], c = irow[x], r = irow[x + 1];
        ra[x] += a0 * l + a1 * c + a2 * r;
        rb[x] += b0 * l + b1 * c + b2 * r;
      }
      ra[0] += a1 * irow[0] + a2 * irow[1];
      rb[0] += b1 * irow[0] + b2 * irow[1];
      ra[W - 1] += a0 * irow[W - 2] + a1 * irow[W - 1];
      rb[W - 1] += b0 * irow[W - 2] + b1 * irow[W - 1];
    }
  }
}

// Two input planes accumulated into one output plane (used for grad-input,
// where the output-channel axis is the reduction).
void conv_accum2_3x3_s1p1(const double* in_a, const double* in_b, double* out, const double* wa,
                          const double* wb, std::int64_t H, std::int64_t W) {
  for (std::int64_t y = 0; y < H; ++y) {
    double* orow = out + y * W;
    for (std::int64_t ky = 0; ky < 3; ++ky) {
      const std::int64_t yy = y + ky - 1;
      if (yy < 0 || yy >= H) continue;
      const double* ra = in_a + yy * W;
      const double* rb = in_b + yy * W;
      const double a0 = wa[ky * 3], a1 = wa[ky * 3 + 1], a2 = wa[ky * 3 + 2];
      const double b0 = wb[ky * 3], b1 = wb[ky * 3 + 1], b2 = wb[ky * 3 + 2];
      for (std::int64_t x = 1; x < W - 1; ++x) {
        orow[x] += (a0 * ra[x - 1] + a1 * ra[x] + a2 * ra[x + 1]) +
                   (b0 * rb[x - 1] + b1 * rb[x] + b2 * rb[x + 1]);
      }
      orow[0] += a1 * ra[0] + a2 * ra[1] + b1 * rb[0] + b2 * rb[1];
      orow[W - 1] += a0 * ra[W - 2] + a1 * ra[W - 1] + b0 * rb[W - 2] + b1 * rb[W - 1];
    }
  }
}

// grad_w[ky][kx] += sum over output positions of gout * in, 3x3 / s1 / p1.
void conv_gradw_3x3_s1p1(const double* in, const double* gout, double* gw, std::int64_t H,
                         std::int64_t W) {
  for (std::int64_t ky = 0; ky < 3; ++ky) {
    double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0;
    for (std::int64_t y = 0; y < H; ++y) {
      const std::int64_t yy = y + ky - 1;
      if (yy < 0 || yy >= H) continue;
      const double* grow = gout + y * W;
      const double* irow = in + yy * W;
      double a0 = 0.0, a1 = 0.0, a2 = 0.0;
      for (std::int64_t x = 1; x < W - 1; ++x) {
        a0 += grow[x] * irow[x - 1];
        a1 += grow[x] * irow[x];
        a2 += grow[x] * irow[x + 1];
      }
      a1 += grow[0] * irow[0] + grow[W - 1] * irow[W - 1];
      a2 += grow[0] * irow[1];
      a0 += grow[W - 1] * irow[W - 2];
      acc0 += a0;
      acc1 += a1;
      acc2 += a2;
    }
    gw[ky * 3] += acc0;
    gw[ky * 3 + 1] += acc1;
    gw[ky * 3 + 2] += acc2;
  }
}

// Paired grad-weight sweep: one pass over the output gradient feeds the
// kernel gradients of two input channels.
void conv_gradw_3x3_s1p1_x2(const double* in_a, const double* in_b, const double* gout,
                            double* gw_a, double* gw_b, std::int64_t H, std::int64_t W) {
  for (std::int64_t ky = 0; ky < 3; ++ky) {
    double acc[6] = {0, 0, 0, 0, 0, 0};
    for (std::int64_t y = 0; y < H; ++y) {
      const std::int64_t yy = y + ky - 1;
      if (yy < 0 || yy >= H) continue;
      const double* grow = gout + y * W;
      const double* ra = in_a + yy * W;
      const double* rb = in_b + yy * W;
      double t[6] = {0, 0, 0, 0, 0, 0};
      for (std::int64_t x = 1; x < W - 1; ++x) {
        const double g = grow[x];
        t[0] += g * ra[x - 1];
        t[1] += g * ra[x];
        t[2] += g * ra[x + 1];
        t[3] += g * rb[x - 1];
        t[4] += g * rb[x];
        t[5] += g * rb[x + 1];
      }
      t[1] += grow[0] * ra[0] + grow[W - 1] * ra[W - 1];
      t[2] += grow[0] * ra[1];
      t[0] += grow[W - 1] * ra[W - 2];
      t[4] += grow[0] * rb[0] + grow[W - 1] * rb[W - 1];
      t[5] += grow[0] * rb[1];
      t[3] += grow[W - 1] * rb[W - 2];
      for (int i = 0; i < 6; ++i) acc[i] += t[i];
    }
    gw_a[ky * 3] += acc[0];
    gw_a[ky * 3 + 1] += acc[1];
    gw_a[ky * 3 + 2] += acc[2];
    gw_b[ky * 3] += acc[3];
    gw_b[ky * 3 + 1] += acc[4];
    gw_b[ky * 3 + 2] += acc[5];
  }
}

void conv_gradw_generic(const double* in, const double* gout, double* gw, std::int64_t H,
                        std::int64_t W, std::int64_t Ho, std::int64_t Wo, std::int64_t kh,
                        std::int64_t kw, std::int64_t stride, std::int64_t pad) {
  for (std::int64_t ky = 0; ky < kh; ++ky) {
    for (std::int64_t kx = 0; kx < kw; ++kx) {
      double acc = 0.0;
      for (std::int64_t yo = 0; yo < Ho; ++yo) {
        const std::int64_t yi = yo * stride + ky - pad;
        if (yi < 0 || yi >= H) continue;
        const double* grow = gout + yo * Wo;
        const double* irow = in + yi * W;
        for (std::int64_t xo = 0; xo < Wo; ++xo) {
          const std::int64_t xi = xo * stride + kx - pad;
          if (xi < 0 || xi >= W) continue;
          acc += grow[xo] * irow[xi];
        }
      }
      gw[ky * kw + kx] += acc;
    }
  }
}

// gin[yi][xi] += w[ky][kx] * gout[yo][xo] scattered over valid positions.
void conv_gradin_generic(const double* gout, double* gin, const double* w, std::int64_t H,
                         std::int64_t W, std::int64_t Ho, std::int64_t Wo, std::int64_t kh,
                         std::int64_t kw, std::int64_t stride, std::int64_t pad) {
  for (std::int64_t ky = 0; ky < kh; ++ky) {
    for (std::int64_t kx = 0; kx < kw; ++kx) {
      const double wk = w[ky * kw + kx];
      if (wk == 0.0) continue;
      for (std::int64_t yo = 0; yo < Ho; ++yo) {
        const std::int64_t yi = yo * stride + ky - pad;
        if (yi < 0 || yi >= H) continue;
        const double* grow = gout + yo * Wo;
        double* irow = gin + yi * W;
        for (std::int64_t xo = 0; xo < Wo; ++xo) {
          const std::int64_t xi = xo * stride + kx - pad;
          if (xi < 0 || xi >= W) continue;
          irow[xi] += wk * grow[xo];
        }
      }
    }
  }
}

// Stride-1 pad-1 grad-input is itself a 3x3 correlation with the flipped
// kernel, so it reuses the fused fast path.
void conv_gradin_3x3_s1p1(const double* gout, double* gin, const double* w, std::int64_t H,
                          std::int64_t W) {
  double flipped[9];
  for (int i = 0; i < 9; ++i) flipped[i] = w[8 - i];
  conv_accum_3x3_s1p1(gout, gin, flipped, H, W);
}

struct ConvDims {
  std::int64_t N, Ci, H, W, Co, kh, kw, Ho, Wo;
  std::int64_t stride, pad;
};

}  // namespace

Var conv2d(Var input, Var kernel, Var bias, int stride, int padding) {
  require_same_graph({input, kernel, bias}, "conv2d");
  const Tensor& in = input.value();
  const Tensor& k = kernel.value();
  const Tensor& b = bias.value();
  if (in.rank() != 4 || k.rank() != 4) shape_error("conv2d", in, k);
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  if (padding < 0) throw std::invalid_argument("conv2d: padding must be >= 0");

  ConvDims d{};
  d.N = in.dim(0);
  d.Ci = in.dim(1);
  d.H = in.dim(2);
  d.W = in.dim(3);
  d.Co = k.dim(0);
  d.kh = k.dim(2);
  d.kw = k.dim(3);
  d.stride = stride;
  d.pad = padding;
  if (k.dim(1) != d.Ci) {
    throw std::invalid_argument("conv2d: kernel expects " + std::to_string(k.dim(1)) +
                                " input channels but input " + shape_to_string(in.shape()) +
                                " has " + std::to_string(d.Ci) + " (kernel " +
                                shape_to_string(k.shape()) + ")");
  }
  if (b.rank() != 1 || b.dim(0) != d.Co) shape_error("conv2d bias", b, k);
  const std::int64_t hn = d.H + 2 * d.pad - d.kh;
  const std::int64_t wn = d.W + 2 * d.pad - d.kw;
  if (hn < 0 || wn < 0 || hn % d.stride != 0 || wn % d.stride != 0) {
    throw std::invalid_argument("conv2d: kernel " + shape_to_string(k.shape()) + " with stride " +
                                std::to_string(stride) + ", padding " + std::to_string(padding) +
                                " does not tile input " + shape_to_string(in.shape()));
  }
  d.Ho = hn / d.stride + 1;
  d.Wo = wn / d.stride + 1;

  const bool fast = (d.stride == 1 && d.kh == 3 && d.kw == 3 && d.pad == 1);
  Tensor out({d.N, d.Co, d.Ho, d.Wo});
  const auto in_plane = d.H * d.W;
  const auto out_plane = d.Ho * d.Wo;
  for (std::int64_t n = 0; n < d.N; ++n) {
    double* out_base = out.raw() + n * d.Co * out_plane;
    for (std::int64_t co = 0; co < d.Co; ++co) {
      std::fill(out_base + co * out_plane, out_base + (co + 1) * out_plane, b[co]);
    }
    if (fast) {
      // Input-channel-major sweep, two output planes per input-row load. Each
      // output element still accumulates in increasing ci order.
      for (std::int64_t ci = 0; ci < d.Ci; ++ci) {
        const double* ip = in.raw() + (n * d.Ci + ci) * in_plane;
        std::int64_t co = 0;
        for (; co + 1 < d.Co; co += 2) {
          conv_accum_3x3_s1p1_x2(ip, out_base + co * out_plane, out_base + (co + 1) * out_plane,
                                 k.raw() + (co * d.Ci + ci) * 9,
                                 k.raw() + ((co + 1) * d.Ci + ci) * 9, d.H, d.W);
        }
        if (co < d.Co) {
          conv_accum_3x3_s1p1(ip, out_base + co * out_plane, k.raw() + (co * d.Ci + ci) * 9, d.H,
                              d.W);
        }
      }
    } else {
      for (std::int64_t co = 0; co < d.Co; ++co) {
        double* op = out_base + co * out_plane;
        for (std::int64_t ci = 0; ci < d.Ci; ++ci) {
          conv_accum_generic(in.raw() + (n * d.Ci + ci) * in_plane, op,
                             k.raw() + (co * d.Ci + ci) * d.kh * d.kw, d.H, d.W, d.Ho, d.Wo, d.kh,
                             d.kw, d.stride, d.pad);
        }
      }
    }
  }

  auto vjp = [d, fast](Graph::BackwardCtx& ctx) {
    const Tensor& gout = ctx.out_grad;
    const auto in_plane = d.H * d.W;
    const auto out_plane = d.Ho * d.Wo;
    if (ctx.needs(2)) {
      Tensor& gb = ctx.grad(2);
      for (std::int64_t n = 0; n < d.N; ++n) {
        for (std::int64_t co = 0; co < d.Co; ++co) {
          const double* gp = gout.raw() + (n * d.Co + co) * out_plane;
          double acc = 0.0;
          for (std::int64_t i = 0; i < out_plane; ++i) acc += gp[i];
          gb[co] += acc;
        }
      }
    }
    if (ctx.needs(1)) {
      Tensor& gk = ctx.grad(1);
      const Tensor& in = ctx.in(0);
      for (std::int64_t n = 0; n < d.N; ++n) {
        for (std::int64_t co = 0; co < d.Co; ++co) {
          const double* gp = gout.raw() + (n * d.Co + co) * out_plane;
          if (fast) {
            std::int64_t ci = 0;
            for (; ci + 1 < d.Ci; ci += 2) {
              conv_gradw_3x3_s1p1_x2(in.raw() + (n * d.Ci + ci) * in_plane,
                                     in.raw() + (n * d.Ci + ci + 1) * in_plane, gp,
                                     gk.raw() + (co * d.Ci + ci) * 9,
                                     gk.raw() + (co * d.Ci + ci + 1) * 9, d.H, d.W);
            }
            if (ci < d.Ci) {
              conv_gradw_3x3_s1p1(in.raw() + (n * d.Ci + ci) * in_plane, gp,
                                  gk.raw() + (co * d.Ci + ci) * 9, d.H, d.W);
            }
          } else {
            for (std::int64_t ci = 0; ci < d.Ci; ++ci) {
              conv_gradw_generic(in.raw() + (n * d.Ci + ci) * in_plane, gp,
                                 gk.raw() + (co * d.Ci + ci) * d.kh * d.kw, d.H, d.W, d.Ho, d.Wo,
                                 d.kh, d.kw, d.stride, d.pad);
            }
          }
        }
      }
    }
    if (ctx.needs(0)) {
      Tensor& gin = ctx.grad(0);
      const Tensor& k = ctx.in(1);
      for (std::int64_t n = 0; n < d.N; ++n) {
        for (std::int64_t ci = 0; ci < d.Ci; ++ci) {
          double* gip = gin.raw() + (n * d.Ci + ci) * in_plane;
          if (fast) {
            // Correlation with the flipped kernel; two output-gradient planes
            // folded per sweep.
            std::int64_t co = 0;
            for (; co + 1 < d.Co; co += 2) {
              double fa[9], fb[9];
              const double* wa = k.raw() + (co * d.Ci + ci) * 9;
              const double* wb = k.raw() + ((co + 1) * d.Ci + ci) * 9;
              for (int i = 0; i < 9; ++i) {
                fa[i] = wa[8 - i];
                fb[i] = wb[8 - i];
              }
              conv_accum2_3x3_s1p1(gout.raw() + (n * d.Co + co) * out_plane,
                                   gout.raw() + (n * d.Co + co + 1) * out_plane, gip, fa, fb, d.H,
                                   d.W);
            }
            if (co < d.Co) {
              conv_gradin_3x3_s1p1(gout.raw() + (n * d.Co + co) * out_plane, gip,
                                   k.raw() + (co * d.Ci + ci) * 9, d.H, d.W);
            }
          } else {
            for (std::int64_t co = 0; co < d.Co; ++co) {
              conv_gradin_generic(gout.raw() + (n * d.Co + co) * out_plane, gip,
                                  k.raw() + (co * d.Ci + ci) * d.kh * d.kw, d.H, d.W, d.Ho, d.Wo,
                                  d.kh, d.kw, d.stride, d.pad);
            }
          }
        }
      }
    }
  };
  return input.graph->op("conv2d", std::move(out), {input.id, kernel.id, bias.id}, vjp);
}

Var upsample_nearest2x(Var input) {
  const Tensor& in = input.value();
  if (in.rank() != 4) {
    throw std::invalid_argument("upsample_nearest2x: expected [N,C,H,W], got " +
                                shape_to_string(in.shape()));
  }
  const std::int64_t N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  Tensor out({N, C, 2 * H, 2 * W});
  for (std::int64_t nc = 0; nc < N * C; ++nc) {
    const double* ip = in.raw() + nc * H * W;
    double* op = out.raw() + nc * 4 * H * W;
    for (std::int64_t y = 0; y < H; ++y) {
      for (std::int64_t x = 0; x < W; ++x) {
        const double v = ip[y * W + x];
        double* base = op + (2 * y) * (2 * W) + 2 * x;
        base[0] = v;
        base[1] = v;
        base[2 * W] = v;
        base[2 * W + 1] = v;
      }
    }
  }
  auto vjp = [N, C, H, W](Graph::BackwardCtx& ctx) {
    if (!ctx.needs(0)) return;
    Tensor& gin = ctx.grad(0);
    const Tensor& gout = ctx.out_grad;
    for (std::int64_t nc = 0; nc < N * C; ++nc) {
      double* gp = gin.raw() + nc * H * W;
      const double* op = gout.raw() + nc * 4 * H * W;
      for (std::int64_t y = 0; y < H; ++y) {
        for (std::int64_t x = 0; x < W; ++x) {
          const double* base = op + (2 * y) * (2 * W) + 2 * x;
          gp[y * W + x] += base[0] + base[1] + base[2 * W] + base[2 * W + 1];
        }
      }
    }
  };
  return input.graph->op("upsample_nearest2x", std::move(out), {input.id}, vjp);
}

Var simple_gate(Var input) {
  const Tensor& in = input.value();
  if (in.rank() != 4 || in.dim(1) % 2 != 0) {
    throw std::invalid_argument("simple_gate: needs an even channel count, got " +
                                shape_to_string(in.shape()));
  }
  const std::int64_t N = in.dim(0), C = in.dim(1) / 2, H = in.dim(2), W = in.dim(3);
  const std::int64_t plane = H * W;
  Tensor out({N, C, H, W});
  for (std::int64_t n = 0; n < N; ++n) {
    const double* a = in.raw() + n * 2 * C * plane;
    const double* b = a + C * plane;
    double* op = out.raw() + n * C * plane;
    for (std::int64_t i = 0; i < C * plane; ++i) op[i] = a[i] * b[i];
  }
  auto vjp = [N, C, plane](Graph::BackwardCtx& ctx) {
    if (!ctx.needs(0)) return;
    Tensor& gin = ctx.grad(0);
    const Tensor& in = ctx.in(0);
    const Tensor& gout = ctx.out_grad;
    for (std::int64_t n = 0; n < N; ++n) {
      const double* a = in.raw() + n * 2 * C * plane;
      const double* b = a + C * plane;
      double* ga = gin.raw() + n * 2 * C * plane;
      double* gb = ga + C * plane;
      const double* gp = gout.raw() + n * C * plane;
      for (std::int64_t i = 0; i < C * plane; ++i) {
        ga[i] += gp[i] * b[i];
        gb[i] += gp[i] * a[i];
      }
    }
  };
  return input.graph->op("simple_gate", std::move(out), {input.id}, vjp);
}

Var layer_norm_channels(Var input, Var gain, Var bias, double eps) {
  require_same_graph({input, gain, bias}, "layer_norm_channels");
  const Tensor& in = input.value();
  const Tensor& g = gain.value();
  const Tensor& b = bias.value();
  if (in.rank() != 4) {
    throw std::invalid_argument("layer_norm_channels: expected [N,C,H,W], got " +
                                shape_to_string(in.shape()));
  }
  if (eps <= 0.0) throw std::invalid_argument("layer_norm_channels: eps must be > 0");
  const std::int64_t N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  if (g.rank() != 1 || g.dim(0) != C || b.rank() != 1 || b.dim(0) != C) {
    shape_error("layer_norm_channels gain/bias", g, in);
  }
  const std::int64_t plane = H * W;

  Tensor out({N, C, H, W});
  Tensor xhat({N, C, H, W});
  Tensor inv_std({N, H, W});
  for (std::int64_t n = 0; n < N; ++n) {
    for (std::int64_t p = 0; p < plane; ++p) {
      double mean = 0.0;
      for (std::int64_t c = 0; c < C; ++c) mean += in.raw()[(n * C + c) * plane + p];
      mean /= static_cast<double>(C);
      double var = 0.0;
      for (std::int64_t c = 0; c < C; ++c) {
        const double d = in.raw()[(n * C + c) * plane + p] - mean;
        var += d * d;
      }
      var /= static_cast<double>(C);
      const double inv = 1.0 / std::sqrt(var + eps);
      inv_std.raw()[n * plane + p] = inv;
      for (std::int64_t c = 0; c < C; ++c) {
        const double xh = (in.raw()[(n * C + c) * plane + p] - mean) * inv;
        xhat.raw()[(n * C + c) * plane + p] = xh;
        out.raw()[(n * C + c) * plane + p] = g[c] * xh + b[c];
      }
    }
  }

  auto vjp = [N, C, plane, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                 Graph::BackwardCtx& ctx) {
    const Tensor& gout = ctx.out_grad;
    const Tensor& g = ctx.in(1);
    if (ctx.needs(2)) {
      Tensor& gb = ctx.grad(2);
      for (std::int64_t n = 0; n < N; ++n) {
        for (std::int64_t c = 0; c < C; ++c) {
          const double* gp = gout.raw() + (n * C + c) * plane;
          double acc = 0.0;
          for (std::int64_t p = 0; p < plane; ++p) acc += gp[p];
          gb[c] += acc;
        }
      }
    }
    if (ctx.needs(1)) {
      Tensor& gg = ctx.grad(1);
      for (std::int64_t n = 0; n < N; ++n) {
        for (std::int64_t c = 0; c < C; ++c) {
          const double* gp = gout.raw() + (n * C + c) * plane;
          const double* xp = xhat.raw() + (n * C + c) * plane;
          double acc = 0.0;
          for (std::int64_t p = 0; p < plane; ++p) acc += gp[p] * xp[p];
          gg[c] += acc;
        }
      }
    }
    if (ctx.needs(0)) {
      Tensor& gin = ctx.grad(0);
      for (std::int64_t n = 0; n < N; ++n) {
        for (std::int64_t p = 0; p < plane; ++p) {
          double mean_gy = 0.0;
          double mean_gy_xhat = 0.0;
          for (std::int64_t c = 0; c < C; ++c) {
            const double gy = gout.raw()[(n * C + c) * plane + p] * g[c];
            mean_gy += gy;
            mean_gy_xhat += gy * xhat.raw()[(n * C + c) * plane + p];
          }
          mean_gy /= static_cast<double>(C);
          mean_gy_xhat /= static_cast<double>(C);
          const double inv = inv_std.raw()[n * plane + p];
          for (std::int64_t c = 0; c < C; ++c) {
            const double gy = gout.raw()[(n * C + c) * plane + p] * g[c];
            const double xh = xhat.raw()[(n * C + c) * plane + p];
            gin.raw()[(n * C + c) * plane + p] += inv * (gy - mean_gy - xh * mean_gy_xhat);
          }
        }
      }
    }
  };
  return input.graph->op("layer_norm_channels", std::move(out), {input.id, gain.id, bias.id}, vjp);
}

namespace {

enum class Binary { Add, Sub, Mul };

Var binary_op(const char* name, Binary kind, Var a, Var b) {
  require_same_graph({a, b}, name);
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  const bool a_scalar = ta.numel() == 1 && !ta.same_shape(tb);
  const bool b_scalar = tb.numel() == 1 && !ta.same_shape(tb);
  if (!ta.same_shape(tb) && !a_scalar && !b_scalar) shape_error(name, ta, tb);

  const std::int64_t n = std::max(ta.numel(), tb.numel());
  Tensor out(a_scalar ? tb.shape() : ta.shape());
  for (std::int64_t i = 0; i < n; ++i) {
    const double x = a_scalar ? ta[0] : ta[i];
    const double y = b_scalar ? tb[0] : tb[i];
    out[i] = kind == Binary::Add ? x + y : (kind == Binary::Sub ? x - y : x * y);
  }

  auto vjp = [kind, a_scalar, b_scalar, n](Graph::BackwardCtx& ctx) {
    const Tensor& gout = ctx.out_grad;
    if (ctx.needs(0)) {
      Tensor& ga = ctx.grad(0);
      for (std::int64_t i = 0; i < n; ++i) {
        const double g = kind == Binary::Mul ? gout[i] * (b_scalar ? ctx.in(1)[0] : ctx.in(1)[i])
                                             : gout[i];
        ga[a_scalar ? 0 : i] += g;
      }
    }
    if (ctx.needs(1)) {
      Tensor& gb = ctx.grad(1);
      for (std::int64_t i = 0; i < n; ++i) {
        double g;
        if (kind == Binary::Mul) {
          g = gout[i] * (a_scalar ? ctx.in(0)[0] : ctx.in(0)[i]);
        } else if (kind == Binary::Sub) {
          g = -gout[i];
        } else {
          g = gout[i];
        }
        gb[b_scalar ? 0 : i] += g;
      }
    }
  };
  return a.graph->op(name, std::move(out), {a.id, b.id}, vjp);
}

}  // namespace

Var add(Var a, Var b) { return binary_op("add", Binary::Add, a, b); }
Var sub(Var a, Var b) { return binary_op("sub", Binary::Sub, a, b); }
Var mul(Var a, Var b) { return binary_op("mul", Binary::Mul, a, b); }

Var scale(Var a, double c) {
  const Tensor& ta = a.value();
  Tensor out(ta.shape());
  for (std::int64_t i = 0; i < ta.numel(); ++i) out[i] = c * ta[i];
  auto vjp = [c](Graph::BackwardCtx& ctx) {
    if (!ctx.needs(0)) return;
    Tensor& ga = ctx.grad(0);
    for (std::int64_t i = 0; i < ga.numel(); ++i) ga[i] += c * ctx.out_grad[i];
  };
  return a.graph->op("scale", std::move(out), {a.id}, vjp);
}

Var abs(Var a) {
  const Tensor& ta = a.value();
  Tensor out(ta.shape());
  for (std::int64_t i = 0; i < ta.numel(); ++i) out[i] = std::abs(ta[i]);
  auto vjp = [](Graph::BackwardCtx& ctx) {
    if (!ctx.needs(0)) return;
    Tensor& ga = ctx.grad(0);
    const Tensor& in = ctx.in(0);
    for (std::int64_t i = 0; i < ga.numel(); ++i) ga[i] += sign_of(in[i]) * ctx.out_grad[i];
  };
  return a.graph->op("abs", std::move(out), {a.id}, vjp);
}

Var sum(Var a) {
  const Tensor& ta = a.value();
  double acc = 0.0;
  for (double v : ta.data()) acc += v;
  auto vjp = [](Graph::BackwardCtx& ctx) {
    if (!ctx.needs(0)) return;
    Tensor& ga = ctx.grad(0);
    const double g = ctx.out_grad[0];
    for (std::int64_t i = 0; i < ga.numel(); ++i) ga[i] += g;
  };
  return a.graph->op("sum", Tensor::scalar(acc), {a.id}, vjp);
}

Var l1_mean(Var a, Var b) {
  require_same_graph({a, b}, "l1_mean");
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  if (!ta.same_shape(tb)) shape_error("l1_mean", ta, tb);
  const std::int64_t n = ta.numel();
  if (n == 0) throw std::invalid_argument("l1_mean: empty tensors");
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) acc += std::abs(ta[i] - tb[i]);
  auto vjp = [n](Graph::BackwardCtx& ctx) {
    const double g = ctx.out_grad[0] / static_cast<double>(n);
    const Tensor& ta = ctx.in(0);
    const Tensor& tb = ctx.in(1);
    const bool need_a = ctx.needs(0);
    const bool need_b = ctx.needs(1);
    for (std::int64_t i = 0; i < n; ++i) {
      const double s = sign_of(ta[i] - tb[i]) * g;
      if (need_a) ctx.grad(0)[i] += s;
      if (need_b) ctx.grad(1)[i] -= s;
    }
  };
  return a.graph->op("l1_mean", Tensor::scalar(acc / static_cast<double>(n)), {a.id, b.id}, vjp);
}

namespace {

struct FieldDims {
  std::int64_t C, H, W;
};

FieldDims field_dims(const char* op, const Tensor& t) {
  if (t.rank() == 3) return {t.dim(0), t.dim(1), t.dim(2)};
  if (t.rank() == 4 && t.dim(0) == 1) return {t.dim(1), t.dim(2), t.dim(3)};
  throw std::invalid_argument(std::string(op) + ": expected [C,H,W] or [1,C,H,W], got " +
                              shape_to_string(t.shape()));
}

std::vector<std::int32_t> argsort(const double* v, std::int64_t n) {
  std::vector<std::int32_t> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [v](std::int32_t a, std::int32_t b) { return v[a] < v[b]; });
  return idx;
}

}  // namespace

Var sorted_w1_to_reference(Var field, const Tensor& reference) {
  const Tensor& x = field.value();
  if (!x.same_shape(reference)) shape_error("sorted_w1_to_reference", x, reference);
  const FieldDims d = field_dims("sorted_w1_to_reference", x);
  const std::int64_t plane = d.H * d.W;
  const double norm = 1.0 / static_cast<double>(plane * d.C);

  double acc = 0.0;
  std::vector<std::int32_t> perms(static_cast<std::size_t>(d.C * plane));
  std::vector<signed char> signs(static_cast<std::size_t>(d.C * plane));
  for (std::int64_t c = 0; c < d.C; ++c) {
    const double* xp = x.raw() + c * plane;
    const double* rp = reference.raw() + c * plane;
    auto perm = argsort(xp, plane);
    std::vector<double> ref_sorted(rp, rp + plane);
    std::stable_sort(ref_sorted.begin(), ref_sorted.end());
    for (std::int64_t i = 0; i < plane; ++i) {
      const double diff = xp[perm[static_cast<std::size_t>(i)]] - ref_sorted[static_cast<std::size_t>(i)];
      acc += std::abs(diff);
      perms[static_cast<std::size_t>(c * plane + i)] = perm[static_cast<std::size_t>(i)];
      signs[static_cast<std::size_t>(c * plane + i)] = static_cast<signed char>(sign_of(diff));
    }
  }

  auto vjp = [d, plane, norm, perms = std::move(perms), signs = std::move(signs)](
                 Graph::BackwardCtx& ctx) {
    if (!ctx.needs(0)) return;
    Tensor& gin = ctx.grad(0);
    const double g = ctx.out_grad[0] * norm;
    for (std::int64_t c = 0; c < d.C; ++c) {
      double* gp = gin.raw() + c * plane;
      for (std::int64_t i = 0; i < plane; ++i) {
        const auto idx = static_cast<std::size_t>(c * plane + i);
        gp[perms[idx]] += static_cast<double>(signs[idx]) * g;
      }
    }
  };
  return field.graph->op("sorted_w1_to_reference", Tensor::scalar(acc * norm), {field.id}, vjp);
}

Var spectral_w1_to_reference(Var field, const Tensor& reference) {
  const Tensor& x = field.value();
  if (!x.same_shape(reference)) shape_error("spectral_w1_to_reference", x, reference);
  const FieldDims d = field_dims("spectral_w1_to_reference", x);
  const std::int64_t plane = d.H * d.W;
  const double norm = 1.0 / static_cast<double>(plane * d.C);

  double acc = 0.0;
  std::vector<spectral::cplx> spectra(static_cast<std::size_t>(d.C * plane));
  std::vector<std::int32_t> perms(static_cast<std::size_t>(d.C * plane));
  std::vector<signed char> signs(static_cast<std::size_t>(d.C * plane));
  for (std::int64_t c = 0; c < d.C; ++c) {
    auto fx = spectral::dft2_plane(
        std::span<const double>(x.raw() + c * plane, static_cast<std::size_t>(plane)), d.H, d.W);
    auto fr = spectral::dft2_plane(
        std::span<const double>(reference.raw() + c * plane, static_cast<std::size_t>(plane)), d.H,
        d.W);
    std::vector<double> mx(static_cast<std::size_t>(plane));
    std::vector<double> mr(static_cast<std::size_t>(plane));
    for (std::int64_t i = 0; i < plane; ++i) {
      mx[static_cast<std::size_t>(i)] = std::abs(fx[static_cast<std::size_t>(i)]);
      mr[static_cast<std::size_t>(i)] = std::abs(fr[static_cast<std::size_t>(i)]);
    }
    auto perm = argsort(mx.data(), plane);
    std::stable_sort(mr.begin(), mr.end());
    for (std::int64_t i = 0; i < plane; ++i) {
      const double diff = mx[perm[static_cast<std::size_t>(i)]] - mr[static_cast<std::size_t>(i)];
      acc += std::abs(diff);
      perms[static_cast<std::size_t>(c * plane + i)] = perm[static_cast<std::size_t>(i)];
      signs[static_cast<std::size_t>(c * plane + i)] = static_cast<signed char>(sign_of(diff));
    }
    std::copy(fx.begin(), fx.end(), spectra.begin() + static_cast<std::ptrdiff_t>(c * plane));
  }

  auto vjp = [d, plane, norm, spectra = std::move(spectra), perms = std::move(perms),
              signs = std::move(signs)](Graph::BackwardCtx& ctx) {
    if (!ctx.needs(0)) return;
    Tensor& gin = ctx.grad(0);
    const double g = ctx.out_grad[0] * norm;
    std::vector<spectral::cplx> cotangent(static_cast<std::size_t>(plane));
    for (std::int64_t c = 0; c < d.C; ++c) {
      std::fill(cotangent.begin(), cotangent.end(), spectral::cplx(0.0, 0.0));
      for (std::int64_t i = 0; i < plane; ++i) {
        const auto idx = static_cast<std::size_t>(c * plane + i);
        const double w = static_cast<double>(signs[idx]) * g;
        if (w == 0.0) continue;
        const auto bin = static_cast<std::size_t>(perms[idx]);
        const spectral::cplx f = spectra[static_cast<std::size_t>(c * plane) + bin];
        const double mag = std::max(std::abs(f), 1e-12);
        cotangent[bin] += f * (w / mag);
      }
      // d|F|/dn is the real part of the unnormalised adjoint transform.
      auto adj = spectral::idft2_plane(cotangent, d.H, d.W);
      double* gp = gin.raw() + c * plane;
      const double hw = static_cast<double>(plane);
      for (std::int64_t i = 0; i < plane; ++i) {
        gp[i] += hw * adj[static_cast<std::size_t>(i)].real();
      }
    }
  };
  return field.graph->op("spectral_w1_to_reference", Tensor::scalar(acc * norm), {field.id}, vjp);
}

}  // namespace noisetrans
