#pragma once

#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

#include "noisetrans/tensor.hpp"

namespace noisetrans {

class Graph;

/// Handle to a node on a Graph. Cheap to copy; valid for the graph's lifetime.
struct Var {
  Graph* graph = nullptr;
  std::int32_t id = -1;

  const Tensor& value() const;
  const std::vector<std::int64_t>& shape() const { return value().shape(); }
  bool valid() const { return graph != nullptr && id >= 0; }
};

/// Gradients of a scalar loss with respect to the requires_grad leaves of a
/// graph. Every requires_grad leaf is present, with a zero tensor when the
/// leaf does not influence the loss.
class Gradients {
 public:
  const Tensor& at(Var v) const;
  bool contains(Var v) const { return by_id_.count(v.id) != 0; }
  std::size_t size() const { return by_id_.size(); }

 private:
  friend class Graph;
  std::unordered_map<std::int32_t, Tensor> by_id_;
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so node ids
/// form a topological order and backward() is a single reverse sweep that
/// visits each node exactly once. A Graph must stay confined to one thread
/// for the duration of a forward + backward pass.
class Graph {
 public:
  struct BackwardCtx {
    Graph& graph;
    const std::vector<std::int32_t>& inputs;
    const Tensor& out_value;
    const Tensor& out_grad;

    bool needs(int slot) const;
    const Tensor& in(int slot) const;
    /// Gradient accumulator for input `slot`, zero-initialised on first use.
    /// Only legal when needs(slot) is true.
    Tensor& grad(int slot);

   private:
    friend class Graph;
    BackwardCtx(Graph& g, const std::vector<std::int32_t>& in, const Tensor& ov, const Tensor& og,
                std::vector<Tensor>& slots, std::vector<char>& present)
        : graph(g), inputs(in), out_value(ov), out_grad(og), slots_(slots), present_(present) {}
    std::vector<Tensor>& slots_;
    std::vector<char>& present_;
  };

  using Vjp = std::function<void(BackwardCtx&)>;

  Var leaf(Tensor value, bool requires_grad = false);

  /// Appends an op node. `vjp` accumulates input gradients from the output
  /// gradient; it may capture forward-pass state by value.
  Var op(const char* name, Tensor value, std::vector<std::int32_t> inputs, Vjp vjp);

  const Tensor& value(std::int32_t id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool needs_grad(std::int32_t id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  bool is_leaf(std::int32_t id) const { return !nodes_[static_cast<std::size_t>(id)].vjp; }
  std::size_t size() const { return nodes_.size(); }

  /// Exact reverse-mode gradients of a scalar loss node with respect to all
  /// requires_grad leaves. Throws if `loss` is not scalar.
  Gradients backward(Var loss);

 private:
  struct Node {
    Tensor value;
    std::vector<std::int32_t> inputs;
    Vjp vjp;                    // empty for leaves
    bool needs_grad = false;    // leaf flag, or any input needs grad
    bool requires_grad_leaf = false;
  };
  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Differentiable operations. All validate shapes and finiteness, and raise
// std::invalid_argument naming the offending shapes.

/// 2-D cross-correlation: input [N,Ci,H,W], kernel [Co,Ci,kh,kw], bias [Co].
Var conv2d(Var input, Var kernel, Var bias, int stride, int padding);

/// Each pixel replicated into a 2x2 block; the gradient sums each block.
Var upsample_nearest2x(Var input);

/// Splits channels in half and multiplies: [N,2C,H,W] -> [N,C,H,W].
Var simple_gate(Var input);

/// Per-position normalisation across channels, then an affine map by
/// gain/bias (both shaped [C]). Uses the population (1/C) variance.
Var layer_norm_channels(Var input, Var gain, Var bias, double eps);

Var add(Var a, Var b);          // equal shapes, or one operand scalar
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var abs(Var a);                 // sign(0) subgradient is 0
Var sum(Var a);                 // -> scalar
Var l1_mean(Var a, Var b);      // mean |a - b|, -> scalar

/// 1-Wasserstein distance between `field` and the constant `reference`
/// (equal shapes, [C,H,W] or [1,C,H,W]), computed channel-wise from order
/// statistics with 1/(H*W*C) normalisation. Gradients route through the
/// argsort permutation; tied pairs contribute zero.
Var sorted_w1_to_reference(Var field, const Tensor& reference);

/// Same distance taken between the sorted spectrum magnitudes of `field` and
/// of `reference` (all frequency bins included). Differentiable through the
/// magnitude and the transform; |F| = 0 bins get a zero subgradient.
Var spectral_w1_to_reference(Var field, const Tensor& reference);

// ---------------------------------------------------------------------------
// Finite-difference harness.

struct GradcheckReport {
  double max_rel_err = 0.0;
  std::int64_t checked = 0;
  std::int64_t excluded = 0;
  bool pass = false;
};

/// Compares backward() output against central differences per coordinate of
/// `x`. `f` must build a scalar node from a fresh leaf. `exclude` (optional,
/// same numel as x) marks coordinates to skip, e.g. |.| or sort ties.
GradcheckReport gradcheck(const std::function<Var(Graph&, Var)>& f, const Tensor& x,
                          double h = 1e-5, double tol = 1e-4,
                          const std::vector<char>* exclude = nullptr);

}  // namespace noisetrans
