#include "noisetrans/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace noisetrans {

const Tensor& Var::value() const {
  if (!valid()) throw std::logic_error("value() on an invalid Var");
  return graph->value(id);
}

const Tensor& Gradients::at(Var v) const {
  auto it = by_id_.find(v.id);
  if (it == by_id_.end()) {
    throw std::invalid_argument("no gradient recorded for node " + std::to_string(v.id) +
                                "; only requires_grad leaves receive gradients");
  }
  return it->second;
}

bool Graph::BackwardCtx::needs(int slot) const {
  return graph.needs_grad(inputs[static_cast<std::size_t>(slot)]);
}

const Tensor& Graph::BackwardCtx::in(int slot) const {
  return graph.value(inputs[static_cast<std::size_t>(slot)]);
}

Tensor& Graph::BackwardCtx::grad(int slot) {
  const std::int32_t id = inputs[static_cast<std::size_t>(slot)];
  if (!graph.needs_grad(id)) {
    throw std::logic_error("gradient requested for a node that does not need one");
  }
  auto idx = static_cast<std::size_t>(id);
  if (!present_[idx]) {
    slots_[idx] = Tensor(graph.value(id).shape());
    present_[idx] = 1;
  }
  return slots_[idx];
}

Var Graph::leaf(Tensor value, bool requires_grad) {
  check_finite(value, "leaf");
  Node n;
  n.value = std::move(value);
  n.needs_grad = requires_grad;
  n.requires_grad_leaf = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Graph::op(const char* name, Tensor value, std::vector<std::int32_t> inputs, Vjp vjp) {
  check_finite(value, name);
  Node n;
  n.value = std::move(value);
  n.inputs = std::move(inputs);
  for (std::int32_t in : n.inputs) {
    if (in < 0 || in >= static_cast<std::int32_t>(nodes_.size())) {
      throw std::logic_error(std::string(name) + ": input node id out of range");
    }
    n.needs_grad = n.needs_grad || nodes_[static_cast<std::size_t>(in)].needs_grad;
  }
  n.vjp = std::move(vjp);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

Gradients Graph::backward(Var loss) {
  if (loss.graph != this) throw std::invalid_argument("backward: loss belongs to another graph");
  if (loss.value().numel() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                shape_to_string(loss.value().shape()));
  }
  std::vector<Tensor> slots(nodes_.size());
  std::vector<char> present(nodes_.size(), 0);
  {
    auto idx = static_cast<std::size_t>(loss.id);
    slots[idx] = Tensor::full(nodes_[idx].value.shape(), 1.0);
    present[idx] = 1;
  }

  for (std::int32_t id = loss.id; id >= 0; --id) {
    auto idx = static_cast<std::size_t>(id);
    const Node& node = nodes_[idx];
    if (!present[idx] || !node.vjp || !node.needs_grad) continue;
    BackwardCtx ctx(*this, node.inputs, node.value, slots[idx], slots, present);
    node.vjp(ctx);
  }

  Gradients out;
  for (std::size_t idx = 0; idx < nodes_.size(); ++idx) {
    if (!nodes_[idx].requires_grad_leaf) continue;
    if (present[idx]) {
      out.by_id_.emplace(static_cast<std::int32_t>(idx), std::move(slots[idx]));
    } else {
      out.by_id_.emplace(static_cast<std::int32_t>(idx), Tensor(nodes_[idx].value.shape()));
    }
  }
  return out;
}

GradcheckReport gradcheck(const std::function<Var(Graph&, Var)>& f, const Tensor& x, double h,
                          double tol, const std::vector<char>* exclude) {
  Tensor analytic;
  {
    Graph g;
    Var leaf = g.leaf(x, true);
    Var loss = f(g, leaf);
    analytic = g.backward(loss).at(leaf);
  }

  auto eval = [&](const Tensor& point) {
    Graph g;
    Var leaf = g.leaf(point, false);
    return f(g, leaf).value().item();
  };

  GradcheckReport report;
  Tensor probe = x;
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    if (exclude && (*exclude)[static_cast<std::size_t>(i)]) {
      ++report.excluded;
      continue;
    }
    const double saved = probe[i];
    probe[i] = saved + h;
    const double fp = eval(probe);
    probe[i] = saved - h;
    const double fm = eval(probe);
    probe[i] = saved;
    const double numeric = (fp - fm) / (2.0 * h);
    const double a = analytic[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
    const double rel = std::abs(a - numeric) / denom;
    if (rel > report.max_rel_err) report.max_rel_err = rel;
    ++report.checked;
  }
  report.pass = report.checked > 0 && report.max_rel_err < tol;
  return report;
}

}  // namespace noisetrans
