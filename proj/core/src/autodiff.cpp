#include "metaviewer/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace metaviewer {

const Tensor& Var::value() const {
  if (tape_ == nullptr) throw std::logic_error("Var: not attached to a tape");
  return tape_->value(node_);
}

bool Var::requires_grad() const { return tape_ != nullptr && tape_->requires_grad(node_); }

Var BoundGroup::operator[](std::string_view name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw std::out_of_range(fmt::format("BoundGroup: no parameter '{}'", name));
  return it->second;
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, false, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(const std::string& id, Tensor value) {
  if (leaves_.contains(id)) throw std::invalid_argument(fmt::format("Tape: parameter '{}' bound twice", id));
  nodes_.push_back(Node{std::move(value), {}, {}, true, false, {}});
  leaves_.emplace(id, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

BoundGroup Tape::bind(const ParamGroup& group) {
  BoundGroup bound;
  for (const auto& [name, value] : group) bound.set(name, leaf(group.param_id(name), value));
  return bound;
}

BoundGroup Tape::bind_frozen(const ParamGroup& group) {
  BoundGroup bound;
  for (const auto& [name, value] : group) bound.set(name, constant(value));
  return bound;
}

void Tape::check_owned(const Var& v, const char* op) const {
  if (v.tape() != this) throw std::invalid_argument(fmt::format("{}: operand belongs to another tape", op));
}

Var Tape::record(const char* op, Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return record(op, std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(fn));
}

Var Tape::record(const char* op, Tensor value, std::span<const Var> inputs, BackwardFn fn) {
  if (!value.all_finite()) {
    throw NonFiniteError(fmt::format("{}: non-finite output, shape {}", op, shape_string(value.shape())));
  }
  Node node{std::move(value), {}, {}, false, false, {}};
  node.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    check_owned(in, op);
    node.inputs.push_back(in.node());
    node.requires_grad = node.requires_grad || nodes_[in.node()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::run_backward(const Var& loss) {
  check_owned(loss, "backward");
  const Tensor& lv = nodes_[loss.node()].value;
  if (lv.size() != 1) {
    throw ShapeError(fmt::format("backward: loss must be scalar, shape is {}", shape_string(lv.shape())));
  }
  if (!nodes_[loss.node()].requires_grad) throw std::invalid_argument("backward: loss is detached from the graph");

  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  Node& root = nodes_[loss.node()];
  root.grad = Tensor(lv.shape(), 1.0);
  root.has_grad = true;

  std::vector<const Tensor*> in_values;
  std::vector<Tensor*> in_grads;
  for (std::size_t i = loss.node() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    in_values.clear();
    in_grads.clear();
    for (std::size_t in : n.inputs) {
      Node& src = nodes_[in];
      in_values.push_back(&src.value);
      if (src.requires_grad) {
        if (!src.has_grad) {
          src.grad = Tensor(src.value.shape(), 0.0);
          src.has_grad = true;
        }
        in_grads.push_back(&src.grad);
      } else {
        in_grads.push_back(nullptr);
      }
    }
    n.backward(BackwardArgs{n.grad, n.value, in_values, in_grads});
  }
}

GradMap Tape::backward(const Var& loss, std::span<const ParamGroup* const> wrt) {
  run_backward(loss);
  GradMap out;
  for (const ParamGroup* group : wrt) {
    for (const auto& [name, _] : *group) {
      const std::string id = group->param_id(name);
      auto it = leaves_.find(id);
      if (it == leaves_.end()) continue;
      const Node& n = nodes_[it->second];
      if (n.has_grad) out.emplace(id, n.grad);
    }
  }
  return out;
}

GradMap Tape::backward(const Var& loss, std::initializer_list<const ParamGroup*> wrt) {
  return backward(loss, std::span<const ParamGroup* const>(wrt.begin(), wrt.size()));
}

GradMap Tape::backward(const Var& loss) {
  run_backward(loss);
  GradMap out;
  for (const auto& [id, node] : leaves_) {
    if (nodes_[node].has_grad) out.emplace(id, nodes_[node].grad);
  }
  return out;
}

GradMap finite_diff_grad(const GroupObjective& f, std::vector<ParamGroup> params, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("finite_diff_grad: eps must be positive");
  GradMap out;
  for (std::size_t g = 0; g < params.size(); ++g) {
    std::vector<std::string> names;
    for (const auto& [name, _] : params[g]) names.push_back(name);
    for (const std::string& name : names) {
      Tensor grad(params[g].at(name).shape(), 0.0);
      for (std::size_t i = 0; i < grad.size(); ++i) {
        double& coord = params[g].at(name)[i];
        const double saved = coord;
        coord = saved + eps;
        const double fp = f(params);
        coord = saved - eps;
        const double fm = f(params);
        coord = saved;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
          throw NonFiniteError(fmt::format("finite_diff_grad: objective non-finite at {}[{}]", params[g].param_id(name), i));
        }
        grad[i] = (fp - fm) / (2.0 * eps);
      }
      out.emplace(params[g].param_id(name), std::move(grad));
    }
  }
  return out;
}

double relative_error(const GradMap& a, const GradMap& b, double floor) {
  double scale = floor;
  double diff = 0.0;
  auto visit = [&](const GradMap& x, const GradMap& y) {
    for (const auto& [id, t] : x) {
      scale = std::max(scale, t.max_abs());
      auto it = y.find(id);
      for (std::size_t i = 0; i < t.size(); ++i) {
        const double other = it == y.end() ? 0.0 : it->second[i];
        diff = std::max(diff, std::abs(t[i] - other));
      }
    }
  };
  visit(a, b);
  visit(b, a);
  return diff / scale;
}

}  // namespace metaviewer
