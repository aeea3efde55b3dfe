#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "metaviewer/params.hpp"
#include "metaviewer/tensor.hpp"

namespace metaviewer {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid while its tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  bool requires_grad() const;
  Tape* tape() const { return tape_; }
  std::size_t node() const { return node_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t node) : tape_(tape), node_(node) {}

  Tape* tape_ = nullptr;
  std::size_t node_ = 0;
};

/// Bound view of a ParamGroup on one tape: local name -> leaf Var.
class BoundGroup {
 public:
  BoundGroup() = default;
  Var operator[](std::string_view name) const;
  bool contains(std::string_view name) const { return vars_.find(name) != vars_.end(); }
  void set(std::string name, Var v) { vars_[std::move(name)] = v; }
  const std::map<std::string, Var, std::less<>>& vars() const { return vars_; }

 private:
  std::map<std::string, Var, std::less<>> vars_;
};

struct BackwardArgs {
  const Tensor& grad_out;
  const Tensor& out;
  std::span<const Tensor* const> in_values;
  /// null where the input does not require grad
  std::span<Tensor* const> in_grads;
};

using BackwardFn = std::function<void(const BackwardArgs&)>;

/// Reverse-mode tape. Nodes are appended in evaluation order, so a reverse
/// sweep is a valid topological order. Single-threaded.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Trainable leaf. `id` must be unique on this tape.
  Var leaf(const std::string& id, Tensor value);
  BoundGroup bind(const ParamGroup& group);
  /// Binds as constants: usable in forward passes, never differentiated.
  BoundGroup bind_frozen(const ParamGroup& group);

  /// Appends an op node. `op` names it for error messages.
  Var record(const char* op, Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(const char* op, Tensor value, std::span<const Var> inputs, BackwardFn fn);

  /// Gradients of a scalar `loss` for every parameter of `wrt` that the
  /// loss reaches. Parameters the loss does not reach are omitted.
  GradMap backward(const Var& loss, std::span<const ParamGroup* const> wrt);
  GradMap backward(const Var& loss, std::initializer_list<const ParamGroup*> wrt);
  /// Gradients for every reached leaf.
  GradMap backward(const Var& loss);

  const Tensor& value(std::size_t node) const { return nodes_[node].value; }
  bool requires_grad(std::size_t node) const { return nodes_[node].requires_grad; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    bool has_grad = false;
    Tensor grad;
  };

  void run_backward(const Var& loss);
  void check_owned(const Var& v, const char* op) const;

  std::vector<Node> nodes_;
  std::map<std::string, std::size_t, std::less<>> leaves_;
};

/// Central differences (f(p + eps e) - f(p - eps e)) / 2 eps for every
/// coordinate of every group. Keys cover all coordinates, zeros included.
using GroupObjective = std::function<double(std::span<const ParamGroup>)>;
GradMap finite_diff_grad(const GroupObjective& f, std::vector<ParamGroup> params, double eps);

/// max_i |a_i - b_i| / max(|a|_inf, |b|_inf, floor) over the union of keys.
double relative_error(const GradMap& a, const GradMap& b, double floor = 1e-12);

}  // namespace metaviewer
