#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "metaviewer/tensor.hpp"

namespace metaviewer {

enum class GroupKind { meta, base, embed, head };

struct GroupTag {
  GroupKind kind = GroupKind::meta;
  std::optional<std::size_t> view;

  std::string to_string() const;
  friend bool operator==(const GroupTag&, const GroupTag&) = default;
};

/// Named trainable tensors sharing one tag. Entries are addressed by a local
/// name ("fc0.weight"); the graph-wide parameter id is `prefix + "." + name`,
/// so two groups holding the same layer layout never collide as long as
/// their prefixes differ.
class ParamGroup {
 public:
  using Storage = std::map<std::string, Tensor, std::less<>>;

  ParamGroup() = default;
  ParamGroup(GroupTag tag, std::string prefix) : tag_(std::move(tag)), prefix_(std::move(prefix)) {}

  const GroupTag& tag() const { return tag_; }
  const std::string& prefix() const { return prefix_; }
  std::string param_id(std::string_view name) const;

  void add(std::string name, Tensor value);
  bool contains(std::string_view name) const { return params_.find(name) != params_.end(); }
  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;

  std::size_t size() const { return params_.size(); }
  std::size_t numel() const;

  Storage::iterator begin() { return params_.begin(); }
  Storage::iterator end() { return params_.end(); }
  Storage::const_iterator begin() const { return params_.begin(); }
  Storage::const_iterator end() const { return params_.end(); }

  bool all_finite() const;

  friend bool operator==(const ParamGroup&, const ParamGroup&) = default;

 private:
  GroupTag tag_;
  std::string prefix_;
  Storage params_;
};

/// Gradient per parameter id. A missing key means the gradient is zero.
using GradMap = std::map<std::string, Tensor, std::less<>>;

/// Value-equal copy under a fresh prefix. No graph built on the copy can
/// route gradient into the source, and vice versa.
ParamGroup copy_detached(const ParamGroup& group);

/// `base` plus a process-unique suffix.
std::string fresh_prefix(std::string_view base);

/// Gradient of `group[name]` from `grads`, or zeros of the right shape.
Tensor gradient_of(const GradMap& grads, const ParamGroup& group, std::string_view name);

/// True when `grads` carries at least one entry belonging to `group`.
bool touches(const GradMap& grads, const ParamGroup& group);

}  // namespace metaviewer
