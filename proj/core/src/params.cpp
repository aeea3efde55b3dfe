#include "metaviewer/params.hpp"

#include <atomic>

#include <fmt/format.h>

namespace metaviewer {

std::string GroupTag::to_string() const {
  const char* name = "meta";
  switch (kind) {
    case GroupKind::meta: name = "meta"; break;
    case GroupKind::base: name = "base"; break;
    case GroupKind::embed: name = "embed"; break;
    case GroupKind::head: name = "head"; break;
  }
  return view ? fmt::format("{}({})", name, *view) : std::string(name);
}

std::string ParamGroup::param_id(std::string_view name) const { return fmt::format("{}.{}", prefix_, name); }

void ParamGroup::add(std::string name, Tensor value) {
  auto [it, inserted] = params_.emplace(std::move(name), std::move(value));
  if (!inserted) throw std::invalid_argument(fmt::format("ParamGroup {}: duplicate parameter '{}'", prefix_, it->first));
}

Tensor& ParamGroup::at(std::string_view name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range(fmt::format("ParamGroup {}: no parameter '{}'", prefix_, name));
  return it->second;
}

const Tensor& ParamGroup::at(std::string_view name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range(fmt::format("ParamGroup {}: no parameter '{}'", prefix_, name));
  return it->second;
}

std::size_t ParamGroup::numel() const {
  std::size_t n = 0;
  for (const auto& [_, t] : params_) n += t.size();
  return n;
}

bool ParamGroup::all_finite() const {
  for (const auto& [_, t] : params_) {
    if (!t.all_finite()) return false;
  }
  return true;
}

std::string fresh_prefix(std::string_view base) {
  static std::atomic<std::uint64_t> counter{0};
  return fmt::format("{}~copy{}", base, counter.fetch_add(1));
}

ParamGroup copy_detached(const ParamGroup& group) {
  ParamGroup copy(group.tag(), fresh_prefix(group.prefix()));
  for (const auto& [name, value] : group) copy.add(name, value);
  return copy;
}

Tensor gradient_of(const GradMap& grads, const ParamGroup& group, std::string_view name) {
  auto it = grads.find(group.param_id(name));
  if (it != grads.end()) return it->second;
  return Tensor(group.at(name).shape(), 0.0);
}

bool touches(const GradMap& grads, const ParamGroup& group) {
  for (const auto& [name, _] : group) {
    if (grads.contains(group.param_id(name))) return true;
  }
  return false;
}

}  // namespace metaviewer
