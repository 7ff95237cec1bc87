#include "aquaseg/pipeline.hpp"

#include <algorithm>

namespace aquaseg {
namespace {

bool has_prefix(const std::string& name, const std::vector<std::string>& prefixes) {
  return std::any_of(prefixes.begin(), prefixes.end(),
                     [&name](const std::string& p) { return name.compare(0, p.size(), p) == 0; });
}

}  // namespace

std::vector<PartitionEntry> partition_parameters(const std::vector<std::string>& names, const PartitionRules& rules) {
  std::vector<PartitionEntry> out;
  out.reserve(names.size());
  bool any_trainable = false;
  for (const auto& name : names) {
    const bool frozen = has_prefix(name, rules.frozen_prefixes);
    const bool trainable = has_prefix(name, rules.trainable_prefixes);
    if (frozen == trainable)
      throw ValidationError("parameter " + name + (frozen ? " is in both the frozen and trainable sets"
                                                          : " is in neither the frozen nor the trainable set"));
    any_trainable = any_trainable || trainable;
    out.push_back({name, trainable ? ParameterRole::trainable : ParameterRole::frozen});
  }
  if (!any_trainable) throw ValidationError("no trainable parameters");
  return out;
}

}  // namespace aquaseg
