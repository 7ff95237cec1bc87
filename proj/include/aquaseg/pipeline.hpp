#pragma once

#include <memory>
#include <string>
#include <vector>

#include "aquaseg/decoder.hpp"
#include "aquaseg/encoder.hpp"
#include "aquaseg/prompt.hpp"

namespace aquaseg {

enum class ParameterRole { frozen, trainable };

struct PartitionEntry {
  std::string name;
  ParameterRole role;
};

struct PartitionRules {
  std::vector<std::string> frozen_prefixes{"encoder.", "prompt."};
  std::vector<std::string> trainable_prefixes{"decoder."};
};

/// Assigns every name to exactly one role by prefix. Throws ValidationError naming the first
/// parameter that matches neither or both sets, or if no parameter is trainable.
std::vector<PartitionEntry> partition_parameters(const std::vector<std::string>& names,
                                                 const PartitionRules& rules = {});

/// The assembled model: frozen image encoder (absent when embeddings come from an external
/// backbone), frozen prompt encoder, and the trainable mask decoder.
template <typename Scalar>
struct Pipeline {
  std::shared_ptr<const ImageEncoder> encoder;
  PromptEncoder prompt;
  DecoderConfig decoder_config;
  DecoderParams<Scalar> decoder;
  int input_side = 256;
};

template <typename Scalar>
std::vector<std::string> parameter_names(const Pipeline<Scalar>& p) {
  std::vector<std::string> names;
  if (p.encoder)
    for (const auto& t : p.encoder->parameters()) names.push_back(t.name);
  for (const auto& t : p.prompt.parameters()) names.push_back(t.name);
  visit_tensors([&names](const std::string& n, const MatrixX<Scalar>&) { names.push_back(n); }, p.decoder);
  return names;
}

template <typename Scalar>
std::vector<PartitionEntry> parameter_partition(const Pipeline<Scalar>& p) {
  return partition_parameters(parameter_names(p));
}

/// Copies of every frozen parameter's bytes, in parameter order, for freeze checks.
template <typename Scalar>
std::vector<std::vector<std::byte>> frozen_parameter_bytes(const Pipeline<Scalar>& p) {
  std::vector<std::vector<std::byte>> out;
  auto take = [&out](const std::vector<NamedTensorView>& views) {
    for (const auto& v : views) out.emplace_back(v.bytes.begin(), v.bytes.end());
  };
  if (p.encoder) take(p.encoder->parameters());
  take(p.prompt.parameters());
  return out;
}

}  // namespace aquaseg
