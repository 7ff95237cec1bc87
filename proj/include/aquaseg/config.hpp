#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aquaseg/decoder.hpp"
#include "aquaseg/metrics.hpp"
#include "aquaseg/suim.hpp"
#include "aquaseg/trainer.hpp"

namespace aquaseg {

struct DatasetConfig {
  std::string root = "data";
  int channel_threshold = 127;
  std::int64_t min_pixels = 100;
  ExclusionMode exclusion = ExclusionMode::whole_mask;
  double split_ratio = 0.8;
  std::uint64_t split_seed = 0;
  friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;
};

struct EncoderConfig {
  EncoderKind kind = EncoderKind::toy;
  int embed_dim = 32;
  std::uint64_t seed = 0;
  int input_side = 256;
  PixelNormalization normalization;
  std::string external_dir;  ///< `.aqemb` files for kind = external
  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

struct PromptConfig {
  int max_offset = 20;
  bool outward_only = true;
  int num_frequencies = 0;  ///< 0: embed_dim / 2, so the Fourier vector already has width C
  double scale = 1.0;
  std::uint64_t seed = 0;
  friend bool operator==(const PromptConfig&, const PromptConfig&) = default;
};

enum class Precision { float32, float64 };

struct EvalConfig {
  double threshold = 0.0;
  IouMode iou_mode = IouMode::foreground;
  std::string checkpoint = "best";  ///< "best", "final", or a path
  friend bool operator==(const EvalConfig&, const EvalConfig&) = default;
};

struct ReportConfig {
  std::string baseline_csv;  ///< optional `task,dsc,iou` file
  friend bool operator==(const ReportConfig&, const ReportConfig&) = default;
};

struct SynthConfig {
  int n_images = 10;
  std::uint64_t seed = 0;
  int image_size = 256;
  friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

struct OutputConfig {
  std::string run_dir = "run";
  std::string cache_dir;  ///< empty: <run_dir>/cache
  friend bool operator==(const OutputConfig&, const OutputConfig&) = default;
};

struct PipelineConfig {
  DatasetConfig dataset;
  ClassMap classes = default_suim_classes();
  EncoderConfig encoder;
  PromptConfig prompt;
  DecoderConfig decoder;
  Precision precision = Precision::float64;
  TrainConfig train;
  EvalConfig eval;
  ReportConfig report;
  SynthConfig synth;
  OutputConfig output;
  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

/// Throws ValidationError naming the offending key.
void validate(const PipelineConfig& config);

/// Missing keys take defaults; unknown keys and wrongly typed values are rejected by dotted name.
PipelineConfig parse_config(const std::string& json_text, const std::string& source = "config");
PipelineConfig load_config(const std::filesystem::path& path);

/// Pretty-printed JSON with every key present; parse_config(serialize_config(c)) == c.
std::string serialize_config(const PipelineConfig& config);

/// Applies `a.b.c=value` to JSON text. The value is parsed as JSON when possible, else taken as a string.
std::string apply_override(const std::string& json_text, const std::string& assignment);

PerturbOptions perturb_options(const PromptConfig& c);
FourierSpec fourier_spec(const PromptConfig& c, int embed_dim);

}  // namespace aquaseg
