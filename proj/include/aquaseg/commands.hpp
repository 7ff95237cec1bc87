#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "aquaseg/config.hpp"

namespace aquaseg {

enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,
  kExitMissingArtifact = 2,
  kExitDivergence = 3,
};

struct CommandOptions {
  std::filesystem::path config_path;
  std::optional<std::uint64_t> seed;   ///< overrides the invoked stage's seed key
  std::optional<std::string> out;      ///< synth: dataset.root; other stages: output.run_dir
  bool force = false;
  std::vector<std::string> overrides;  ///< `key.path=value`, applied before validation
};

inline const std::vector<std::string> kCommands{"synth", "preprocess", "embed", "train", "eval", "report"};

/// Fixed run-directory layout.
struct RunPaths {
  std::filesystem::path run;
  std::filesystem::path manifest_dir, cache_dir, checkpoints_dir, reports_dir, runrecords_dir;

  [[nodiscard]] std::filesystem::path manifest() const { return manifest_dir / "manifest.json"; }
  [[nodiscard]] std::filesystem::path summary() const { return manifest_dir / "summary.json"; }
  [[nodiscard]] std::filesystem::path checkpoint(const std::string& tag) const { return checkpoints_dir / (tag + ".ckpt"); }
  [[nodiscard]] std::filesystem::path history() const { return reports_dir / "train_history.csv"; }
  [[nodiscard]] std::filesystem::path metrics_json() const { return reports_dir / "metrics.json"; }
  [[nodiscard]] std::filesystem::path metrics_csv() const { return reports_dir / "metrics.csv"; }
  [[nodiscard]] std::filesystem::path report(const std::string& ext) const { return reports_dir / ("report." + ext); }
};

/// AQUASEG_CACHE, when set, takes precedence over output.cache_dir.
RunPaths run_paths(const PipelineConfig& config);

/// Loads the config file, applies --set overrides and the --seed / --out flags for `command`, validates.
PipelineConfig resolve_config(const std::string& command, const CommandOptions& options);

void cmd_synth(const PipelineConfig& config, bool force, std::ostream& log);
void cmd_preprocess(const PipelineConfig& config, std::ostream& log);
void cmd_embed(const PipelineConfig& config, std::ostream& log);
void cmd_train(const PipelineConfig& config, std::ostream& log);
void cmd_eval(const PipelineConfig& config, std::ostream& log);
void cmd_report(const PipelineConfig& config, std::ostream& log);

/// Resolves the config, runs one command and maps failures to exit codes:
/// 1 validation, 2 missing upstream artifact, 3 divergence.
int run_command(const std::string& command, const CommandOptions& options, std::ostream& log, std::ostream& err);

}  // namespace aquaseg
