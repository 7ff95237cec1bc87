#pragma once

// Drives the six CLI stages in-process against a scratch directory.

#include <sstream>
#include <string>
#include <vector>

#include "aquaseg/commands.hpp"
#include "test_util.hpp"

struct ChainRun {
  std::filesystem::path config;
  std::filesystem::path run;
  std::string last_error;

  ChainRun(const std::filesystem::path& dir, int image_size, std::int64_t train_steps) : run(dir / "run") {
    config = dir / "config.json";
    write_text(config, R"({"dataset": {"root": ")" + (dir / "data").generic_string() + R"("},
      "encoder": {"kind": "toy", "embed_dim": 32, "input_side": )" + std::to_string(image_size) + R"(},
      "decoder": {"embed_dim": 32, "num_heads": 4, "mlp_width": 64, "iou_hidden": 32},
      "train": {"learning_rate": 0.001, "batch_size": 4, "max_steps": )" + std::to_string(train_steps) + R"(,
                "checkpoint_every": 10},
      "synth": {"n_images": 10, "image_size": )" + std::to_string(image_size) + R"(},
      "output": {"run_dir": ")" + run.generic_string() + R"("}})");
  }

  int operator()(const std::string& command, std::vector<std::string> overrides = {}) {
    aquaseg::CommandOptions o;
    o.config_path = config;
    o.overrides = std::move(overrides);
    std::ostringstream log, err;
    const int code = aquaseg::run_command(command, o, log, err);
    last_error = err.str();
    return code;
  }

  int all() {
    for (const auto& c : aquaseg::kCommands)
      if (const int code = (*this)(c); code != 0) return code;
    return 0;
  }
};
