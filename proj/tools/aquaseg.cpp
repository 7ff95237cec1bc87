#include <iostream>

#include <CLI11.hpp>

#include "aquaseg/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Box-prompted underwater segmentation: fine-tune a mask decoder on cached image embeddings."};
  app.require_subcommand(1);

  aquaseg::CommandOptions opts;
  std::string config;
  std::uint64_t seed = 0;
  std::string out;

  const std::map<std::string, std::string> help{
      {"synth", "render a synthetic SUIM-format dataset"},
      {"preprocess", "scan the dataset, extract targets, write the manifest and splits"},
      {"embed", "compute or import frozen image embeddings into the cache"},
      {"train", "fine-tune the mask decoder"},
      {"eval", "score a checkpoint on the test split"},
      {"report", "render the comparison report"},
  };
  for (const auto& name : aquaseg::kCommands) {
    auto* sub = app.add_subcommand(name, help.at(name));
    sub->add_option("--config", config, "pipeline config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the stage's seed");
    sub->add_option("--out", out, name == "synth" ? "dataset directory to write" : "run directory");
    sub->add_flag("--force", opts.force, "allow writing into a non-empty directory");
    sub->add_option("--set", opts.overrides, "override a config key, e.g. train.max_steps=20")->take_all();
  }

  CLI11_PARSE(app, argc, argv);

  const auto* sub = app.get_subcommands().front();
  opts.config_path = config;
  if (sub->count("--seed") > 0) opts.seed = seed;
  if (sub->count("--out") > 0) opts.out = out;
  return aquaseg::run_command(sub->get_name(), opts, std::cout, std::cerr);
}
