#include "aquaseg/commands.hpp"

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <map>
#include <memory>

#include <json.hpp>

#include "aquaseg/checkpoint.hpp"
#include "aquaseg/embedding_cache.hpp"
#include "aquaseg/io_util.hpp"
#include "aquaseg/manifest.hpp"
#include "aquaseg/synth.hpp"
#include "aquaseg/trainer.hpp"

namespace aquaseg {

namespace fs = std::filesystem;
using nlohmann::json;

RunPaths run_paths(const PipelineConfig& c) {
  RunPaths p;
  p.run = c.output.run_dir;
  p.manifest_dir = p.run / "manifest";
  p.checkpoints_dir = p.run / "checkpoints";
  p.reports_dir = p.run / "reports";
  p.runrecords_dir = p.run / "runrecords";
  if (const char* env = std::getenv("AQUASEG_CACHE"); env != nullptr && *env != '\0')
    p.cache_dir = env;
  else if (!c.output.cache_dir.empty())
    p.cache_dir = c.output.cache_dir;
  else
    p.cache_dir = p.run / "cache";
  return p;
}

PipelineConfig resolve_config(const std::string& command, const CommandOptions& o) {
  if (std::find(kCommands.begin(), kCommands.end(), command) == kCommands.end())
    throw ValidationError("unknown command '" + command + "'");
  if (!fs::exists(o.config_path)) throw ValidationError("config file not found: " + o.config_path.string());
  std::string text = read_text_file(o.config_path);
  for (const auto& assignment : o.overrides) text = apply_override(text, assignment);
  if (o.seed) {
    static const std::map<std::string, std::string> seed_key{{"synth", "synth.seed"},
                                                             {"preprocess", "dataset.split_seed"},
                                                             {"embed", "encoder.seed"},
                                                             {"train", "train.seed"}};
    const auto it = seed_key.find(command);
    if (it == seed_key.end()) throw ValidationError("--seed has no meaning for " + command);
    text = apply_override(text, it->second + "=" + std::to_string(*o.seed));
  }
  if (o.out) text = apply_override(text, (command == "synth" ? "dataset.root=" : "output.run_dir=") + json(*o.out).dump());
  return parse_config(text, o.config_path.string());
}

namespace {

/// Exclusive writer lock on a run directory, held as a `.lock` subdirectory.
class RunLock {
 public:
  explicit RunLock(const fs::path& run) : path_(run / ".lock") {
    fs::create_directories(run);
    std::error_code ec;
    if (!fs::create_directory(path_, ec) || ec)
      throw ValidationError("run directory " + run.string() + " is locked by another process (remove " +
                            path_.string() + " if it is stale)");
  }
  ~RunLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  fs::path path_;
};

class RunRecord {
 public:
  RunRecord(std::string command, std::uint64_t seed)
      : command_(std::move(command)), seed_(seed), start_(std::chrono::steady_clock::now()) {}

  void input(const fs::path& p) { inputs_[p.generic_string()] = file_crc32_hex(p); }
  void output(const fs::path& p) { outputs_[p.generic_string()] = file_crc32_hex(p); }
  void note(const std::string& key, json value) { extra_[key] = std::move(value); }

  void write(const RunPaths& paths, const PipelineConfig& config) const {
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json j = {{"command", command_},
              {"seed", seed_},
              {"wall_time_seconds", seconds},
              {"inputs", inputs_},
              {"outputs", outputs_},
              {"config", json::parse(serialize_config(config))}};
    for (const auto& [k, v] : extra_.items()) j[k] = v;
    write_text_atomic(paths.runrecords_dir / (command_ + ".json"), j.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::uint64_t seed_;
  std::chrono::steady_clock::time_point start_;
  std::map<std::string, std::string> inputs_, outputs_;
  json extra_ = json::object();
};

void require_artifact(const fs::path& p, const std::string& producer) {
  if (!fs::exists(p))
    throw MissingArtifactError("missing " + p.string() + "; run `aquaseg " + producer + "` first");
}

void ensure_layout(const RunPaths& p) {
  for (const auto& d : {p.manifest_dir, p.cache_dir, p.checkpoints_dir, p.reports_dir, p.runrecords_dir})
    fs::create_directories(d);
}

Manifest load_manifest(const RunPaths& paths) {
  require_artifact(paths.manifest(), "preprocess");
  return parse_manifest(read_text_file(paths.manifest()), paths.manifest().string());
}

constexpr const char* kEncoderStampName = "encoder.json";

/// Identifies the encoder settings a cache was built with; entries from other settings are stale.
std::string encoder_stamp(const PipelineConfig& cfg) {
  const auto& e = cfg.encoder;
  json j = {{"kind", e.kind == EncoderKind::toy ? "toy" : "external"},
            {"embed_dim", e.embed_dim},
            {"input_side", e.input_side}};
  if (e.kind == EncoderKind::toy) {
    j["seed"] = e.seed;
    j["normalization"] = {{"mean", e.normalization.mean}, {"std", e.normalization.std}};
  } else {
    j["external_dir"] = e.external_dir;
  }
  return j.dump(2) + "\n";
}

CacheIndex load_index(const RunPaths& paths, const PipelineConfig& cfg) {
  require_artifact(paths.cache_dir / kCacheIndexName, "embed");
  const fs::path stamp = paths.cache_dir / kEncoderStampName;
  if (!fs::exists(stamp) || read_text_file(stamp) != encoder_stamp(cfg))
    throw MissingArtifactError("embeddings in " + paths.cache_dir.string() +
                               " were built with different encoder settings; run `aquaseg embed` first");
  return read_cache_index(paths.cache_dir);
}

std::shared_ptr<const ImageEmbedding> embedding_for(const RunPaths& paths, const CacheIndex& index,
                                                    const std::string& id) {
  if (!index.count(id))
    throw MissingArtifactError("no cached embedding for image " + id + " in " + paths.cache_dir.string() +
                               "; run `aquaseg embed` first");
  return std::make_shared<const ImageEmbedding>(load_cached_embedding(paths.cache_dir, index, id));
}

/// One target prepared at every resolution the stages need.
struct PreparedTarget {
  TargetKey key;
  Mask original;       // ground truth at native resolution
  Mask low_res;        // (side/4)^2 supervision
  BoundingBox box;     // tight box at side resolution
};

/// Loads the keys' masks from the dataset. Targets that vanish at encoder resolution are skipped with a warning.
std::vector<PreparedTarget> prepare_targets(const PipelineConfig& cfg, const Manifest& manifest,
                                            const std::vector<TargetKey>& keys, std::ostream& log) {
  const int side = cfg.encoder.input_side;
  const fs::path root(manifest.dataset_root);
  std::map<std::string, std::map<std::string, Mask>> parsed;
  std::vector<PreparedTarget> out;
  for (const auto& key : keys) {
    auto it = parsed.find(key.image_id);
    if (it == parsed.end()) {
      const auto& entry = manifest.image(key.image_id);
      const fs::path mask_path = root / entry.mask_file;
      if (!fs::exists(mask_path)) throw ValidationError("mask " + mask_path.string() + " listed in the manifest is missing");
      it = parsed.emplace(key.image_id, parse_color_mask(read_image(mask_path), cfg.classes, cfg.dataset.channel_threshold))
               .first;
    }
    Mask original = it->second.at(key.class_code);
    if (cfg.dataset.exclusion == ExclusionMode::component)
      original = drop_small_components(original, cfg.dataset.min_pixels);
    const Mask at_side = resize_nearest(original, side, side);
    if (count_foreground(at_side) == 0) {
      log << "warning: " << key.image_id << "/" << key.class_code << " vanishes at " << side
          << "px and is skipped\n";
      continue;
    }
    out.push_back({key, std::move(original), resize_nearest(at_side, side / 4, side / 4), tight_box(at_side)});
  }
  return out;
}

std::vector<TargetKey> split_keys(const Manifest& m, const std::vector<std::string>& tasks, bool train_side) {
  std::vector<TargetKey> keys;
  for (const auto& [task, s] : m.split) {
    if (!tasks.empty() && std::find(tasks.begin(), tasks.end(), task) == tasks.end()) continue;
    for (const auto& id : train_side ? s.train : s.test) keys.push_back({id, task});
  }
  std::sort(keys.begin(), keys.end());
  return keys;
}

template <typename Scalar>
Pipeline<Scalar> make_pipeline(const PipelineConfig& cfg, DecoderParams<Scalar> params) {
  std::shared_ptr<const ImageEncoder> encoder;
  if (cfg.encoder.kind == EncoderKind::toy) encoder = std::make_shared<ToyEncoder>(cfg.encoder.embed_dim, cfg.encoder.seed);
  return Pipeline<Scalar>{encoder, PromptEncoder(cfg.encoder.embed_dim, fourier_spec(cfg.prompt, cfg.encoder.embed_dim)), cfg.decoder,
                          std::move(params), cfg.encoder.input_side};
}

fs::path checkpoint_path(const PipelineConfig& cfg, const RunPaths& paths) {
  if (cfg.eval.checkpoint == "best" || cfg.eval.checkpoint == "final") return paths.checkpoint(cfg.eval.checkpoint);
  return cfg.eval.checkpoint;
}

template <typename Scalar>
void train_impl(const PipelineConfig& cfg, const RunPaths& paths, std::ostream& log) {
  RunRecord record("train", cfg.train.seed);
  const Manifest manifest = load_manifest(paths);
  const CacheIndex index = load_index(paths, cfg);
  record.input(paths.manifest());
  record.input(paths.cache_dir / kCacheIndexName);

  const auto keys = split_keys(manifest, cfg.train.tasks, true);
  if (keys.empty()) throw ValidationError("no training targets in the manifest split");
  std::map<std::string, std::shared_ptr<const ImageEmbedding>> embeddings;
  for (const auto& k : keys)  // fail fast before any step
    if (!embeddings.count(k.image_id)) embeddings[k.image_id] = embedding_for(paths, index, k.image_id);

  std::vector<TrainSample> samples;
  for (auto& t : prepare_targets(cfg, manifest, keys, log))
    samples.push_back({t.key, embeddings.at(t.key.image_id), t.box, std::move(t.low_res)});
  auto [train_set, val_set] = split_validation(std::move(samples), cfg.train.val_fraction, cfg.train.seed);
  log << "training on " << train_set.size() << " targets, validating on " << val_set.size() << "\n";

  auto pipeline = make_pipeline<Scalar>(cfg, init_decoder<Scalar>(cfg.decoder));
  const json provenance = {{"train", json::parse(serialize_config(cfg))["train"]},
                           {"manifest_crc32", file_crc32_hex(paths.manifest())}};
  auto sink = [&](CheckpointKind kind, std::int64_t step, const DecoderParams<Scalar>& params) {
    std::string tag;
    switch (kind) {
      case CheckpointKind::periodic: {
        char buf[32];
        std::snprintf(buf, sizeof buf, "step_%06lld", static_cast<long long>(step));
        tag = buf;
        break;
      }
      case CheckpointKind::final: tag = "final"; break;
      case CheckpointKind::best: tag = "best"; break;
      case CheckpointKind::last_good: tag = "last_good"; break;
    }
    save_checkpoint(paths.checkpoint(tag), CheckpointInfo{cfg.decoder, step, provenance.dump()}, params);
    record.output(paths.checkpoint(tag));
  };

  TrainResult<Scalar> result;
  try {
    result = train(pipeline, train_set, val_set, cfg.train, perturb_options(cfg.prompt), CheckpointSink<Scalar>(sink));
  } catch (const DivergenceError&) {
    record.note("status", "diverged");
    record.write(paths, cfg);
    throw;
  }
  write_text_atomic(paths.history(), history_csv(result.state.history));
  record.output(paths.history());
  record.note("steps", result.state.step);
  record.note("best_step", result.best_step);
  record.write(paths, cfg);
  const auto& last = result.state.history.back();
  log << "trained " << result.state.step << " steps; final loss " << last.total << " (dice " << last.dice << ", ce "
      << last.ce << ")\n";
}

template <typename Scalar>
void eval_impl(const PipelineConfig& cfg, const RunPaths& paths, std::ostream& log) {
  const Manifest manifest = load_manifest(paths);
  const fs::path ckpt = checkpoint_path(cfg, paths);
  require_artifact(ckpt, "train");
  const CacheIndex index = load_index(paths, cfg);
  auto loaded = load_checkpoint<Scalar>(ckpt);
  if (!(loaded.info.config == cfg.decoder))
    throw ValidationError(ckpt.string() + " was trained with a different decoder configuration");
  RunRecord record("eval", loaded.info.step);
  record.input(paths.manifest());
  record.input(ckpt);
  record.input(paths.cache_dir / kCacheIndexName);

  const auto keys = split_keys(manifest, {}, false);
  std::map<std::string, std::shared_ptr<const ImageEmbedding>> embeddings;
  for (const auto& k : keys)
    if (!embeddings.count(k.image_id)) embeddings[k.image_id] = embedding_for(paths, index, k.image_id);
  std::vector<EvalSample> samples;
  for (auto& t : prepare_targets(cfg, manifest, keys, log))
    samples.push_back({t.key, embeddings.at(t.key.image_id), t.box, std::move(t.original)});

  const auto pipeline = make_pipeline<Scalar>(cfg, std::move(loaded.params));
  std::vector<std::string> order;
  for (const auto& cls : cfg.classes) order.push_back(cls.code);
  const auto rows = evaluate(samples, decoder_predictor(pipeline, cfg.eval.threshold), order, cfg.eval.iou_mode);

  json jrows = json::array();
  for (const auto& r : rows)
    jrows.push_back({{"task", r.task}, {"dsc", r.mean_dsc}, {"iou", r.mean_iou}, {"n", r.n_samples}});
  std::uint64_t train_seed = cfg.train.seed;
  try {
    train_seed = json::parse(loaded.info.provenance_json).at("train").at("seed").template get<std::uint64_t>();
  } catch (const json::exception&) {
  }
  const json metrics = {{"rows", jrows},
                        {"seed", train_seed},
                        {"checkpoint", ckpt.filename().string()},
                        {"checkpoint_crc32", file_crc32_hex(ckpt)},
                        {"iou_mode", cfg.eval.iou_mode == IouMode::foreground ? "foreground" : "mean_fg_bg"}};
  write_text_atomic(paths.metrics_json(), metrics.dump(2) + "\n");
  write_text_atomic(paths.metrics_csv(), metrics_csv(rows));
  record.output(paths.metrics_json());
  record.output(paths.metrics_csv());
  record.write(paths, cfg);
  for (const auto& r : rows)
    log << r.task << ": DSC " << format_percent(r.mean_dsc) << " IoU " << format_percent(r.mean_iou) << " (n="
        << r.n_samples << ")\n";
}

}  // namespace

void cmd_synth(const PipelineConfig& cfg, bool force, std::ostream& log) {
  const auto images = generate_synthetic_dataset(cfg.dataset.root, cfg.classes,
                                                 {cfg.synth.n_images, cfg.synth.seed, cfg.synth.image_size, force});
  log << "wrote " << images.size() << " images to " << cfg.dataset.root << "\n";
}

void cmd_preprocess(const PipelineConfig& cfg, std::ostream& log) {
  const RunPaths paths = run_paths(cfg);
  RunLock lock(paths.run);
  RunRecord record("preprocess", cfg.dataset.split_seed);
  std::vector<std::string> warnings;
  const Manifest m = build_manifest(cfg.dataset, cfg.classes, &warnings);
  for (const auto& w : warnings) log << "warning: " << w << "\n";
  ensure_layout(paths);
  for (const auto& im : m.images) {
    record.input(fs::path(m.dataset_root) / im.image_file);
    record.input(fs::path(m.dataset_root) / im.mask_file);
  }
  write_text_atomic(paths.manifest(), manifest_json(m));
  write_text_atomic(paths.summary(), manifest_summary_json(m));
  record.output(paths.manifest());
  record.output(paths.summary());
  record.write(paths, cfg);
  log << "manifest: " << m.images.size() << " images, " << m.targets.size() << " targets, " << m.split.size()
      << " tasks, " << m.excluded_targets << " excluded targets\n";
}

void cmd_embed(const PipelineConfig& cfg, std::ostream& log) {
  const RunPaths paths = run_paths(cfg);
  RunLock lock(paths.run);
  const Manifest m = load_manifest(paths);
  ensure_layout(paths);
  RunRecord record("embed", cfg.encoder.seed);
  record.input(paths.manifest());
  std::vector<std::string> ids;
  for (const auto& im : m.images) ids.push_back(im.image_id);
  const int side = cfg.encoder.input_side;

  const fs::path stamp = paths.cache_dir / kEncoderStampName;
  const std::string wanted = encoder_stamp(cfg);
  if (!fs::exists(stamp) || read_text_file(stamp) != wanted) {
    // built with other settings (or by an older run): discard every entry
    for (const auto& e : fs::directory_iterator(paths.cache_dir))
      if (e.path().extension() == kEmbeddingExtension || e.path().filename() == kCacheIndexName) fs::remove(e.path());
  }

  CacheIndex index;
  if (cfg.encoder.kind == EncoderKind::external) {
    index = import_external_embeddings(cfg.encoder.external_dir, ids, cfg.encoder.embed_dim, side / kPatchSize,
                                       paths.cache_dir);
    log << "imported " << index.size() << " external embeddings\n";
  } else {
    const ToyEncoder encoder(cfg.encoder.embed_dim, cfg.encoder.seed);
    const fs::path root(m.dataset_root);
    auto load = [&](const std::string& id) {
      const RgbImage img = read_image(root / m.image(id).image_file);
      return normalize_image(resize_image(img, side, side), cfg.encoder.normalization);
    };
    const auto report = precompute_embeddings(ids, load, encoder, side, paths.cache_dir);
    index = report.index;
    log << "encoded " << report.encoded << ", reused " << report.skipped << " cached embeddings\n";
    if (!report.failed.empty()) {
      std::string msg = "failed to embed " + std::to_string(report.failed.size()) + " image(s):";
      for (const auto& [id, why] : report.failed) msg += "\n  " + id + ": " + why;
      throw ValidationError(msg);
    }
  }
  write_text_atomic(stamp, wanted);
  record.output(paths.cache_dir / kCacheIndexName);
  record.output(stamp);
  record.note("cache_dir", paths.cache_dir.generic_string());
  record.write(paths, cfg);
}

void cmd_train(const PipelineConfig& cfg, std::ostream& log) {
  const RunPaths paths = run_paths(cfg);
  RunLock lock(paths.run);
  ensure_layout(paths);
  if (cfg.precision == Precision::float32)
    train_impl<float>(cfg, paths, log);
  else
    train_impl<double>(cfg, paths, log);
}

void cmd_eval(const PipelineConfig& cfg, std::ostream& log) {
  const RunPaths paths = run_paths(cfg);
  RunLock lock(paths.run);
  ensure_layout(paths);
  if (cfg.precision == Precision::float32)
    eval_impl<float>(cfg, paths, log);
  else
    eval_impl<double>(cfg, paths, log);
}

void cmd_report(const PipelineConfig& cfg, std::ostream& log) {
  const RunPaths paths = run_paths(cfg);
  RunLock lock(paths.run);
  require_artifact(paths.metrics_json(), "eval");
  ensure_layout(paths);
  RunRecord record("report", 0);
  record.input(paths.metrics_json());

  std::vector<MetricsRow> rows;
  ReportMetadata meta;
  try {
    const json j = json::parse(read_text_file(paths.metrics_json()));
    for (const auto& r : j.at("rows"))
      rows.push_back({r.at("task").get<std::string>(), r.at("dsc").get<double>(), r.at("iou").get<double>(),
                      r.at("n").get<int>()});
    meta.seed = j.at("seed").get<std::uint64_t>();
    meta.checkpoint_id = j.at("checkpoint").get<std::string>() + "@" + j.at("checkpoint_crc32").get<std::string>();
    meta.iou_label = j.at("iou_mode").get<std::string>() == "foreground" ? "per-image foreground IoU"
                                                                         : "per-image mean of foreground and background IoU";
  } catch (const json::exception& e) {
    throw CorruptArtifactError(paths.metrics_json().string() + ": " + e.what());
  }

  std::vector<MetricsRow> baseline;
  if (!cfg.report.baseline_csv.empty()) {
    if (!fs::exists(cfg.report.baseline_csv))
      throw ValidationError("baseline file not found: " + cfg.report.baseline_csv);
    baseline = parse_metrics_csv(read_text_file(cfg.report.baseline_csv), cfg.report.baseline_csv);
    record.input(cfg.report.baseline_csv);
  }
  write_text_atomic(paths.report("csv"), render_report(rows, baseline, ReportFormat::csv, meta));
  write_text_atomic(paths.report("md"), render_report(rows, baseline, ReportFormat::markdown, meta));
  record.output(paths.report("csv"));
  record.output(paths.report("md"));
  record.write(paths, cfg);
  log << "wrote " << paths.report("csv").string() << " and " << paths.report("md").string() << "\n";
}

int run_command(const std::string& command, const CommandOptions& options, std::ostream& log, std::ostream& err) {
  try {
    const PipelineConfig cfg = resolve_config(command, options);
    if (command == "synth") cmd_synth(cfg, options.force, log);
    else if (command == "preprocess") cmd_preprocess(cfg, log);
    else if (command == "embed") cmd_embed(cfg, log);
    else if (command == "train") cmd_train(cfg, log);
    else if (command == "eval") cmd_eval(cfg, log);
    else cmd_report(cfg, log);
    return kExitOk;
  } catch (const MissingArtifactError& e) {
    err << "aquaseg " << command << ": " << e.what() << "\n";
    return kExitMissingArtifact;
  } catch (const DivergenceError& e) {
    err << "aquaseg " << command << ": training diverged: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    err << "aquaseg " << command << ": " << e.what() << "\n";
    return kExitValidation;
  }
}

}  // namespace aquaseg
