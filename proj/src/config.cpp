#include "aquaseg/config.hpp"

#include <json.hpp>

#include "aquaseg/io_util.hpp"

namespace aquaseg {

using nlohmann::json;

namespace {

/// Reads one JSON object, remembering which keys were consumed so leftovers can be rejected.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(where() + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.push_back(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ValidationError(name(key) + " has the wrong type");
    }
  }

  template <typename E>
  void get_enum(const char* key, E& out, const std::vector<std::pair<const char*, E>>& table) {
    std::string s;
    for (const auto& [label, value] : table)
      if (value == out) s = label;
    get(key, s);
    for (const auto& [label, value] : table)
      if (s == label) {
        out = value;
        return;
      }
    throw ValidationError(name(key) + ": unknown value '" + s + "'");
  }

  const json* child(const char* key) {
    seen_.push_back(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [k, _] : j_.items())
      if (std::find(seen_.begin(), seen_.end(), k) == seen_.end()) throw ValidationError("unknown config key " + name(k));
  }

  [[nodiscard]] std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  [[nodiscard]] std::string where() const { return path_.empty() ? "config" : path_; }
  const json& j_;
  std::string path_;
  std::vector<std::string> seen_;
};

const std::vector<std::pair<const char*, ExclusionMode>> kExclusion{{"whole_mask", ExclusionMode::whole_mask},
                                                                    {"component", ExclusionMode::component}};
const std::vector<std::pair<const char*, EncoderKind>> kEncoderKind{{"toy", EncoderKind::toy},
                                                                    {"external", EncoderKind::external}};
const std::vector<std::pair<const char*, Precision>> kPrecision{{"float", Precision::float32},
                                                                {"double", Precision::float64}};
const std::vector<std::pair<const char*, IouMode>> kIouMode{{"foreground", IouMode::foreground},
                                                            {"mean_fg_bg", IouMode::mean_fg_bg}};

template <typename E>
std::string label(E v, const std::vector<std::pair<const char*, E>>& table) {
  for (const auto& [l, value] : table)
    if (value == v) return l;
  return {};
}

template <typename F>
void section(Section& root, const char* key, F&& body) {
  if (const json* j = root.child(key)) {
    Section s(*j, root.name(key));
    body(s);
    s.finish();
  }
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ValidationError(message);
}

}  // namespace

PerturbOptions perturb_options(const PromptConfig& c) { return {c.max_offset, c.outward_only}; }

FourierSpec fourier_spec(const PromptConfig& c, int embed_dim) {
  return {c.num_frequencies == 0 ? embed_dim / 2 : c.num_frequencies, c.scale, c.seed};
}

void validate(const PipelineConfig& c) {
  require(!c.dataset.root.empty(), "dataset.root must not be empty");
  require(c.dataset.channel_threshold >= 0 && c.dataset.channel_threshold <= 255,
          "dataset.channel_threshold must lie in [0, 255]");
  require(c.dataset.min_pixels >= 0, "dataset.min_pixels must be non-negative");
  require(c.dataset.split_ratio > 0 && c.dataset.split_ratio < 1, "dataset.split_ratio must lie in (0, 1)");
  for (const auto& cls : c.classes) require(cls.code.size() == 2, "classes: code '" + cls.code + "' must have two letters");
  validate_class_map(c.classes, c.dataset.channel_threshold);

  require(c.encoder.embed_dim >= 8, "encoder.embed_dim must be at least 8");
  require(c.encoder.input_side >= kPatchSize && c.encoder.input_side % kPatchSize == 0,
          "encoder.input_side must be a positive multiple of 16");
  for (float s : c.encoder.normalization.std) require(s > 0, "encoder.normalization.std entries must be positive");
  require(c.encoder.kind != EncoderKind::external || !c.encoder.external_dir.empty(),
          "encoder.external_dir is required when encoder.kind is external");

  require(c.prompt.max_offset >= 0, "prompt.max_offset must be non-negative");
  require(c.prompt.num_frequencies == 0 ||
              (c.prompt.num_frequencies >= 1 && 2 * c.prompt.num_frequencies <= c.encoder.embed_dim),
          "prompt.num_frequencies must be 0 (auto) or lie in [1, embed_dim / 2]");
  require(c.prompt.scale > 0, "prompt.scale must be positive");

  require(c.decoder.embed_dim == c.encoder.embed_dim, "decoder.embed_dim must equal encoder.embed_dim");
  validate(c.decoder);
  validate(c.train);
  for (const auto& t : c.train.tasks) {
    bool known = false;
    for (const auto& cls : c.classes) known = known || cls.code == t;
    require(known, "train.tasks: unknown task '" + t + "'");
  }

  require(!c.eval.checkpoint.empty(), "eval.checkpoint must not be empty");
  require(c.synth.n_images >= 2, "synth.n_images must be at least 2");
  require(c.synth.image_size >= 160 && c.synth.image_size % 16 == 0,
          "synth.image_size must be a multiple of 16 and at least 160");
  require(!c.output.run_dir.empty(), "output.run_dir must not be empty");
}

PipelineConfig parse_config(const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(source + ": invalid JSON: " + e.what());
  }
  PipelineConfig c;
  Section root(j, "");

  section(root, "dataset", [&](Section& s) {
    s.get("root", c.dataset.root);
    s.get("channel_threshold", c.dataset.channel_threshold);
    s.get("min_pixels", c.dataset.min_pixels);
    s.get_enum("exclusion", c.dataset.exclusion, kExclusion);
    s.get("split_ratio", c.dataset.split_ratio);
    s.get("split_seed", c.dataset.split_seed);
  });

  if (const json* classes = root.child("classes")) {
    if (!classes->is_array()) throw ValidationError("classes must be a list");
    c.classes.clear();
    for (std::size_t i = 0; i < classes->size(); ++i) {
      Section s((*classes)[i], "classes[" + std::to_string(i) + "]");
      ClassSpec spec;
      s.get("code", spec.code);
      s.get("name", spec.name);
      s.get("color", spec.color);
      s.finish();
      c.classes.push_back(spec);
    }
  }

  section(root, "encoder", [&](Section& s) {
    s.get_enum("kind", c.encoder.kind, kEncoderKind);
    s.get("embed_dim", c.encoder.embed_dim);
    s.get("seed", c.encoder.seed);
    s.get("input_side", c.encoder.input_side);
    s.get("external_dir", c.encoder.external_dir);
    if (const json* n = s.child("normalization")) {
      Section ns(*n, s.name("normalization"));
      ns.get("mean", c.encoder.normalization.mean);
      ns.get("std", c.encoder.normalization.std);
      ns.finish();
    }
  });

  section(root, "prompt", [&](Section& s) {
    s.get("max_offset", c.prompt.max_offset);
    s.get("outward_only", c.prompt.outward_only);
    s.get("num_frequencies", c.prompt.num_frequencies);
    s.get("scale", c.prompt.scale);
    s.get("seed", c.prompt.seed);
  });

  section(root, "decoder", [&](Section& s) {
    s.get("embed_dim", c.decoder.embed_dim);
    s.get("num_heads", c.decoder.num_heads);
    s.get("num_layers", c.decoder.num_layers);
    s.get("mlp_width", c.decoder.mlp_width);
    s.get("num_mask_tokens", c.decoder.num_mask_tokens);
    s.get("attention_downsample", c.decoder.attention_downsample);
    s.get("iou_hidden", c.decoder.iou_hidden);
    s.get("seed", c.decoder.seed);
    s.get_enum("precision", c.precision, kPrecision);
  });

  section(root, "train", [&](Section& s) {
    s.get("learning_rate", c.train.learning_rate);
    s.get("beta1", c.train.beta1);
    s.get("beta2", c.train.beta2);
    s.get("epsilon", c.train.epsilon);
    s.get("batch_size", c.train.batch_size);
    s.get("max_epochs", c.train.max_epochs);
    s.get("max_steps", c.train.max_steps);
    s.get("seed", c.train.seed);
    s.get("checkpoint_every", c.train.checkpoint_every);
    s.get("dice_eps", c.train.dice_eps);
    s.get("val_fraction", c.train.val_fraction);
    s.get("iou_loss_weight", c.train.iou_loss_weight);
    s.get("lr_schedule", c.train.lr_schedule);
    s.get("tasks", c.train.tasks);
  });

  section(root, "eval", [&](Section& s) {
    s.get("threshold", c.eval.threshold);
    s.get_enum("iou_mode", c.eval.iou_mode, kIouMode);
    s.get("checkpoint", c.eval.checkpoint);
  });

  section(root, "report", [&](Section& s) { s.get("baseline_csv", c.report.baseline_csv); });

  section(root, "synth", [&](Section& s) {
    s.get("n_images", c.synth.n_images);
    s.get("seed", c.synth.seed);
    s.get("image_size", c.synth.image_size);
  });

  section(root, "output", [&](Section& s) {
    s.get("run_dir", c.output.run_dir);
    s.get("cache_dir", c.output.cache_dir);
  });

  root.finish();
  validate(c);
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ValidationError("config file not found: " + path.string());
  return parse_config(read_text_file(path), path.string());
}

std::string serialize_config(const PipelineConfig& c) {
  json classes = json::array();
  for (const auto& cls : c.classes) classes.push_back({{"code", cls.code}, {"name", cls.name}, {"color", cls.color}});
  const json j = {
      {"dataset",
       {{"root", c.dataset.root},
        {"channel_threshold", c.dataset.channel_threshold},
        {"min_pixels", c.dataset.min_pixels},
        {"exclusion", label(c.dataset.exclusion, kExclusion)},
        {"split_ratio", c.dataset.split_ratio},
        {"split_seed", c.dataset.split_seed}}},
      {"classes", classes},
      {"encoder",
       {{"kind", label(c.encoder.kind, kEncoderKind)},
        {"embed_dim", c.encoder.embed_dim},
        {"seed", c.encoder.seed},
        {"input_side", c.encoder.input_side},
        {"external_dir", c.encoder.external_dir},
        {"normalization", {{"mean", c.encoder.normalization.mean}, {"std", c.encoder.normalization.std}}}}},
      {"prompt",
       {{"max_offset", c.prompt.max_offset},
        {"outward_only", c.prompt.outward_only},
        {"num_frequencies", c.prompt.num_frequencies},
        {"scale", c.prompt.scale},
        {"seed", c.prompt.seed}}},
      {"decoder",
       {{"embed_dim", c.decoder.embed_dim},
        {"num_heads", c.decoder.num_heads},
        {"num_layers", c.decoder.num_layers},
        {"mlp_width", c.decoder.mlp_width},
        {"num_mask_tokens", c.decoder.num_mask_tokens},
        {"attention_downsample", c.decoder.attention_downsample},
        {"iou_hidden", c.decoder.iou_hidden},
        {"seed", c.decoder.seed},
        {"precision", label(c.precision, kPrecision)}}},
      {"train",
       {{"learning_rate", c.train.learning_rate},
        {"beta1", c.train.beta1},
        {"beta2", c.train.beta2},
        {"epsilon", c.train.epsilon},
        {"batch_size", c.train.batch_size},
        {"max_epochs", c.train.max_epochs},
        {"max_steps", c.train.max_steps},
        {"seed", c.train.seed},
        {"checkpoint_every", c.train.checkpoint_every},
        {"dice_eps", c.train.dice_eps},
        {"val_fraction", c.train.val_fraction},
        {"iou_loss_weight", c.train.iou_loss_weight},
        {"lr_schedule", c.train.lr_schedule},
        {"tasks", c.train.tasks}}},
      {"eval",
       {{"threshold", c.eval.threshold},
        {"iou_mode", label(c.eval.iou_mode, kIouMode)},
        {"checkpoint", c.eval.checkpoint}}},
      {"report", {{"baseline_csv", c.report.baseline_csv}}},
      {"synth", {{"n_images", c.synth.n_images}, {"seed", c.synth.seed}, {"image_size", c.synth.image_size}}},
      {"output", {{"run_dir", c.output.run_dir}, {"cache_dir", c.output.cache_dir}}},
  };
  return j.dump(2) + "\n";
}

std::string apply_override(const std::string& json_text, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ValidationError("override '" + assignment + "' must look like key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("invalid JSON: ") + e.what());
  }
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ValidationError("override key '" + key + "' is malformed");
    if (!node->is_object()) throw ValidationError("override key '" + key + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
  return j.dump();
}

}  // namespace aquaseg
