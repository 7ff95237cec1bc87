#include "aquaseg/checkpoint.hpp"

#include <cstring>
#include <map>

#include <json.hpp>

#include "aquaseg/embedding_cache.hpp"
#include "aquaseg/io_util.hpp"

namespace aquaseg {
namespace {

nlohmann::json config_to_json(const DecoderConfig& c) {
  return {{"embed_dim", c.embed_dim},
          {"num_heads", c.num_heads},
          {"num_layers", c.num_layers},
          {"mlp_width", c.mlp_width},
          {"num_mask_tokens", c.num_mask_tokens},
          {"attention_downsample", c.attention_downsample},
          {"iou_hidden", c.iou_hidden},
          {"seed", c.seed}};
}

DecoderConfig config_from_json(const nlohmann::json& j) {
  DecoderConfig c;
  c.embed_dim = j.at("embed_dim").get<int>();
  c.num_heads = j.at("num_heads").get<int>();
  c.num_layers = j.at("num_layers").get<int>();
  c.mlp_width = j.at("mlp_width").get<int>();
  c.num_mask_tokens = j.at("num_mask_tokens").get<int>();
  c.attention_downsample = j.at("attention_downsample").get<int>();
  c.iou_hidden = j.at("iou_hidden").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const CheckpointInfo& info, const DecoderParams<double>& params) {
  ByteWriter w;
  w.raw(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u16(kCheckpointVersion);
  const nlohmann::json header = {{"decoder", config_to_json(info.config)},
                                 {"step", info.step},
                                 {"provenance", nlohmann::json::parse(info.provenance_json)}};
  w.string(header.dump());
  std::uint32_t count = 0;
  visit_tensors([&count](const std::string&, const Eigen::MatrixXd&) { ++count; }, params);
  w.u32(count);
  visit_tensors([&w](const std::string& name, const Eigen::MatrixXd& m) {
    w.string(name);
    w.u32(static_cast<std::uint32_t>(m.rows()));
    w.u32(static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) w.f64(m.data()[i]);
  }, params);
  w.u32(crc32_bytes(w.bytes.data(), w.bytes.size()));
  return std::move(w.bytes);
}

LoadedCheckpoint<double> deserialize_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  if (bytes.size() < sizeof kCheckpointMagic + 6) throw CorruptArtifactError(source + ": checkpoint too short");
  std::uint32_t stored_crc = 0;
  for (int i = 0; i < 4; ++i) stored_crc |= static_cast<std::uint32_t>(bytes[bytes.size() - 4 + i]) << (8 * i);
  if (crc32_bytes(bytes.data(), bytes.size() - 4) != stored_crc) throw CorruptArtifactError(source + ": checksum mismatch");

  ByteReader r(bytes, source);
  char magic[7];
  r.raw(magic, sizeof magic);
  if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) throw CorruptArtifactError(source + ": not a checkpoint");
  if (r.u16() != kCheckpointVersion) throw CorruptArtifactError(source + ": unsupported checkpoint version");

  LoadedCheckpoint<double> out;
  try {
    const auto header = nlohmann::json::parse(r.string());
    out.info.config = config_from_json(header.at("decoder"));
    out.info.step = header.at("step").get<std::int64_t>();
    out.info.provenance_json = header.at("provenance").dump();
  } catch (const nlohmann::json::exception& e) {
    throw CorruptArtifactError(source + ": malformed checkpoint header: " + e.what());
  }

  std::map<std::string, Eigen::MatrixXd> blobs;
  const std::uint32_t count = r.u32();
  for (std::uint32_t t = 0; t < count; ++t) {
    std::string name = r.string();
    const std::uint32_t rows = r.u32(), cols = r.u32();
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.f64();
    blobs.emplace(std::move(name), std::move(m));
  }
  if (r.remaining() != 4) throw CorruptArtifactError(source + ": trailing bytes after tensors");

  out.params = init_decoder<double>(out.info.config);
  std::size_t matched = 0;
  visit_tensors([&](const std::string& name, Eigen::MatrixXd& dst) {
    const auto it = blobs.find(name);
    if (it == blobs.end()) throw ValidationError(source + ": missing tensor " + name);
    if (it->second.rows() != dst.rows() || it->second.cols() != dst.cols())
      throw ValidationError(source + ": tensor " + name + " has shape " + std::to_string(it->second.rows()) + "x" +
                            std::to_string(it->second.cols()) + ", expected " + std::to_string(dst.rows()) + "x" +
                            std::to_string(dst.cols()));
    dst = it->second;
    ++matched;
  }, out.params);
  if (matched != blobs.size()) throw ValidationError(source + ": checkpoint holds tensors the decoder does not define");
  return out;
}

template <typename Scalar>
void save_checkpoint(const std::filesystem::path& path, const CheckpointInfo& info, const DecoderParams<Scalar>& params) {
  write_file_atomic(path, serialize_checkpoint(info, cast_params<double>(params)));
}

template <typename Scalar>
LoadedCheckpoint<Scalar> load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingArtifactError("checkpoint not found: " + path.string());
  auto loaded = deserialize_checkpoint(read_file_bytes(path), path.string());
  return {loaded.info, cast_params<Scalar>(loaded.params)};
}

template void save_checkpoint<float>(const std::filesystem::path&, const CheckpointInfo&, const DecoderParams<float>&);
template void save_checkpoint<double>(const std::filesystem::path&, const CheckpointInfo&, const DecoderParams<double>&);
template LoadedCheckpoint<float> load_checkpoint<float>(const std::filesystem::path&);
template LoadedCheckpoint<double> load_checkpoint<double>(const std::filesystem::path&);

}  // namespace aquaseg
