#include "aquaseg/embedding_cache.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "aquaseg/io_util.hpp"

namespace aquaseg {

std::uint32_t crc32_bytes(const void* data, std::size_t size) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  const auto* p = static_cast<const Bytef*>(data);
  while (size > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    crc = ::crc32(crc, p, chunk);
    p += chunk;
    size -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::size_t entry_file_size(int embed_dim, int height, int width, std::size_t id_length) {
  return 6 + 2 + 4 * 4 + id_length + 4 * static_cast<std::size_t>(embed_dim) * height * width + 4;
}

std::vector<std::uint8_t> serialize_entry(const ImageEmbedding& e) {
  if (e.grid.rows() != e.embed_dim || e.grid.cols() != static_cast<Eigen::Index>(e.height) * e.width)
    throw ValidationError("embedding " + e.image_id + ": grid shape disagrees with declared dims");
  ByteWriter w;
  w.raw(kEmbeddingMagic, sizeof kEmbeddingMagic);
  w.u16(kEmbeddingVersion);
  w.u32(static_cast<std::uint32_t>(e.embed_dim));
  w.u32(static_cast<std::uint32_t>(e.height));
  w.u32(static_cast<std::uint32_t>(e.width));
  w.string(e.image_id);
  const std::size_t payload_start = w.bytes.size();
  for (Eigen::Index i = 0; i < e.grid.size(); ++i) w.f32(e.grid.data()[i]);
  w.u32(crc32_bytes(w.bytes.data() + payload_start, w.bytes.size() - payload_start));
  return std::move(w.bytes);
}

ImageEmbedding deserialize_entry(const std::vector<std::uint8_t>& bytes, const std::string& source_name) {
  ByteReader r(bytes, source_name);
  char magic[6];
  r.raw(magic, sizeof magic);
  if (std::memcmp(magic, kEmbeddingMagic, sizeof magic) != 0)
    throw CorruptArtifactError(source_name + ": not an embedding cache entry (bad magic)");
  if (const auto version = r.u16(); version != kEmbeddingVersion)
    throw CorruptArtifactError(source_name + ": unsupported embedding format version " + std::to_string(version));
  ImageEmbedding e;
  e.embed_dim = static_cast<int>(r.u32());
  e.height = static_cast<int>(r.u32());
  e.width = static_cast<int>(r.u32());
  e.image_id = r.string();
  const std::size_t count = static_cast<std::size_t>(e.embed_dim) * e.height * e.width;
  if (r.remaining() != 4 * count + 4)
    throw CorruptArtifactError(source_name + ": payload length does not match header (truncated or padded file)");
  const std::size_t payload_start = r.position();
  e.grid.resize(e.embed_dim, static_cast<Eigen::Index>(e.height) * e.width);
  for (std::size_t i = 0; i < count; ++i) e.grid.data()[i] = r.f32();
  const std::uint32_t computed = crc32_bytes(bytes.data() + payload_start, 4 * count);
  if (r.u32() != computed) throw CorruptArtifactError(source_name + ": checksum mismatch");
  return e;
}

std::uint32_t write_entry(const std::filesystem::path& path, const ImageEmbedding& entry) {
  const auto bytes = serialize_entry(entry);
  write_file_atomic(path, bytes);
  std::uint32_t crc = 0;
  for (int i = 0; i < 4; ++i) crc |= static_cast<std::uint32_t>(bytes[bytes.size() - 4 + i]) << (8 * i);
  return crc;
}

ImageEmbedding read_entry(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingArtifactError("embedding file not found: " + path.string());
  return deserialize_entry(read_file_bytes(path), path.string());
}

namespace {

std::string hex32(std::uint32_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(8) << std::setfill('0') << v;
  return s.str();
}

std::filesystem::path entry_name(const std::string& image_id) { return image_id + kEmbeddingExtension; }

std::uint32_t payload_crc(const ImageEmbedding& e) {
  ByteWriter w;
  for (Eigen::Index i = 0; i < e.grid.size(); ++i) w.f32(e.grid.data()[i]);
  return crc32_bytes(w.bytes.data(), w.bytes.size());
}

}  // namespace

CacheIndex read_cache_index(const std::filesystem::path& cache_dir) {
  CacheIndex index;
  std::ifstream in(cache_dir / kCacheIndexName);
  if (!in) return index;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos)
      throw CorruptArtifactError((cache_dir / kCacheIndexName).string() + ": malformed line " + std::to_string(lineno));
    CacheIndexEntry entry;
    entry.relative_path = line.substr(t1 + 1, t2 - t1 - 1);
    entry.crc32 = static_cast<std::uint32_t>(std::stoul(line.substr(t2 + 1), nullptr, 16));
    index[line.substr(0, t1)] = entry;
  }
  return index;
}

void write_cache_index(const std::filesystem::path& cache_dir, const CacheIndex& index) {
  std::string text;
  for (const auto& [id, e] : index) text += id + '\t' + e.relative_path + '\t' + hex32(e.crc32) + '\n';
  write_file_atomic(cache_dir / kCacheIndexName, std::vector<std::uint8_t>(text.begin(), text.end()));
}

PrecomputeReport precompute_embeddings(const std::vector<std::string>& image_ids, const EncoderInputLoader& load,
                                       const ImageEncoder& encoder, int side, const std::filesystem::path& cache_dir) {
  std::filesystem::create_directories(cache_dir);
  const std::set<std::string> unique(image_ids.begin(), image_ids.end());
  const int grid = side / kPatchSize;
  const CacheIndex previous = read_cache_index(cache_dir);

  PrecomputeReport report;
  for (const auto& id : unique) {
    const auto rel = entry_name(id);
    const auto path = cache_dir / rel;
    if (std::filesystem::exists(path)) {
      try {
        const ImageEmbedding existing = read_entry(path);
        const auto prev = previous.find(id);
        const std::uint32_t crc = payload_crc(existing);
        const bool index_agrees = prev == previous.end() || prev->second.crc32 == crc;
        if (existing.image_id == id && existing.embed_dim == encoder.embed_dim() && existing.height == grid &&
            existing.width == grid && index_agrees) {
          report.index[id] = {rel.string(), crc};
          ++report.skipped;
          continue;
        }
      } catch (const CorruptArtifactError&) {
        // fall through: recompute and overwrite
      }
    }
    NormalizedImage input;
    try {
      input = load(id);
    } catch (const std::exception& ex) {
      report.failed.emplace_back(id, ex.what());
      continue;
    }
    const ImageEmbedding emb = encoder.encode(input, side, id);
    if (!emb.all_finite()) {
      report.failed.emplace_back(id, "encoder produced non-finite values");
      continue;
    }
    report.index[id] = {rel.string(), write_entry(path, emb)};
    ++report.encoded;
  }
  write_cache_index(cache_dir, report.index);
  return report;
}

CacheIndex import_external_embeddings(const std::filesystem::path& source_dir, const std::vector<std::string>& image_ids,
                                      int expected_embed_dim, int expected_grid_side,
                                      const std::filesystem::path& cache_dir) {
  const std::set<std::string> unique(image_ids.begin(), image_ids.end());
  std::vector<std::string> missing;
  for (const auto& id : unique)
    if (!std::filesystem::exists(source_dir / entry_name(id))) missing.push_back(id);
  if (!missing.empty()) {
    std::string msg = "external embeddings missing for " + std::to_string(missing.size()) + " image(s):";
    for (const auto& id : missing) msg += ' ' + id;
    throw MissingArtifactError(msg);
  }

  std::filesystem::create_directories(cache_dir);
  CacheIndex index;
  for (const auto& id : unique) {
    const auto src = source_dir / entry_name(id);
    const ImageEmbedding e = read_entry(src);
    if (e.image_id != id) throw ValidationError(src.string() + ": header id '" + e.image_id + "' does not match file name");
    if (e.embed_dim != expected_embed_dim)
      throw ValidationError(src.string() + ": embed_dim " + std::to_string(e.embed_dim) + " does not match configured " +
                            std::to_string(expected_embed_dim));
    if (e.height != expected_grid_side || e.width != expected_grid_side)
      throw ValidationError(src.string() + ": spatial grid " + std::to_string(e.height) + "x" + std::to_string(e.width) +
                            " does not match expected " + std::to_string(expected_grid_side));
    if (!e.all_finite()) throw ValidationError(src.string() + ": contains non-finite values");
    const auto rel = entry_name(id);
    index[id] = {rel.string(), write_entry(cache_dir / rel, e)};
  }
  write_cache_index(cache_dir, index);
  return index;
}

ImageEmbedding load_cached_embedding(const std::filesystem::path& cache_dir, const CacheIndex& index,
                                     const std::string& image_id) {
  const auto it = index.find(image_id);
  if (it == index.end()) throw MissingArtifactError("no cached embedding for image '" + image_id + "'");
  const auto path = cache_dir / it->second.relative_path;
  ImageEmbedding e = read_entry(path);
  if (payload_crc(e) != it->second.crc32)
    throw CorruptArtifactError(path.string() + ": checksum disagrees with the cache index");
  return e;
}

}  // namespace aquaseg
