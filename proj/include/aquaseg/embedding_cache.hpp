#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "aquaseg/encoder.hpp"

namespace aquaseg {

// Entry file layout, all little-endian:
//   "AQEMB1" | u16 version | u32 embed_dim | u32 height | u32 width | u32 id_len | id bytes
//   | embed_dim*height*width f32 (channel-major, row-major) | u32 CRC32 of the payload
inline constexpr char kEmbeddingMagic[6] = {'A', 'Q', 'E', 'M', 'B', '1'};
inline constexpr std::uint16_t kEmbeddingVersion = 1;
inline constexpr const char* kEmbeddingExtension = ".aqemb";
inline constexpr const char* kCacheIndexName = "index.tsv";

std::uint32_t crc32_bytes(const void* data, std::size_t size);

[[nodiscard]] std::size_t entry_file_size(int embed_dim, int height, int width, std::size_t id_length);

std::vector<std::uint8_t> serialize_entry(const ImageEmbedding& entry);
ImageEmbedding deserialize_entry(const std::vector<std::uint8_t>& bytes, const std::string& source_name);

/// Writes via a temporary file and an atomic rename. Returns the payload CRC32.
std::uint32_t write_entry(const std::filesystem::path& path, const ImageEmbedding& entry);

/// Throws CorruptArtifactError naming the file on truncation, bad magic or checksum mismatch.
ImageEmbedding read_entry(const std::filesystem::path& path);

struct CacheIndexEntry {
  std::string relative_path;
  std::uint32_t crc32 = 0;
  friend bool operator==(const CacheIndexEntry&, const CacheIndexEntry&) = default;
};

/// image_id -> entry, serialized as `image_id<TAB>relative_path<TAB>crc32hex` lines.
using CacheIndex = std::map<std::string, CacheIndexEntry>;

CacheIndex read_cache_index(const std::filesystem::path& cache_dir);
void write_cache_index(const std::filesystem::path& cache_dir, const CacheIndex& index);

struct PrecomputeReport {
  int encoded = 0;
  int skipped = 0;
  std::vector<std::pair<std::string, std::string>> failed;  ///< (image_id, reason)
  CacheIndex index;
};

/// Loads, resizes and normalizes one image for the encoder.
using EncoderInputLoader = std::function<NormalizedImage(const std::string& image_id)>;

/// Encodes every image id once. Existing entries that read back cleanly with the expected
/// geometry are kept; corrupt or mismatched ones are recomputed. Unreadable images are reported.
PrecomputeReport precompute_embeddings(const std::vector<std::string>& image_ids, const EncoderInputLoader& load,
                                       const ImageEncoder& encoder, int side,
                                       const std::filesystem::path& cache_dir);

/// Validates externally produced entry files (`<dir>/<image_id>.aqemb`) and copies them into the cache.
CacheIndex import_external_embeddings(const std::filesystem::path& source_dir,
                                      const std::vector<std::string>& image_ids, int expected_embed_dim,
                                      int expected_grid_side, const std::filesystem::path& cache_dir);

/// Reads an entry through the index, checking the recorded checksum.
ImageEmbedding load_cached_embedding(const std::filesystem::path& cache_dir, const CacheIndex& index,
                                     const std::string& image_id);

}  // namespace aquaseg
