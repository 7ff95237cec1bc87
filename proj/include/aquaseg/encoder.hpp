#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aquaseg/suim.hpp"
#include "aquaseg/types.hpp"

namespace aquaseg {

inline constexpr int kPatchSize = 16;

/// C x (H*W) row-major: element (c, y*W + x) is channel c at grid cell (y, x).
using EmbeddingGrid = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ImageEmbedding {
  std::string image_id;
  int embed_dim = 0;
  int height = 0;
  int width = 0;
  EmbeddingGrid grid;

  [[nodiscard]] bool all_finite() const { return grid.allFinite(); }
  friend bool operator==(const ImageEmbedding& a, const ImageEmbedding& b) {
    return a.image_id == b.image_id && a.embed_dim == b.embed_dim && a.height == b.height &&
           a.width == b.width && a.grid.size() == b.grid.size() &&
           std::equal(a.grid.data(), a.grid.data() + a.grid.size(), b.grid.data());
  }
};

enum class EncoderKind { toy, external };

struct EncoderSpec {
  EncoderKind kind = EncoderKind::toy;
  int embed_dim = 32;
  std::uint64_t seed = 0;
};

/// Read-only byte view of one named parameter tensor.
struct NamedTensorView {
  std::string name;
  std::span<const std::byte> bytes;
};

template <typename Derived>
NamedTensorView tensor_view(std::string name, const Eigen::PlainObjectBase<Derived>& m) {
  return {std::move(name), std::as_bytes(std::span(m.data(), static_cast<std::size_t>(m.size())))};
}

/// Frozen image encoder. Implementations never expose mutable parameters.
class ImageEncoder {
 public:
  virtual ~ImageEncoder() = default;
  [[nodiscard]] virtual int embed_dim() const = 0;
  [[nodiscard]] virtual ImageEmbedding encode(const NormalizedImage& image, int side, std::string image_id) const = 0;
  [[nodiscard]] virtual std::vector<NamedTensorView> parameters() const = 0;
};

/// Deterministic stand-in for a ViT backbone: a 16x16 patch projection to C channels
/// followed by two tanh channel-mixing layers, all seeded and untrained.
class ToyEncoder final : public ImageEncoder {
 public:
  ToyEncoder(int embed_dim, std::uint64_t seed);

  [[nodiscard]] int embed_dim() const override { return embed_dim_; }
  [[nodiscard]] ImageEmbedding encode(const NormalizedImage& image, int side, std::string image_id) const override;
  [[nodiscard]] std::vector<NamedTensorView> parameters() const override;

 private:
  int embed_dim_;
  Eigen::MatrixXf patch_proj_;  // C x (3*16*16)
  Eigen::VectorXf patch_bias_;
  Eigen::MatrixXf mix1_;
  Eigen::MatrixXf mix2_;
};

/// Throws ValidationError for EncoderKind::external: external embeddings are imported, not computed.
std::unique_ptr<ImageEncoder> make_encoder(const EncoderSpec& spec);

ImageEmbedding encode_image(const NormalizedImage& image, int side, const EncoderSpec& spec,
                            std::string image_id = {});

}  // namespace aquaseg
