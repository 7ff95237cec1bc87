#include "aquaseg/encoder.hpp"

#include <cmath>

#include "aquaseg/random.hpp"

namespace aquaseg {

ToyEncoder::ToyEncoder(int embed_dim, std::uint64_t seed) : embed_dim_(embed_dim) {
  if (embed_dim < 1) throw ValidationError("encoder embed_dim must be positive");
  constexpr int fan_in = 3 * kPatchSize * kPatchSize;
  Rng rng = make_rng(seed, 0xE1C0DE);
  patch_proj_ = gaussian_matrix<float>(embed_dim, fan_in, 1.0 / std::sqrt(fan_in), rng);
  patch_bias_ = gaussian_matrix<float>(embed_dim, 1, 0.1, rng);
  mix1_ = gaussian_matrix<float>(embed_dim, embed_dim, 1.0 / std::sqrt(embed_dim), rng);
  mix2_ = gaussian_matrix<float>(embed_dim, embed_dim, 1.0 / std::sqrt(embed_dim), rng);
}

ImageEmbedding ToyEncoder::encode(const NormalizedImage& image, int side, std::string image_id) const {
  if (side < kPatchSize || side % kPatchSize != 0)
    throw ValidationError("encoder input side must be a positive multiple of 16");
  if (image.cols() != static_cast<Eigen::Index>(side) * side)
    throw ValidationError("normalized image does not match the declared side");
  const int grid = side / kPatchSize;
  const int cells = grid * grid;
  constexpr int patch_len = 3 * kPatchSize * kPatchSize;

  // Gather patches as columns: (3*16*16) x cells.
  Eigen::MatrixXf patches(patch_len, cells);
  for (int gy = 0; gy < grid; ++gy) {
    for (int gx = 0; gx < grid; ++gx) {
      const int cell = gy * grid + gx;
      int k = 0;
      for (int c = 0; c < 3; ++c)
        for (int py = 0; py < kPatchSize; ++py) {
          const Eigen::Index base = static_cast<Eigen::Index>(gy * kPatchSize + py) * side + gx * kPatchSize;
          for (int px = 0; px < kPatchSize; ++px) patches(k++, cell) = image(c, base + px);
        }
    }
  }

  Eigen::MatrixXf h = (patch_proj_ * patches).colwise() + patch_bias_;
  h = (mix1_ * h).array().tanh().matrix();
  h = (mix2_ * h).array().tanh().matrix();

  ImageEmbedding out;
  out.image_id = std::move(image_id);
  out.embed_dim = embed_dim_;
  out.height = grid;
  out.width = grid;
  out.grid = h;
  return out;
}

std::vector<NamedTensorView> ToyEncoder::parameters() const {
  return {tensor_view("encoder.patch_proj", patch_proj_),
          tensor_view("encoder.patch_bias", patch_bias_),
          tensor_view("encoder.mix1", mix1_),
          tensor_view("encoder.mix2", mix2_)};
}

std::unique_ptr<ImageEncoder> make_encoder(const EncoderSpec& spec) {
  if (spec.kind == EncoderKind::external)
    throw ValidationError(
        "encoder kind 'external' has no in-process backend; produce embeddings out-of-band and load them "
        "with import_external_embeddings (aquaseg embed with encoder.import_dir set)");
  return std::make_unique<ToyEncoder>(spec.embed_dim, spec.seed);
}

ImageEmbedding encode_image(const NormalizedImage& image, int side, const EncoderSpec& spec, std::string image_id) {
  return make_encoder(spec)->encode(image, side, std::move(image_id));
}

}  // namespace aquaseg
