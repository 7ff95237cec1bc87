#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "aquaseg/encoder.hpp"
#include "aquaseg/random.hpp"
#include "aquaseg/types.hpp"

namespace aquaseg {

/// Pixel box with exclusive max corner: covers columns [x_min, x_max) and rows [y_min, y_max).
struct BoundingBox {
  int x_min = 0;
  int y_min = 0;
  int x_max = 0;
  int y_max = 0;

  [[nodiscard]] bool valid_within(Size2 bounds) const {
    return 0 <= x_min && x_min < x_max && x_max <= bounds.width && 0 <= y_min && y_min < y_max &&
           y_max <= bounds.height;
  }
  [[nodiscard]] bool contains(const BoundingBox& o) const {
    return x_min <= o.x_min && y_min <= o.y_min && x_max >= o.x_max && y_max >= o.y_max;
  }
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Smallest box containing every foreground pixel. Throws ValidationError on an empty mask.
BoundingBox tight_box(const Mask& mask);

/// Per-coordinate offsets in (x_min, y_min, x_max, y_max) order; positive means outward.
using BoxOffsets = std::array<int, 4>;

/// Moves each coordinate by its offset (positive = away from the centre) and clamps to bounds.
/// If an axis collapses (possible only with negative offsets) that axis keeps the input extent.
BoundingBox apply_box_offsets(const BoundingBox& box, const BoxOffsets& offsets, Size2 bounds);

struct PerturbOptions {
  int max_offset = 20;
  bool outward_only = true;  ///< false draws signed offsets in [-max_offset, max_offset]
};

/// Draws the four offsets for one box.
BoxOffsets draw_box_offsets(const PerturbOptions& opts, Rng& rng);

BoundingBox perturb_box(const BoundingBox& box, const PerturbOptions& opts, Size2 bounds, Rng& rng);

struct FourierSpec {
  int num_frequencies = 16;
  double scale = 1.0;
  std::uint64_t seed = 0;
};

/// Two corner tokens (top-left, bottom-right), 2 x C.
using BoxPrompt = Eigen::MatrixXd;

/// Frozen box-prompt encoder: random Fourier features of corner positions plus corner-type
/// embeddings, a dense positional encoding for the image grid, and the no-mask dense embedding.
class PromptEncoder {
 public:
  PromptEncoder(int embed_dim, const FourierSpec& spec);

  [[nodiscard]] int embed_dim() const { return embed_dim_; }
  [[nodiscard]] const FourierSpec& spec() const { return spec_; }
  [[nodiscard]] const Eigen::MatrixXd& frequencies() const { return frequencies_; }
  [[nodiscard]] const Eigen::MatrixXd& corner_embeddings() const { return corner_embeddings_; }
  [[nodiscard]] const Eigen::RowVectorXd& no_mask_embedding() const { return no_mask_embed_; }

  /// Normalized coordinates in [0,1]^2 (one per row, x then y) -> N x C Fourier features,
  /// [sin(2 pi p F), cos(2 pi p F)] zero-padded to C.
  [[nodiscard]] Eigen::MatrixXd fourier_features(const Eigen::MatrixX2d& points) const;

  /// Corner (x, y) -> ((x + 0.5) / side, (y + 0.5) / side).
  [[nodiscard]] static Eigen::RowVector2d normalize_corner(int x, int y, int image_side);

  [[nodiscard]] BoxPrompt encode_box(const BoundingBox& box, int image_side) const;

  /// (h*w) x C positional encoding of grid-cell centres, rows in row-major cell order.
  [[nodiscard]] Eigen::MatrixXd dense_positional_encoding(int h, int w) const;

  [[nodiscard]] std::vector<NamedTensorView> parameters() const;

 private:
  int embed_dim_;
  FourierSpec spec_;
  Eigen::MatrixXd frequencies_;        // 2 x num_frequencies
  Eigen::MatrixXd corner_embeddings_;  // 2 x C
  Eigen::RowVectorXd no_mask_embed_;   // 1 x C
};

}  // namespace aquaseg
