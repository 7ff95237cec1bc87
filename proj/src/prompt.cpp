#include "aquaseg/prompt.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace aquaseg {

BoundingBox tight_box(const Mask& mask) {
  const auto rows = (mask != 0).rowwise().any();
  const auto cols = (mask != 0).colwise().any();
  if (!rows.any()) throw ValidationError("tight_box: mask has no foreground pixels");
  BoundingBox box;
  Eigen::Index first = 0, last = rows.size() - 1;
  while (!rows(first)) ++first;
  while (!rows(last)) --last;
  box.y_min = static_cast<int>(first);
  box.y_max = static_cast<int>(last) + 1;
  first = 0;
  last = cols.size() - 1;
  while (!cols(first)) ++first;
  while (!cols(last)) --last;
  box.x_min = static_cast<int>(first);
  box.x_max = static_cast<int>(last) + 1;
  return box;
}

BoundingBox apply_box_offsets(const BoundingBox& box, const BoxOffsets& o, Size2 bounds) {
  BoundingBox out{std::clamp(box.x_min - o[0], 0, bounds.width), std::clamp(box.y_min - o[1], 0, bounds.height),
                  std::clamp(box.x_max + o[2], 0, bounds.width), std::clamp(box.y_max + o[3], 0, bounds.height)};
  if (out.x_min >= out.x_max) {
    out.x_min = box.x_min;
    out.x_max = box.x_max;
  }
  if (out.y_min >= out.y_max) {
    out.y_min = box.y_min;
    out.y_max = box.y_max;
  }
  return out;
}

BoxOffsets draw_box_offsets(const PerturbOptions& opts, Rng& rng) {
  if (opts.max_offset < 0) throw ValidationError("max_offset must be non-negative");
  std::uniform_int_distribution<int> dist(opts.outward_only ? 0 : -opts.max_offset, opts.max_offset);
  BoxOffsets o;
  for (int& v : o) v = dist(rng);
  return o;
}

BoundingBox perturb_box(const BoundingBox& box, const PerturbOptions& opts, Size2 bounds, Rng& rng) {
  return apply_box_offsets(box, draw_box_offsets(opts, rng), bounds);
}

PromptEncoder::PromptEncoder(int embed_dim, const FourierSpec& spec) : embed_dim_(embed_dim), spec_(spec) {
  if (embed_dim < 2) throw ValidationError("prompt embed_dim must be at least 2");
  if (spec.num_frequencies < 1 || 2 * spec.num_frequencies > embed_dim)
    throw ValidationError("prompt num_frequencies must lie in [1, embed_dim / 2]");
  Rng rng = make_rng(spec.seed, 0xB0C5);
  frequencies_ = gaussian_matrix<double>(2, spec.num_frequencies, 1.0, rng) * spec.scale;
  corner_embeddings_ = gaussian_matrix<double>(2, embed_dim, 1.0, rng);
  no_mask_embed_ = gaussian_matrix<double>(1, embed_dim, 1.0, rng);
}

Eigen::MatrixXd PromptEncoder::fourier_features(const Eigen::MatrixX2d& points) const {
  const Eigen::MatrixXd proj = (2.0 * std::numbers::pi) * (points * frequencies_);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(points.rows(), embed_dim_);
  const int nf = spec_.num_frequencies;
  out.leftCols(nf) = proj.array().sin().matrix();
  out.middleCols(nf, nf) = proj.array().cos().matrix();
  return out;
}

Eigen::RowVector2d PromptEncoder::normalize_corner(int x, int y, int image_side) {
  return {(x + 0.5) / image_side, (y + 0.5) / image_side};
}

BoxPrompt PromptEncoder::encode_box(const BoundingBox& box, int image_side) const {
  Eigen::MatrixX2d corners(2, 2);
  corners.row(0) = normalize_corner(box.x_min, box.y_min, image_side);
  corners.row(1) = normalize_corner(box.x_max, box.y_max, image_side);
  return fourier_features(corners) + corner_embeddings_;
}

Eigen::MatrixXd PromptEncoder::dense_positional_encoding(int h, int w) const {
  Eigen::MatrixX2d centres(static_cast<Eigen::Index>(h) * w, 2);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) centres.row(static_cast<Eigen::Index>(y) * w + x) << (x + 0.5) / w, (y + 0.5) / h;
  return fourier_features(centres);
}

std::vector<NamedTensorView> PromptEncoder::parameters() const {
  return {tensor_view("prompt.fourier_frequencies", frequencies_),
          tensor_view("prompt.corner_embeddings", corner_embeddings_),
          tensor_view("prompt.no_mask_embedding", no_mask_embed_)};
}

}  // namespace aquaseg
