#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "aquaseg/autograd.hpp"
#include "aquaseg/encoder.hpp"
#include "aquaseg/prompt.hpp"
#include "aquaseg/random.hpp"
#include "aquaseg/types.hpp"

namespace aquaseg {

inline constexpr int kDecoderLayers = 2;

struct DecoderConfig {
  int embed_dim = 32;
  int num_heads = 4;
  int num_layers = kDecoderLayers;
  int mlp_width = 64;
  int num_mask_tokens = 1;      ///< 1: single-mask mode, 3: SAM-compatible
  int attention_downsample = 2; ///< cross-attention internal width is embed_dim / attention_downsample
  int iou_hidden = 32;
  std::uint64_t seed = 0;
  friend bool operator==(const DecoderConfig&, const DecoderConfig&) = default;
};

/// Throws ValidationError describing the first violated constraint.
void validate(const DecoderConfig& config);

template <typename T>
struct LinearT {
  T weight;  // out x in
  T bias;    // 1 x out
};

template <typename T>
struct LayerNormT {
  T gamma;  // 1 x n
  T beta;
};

template <typename T>
struct AttentionT {
  LinearT<T> q, k, v, out;
};

template <typename T>
struct TwoWayBlockT {
  AttentionT<T> self_attn;
  LayerNormT<T> norm1;
  AttentionT<T> token_to_image;
  LayerNormT<T> norm2;
  LinearT<T> mlp1, mlp2;
  LayerNormT<T> norm3;
  LayerNormT<T> norm4;
  AttentionT<T> image_to_token;
};

/// The mask decoder's tensor tree. Instantiated with matrices for parameters, gradients and
/// optimizer moments, and with tape handles while a forward pass is being recorded.
template <typename T>
struct DecoderTensors {
  T iou_token;    // 1 x C
  T mask_tokens;  // M x C
  std::vector<TwoWayBlockT<T>> layers;
  AttentionT<T> final_attn;
  LayerNormT<T> norm_final;
  // 2x2 stride-2 transposed convolutions; weight is in x (4 * out), column block k = 2*dy + dx.
  T upscale1_weight, upscale1_bias;
  LayerNormT<T> upscale_norm;
  T upscale2_weight, upscale2_bias;
  std::vector<std::array<LinearT<T>, 3>> hypernet;  // one MLP per mask token
  std::array<LinearT<T>, 3> iou_head;
};

template <typename Scalar>
using DecoderParams = DecoderTensors<MatrixX<Scalar>>;

/// Calls f(name, first_tensor, rest_tensors...) over structurally identical trees in a fixed order.
template <typename F, typename First, typename... Rest>
void visit_tensors(F&& f, First& first, Rest&... rest);

/// Empty tree of element type U with the same layer / mask-token counts as `like`.
template <typename U, typename T>
DecoderTensors<U> shaped_like(const DecoderTensors<T>& like) {
  DecoderTensors<U> out;
  out.layers.resize(like.layers.size());
  out.hypernet.resize(like.hypernet.size());
  return out;
}

template <typename Scalar>
DecoderParams<Scalar> zeros_like(const DecoderParams<Scalar>& p);

template <typename Other, typename Scalar>
DecoderParams<Other> cast_params(const DecoderParams<Scalar>& p);

template <typename Scalar>
std::int64_t parameter_count(const DecoderParams<Scalar>& p);

template <typename Scalar>
bool all_finite(const DecoderParams<Scalar>& p);

/// Closed-form parameter count for a config, independent of any allocated tensors.
std::int64_t decoder_parameter_count(const DecoderConfig& config);

/// Size of the learned token table ((1 + num_mask_tokens) * C).
inline std::int64_t token_table_size(const DecoderConfig& c) {
  return static_cast<std::int64_t>(1 + c.num_mask_tokens) * c.embed_dim;
}

/// Seeded Gaussian init scaled by 1/sqrt(fan_in); zero biases; unit LayerNorm gains.
template <typename Scalar>
DecoderParams<Scalar> init_decoder(const DecoderConfig& config);

/// Low-resolution logits and IoU prediction for the selected (first) mask.
template <typename Scalar>
struct MaskLogits {
  Grid<Scalar> grid;  // (4h) x (4w)
  Scalar predicted_iou{};
};

/// Full decoder output: one row per mask token.
template <typename Scalar>
struct DecoderOutput {
  std::vector<Grid<Scalar>> masks;
  VectorX<Scalar> predicted_iou;

  [[nodiscard]] MaskLogits<Scalar> primary() const { return {masks.front(), predicted_iou(0)}; }
};

/// Frozen inputs to one decoder pass.
template <typename Scalar>
struct DecoderInputs {
  MatrixX<Scalar> image_tokens;  // (h*w) x C, embedding plus the no-mask dense embedding
  MatrixX<Scalar> image_pe;      // (h*w) x C
  MatrixX<Scalar> prompt_tokens; // 2 x C
  int height = 0;
  int width = 0;
};

template <typename Scalar>
DecoderInputs<Scalar> make_decoder_inputs(const ImageEmbedding& embedding, const BoxPrompt& prompt,
                                          const PromptEncoder& prompt_encoder);

/// Tape handles for one recorded decoder pass.
struct DecoderTapeOutput {
  ad::Var masks;  // M x (4h * 4w)
  ad::Var iou;    // 1 x M
  int out_height = 0;
  int out_width = 0;
};

/// Records the forward pass. Parameter gradients accumulate into *grads when it is non-null.
/// Throws DivergenceError naming the stage if any intermediate is non-finite.
template <typename Scalar>
DecoderTapeOutput decode_on_tape(ad::Tape<Scalar>& tape, const DecoderConfig& config,
                                 const DecoderParams<Scalar>& params, DecoderParams<Scalar>* grads,
                                 const DecoderInputs<Scalar>& inputs);

template <typename Scalar>
DecoderOutput<Scalar> decode(const DecoderConfig& config, const DecoderParams<Scalar>& params,
                             const DecoderInputs<Scalar>& inputs);

/// Convenience: embedding + box prompt -> logits for the selected mask.
template <typename Scalar>
MaskLogits<Scalar> decode(const DecoderConfig& config, const DecoderParams<Scalar>& params,
                          const ImageEmbedding& embedding, const BoxPrompt& prompt,
                          const PromptEncoder& prompt_encoder);

/// Bilinear to side x side, then bilinear to the original size. Logits already at the
/// original size are returned unchanged.
template <typename Scalar>
Grid<Scalar> upsample_logits(const Grid<Scalar>& logits, int side, Size2 original_size);

/// mask(p) = 1 iff grid(p) > threshold.
template <typename Derived>
Mask binarize(const Eigen::ArrayBase<Derived>& grid, typename Derived::Scalar threshold = 0) {
  return (grid.derived() > threshold).template cast<std::uint8_t>();
}

}  // namespace aquaseg

#include "aquaseg/decoder_impl.hpp"
