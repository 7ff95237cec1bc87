#pragma once

// Template definitions for decoder.hpp.

#include <cmath>
#include <string>

#include "aquaseg/image.hpp"

namespace aquaseg {

template <typename F, typename First, typename... Rest>
void visit_tensors(F&& f, First& first, Rest&... rest) {
  auto lin = [&](const std::string& n, auto& a, auto&... b) {
    f(n + ".weight", a.weight, b.weight...);
    f(n + ".bias", a.bias, b.bias...);
  };
  auto ln = [&](const std::string& n, auto& a, auto&... b) {
    f(n + ".gamma", a.gamma, b.gamma...);
    f(n + ".beta", a.beta, b.beta...);
  };
  auto attn = [&](const std::string& n, auto& a, auto&... b) {
    lin(n + ".q", a.q, b.q...);
    lin(n + ".k", a.k, b.k...);
    lin(n + ".v", a.v, b.v...);
    lin(n + ".out", a.out, b.out...);
  };

  f(std::string("decoder.iou_token"), first.iou_token, rest.iou_token...);
  f(std::string("decoder.mask_tokens"), first.mask_tokens, rest.mask_tokens...);
  for (std::size_t i = 0; i < first.layers.size(); ++i) {
    const std::string p = "decoder.layers." + std::to_string(i);
    attn(p + ".self_attn", first.layers[i].self_attn, rest.layers[i].self_attn...);
    ln(p + ".norm1", first.layers[i].norm1, rest.layers[i].norm1...);
    attn(p + ".token_to_image", first.layers[i].token_to_image, rest.layers[i].token_to_image...);
    ln(p + ".norm2", first.layers[i].norm2, rest.layers[i].norm2...);
    lin(p + ".mlp1", first.layers[i].mlp1, rest.layers[i].mlp1...);
    lin(p + ".mlp2", first.layers[i].mlp2, rest.layers[i].mlp2...);
    ln(p + ".norm3", first.layers[i].norm3, rest.layers[i].norm3...);
    ln(p + ".norm4", first.layers[i].norm4, rest.layers[i].norm4...);
    attn(p + ".image_to_token", first.layers[i].image_to_token, rest.layers[i].image_to_token...);
  }
  attn("decoder.final_attn", first.final_attn, rest.final_attn...);
  ln("decoder.norm_final", first.norm_final, rest.norm_final...);
  f(std::string("decoder.upscale1.weight"), first.upscale1_weight, rest.upscale1_weight...);
  f(std::string("decoder.upscale1.bias"), first.upscale1_bias, rest.upscale1_bias...);
  ln("decoder.upscale_norm", first.upscale_norm, rest.upscale_norm...);
  f(std::string("decoder.upscale2.weight"), first.upscale2_weight, rest.upscale2_weight...);
  f(std::string("decoder.upscale2.bias"), first.upscale2_bias, rest.upscale2_bias...);
  for (std::size_t m = 0; m < first.hypernet.size(); ++m)
    for (std::size_t l = 0; l < 3; ++l)
      lin("decoder.hypernet." + std::to_string(m) + "." + std::to_string(l), first.hypernet[m][l],
          rest.hypernet[m][l]...);
  for (std::size_t l = 0; l < 3; ++l)
    lin("decoder.iou_head." + std::to_string(l), first.iou_head[l], rest.iou_head[l]...);
}

template <typename Scalar>
DecoderParams<Scalar> zeros_like(const DecoderParams<Scalar>& p) {
  auto out = shaped_like<MatrixX<Scalar>>(p);
  visit_tensors([](const std::string&, MatrixX<Scalar>& o, const MatrixX<Scalar>& src) {
    o = MatrixX<Scalar>::Zero(src.rows(), src.cols());
  }, out, p);
  return out;
}

template <typename Other, typename Scalar>
DecoderParams<Other> cast_params(const DecoderParams<Scalar>& p) {
  auto out = shaped_like<MatrixX<Other>>(p);
  visit_tensors([](const std::string&, MatrixX<Other>& o, const MatrixX<Scalar>& src) { o = src.template cast<Other>(); },
                out, p);
  return out;
}

template <typename Scalar>
std::int64_t parameter_count(const DecoderParams<Scalar>& p) {
  std::int64_t n = 0;
  visit_tensors([&n](const std::string&, const MatrixX<Scalar>& m) { n += m.size(); }, p);
  return n;
}

template <typename Scalar>
bool all_finite(const DecoderParams<Scalar>& p) {
  bool ok = true;
  visit_tensors([&ok](const std::string&, const MatrixX<Scalar>& m) { ok = ok && m.allFinite(); }, p);
  return ok;
}

template <typename Scalar>
DecoderParams<Scalar> init_decoder(const DecoderConfig& config) {
  validate(config);
  const int c = config.embed_dim;
  const int cross = c / config.attention_downsample;
  Rng rng = make_rng(config.seed, 0xDEC0DE);

  auto linear = [&](int in, int out) {
    return LinearT<MatrixX<Scalar>>{gaussian_matrix<Scalar>(out, in, 1.0 / std::sqrt(double(in)), rng),
                                    MatrixX<Scalar>::Zero(1, out)};
  };
  auto norm = [](int n) {
    return LayerNormT<MatrixX<Scalar>>{MatrixX<Scalar>::Ones(1, n), MatrixX<Scalar>::Zero(1, n)};
  };
  auto attention = [&](int internal) {
    AttentionT<MatrixX<Scalar>> a;
    a.q = linear(c, internal);
    a.k = linear(c, internal);
    a.v = linear(c, internal);
    a.out = linear(internal, c);
    return a;
  };

  DecoderParams<Scalar> p;
  p.iou_token = gaussian_matrix<Scalar>(1, c, 1.0, rng);
  p.mask_tokens = gaussian_matrix<Scalar>(config.num_mask_tokens, c, 1.0, rng);
  for (int i = 0; i < config.num_layers; ++i) {
    TwoWayBlockT<MatrixX<Scalar>> b;
    b.self_attn = attention(c);
    b.norm1 = norm(c);
    b.token_to_image = attention(cross);
    b.norm2 = norm(c);
    b.mlp1 = linear(c, config.mlp_width);
    b.mlp2 = linear(config.mlp_width, c);
    b.norm3 = norm(c);
    b.norm4 = norm(c);
    b.image_to_token = attention(cross);
    p.layers.push_back(std::move(b));
  }
  p.final_attn = attention(cross);
  p.norm_final = norm(c);
  p.upscale1_weight = gaussian_matrix<Scalar>(c, 4 * (c / 4), 1.0 / std::sqrt(double(c)), rng);
  p.upscale1_bias = MatrixX<Scalar>::Zero(1, c / 4);
  p.upscale_norm = norm(c / 4);
  p.upscale2_weight = gaussian_matrix<Scalar>(c / 4, 4 * (c / 8), 1.0 / std::sqrt(double(c / 4)), rng);
  p.upscale2_bias = MatrixX<Scalar>::Zero(1, c / 8);
  for (int m = 0; m < config.num_mask_tokens; ++m) p.hypernet.push_back({linear(c, c), linear(c, c), linear(c, c / 8)});
  p.iou_head = {linear(c, config.iou_hidden), linear(config.iou_hidden, config.iou_hidden),
                linear(config.iou_hidden, config.num_mask_tokens)};
  return p;
}

template <typename Scalar>
DecoderInputs<Scalar> make_decoder_inputs(const ImageEmbedding& embedding, const BoxPrompt& prompt,
                                          const PromptEncoder& prompt_encoder) {
  if (embedding.embed_dim != prompt_encoder.embed_dim())
    throw ValidationError("embedding channel count " + std::to_string(embedding.embed_dim) +
                          " does not match prompt encoder width " + std::to_string(prompt_encoder.embed_dim()));
  DecoderInputs<Scalar> in;
  in.height = embedding.height;
  in.width = embedding.width;
  in.image_tokens = embedding.grid.transpose().template cast<Scalar>();
  in.image_tokens.rowwise() += prompt_encoder.no_mask_embedding().template cast<Scalar>();
  in.image_pe = prompt_encoder.dense_positional_encoding(embedding.height, embedding.width).template cast<Scalar>();
  in.prompt_tokens = prompt.template cast<Scalar>();
  return in;
}

namespace detail {

template <typename Scalar>
ad::Var attention(ad::Tape<Scalar>& t, ad::Var q, ad::Var k, ad::Var v, const AttentionT<ad::Var>& p, int heads) {
  using namespace ad;
  const Var qp = linear(t, q, p.q.weight, p.q.bias);
  const Var kp = linear(t, k, p.k.weight, p.k.bias);
  const Var vp = linear(t, v, p.v.weight, p.v.bias);
  const Eigen::Index internal = t.value(qp).cols();
  const Eigen::Index head_dim = internal / heads;
  const Scalar inv_sqrt = Scalar(1) / std::sqrt(static_cast<Scalar>(head_dim));
  std::vector<Var> outs;
  outs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    const Var qh = slice_cols(t, qp, h * head_dim, head_dim);
    const Var kh = slice_cols(t, kp, h * head_dim, head_dim);
    const Var vh = slice_cols(t, vp, h * head_dim, head_dim);
    const Var weights = softmax_rows(t, scale(t, matmul_nt(t, qh, kh), inv_sqrt));
    outs.push_back(matmul(t, weights, vh));
  }
  const Var merged = heads == 1 ? outs.front() : concat_cols(t, outs);
  return linear(t, merged, p.out.weight, p.out.bias);
}

template <typename Scalar>
ad::Var mlp3(ad::Tape<Scalar>& t, ad::Var x, const std::array<LinearT<ad::Var>, 3>& layers) {
  using namespace ad;
  x = relu(t, linear(t, x, layers[0].weight, layers[0].bias));
  x = relu(t, linear(t, x, layers[1].weight, layers[1].bias));
  return linear(t, x, layers[2].weight, layers[2].bias);
}

template <typename Scalar>
void require_finite(const ad::Tape<Scalar>& t, ad::Var v, const std::string& stage) {
  if (!t.value(v).allFinite()) throw DivergenceError("decoder produced non-finite values in stage: " + stage);
}

}  // namespace detail

template <typename Scalar>
DecoderTapeOutput decode_on_tape(ad::Tape<Scalar>& tape, const DecoderConfig& config,
                                 const DecoderParams<Scalar>& params, DecoderParams<Scalar>* grads,
                                 const DecoderInputs<Scalar>& inputs) {
  using namespace ad;
  const int c = config.embed_dim;
  if (inputs.image_tokens.cols() != c || params.iou_token.cols() != c)
    throw ValidationError("decoder input width does not match decoder embed_dim " + std::to_string(c));
  if (inputs.image_tokens.rows() != static_cast<Eigen::Index>(inputs.height) * inputs.width)
    throw ValidationError("decoder image tokens do not match the declared grid");

  auto v = shaped_like<Var>(params);
  if (grads != nullptr) {
    visit_tensors([&tape](const std::string&, Var& leaf, const MatrixX<Scalar>& p, MatrixX<Scalar>& g) {
      leaf = tape.parameter(p, &g);
    }, v, params, *grads);
  } else {
    visit_tensors([&tape](const std::string&, Var& leaf, const MatrixX<Scalar>& p) { leaf = tape.parameter(p, nullptr); },
                  v, params);
  }

  const Var image = tape.constant(inputs.image_tokens);
  const Var image_pe = tape.constant(inputs.image_pe);
  const Var prompt = tape.constant(inputs.prompt_tokens);
  if (!tape.value(image).allFinite()) throw DivergenceError("decoder produced non-finite values in stage: embedding");

  const Var query_pe = concat_rows(tape, {v.iou_token, v.mask_tokens, prompt});
  Var queries = query_pe;
  Var keys = image;
  const int heads = config.num_heads;

  for (std::size_t i = 0; i < v.layers.size(); ++i) {
    const auto& b = v.layers[i];
    if (i == 0) {
      queries = detail::attention(tape, queries, queries, queries, b.self_attn, heads);
    } else {
      const Var q = add(tape, queries, query_pe);
      queries = add(tape, queries, detail::attention(tape, q, q, queries, b.self_attn, heads));
    }
    queries = layer_norm(tape, queries, b.norm1.gamma, b.norm1.beta, Scalar(1e-5));

    Var q = add(tape, queries, query_pe);
    Var k = add(tape, keys, image_pe);
    queries = add(tape, queries, detail::attention(tape, q, k, keys, b.token_to_image, heads));
    queries = layer_norm(tape, queries, b.norm2.gamma, b.norm2.beta, Scalar(1e-5));

    const Var hidden = relu(tape, linear(tape, queries, b.mlp1.weight, b.mlp1.bias));
    queries = add(tape, queries, linear(tape, hidden, b.mlp2.weight, b.mlp2.bias));
    queries = layer_norm(tape, queries, b.norm3.gamma, b.norm3.beta, Scalar(1e-5));

    q = add(tape, queries, query_pe);
    k = add(tape, keys, image_pe);
    keys = add(tape, keys, detail::attention(tape, k, q, queries, b.image_to_token, heads));
    keys = layer_norm(tape, keys, b.norm4.gamma, b.norm4.beta, Scalar(1e-5));

    detail::require_finite(tape, queries, "transformer layer " + std::to_string(i) + " tokens");
    detail::require_finite(tape, keys, "transformer layer " + std::to_string(i) + " image");
  }

  {
    const Var q = add(tape, queries, query_pe);
    const Var k = add(tape, keys, image_pe);
    queries = add(tape, queries, detail::attention(tape, q, k, keys, v.final_attn, heads));
    queries = layer_norm(tape, queries, v.norm_final.gamma, v.norm_final.beta, Scalar(1e-5));
    detail::require_finite(tape, queries, "final token attention");
  }

  const int m = config.num_mask_tokens;
  const Var iou_token_out = slice_rows(tape, queries, 0, 1);

  const int h = inputs.height, w = inputs.width;
  Var up = pixel_shuffle(tape, matmul(tape, keys, v.upscale1_weight), h, w, c / 4);
  up = add_row(tape, up, v.upscale1_bias);
  up = gelu(tape, layer_norm(tape, up, v.upscale_norm.gamma, v.upscale_norm.beta, Scalar(1e-6)));
  up = pixel_shuffle(tape, matmul(tape, up, v.upscale2_weight), 2 * h, 2 * w, c / 8);
  up = gelu(tape, add_row(tape, up, v.upscale2_bias));
  detail::require_finite(tape, up, "upscaling");

  std::vector<Var> hyper;
  for (int i = 0; i < m; ++i) hyper.push_back(detail::mlp3(tape, slice_rows(tape, queries, 1 + i, 1), v.hypernet[i]));
  const Var hyper_in = m == 1 ? hyper.front() : concat_rows(tape, hyper);
  const Var masks = matmul_nt(tape, hyper_in, up);
  detail::require_finite(tape, masks, "mask head");

  const Var iou = detail::mlp3(tape, iou_token_out, v.iou_head);
  detail::require_finite(tape, iou, "iou head");
  return {masks, iou, 4 * h, 4 * w};
}

template <typename Scalar>
DecoderOutput<Scalar> decode(const DecoderConfig& config, const DecoderParams<Scalar>& params,
                             const DecoderInputs<Scalar>& inputs) {
  ad::Tape<Scalar> tape;
  const auto out = decode_on_tape(tape, config, params, static_cast<DecoderParams<Scalar>*>(nullptr), inputs);
  DecoderOutput<Scalar> result;
  const auto& masks = tape.value(out.masks);
  for (Eigen::Index i = 0; i < masks.rows(); ++i) {
    const RowVectorX<Scalar> row = masks.row(i);
    result.masks.push_back(Eigen::Map<const Grid<Scalar>>(row.data(), out.out_height, out.out_width));
  }
  result.predicted_iou = tape.value(out.iou).row(0).transpose();
  return result;
}

template <typename Scalar>
MaskLogits<Scalar> decode(const DecoderConfig& config, const DecoderParams<Scalar>& params,
                          const ImageEmbedding& embedding, const BoxPrompt& prompt,
                          const PromptEncoder& prompt_encoder) {
  return decode(config, params, make_decoder_inputs<Scalar>(embedding, prompt, prompt_encoder)).primary();
}

template <typename Scalar>
Grid<Scalar> upsample_logits(const Grid<Scalar>& logits, int side, Size2 original_size) {
  if (original_size.height < 1 || original_size.width < 1) throw ValidationError("original size must be positive");
  if (logits.rows() == original_size.height && logits.cols() == original_size.width) return logits;
  const Grid<Scalar> full = resize_bilinear(logits, side, side);
  return resize_bilinear(full, original_size.height, original_size.width);
}

}  // namespace aquaseg
