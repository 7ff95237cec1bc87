#include "aquaseg/decoder.hpp"

namespace aquaseg {

void validate(const DecoderConfig& c) {
  auto fail = [](const std::string& msg) { throw ValidationError("decoder config: " + msg); };
  if (c.embed_dim < 8 || c.embed_dim % 8 != 0) fail("embed_dim must be a positive multiple of 8");
  if (c.num_heads < 1) fail("num_heads must be positive");
  if (c.embed_dim % c.num_heads != 0) fail("embed_dim must be divisible by num_heads");
  if (c.num_layers != kDecoderLayers) fail("num_layers is fixed at 2");
  if (c.attention_downsample < 1 || c.embed_dim % c.attention_downsample != 0)
    fail("embed_dim must be divisible by attention_downsample");
  if ((c.embed_dim / c.attention_downsample) % c.num_heads != 0)
    fail("cross-attention width embed_dim / attention_downsample must be divisible by num_heads");
  if (c.mlp_width < 1) fail("mlp_width must be positive");
  if (c.iou_hidden < 1) fail("iou_hidden must be positive");
  if (c.num_mask_tokens < 1) fail("num_mask_tokens must be at least 1");
}

std::int64_t decoder_parameter_count(const DecoderConfig& config) {
  validate(config);
  const std::int64_t c = config.embed_dim;
  const std::int64_t m = config.num_mask_tokens;
  const std::int64_t cross = c / config.attention_downsample;
  const std::int64_t mlp = config.mlp_width;
  const std::int64_t hid = config.iou_hidden;
  auto linear = [](std::int64_t in, std::int64_t out) { return in * out + out; };
  auto attention = [&](std::int64_t internal) { return 3 * linear(c, internal) + linear(internal, c); };
  const std::int64_t norm = 2 * c;

  const std::int64_t block = attention(c) + attention(cross) * 2 + linear(c, mlp) + linear(mlp, c) + 4 * norm;
  std::int64_t total = token_table_size(config);
  total += config.num_layers * block;
  total += attention(cross) + norm;
  total += c * c + c / 4 + 2 * (c / 4) + (c / 4) * 4 * (c / 8) + c / 8;
  total += m * (2 * linear(c, c) + linear(c, c / 8));
  total += linear(c, hid) + linear(hid, hid) + linear(hid, m);
  return total;
}

}  // namespace aquaseg
