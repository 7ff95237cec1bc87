#pragma once

// In-memory synthetic training set: rendered images, toy-encoder embeddings, and targets
// prepared the same way the CLI prepares them.

#include <memory>
#include <vector>

#include "aquaseg/metrics.hpp"
#include "aquaseg/synth.hpp"
#include "aquaseg/trainer.hpp"

struct SynthFixture {
  std::vector<aquaseg::SynthImage> images;
  std::vector<aquaseg::TrainSample> train;
  std::vector<aquaseg::EvalSample> eval;  // same targets, ground truth at native resolution
  aquaseg::Pipeline<double> pipeline;
};

inline aquaseg::DecoderConfig toy_decoder_config(int embed_dim, std::uint64_t seed = 0) {
  aquaseg::DecoderConfig c;
  c.embed_dim = embed_dim;
  c.num_heads = 4;
  c.mlp_width = 2 * embed_dim;
  c.iou_hidden = embed_dim;
  c.seed = seed;
  return c;
}

inline SynthFixture make_synth_fixture(int n_images, int side, int embed_dim, std::uint64_t seed) {
  using namespace aquaseg;
  const ClassMap classes = default_suim_classes();
  auto encoder = std::make_shared<ToyEncoder>(embed_dim, seed);
  SynthFixture f{render_synthetic_dataset(classes, {n_images, seed, side, false}), {}, {},
                 Pipeline<double>{encoder, PromptEncoder(embed_dim, {embed_dim / 2, 1.0, seed}),
                                  toy_decoder_config(embed_dim, seed),
                                  init_decoder<double>(toy_decoder_config(embed_dim, seed)), side}};
  for (const auto& img : f.images) {
    auto emb = std::make_shared<const ImageEmbedding>(
        encoder->encode(normalize_image(img.image), side, img.image_id));
    for (const auto& cls : classes) {
      const Mask& m = img.masks.at(cls.code);
      if (count_foreground(m) < 100) continue;
      const BoundingBox box = tight_box(m);
      f.train.push_back({{img.image_id, cls.code}, emb, box, resize_nearest(m, side / 4, side / 4)});
      f.eval.push_back({{img.image_id, cls.code}, emb, box, m});
    }
  }
  return f;
}
