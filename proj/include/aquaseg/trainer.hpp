#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "aquaseg/adam.hpp"
#include "aquaseg/pipeline.hpp"
#include "aquaseg/suim.hpp"

namespace aquaseg {

struct TrainConfig {
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 4;
  int max_epochs = 100;
  std::int64_t max_steps = 0;         ///< 0: run max_epochs full epochs
  std::uint64_t seed = 0;
  std::int64_t checkpoint_every = 100;  ///< 0: only the final checkpoint
  double dice_eps = 1.0;
  double val_fraction = 0.1;          ///< held out from train for best-checkpoint selection
  double iou_loss_weight = 0.0;       ///< squared error on the IoU head; 0 leaves it untrained
  std::string lr_schedule = "constant";
  std::vector<std::string> tasks;     ///< empty: every task
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void validate(const TrainConfig& config);

/// Learning rate at a 1-based step. Only "constant" is defined.
std::function<double(std::int64_t)> make_lr_schedule(const TrainConfig& config);

/// One supervised target, prepared at encoder resolution.
struct TrainSample {
  TargetKey key;
  std::shared_ptr<const ImageEmbedding> embedding;
  BoundingBox box;  ///< tight box in side x side coordinates
  Mask target;      ///< (side/4) x (side/4), nearest-resized from the side x side mask
};

struct LossRecord {
  std::int64_t step = 0;
  double dice = 0;
  double ce = 0;
  double total = 0;  ///< dice + ce
  friend bool operator==(const LossRecord&, const LossRecord&) = default;
};

std::string history_csv(const std::vector<LossRecord>& history);

template <typename Scalar>
struct TrainState {
  std::int64_t step = 0;
  AdamState<Scalar> adam;
  Rng rng;
  std::vector<LossRecord> history;
};

enum class CheckpointKind { periodic, final, best, last_good };

template <typename Scalar>
using CheckpointSink = std::function<void(CheckpointKind, std::int64_t step, const DecoderParams<Scalar>&)>;

template <typename Scalar>
struct TrainResult {
  TrainState<Scalar> state;
  DecoderParams<Scalar> best;  ///< lowest validation loss; the final params when there is no validation set
  std::int64_t best_step = 0;
  std::optional<double> best_val_loss;
};

/// Deterministic hold-out of round(fraction * n) samples (at least one, never all, when fraction > 0).
std::pair<std::vector<TrainSample>, std::vector<TrainSample>> split_validation(std::vector<TrainSample> samples,
                                                                               double fraction, std::uint64_t seed);

/// Mean loss of one decoder pass per sample with unperturbed boxes.
template <typename Scalar>
LossRecord evaluate_loss(const Pipeline<Scalar>& pipeline, const std::vector<TrainSample>& samples, double dice_eps);

/// Fine-tunes pipeline.decoder in place. Encoder and prompt encoder are only read.
///
/// Each epoch shuffles the training samples; each step draws every box perturbation for the
/// batch before decoding, so the trajectory depends only on (samples, config, seed).
/// A non-finite loss or gradient emits the last good parameters to the sink with
/// CheckpointKind::last_good and rethrows DivergenceError.
template <typename Scalar>
TrainResult<Scalar> train(Pipeline<Scalar>& pipeline, const std::vector<TrainSample>& train_set,
                          const std::vector<TrainSample>& val_set, const TrainConfig& config,
                          const PerturbOptions& perturb, const CheckpointSink<Scalar>& sink = {});

}  // namespace aquaseg
