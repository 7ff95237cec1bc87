#include "aquaseg/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "aquaseg/loss.hpp"

namespace aquaseg {

void validate(const TrainConfig& c) {
  if (!(c.learning_rate > 0)) throw ValidationError("train.learning_rate must be positive");
  if (!(c.beta1 >= 0 && c.beta1 < 1) || !(c.beta2 >= 0 && c.beta2 < 1))
    throw ValidationError("train betas must lie in [0, 1)");
  if (!(c.epsilon > 0)) throw ValidationError("train.epsilon must be positive");
  if (c.batch_size < 1) throw ValidationError("train.batch_size must be at least 1");
  if (c.max_epochs < 1) throw ValidationError("train.max_epochs must be at least 1");
  if (c.max_steps < 0) throw ValidationError("train.max_steps must be non-negative");
  if (c.checkpoint_every < 0) throw ValidationError("train.checkpoint_every must be non-negative");
  if (!(c.dice_eps > 0)) throw ValidationError("train.dice_eps must be positive");
  if (!(c.val_fraction >= 0 && c.val_fraction < 1)) throw ValidationError("train.val_fraction must lie in [0, 1)");
  if (!(c.iou_loss_weight >= 0)) throw ValidationError("train.iou_loss_weight must be non-negative");
  (void)make_lr_schedule(c);
}

std::function<double(std::int64_t)> make_lr_schedule(const TrainConfig& c) {
  if (c.lr_schedule == "constant") return [lr = c.learning_rate](std::int64_t) { return lr; };
  throw ValidationError("train.lr_schedule: unknown schedule '" + c.lr_schedule + "'");
}

std::string history_csv(const std::vector<LossRecord>& history) {
  std::ostringstream out;
  out << "step,dice,ce,total\n";
  char buf[128];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g\n", static_cast<long long>(r.step), r.dice, r.ce, r.total);
    out << buf;
  }
  return out.str();
}

std::pair<std::vector<TrainSample>, std::vector<TrainSample>> split_validation(std::vector<TrainSample> samples,
                                                                               double fraction, std::uint64_t seed) {
  if (fraction <= 0 || samples.size() < 2) return {std::move(samples), {}};
  auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(samples.size())));
  n_val = std::clamp<std::size_t>(n_val, 1, samples.size() - 1);
  Rng rng = make_rng(seed, 0x5A11D);
  std::shuffle(samples.begin(), samples.end(), rng);
  std::vector<TrainSample> val(std::make_move_iterator(samples.end() - static_cast<std::ptrdiff_t>(n_val)),
                               std::make_move_iterator(samples.end()));
  samples.resize(samples.size() - n_val);
  return {std::move(samples), std::move(val)};
}

namespace {

template <typename Scalar>
struct SampleResult {
  LossTerms<Scalar> loss;
  Scalar iou_term{};
};

double mask_iou(const Mask& a, const Mask& b) {
  const auto inter = (a.cast<int>() * b.cast<int>()).sum();
  const auto uni = ((a.cast<int>() + b.cast<int>()) > 0).cast<int>().sum();
  return uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
}

/// Forward + backward for one sample; gradients accumulate into *grads scaled by `weight`.
template <typename Scalar>
SampleResult<Scalar> run_sample(const Pipeline<Scalar>& pipeline, const TrainSample& s, const BoundingBox& box,
                                double dice_eps, double iou_weight, double weight, DecoderParams<Scalar>* grads) {
  const auto prompt = pipeline.prompt.encode_box(box, pipeline.input_side);
  const auto inputs = make_decoder_inputs<Scalar>(*s.embedding, prompt, pipeline.prompt);
  ad::Tape<Scalar> tape;
  const auto out = decode_on_tape(tape, pipeline.decoder_config, pipeline.decoder, grads, inputs);
  const MatrixX<Scalar>& masks = tape.value(out.masks);
  if (s.target.rows() != out.out_height || s.target.cols() != out.out_width)
    throw ValidationError("target for " + s.key.image_id + "/" + s.key.class_code + " is " +
                          std::to_string(s.target.rows()) + "x" + std::to_string(s.target.cols()) +
                          " but the decoder emits " + std::to_string(out.out_height) + "x" +
                          std::to_string(out.out_width));
  const RowVectorX<Scalar> row0 = masks.row(0);
  const Grid<Scalar> logits = Eigen::Map<const Grid<Scalar>>(row0.data(), out.out_height, out.out_width);

  SampleResult<Scalar> r;
  Grid<Scalar> dlogits;
  r.loss = total_loss_with_grad(logits, s.target, static_cast<Scalar>(dice_eps), dlogits);
  const Scalar predicted_iou = tape.value(out.iou)(0, 0);
  Scalar iou_error{};
  if (iou_weight > 0) {
    iou_error = predicted_iou - static_cast<Scalar>(mask_iou(binarize(logits), s.target));
    r.iou_term = static_cast<Scalar>(iou_weight) * iou_error * iou_error;
  }
  if (grads == nullptr || !std::isfinite(static_cast<double>(r.loss.total + r.iou_term))) return r;

  MatrixX<Scalar> seed_masks = MatrixX<Scalar>::Zero(masks.rows(), masks.cols());
  seed_masks.row(0) = Eigen::Map<const RowVectorX<Scalar>>(dlogits.data(), dlogits.size()) * static_cast<Scalar>(weight);
  tape.backward(out.masks, seed_masks);
  if (iou_weight > 0) {
    MatrixX<Scalar> seed_iou = MatrixX<Scalar>::Zero(1, masks.rows());
    seed_iou(0, 0) = static_cast<Scalar>(2 * iou_weight * weight) * iou_error;
    tape.backward(out.iou, seed_iou);
  }
  return r;
}

}  // namespace

template <typename Scalar>
LossRecord evaluate_loss(const Pipeline<Scalar>& pipeline, const std::vector<TrainSample>& samples, double dice_eps) {
  LossRecord rec;
  if (samples.empty()) return rec;
  double dice = 0, ce = 0;
  for (const auto& s : samples) {
    const auto r = run_sample(pipeline, s, s.box, dice_eps, 0.0, 0.0, static_cast<DecoderParams<Scalar>*>(nullptr));
    dice += static_cast<double>(r.loss.dice);
    ce += static_cast<double>(r.loss.ce);
  }
  rec.dice = dice / static_cast<double>(samples.size());
  rec.ce = ce / static_cast<double>(samples.size());
  rec.total = rec.dice + rec.ce;
  return rec;
}

template <typename Scalar>
TrainResult<Scalar> train(Pipeline<Scalar>& pipeline, const std::vector<TrainSample>& train_set,
                          const std::vector<TrainSample>& val_set, const TrainConfig& config,
                          const PerturbOptions& perturb, const CheckpointSink<Scalar>& sink) {
  validate(config);
  validate(pipeline.decoder_config);
  if (train_set.empty()) throw ValidationError("training set is empty");
  for (const auto* set : {&train_set, &val_set})
    for (const auto& s : *set)
      if (!s.embedding)
        throw MissingArtifactError("no cached embedding for image " + s.key.image_id + "; run `aquaseg embed`");

  const auto lr_at = make_lr_schedule(config);
  const Size2 bounds{pipeline.input_side, pipeline.input_side};
  const auto emit = [&sink](CheckpointKind kind, std::int64_t step, const DecoderParams<Scalar>& p) {
    if (sink) sink(kind, step, p);
  };

  TrainResult<Scalar> result;
  auto& st = result.state;
  st.adam = AdamState<Scalar>::zeros_for(pipeline.decoder);
  st.rng = make_rng(config.seed, 0x7EA1);
  result.best = pipeline.decoder;

  const auto n = train_set.size();
  const auto batch = static_cast<std::size_t>(config.batch_size);
  const std::int64_t steps_per_epoch = static_cast<std::int64_t>((n + batch - 1) / batch);
  const std::int64_t total_steps =
      config.max_steps > 0 ? config.max_steps : steps_per_epoch * static_cast<std::int64_t>(config.max_epochs);

  auto consider_best = [&]() {
    if (val_set.empty()) return;
    const double v = evaluate_loss(pipeline, val_set, config.dice_eps).total;
    if (std::isfinite(v) && (!result.best_val_loss || v < *result.best_val_loss)) {
      result.best_val_loss = v;
      result.best = pipeline.decoder;
      result.best_step = st.step;
    }
  };

  std::vector<std::size_t> order(n);
  std::size_t cursor = n;
  while (st.step < total_steps) {
    if (cursor >= n) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), st.rng);
      cursor = 0;
    }
    const std::size_t b = std::min(batch, n - cursor);
    std::vector<BoundingBox> boxes(b);
    for (std::size_t i = 0; i < b; ++i)
      boxes[i] = perturb_box(train_set[order[cursor + i]].box, perturb, bounds, st.rng);

    const std::int64_t step = st.step + 1;
    auto grads = zeros_like(pipeline.decoder);
    double dice = 0, ce = 0;
    try {
      for (std::size_t i = 0; i < b; ++i) {
        const auto r = run_sample(pipeline, train_set[order[cursor + i]], boxes[i], config.dice_eps,
                                  config.iou_loss_weight, 1.0 / static_cast<double>(b), &grads);
        if (!std::isfinite(static_cast<double>(r.loss.total + r.iou_term)))
          throw DivergenceError("non-finite loss at step " + std::to_string(step));
        dice += static_cast<double>(r.loss.dice);
        ce += static_cast<double>(r.loss.ce);
      }
      AdamOptions opts{lr_at(step), config.beta1, config.beta2, config.epsilon};
      adam_step(pipeline.decoder, grads, st.adam, opts);
    } catch (const DivergenceError& e) {
      emit(CheckpointKind::last_good, st.step, pipeline.decoder);
      throw DivergenceError(std::string(e.what()) + " (step " + std::to_string(step) + ")");
    }
    cursor += b;
    st.step = step;
    LossRecord rec;
    rec.step = step;
    rec.dice = dice / static_cast<double>(b);
    rec.ce = ce / static_cast<double>(b);
    rec.total = rec.dice + rec.ce;
    st.history.push_back(rec);

    if (config.checkpoint_every > 0 && step % config.checkpoint_every == 0 && step < total_steps)
      emit(CheckpointKind::periodic, step, pipeline.decoder);
    if (cursor >= n || step == total_steps) consider_best();
  }

  if (val_set.empty()) {
    result.best = pipeline.decoder;
    result.best_step = st.step;
  }
  emit(CheckpointKind::final, st.step, pipeline.decoder);
  emit(CheckpointKind::best, result.best_step, result.best);
  return result;
}

template LossRecord evaluate_loss<float>(const Pipeline<float>&, const std::vector<TrainSample>&, double);
template LossRecord evaluate_loss<double>(const Pipeline<double>&, const std::vector<TrainSample>&, double);
template TrainResult<float> train<float>(Pipeline<float>&, const std::vector<TrainSample>&,
                                         const std::vector<TrainSample>&, const TrainConfig&, const PerturbOptions&,
                                         const CheckpointSink<float>&);
template TrainResult<double> train<double>(Pipeline<double>&, const std::vector<TrainSample>&,
                                           const std::vector<TrainSample>&, const TrainConfig&, const PerturbOptions&,
                                           const CheckpointSink<double>&);

}  // namespace aquaseg
