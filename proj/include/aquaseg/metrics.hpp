#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "aquaseg/pipeline.hpp"
#include "aquaseg/suim.hpp"

namespace aquaseg {

/// 2|P∩G| / (|P|+|G|); both empty -> 1, exactly one empty -> 0. Throws on shape mismatch.
double dsc(const Mask& pred, const Mask& gt);

/// |P∩G| / |P∪G|; both empty -> 1. Throws on shape mismatch.
double iou(const Mask& pred, const Mask& gt);

enum class IouMode {
  foreground,  ///< foreground IoU per image
  mean_fg_bg,  ///< mean of foreground and background IoU per image
};

double iou(const Mask& pred, const Mask& gt, IouMode mode);

struct MetricsRow {
  std::string task;
  double mean_dsc = 0;  ///< percent, full precision
  double mean_iou = 0;  ///< percent, full precision
  int n_samples = 0;
  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

/// One evaluation target: unperturbed tight box at encoder resolution and ground truth at
/// original resolution.
struct EvalSample {
  TargetKey key;
  std::shared_ptr<const ImageEmbedding> embedding;
  BoundingBox box;
  Mask ground_truth;
};

/// Produces a binary prediction at the ground truth's resolution.
using MaskPredictor = std::function<Mask(const EvalSample&)>;

/// Decode, upsample to the original size, binarize at `threshold`.
template <typename Scalar>
MaskPredictor decoder_predictor(const Pipeline<Scalar>& pipeline, double threshold = 0.0);

/// Per-task arithmetic means in percent. Rows follow `task_order`; tasks without samples are omitted.
std::vector<MetricsRow> evaluate(const std::vector<EvalSample>& samples, const MaskPredictor& predict,
                                 const std::vector<std::string>& task_order, IouMode mode = IouMode::foreground);

/// 100 * (new - old) / old, or nothing when old <= 0.
std::optional<double> relative_improvement(double new_value, double old_value);

/// Half-away-from-zero rounding to 2 decimals, as text ("-12.99", "0.00").
std::string format_percent(double value);

enum class ReportFormat { csv, markdown };

struct ReportMetadata {
  std::uint64_t seed = 0;
  std::string checkpoint_id;
  std::string iou_label = "IoU";
};

/// Columns Task, DSC_new, DSC_base, DSC_improve, IoU_new, IoU_base, IoU_improve and a final
/// MEAN row of simple column means; without a baseline only Task, DSC_new, IoU_new.
/// Throws ValidationError if the baseline's tasks differ from the rows' tasks.
std::string render_report(const std::vector<MetricsRow>& rows, const std::vector<MetricsRow>& baseline,
                          ReportFormat format, const ReportMetadata& meta = {});

/// `task,dsc,iou` with a header line; values in percent.
std::vector<MetricsRow> parse_metrics_csv(const std::string& text, const std::string& source);
std::string metrics_csv(const std::vector<MetricsRow>& rows);

/// One improvement cell of a published table, recomputed from its two percentages.
struct ImprovementCheck {
  std::string task;
  std::string metric;  ///< "DSC" or "IoU"
  double new_value = 0;
  double old_value = 0;
  double printed = 0;
  double computed = 0;
  bool within_tolerance = false;
};

struct PublishedRow {
  std::string task;
  double dsc_new, dsc_old, dsc_improve;
  double iou_new, iou_old, iou_improve;
};

std::vector<ImprovementCheck> audit_improvements(const std::vector<PublishedRow>& rows, double tolerance);

}  // namespace aquaseg
