#include "aquaseg/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace aquaseg {
namespace {

struct Counts {
  std::int64_t inter = 0, pred = 0, gt = 0;
};

Counts count(const Mask& p, const Mask& g) {
  if (p.rows() != g.rows() || p.cols() != g.cols())
    throw ValidationError("metric inputs differ in shape: " + std::to_string(p.rows()) + "x" +
                          std::to_string(p.cols()) + " vs " + std::to_string(g.rows()) + "x" +
                          std::to_string(g.cols()));
  const auto pb = (p != 0).cast<std::int64_t>();
  const auto gb = (g != 0).cast<std::int64_t>();
  return {(pb * gb).sum(), pb.sum(), gb.sum()};
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

double dsc(const Mask& pred, const Mask& gt) {
  const auto c = count(pred, gt);
  if (c.pred + c.gt == 0) return 1.0;
  return 2.0 * static_cast<double>(c.inter) / static_cast<double>(c.pred + c.gt);
}

double iou(const Mask& pred, const Mask& gt) {
  const auto c = count(pred, gt);
  const std::int64_t uni = c.pred + c.gt - c.inter;
  if (uni == 0) return 1.0;
  return static_cast<double>(c.inter) / static_cast<double>(uni);
}

double iou(const Mask& pred, const Mask& gt, IouMode mode) {
  if (mode == IouMode::foreground) return iou(pred, gt);
  const Mask pb = (pred == 0).cast<std::uint8_t>();
  const Mask gb = (gt == 0).cast<std::uint8_t>();
  return 0.5 * (iou(pred, gt) + iou(pb, gb));
}

template <typename Scalar>
MaskPredictor decoder_predictor(const Pipeline<Scalar>& pipeline, double threshold) {
  return [&pipeline, threshold](const EvalSample& s) {
    if (!s.embedding) throw MissingArtifactError("no cached embedding for image " + s.key.image_id);
    const auto prompt = pipeline.prompt.encode_box(s.box, pipeline.input_side);
    const auto logits = decode(pipeline.decoder_config, pipeline.decoder, *s.embedding, prompt, pipeline.prompt);
    const Size2 original{static_cast<int>(s.ground_truth.rows()), static_cast<int>(s.ground_truth.cols())};
    return binarize(upsample_logits(logits.grid, pipeline.input_side, original), static_cast<Scalar>(threshold));
  };
}

template MaskPredictor decoder_predictor<float>(const Pipeline<float>&, double);
template MaskPredictor decoder_predictor<double>(const Pipeline<double>&, double);

std::vector<MetricsRow> evaluate(const std::vector<EvalSample>& samples, const MaskPredictor& predict,
                                 const std::vector<std::string>& task_order, IouMode mode) {
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> per_task;
  for (const auto& s : samples) {
    const Mask pred = predict(s);
    auto& [d, j] = per_task[s.key.class_code];
    d.push_back(dsc(pred, s.ground_truth));
    j.push_back(iou(pred, s.ground_truth, mode));
  }
  std::vector<MetricsRow> rows;
  for (const auto& task : task_order) {
    const auto it = per_task.find(task);
    if (it == per_task.end()) continue;
    const auto& [d, j] = it->second;
    rows.push_back({task, 100.0 * mean(d), 100.0 * mean(j), static_cast<int>(d.size())});
    per_task.erase(it);
  }
  if (!per_task.empty()) throw ValidationError("evaluation produced task " + per_task.begin()->first +
                                               " that is not in the class map");
  return rows;
}

std::optional<double> relative_improvement(double new_value, double old_value) {
  if (!(old_value > 0)) return std::nullopt;
  return 100.0 * (new_value - old_value) / old_value;
}

std::string format_percent(double value) {
  double r = std::round(value * 100.0) / 100.0;
  if (r == 0.0) r = 0.0;  // no "-0.00"
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", r);
  return buf;
}

std::string render_report(const std::vector<MetricsRow>& rows, const std::vector<MetricsRow>& baseline,
                          ReportFormat format, const ReportMetadata& meta) {
  const bool with_base = !baseline.empty();
  std::map<std::string, const MetricsRow*> base;
  if (with_base) {
    for (const auto& b : baseline) base[b.task] = &b;
    std::map<std::string, int> ours;
    for (const auto& r : rows) ours[r.task] = 1;
    for (const auto& [task, _] : ours)
      if (!base.count(task)) throw ValidationError("baseline has no row for task " + task);
    for (const auto& [task, _] : base)
      if (!ours.count(task)) throw ValidationError("baseline row " + task + " has no matching result row");
  }

  std::vector<std::string> header{"Task", "DSC_new"};
  if (with_base) header.insert(header.end(), {"DSC_base", "DSC_improve"});
  header.push_back("IoU_new");
  if (with_base) header.insert(header.end(), {"IoU_base", "IoU_improve"});

  // Column-wise values (optional for undefined improvements) so the MEAN row averages full precision.
  const std::size_t ncols = header.size() - 1;
  std::vector<std::vector<std::optional<double>>> table;
  for (const auto& r : rows) {
    std::vector<std::optional<double>> v{r.mean_dsc};
    if (with_base) {
      const auto& b = *base.at(r.task);
      v.insert(v.end(), {b.mean_dsc, relative_improvement(r.mean_dsc, b.mean_dsc), r.mean_iou, b.mean_iou,
                         relative_improvement(r.mean_iou, b.mean_iou)});
    } else {
      v.push_back(r.mean_iou);
    }
    table.push_back(std::move(v));
  }
  std::vector<std::optional<double>> means(ncols);
  for (std::size_t c = 0; c < ncols; ++c) {
    std::vector<double> col;
    for (const auto& v : table)
      if (v[c]) col.push_back(*v[c]);
    if (!col.empty()) means[c] = mean(col);
  }

  auto cells = [](const std::string& first, const std::vector<std::optional<double>>& v) {
    std::vector<std::string> out{first};
    for (const auto& x : v) out.push_back(x ? format_percent(*x) : std::string());
    return out;
  };

  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& c) {
    if (format == ReportFormat::csv) {
      for (std::size_t i = 0; i < c.size(); ++i) out << (i ? "," : "") << c[i];
    } else {
      out << "|";
      for (const auto& x : c) out << " " << x << " |";
    }
    out << "\n";
  };

  if (format == ReportFormat::markdown) {
    out << "# Segmentation report\n\n";
    out << "- seed: " << meta.seed << "\n";
    out << "- checkpoint: " << (meta.checkpoint_id.empty() ? "unknown" : meta.checkpoint_id) << "\n";
    out << "- IoU: " << meta.iou_label << "\n\n";
  }
  emit(header);
  if (format == ReportFormat::markdown) {
    out << "|";
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? " ---: |" : " --- |");
    out << "\n";
  }
  for (std::size_t i = 0; i < rows.size(); ++i) emit(cells(rows[i].task, table[i]));
  emit(cells("MEAN", means));
  return out.str();
}

std::vector<MetricsRow> parse_metrics_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(source + ": empty metrics file");
  const auto head = split_csv_line(trim(line));
  if (head.size() < 3 || trim(head[0]) != "task" || trim(head[1]) != "dsc" || trim(head[2]) != "iou")
    throw ValidationError(source + ": expected header task,dsc,iou");
  std::vector<MetricsRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(trim(line));
    if (cells.size() < 3) throw ValidationError(source + ":" + std::to_string(lineno) + ": expected 3 columns");
    MetricsRow r;
    r.task = trim(cells[0]);
    try {
      std::size_t used = 0;
      r.mean_dsc = std::stod(cells[1], &used);
      r.mean_iou = std::stod(cells[2], &used);
      if (cells.size() > 3 && !trim(cells[3]).empty()) r.n_samples = std::stoi(cells[3]);
    } catch (const std::exception&) {
      throw ValidationError(source + ":" + std::to_string(lineno) + ": non-numeric value");
    }
    if (r.mean_dsc < 0 || r.mean_dsc > 100 || r.mean_iou < 0 || r.mean_iou > 100)
      throw ValidationError(source + ":" + std::to_string(lineno) + ": percentages must lie in [0, 100]");
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream out;
  out << "task,dsc,iou,n\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%d\n", r.task.c_str(), r.mean_dsc, r.mean_iou, r.n_samples);
    out << buf;
  }
  return out.str();
}

std::vector<ImprovementCheck> audit_improvements(const std::vector<PublishedRow>& rows, double tolerance) {
  std::vector<ImprovementCheck> out;
  for (const auto& r : rows) {
    for (const auto& [metric, nv, ov, printed] :
         {std::tuple{"DSC", r.dsc_new, r.dsc_old, r.dsc_improve}, std::tuple{"IoU", r.iou_new, r.iou_old, r.iou_improve}}) {
      ImprovementCheck c{r.task, metric, nv, ov, printed, 0.0, false};
      if (const auto v = relative_improvement(nv, ov)) {
        c.computed = *v;
        c.within_tolerance = std::abs(*v - printed) <= tolerance;
      }
      out.push_back(c);
    }
  }
  return out;
}

}  // namespace aquaseg
