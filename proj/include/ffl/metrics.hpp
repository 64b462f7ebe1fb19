#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ffl/tensor.hpp"

namespace ffl {

/// Post-sigmoid scores with ground-truth labels for one test set.
struct ScoreSet {
  Tensor scores;  // (n, L) in [0,1]
  Tensor labels;  // (n, L) in {0,1}
  std::vector<std::string> label_names;

  Index rows() const { return scores.size() == 0 ? 0 : scores.dim(0); }
  Index numLabels() const { return Index(label_names.size()); }
  void validate() const;
};

struct DegenerateLabelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Mann-Whitney AUROC, ties half-credited. Throws DegenerateLabelError
/// when only one class is present.
double auroc(const std::vector<double>& scores, const std::vector<double>& labels);

/// Smallest threshold maximizing TPR - FPR under the score >= t rule.
double youdenThreshold(const std::vector<double>& scores, const std::vector<double>& labels);

struct ConfusionMetrics {
  double accuracy = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
};

ConfusionMetrics confusionMetrics(const std::vector<double>& scores,
                                  const std::vector<double>& labels, double threshold);

struct BootstrapSpread {
  double mean = 0.0;
  double stddev = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

using ScoreSetMetric = std::function<double(const ScoreSet&)>;

/// Row resampling with replacement; resamples on which the metric is
/// undefined are redrawn (up to 100 retries each).
BootstrapSpread bootstrapSpread(const ScoreSet& s, const ScoreSetMetric& metric, int B,
                                std::uint64_t seed);

/// One-sided paired bootstrap: p = (1 + #{metric(a) <= metric(b)}) / (B+1),
/// testing whether a outperforms b, with shared row resamples.
double pairedBootstrapPvalue(const ScoreSet& a, const ScoreSet& b, const ScoreSetMetric& metric,
                             int B, std::uint64_t seed);

struct LabelMetrics {
  std::string name;
  double auroc = 0.0;
  double threshold = 0.0;
  ConfusionMetrics at_threshold;
};

struct MetricsReport {
  std::vector<LabelMetrics> per_label;
  std::vector<std::string> skipped_labels;  // single-class labels
  double macro_auroc = 0.0;
  double macro_accuracy = 0.0;
  double macro_sensitivity = 0.0;
  double macro_specificity = 0.0;
  BootstrapSpread macro_auroc_bootstrap;
  double across_label_std = 0.0;
  std::optional<double> p_value_vs_baseline;
};

/// Macro AUROC over non-degenerate labels; the metric driven through the
/// bootstrap machinery.
double macroAuroc(const ScoreSet& s);

MetricsReport macroReport(const ScoreSet& s, const std::optional<ScoreSet>& baseline, int B,
                          std::uint64_t seed);

}  // namespace ffl
