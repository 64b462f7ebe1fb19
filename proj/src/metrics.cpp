#include "ffl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "ffl/rng.hpp"

namespace ffl {

void ScoreSet::validate() const {
  if (scores.ndim() != 2 || labels.ndim() != 2)
    throw std::invalid_argument("scores and labels must be 2-d");
  if (scores.shape() != labels.shape())
    throw std::invalid_argument("scores and labels shapes disagree");
  if (scores.dim(1) != Index(label_names.size()))
    throw std::invalid_argument("label_names length disagrees with score columns");
  if (!scores.allFinite()) throw std::invalid_argument("non-finite scores");
  for (Index i = 0; i < labels.size(); ++i)
    if (labels[i] != 0.0 && labels[i] != 1.0)
      throw std::invalid_argument("labels must be 0 or 1");
}

namespace {

void checkBothClasses(const std::vector<double>& labels) {
  bool pos = false, neg = false;
  for (double y : labels) (y == 1.0 ? pos : neg) = true;
  if (!pos || !neg) throw DegenerateLabelError("metric undefined: only one class present");
}

}  // namespace

double auroc(const std::vector<double>& scores, const std::vector<double>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw std::invalid_argument("scores/labels size mismatch");
  checkBothClasses(labels);

  // rank-sum formulation with midranks for ties: O(n log n)
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  std::size_t n_pos = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = (double(i + 1) + double(j)) / 2.0;  // 1-based
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1.0) {
        rank_sum_pos += midrank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  const double u = rank_sum_pos - double(n_pos) * double(n_pos + 1) / 2.0;
  return u / (double(n_pos) * double(n_neg));
}

double youdenThreshold(const std::vector<double>& scores, const std::vector<double>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw std::invalid_argument("scores/labels size mismatch");
  checkBothClasses(labels);
  std::vector<double> candidates = scores;
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  double best_t = candidates.front();
  double best_j = -2.0;
  for (double t : candidates) {
    double tp = 0, fn = 0, fp = 0, tn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const bool pred = scores[i] >= t;
      if (labels[i] == 1.0)
        (pred ? tp : fn) += 1;
      else
        (pred ? fp : tn) += 1;
    }
    // TPR - FPR computed directly so exact ties stay exact
    const double j = tp / (tp + fn) - fp / (fp + tn);
    if (j > best_j) {  // strict: keeps the smallest maximizing threshold
      best_j = j;
      best_t = t;
    }
  }
  return best_t;
}

ConfusionMetrics confusionMetrics(const std::vector<double>& scores,
                                  const std::vector<double>& labels, double threshold) {
  if (scores.size() != labels.size() || scores.empty())
    throw std::invalid_argument("scores/labels size mismatch");
  double tp = 0, tn = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (labels[i] == 1.0)
      (pred ? tp : fn) += 1;
    else
      (pred ? fp : tn) += 1;
  }
  ConfusionMetrics m;
  m.accuracy = (tp + tn) / double(scores.size());
  m.sensitivity = (tp + fn) > 0 ? tp / (tp + fn) : 0.0;
  m.specificity = (tn + fp) > 0 ? tn / (tn + fp) : 0.0;
  return m;
}

namespace {

ScoreSet resampleRows(const ScoreSet& s, std::mt19937_64& rng) {
  const Index n = s.rows();
  const Index nl = s.scores.dim(1);
  std::uniform_int_distribution<Index> pick(0, n - 1);
  ScoreSet out;
  out.scores = Tensor({n, nl});
  out.labels = Tensor({n, nl});
  out.label_names = s.label_names;
  for (Index i = 0; i < n; ++i) {
    const Index r = pick(rng);
    out.scores.data().segment(i * nl, nl) = s.scores.data().segment(r * nl, nl);
    out.labels.data().segment(i * nl, nl) = s.labels.data().segment(r * nl, nl);
  }
  return out;
}

double metricOnResample(const ScoreSet& s, const ScoreSetMetric& metric, std::uint64_t seed,
                        int b) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::mt19937_64 rng(deriveSeed(seed, std::uint64_t(b) << 16 | std::uint64_t(attempt)));
    try {
      return metric(resampleRows(s, rng));
    } catch (const DegenerateLabelError&) {
      continue;  // redraw
    }
  }
  throw std::runtime_error("metric undefined after 100 redraws of resample " + std::to_string(b));
}

}  // namespace

BootstrapSpread bootstrapSpread(const ScoreSet& s, const ScoreSetMetric& metric, int B,
                                std::uint64_t seed) {
  s.validate();
  if (B < 1) throw std::invalid_argument("B must be at least 1");
  std::vector<double> values(static_cast<std::size_t>(B));
  for (int b = 0; b < B; ++b) values[std::size_t(b)] = metricOnResample(s, metric, seed, b);

  BootstrapSpread out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / B;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.stddev = B > 1 ? std::sqrt(ss / double(B - 1)) : 0.0;
  std::sort(values.begin(), values.end());
  auto percentile = [&values](double q) {
    const double pos = q * double(values.size() - 1);
    const std::size_t lo = std::size_t(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double f = pos - double(lo);
    return values[lo] * (1 - f) + values[hi] * f;
  };
  out.ci_lo = percentile(0.025);
  out.ci_hi = percentile(0.975);
  return out;
}

double pairedBootstrapPvalue(const ScoreSet& a, const ScoreSet& b, const ScoreSetMetric& metric,
                             int B, std::uint64_t seed) {
  a.validate();
  b.validate();
  if (a.rows() != b.rows()) throw std::invalid_argument("paired inputs must score the same cases");
  if (B < 1) throw std::invalid_argument("B must be at least 1");
  const Index n = a.rows();
  int count_le = 0;
  for (int r = 0; r < B; ++r) {
    for (int attempt = 0;; ++attempt) {
      if (attempt >= 100)
        throw std::runtime_error("metric undefined after 100 redraws of resample " +
                                 std::to_string(r));
      std::mt19937_64 rng(deriveSeed(seed, std::uint64_t(r) << 16 | std::uint64_t(attempt)));
      std::uniform_int_distribution<Index> pick(0, n - 1);
      std::vector<Index> rows(static_cast<std::size_t>(n));
      for (Index i = 0; i < n; ++i) rows[std::size_t(i)] = pick(rng);
      auto gather = [&rows](const ScoreSet& s) {
        const Index nl = s.scores.dim(1);
        ScoreSet out;
        out.scores = Tensor({Index(rows.size()), nl});
        out.labels = Tensor({Index(rows.size()), nl});
        out.label_names = s.label_names;
        for (std::size_t i = 0; i < rows.size(); ++i) {
          out.scores.data().segment(Index(i) * nl, nl) = s.scores.data().segment(rows[i] * nl, nl);
          out.labels.data().segment(Index(i) * nl, nl) = s.labels.data().segment(rows[i] * nl, nl);
        }
        return out;
      };
      try {
        const double ma = metric(gather(a));
        const double mb = metric(gather(b));
        if (ma <= mb) ++count_le;
        break;
      } catch (const DegenerateLabelError&) {
        continue;
      }
    }
  }
  return double(1 + count_le) / double(B + 1);
}

namespace {

std::vector<double> column(const Tensor& t, Index j) {
  const Index n = t.dim(0), nl = t.dim(1);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) out[std::size_t(i)] = t[i * nl + j];
  return out;
}

}  // namespace

double macroAuroc(const ScoreSet& s) {
  double sum = 0.0;
  int counted = 0;
  for (Index j = 0; j < s.numLabels(); ++j) {
    try {
      sum += auroc(column(s.scores, j), column(s.labels, j));
      ++counted;
    } catch (const DegenerateLabelError&) {
    }
  }
  if (counted == 0) throw DegenerateLabelError("all labels single-class");
  return sum / counted;
}

MetricsReport macroReport(const ScoreSet& s, const std::optional<ScoreSet>& baseline, int B,
                          std::uint64_t seed) {
  s.validate();
  MetricsReport report;
  double sum_auc = 0, sum_acc = 0, sum_sen = 0, sum_spe = 0;
  for (Index j = 0; j < s.numLabels(); ++j) {
    auto sc = column(s.scores, j);
    auto lb = column(s.labels, j);
    try {
      LabelMetrics lm;
      lm.name = s.label_names[std::size_t(j)];
      lm.auroc = auroc(sc, lb);
      lm.threshold = youdenThreshold(sc, lb);
      lm.at_threshold = confusionMetrics(sc, lb, lm.threshold);
      sum_auc += lm.auroc;
      sum_acc += lm.at_threshold.accuracy;
      sum_sen += lm.at_threshold.sensitivity;
      sum_spe += lm.at_threshold.specificity;
      report.per_label.push_back(std::move(lm));
    } catch (const DegenerateLabelError&) {
      report.skipped_labels.push_back(s.label_names[std::size_t(j)]);
    }
  }
  if (report.per_label.empty()) throw DegenerateLabelError("all labels single-class");
  const double k = double(report.per_label.size());
  report.macro_auroc = sum_auc / k;
  report.macro_accuracy = sum_acc / k;
  report.macro_sensitivity = sum_sen / k;
  report.macro_specificity = sum_spe / k;
  double ss = 0.0;
  for (const auto& lm : report.per_label)
    ss += (lm.auroc - report.macro_auroc) * (lm.auroc - report.macro_auroc);
  report.across_label_std = k > 1 ? std::sqrt(ss / (k - 1)) : 0.0;
  report.macro_auroc_bootstrap = bootstrapSpread(s, macroAuroc, B, seed);
  if (baseline) {
    report.p_value_vs_baseline = pairedBootstrapPvalue(s, *baseline, macroAuroc, B, seed);
  }
  return report;
}

}  // namespace ffl
