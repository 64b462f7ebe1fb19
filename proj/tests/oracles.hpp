// Test-only reference implementations, independent of the library paths
// they check.
#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "ffl/model.hpp"

namespace oracles {

/// Brute-force pairwise AUROC: fraction of (pos, neg) pairs ranked
/// correctly, ties counted 0.5. O(n^2).
inline double aurocPairwise(const std::vector<double>& scores,
                            const std::vector<double>& labels) {
  double wins = 0;
  long pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1.0) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0.0) continue;
      ++pairs;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / double(pairs);
}

/// Exhaustive Youden scan over every distinct score as threshold,
/// smallest maximizer wins.
inline double youdenScan(const std::vector<double>& scores, const std::vector<double>& labels) {
  std::vector<double> cands = scores;
  std::sort(cands.begin(), cands.end());
  cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
  double best_t = cands.front(), best_j = -2;
  for (double t : cands) {
    double tp = 0, fn = 0, fp = 0, tn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      bool pred = scores[i] >= t;
      if (labels[i] == 1.0) (pred ? tp : fn) += 1;
      else (pred ? fp : tn) += 1;
    }
    double j = tp / (tp + fn) - fp / (fp + tn);
    if (j > best_j) { best_j = j; best_t = t; }
  }
  return best_t;
}

/// Central finite differences of the loss w.r.t. every parameter coordinate.
inline ffl::Parameters finiteDiffGrads(const ffl::ModelSpec& spec, ffl::Parameters params,
                                       const ffl::Tensor& batch, const ffl::Tensor& labels,
                                       const ffl::LossConfig& cfg, double h = 1e-6) {
  ffl::Parameters grads;
  for (auto& [name, tensor] : params) {
    ffl::Tensor g(tensor.shape());
    for (ffl::Index i = 0; i < tensor.size(); ++i) {
      const double orig = tensor[i];
      tensor[i] = orig + h;
      const double up = ffl::lossAndGrads(spec, params, batch, labels, cfg).loss;
      tensor[i] = orig - h;
      const double down = ffl::lossAndGrads(spec, params, batch, labels, cfg).loss;
      tensor[i] = orig;
      g[i] = (up - down) / (2 * h);
    }
    grads.emplace(name, std::move(g));
  }
  return grads;
}

/// Largest relative error between analytic and reference gradients.
inline double maxRelGradError(const ffl::Parameters& analytic, const ffl::Parameters& reference) {
  double worst = 0.0;
  for (const auto& [name, a] : analytic) {
    const ffl::Tensor& r = reference.at(name);
    for (ffl::Index i = 0; i < a.size(); ++i) {
      const double denom = std::max({std::abs(a[i]), std::abs(r[i]), 1e-8});
      worst = std::max(worst, std::abs(a[i] - r[i]) / denom);
    }
  }
  return worst;
}

inline ffl::Tensor randomTensor(std::vector<ffl::Index> shape, std::mt19937_64& rng,
                                double scale = 1.0) {
  ffl::Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, scale);
  for (ffl::Index i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

inline ffl::Tensor randomLabels(ffl::Index n, ffl::Index l, std::mt19937_64& rng) {
  ffl::Tensor t({n, l});
  std::bernoulli_distribution dist(0.5);
  for (ffl::Index i = 0; i < t.size(); ++i) t[i] = dist(rng) ? 1.0 : 0.0;
  return t;
}

}  // namespace oracles
