#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ffl/model.hpp"
#include "ffl/tensor.hpp"

namespace ffl {

/// Feature rows with a {0,1} multilabel matrix and per-row patient ids.
struct MultilabelDataset {
  Tensor features;  // (n, d) or (n, H, W)
  Tensor labels;    // (n, L), entries 0/1
  std::vector<std::string> label_names;
  std::vector<std::string> patient_ids;

  Index rows() const { return features.size() == 0 ? 0 : features.dim(0); }
  Index numLabels() const { return Index(label_names.size()); }
  void validate() const;
};

/// One site-local label: positive iff any of the referenced latent bits is
/// set, then flipped with probability flip_noise.
struct LabelRule {
  std::string name;
  std::vector<int> any_of;   // latent indices, OR-ed
  double flip_noise = 0.0;   // in [0, 0.5)
};

struct SiteLabelSet {
  std::vector<LabelRule> rules;
};

/// Shared latent-disease process emulating correlated per-site label sets.
struct LatentDiseaseConfig {
  int num_latent = 4;
  std::vector<double> prevalence;  // per latent, in (0,1)
  Index feature_dim = 32;
  double noise_std = 0.5;
  std::vector<SiteLabelSet> sites;
};

/// Draws one dataset per site from a single latent process. Latent pattern
/// vectors are shared across sites; patient ids are unique across sites.
std::vector<MultilabelDataset> generateSynthetic(const LatentDiseaseConfig& cfg,
                                                 const std::vector<Index>& n_per_site,
                                                 std::uint64_t seed);

/// Patient-wise split: every record of a patient lands on one side.
std::pair<MultilabelDataset, MultilabelDataset> splitTrainTest(const MultilabelDataset& ds,
                                                               double test_fraction,
                                                               std::uint64_t seed);

/// w_j = negatives_j / positives_j, clamped to [1e-2, 1e2]; zero positives
/// hit the upper clamp.
LossConfig classPosWeights(const MultilabelDataset& ds);

enum class ChexpertLabel { Positive, Negative, Uncertain, NotMentioned };
enum class UkaSeverity { Negative, Uncertain, Mild, Moderate, Severe };

int binarizeChexpert(ChexpertLabel v);

/// UKA 5-class severity; the cardiomegaly scale renames the classes
/// (normal/uncertain/borderline/enlarged/massively enlarged) but maps the same.
int binarizeUka(UkaSeverity v, bool is_cardiomegaly);

/// Directory format: features.bin (magic "FFLD") + labels.csv.
void saveDataset(const MultilabelDataset& ds, const std::string& dir);
MultilabelDataset loadDataset(const std::string& dir);

}  // namespace ffl
