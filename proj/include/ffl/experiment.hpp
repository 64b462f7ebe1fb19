#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ffl/dataset.hpp"
#include "ffl/federation.hpp"
#include "ffl/metrics.hpp"

#include "json.hpp"

namespace ffl {

enum class RunMode { Local, Federated };
enum class Transport { Inproc, Tcp };

struct SiteSpec {
  std::string site_id;
  std::optional<std::string> dataset_dir;  // file-backed site
  std::optional<Index> n;                  // synthetic site size
  std::vector<LabelRule> labels;           // synthetic label rules
};

struct SyntheticSpec {
  int num_latent = 4;
  std::vector<double> prevalence;
  Index feature_dim = 32;
  double noise_std = 0.5;
};

struct EvalSpec {
  int bootstrap = 1000;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  RunMode mode = RunMode::Federated;
  Transport transport = Transport::Inproc;
  FederationConfig federation;
  std::vector<Index> backbone_hidden = {32, 16};  // Dense+ReLU stack widths
  Index input_dim = 32;
  std::vector<SiteSpec> sites;
  SyntheticSpec synthetic;
  double test_fraction = 0.25;
  EvalSpec eval;

  ModelSpec backboneSpec() const;
  void validate() const;
};

/// Strict parse: unknown keys are rejected with a field-path message.
ExperimentConfig parseConfig(const nlohmann::json& j);
ExperimentConfig parseConfigFile(const std::string& path);
nlohmann::json serializeConfig(const ExperimentConfig& cfg);

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SiteResultRecord {
  std::string site_id;
  std::string test_set_hash;
  MetricsReport report;
  ScoreSet test_scores;  // kept so paired comparisons can be recomputed
  std::vector<double> round_losses;
  std::vector<double> fine_tune_losses;
};

struct RunRecord {
  int format_version = 1;
  std::string config_hash;
  std::string mode;
  std::uint64_t seed = 0;
  double wall_clock_seconds = 0.0;
  std::vector<SiteResultRecord> sites;
};

/// Per-site train/test data for one experiment, derived deterministically
/// from the config.
struct PreparedData {
  std::vector<std::string> site_ids;
  std::vector<MultilabelDataset> train;
  std::vector<MultilabelDataset> test;
};

PreparedData prepareData(const ExperimentConfig& cfg);

RunRecord runExperiment(const ExperimentConfig& cfg);

nlohmann::json runRecordToJson(const RunRecord& r);
RunRecord runRecordFromJson(const nlohmann::json& j);

/// Canonical FNV-1a hash of a JSON value (keys sorted, wall clock excluded).
std::string configHash(const nlohmann::json& config_json);

struct ComparisonRow {
  std::string site_id;
  double auroc_a = 0.0;
  double auroc_b = 0.0;
  double p_value = 0.0;
};

/// Paired comparison of two runs over the same test sets (verified via
/// per-site test-set hashes).
std::vector<ComparisonRow> compareRuns(const RunRecord& a, const RunRecord& b, int B,
                                       std::uint64_t seed);

void writeComparisonCsv(const std::vector<ComparisonRow>& rows, const std::string& path);

/// Grouped AUROC bar chart (site x run) plus the authoritative CSV.
void emitPlots(const std::vector<RunRecord>& records, const std::string& out_dir);

/// Post-sigmoid scores of a trained model on a test set.
ScoreSet scoreModel(const ModelSpec& spec, const Parameters& params,
                    const MultilabelDataset& test);

std::string datasetHash(const MultilabelDataset& ds);

}  // namespace ffl
