#include "ffl/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "ffl/rng.hpp"

namespace ffl {

using nlohmann::json;

ModelSpec ExperimentConfig::backboneSpec() const {
  ModelSpec spec;
  spec.input_shape = {input_dim};
  Index prev = input_dim;
  for (std::size_t i = 0; i < backbone_hidden.size(); ++i) {
    spec.layers.push_back(DenseLayer{"dense" + std::to_string(i + 1), prev, backbone_hidden[i]});
    if (i + 1 < backbone_hidden.size()) spec.layers.push_back(ReluLayer{});
    prev = backbone_hidden[i];
  }
  // features pass through a final ReLU so heads see non-linear features
  spec.layers.push_back(ReluLayer{});
  return spec;
}

void ExperimentConfig::validate() const {
  federation.validate();
  if (sites.empty()) throw ConfigError("sites: need at least one site");
  if (input_dim <= 0) throw ConfigError("input_dim: must be positive");
  if (backbone_hidden.empty()) throw ConfigError("backbone_hidden: must be non-empty");
  for (Index h : backbone_hidden)
    if (h <= 0) throw ConfigError("backbone_hidden: widths must be positive");
  if (!(test_fraction > 0 && test_fraction < 1))
    throw ConfigError("test_fraction: must be in (0,1)");
  if (eval.bootstrap < 1) throw ConfigError("eval.bootstrap: must be at least 1");
  std::set<std::string> ids;
  for (const auto& s : sites) {
    if (s.site_id.empty()) throw ConfigError("sites.site_id: must be non-empty");
    if (!ids.insert(s.site_id).second)
      throw ConfigError("sites.site_id: duplicate '" + s.site_id + "'");
    if (s.dataset_dir.has_value() == (s.n.has_value() || !s.labels.empty()))
      throw ConfigError("sites." + s.site_id +
                        ": exactly one of dataset_dir or synthetic (n + labels) required");
    if (!s.dataset_dir) {
      if (!s.n || *s.n <= 0) throw ConfigError("sites." + s.site_id + ".n: must be positive");
      if (s.labels.empty()) throw ConfigError("sites." + s.site_id + ".labels: must be non-empty");
      std::set<std::string> names;
      for (const auto& r : s.labels) {
        if (r.name.empty() || !names.insert(r.name).second)
          throw ConfigError("sites." + s.site_id + ".labels: names must be unique and non-empty");
        if (r.any_of.empty())
          throw ConfigError("sites." + s.site_id + ".labels: any_of must be non-empty");
        for (int k : r.any_of)
          if (k < 0 || k >= synthetic.num_latent)
            throw ConfigError("sites." + s.site_id + ".labels: latent index out of range");
        if (!(r.flip_noise >= 0 && r.flip_noise < 0.5))
          throw ConfigError("sites." + s.site_id + ".labels: flip_noise must be in [0,0.5)");
      }
      if (synthetic.feature_dim != input_dim)
        throw ConfigError("synthetic.feature_dim: must equal input_dim for synthetic sites");
    } else if (!std::filesystem::exists(*s.dataset_dir)) {
      throw ConfigError("sites." + s.site_id + ".dataset_dir: path does not exist: " +
                        *s.dataset_dir);
    }
  }
  if (Index(synthetic.prevalence.size()) != Index(synthetic.num_latent))
    throw ConfigError("synthetic.prevalence: length must equal num_latent");
  for (double p : synthetic.prevalence)
    if (!(p > 0 && p < 1)) throw ConfigError("synthetic.prevalence: values must be in (0,1)");
}

namespace {

void checkKeys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) throw ConfigError(path + ": unknown key '" + key + "'");
}

template <typename T>
T getOr(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

}  // namespace

ExperimentConfig parseConfig(const json& j) {
  ExperimentConfig cfg;
  checkKeys(j, "config",
            {"mode", "transport", "federation", "backbone", "sites", "synthetic",
             "test_fraction", "eval"});
  const std::string mode = getOr<std::string>(j, "mode", "federated");
  if (mode == "local") cfg.mode = RunMode::Local;
  else if (mode == "federated") cfg.mode = RunMode::Federated;
  else throw ConfigError("mode: must be 'local' or 'federated'");

  const std::string transport = getOr<std::string>(j, "transport", "inproc");
  if (transport == "inproc") cfg.transport = Transport::Inproc;
  else if (transport == "tcp") cfg.transport = Transport::Tcp;
  else throw ConfigError("transport: must be 'inproc' or 'tcp'");

  if (j.contains("federation")) {
    const json& f = j.at("federation");
    checkKeys(f, "federation",
              {"rounds", "local_epochs_per_round", "batch_size", "backbone_lr", "head_lr",
               "fine_tune_epochs", "seed", "aggregation"});
    cfg.federation.rounds = getOr<int>(f, "rounds", 1);
    cfg.federation.local_epochs_per_round = getOr<int>(f, "local_epochs_per_round", 1);
    cfg.federation.batch_size = getOr<Index>(f, "batch_size", 16);
    cfg.federation.backbone_lr = getOr<double>(f, "backbone_lr", 5e-5);
    cfg.federation.head_lr = getOr<double>(f, "head_lr", 9e-5);
    cfg.federation.fine_tune_epochs = getOr<int>(f, "fine_tune_epochs", 0);
    cfg.federation.seed = getOr<std::uint64_t>(f, "seed", 0);
    const std::string agg = getOr<std::string>(f, "aggregation", "unweighted_mean");
    if (agg == "unweighted_mean") cfg.federation.aggregation = Aggregation::UnweightedMean;
    else if (agg == "sample_weighted_mean")
      cfg.federation.aggregation = Aggregation::SampleWeightedMean;
    else throw ConfigError("federation.aggregation: unknown mode '" + agg + "'");
  }

  if (j.contains("backbone")) {
    const json& b = j.at("backbone");
    checkKeys(b, "backbone", {"input_dim", "hidden"});
    cfg.input_dim = getOr<Index>(b, "input_dim", 32);
    cfg.backbone_hidden = getOr<std::vector<Index>>(b, "hidden", {32, 16});
  }

  if (j.contains("synthetic")) {
    const json& s = j.at("synthetic");
    checkKeys(s, "synthetic", {"num_latent", "prevalence", "feature_dim", "noise_std"});
    cfg.synthetic.num_latent = getOr<int>(s, "num_latent", 4);
    cfg.synthetic.prevalence = getOr<std::vector<double>>(
        s, "prevalence", std::vector<double>(std::size_t(cfg.synthetic.num_latent), 0.3));
    cfg.synthetic.feature_dim = getOr<Index>(s, "feature_dim", 32);
    cfg.synthetic.noise_std = getOr<double>(s, "noise_std", 0.5);
  } else {
    cfg.synthetic.prevalence = std::vector<double>(std::size_t(cfg.synthetic.num_latent), 0.3);
  }

  if (!j.contains("sites")) throw ConfigError("sites: required");
  for (const json& sj : j.at("sites")) {
    checkKeys(sj, "sites[]", {"site_id", "dataset_dir", "n", "labels"});
    SiteSpec site;
    site.site_id = getOr<std::string>(sj, "site_id", "");
    if (sj.contains("dataset_dir")) site.dataset_dir = sj.at("dataset_dir").get<std::string>();
    if (sj.contains("n")) site.n = sj.at("n").get<Index>();
    if (sj.contains("labels")) {
      for (const json& lj : sj.at("labels")) {
        checkKeys(lj, "sites[].labels[]", {"name", "any_of", "flip_noise"});
        LabelRule rule;
        rule.name = getOr<std::string>(lj, "name", "");
        rule.any_of = getOr<std::vector<int>>(lj, "any_of", {});
        rule.flip_noise = getOr<double>(lj, "flip_noise", 0.0);
        site.labels.push_back(std::move(rule));
      }
    }
    cfg.sites.push_back(std::move(site));
  }

  cfg.test_fraction = getOr<double>(j, "test_fraction", 0.25);
  if (j.contains("eval")) {
    const json& e = j.at("eval");
    checkKeys(e, "eval", {"bootstrap", "seed"});
    cfg.eval.bootstrap = getOr<int>(e, "bootstrap", 1000);
    cfg.eval.seed = getOr<std::uint64_t>(e, "seed", 0);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig parseConfigFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("invalid JSON in " + path + ": " + e.what());
  }
  return parseConfig(j);
}

json serializeConfig(const ExperimentConfig& cfg) {
  json j;
  j["mode"] = cfg.mode == RunMode::Local ? "local" : "federated";
  j["transport"] = cfg.transport == Transport::Inproc ? "inproc" : "tcp";
  j["federation"] = {
      {"rounds", cfg.federation.rounds},
      {"local_epochs_per_round", cfg.federation.local_epochs_per_round},
      {"batch_size", cfg.federation.batch_size},
      {"backbone_lr", cfg.federation.backbone_lr},
      {"head_lr", cfg.federation.head_lr},
      {"fine_tune_epochs", cfg.federation.fine_tune_epochs},
      {"seed", cfg.federation.seed},
      {"aggregation", cfg.federation.aggregation == Aggregation::UnweightedMean
                          ? "unweighted_mean"
                          : "sample_weighted_mean"},
  };
  j["backbone"] = {{"input_dim", cfg.input_dim}, {"hidden", cfg.backbone_hidden}};
  j["synthetic"] = {{"num_latent", cfg.synthetic.num_latent},
                    {"prevalence", cfg.synthetic.prevalence},
                    {"feature_dim", cfg.synthetic.feature_dim},
                    {"noise_std", cfg.synthetic.noise_std}};
  j["sites"] = json::array();
  for (const auto& s : cfg.sites) {
    json sj;
    sj["site_id"] = s.site_id;
    if (s.dataset_dir) sj["dataset_dir"] = *s.dataset_dir;
    if (s.n) sj["n"] = *s.n;
    if (!s.labels.empty()) {
      sj["labels"] = json::array();
      for (const auto& r : s.labels)
        sj["labels"].push_back(
            {{"name", r.name}, {"any_of", r.any_of}, {"flip_noise", r.flip_noise}});
    }
    j["sites"].push_back(std::move(sj));
  }
  j["test_fraction"] = cfg.test_fraction;
  j["eval"] = {{"bootstrap", cfg.eval.bootstrap}, {"seed", cfg.eval.seed}};
  return j;
}

std::string configHash(const json& config_json) {
  json copy = config_json;
  copy.erase("wall_clock_seconds");
  const std::string canon = copy.dump();  // nlohmann objects iterate sorted by key
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : canon) {
    h ^= std::uint8_t(c);
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

std::string datasetHash(const MultilabelDataset& ds) {
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&h](const void* data, std::size_t len) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  feed(ds.features.data().data(), std::size_t(ds.features.size()) * 8);
  feed(ds.labels.data().data(), std::size_t(ds.labels.size()) * 8);
  for (const auto& s : ds.patient_ids) feed(s.data(), s.size());
  for (const auto& s : ds.label_names) feed(s.data(), s.size());
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

PreparedData prepareData(const ExperimentConfig& cfg) {
  cfg.validate();
  // one shared latent process covers all synthetic sites
  LatentDiseaseConfig gen;
  gen.num_latent = cfg.synthetic.num_latent;
  gen.prevalence = cfg.synthetic.prevalence;
  gen.feature_dim = cfg.synthetic.feature_dim;
  gen.noise_std = cfg.synthetic.noise_std;
  std::vector<Index> n_per_site;
  std::vector<std::size_t> synth_index(cfg.sites.size(), SIZE_MAX);
  for (std::size_t i = 0; i < cfg.sites.size(); ++i) {
    if (!cfg.sites[i].dataset_dir) {
      synth_index[i] = gen.sites.size();
      gen.sites.push_back(SiteLabelSet{cfg.sites[i].labels});
      n_per_site.push_back(*cfg.sites[i].n);
    }
  }
  std::vector<MultilabelDataset> generated;
  if (!gen.sites.empty()) generated = generateSynthetic(gen, n_per_site, cfg.federation.seed);

  PreparedData out;
  for (std::size_t i = 0; i < cfg.sites.size(); ++i) {
    const auto& s = cfg.sites[i];
    MultilabelDataset ds = s.dataset_dir ? loadDataset(*s.dataset_dir)
                                         : std::move(generated[synth_index[i]]);
    auto [train, test] =
        splitTrainTest(ds, cfg.test_fraction, deriveSeed(cfg.federation.seed, "split:" + s.site_id));
    out.site_ids.push_back(s.site_id);
    out.train.push_back(std::move(train));
    out.test.push_back(std::move(test));
  }
  return out;
}

ScoreSet scoreModel(const ModelSpec& spec, const Parameters& params,
                    const MultilabelDataset& test) {
  Tensor logits = forward(spec, params, test.features);
  ScoreSet s;
  s.scores = Tensor(logits.shape());
  for (Index i = 0; i < logits.size(); ++i) s.scores[i] = 1.0 / (1.0 + std::exp(-logits[i]));
  s.labels = test.labels;
  s.label_names = test.label_names;
  return s;
}

RunRecord runExperiment(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  PreparedData data = prepareData(cfg);
  const ModelSpec backbone = cfg.backboneSpec();

  std::vector<SiteRunResult> site_results;
  if (cfg.mode == RunMode::Local) {
    for (std::size_t i = 0; i < data.site_ids.size(); ++i)
      site_results.push_back(
          trainLocal(backbone, data.site_ids[i], data.train[i], cfg.federation));
  } else {
    std::vector<SiteData> sites;
    for (std::size_t i = 0; i < data.site_ids.size(); ++i)
      sites.push_back(SiteData{data.site_ids[i], data.train[i]});
    FederationResult fed = cfg.transport == Transport::Inproc
                               ? runFederated(backbone, cfg.federation, std::move(sites))
                               : runFederatedTcp(backbone, cfg.federation, std::move(sites));
    site_results = std::move(fed.sites);
  }

  RunRecord record;
  record.config_hash = configHash(serializeConfig(cfg));
  record.mode = cfg.mode == RunMode::Local ? "local" : "federated";
  record.seed = cfg.federation.seed;

  for (const auto& result : site_results) {
    const std::size_t i =
        std::size_t(std::find(data.site_ids.begin(), data.site_ids.end(), result.site_id) -
                    data.site_ids.begin());
    if (i >= data.site_ids.size()) throw std::runtime_error("unknown site in results");
    HeadSpec head{backbone.outputDim(), data.train[i].label_names};
    ModelSpec site_spec = buildSiteModel(backbone, head);

    SiteResultRecord sr;
    sr.site_id = result.site_id;
    sr.test_set_hash = datasetHash(data.test[i]);
    sr.test_scores = scoreModel(site_spec, result.final_params, data.test[i]);
    sr.report = macroReport(sr.test_scores, std::nullopt, cfg.eval.bootstrap,
                            deriveSeed(cfg.eval.seed, "eval:" + result.site_id));
    sr.round_losses = result.round_losses;
    sr.fine_tune_losses = result.fine_tune_losses;
    record.sites.push_back(std::move(sr));
  }
  record.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return record;
}

namespace {

json tensorToJson(const Tensor& t) {
  json j;
  j["shape"] = t.shape();
  j["data"] = std::vector<double>(t.data().data(), t.data().data() + t.size());
  return j;
}

Tensor tensorFromJson(const json& j) {
  std::vector<Index> shape = j.at("shape").get<std::vector<Index>>();
  std::vector<double> data = j.at("data").get<std::vector<double>>();
  Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(data.data(), Index(data.size()));
  return Tensor(shape, std::move(v));
}

json reportToJson(const MetricsReport& r) {
  json j;
  j["per_label"] = json::array();
  for (const auto& lm : r.per_label)
    j["per_label"].push_back({{"name", lm.name},
                              {"auroc", lm.auroc},
                              {"threshold", lm.threshold},
                              {"accuracy", lm.at_threshold.accuracy},
                              {"sensitivity", lm.at_threshold.sensitivity},
                              {"specificity", lm.at_threshold.specificity}});
  j["skipped_labels"] = r.skipped_labels;
  j["macro_auroc"] = r.macro_auroc;
  j["macro_accuracy"] = r.macro_accuracy;
  j["macro_sensitivity"] = r.macro_sensitivity;
  j["macro_specificity"] = r.macro_specificity;
  j["macro_auroc_bootstrap"] = {{"mean", r.macro_auroc_bootstrap.mean},
                                {"std", r.macro_auroc_bootstrap.stddev},
                                {"ci95", {r.macro_auroc_bootstrap.ci_lo,
                                          r.macro_auroc_bootstrap.ci_hi}}};
  j["across_label_std"] = r.across_label_std;
  if (r.p_value_vs_baseline) j["p_value_vs_baseline"] = *r.p_value_vs_baseline;
  return j;
}

MetricsReport reportFromJson(const json& j) {
  MetricsReport r;
  for (const json& lj : j.at("per_label")) {
    LabelMetrics lm;
    lm.name = lj.at("name").get<std::string>();
    lm.auroc = lj.at("auroc").get<double>();
    lm.threshold = lj.at("threshold").get<double>();
    lm.at_threshold.accuracy = lj.at("accuracy").get<double>();
    lm.at_threshold.sensitivity = lj.at("sensitivity").get<double>();
    lm.at_threshold.specificity = lj.at("specificity").get<double>();
    r.per_label.push_back(std::move(lm));
  }
  r.skipped_labels = j.at("skipped_labels").get<std::vector<std::string>>();
  r.macro_auroc = j.at("macro_auroc").get<double>();
  r.macro_accuracy = j.at("macro_accuracy").get<double>();
  r.macro_sensitivity = j.at("macro_sensitivity").get<double>();
  r.macro_specificity = j.at("macro_specificity").get<double>();
  r.macro_auroc_bootstrap.mean = j.at("macro_auroc_bootstrap").at("mean").get<double>();
  r.macro_auroc_bootstrap.stddev = j.at("macro_auroc_bootstrap").at("std").get<double>();
  r.macro_auroc_bootstrap.ci_lo = j.at("macro_auroc_bootstrap").at("ci95")[0].get<double>();
  r.macro_auroc_bootstrap.ci_hi = j.at("macro_auroc_bootstrap").at("ci95")[1].get<double>();
  r.across_label_std = j.at("across_label_std").get<double>();
  if (j.contains("p_value_vs_baseline"))
    r.p_value_vs_baseline = j.at("p_value_vs_baseline").get<double>();
  return r;
}

}  // namespace

json runRecordToJson(const RunRecord& r) {
  json j;
  j["format_version"] = r.format_version;
  j["config_hash"] = r.config_hash;
  j["mode"] = r.mode;
  j["seed"] = r.seed;
  j["wall_clock_seconds"] = r.wall_clock_seconds;
  j["sites"] = json::array();
  for (const auto& s : r.sites) {
    json sj;
    sj["site_id"] = s.site_id;
    sj["test_set_hash"] = s.test_set_hash;
    sj["report"] = reportToJson(s.report);
    sj["scores"] = tensorToJson(s.test_scores.scores);
    sj["labels"] = tensorToJson(s.test_scores.labels);
    sj["label_names"] = s.test_scores.label_names;
    sj["round_losses"] = s.round_losses;
    sj["fine_tune_losses"] = s.fine_tune_losses;
    j["sites"].push_back(std::move(sj));
  }
  return j;
}

RunRecord runRecordFromJson(const json& j) {
  RunRecord r;
  r.format_version = j.at("format_version").get<int>();
  if (r.format_version != 1) throw std::runtime_error("unsupported run record version");
  r.config_hash = j.at("config_hash").get<std::string>();
  r.mode = j.at("mode").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
  for (const json& sj : j.at("sites")) {
    SiteResultRecord s;
    s.site_id = sj.at("site_id").get<std::string>();
    s.test_set_hash = sj.at("test_set_hash").get<std::string>();
    s.report = reportFromJson(sj.at("report"));
    s.test_scores.scores = tensorFromJson(sj.at("scores"));
    s.test_scores.labels = tensorFromJson(sj.at("labels"));
    s.test_scores.label_names = sj.at("label_names").get<std::vector<std::string>>();
    s.round_losses = sj.at("round_losses").get<std::vector<double>>();
    s.fine_tune_losses = sj.at("fine_tune_losses").get<std::vector<double>>();
    r.sites.push_back(std::move(s));
  }
  return r;
}

std::vector<ComparisonRow> compareRuns(const RunRecord& a, const RunRecord& b, int B,
                                       std::uint64_t seed) {
  if (a.sites.size() != b.sites.size())
    throw std::runtime_error("runs have different site counts");
  std::vector<ComparisonRow> rows;
  for (std::size_t i = 0; i < a.sites.size(); ++i) {
    const auto& sa = a.sites[i];
    const auto& sb = b.sites[i];
    if (sa.site_id != sb.site_id)
      throw std::runtime_error("site order mismatch between runs");
    if (sa.test_set_hash != sb.test_set_hash)
      throw std::runtime_error("test sets differ for site '" + sa.site_id + "'");
    ComparisonRow row;
    row.site_id = sa.site_id;
    row.auroc_a = sa.report.macro_auroc;
    row.auroc_b = sb.report.macro_auroc;
    row.p_value = pairedBootstrapPvalue(sa.test_scores, sb.test_scores, macroAuroc, B,
                                        deriveSeed(seed, "compare:" + sa.site_id));
    rows.push_back(std::move(row));
  }
  return rows;
}

void writeComparisonCsv(const std::vector<ComparisonRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "site,arm_a_auroc,arm_b_auroc,p_value\n";
  out.precision(17);
  for (const auto& r : rows)
    out << r.site_id << "," << r.auroc_a << "," << r.auroc_b << "," << r.p_value << "\n";
}

void emitPlots(const std::vector<RunRecord>& records, const std::string& out_dir) {
  if (records.empty()) throw std::runtime_error("no run records to plot");
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  struct Bar {
    std::string site;
    std::string run;
    double auroc;
  };
  std::vector<Bar> bars;
  std::vector<std::string> sites;
  for (std::size_t r = 0; r < records.size(); ++r) {
    const std::string run_label = records[r].mode + "#" + std::to_string(r);
    for (const auto& s : records[r].sites) {
      bars.push_back({s.site_id, run_label, s.report.macro_auroc});
      if (std::find(sites.begin(), sites.end(), s.site_id) == sites.end())
        sites.push_back(s.site_id);
    }
  }

  {
    std::ofstream csv(fs::path(out_dir) / "auroc_by_site.csv");
    if (!csv) throw std::runtime_error("cannot write plot CSV");
    csv << "site,run,macro_auroc\n";
    csv.precision(17);
    for (const auto& b : bars) csv << b.site << "," << b.run << "," << b.auroc << "\n";
  }

  const int width = 120 + int(sites.size()) * int(records.size()) * 40 + int(sites.size()) * 30;
  const int height = 320;
  const int plot_h = 250, base_y = 280, left = 60;
  std::ofstream svg(fs::path(out_dir) / "auroc_by_site.svg");
  if (!svg) throw std::runtime_error("cannot write plot SVG");
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\">\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << base_y << "\" x2=\"" << width - 10 << "\" y2=\""
      << base_y << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << base_y - plot_h << "\" x2=\"" << left
      << "\" y2=\"" << base_y << "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 10; tick += 2) {
    const int y = base_y - tick * plot_h / 10;
    svg << "<text x=\"" << left - 35 << "\" y=\"" << y + 4 << "\" font-size=\"11\">"
        << tick / 10.0 << "</text>\n";
    svg << "<line x1=\"" << left - 4 << "\" y1=\"" << y << "\" x2=\"" << left << "\" y2=\"" << y
        << "\" stroke=\"black\"/>\n";
  }
  const char* palette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"};
  int x = left + 20;
  for (const auto& site : sites) {
    const int group_start = x;
    int run_idx = 0;
    for (std::size_t r = 0; r < records.size(); ++r) {
      const std::string run_label = records[r].mode + "#" + std::to_string(r);
      for (const auto& b : bars) {
        if (b.site != site || b.run != run_label) continue;
        const int h = int(std::lround(b.auroc * plot_h));
        svg << "<rect x=\"" << x << "\" y=\"" << base_y - h << "\" width=\"32\" height=\"" << h
            << "\" fill=\"" << palette[run_idx % 6] << "\"><title>" << b.site << " " << b.run
            << " AUROC=" << b.auroc << "</title></rect>\n";
        x += 40;
        ++run_idx;
      }
    }
    svg << "<text x=\"" << (group_start + x - 40) / 2 << "\" y=\"" << base_y + 18
        << "\" font-size=\"12\" text-anchor=\"middle\">" << site << "</text>\n";
    x += 30;
  }
  svg << "</svg>\n";
}

}  // namespace ffl
