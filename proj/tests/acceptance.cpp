// End-to-end acceptance checks. Each check prints one PASS/FAIL line; the
// process exits non-zero if any check fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ffl/dataset.hpp"
#include "ffl/experiment.hpp"
#include "ffl/federation.hpp"
#include "ffl/image.hpp"
#include "ffl/metrics.hpp"
#include "ffl/model.hpp"
#include "ffl/partition.hpp"
#include "ffl/wire.hpp"
#include "oracles.hpp"

using namespace ffl;

namespace {

struct Harness {
  int failures = 0;

  void run(const std::string& name, const std::function<void()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string error;
    try {
      body();
    } catch (const std::exception& e) {
      error = e.what();
    } catch (...) {
      error = "unknown exception";
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (error.empty()) {
      std::printf("PASS  %-28s (%.1fs)\n", name.c_str(), secs);
    } else {
      std::printf("FAIL  %-28s (%.1fs): %s\n", name.c_str(), secs, error.c_str());
      ++failures;
    }
    std::fflush(stdout);
  }
};

void require(bool ok, const std::string& what) {
  if (!ok) throw std::runtime_error(what);
}

ModelSpec mlpBackbone(Index in, std::vector<Index> hidden) {
  ModelSpec spec;
  spec.input_shape = {in};
  Index prev = in;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    spec.layers.push_back(DenseLayer{"dense" + std::to_string(i + 1), prev, hidden[i]});
    spec.layers.push_back(ReluLayer{});
    prev = hidden[i];
  }
  return spec;
}

LatentDiseaseConfig latentConfig(int n_sites) {
  LatentDiseaseConfig cfg;
  cfg.num_latent = 3;
  cfg.prevalence = {0.3, 0.4, 0.3};
  cfg.feature_dim = 16;
  cfg.noise_std = 0.5;
  for (int i = 0; i < n_sites; ++i)
    cfg.sites.push_back(SiteLabelSet{{{"p", {0}, 0.0}, {"q", {1, 2}, 0.05}}});
  return cfg;
}

// --- 1: a single federated site must reproduce local training bit-exactly ---

void checkOneSiteIdentity() {
  auto backbone = mlpBackbone(16, {16, 8});
  FederationConfig cfg;
  cfg.rounds = 4;
  cfg.local_epochs_per_round = 2;
  cfg.fine_tune_epochs = 3;
  cfg.seed = 71;
  auto data = generateSynthetic(latentConfig(1), {120}, 71)[0];

  auto fed = runFederated(backbone, cfg, {{"solo", data}});
  auto local = trainLocal(backbone, "solo", data, cfg);
  require(fed.sites.size() == 1, "expected one site result");
  require(fed.sites[0].final_params == local.final_params,
          "federated single-site parameters differ from local training");
}

// --- 2: aggregation must never touch head parameters ---

void checkHeadIsolation() {
  auto backbone = mlpBackbone(16, {16, 8});
  FederationConfig cfg;
  cfg.rounds = 5;
  cfg.seed = 72;
  auto datasets = generateSynthetic(latentConfig(3), {60, 60, 60}, 72);

  std::vector<SiteState> sites;
  for (int i = 0; i < 3; ++i)
    sites.push_back(makeSiteState(backbone, "site" + std::to_string(i), datasets[i], cfg));

  Parameters global = initialGlobalBackbone(backbone, cfg);
  for (std::uint32_t round = 0; round < std::uint32_t(cfg.rounds); ++round) {
    std::vector<SiteUpdate> updates;
    for (auto& s : sites) {
      auto m = siteLocalRound(s, global, round, cfg);
      updates.push_back(SiteUpdate{m.site_id, m.params, Index(m.n_train)});
    }
    std::vector<Parameters> heads_before;
    for (const auto& s : sites) heads_before.push_back(s.params.head);

    global = aggregate(updates, cfg.aggregation);
    for (auto& s : sites) s.params.backbone = global;  // broadcast adoption

    for (std::size_t i = 0; i < sites.size(); ++i)
      require(sites[i].params.head == heads_before[i],
              "head changed across aggregation in round " + std::to_string(round));
  }
  // heads genuinely differ across sites, so the check above is not vacuous
  require(!(sites[0].params.head == sites[1].params.head), "site heads unexpectedly identical");
}

// --- 3: aggregation against a naive reference, order invariance ---

Parameters naiveAggregate(const std::vector<SiteUpdate>& updates, Aggregation mode) {
  double total_n = 0;
  for (const auto& u : updates) total_n += double(u.n_train);
  Parameters out;
  for (const auto& [name, t] : updates[0].backbone) {
    Tensor acc(t.shape());
    for (const auto& u : updates) {
      const double w = mode == Aggregation::UnweightedMean ? 1.0 / double(updates.size())
                                                           : double(u.n_train) / total_n;
      for (Index i = 0; i < acc.size(); ++i) acc[i] += w * u.backbone.at(name)[i];
    }
    out.emplace(name, std::move(acc));
  }
  return out;
}

void checkAggregationOracle() {
  std::mt19937_64 rng(73);
  std::uniform_int_distribution<int> n_sites(1, 6);
  std::uniform_int_distribution<int> dim(1, 8);
  std::uniform_int_distribution<Index> n_train(1, 500);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<SiteUpdate> updates;
    const int k = n_sites(rng);
    std::vector<Index> shape_a{dim(rng), dim(rng)};
    std::vector<Index> shape_b{dim(rng)};
    for (int i = 0; i < k; ++i) {
      Parameters p;
      p["w"] = oracles::randomTensor(shape_a, rng);
      p["b"] = oracles::randomTensor(shape_b, rng);
      updates.push_back(SiteUpdate{"s" + std::to_string(i), std::move(p), n_train(rng)});
    }
    for (auto mode : {Aggregation::UnweightedMean, Aggregation::SampleWeightedMean}) {
      auto got = aggregate(updates, mode);
      auto want = naiveAggregate(updates, mode);
      for (const auto& [name, t] : want)
        for (Index i = 0; i < t.size(); ++i)
          require(std::abs(got.at(name)[i] - t[i]) <= 1e-12,
                  "aggregate deviates from reference mean");
      std::shuffle(updates.begin(), updates.end(), rng);
      require(aggregate(updates, mode) == got, "aggregate depends on arrival order");
    }
  }
}

// --- 4: analytic gradients vs central finite differences ---

void checkGradients() {
  std::mt19937_64 rng(74);
  ModelSpec spec;
  spec.input_shape = {5};
  spec.layers = {DenseLayer{"dense1", 5, 6}, ReluLayer{}, DenseLayer{"dense2", 6, 3}};
  std::uniform_real_distribution<double> wdist(0.5, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    Parameters params = initParams(spec, 1000 + std::uint64_t(trial));
    Tensor batch = oracles::randomTensor({4, 5}, rng);
    Tensor labels = oracles::randomLabels(4, 3, rng);
    LossConfig loss{{wdist(rng), wdist(rng), wdist(rng)}};
    auto analytic = lossAndGrads(spec, params, batch, labels, loss).grads;
    auto reference = oracles::finiteDiffGrads(spec, params, batch, labels, loss, 1e-6);
    const double err = oracles::maxRelGradError(analytic, reference);
    require(err < 1e-4, "gradient relative error " + std::to_string(err));
  }
}

// --- 5: ranking metrics vs brute-force oracles ---

void checkRankingMetrics() {
  require(std::abs(auroc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) - 0.75) < 1e-15,
          "worked AUROC example");
  require(youdenThreshold({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) == 0.35,
          "worked threshold example");

  std::mt19937_64 rng(75);
  std::uniform_int_distribution<int> size(2, 200);
  std::uniform_int_distribution<int> grid(0, 19);
  std::bernoulli_distribution lab(0.4);
  int done = 0;
  while (done < 500) {
    const int n = size(rng);
    std::vector<double> s, y;
    for (int i = 0; i < n; ++i) {
      s.push_back(grid(rng) / 20.0);
      y.push_back(lab(rng) ? 1.0 : 0.0);
    }
    bool pos = false, neg = false;
    for (double v : y) (v == 1.0 ? pos : neg) = true;
    if (!pos || !neg) continue;
    ++done;
    require(std::abs(auroc(s, y) - oracles::aurocPairwise(s, y)) < 1e-12,
            "AUROC deviates from pairwise counting");
    require(youdenThreshold(s, y) == oracles::youdenScan(s, y),
            "threshold deviates from exhaustive scan");
  }
}

// --- 6: bootstrap determinism and p-value extremes ---

void checkBootstrap() {
  std::mt19937_64 rng(76);
  const Index n = 120, l = 1;
  ScoreSet s;
  s.scores = Tensor({n, l});
  s.labels = Tensor({n, l});
  s.label_names = {"y"};
  std::uniform_real_distribution<double> uni(0, 1);
  for (Index i = 0; i < n; ++i) {
    s.labels[i] = i % 3 == 0 ? 1.0 : 0.0;
    s.scores[i] = 0.3 * s.labels[i] + 0.7 * uni(rng);
  }

  auto a = bootstrapSpread(s, macroAuroc, 1000, 7);
  auto b = bootstrapSpread(s, macroAuroc, 1000, 7);
  require(a.mean == b.mean && a.stddev == b.stddev && a.ci_lo == b.ci_lo && a.ci_hi == b.ci_hi,
          "bootstrap not deterministic per seed");

  require(pairedBootstrapPvalue(s, s, macroAuroc, 1000, 8) >= 0.5,
          "identical systems should not look significantly different");

  ScoreSet best = s, worst = s;
  for (Index i = 0; i < n; ++i) {
    best.scores[i] = s.labels[i] == 1.0 ? 0.9 : 0.1;
    worst.scores[i] = s.labels[i] == 1.0 ? 0.1 : 0.9;
  }
  const double p = pairedBootstrapPvalue(best, worst, macroAuroc, 1000, 9);
  require(std::abs(p - 1.0 / 1001.0) < 1e-15, "strict dominance should give the minimal p-value");
}

// --- 7: small sites gain from sharing a backbone with a large site ---

ExperimentConfig benefitConfig(std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.mode = RunMode::Federated;
  cfg.input_dim = 32;
  cfg.backbone_hidden = {32, 16};
  cfg.synthetic.num_latent = 4;
  cfg.synthetic.prevalence = {0.3, 0.3, 0.3, 0.3};
  cfg.synthetic.feature_dim = 32;
  cfg.synthetic.noise_std = 3.0;
  cfg.federation.rounds = 40;
  cfg.federation.local_epochs_per_round = 2;
  cfg.federation.fine_tune_epochs = 200;
  cfg.federation.aggregation = Aggregation::SampleWeightedMean;
  cfg.federation.seed = seed;
  cfg.test_fraction = 0.25;
  SiteSpec small;
  small.site_id = "clinic_a";
  small.n = 200;
  small.labels = {{"a1", {0}, 0.0}, {"a2", {1}, 0.0}};
  SiteSpec large;
  large.site_id = "hospital_b";
  large.n = 5000;
  large.labels = {{"b1", {0, 2}, 0.05}, {"b2", {1}, 0.0}, {"b3", {3}, 0.0}};
  cfg.sites = {small, large};
  return cfg;
}

void checkSmallSiteBenefit() {
  int wins = 0;
  double mean_gain = 0.0;
  std::ostringstream detail;
  for (int trial = 0; trial < 10; ++trial) {
    auto cfg = benefitConfig(9000 + std::uint64_t(trial));
    auto data = prepareData(cfg);
    const ModelSpec backbone = cfg.backboneSpec();
    const std::size_t small = 0;  // clinic_a comes first in the config

    std::vector<SiteData> arms;
    for (std::size_t i = 0; i < data.site_ids.size(); ++i)
      arms.push_back(SiteData{data.site_ids[i], data.train[i]});
    auto fed = runFederated(backbone, cfg.federation, arms);
    auto local = trainLocal(backbone, data.site_ids[small], data.train[small], cfg.federation);

    HeadSpec head{backbone.outputDim(), data.train[small].label_names};
    ModelSpec site_spec = buildSiteModel(backbone, head);
    const SiteRunResult* fed_small = nullptr;
    for (const auto& s : fed.sites)
      if (s.site_id == data.site_ids[small]) fed_small = &s;
    require(fed_small != nullptr, "missing small-site result");

    const double auroc_fed =
        macroAuroc(scoreModel(site_spec, fed_small->final_params, data.test[small]));
    const double auroc_local =
        macroAuroc(scoreModel(site_spec, local.final_params, data.test[small]));
    if (auroc_fed > auroc_local) ++wins;
    mean_gain += (auroc_fed - auroc_local) / 10.0;
    detail << " " << auroc_fed - auroc_local;
  }
  require(wins >= 7, "shared backbone won only " + std::to_string(wins) +
                         "/10 seeds (deltas:" + detail.str() + ")");
  require(mean_gain > 0.01, "mean AUROC gain " + std::to_string(mean_gain) +
                                " too small (deltas:" + detail.str() + ")");
}

// --- 8: TCP transport reproduces the in-process run bit-exactly ---

void checkTransportEquivalence() {
  auto cfg = benefitConfig(81);
  cfg.federation.rounds = 4;
  cfg.federation.fine_tune_epochs = 2;
  cfg.sites[1].n = 400;
  cfg.eval.bootstrap = 100;
  cfg.transport = Transport::Inproc;
  auto inproc = runExperiment(cfg);
  cfg.transport = Transport::Tcp;
  auto tcp = runExperiment(cfg);
  require(inproc.sites.size() == tcp.sites.size(), "site count differs across transports");
  for (std::size_t i = 0; i < inproc.sites.size(); ++i) {
    require(inproc.sites[i].test_scores.scores == tcp.sites[i].test_scores.scores,
            "model outputs differ across transports");
    require(inproc.sites[i].report.macro_auroc == tcp.sites[i].report.macro_auroc &&
                inproc.sites[i].report.macro_auroc_bootstrap.mean ==
                    tcp.sites[i].report.macro_auroc_bootstrap.mean,
            "metrics differ across transports");
  }
}

// --- 9: wire format round trips; malformed frames raise distinct errors ---

void checkWireProtocol() {
  std::mt19937_64 rng(91);
  std::uniform_int_distribution<int> kind(0, 4);
  std::uniform_int_distribution<int> dim(1, 5);
  auto random_params = [&](int count) {
    Parameters p;
    for (int i = 0; i < count; ++i)
      p["t" + std::to_string(i)] = oracles::randomTensor({dim(rng), dim(rng)}, rng);
    return p;
  };
  for (int i = 0; i < 1000; ++i) {
    RoundMessage m;
    switch (kind(rng)) {
      case 0: m = msg::Register{"site" + std::to_string(i), std::uint32_t(i)}; break;
      case 1: m = msg::GlobalBackbone{std::uint32_t(i), random_params(3)}; break;
      case 2: m = msg::LocalBackbone{std::uint32_t(i), "s", random_params(2), 42}; break;
      case 3: m = msg::EnterFineTune{}; break;
      default: m = msg::Shutdown{};
    }
    require(decodeMessage(encodeMessage(m)) == m, "wire round trip lost information");
  }

  auto expectKind = [](std::vector<std::uint8_t> bytes, WireErrorKind want) {
    try {
      decodeMessage(bytes);
    } catch (const WireError& e) {
      return e.kind == want;
    }
    return false;
  };
  auto good = encodeMessage(msg::Register{"x", 1});
  auto bad_magic = good;
  bad_magic[0] = 'Z';
  auto bad_tag = good;
  bad_tag[5] = 200;
  auto truncated = good;
  truncated.resize(truncated.size() - 2);
  require(expectKind(bad_magic, WireErrorKind::BadMagic), "bad magic not flagged");
  require(expectKind(bad_tag, WireErrorKind::UnknownTag), "unknown tag not flagged");
  require(expectKind(truncated, WireErrorKind::Truncated), "truncation not flagged");
}

// --- 10: image normalization invariants ---

void checkPreprocessing() {
  Eigen::MatrixXd ramp(1, 3);
  ramp << 10, 20, 30;
  auto norm = minmaxNormalize(ramp);
  require(norm.pixels == std::vector<std::uint8_t>{0, 127, 255},
          "min-max scaling disagrees on the ramp example");

  Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(4, 4, 7.0);
  auto zeroed = minmaxNormalize(flat);
  for (auto v : zeroed.pixels) require(v == 0, "constant input should normalize to zeros");

  GrayImage flat_img(3, 3);
  for (auto& p : flat_img.pixels) p = 99;
  require(histEqualize(flat_img) == flat_img, "constant image should survive equalization");

  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> side(2, 24);
  std::uniform_int_distribution<int> pix(0, 255);
  for (int trial = 0; trial < 100; ++trial) {
    GrayImage img(side(rng), side(rng));
    for (auto& p : img.pixels) p = std::uint8_t(pix(rng));
    auto eq = histEqualize(img);
    // equalization must act as a single monotone lookup table
    std::map<int, int> lut;
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
      auto [it, inserted] = lut.emplace(img.pixels[i], eq.pixels[i]);
      require(it->second == eq.pixels[i], "equalization is not a per-value mapping");
    }
    int prev = -1;
    for (const auto& [in, out] : lut) {
      require(out >= prev, "equalization lookup table not monotone");
      prev = out;
    }
  }
}

// --- 11: label binarization rules ---

void checkBinarization() {
  require(binarizeChexpert(ChexpertLabel::Positive) == 1, "chexpert positive");
  require(binarizeChexpert(ChexpertLabel::Negative) == 0, "chexpert negative");
  require(binarizeChexpert(ChexpertLabel::Uncertain) == 0, "chexpert uncertain");
  require(binarizeChexpert(ChexpertLabel::NotMentioned) == 0, "chexpert not-mentioned");

  for (bool cardio : {false, true}) {
    require(binarizeUka(UkaSeverity::Negative, cardio) == 0, "severity scale negative");
    require(binarizeUka(UkaSeverity::Uncertain, cardio) == 0, "severity scale uncertain");
    require(binarizeUka(UkaSeverity::Mild, cardio) == 1, "severity scale mild");
    require(binarizeUka(UkaSeverity::Moderate, cardio) == 1, "severity scale moderate");
    require(binarizeUka(UkaSeverity::Severe, cardio) == 1, "severity scale severe");
  }
}

// --- 12: train/test splits never share a patient ---

void checkPatientSplit() {
  std::mt19937_64 rng(121);
  std::uniform_int_distribution<int> n_patients(8, 60);
  std::uniform_int_distribution<int> n_records(1, 4);
  std::uniform_real_distribution<double> feat(-1, 1);
  std::bernoulli_distribution lab(0.4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> ids;
    const int patients = n_patients(rng);
    for (int p = 0; p < patients; ++p) {
      const int reps = n_records(rng);
      for (int r = 0; r < reps; ++r) ids.push_back("patient_" + std::to_string(p));
    }
    std::shuffle(ids.begin(), ids.end(), rng);
    const Index n = Index(ids.size());
    MultilabelDataset ds;
    ds.features = Tensor({n, 3});
    ds.labels = Tensor({n, 1});
    ds.label_names = {"y"};
    ds.patient_ids = ids;
    for (Index i = 0; i < ds.features.size(); ++i) ds.features[i] = feat(rng);
    for (Index i = 0; i < n; ++i) ds.labels[i] = lab(rng) ? 1.0 : 0.0;

    auto [train, test] = splitTrainTest(ds, 0.25, std::uint64_t(trial));
    std::set<std::string> train_ids(train.patient_ids.begin(), train.patient_ids.end());
    for (const auto& id : test.patient_ids)
      require(!train_ids.count(id), "patient appears on both sides of the split");
    require(train.rows() + test.rows() == n, "split dropped or duplicated records");
  }
}

}  // namespace

int main() {
  Harness h;
  h.run("one-site identity", checkOneSiteIdentity);
  h.run("head isolation", checkHeadIsolation);
  h.run("aggregation oracle", checkAggregationOracle);
  h.run("gradient check", checkGradients);
  h.run("ranking metric oracles", checkRankingMetrics);
  h.run("bootstrap contract", checkBootstrap);
  h.run("small-site benefit", checkSmallSiteBenefit);
  h.run("transport equivalence", checkTransportEquivalence);
  h.run("wire protocol", checkWireProtocol);
  h.run("image preprocessing", checkPreprocessing);
  h.run("label binarization", checkBinarization);
  h.run("patient-wise split", checkPatientSplit);
  if (h.failures > 0) {
    std::printf("%d of 12 checks failed\n", h.failures);
    return 1;
  }
  std::printf("all 12 checks passed\n");
  return 0;
}
