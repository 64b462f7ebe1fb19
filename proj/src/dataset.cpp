#include "ffl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "ffl/rng.hpp"

namespace ffl {

void MultilabelDataset::validate() const {
  const Index n = rows();
  if (labels.ndim() != 2 || labels.dim(0) != n)
    throw std::invalid_argument("label row count disagrees with features");
  if (labels.dim(1) != Index(label_names.size()))
    throw std::invalid_argument("label column count disagrees with label names");
  if (Index(patient_ids.size()) != n)
    throw std::invalid_argument("patient id count disagrees with features");
  for (const auto& p : patient_ids)
    if (p.empty()) throw std::invalid_argument("empty patient id");
  for (Index i = 0; i < labels.size(); ++i)
    if (labels[i] != 0.0 && labels[i] != 1.0)
      throw std::invalid_argument("labels must be 0 or 1");
}

std::vector<MultilabelDataset> generateSynthetic(const LatentDiseaseConfig& cfg,
                                                 const std::vector<Index>& n_per_site,
                                                 std::uint64_t seed) {
  if (cfg.sites.empty() || n_per_site.empty())
    throw std::invalid_argument("need at least one site");
  if (cfg.sites.size() != n_per_site.size())
    throw std::invalid_argument("n_per_site length must match site count");
  if (cfg.num_latent <= 0 || Index(cfg.prevalence.size()) != Index(cfg.num_latent))
    throw std::invalid_argument("prevalence length must equal num_latent");
  for (double p : cfg.prevalence)
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("prevalence must be in (0,1)");
  if (cfg.feature_dim <= 0) throw std::invalid_argument("feature_dim must be positive");
  if (cfg.noise_std < 0) throw std::invalid_argument("noise_std must be non-negative");
  for (const auto& site : cfg.sites) {
    if (site.rules.empty()) throw std::invalid_argument("site needs at least one label rule");
    std::set<std::string> names;
    for (const auto& rule : site.rules) {
      if (rule.name.empty() || !names.insert(rule.name).second)
        throw std::invalid_argument("label rule names must be unique and non-empty");
      if (rule.any_of.empty()) throw std::invalid_argument("label rule references no latent");
      for (int k : rule.any_of)
        if (k < 0 || k >= cfg.num_latent)
          throw std::invalid_argument("label rule references invalid latent index");
      if (!(rule.flip_noise >= 0.0 && rule.flip_noise < 0.5))
        throw std::invalid_argument("flip_noise must be in [0, 0.5)");
    }
  }
  for (Index n : n_per_site)
    if (n <= 0) throw std::invalid_argument("site sizes must be positive");

  const Index n_max = *std::max_element(n_per_site.begin(), n_per_site.end());

  // latent patterns and per-record latent bits are shared across sites
  std::mt19937_64 pattern_rng(deriveSeed(seed, "patterns"));
  std::normal_distribution<double> unit(0.0, 1.0);
  MatrixRM patterns(cfg.num_latent, cfg.feature_dim);
  for (Index i = 0; i < patterns.size(); ++i) patterns.data()[i] = unit(pattern_rng);

  std::mt19937_64 latent_rng(deriveSeed(seed, "latent"));
  std::vector<std::vector<char>> latent(std::size_t(n_max),
                                        std::vector<char>(std::size_t(cfg.num_latent)));
  for (Index i = 0; i < n_max; ++i)
    for (int k = 0; k < cfg.num_latent; ++k)
      latent[std::size_t(i)][std::size_t(k)] =
          std::bernoulli_distribution(cfg.prevalence[std::size_t(k)])(latent_rng) ? 1 : 0;

  std::vector<MultilabelDataset> out;
  for (std::size_t s = 0; s < cfg.sites.size(); ++s) {
    const Index n = n_per_site[s];
    const auto& rules = cfg.sites[s].rules;
    const Index nl = Index(rules.size());
    std::mt19937_64 noise_rng(deriveSeed(seed, deriveSeed(0x5e, s)));
    std::mt19937_64 flip_rng(deriveSeed(seed, deriveSeed(0xf1, s)));

    MultilabelDataset ds;
    ds.features = Tensor({n, cfg.feature_dim});
    ds.labels = Tensor({n, nl});
    for (const auto& rule : rules) ds.label_names.push_back(rule.name);
    auto feat = ds.features.matrix();
    for (Index i = 0; i < n; ++i) {
      for (Index d = 0; d < cfg.feature_dim; ++d) feat(i, d) = cfg.noise_std * unit(noise_rng);
      for (int k = 0; k < cfg.num_latent; ++k)
        if (latent[std::size_t(i)][std::size_t(k)]) feat.row(i) += patterns.row(k);
      for (Index j = 0; j < nl; ++j) {
        const auto& rule = rules[std::size_t(j)];
        bool on = false;
        for (int k : rule.any_of) on = on || latent[std::size_t(i)][std::size_t(k)];
        if (rule.flip_noise > 0.0 && std::bernoulli_distribution(rule.flip_noise)(flip_rng))
          on = !on;
        ds.labels[i * nl + j] = on ? 1.0 : 0.0;
      }
      ds.patient_ids.push_back("site" + std::to_string(s) + "_p" + std::to_string(i));
    }
    ds.validate();
    out.push_back(std::move(ds));
  }
  return out;
}

namespace {

MultilabelDataset takeRows(const MultilabelDataset& ds, const std::vector<Index>& rows) {
  const Index d = ds.features.size() / std::max<Index>(ds.rows(), 1);
  const Index nl = ds.numLabels();
  std::vector<Index> fshape = ds.features.shape();
  fshape[0] = Index(rows.size());
  MultilabelDataset out;
  out.features = Tensor(fshape);
  out.labels = Tensor({Index(rows.size()), nl});
  out.label_names = ds.label_names;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Index r = rows[i];
    out.features.data().segment(Index(i) * d, d) = ds.features.data().segment(r * d, d);
    out.labels.data().segment(Index(i) * nl, nl) = ds.labels.data().segment(r * nl, nl);
    out.patient_ids.push_back(ds.patient_ids[std::size_t(r)]);
  }
  return out;
}

double maxLabelRateGap(const MultilabelDataset& a, const MultilabelDataset& b) {
  double gap = 0.0;
  for (Index j = 0; j < a.numLabels(); ++j) {
    double ra = a.labels.matrix().col(j).mean();
    double rb = b.labels.matrix().col(j).mean();
    gap = std::max(gap, std::abs(ra - rb));
  }
  return gap;
}

}  // namespace

std::pair<MultilabelDataset, MultilabelDataset> splitTrainTest(const MultilabelDataset& ds,
                                                               double test_fraction,
                                                               std::uint64_t seed) {
  ds.validate();
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("test_fraction must be in (0,1)");
  std::map<std::string, std::vector<Index>> by_patient;
  for (Index i = 0; i < ds.rows(); ++i) by_patient[ds.patient_ids[std::size_t(i)]].push_back(i);
  if (by_patient.size() < 2) throw std::invalid_argument("need at least two patients to split");

  std::vector<std::string> patients;
  for (const auto& [p, _] : by_patient) patients.push_back(p);

  const Index target = Index(std::llround(test_fraction * double(ds.rows())));
  std::pair<MultilabelDataset, MultilabelDataset> best;
  double best_gap = -1.0;

  // a few shuffles, keep the first that approximately preserves prevalence
  for (int attempt = 0; attempt < 50; ++attempt) {
    std::mt19937_64 rng(deriveSeed(seed, std::uint64_t(attempt)));
    std::vector<std::string> order = patients;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Index> test_rows, train_rows;
    for (const auto& p : order) {
      auto& rows = by_patient[p];
      if (Index(test_rows.size()) < target)
        test_rows.insert(test_rows.end(), rows.begin(), rows.end());
      else
        train_rows.insert(train_rows.end(), rows.begin(), rows.end());
    }
    if (test_rows.empty() || train_rows.empty()) {
      // degenerate target; force one patient to each side
      test_rows.clear();
      train_rows.clear();
      test_rows.insert(test_rows.end(), by_patient[order[0]].begin(), by_patient[order[0]].end());
      for (std::size_t i = 1; i < order.size(); ++i)
        train_rows.insert(train_rows.end(), by_patient[order[i]].begin(),
                          by_patient[order[i]].end());
    }
    std::sort(test_rows.begin(), test_rows.end());
    std::sort(train_rows.begin(), train_rows.end());
    auto train = takeRows(ds, train_rows);
    auto test = takeRows(ds, test_rows);
    double gap = maxLabelRateGap(train, test);
    if (best_gap < 0 || gap < best_gap) {
      best_gap = gap;
      best = {std::move(train), std::move(test)};
      if (best_gap < 0.05) break;
    }
  }
  return best;
}

LossConfig classPosWeights(const MultilabelDataset& ds) {
  ds.validate();
  if (ds.rows() == 0) throw std::invalid_argument("empty dataset");
  LossConfig cfg;
  const Index n = ds.rows();
  for (Index j = 0; j < ds.numLabels(); ++j) {
    double pos = ds.labels.matrix().col(j).sum();
    double neg = double(n) - pos;
    double w = pos > 0 ? neg / pos : 1e2;
    cfg.pos_weights.push_back(std::clamp(w, 1e-2, 1e2));
  }
  return cfg;
}

int binarizeChexpert(ChexpertLabel v) { return v == ChexpertLabel::Positive ? 1 : 0; }

int binarizeUka(UkaSeverity v, bool /*is_cardiomegaly*/) {
  switch (v) {
    case UkaSeverity::Mild:
    case UkaSeverity::Moderate:
    case UkaSeverity::Severe:
      return 1;
    default:
      return 0;
  }
}

void saveDataset(const MultilabelDataset& ds, const std::string& dir) {
  ds.validate();
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream out(fs::path(dir) / "features.bin", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write features.bin in " + dir);
    out.write("FFLD", 4);
    auto put32 = [&out](std::uint32_t v) {
      unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                            static_cast<unsigned char>(v >> 16),
                            static_cast<unsigned char>(v >> 24)};
      out.write(reinterpret_cast<char*>(b), 4);
    };
    put32(std::uint32_t(ds.features.ndim()));
    for (Index d : ds.features.shape()) put32(std::uint32_t(d));
    static_assert(sizeof(double) == 8);
    out.write(reinterpret_cast<const char*>(ds.features.data().data()),
              std::streamsize(ds.features.size() * 8));
  }
  {
    std::ofstream out(fs::path(dir) / "labels.csv");
    if (!out) throw std::runtime_error("cannot write labels.csv in " + dir);
    out << "patient_id";
    for (const auto& name : ds.label_names) out << "," << name;
    out << "\n";
    const Index nl = ds.numLabels();
    for (Index i = 0; i < ds.rows(); ++i) {
      out << ds.patient_ids[std::size_t(i)];
      for (Index j = 0; j < nl; ++j) out << "," << int(ds.labels[i * nl + j]);
      out << "\n";
    }
  }
}

MultilabelDataset loadDataset(const std::string& dir) {
  namespace fs = std::filesystem;
  MultilabelDataset ds;
  {
    std::ifstream in(fs::path(dir) / "features.bin", std::ios::binary);
    if (!in) throw std::runtime_error("cannot open features.bin in " + dir);
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::string(magic, 4) != "FFLD")
      throw std::runtime_error("bad features.bin magic in " + dir);
    auto get32 = [&in, &dir]() {
      unsigned char b[4];
      in.read(reinterpret_cast<char*>(b), 4);
      if (in.gcount() != 4) throw std::runtime_error("truncated features.bin in " + dir);
      return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
             std::uint32_t(b[3]) << 24;
    };
    std::uint32_t ndim = get32();
    if (ndim == 0 || ndim > 8) throw std::runtime_error("bad features.bin rank in " + dir);
    std::vector<Index> shape;
    for (std::uint32_t i = 0; i < ndim; ++i) shape.push_back(Index(get32()));
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data().data()), std::streamsize(t.size() * 8));
    if (in.gcount() != std::streamsize(t.size() * 8))
      throw std::runtime_error("truncated features.bin payload in " + dir);
    ds.features = std::move(t);
  }
  {
    std::ifstream in(fs::path(dir) / "labels.csv");
    if (!in) throw std::runtime_error("cannot open labels.csv in " + dir);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty labels.csv in " + dir);
    std::stringstream header(line);
    std::string cell;
    std::getline(header, cell, ',');  // patient_id column
    while (std::getline(header, cell, ',')) ds.label_names.push_back(cell);
    std::vector<double> values;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::stringstream row(line);
      std::getline(row, cell, ',');
      ds.patient_ids.push_back(cell);
      std::size_t got = 0;
      while (std::getline(row, cell, ',')) {
        values.push_back(std::stod(cell));
        ++got;
      }
      if (got != ds.label_names.size())
        throw std::runtime_error("ragged labels.csv row in " + dir);
    }
    const Index n = Index(ds.patient_ids.size());
    const Index nl = Index(ds.label_names.size());
    Tensor labels({std::max<Index>(n, 1), std::max<Index>(nl, 1)});
    if (n == 0 || nl == 0) throw std::runtime_error("labels.csv has no data in " + dir);
    labels = Tensor({n, nl});
    for (Index i = 0; i < n * nl; ++i) labels[i] = values[std::size_t(i)];
    ds.labels = std::move(labels);
  }
  ds.validate();
  return ds;
}

}  // namespace ffl
