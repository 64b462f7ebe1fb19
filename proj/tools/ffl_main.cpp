#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ffl/experiment.hpp"
#include "ffl/image.hpp"
#include "ffl/rng.hpp"
#include "ffl/transport.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

ffl::RunRecord loadRunRecord(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open run record: " + path);
  json j;
  in >> j;
  return ffl::runRecordFromJson(j);
}

void writeRunRecord(const ffl::RunRecord& record, const std::string& dir) {
  fs::create_directories(dir);
  std::ofstream out(fs::path(dir) / "run.json");
  if (!out) throw std::runtime_error("cannot write run.json in " + dir);
  out << ffl::runRecordToJson(record).dump(2) << "\n";
}

std::pair<std::string, int> splitHostPort(const std::string& s) {
  auto colon = s.rfind(':');
  if (colon == std::string::npos) throw ffl::ConfigError("expected HOST:PORT, got '" + s + "'");
  return {s.substr(0, colon), std::stoi(s.substr(colon + 1))};
}

int cmdRun(const std::string& config_path, const std::string& out_dir,
           std::optional<std::uint64_t> seed) {
  ffl::ExperimentConfig cfg = ffl::parseConfigFile(config_path);
  if (seed) cfg.federation.seed = *seed;
  ffl::RunRecord record = ffl::runExperiment(cfg);
  writeRunRecord(record, out_dir);
  for (const auto& s : record.sites) {
    std::cout << s.site_id << ": macro AUROC " << s.report.macro_auroc << " (bootstrap "
              << s.report.macro_auroc_bootstrap.mean << " +/- "
              << s.report.macro_auroc_bootstrap.stddev << ")\n";
  }
  std::cout << "wrote " << (fs::path(out_dir) / "run.json").string() << "\n";
  return kExitOk;
}

int cmdCompare(const std::string& path_a, const std::string& path_b, const std::string& out_csv,
               int bootstrap, std::uint64_t seed) {
  auto a = loadRunRecord(path_a);
  auto b = loadRunRecord(path_b);
  auto rows = ffl::compareRuns(a, b, bootstrap, seed);
  ffl::writeComparisonCsv(rows, out_csv);
  for (const auto& r : rows)
    std::cout << r.site_id << ": " << r.auroc_a << " vs " << r.auroc_b << " (p=" << r.p_value
              << ")\n";
  return kExitOk;
}

int cmdPlot(const std::vector<std::string>& record_paths, const std::string& out_dir) {
  std::vector<ffl::RunRecord> records;
  for (const auto& p : record_paths) records.push_back(loadRunRecord(p));
  ffl::emitPlots(records, out_dir);
  std::cout << "wrote " << (fs::path(out_dir) / "auroc_by_site.svg").string() << " and .csv\n";
  return kExitOk;
}

int cmdGenData(const std::string& config_path, const std::string& out_dir) {
  ffl::ExperimentConfig cfg = ffl::parseConfigFile(config_path);
  ffl::LatentDiseaseConfig gen;
  gen.num_latent = cfg.synthetic.num_latent;
  gen.prevalence = cfg.synthetic.prevalence;
  gen.feature_dim = cfg.synthetic.feature_dim;
  gen.noise_std = cfg.synthetic.noise_std;
  std::vector<ffl::Index> n_per_site;
  std::vector<std::string> ids;
  for (const auto& s : cfg.sites) {
    if (s.dataset_dir) continue;
    gen.sites.push_back(ffl::SiteLabelSet{s.labels});
    n_per_site.push_back(*s.n);
    ids.push_back(s.site_id);
  }
  if (ids.empty()) throw ffl::ConfigError("config has no synthetic sites to generate");
  auto datasets = ffl::generateSynthetic(gen, n_per_site, cfg.federation.seed);
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    const std::string dir = (fs::path(out_dir) / ids[i]).string();
    ffl::saveDataset(datasets[i], dir);
    std::cout << "wrote " << dir << " (" << datasets[i].rows() << " rows)\n";
  }
  return kExitOk;
}

int cmdPreprocess(const std::string& in_dir, const std::string& out_dir, int out_h, int out_w) {
  fs::create_directories(out_dir);
  std::size_t count = 0;
  for (const auto& entry : fs::directory_iterator(in_dir)) {
    if (entry.path().extension() != ".pgm") continue;
    ffl::GrayImage img = ffl::readPgm(entry.path().string());
    Eigen::MatrixXd real(img.height, img.width);
    for (int r = 0; r < img.height; ++r)
      for (int c = 0; c < img.width; ++c) real(r, c) = double(img.at(r, c));
    ffl::GrayImage processed =
        ffl::resize(ffl::histEqualize(ffl::minmaxNormalize(real)), out_h, out_w);
    ffl::writePgm(processed, (fs::path(out_dir) / entry.path().filename()).string());
    ++count;
  }
  if (count == 0) throw std::runtime_error("no .pgm files found in " + in_dir);
  std::cout << "preprocessed " << count << " images into " << out_dir << "\n";
  return kExitOk;
}

int cmdServeAggregator(const std::string& listen, const std::string& config_path) {
  ffl::ExperimentConfig cfg = ffl::parseConfigFile(config_path);
  auto [host, port] = splitHostPort(listen);
  ffl::TcpListener listener(host, port);
  std::cout << "aggregator listening on " << host << ":" << listener.port() << ", waiting for "
            << cfg.sites.size() << " site(s)\n";
  std::vector<std::unique_ptr<ffl::Channel>> channels;
  for (std::size_t i = 0; i < cfg.sites.size(); ++i) channels.push_back(listener.accept());
  ffl::Parameters global =
      ffl::runAggregatorProtocol(cfg.backboneSpec(), cfg.federation, channels);
  std::cout << "federation complete; final backbone has " << global.size() << " tensors\n";
  return kExitOk;
}

int cmdServeSite(const std::string& connect, const std::string& config_path,
                 std::string site_id, const std::string& out_path) {
  ffl::ExperimentConfig cfg = ffl::parseConfigFile(config_path);
  if (site_id.empty()) {
    if (cfg.sites.size() != 1)
      throw ffl::ConfigError("--site-id required when the config lists multiple sites");
    site_id = cfg.sites[0].site_id;
  }
  ffl::PreparedData data = ffl::prepareData(cfg);
  auto it = std::find(data.site_ids.begin(), data.site_ids.end(), site_id);
  if (it == data.site_ids.end()) throw ffl::ConfigError("unknown site_id '" + site_id + "'");
  const std::size_t i = std::size_t(it - data.site_ids.begin());

  auto [host, port] = splitHostPort(connect);
  auto channel = ffl::connectTcp(host, port);
  const ffl::ModelSpec backbone = cfg.backboneSpec();
  ffl::SiteRunResult result =
      ffl::runSiteProtocol(backbone, site_id, data.train[i], cfg.federation, *channel);

  ffl::HeadSpec head{backbone.outputDim(), data.train[i].label_names};
  ffl::ModelSpec site_spec = ffl::buildSiteModel(backbone, head);
  ffl::ScoreSet scores = ffl::scoreModel(site_spec, result.final_params, data.test[i]);
  ffl::MetricsReport report = ffl::macroReport(scores, std::nullopt, cfg.eval.bootstrap,
                                               ffl::deriveSeed(cfg.eval.seed, "eval:" + site_id));
  json out;
  out["site_id"] = site_id;
  out["macro_auroc"] = report.macro_auroc;
  out["macro_accuracy"] = report.macro_accuracy;
  out["macro_sensitivity"] = report.macro_sensitivity;
  out["macro_specificity"] = report.macro_specificity;
  if (out_path.empty()) {
    std::cout << out.dump(2) << "\n";
  } else {
    std::ofstream f(out_path);
    f << out.dump(2) << "\n";
    std::cout << site_id << ": macro AUROC " << report.macro_auroc << ", wrote " << out_path
              << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flexible federated learning experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir, out_csv;
  std::optional<std::uint64_t> seed_override;
  auto* run = app.add_subcommand("run", "Run a local or federated experiment");
  run->add_option("--config", config_path, "Experiment config JSON")->required();
  run->add_option("--out", out_dir, "Output directory")->required();
  std::uint64_t run_seed = 0;
  auto* seed_opt = run->add_option("--seed", run_seed, "Override federation seed");

  std::string cmp_a, cmp_b;
  int cmp_bootstrap = 1000;
  std::uint64_t cmp_seed = 0;
  auto* compare = app.add_subcommand("compare", "Compare two run records");
  compare->add_option("a", cmp_a, "Run record A (run.json)")->required();
  compare->add_option("b", cmp_b, "Run record B (run.json)")->required();
  compare->add_option("--out", out_csv, "Output CSV path")->required();
  compare->add_option("--bootstrap", cmp_bootstrap, "Bootstrap redraws");
  compare->add_option("--seed", cmp_seed, "Bootstrap seed");

  std::vector<std::string> plot_records;
  std::string plot_out;
  auto* plot = app.add_subcommand("plot", "Emit AUROC bar chart (SVG + CSV)");
  plot->add_option("records", plot_records, "Run records")->required();
  plot->add_option("--out", plot_out, "Output directory")->required();

  std::string gen_config, gen_out;
  auto* gen = app.add_subcommand("gen-data", "Generate synthetic site datasets");
  gen->add_option("--config", gen_config, "Experiment config JSON")->required();
  gen->add_option("--out", gen_out, "Output directory")->required();

  std::string pre_in, pre_out;
  std::vector<int> pre_size;
  auto* pre = app.add_subcommand("preprocess", "Normalize, equalize and resize PGM images");
  pre->add_option("--in", pre_in, "Input directory of 8-bit PGM images")->required();
  pre->add_option("--out", pre_out, "Output directory")->required();
  pre->add_option("--size", pre_size, "Output size H W")->expected(2)->required();

  std::string agg_listen, agg_config;
  auto* agg = app.add_subcommand("serve-aggregator", "Run the TCP aggregator");
  agg->add_option("--listen", agg_listen, "HOST:PORT to listen on")->required();
  agg->add_option("--config", agg_config, "Experiment config JSON")->required();

  std::string site_connect, site_config, site_id, site_out;
  auto* site = app.add_subcommand("serve-site", "Run one TCP training site");
  site->add_option("--connect", site_connect, "HOST:PORT of the aggregator")->required();
  site->add_option("--site-config", site_config, "Experiment config JSON")->required();
  site->add_option("--site-id", site_id, "Which site this process plays");
  site->add_option("--out", site_out, "Where to write the site metrics JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (run->parsed())
      return cmdRun(config_path, out_dir,
                    seed_opt->count() ? std::optional<std::uint64_t>(run_seed) : std::nullopt);
    if (compare->parsed()) return cmdCompare(cmp_a, cmp_b, out_csv, cmp_bootstrap, cmp_seed);
    if (plot->parsed()) return cmdPlot(plot_records, plot_out);
    if (gen->parsed()) return cmdGenData(gen_config, gen_out);
    if (pre->parsed()) return cmdPreprocess(pre_in, pre_out, pre_size[0], pre_size[1]);
    if (agg->parsed()) return cmdServeAggregator(agg_listen, agg_config);
    if (site->parsed()) return cmdServeSite(site_connect, site_config, site_id, site_out);
  } catch (const ffl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
