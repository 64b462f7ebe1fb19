#include "ffl/federation.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <thread>

#include "ffl/rng.hpp"
#include "ffl/transport.hpp"

namespace ffl {

void FederationConfig::validate() const {
  if (rounds <= 0) throw std::invalid_argument("rounds must be positive");
  if (local_epochs_per_round <= 0)
    throw std::invalid_argument("local_epochs_per_round must be positive");
  if (batch_size <= 0) throw std::invalid_argument("batch_size must be positive");
  if (!(backbone_lr > 0) || !(head_lr > 0))
    throw std::invalid_argument("learning rates must be positive");
  if (fine_tune_epochs < 0) throw std::invalid_argument("fine_tune_epochs must be non-negative");
}

Parameters aggregate(const std::vector<SiteUpdate>& updates, Aggregation mode) {
  if (updates.empty()) throw std::invalid_argument("aggregate needs at least one update");
  std::vector<const SiteUpdate*> sorted;
  for (const auto& u : updates) sorted.push_back(&u);
  std::sort(sorted.begin(), sorted.end(),
            [](const SiteUpdate* a, const SiteUpdate* b) { return a->site_id < b->site_id; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i]->site_id == sorted[i - 1]->site_id)
      throw std::invalid_argument("duplicate site_id in updates");
    if (!sameShapes(sorted[i]->backbone, sorted[0]->backbone))
      throw std::invalid_argument("backbone key sets or shapes disagree across updates");
  }

  double total_n = 0;
  if (mode == Aggregation::SampleWeightedMean) {
    for (const auto* u : sorted) total_n += double(u->n_train);
    if (total_n <= 0) throw std::invalid_argument("sample-weighted mean needs positive n_train");
  }

  auto weightOf = [&](const SiteUpdate& u) {
    return mode == Aggregation::UnweightedMean ? 1.0 : double(u.n_train) / total_n;
  };
  Parameters out;
  for (const auto& [name, first] : sorted[0]->backbone) {
    // first term initializes the accumulator so a single update passes
    // through bit-exactly
    Tensor acc(first.shape(), weightOf(*sorted[0]) * sorted[0]->backbone.at(name).data());
    for (std::size_t i = 1; i < sorted.size(); ++i)
      acc.data() += weightOf(*sorted[i]) * sorted[i]->backbone.at(name).data();
    if (mode == Aggregation::UnweightedMean) acc.data() /= double(sorted.size());
    out.emplace(name, std::move(acc));
  }
  return out;
}

Parameters initialGlobalBackbone(const ModelSpec& backbone_spec, const FederationConfig& cfg) {
  return initParams(backbone_spec, cfg.seed);
}

SiteState makeSiteState(const ModelSpec& backbone_spec, const std::string& site_id,
                        MultilabelDataset train, const FederationConfig& cfg) {
  cfg.validate();
  train.validate();
  if (site_id.empty()) throw std::invalid_argument("empty site_id");
  SiteState site;
  site.site_id = site_id;
  HeadSpec head{backbone_spec.outputDim(), train.label_names};
  site.spec = buildSiteModel(backbone_spec, head);

  // backbone from the federation seed (identical at every site), head from
  // a per-site substream
  Parameters backbone = initParams(backbone_spec, cfg.seed);
  Parameters site_init = initParams(site.spec, deriveSeed(cfg.seed, "head:" + site_id));
  site.params.backbone = std::move(backbone);
  for (const auto& [name, t] : split(site_init, {"head"}).head) site.params.head.emplace(name, t);

  site.opt_backbone = AdamState::forParams(site.params.backbone);
  site.opt_head = AdamState::forParams(site.params.head);
  site.loss = classPosWeights(train);
  site.train = std::move(train);
  site.shuffle_rng.seed(deriveSeed(cfg.seed, "shuffle:" + site_id));
  return site;
}

namespace {

Tensor gatherRows(const Tensor& t, const std::vector<Index>& rows) {
  std::vector<Index> shape = t.shape();
  const Index row_size = t.size() / shape[0];
  shape[0] = Index(rows.size());
  Tensor out(shape);
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.data().segment(Index(i) * row_size, row_size) =
        t.data().segment(rows[i] * row_size, row_size);
  return out;
}

}  // namespace

double runEpoch(SiteState& site, const FederationConfig& cfg) {
  const Index n = site.train.rows();
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[std::size_t(i)] = i;
  std::shuffle(order.begin(), order.end(), site.shuffle_rng);

  double loss_sum = 0.0;
  int batches = 0;
  for (Index start = 0; start < n; start += cfg.batch_size) {
    const Index stop = std::min(n, start + cfg.batch_size);
    std::vector<Index> rows(order.begin() + start, order.begin() + stop);
    Tensor xb = gatherRows(site.train.features, rows);
    Tensor yb = gatherRows(site.train.labels, rows);
    auto lag = lossAndGrads(site.spec, site.fullParams(), xb, yb, site.loss);
    auto grads = split(lag.grads, {"head"});
    adamStep(site.opt_backbone, site.params.backbone, grads.backbone, cfg.backbone_lr);
    adamStep(site.opt_head, site.params.head, grads.head, cfg.head_lr);
    loss_sum += lag.loss;
    ++batches;
  }
  return batches > 0 ? loss_sum / batches : 0.0;
}

msg::LocalBackbone siteLocalRound(SiteState& site, const Parameters& global_backbone,
                                  std::uint32_t round, const FederationConfig& cfg,
                                  std::vector<double>* epoch_losses) {
  if (!sameShapes(global_backbone, site.params.backbone))
    throw std::invalid_argument("broadcast backbone does not match site backbone");
  site.params.backbone = global_backbone;
  for (int e = 0; e < cfg.local_epochs_per_round; ++e) {
    double loss = runEpoch(site, cfg);
    if (epoch_losses) epoch_losses->push_back(loss);
  }
  msg::LocalBackbone out;
  out.round = round;
  out.site_id = site.site_id;
  out.params = site.params.backbone;
  out.n_train = std::uint32_t(site.train.rows());
  return out;
}

void fineTune(SiteState& site, int epochs, const FederationConfig& cfg,
              std::vector<double>* epoch_losses) {
  if (epochs < 0) throw std::invalid_argument("fine-tune epochs must be non-negative");
  for (int e = 0; e < epochs; ++e) {
    double loss = runEpoch(site, cfg);
    if (epoch_losses) epoch_losses->push_back(loss);
  }
}

SiteRunResult runSiteProtocol(const ModelSpec& backbone_spec, const std::string& site_id,
                              MultilabelDataset train, const FederationConfig& cfg,
                              Channel& channel) {
  SiteState site = makeSiteState(backbone_spec, site_id, std::move(train), cfg);
  SiteRunResult result;
  result.site_id = site_id;
  channel.send(msg::Register{site_id, std::uint32_t(site.train.rows())});

  for (;;) {
    RoundMessage m = channel.recv();
    if (const auto* g = std::get_if<msg::GlobalBackbone>(&m)) {
      if (g->round < std::uint32_t(cfg.rounds)) {
        std::vector<double> losses;
        auto reply = siteLocalRound(site, g->params, g->round, cfg, &losses);
        double mean = 0;
        for (double l : losses) mean += l;
        result.round_losses.push_back(mean / double(losses.size()));
        channel.send(std::move(reply));
      } else {
        // final broadcast: adopt only
        site.params.backbone = g->params;
      }
    } else if (std::holds_alternative<msg::EnterFineTune>(m)) {
      fineTune(site, cfg.fine_tune_epochs, cfg, &result.fine_tune_losses);
    } else if (std::holds_alternative<msg::Shutdown>(m)) {
      break;
    } else {
      throw std::runtime_error("site received unexpected message");
    }
  }
  result.final_params = site.fullParams();
  return result;
}

Parameters runAggregatorProtocol(const ModelSpec& backbone_spec, const FederationConfig& cfg,
                                 std::vector<std::unique_ptr<Channel>>& channels) {
  cfg.validate();
  if (channels.empty()) throw std::invalid_argument("no sites connected");

  std::vector<std::string> ids(channels.size());
  std::vector<std::uint32_t> n_train(channels.size());
  std::set<std::string> uniq;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    RoundMessage m = channels[i]->recv();
    const auto* reg = std::get_if<msg::Register>(&m);
    if (!reg) throw std::runtime_error("expected Register message");
    if (!uniq.insert(reg->site_id).second)
      throw std::runtime_error("duplicate site_id '" + reg->site_id + "'");
    ids[i] = reg->site_id;
    n_train[i] = reg->n_train;
  }

  Parameters global = initialGlobalBackbone(backbone_spec, cfg);
  for (std::uint32_t round = 0; round < std::uint32_t(cfg.rounds); ++round) {
    for (auto& ch : channels) ch->send(msg::GlobalBackbone{round, global});
    std::vector<SiteUpdate> updates;
    for (std::size_t i = 0; i < channels.size(); ++i) {
      RoundMessage m = channels[i]->recv();
      const auto* lb = std::get_if<msg::LocalBackbone>(&m);
      if (!lb) throw std::runtime_error("expected LocalBackbone message");
      if (lb->round != round) throw std::runtime_error("round number mismatch");
      updates.push_back(SiteUpdate{lb->site_id, lb->params, Index(lb->n_train)});
    }
    global = aggregate(updates, cfg.aggregation);
  }
  for (auto& ch : channels) ch->send(msg::GlobalBackbone{std::uint32_t(cfg.rounds), global});
  for (auto& ch : channels) ch->send(msg::EnterFineTune{});
  for (auto& ch : channels) ch->send(msg::Shutdown{});
  return global;
}

namespace {

FederationResult runWithChannels(
    const ModelSpec& backbone_spec, const FederationConfig& cfg, std::vector<SiteData> sites,
    std::vector<std::unique_ptr<Channel>> agg_channels,
    std::vector<std::unique_ptr<Channel>> site_channels) {
  std::vector<SiteRunResult> results(sites.size());
  std::vector<std::exception_ptr> errors(sites.size());
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    threads.emplace_back([&, i]() {
      try {
        results[i] = runSiteProtocol(backbone_spec, sites[i].site_id, std::move(sites[i].train),
                                     cfg, *site_channels[i]);
      } catch (...) {
        errors[i] = std::current_exception();
        site_channels[i]->close();
      }
    });
  }

  FederationResult out;
  std::exception_ptr agg_error;
  try {
    out.global_backbone = runAggregatorProtocol(backbone_spec, cfg, agg_channels);
  } catch (...) {
    agg_error = std::current_exception();
    for (auto& ch : agg_channels) ch->close();
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  if (agg_error) std::rethrow_exception(agg_error);

  out.sites = std::move(results);
  std::sort(out.sites.begin(), out.sites.end(),
            [](const SiteRunResult& a, const SiteRunResult& b) { return a.site_id < b.site_id; });
  return out;
}

}  // namespace

FederationResult runFederated(const ModelSpec& backbone_spec, const FederationConfig& cfg,
                              std::vector<SiteData> sites) {
  if (sites.empty()) throw std::invalid_argument("need at least one site");
  std::vector<std::unique_ptr<Channel>> agg_channels;
  std::vector<std::unique_ptr<Channel>> site_channels;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    auto [a, b] = makeInprocChannelPair();
    agg_channels.push_back(std::move(a));
    site_channels.push_back(std::move(b));
  }
  return runWithChannels(backbone_spec, cfg, std::move(sites), std::move(agg_channels),
                         std::move(site_channels));
}

FederationResult runFederatedTcp(const ModelSpec& backbone_spec, const FederationConfig& cfg,
                                 std::vector<SiteData> sites) {
  if (sites.empty()) throw std::invalid_argument("need at least one site");
  TcpListener listener("127.0.0.1", 0);
  std::vector<std::unique_ptr<Channel>> site_channels;
  for (std::size_t i = 0; i < sites.size(); ++i)
    site_channels.push_back(connectTcp("127.0.0.1", listener.port()));
  std::vector<std::unique_ptr<Channel>> agg_channels;
  for (std::size_t i = 0; i < sites.size(); ++i) agg_channels.push_back(listener.accept());
  return runWithChannels(backbone_spec, cfg, std::move(sites), std::move(agg_channels),
                         std::move(site_channels));
}

SiteRunResult trainLocal(const ModelSpec& backbone_spec, const std::string& site_id,
                         MultilabelDataset train, const FederationConfig& cfg) {
  cfg.validate();
  SiteState site = makeSiteState(backbone_spec, site_id, std::move(train), cfg);
  SiteRunResult result;
  result.site_id = site_id;
  for (int r = 0; r < cfg.rounds; ++r) {
    double mean = 0;
    for (int e = 0; e < cfg.local_epochs_per_round; ++e) mean += runEpoch(site, cfg);
    result.round_losses.push_back(mean / cfg.local_epochs_per_round);
  }
  fineTune(site, cfg.fine_tune_epochs, cfg, &result.fine_tune_losses);
  result.final_params = site.fullParams();
  return result;
}

}  // namespace ffl
