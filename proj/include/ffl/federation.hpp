#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "ffl/adam.hpp"
#include "ffl/dataset.hpp"
#include "ffl/model.hpp"
#include "ffl/partition.hpp"
#include "ffl/wire.hpp"

namespace ffl {

enum class Aggregation { UnweightedMean, SampleWeightedMean };

struct FederationConfig {
  int rounds = 1;
  int local_epochs_per_round = 1;
  Index batch_size = 16;
  double backbone_lr = 5e-5;
  double head_lr = 9e-5;
  int fine_tune_epochs = 0;
  std::uint64_t seed = 0;
  Aggregation aggregation = Aggregation::UnweightedMean;

  void validate() const;
};

/// Everything one simulated site owns: model, partitioned parameters,
/// two optimizers (backbone lr and head lr differ), its data and loss.
struct SiteState {
  std::string site_id;
  ModelSpec spec;
  PartitionedParams params;
  AdamState opt_backbone;
  AdamState opt_head;
  MultilabelDataset train;
  LossConfig loss;
  std::mt19937_64 shuffle_rng;

  Parameters fullParams() const { return merge(params); }
};

struct SiteUpdate {
  std::string site_id;
  Parameters backbone;
  Index n_train = 0;
};

/// Mean of the site backbones, summed in ascending site_id order so the
/// result does not depend on arrival order.
Parameters aggregate(const std::vector<SiteUpdate>& updates, Aggregation mode);

/// Head parameters come from a per-site seed; the shared initial backbone
/// is installed by the first broadcast.
SiteState makeSiteState(const ModelSpec& backbone_spec, const std::string& site_id,
                        MultilabelDataset train, const FederationConfig& cfg);

/// One pass over the shuffled training data; returns the mean batch loss.
double runEpoch(SiteState& site, const FederationConfig& cfg);

/// Adopt the broadcast backbone, run local_epochs_per_round epochs, emit
/// the updated backbone. The head never leaves the site.
msg::LocalBackbone siteLocalRound(SiteState& site, const Parameters& global_backbone,
                                  std::uint32_t round, const FederationConfig& cfg,
                                  std::vector<double>* epoch_losses = nullptr);

/// Purely local training of backbone and head; no messages.
void fineTune(SiteState& site, int epochs, const FederationConfig& cfg,
              std::vector<double>* epoch_losses = nullptr);

/// Blocking bidirectional message channel (in-process queue or TCP socket).
class Channel {
public:
  virtual ~Channel() = default;
  virtual void send(const RoundMessage& m) = 0;
  virtual RoundMessage recv() = 0;
  /// Unblocks any pending recv on either end with an error.
  virtual void close() = 0;
};

struct SiteRunResult {
  std::string site_id;
  Parameters final_params;          // full model (backbone + head)
  std::vector<double> round_losses; // mean loss per federated round
  std::vector<double> fine_tune_losses;
};

/// Site side of the protocol: register, then serve rounds until Shutdown.
SiteRunResult runSiteProtocol(const ModelSpec& backbone_spec, const std::string& site_id,
                              MultilabelDataset train, const FederationConfig& cfg,
                              Channel& channel);

/// Aggregator side: collects registrations, drives `rounds` broadcast /
/// collect / average cycles, then the fine-tune phase. Returns the final
/// global backbone.
Parameters runAggregatorProtocol(const ModelSpec& backbone_spec, const FederationConfig& cfg,
                                 std::vector<std::unique_ptr<Channel>>& channels);

struct FederationResult {
  Parameters global_backbone;
  std::vector<SiteRunResult> sites;  // sorted by site_id
};

struct SiteData {
  std::string site_id;
  MultilabelDataset train;
};

/// Full federated run over in-process channels (one thread per site).
FederationResult runFederated(const ModelSpec& backbone_spec, const FederationConfig& cfg,
                              std::vector<SiteData> sites);

/// Full federated run over real TCP sockets on localhost; produces results
/// bit-identical to runFederated for the same inputs.
FederationResult runFederatedTcp(const ModelSpec& backbone_spec, const FederationConfig& cfg,
                                 std::vector<SiteData> sites);

/// Local-only baseline: the same initialization and epoch schedule as a
/// federated site, with no aggregation anywhere.
SiteRunResult trainLocal(const ModelSpec& backbone_spec, const std::string& site_id,
                         MultilabelDataset train, const FederationConfig& cfg);

/// The shared initial backbone every run starts from.
Parameters initialGlobalBackbone(const ModelSpec& backbone_spec, const FederationConfig& cfg);

}  // namespace ffl
