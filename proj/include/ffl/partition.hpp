#pragma once

#include <set>
#include <string>
#include <vector>

#include "ffl/model.hpp"

namespace ffl {

/// Parameter map split into the aggregated backbone subset and the
/// site-local head subset. Key sets are disjoint by construction.
struct PartitionedParams {
  Parameters backbone;
  Parameters head;
};

struct HeadSpec {
  Index feature_dim = 0;
  std::vector<std::string> label_names;
};

/// Parameter names belonging to the given head layers go to `head`,
/// everything else to `backbone`.
PartitionedParams split(const Parameters& params, const std::set<std::string>& head_layer_names);

/// Inverse of split; throws on overlapping keys.
Parameters merge(const PartitionedParams& p);

/// Backbone spec plus one Dense layer named "head" mapping features to
/// the site's labels. Sigmoid is applied by callers, not by the model.
ModelSpec buildSiteModel(const ModelSpec& backbone_spec, const HeadSpec& head);

}  // namespace ffl
