#include "ffl/partition.hpp"

#include <set>
#include <stdexcept>

namespace ffl {
namespace {

// "dense1.weight" -> "dense1"
std::string layerOf(const std::string& param_name) {
  auto dot = param_name.rfind('.');
  return dot == std::string::npos ? param_name : param_name.substr(0, dot);
}

}  // namespace

PartitionedParams split(const Parameters& params, const std::set<std::string>& head_layer_names) {
  std::set<std::string> seen;
  PartitionedParams out;
  for (const auto& [name, tensor] : params) {
    const std::string layer = layerOf(name);
    if (head_layer_names.count(layer)) {
      out.head.emplace(name, tensor);
      seen.insert(layer);
    } else {
      out.backbone.emplace(name, tensor);
    }
  }
  for (const auto& h : head_layer_names)
    if (!seen.count(h)) throw std::invalid_argument("unknown head layer '" + h + "'");
  return out;
}

Parameters merge(const PartitionedParams& p) {
  Parameters out = p.backbone;
  for (const auto& [name, tensor] : p.head) {
    if (!out.emplace(name, tensor).second)
      throw std::invalid_argument("overlapping key '" + name + "' in partition");
  }
  return out;
}

ModelSpec buildSiteModel(const ModelSpec& backbone_spec, const HeadSpec& head) {
  if (head.label_names.empty()) throw std::invalid_argument("head needs at least one label");
  {
    std::set<std::string> uniq(head.label_names.begin(), head.label_names.end());
    if (uniq.size() != head.label_names.size())
      throw std::invalid_argument("duplicate label names in head");
    if (uniq.count("")) throw std::invalid_argument("empty label name");
  }
  backbone_spec.validate();
  if (backbone_spec.outputDim() != head.feature_dim)
    throw std::invalid_argument("backbone output dim does not match head feature_dim");

  ModelSpec site = backbone_spec;
  auto out_shape = backbone_spec.outputShape();
  if (out_shape.size() != 1) site.layers.push_back(FlattenLayer{});
  site.layers.push_back(DenseLayer{"head", head.feature_dim, Index(head.label_names.size())});
  site.validate();
  return site;
}

}  // namespace ffl
