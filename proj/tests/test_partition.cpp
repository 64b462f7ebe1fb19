#include "doctest.h"

#include <random>

#include "ffl/partition.hpp"
#include "oracles.hpp"

using namespace ffl;

namespace {

ModelSpec backbone3() {
  ModelSpec spec;
  spec.input_shape = {8};
  spec.layers = {DenseLayer{"fc1", 8, 8}, ReluLayer{}, DenseLayer{"fc2", 8, 4}, ReluLayer{}};
  return spec;
}

}  // namespace

TEST_CASE("split partitions by layer name") {
  auto site = buildSiteModel(backbone3(), HeadSpec{4, {"a", "b", "c"}});
  auto params = initParams(site, 3);
  auto part = split(params, {"head"});
  CHECK(part.head.size() == 2);      // head.weight + head.bias
  CHECK(part.backbone.size() == 4);  // fc1/fc2 weight + bias

  SUBCASE("empty head set puts everything in backbone") {
    auto all = split(params, {});
    CHECK(all.head.empty());
    CHECK(all.backbone.size() == params.size());
  }
  SUBCASE("all names as head empties the backbone") {
    auto none = split(params, {"fc1", "fc2", "head"});
    CHECK(none.backbone.empty());
    CHECK(none.head.size() == params.size());
  }
  SUBCASE("unknown head name is rejected") {
    CHECK_THROWS_AS(split(params, {"nonexistent"}), std::invalid_argument);
  }
}

TEST_CASE("merge(split(x)) round-trips bit-exactly on random params") {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 100; ++i) {
    auto site = buildSiteModel(backbone3(), HeadSpec{4, {"x", "y"}});
    auto params = initParams(site, std::uint64_t(i));
    for (auto& [name, t] : params) t = oracles::randomTensor(t.shape(), rng);
    auto part = split(params, {"head"});
    CHECK(merge(part) == params);
  }
}

TEST_CASE("merge with empty head returns backbone unchanged") {
  auto params = initParams(backbone3(), 0);
  PartitionedParams p{params, {}};
  CHECK(merge(p) == params);
}

TEST_CASE("merge rejects overlapping keys") {
  auto params = initParams(backbone3(), 0);
  PartitionedParams p{params, params};
  CHECK_THROWS_AS(merge(p), std::invalid_argument);
}

TEST_CASE("partition totality: every name lands on exactly one side") {
  auto site = buildSiteModel(backbone3(), HeadSpec{4, {"a"}});
  auto params = initParams(site, 1);
  auto part = split(params, {"head"});
  CHECK(part.backbone.size() + part.head.size() == params.size());
  for (const auto& [name, _] : params)
    CHECK((part.backbone.count(name) + part.head.count(name)) == 1);
}

TEST_CASE("build_site_model appends one dense head") {
  auto site = buildSiteModel(backbone3(), HeadSpec{4, {"a", "b", "c", "d", "e"}});
  const auto* last = std::get_if<DenseLayer>(&site.layers.back());
  REQUIRE(last != nullptr);
  CHECK(last->name == "head");
  CHECK(last->in == 4);
  CHECK(last->out == 5);
  CHECK(site.outputDim() == 5);

  SUBCASE("two sites differ only in the last layer") {
    auto other = buildSiteModel(backbone3(), HeadSpec{4, {"p", "q"}});
    REQUIRE(other.layers.size() == site.layers.size());
    for (std::size_t i = 0; i + 1 < site.layers.size(); ++i)
      CHECK(site.layers[i] == other.layers[i]);
    CHECK(std::get<DenseLayer>(other.layers.back()).out == 2);
  }
  SUBCASE("feature dim mismatch is rejected") {
    CHECK_THROWS_AS(buildSiteModel(backbone3(), HeadSpec{64, {"a"}}), std::invalid_argument);
  }
  SUBCASE("duplicate or empty labels rejected") {
    CHECK_THROWS_AS(buildSiteModel(backbone3(), HeadSpec{4, {"a", "a"}}), std::invalid_argument);
    CHECK_THROWS_AS(buildSiteModel(backbone3(), HeadSpec{4, {}}), std::invalid_argument);
  }
}

TEST_CASE("build_site_model flattens conv backbones before the head") {
  ModelSpec conv;
  conv.input_shape = {1, 8, 8};
  conv.layers = {Conv2DLayer{"c1", 1, 2, 3, 1}, ReluLayer{}, MaxPool2DLayer{2}};
  const Index feat = conv.outputDim();
  auto site = buildSiteModel(conv, HeadSpec{feat, {"a", "b"}});
  CHECK(site.outputDim() == 2);
  auto params = initParams(site, 0);
  Tensor x = Tensor::zeros({1, 1, 8, 8});
  CHECK(forward(site, params, x).shape() == std::vector<Index>{1, 2});
}
