#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <set>

#include "ffl/dataset.hpp"
#include "ffl/image.hpp"

using namespace ffl;

namespace {

LatentDiseaseConfig twoSiteConfig() {
  LatentDiseaseConfig cfg;
  cfg.num_latent = 4;
  cfg.prevalence = {0.3, 0.3, 0.3, 0.3};
  cfg.feature_dim = 8;
  cfg.noise_std = 0.5;
  cfg.sites = {
      SiteLabelSet{{{"a1", {0}, 0.0}, {"a2", {1}, 0.0}}},
      SiteLabelSet{{{"b1", {0, 2}, 0.0}, {"b2", {1}, 0.0}, {"b3", {3}, 0.0}}},
  };
  return cfg;
}

GrayImage randomImage(int h, int w, std::mt19937_64& rng) {
  GrayImage img(h, w);
  std::uniform_int_distribution<int> px(0, 255);
  for (auto& p : img.pixels) p = std::uint8_t(px(rng));
  return img;
}

}  // namespace

TEST_CASE("generator is deterministic and respects prevalence") {
  auto cfg = twoSiteConfig();
  auto a = generateSynthetic(cfg, {500, 500}, 7);
  auto b = generateSynthetic(cfg, {500, 500}, 7);
  CHECK(a[0].features == b[0].features);
  CHECK(a[1].labels == b[1].labels);
  auto c = generateSynthetic(cfg, {500, 500}, 8);
  CHECK(a[0].features != c[0].features);

  // prevalence 0.3, n=10000 -> empirical rate within +/-0.02
  auto big = generateSynthetic(cfg, {10000, 1}, 3);
  const double rate = big[0].labels.matrix().col(0).mean();
  CHECK(std::abs(rate - 0.3) < 0.02);
}

TEST_CASE("logical implication holds across sites on shared latent draws") {
  auto cfg = twoSiteConfig();
  auto sites = generateSynthetic(cfg, {2000, 2000}, 5);
  // site A label a1 = z0, site B label b1 = z0 OR z2: P(b1=1 | a1=1) = 1
  const auto& a = sites[0].labels;
  const auto& b = sites[1].labels;
  for (Index i = 0; i < 2000; ++i)
    if (a[i * 2 + 0] == 1.0) CHECK(b[i * 3 + 0] == 1.0);
}

TEST_CASE("identical formulas with zero flip noise agree exactly") {
  LatentDiseaseConfig cfg = twoSiteConfig();
  cfg.sites = {SiteLabelSet{{{"x", {0}, 0.0}}}, SiteLabelSet{{{"x", {0}, 0.0}}}};
  auto sites = generateSynthetic(cfg, {1000, 1000}, 11);
  CHECK(sites[0].labels == sites[1].labels);
}

TEST_CASE("patient ids unique across sites") {
  auto sites = generateSynthetic(twoSiteConfig(), {50, 60}, 1);
  std::set<std::string> ids;
  for (const auto& ds : sites)
    for (const auto& p : ds.patient_ids) CHECK(ids.insert(p).second);
}

TEST_CASE("generator rejects degenerate configs") {
  auto cfg = twoSiteConfig();
  cfg.prevalence[0] = 0.0;
  CHECK_THROWS_AS(generateSynthetic(cfg, {10, 10}, 0), std::invalid_argument);
  cfg = twoSiteConfig();
  cfg.sites.clear();
  CHECK_THROWS_AS(generateSynthetic(cfg, {}, 0), std::invalid_argument);
  cfg = twoSiteConfig();
  cfg.sites[0].rules[0].any_of = {9};
  CHECK_THROWS_AS(generateSynthetic(cfg, {10, 10}, 0), std::invalid_argument);
}

TEST_CASE("minmax normalization") {
  Eigen::MatrixXd m(1, 3);
  m << 10, 20, 30;
  auto img = minmaxNormalize(m);
  CHECK(img.pixels == std::vector<std::uint8_t>{0, 127, 255});

  SUBCASE("constant image maps to zeros") {
    Eigen::MatrixXd c = Eigen::MatrixXd::Constant(4, 4, 9.0);
    auto z = minmaxNormalize(c);
    for (auto p : z.pixels) CHECK(p == 0);
  }
  SUBCASE("extremes map to 0 and 255") {
    std::mt19937_64 rng(4);
    Eigen::MatrixXd r = Eigen::MatrixXd::Random(6, 6) * 1000.0;
    auto out = minmaxNormalize(r);
    Eigen::Index mini, minj, maxi, maxj;
    r.minCoeff(&mini, &minj);
    r.maxCoeff(&maxi, &maxj);
    CHECK(out.at(int(mini), int(minj)) == 0);
    CHECK(out.at(int(maxi), int(maxj)) == 255);
  }
}

TEST_CASE("histogram equalization") {
  SUBCASE("two mass points map to 0 and 255") {
    GrayImage img(2, 2);
    img.pixels = {10, 10, 200, 200};
    auto out = histEqualize(img);
    std::set<std::uint8_t> vals(out.pixels.begin(), out.pixels.end());
    CHECK(vals == std::set<std::uint8_t>{0, 255});
  }
  SUBCASE("constant image unchanged") {
    GrayImage img(3, 3);
    img.pixels.assign(9, 42);
    CHECK(histEqualize(img) == img);
  }
  SUBCASE("mapping is monotone non-decreasing") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
      auto img = randomImage(16, 16, rng);
      auto out = histEqualize(img);
      // build the observed lut and check monotonicity
      std::map<std::uint8_t, std::uint8_t> lut;
      for (std::size_t i = 0; i < img.pixels.size(); ++i) lut[img.pixels[i]] = out.pixels[i];
      int prev = -1;
      for (const auto& [in, mapped] : lut) {
        CHECK(int(mapped) >= prev);
        prev = mapped;
      }
    }
  }
}

TEST_CASE("resize basics") {
  std::mt19937_64 rng(3);
  auto img = randomImage(7, 9, rng);
  CHECK(resize(img, 7, 9) == img);

  GrayImage c(5, 5);
  c.pixels.assign(25, 77);
  auto big = resize(c, 11, 3);
  for (auto p : big.pixels) CHECK(p == 77);

  CHECK_THROWS_AS(resize(img, 0, 4), std::invalid_argument);
}

TEST_CASE("flip augmentation") {
  std::mt19937_64 rng(5);
  auto img = randomImage(6, 6, rng);
  CHECK(flipHorizontal(flipHorizontal(img)) == img);

  GrayImage sym(2, 3);
  sym.pixels = {1, 2, 1, 4, 5, 4};
  CHECK(flipHorizontal(sym) == sym);

  int flips = 0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i)
    if (augmentFlip(img, rng) != img) ++flips;
  const double freq = double(flips) / draws;
  CHECK(freq > 0.48);
  CHECK(freq < 0.52);
}

TEST_CASE("rotation augmentation") {
  std::mt19937_64 rng(6);
  auto img = randomImage(9, 9, rng);
  CHECK(rotateDegrees(img, 0.0) == img);
  auto rot = augmentRotate(img, rng);
  CHECK(rot.height == img.height);
  CHECK(rot.width == img.width);

  // a bright pixel moves along the expected arc (within a pixel)
  GrayImage dot(21, 21);
  dot.at(4, 10) = 255;  // 6 pixels above center
  const double theta = 10.0 * M_PI / 180.0;
  auto r = rotateDegrees(dot, 10.0);
  // forward map of (dr,dc)=(-6,0): (dr*cos+dc*sin, -dr*sin+dc*cos)
  const double er = 10.0 - 6.0 * std::cos(theta);
  const double ec = 10.0 + 6.0 * std::sin(theta);
  int br = 0, bc = 0, bv = -1;
  for (int rr = 0; rr < 21; ++rr)
    for (int cc = 0; cc < 21; ++cc)
      if (r.at(rr, cc) > bv) { bv = r.at(rr, cc); br = rr; bc = cc; }
  CHECK(std::abs(br - er) <= 1.0);
  CHECK(std::abs(bc - ec) <= 1.0);
}

TEST_CASE("binarization tables") {
  CHECK(binarizeChexpert(ChexpertLabel::Positive) == 1);
  CHECK(binarizeChexpert(ChexpertLabel::Negative) == 0);
  CHECK(binarizeChexpert(ChexpertLabel::Uncertain) == 0);
  CHECK(binarizeChexpert(ChexpertLabel::NotMentioned) == 0);

  for (bool cardio : {false, true}) {
    CHECK(binarizeUka(UkaSeverity::Negative, cardio) == 0);
    CHECK(binarizeUka(UkaSeverity::Uncertain, cardio) == 0);
    CHECK(binarizeUka(UkaSeverity::Mild, cardio) == 1);      // "borderline" for cardiomegaly
    CHECK(binarizeUka(UkaSeverity::Moderate, cardio) == 1);  // "enlarged"
    CHECK(binarizeUka(UkaSeverity::Severe, cardio) == 1);    // "massively enlarged"
  }
}

TEST_CASE("patient-wise split") {
  auto cfg = twoSiteConfig();
  auto ds = generateSynthetic(cfg, {100, 100}, 2)[0];
  auto [train, test] = splitTrainTest(ds, 0.25, 42);

  CHECK(train.rows() + test.rows() == ds.rows());
  CHECK(test.rows() == 25);  // 100 single-record patients

  std::set<std::string> train_patients(train.patient_ids.begin(), train.patient_ids.end());
  for (const auto& p : test.patient_ids) CHECK(train_patients.count(p) == 0);

  SUBCASE("multi-record patients stay together") {
    MultilabelDataset multi = ds;
    for (Index i = 0; i < multi.rows(); ++i)
      multi.patient_ids[std::size_t(i)] = "pat" + std::to_string(i / 4);
    auto [tr, te] = splitTrainTest(multi, 0.25, 3);
    std::set<std::string> tr_p(tr.patient_ids.begin(), tr.patient_ids.end());
    std::set<std::string> te_p(te.patient_ids.begin(), te.patient_ids.end());
    for (const auto& p : te_p) CHECK(tr_p.count(p) == 0);
  }
  SUBCASE("fewer than two patients is an error") {
    MultilabelDataset one = ds;
    for (auto& p : one.patient_ids) p = "same";
    CHECK_THROWS_AS(splitTrainTest(one, 0.25, 0), std::invalid_argument);
  }
  SUBCASE("invalid fraction rejected") {
    CHECK_THROWS_AS(splitTrainTest(ds, 0.0, 0), std::invalid_argument);
    CHECK_THROWS_AS(splitTrainTest(ds, 1.0, 0), std::invalid_argument);
  }
}

TEST_CASE("class positive weights") {
  MultilabelDataset ds;
  ds.features = Tensor({10, 2});
  ds.labels = Tensor({10, 3});
  ds.label_names = {"rare", "balanced", "never"};
  for (Index i = 0; i < 10; ++i) ds.patient_ids.push_back("p" + std::to_string(i));
  for (Index i = 0; i < 2; ++i) ds.labels[i * 3 + 0] = 1.0;   // 2 pos / 8 neg
  for (Index i = 0; i < 5; ++i) ds.labels[i * 3 + 1] = 1.0;   // balanced
  auto cfg = classPosWeights(ds);
  CHECK(cfg.pos_weights[0] == doctest::Approx(4.0));
  CHECK(cfg.pos_weights[1] == doctest::Approx(1.0));
  CHECK(cfg.pos_weights[2] == doctest::Approx(100.0));  // clamp
}

TEST_CASE("dataset save/load round trip") {
  auto ds = generateSynthetic(twoSiteConfig(), {30, 30}, 9)[1];
  const auto dir = std::filesystem::temp_directory_path() / "ffl_test_dataset";
  std::filesystem::remove_all(dir);
  saveDataset(ds, dir.string());
  auto back = loadDataset(dir.string());
  CHECK(back.features == ds.features);
  CHECK(back.labels == ds.labels);
  CHECK(back.label_names == ds.label_names);
  CHECK(back.patient_ids == ds.patient_ids);
  std::filesystem::remove_all(dir);
}

TEST_CASE("pgm round trip") {
  std::mt19937_64 rng(8);
  auto img = randomImage(12, 10, rng);
  const auto path = std::filesystem::temp_directory_path() / "ffl_test.pgm";
  writePgm(img, path.string());
  CHECK(readPgm(path.string()) == img);
  std::filesystem::remove(path);
}
