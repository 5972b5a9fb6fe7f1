#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "eda/error.h"
#include "eda/inference.h"
#include "support.h"

namespace inf = eda::inference;
namespace al = eda::align;
using eda::decouple::ComponentKind;
using eda::numcore::Matrix;

namespace {

al::PositionLabel label(std::size_t l, std::vector<int> idx, ComponentKind kind) {
  al::PositionLabel out{std::vector<std::uint8_t>(l, 0), kind, "x"};
  for (int i : idx) out.bits[i] = 1;
  return out;
}

inf::ComponentScore given(std::vector<double> v, ComponentKind kind) {
  return {std::move(v), kind, false};
}

// softmax over candidates of o_i . mean(t_j for j in idx) / tau, with loops
std::vector<double> naive_score(const Matrix& o, const Matrix& t, const std::vector<int>& idx, double tau) {
  std::vector<double> logits(o.rows());
  for (std::size_t i = 0; i < o.rows(); ++i) {
    double s = 0;
    for (int j : idx)
      for (std::size_t c = 0; c < o.cols(); ++c) s += o(i, c) * t(j, c);
    logits[i] = s / idx.size() / tau;
  }
  double z = 0;
  for (double v : logits) z += std::exp(v);
  for (double& v : logits) v = std::exp(v) / z;
  return logits;
}

}  // namespace

TEST_CASE("score of a feature equal to one candidate") {
  const Matrix o = Matrix::from_rows({{1, 0}, {0, 1}});
  const Matrix t = Matrix::from_rows({{1, 0}, {0, 0}});
  const auto s = inf::component_score(o, t, label(2, {0}, ComponentKind::kMainObject), 1.0);
  CHECK(s.values[0] == doctest::Approx(0.7310585786).epsilon(1e-9));
  CHECK(s.values[1] == doctest::Approx(0.2689414214).epsilon(1e-9));
}

TEST_CASE("absent component scores zero") {
  const auto s = inf::component_score(Matrix(3, 2, 1.0), Matrix(4, 2, 1.0),
                                      label(4, {}, ComponentKind::kPronoun), 0.07);
  CHECK(s.absent);
  CHECK(s.values == std::vector<double>(3, 0.0));
}

TEST_CASE("component scores match the loop reference") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 1 + trial % 7, l = 3 + trial % 5;
    const Matrix o = eda::testing::random_unit_rows(rng, k, 16);
    const Matrix t = eda::testing::random_unit_rows(rng, l, 16);
    const std::vector<int> idx = {0, l - 2};
    const auto s = inf::component_score(o, t, label(l, idx, ComponentKind::kAttribute), 0.07);
    const auto ref = naive_score(o, t, idx, 0.07);
    double total = 0;
    for (int i = 0; i < k; ++i) {
      CHECK(std::abs(s.values[i] - ref[i]) < 1e-12);
      total += s.values[i];
    }
    CHECK(std::abs(total - 1.0) < 1e-9);
  }
}

TEST_CASE("combined score hand example") {
  const std::map<ComponentKind, inf::ComponentScore> scores = {
      {ComponentKind::kMainObject, given({.9, .1}, ComponentKind::kMainObject)},
      {ComponentKind::kAttribute, given({.8, .2}, ComponentKind::kAttribute)},
      {ComponentKind::kPronoun, given({.5, .5}, ComponentKind::kPronoun)},
      {ComponentKind::kRelationship, given({.6, .4}, ComponentKind::kRelationship)},
      {ComponentKind::kAuxiliaryObject, given({.2, .8}, ComponentKind::kAuxiliaryObject)}};
  const auto s = inf::combined_score(scores);
  CHECK(s[0] == doctest::Approx(2.6).epsilon(1e-15));
  CHECK(s[1] == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(inf::select_target(s) == 0);
}

TEST_CASE("main only reduces to the main score") {
  const auto s = inf::combined_score({{ComponentKind::kMainObject, given({.3, .7}, ComponentKind::kMainObject)},
                                      {ComponentKind::kPronoun, {{0, 0}, ComponentKind::kPronoun, true}}});
  CHECK(s == std::vector<double>{.3, .7});
}

TEST_CASE("uniform components give uniform totals and tie to index 0") {
  std::map<ComponentKind, inf::ComponentScore> scores;
  for (auto kind : {ComponentKind::kMainObject, ComponentKind::kAttribute, ComponentKind::kAuxiliaryObject})
    scores[kind] = given({0.25, 0.25, 0.25, 0.25}, kind);
  const auto s = inf::combined_score(scores);
  CHECK(s[0] == s[3]);
  CHECK(inf::select_target(s) == 0);
  CHECK_THROWS_AS(inf::select_target({}), eda::InvalidInput);
}

TEST_CASE("select_target follows permutations") {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v(6);
    for (double& x : v) x = u(rng);
    std::vector<int> perm = {0, 1, 2, 3, 4, 5};
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> moved(6);
    for (int i = 0; i < 6; ++i) moved[perm[i]] = v[i];
    CHECK(inf::select_target(moved) == perm[inf::select_target(v)]);
  }
}

TEST_CASE("shifting every similarity leaves the choice unchanged") {
  std::mt19937_64 rng(33);
  const Matrix o = eda::testing::random_unit_rows(rng, 5, 8);
  Matrix t = eda::testing::random_unit_rows(rng, 4, 8);
  al::LabelSet labels{label(4, {0}, ComponentKind::kMainObject), label(4, {2}, ComponentKind::kAuxiliaryObject),
                      label(4, {1}, ComponentKind::kAttribute), label(4, {}, ComponentKind::kPronoun),
                      label(4, {}, ComponentKind::kRelationship)};
  const std::vector<ComponentKind> all = {ComponentKind::kMainObject, ComponentKind::kAttribute,
                                          ComponentKind::kPronoun, ComponentKind::kRelationship,
                                          ComponentKind::kAuxiliaryObject};
  const auto before = inf::infer(o, t, labels, 0.07, all);
  // appending a constant coordinate to every candidate and every token adds
  // the same amount to all similarities
  Matrix o2(5, 9, 1.0), t2(4, 9, 0.5);
  for (int i = 0; i < 5; ++i)
    for (int c = 0; c < 8; ++c) o2(i, c) = o(i, c);
  for (int j = 0; j < 4; ++j)
    for (int c = 0; c < 8; ++c) t2(j, c) = t(j, c);
  const auto after = inf::infer(o2, t2, labels, 0.07, all);
  CHECK(after.selected == before.selected);
  for (int i = 0; i < 5; ++i) CHECK(std::abs(after.s_all[i] - before.s_all[i]) < 1e-12);
}

TEST_CASE("raising one candidate's main similarity never lowers its total") {
  const Matrix t = Matrix::from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 0}});
  Matrix o = Matrix::from_rows({{0.2, 0.1, 0}, {0.4, 0.3, 0}, {0.1, 0.5, 0}});
  al::LabelSet labels{label(3, {0}, ComponentKind::kMainObject), label(3, {}, ComponentKind::kAuxiliaryObject),
                      label(3, {1}, ComponentKind::kAttribute), label(3, {}, ComponentKind::kPronoun),
                      label(3, {}, ComponentKind::kRelationship)};
  double previous = -1;
  for (int step = 0; step < 10; ++step) {
    o(2, 0) += 0.05;
    const auto r = inf::infer(o, t, labels, 0.07, {ComponentKind::kMainObject, ComponentKind::kAttribute});
    CHECK(r.s_all[2] >= previous);
    previous = r.s_all[2];
  }
}

TEST_CASE("auxiliary selection") {
  const Matrix o = Matrix::from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  const Matrix t = Matrix::from_rows({{0, 0, 1}, {0, 1, 0}, {0, 0, 0}});
  al::LabelSet labels{label(3, {0}, ComponentKind::kMainObject), label(3, {1}, ComponentKind::kAuxiliaryObject),
                      label(3, {0}, ComponentKind::kAttribute), label(3, {}, ComponentKind::kPronoun),
                      label(3, {}, ComponentKind::kRelationship)};
  CHECK(inf::select_auxiliary(o, t, labels, 0.07) == 1);
  CHECK(inf::select_auxiliary(o, t, labels, 0.07, inf::AuxiliaryMode::kAttribute) == 2);
  labels.auxiliary = label(3, {}, ComponentKind::kAuxiliaryObject);
  CHECK_THROWS_AS(inf::select_auxiliary(o, t, labels, 0.07), eda::InvalidInput);
}
