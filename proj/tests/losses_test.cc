#include <cmath>
#include <random>

#include "doctest.h"
#include "eda/error.h"
#include "eda/losses.h"
#include "eda/numcore/gradcheck.h"
#include "support.h"

namespace ls = eda::losses;
namespace al = eda::align;
namespace nc = eda::numcore;
using eda::decouple::ComponentKind;
using eda::testing::Instance;
using nc::Matrix;
using nc::Tape;

namespace {

ls::PositiveSets positives_of(const Instance& in) {
  std::map<int, al::RowRole> roles{{in.main_cand, al::RowRole::kMain}};
  if (in.aux_cand >= 0) roles[in.aux_cand] = al::RowRole::kAuxiliary;
  const auto labels = al::label_set(eda::testing::components_of(in), in.l);
  return ls::make_positive_sets(labels, in.k, roles, in.n);
}

Matrix ptext_of(const Instance& in) {
  const auto g = eda::testing::naive_ptext(in);
  return Matrix::from_rows(g);
}

ls::PositiveSets simple(std::vector<std::vector<ls::Positive>> cand, std::size_t l,
                        std::vector<std::uint8_t> aux = {}) {
  if (aux.empty()) aux.assign(l, 0);
  return ls::positive_sets_from_candidates(std::move(cand), l, std::vector<std::uint8_t>(l, 1),
                                           std::move(aux));
}

double object_loss(const Matrix& o, const Matrix& t, const ls::PositiveSets& p,
                   const ls::LossConfig& cfg = {}) {
  Tape tape;
  return ls::semantic_object_loss(tape.constant(o), tape.constant(t), p, cfg).item();
}

double text_loss(const Matrix& o, const Matrix& t, const ls::PositiveSets& p,
                 const ls::LossConfig& cfg = {}) {
  Tape tape;
  return ls::semantic_text_loss(tape.constant(t), tape.constant(o), p, cfg).item();
}

}  // namespace

TEST_CASE("position loss vanishes when logits are log P") {
  const Matrix p = Matrix::from_rows({{0.2, 0.3, 0.5}, {0.7, 0.2, 0.1}});
  Matrix logits = p;
  for (double& v : logits.data()) v = std::log(v) + 3.0;
  Tape tape;
  CHECK(std::abs(ls::position_loss(tape.constant(logits), p).item()) < 1e-12);
}

TEST_CASE("position loss of a one-hot against uniform logits is ln 2") {
  Tape tape;
  const double v = ls::position_loss(tape.constant(Matrix(1, 2, 0.0)), Matrix::from_rows({{1, 0}})).item();
  CHECK(std::abs(v - std::log(2.0)) < 1e-12);
}

TEST_CASE("position loss shape mismatch") {
  Tape tape;
  CHECK_THROWS_AS(ls::position_loss(tape.constant(Matrix(1, 3)), Matrix(1, 2, 0.5)), eda::ShapeError);
}

TEST_CASE("object loss with zero similarities is ln 4") {
  const Matrix o(1, 3, 0.0), t(4, 3, 0.5);
  const auto p = simple({{{0, ComponentKind::kMainObject}}}, 4);
  CHECK(std::abs(object_loss(o, t, p) - std::log(4.0)) < 1e-12);
  const auto with_aux = simple({{{0, ComponentKind::kMainObject}}}, 4, {0, 0, 1, 0});
  CHECK(std::abs(object_loss(o, t, with_aux) - std::log(4.0)) < 1e-12);
}

TEST_CASE("negative weight scales the logit of auxiliary text") {
  Matrix o(1, 1, 1.0), t = Matrix::from_rows({{0.0}, {0.07}});
  ls::LossConfig cfg;
  cfg.tau = 0.07;
  const auto p = simple({{{0, ComponentKind::kMainObject}}}, 2, {0, 1});
  // -log(1 / (1 + e^2))
  CHECK(std::abs(object_loss(o, t, p, cfg) - std::log(1 + std::exp(2.0))) < 1e-12);
}

TEST_CASE("object loss needs a positive for every candidate") {
  const auto p = simple({{{0, ComponentKind::kMainObject}}, {}}, 2);
  CHECK_THROWS_AS(object_loss(Matrix(2, 2, 0.1), Matrix(2, 2, 0.1), p), eda::ConfigError);
}

TEST_CASE("text loss analytic cases") {
  const auto one = simple({{{0, ComponentKind::kMainObject}}, {}}, 1);
  CHECK(std::abs(text_loss(Matrix(2, 3, 0.0), Matrix(1, 3, 1.0), one) - std::log(2.0)) < 1e-12);
  const auto rel = simple({{{0, ComponentKind::kRelationship}}, {}, {}, {}}, 1);
  CHECK(std::abs(text_loss(Matrix(4, 3, 0.0), Matrix(1, 3, 1.0), rel) - 0.1 * std::log(4.0)) < 1e-12);
}

TEST_CASE("semantic loss is the mean of both directions") {
  const auto p = simple({{{0, ComponentKind::kMainObject}}, {{1, ComponentKind::kNone}}}, 2);
  Tape tape;
  const auto o = tape.constant(Matrix(2, 2, 0.0)), t = tape.constant(Matrix(2, 2, 0.0));
  // two candidates and two tokens, each contributing ln 2 in both directions
  CHECK(std::abs(ls::semantic_loss(o, t, p, {}).item() - 2 * std::log(2.0)) < 1e-12);
}

TEST_CASE("random instances match the scalar-loop reference") {
  std::mt19937_64 rng(21);
  const ls::LossConfig cfg;
  for (int trial = 0; trial < 30; ++trial) {
    const Instance in = eda::testing::random_instance(rng);
    const auto p = positives_of(in);
    Tape tape;
    const double pos = ls::position_loss(tape.constant(in.l_pred), ptext_of(in)).item();
    CHECK(std::abs(pos - eda::testing::naive_position_loss(eda::testing::to_grid(in.l_pred),
                                                           eda::testing::naive_ptext(in))) < 1e-10);
    CHECK(std::abs(object_loss(in.o, in.t, p, cfg) - eda::testing::naive_object_loss(in, cfg.tau)) < 1e-10);
    CHECK(std::abs(text_loss(in.o, in.t, p, cfg) - eda::testing::naive_text_loss(in, cfg.tau)) < 1e-10);
  }
}

TEST_CASE("losses are non-negative with unit weights") {
  std::mt19937_64 rng(22);
  ls::LossConfig cfg;
  for (auto& [k, w] : cfg.w_plus) w = 1.0;
  cfg.w_minus_auxi = 1.0;
  for (int trial = 0; trial < 30; ++trial) {
    const Instance in = eda::testing::random_instance(rng);
    const auto p = positives_of(in);
    Tape tape;
    CHECK(ls::position_loss(tape.constant(in.l_pred), ptext_of(in)).item() >= 0);
    CHECK(object_loss(in.o, in.t, p, cfg) >= 0);
    CHECK(text_loss(in.o, in.t, p, cfg) >= 0);
  }
}

TEST_CASE("raising the main similarity lowers the object loss") {
  std::mt19937_64 rng(23);
  const Matrix o = eda::testing::random_unit_rows(rng, 1, 8);
  Matrix t = eda::testing::random_unit_rows(rng, 5, 8);
  const auto p = simple({{{2, ComponentKind::kMainObject}}}, 5, {0, 0, 0, 1, 0});
  double previous = object_loss(o, t, p);
  for (int step = 0; step < 10; ++step) {
    // moving t_main along o changes only the (main, main) similarity
    for (std::size_t c = 0; c < 8; ++c) t(2, c) += 0.1 * o(0, c);
    const double now = object_loss(o, t, p);
    CHECK(now < previous);
    previous = now;
  }
}

TEST_CASE("gradients of every loss pass finite differences") {
  std::mt19937_64 rng(24);
  const ls::LossConfig cfg;
  for (int trial = 0; trial < 5; ++trial) {
    const Instance in = eda::testing::random_instance(rng, 4, 6, 8);
    const auto p = positives_of(in);
    const Matrix pt = ptext_of(in);
    CHECK(nc::fd_check([&](Tape&, const nc::Var& x) { return ls::position_loss(x, pt); }, in.l_pred)
              .max_rel_error < 1e-4);
    CHECK(nc::fd_check([&](Tape& tp, const nc::Var& x) {
            return ls::semantic_object_loss(x, tp.constant(in.t), p, cfg);
          }, in.o).max_rel_error < 1e-4);
    CHECK(nc::fd_check([&](Tape& tp, const nc::Var& x) {
            return ls::semantic_text_loss(x, tp.constant(in.o), p, cfg);
          }, in.t).max_rel_error < 1e-4);
  }
}

TEST_CASE("box losses") {
  const Matrix cube = Matrix::from_rows({{0, 0, 0, 1, 1, 1}});
  Tape tape;
  CHECK(ls::box_l1_loss(tape.constant(cube), cube).item() == 0.0);
  CHECK(ls::iou3d_loss(tape.constant(cube), cube).item() == 0.0);
  const Matrix far = Matrix::from_rows({{5, 0, 0, 1, 1, 1}});
  CHECK(ls::iou3d_loss(tape.constant(far), cube).item() == 1.0);
  CHECK(ls::box_l1_loss(tape.constant(far), cube).item() == 5.0);
  const Matrix shifted = Matrix::from_rows({{0.5, 0, 0, 1, 1, 1}});
  CHECK(std::abs(ls::iou3d_loss(tape.constant(shifted), cube).item() - 2.0 / 3.0) < 1e-12);
  CHECK_THROWS_AS(ls::box_l1_loss(tape.constant(Matrix(1, 5)), Matrix(1, 5)), eda::ShapeError);
}

TEST_CASE("box loss gradients") {
  const Matrix gt = Matrix::from_rows({{0, 0, 0, 1, 1.2, 0.8}, {2, 1, 0, 0.5, 0.5, 2}});
  const Matrix pred = Matrix::from_rows({{0.3, -0.2, 0.15, 1.1, 0.9, 1.0}, {2.2, 1.1, 0.3, 0.7, 0.6, 1.7}});
  CHECK(nc::fd_check([&](Tape&, const nc::Var& x) { return ls::iou3d_loss(x, gt); }, pred).max_rel_error < 1e-5);
  CHECK(nc::fd_check([&](Tape&, const nc::Var& x) { return ls::box_l1_loss(x, gt); }, pred).max_rel_error < 1e-5);
}

TEST_CASE("total loss arithmetic") {
  ls::LossConfig cfg;
  CHECK(ls::total_loss_value(0, 0, 0, 0, cfg) == 0.0);
  cfg.alpha = 1.0;
  cfg.decoder_layers = 0;
  CHECK(ls::total_loss_value(1, 0, 0, 0, cfg) == 1.0);
  cfg.alpha = 0.5;
  cfg.decoder_layers = 6;
  CHECK(ls::total_loss_value(1, 1, 1, 1, cfg) == 1.0);
}

TEST_CASE("config validation") {
  ls::LossConfig cfg;
  cfg.tau = 0;
  CHECK_THROWS_AS(cfg.validate(), eda::ConfigError);
  cfg = {};
  cfg.w_plus[ComponentKind::kAttribute] = -1;
  CHECK_THROWS_AS(cfg.validate(), eda::ConfigError);
}
