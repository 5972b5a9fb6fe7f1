#include "eda/losses.h"

#include <algorithm>
#include <cmath>

#include "eda/error.h"

namespace eda::losses {

using numcore::Tape;

double LossConfig::positive_weight(ComponentKind kind) const {
  const auto it = w_plus.find(kind);
  return it == w_plus.end() ? 1.0 : it->second;
}

void LossConfig::validate() const {
  if (!(tau > 0) || !std::isfinite(tau)) throw ConfigError("tau must be positive");
  for (const auto& [kind, w] : w_plus) {
    if (!(w >= 0)) throw ConfigError("w_plus weights must be non-negative");
  }
  if (!(w_minus_auxi >= 0) || !(w_minus_default >= 0)) {
    throw ConfigError("w_minus weights must be non-negative");
  }
  if (!(alpha >= 0) || !(box_weight >= 0)) throw ConfigError("alpha and box_weight must be non-negative");
  if (decoder_layers < 0) throw ConfigError("decoder_layers must be non-negative");
}

PositiveSets positive_sets_from_candidates(std::vector<std::vector<Positive>> candidate,
                                           std::size_t l, std::vector<std::uint8_t> valid,
                                           std::vector<std::uint8_t> auxiliary) {
  if (valid.size() != l || auxiliary.size() != l) throw ShapeError("mask length differs from l");
  PositiveSets p;
  p.candidate = std::move(candidate);
  p.token.assign(l, {});
  p.token_kind.assign(l, ComponentKind::kNone);
  p.valid = std::move(valid);
  p.auxiliary = std::move(auxiliary);
  for (std::size_t i = 0; i < p.candidate.size(); ++i) {
    for (const Positive& q : p.candidate[i]) {
      if (q.position < 0 || static_cast<std::size_t>(q.position) >= l) {
        throw ShapeError("positive position out of range");
      }
      if (!p.valid[q.position]) throw ConfigError("positive position is padding");
      p.token[q.position].push_back(static_cast<int>(i));
      p.token_kind[q.position] = q.kind;
    }
  }
  return p;
}

PositiveSets make_positive_sets(const align::LabelSet& labels, std::size_t k,
                                const std::map<int, align::RowRole>& roles,
                                std::size_t token_count) {
  const std::size_t l = labels.main.capacity();
  if (token_count + 1 > l) throw CapacityError("token count exceeds capacity");
  std::vector<std::vector<Positive>> cand(k);
  std::vector<std::uint8_t> valid(l, 0), auxiliary(l, 0);
  for (std::size_t j = 0; j < token_count; ++j) valid[j] = 1;
  valid[l - 1] = 1;
  for (int j : labels.auxiliary.indices()) auxiliary[j] = 1;
  const ComponentKind main_kinds[] = {ComponentKind::kMainObject, ComponentKind::kAttribute,
                                      ComponentKind::kPronoun, ComponentKind::kRelationship};
  for (std::size_t i = 0; i < k; ++i) {
    const auto it = roles.find(static_cast<int>(i));
    const align::RowRole role = it == roles.end() ? align::RowRole::kOther : it->second;
    if (role == align::RowRole::kMain) {
      for (ComponentKind kind : main_kinds) {
        for (int j : labels.get(kind).indices()) cand[i].push_back({j, kind});
      }
      std::sort(cand[i].begin(), cand[i].end(),
                [](const Positive& a, const Positive& b) { return a.position < b.position; });
    } else if (role == align::RowRole::kAuxiliary) {
      for (int j : labels.auxiliary.indices()) cand[i].push_back({j, ComponentKind::kAuxiliaryObject});
    } else {
      cand[i].push_back({static_cast<int>(l - 1), ComponentKind::kNone});
    }
  }
  return positive_sets_from_candidates(std::move(cand), l, std::move(valid), std::move(auxiliary));
}

Var position_loss(const Var& l_pred, const Matrix& p_text) {
  if (!l_pred.value().same_shape(p_text)) throw ShapeError("L_pred and P_text shapes differ");
  double entropy_term = 0;
  for (double p : p_text.data()) {
    if (p < 0) throw InvalidInput("P_text has a negative entry");
    if (p > 0) entropy_term += p * std::log(p);
  }
  const Var cross = weighted_sum(numcore::log_softmax_rows(l_pred), p_text);
  return numcore::add_scalar(numcore::scale(cross, -1.0), entropy_term);
}

namespace {

std::vector<int> valid_positions(const PositiveSets& pos) {
  std::vector<int> cols;
  for (std::size_t j = 0; j < pos.l(); ++j) {
    if (pos.valid[j]) cols.push_back(static_cast<int>(j));
  }
  return cols;
}

void check_shapes(const Var& o, const Var& t, const PositiveSets& pos) {
  if (o.rows() != pos.k() || t.rows() != pos.l() || o.cols() != t.cols()) {
    throw ShapeError("feature shapes do not match the positive sets");
  }
}

}  // namespace

Var semantic_object_loss(const Var& o, const Var& t, const PositiveSets& pos,
                         const LossConfig& cfg) {
  cfg.validate();
  check_shapes(o, t, pos);
  const std::vector<int> cols = valid_positions(pos);
  std::vector<int> col_of(pos.l(), -1);
  for (std::size_t c = 0; c < cols.size(); ++c) col_of[cols[c]] = static_cast<int>(c);

  const std::size_t k = pos.k(), m = cols.size();
  const Var sim = numcore::scale(numcore::matmul_nt(o, numcore::gather_rows(t, cols)), 1.0 / cfg.tau);
  Matrix w_minus(k, m, cfg.w_minus_default);
  Matrix coeff(k, m, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    if (pos.candidate[i].empty()) {
      throw ConfigError("candidate " + std::to_string(i) + " has no positive position");
    }
    std::vector<std::uint8_t> own(pos.l(), 0);
    for (const Positive& q : pos.candidate[i]) own[q.position] = 1;
    for (std::size_t c = 0; c < m; ++c) {
      if (pos.auxiliary[cols[c]] && !own[cols[c]]) w_minus(i, c) = cfg.w_minus_auxi;
    }
    const double inv = 1.0 / static_cast<double>(pos.candidate[i].size());
    for (const Positive& q : pos.candidate[i]) {
      coeff(i, col_of[q.position]) += cfg.positive_weight(q.kind) * inv;
    }
  }
  const Var lse = numcore::logsumexp_rows(numcore::mul_const(sim, w_minus));
  return numcore::sub(numcore::sum(lse), numcore::weighted_sum(sim, coeff));
}

Var semantic_text_loss(const Var& t, const Var& o, const PositiveSets& pos,
                       const LossConfig& cfg) {
  cfg.validate();
  check_shapes(o, t, pos);
  const std::vector<int> cols = valid_positions(pos);
  const std::size_t k = pos.k(), m = cols.size();
  const Var sim = numcore::scale(numcore::matmul_nt(numcore::gather_rows(t, cols), o), 1.0 / cfg.tau);
  Matrix row_weight(m, 1, 0.0);
  Matrix coeff(m, k, 0.0);
  for (std::size_t c = 0; c < m; ++c) {
    const auto& cands = pos.token[cols[c]];
    if (cands.empty()) continue;
    const double w = cfg.positive_weight(pos.token_kind[cols[c]]);
    row_weight(c, 0) = w;
    for (int i : cands) coeff(c, i) += w / static_cast<double>(cands.size());
  }
  const Var lse = numcore::logsumexp_rows(sim);
  return numcore::sub(numcore::weighted_sum(lse, row_weight), numcore::weighted_sum(sim, coeff));
}

Var semantic_loss(const Var& o, const Var& t, const PositiveSets& pos, const LossConfig& cfg) {
  return numcore::scale(
      numcore::add(semantic_object_loss(o, t, pos, cfg), semantic_text_loss(t, o, pos, cfg)), 0.5);
}

namespace {

void check_boxes(const Var& pred, const Matrix& gt) {
  if (pred.cols() != 6 || !pred.value().same_shape(gt) || pred.rows() == 0) {
    throw ShapeError("boxes must be non-empty k x 6 with matching shapes");
  }
}

}  // namespace

Var box_l1_loss(const Var& pred, const Matrix& gt) {
  check_boxes(pred, gt);
  Tape& tape = *pred.tape();
  const Var diff = numcore::abs(numcore::sub(pred, tape.constant(gt)));
  return numcore::scale(numcore::sum(diff), 1.0 / static_cast<double>(pred.rows()));
}

Var iou3d_loss(const Var& pred, const Matrix& gt) {
  check_boxes(pred, gt);
  for (std::size_t r = 0; r < gt.rows(); ++r) {
    for (int c = 3; c < 6; ++c) {
      if (!(gt(r, c) > 0)) throw InvalidInput("ground-truth box extents must be positive");
    }
  }
  Tape& tape = *pred.tape();
  const Var g = tape.constant(gt);
  const Var pc = numcore::slice_cols(pred, 0, 3), ps = numcore::slice_cols(pred, 3, 3);
  const Var gc = numcore::slice_cols(g, 0, 3), gs = numcore::slice_cols(g, 3, 3);
  const Var p_lo = numcore::sub(pc, numcore::scale(ps, 0.5));
  const Var p_hi = numcore::add(pc, numcore::scale(ps, 0.5));
  const Var g_lo = numcore::sub(gc, numcore::scale(gs, 0.5));
  const Var g_hi = numcore::add(gc, numcore::scale(gs, 0.5));
  const Var overlap = numcore::relu(
      numcore::sub(numcore::minimum(p_hi, g_hi), numcore::maximum(p_lo, g_lo)));
  const Var inter = numcore::prod_cols(overlap);
  const Var vol_p = numcore::prod_cols(numcore::abs(ps));
  const Var vol_g = numcore::prod_cols(gs);
  const Var uni = numcore::sub(numcore::add(vol_p, vol_g), inter);
  const Var iou = numcore::divide(inter, uni);
  const double k = static_cast<double>(pred.rows());
  return numcore::add_scalar(numcore::scale(numcore::sum(iou), -1.0 / k), 1.0);
}

Var total_loss(Tape& tape, const LossParts& parts, const LossConfig& cfg) {
  cfg.validate();
  const auto part = [&](const Var& v) { return v.valid() ? v : tape.constant(Matrix::scalar(0.0)); };
  Var acc = numcore::scale(numcore::add(part(parts.pos), part(parts.sem)), cfg.alpha);
  acc = numcore::add(acc, numcore::scale(part(parts.box), cfg.box_weight));
  acc = numcore::add(acc, part(parts.iou));
  return numcore::scale(acc, 1.0 / static_cast<double>(cfg.decoder_layers + 1));
}

double total_loss_value(double pos, double sem, double box, double iou, const LossConfig& cfg) {
  Tape tape;
  return total_loss(tape,
                    {tape.constant(Matrix::scalar(pos)), tape.constant(Matrix::scalar(sem)),
                     tape.constant(Matrix::scalar(box)), tape.constant(Matrix::scalar(iou))},
                    cfg)
      .item();
}

}  // namespace eda::losses
