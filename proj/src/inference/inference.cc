#include "eda/inference.h"

#include <cmath>

#include "eda/error.h"

namespace eda::inference {

ComponentScore component_score(const Matrix& o, const Matrix& t, const align::PositionLabel& label,
                               double tau) {
  if (t.rows() != label.capacity() || o.cols() != t.cols()) {
    throw ShapeError("feature shapes do not match the label");
  }
  if (!(tau > 0)) throw ConfigError("tau must be positive");
  const std::size_t k = o.rows(), d = o.cols();
  ComponentScore out{std::vector<double>(k, 0.0), label.component, false};
  const std::vector<int> idx = label.indices();
  if (idx.empty()) {
    out.absent = true;
    return out;
  }
  std::vector<double> pooled(d, 0.0);
  for (int j : idx) {
    for (std::size_t c = 0; c < d; ++c) pooled[c] += t(j, c);
  }
  for (double& v : pooled) v /= static_cast<double>(idx.size());
  Matrix logits(1, k);
  for (std::size_t i = 0; i < k; ++i) {
    double s = 0;
    for (std::size_t c = 0; c < d; ++c) s += o(i, c) * pooled[c];
    logits(0, i) = s / tau;
  }
  const Matrix p = numcore::softmax_rows(logits);
  out.values.assign(p.data().begin(), p.data().end());
  return out;
}

std::vector<double> combined_score(const std::map<ComponentKind, ComponentScore>& scores) {
  std::vector<double> s;
  for (const auto& [kind, score] : scores) {
    if (s.empty()) s.assign(score.values.size(), 0.0);
    if (score.values.size() != s.size()) throw ShapeError("component scores differ in length");
    if (score.absent || kind == ComponentKind::kNone) continue;
    const double sign = kind == ComponentKind::kAuxiliaryObject ? -1.0 : 1.0;
    for (std::size_t i = 0; i < s.size(); ++i) s[i] += sign * score.values[i];
  }
  return s;
}

int select_target(const std::vector<double>& s_all) {
  if (s_all.empty()) throw InvalidInput("no candidates to select from");
  int best = 0;
  for (std::size_t i = 1; i < s_all.size(); ++i) {
    if (s_all[i] > s_all[best]) best = static_cast<int>(i);
  }
  return best;
}

int select_auxiliary(const Matrix& o, const Matrix& t, const align::LabelSet& labels, double tau,
                     AuxiliaryMode mode) {
  const align::PositionLabel& label =
      mode == AuxiliaryMode::kAuxiliary ? labels.auxiliary : labels.attribute;
  const ComponentScore s = component_score(o, t, label, tau);
  if (s.absent) throw InvalidInput("utterance has no auxiliary component");
  return select_target(s.values);
}

Inference infer(const Matrix& o, const Matrix& t, const align::LabelSet& labels, double tau,
                const std::vector<ComponentKind>& enabled) {
  Inference out;
  for (ComponentKind kind : enabled) {
    out.scores[kind] = component_score(o, t, labels.get(kind), tau);
  }
  out.s_all = combined_score(out.scores);
  if (out.s_all.empty()) out.s_all.assign(o.rows(), 0.0);
  out.selected = select_target(out.s_all);
  return out;
}

}  // namespace eda::inference
