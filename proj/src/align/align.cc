#include "eda/align.h"

#include <cmath>

#include "eda/error.h"

namespace eda::align {

bool PositionLabel::empty() const {
  for (auto b : bits) {
    if (b) return false;
  }
  return true;
}

std::vector<int> PositionLabel::indices() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) out.push_back(static_cast<int>(i));
  }
  return out;
}

void AlignmentWeights::validate() const {
  if (!(main > 0)) throw ConfigError("lambda1 must be positive");
  for (double v : {attribute, pronoun, relationship}) {
    if (!(v >= 0) || !std::isfinite(v)) throw ConfigError("lambda weights must be non-negative");
  }
}

const PositionLabel& LabelSet::get(ComponentKind kind) const {
  switch (kind) {
    case ComponentKind::kMainObject: return main;
    case ComponentKind::kAuxiliaryObject: return auxiliary;
    case ComponentKind::kAttribute: return attribute;
    case ComponentKind::kPronoun: return pronoun;
    case ComponentKind::kRelationship: return relationship;
    default: throw InvalidInput("no position label for kind None");
  }
}

PositionLabel position_label(const decouple::SemanticComponents& c, ComponentKind kind,
                             std::size_t l) {
  if (c.size() + 1 > l) {
    throw CapacityError(c.utterance_id + ": " + std::to_string(c.size()) +
                        " tokens do not fit capacity " + std::to_string(l));
  }
  PositionLabel out{std::vector<std::uint8_t>(l, 0), kind, c.utterance_id};
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c.assignment[i] != kind) continue;
    if (kind == ComponentKind::kAttribute && c.owner[i] != c.main_head) continue;
    out.bits[i] = 1;
  }
  return out;
}

LabelSet label_set(const decouple::SemanticComponents& c, std::size_t l) {
  return {position_label(c, ComponentKind::kMainObject, l),
          position_label(c, ComponentKind::kAuxiliaryObject, l),
          position_label(c, ComponentKind::kAttribute, l),
          position_label(c, ComponentKind::kPronoun, l),
          position_label(c, ComponentKind::kRelationship, l)};
}

std::vector<double> main_distribution(const LabelSet& labels, const AlignmentWeights& w) {
  w.validate();
  const std::size_t l = labels.main.capacity();
  const PositionLabel* parts[] = {&labels.main, &labels.attribute, &labels.pronoun,
                                  &labels.relationship};
  const double lambda[] = {w.main, w.attribute, w.pronoun, w.relationship};
  std::vector<double> row(l, 0.0);
  for (int p = 0; p < 4; ++p) {
    if (parts[p]->capacity() != l || parts[p]->utterance_id != labels.main.utterance_id) {
      throw ShapeError("position labels disagree on capacity or utterance");
    }
    for (std::size_t i = 0; i < l; ++i) {
      if (parts[p]->bits[i]) row[i] += lambda[p];
    }
  }
  double total = 0;
  for (double v : row) total += v;
  if (!(total > 0)) throw NumericError(labels.main.utterance_id + ": empty main distribution");
  for (double& v : row) v /= total;
  return row;
}

TextDistribution build_ptext(const std::vector<double>& main_row, const PositionLabel& auxi,
                             std::size_t k, const std::map<int, RowRole>& roles) {
  const std::size_t l = main_row.size();
  if (l == 0 || auxi.capacity() != l) throw ShapeError("main row and auxiliary label lengths differ");
  TextDistribution d{numcore::Matrix(k, l, 0.0), std::vector<RowRole>(k, RowRole::kOther)};
  int mains = 0;
  for (const auto& [cand, role] : roles) {
    if (cand < 0 || static_cast<std::size_t>(cand) >= k) {
      throw ShapeError("candidate index out of range: " + std::to_string(cand));
    }
    d.row_roles[cand] = role;
    if (role == RowRole::kMain) ++mains;
  }
  if (mains != 1) throw InvalidInput("exactly one candidate must have the Main role");
  const std::vector<int> auxi_idx = auxi.indices();
  for (std::size_t r = 0; r < k; ++r) {
    auto row = d.rows.row(r);
    switch (d.row_roles[r]) {
      case RowRole::kMain:
        std::copy(main_row.begin(), main_row.end(), row.begin());
        break;
      case RowRole::kAuxiliary:
        if (auxi_idx.empty()) throw InvalidInput("auxiliary role assigned but auxiliary label is empty");
        for (int i : auxi_idx) row[i] = 1.0 / static_cast<double>(auxi_idx.size());
        break;
      case RowRole::kOther:
        row[l - 1] = 1.0;
        break;
    }
  }
  return d;
}

nlohmann::json to_json(const PositionLabel& label) {
  return {{"kind", decouple::kind_name(label.component)},
          {"indices", label.indices()},
          {"l", label.capacity()}};
}

PositionLabel label_from_json(const nlohmann::json& j) {
  try {
    PositionLabel out;
    out.component = decouple::kind_from_name(j.at("kind").get<std::string>());
    const std::size_t l = j.at("l").get<std::size_t>();
    out.bits.assign(l, 0);
    for (int i : j.at("indices").get<std::vector<int>>()) {
      if (i < 0 || static_cast<std::size_t>(i) >= l) throw ShapeError("label index out of range");
      out.bits[i] = 1;
    }
    if (j.contains("utterance_id")) out.utterance_id = j["utterance_id"].get<std::string>();
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("bad label JSON: ") + e.what());
  }
}

nlohmann::json to_json(const TextDistribution& d) {
  static const char* kRoleNames[] = {"Main", "Auxiliary", "Other"};
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < d.rows.rows(); ++r) {
    nlohmann::json weights = nlohmann::json::object();
    for (std::size_t i = 0; i < d.rows.cols(); ++i) {
      if (d.rows(r, i) != 0) weights[std::to_string(i)] = d.rows(r, i);
    }
    rows.push_back({{"role", kRoleNames[static_cast<int>(d.row_roles[r])]}, {"weights", weights}});
  }
  return rows;
}

}  // namespace eda::align
