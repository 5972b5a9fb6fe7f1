#ifndef EDA_ALIGN_H_
#define EDA_ALIGN_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "eda/decouple.h"
#include "eda/numcore/matrix.h"
#include "json.hpp"

namespace eda::align {

using decouple::ComponentKind;

// Binary mask over l token positions. The last position (l - 1) is the
// "no mentioned text" slot and is never set by position_label.
struct PositionLabel {
  std::vector<std::uint8_t> bits;
  ComponentKind component = ComponentKind::kNone;
  std::string utterance_id;

  std::size_t capacity() const { return bits.size(); }
  bool empty() const;
  std::vector<int> indices() const;
};

struct AlignmentWeights {
  double main = 0.6;
  double attribute = 0.2;
  double pronoun = 0.2;
  double relationship = 0.1;

  void validate() const;  // throws ConfigError
};

enum class RowRole { kMain, kAuxiliary, kOther };

struct TextDistribution {
  numcore::Matrix rows;  // k x l
  std::vector<RowRole> row_roles;
};

// Bits set where assignment == kind. For Attribute only the tokens owned by
// the main object count, so attributes of an unlinked pronoun are dropped.
// Throws CapacityError when the utterance needs more than l - 1 positions.
PositionLabel position_label(const decouple::SemanticComponents& components,
                             ComponentKind kind, std::size_t l);

// The five labels of one utterance.
struct LabelSet {
  PositionLabel main, auxiliary, attribute, pronoun, relationship;

  const PositionLabel& get(ComponentKind kind) const;
};
LabelSet label_set(const decouple::SemanticComponents& components, std::size_t l);

// lambda-weighted sum of the main, attribute, pronoun and relationship
// labels, L1-normalized.
std::vector<double> main_distribution(const LabelSet& labels, const AlignmentWeights& w);

// k rows: main_row for the Main candidate, normalized auxiliary label for the
// Auxiliary candidate, the one-hot on slot l - 1 for everyone else.
TextDistribution build_ptext(const std::vector<double>& main_row,
                             const PositionLabel& auxi_label, std::size_t k,
                             const std::map<int, RowRole>& roles);

nlohmann::json to_json(const PositionLabel& label);
PositionLabel label_from_json(const nlohmann::json& j);
// Sparse rows: [{"role": "Main", "weights": {"4": 0.5, ...}}, ...]
nlohmann::json to_json(const TextDistribution& d);

}  // namespace eda::align

#endif  // EDA_ALIGN_H_
