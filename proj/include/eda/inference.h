#ifndef EDA_INFERENCE_H_
#define EDA_INFERENCE_H_

#include <map>
#include <vector>

#include "eda/align.h"
#include "eda/numcore/matrix.h"

namespace eda::inference {

using decouple::ComponentKind;
using numcore::Matrix;

struct ComponentScore {
  std::vector<double> values;  // softmax over candidates, or zeros if absent
  ComponentKind kind = ComponentKind::kNone;
  bool absent = false;
};

// Mean-pools the token features under the label, then softmax over the k
// candidates of o * pooled / tau.
ComponentScore component_score(const Matrix& o, const Matrix& t, const align::PositionLabel& label,
                               double tau);

// S_main + S_attri + S_pron + S_rel - S_auxi; missing or absent kinds add
// nothing.
std::vector<double> combined_score(const std::map<ComponentKind, ComponentScore>& scores);

// argmax, lowest index on ties. Throws InvalidInput on an empty vector.
int select_target(const std::vector<double>& s_all);

enum class AuxiliaryMode {
  kAuxiliary,  // score against the auxiliary component
  kAttribute,  // score against the attribute component
};

// Candidate best matching the auxiliary text. Throws InvalidInput when the
// component used is absent.
int select_auxiliary(const Matrix& o, const Matrix& t, const align::LabelSet& labels, double tau,
                     AuxiliaryMode mode = AuxiliaryMode::kAuxiliary);

// Scores of every enabled kind plus their combination and argmax.
struct Inference {
  std::map<ComponentKind, ComponentScore> scores;
  std::vector<double> s_all;
  int selected = -1;
};
Inference infer(const Matrix& o, const Matrix& t, const align::LabelSet& labels, double tau,
                const std::vector<ComponentKind>& enabled);

}  // namespace eda::inference

#endif  // EDA_INFERENCE_H_
