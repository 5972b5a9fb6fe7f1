#ifndef EDA_LOSSES_H_
#define EDA_LOSSES_H_

#include <cstdint>
#include <map>
#include <vector>

#include "eda/align.h"
#include "eda/numcore/tape.h"

namespace eda::losses {

using decouple::ComponentKind;
using numcore::Matrix;
using numcore::Var;

struct LossConfig {
  double tau = 0.07;
  // Positive weights per component. Auxiliary positives and the empty slot
  // use 1.
  std::map<ComponentKind, double> w_plus = {{ComponentKind::kMainObject, 1.0},
                                            {ComponentKind::kAttribute, 0.2},
                                            {ComponentKind::kPronoun, 0.2},
                                            {ComponentKind::kRelationship, 0.1}};
  double w_minus_auxi = 2.0;
  double w_minus_default = 1.0;
  double alpha = 1.0;
  double box_weight = 5.0;
  int decoder_layers = 6;

  double positive_weight(ComponentKind kind) const;
  void validate() const;  // throws ConfigError
};

struct Positive {
  int position;
  ComponentKind kind;

  bool operator==(const Positive&) const = default;
};

// Positive pairs between k candidates and l text positions.
struct PositiveSets {
  std::vector<std::vector<Positive>> candidate;  // k lists of positions
  std::vector<std::vector<int>> token;           // l lists of candidates
  std::vector<ComponentKind> token_kind;         // kind used for the token's w+
  // Positions that take part in the contrastive sums (real tokens and the
  // empty slot). Padding is excluded.
  std::vector<std::uint8_t> valid;
  // Positions carrying auxiliary-object text.
  std::vector<std::uint8_t> auxiliary;

  std::size_t k() const { return candidate.size(); }
  std::size_t l() const { return token.size(); }
};

// Main candidate: main, attribute, pronoun and relationship positions.
// Auxiliary candidate: auxiliary positions. Everyone else: slot l - 1.
// Positions below token_count plus the last slot are valid.
PositiveSets make_positive_sets(const align::LabelSet& labels, std::size_t k,
                                const std::map<int, align::RowRole>& roles,
                                std::size_t token_count);
// Rebuilds the per-token view and kinds from per-candidate lists.
PositiveSets positive_sets_from_candidates(std::vector<std::vector<Positive>> candidate,
                                           std::size_t l, std::vector<std::uint8_t> valid,
                                           std::vector<std::uint8_t> auxiliary);

// Sum over candidates of KL(P_text row || softmax(L_pred row)).
Var position_loss(const Var& l_pred, const Matrix& p_text);

// Object-to-text contrastive loss. The negative weight for candidate i at
// position j is w_minus_auxi when j holds auxiliary text that is not one of
// i's own positives, w_minus_default otherwise; weights scale the logit.
Var semantic_object_loss(const Var& o, const Var& t, const PositiveSets& pos,
                         const LossConfig& cfg);
// Text-to-object contrastive loss, each token weighted by w+ / |O+|.
Var semantic_text_loss(const Var& t, const Var& o, const PositiveSets& pos,
                       const LossConfig& cfg);
// Mean of the two directions.
Var semantic_loss(const Var& o, const Var& t, const PositiveSets& pos, const LossConfig& cfg);

// Boxes are k x 6 rows (cx, cy, cz, w, h, d), axis-aligned.
// Mean over boxes of the summed absolute coordinate error.
Var box_l1_loss(const Var& pred, const Matrix& gt);
// Mean over boxes of 1 - IoU.
Var iou3d_loss(const Var& pred, const Matrix& gt);

struct LossParts {
  Var pos, sem, box, iou;  // invalid handles count as zero
};
// (alpha (pos + sem) + box_weight box + iou) / (decoder_layers + 1).
Var total_loss(numcore::Tape& tape, const LossParts& parts, const LossConfig& cfg);
double total_loss_value(double pos, double sem, double box, double iou, const LossConfig& cfg);

}  // namespace eda::losses

#endif  // EDA_LOSSES_H_
