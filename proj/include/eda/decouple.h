#ifndef EDA_DECOUPLE_H_
#define EDA_DECOUPLE_H_

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "eda/deptree.h"
#include "json.hpp"

namespace eda::decouple {

enum class ComponentKind {
  kMainObject,
  kAuxiliaryObject,
  kAttribute,
  kPronoun,
  kRelationship,
  kNone,
};

inline constexpr ComponentKind kAllKinds[] = {
    ComponentKind::kMainObject, ComponentKind::kAuxiliaryObject,
    ComponentKind::kAttribute,  ComponentKind::kPronoun,
    ComponentKind::kRelationship, ComponentKind::kNone};

// Short names used in JSON: Main, Auxi, Attr, Pron, Rel, None.
std::string_view kind_name(ComponentKind kind);
// Accepts the short names and the long enumerator spellings
// ("MainObject", "Attribute", ...). Throws InvalidInput otherwise.
ComponentKind kind_from_name(std::string_view name);

// Per-token semantic assignment of one utterance (global token indices).
struct SemanticComponents {
  std::string utterance_id;
  std::vector<ComponentKind> assignment;
  int main_head = -1;
  std::vector<int> auxi_heads;
  // pronoun token -> main_head
  std::map<int, int> pronoun_links;
  // Token that owns each Attribute / AuxiliaryObject / Relationship token:
  // main_head, a pronoun, or an auxiliary head. -1 for everything else.
  std::vector<int> owner;
  std::vector<std::string> warnings;

  std::size_t size() const { return assignment.size(); }
  std::vector<int> indices_of(ComponentKind kind) const;

  bool operator==(const SemanticComponents&) const = default;
};

// Rule-based assignment of every token to one of the five components (or
// None). Pronoun clauses in later sentences are classified but their pronouns
// are left unlinked; run link_pronouns to connect them to the main object.
// Throws DecoupleError when the first sentence has no main-object noun.
SemanticComponents decouple(const deptree::DependencyTree& tree);

// Links pronouns to the main object and re-owns the attributes hanging off
// them. Pronouns that are neither a clause subject nor a clause root stay
// unlinked and produce a warning.
SemanticComponents link_pronouns(SemanticComponents components,
                                 const deptree::DependencyTree& tree);

// decouple followed by link_pronouns.
SemanticComponents decouple_utterance(const deptree::DependencyTree& tree);

inline constexpr std::string_view kMaskToken = "object";

struct MaskedUtterance {
  std::string text;
  deptree::DependencyTree tree;
  SemanticComponents components;
};

// Replaces every contiguous run of MainObject tokens by the single token
// "object" and re-indexes the tree and components.
MaskedUtterance mask_object_name(const SemanticComponents& components,
                                 const deptree::DependencyTree& tree);

nlohmann::json to_json(const SemanticComponents& c);
SemanticComponents components_from_json(const nlohmann::json& j);

}  // namespace eda::decouple

#endif  // EDA_DECOUPLE_H_
