#ifndef EDA_DEPTREE_H_
#define EDA_DEPTREE_H_

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace eda::deptree {

// Position-label capacity. The final slot (kCapacity - 1) is the reserved
// "no mentioned text" bit, so an utterance may hold at most kCapacity - 1
// tokens.
inline constexpr std::size_t kCapacity = 256;
inline constexpr int kRoot = -1;

enum class Pos { kNoun, kAdj, kAdp, kVerb, kPron, kDet, kNum, kOther };

std::string_view pos_name(Pos pos);
// Maps a UD UPOS tag (or one of our own names) to the coarse tag set.
Pos pos_from_upos(std::string_view upos);

struct Token {
  int index = 0;         // 0-based position within its sentence
  std::string surface;   // lowercase, no whitespace
  Pos pos = Pos::kOther;
  int head = kRoot;      // index within the same sentence, or kRoot
  std::string deprel;

  bool operator==(const Token&) const = default;
};

using Sentence = std::vector<Token>;

// Immutable tokenized, dependency-parsed utterance. The constructor validates
// every tree invariant and throws StructuralError / CapacityError.
//
// Sentences are concatenated for position indexing: token g of the utterance
// is addressed by a global index, and heads are translated to global indices
// by global_head().
class DependencyTree {
 public:
  DependencyTree() = default;
  DependencyTree(std::string utterance_id, std::vector<Sentence> sentences,
                 std::size_t capacity = kCapacity);

  const std::string& utterance_id() const { return utterance_id_; }
  const std::vector<Sentence>& sentences() const { return sentences_; }
  std::size_t token_count() const { return flat_.size(); }

  const Token& token(int global) const;
  int sentence_of(int global) const { return sentence_of_[global]; }
  int sentence_offset(int sentence) const { return offsets_[sentence]; }
  // Global index of the head, or kRoot.
  int global_head(int global) const;
  // Global indices of direct dependents, in surface order.
  std::vector<int> children(int global) const;
  // Global index of the root of a sentence.
  int sentence_root(int sentence) const;
  // Distance to the sentence root (root has depth 0).
  int depth(int global) const;

  std::vector<std::string> surfaces() const;
  // Surfaces joined by single spaces.
  std::string text() const;

  bool operator==(const DependencyTree& o) const {
    return utterance_id_ == o.utterance_id_ && sentences_ == o.sentences_;
  }

 private:
  std::string utterance_id_;
  std::vector<Sentence> sentences_;
  std::vector<std::pair<int, int>> flat_;  // (sentence, local index)
  std::vector<int> sentence_of_;
  std::vector<int> offsets_;
};

// Lowercases and splits on whitespace; . , ; : ! ? ( ) " become separate
// tokens.
std::vector<std::string> tokenize(std::string_view utterance);

// Reads a CoNLL-U document. Blank lines separate sentences. Consecutive
// sentences carrying the same "# utterance_id = X" comment (or belonging to
// the same "# newdoc id = X" document when no utterance_id is given) form one
// tree; otherwise each sentence is its own tree, named by "# sent_id" or
// "utt-N". Multiword ranges (1-2) and empty nodes (1.1) are skipped.
std::vector<DependencyTree> parse_conllu(std::string_view text,
                                         std::size_t capacity = kCapacity);
// Writes trees back as CoNLL-U with one "# utterance_id" comment per sentence.
std::string to_conllu(const std::vector<DependencyTree>& trees);

nlohmann::json to_json(const DependencyTree& tree);
DependencyTree tree_from_json(const nlohmann::json& j);

// Closed lexicon for the templates the synthetic bench generates:
//
//   [det] attr* name [rel det? attr* name] [.]
//   pron is [det] attr* name [rel det? attr* name] . [pron is ...] [.]
//
// where a follow-up sentence is one of "pron is [adv] rel det? attr* name",
// "pron is attr [and attr]" or a bare "pron".
struct ControlledGrammar {
  std::set<std::string> determiners;
  std::set<std::string> pronouns;
  std::set<std::string> copulas;
  std::set<std::string> adjectives;
  std::set<std::string> nouns;
  std::set<std::string> adverbs;
  std::set<std::string> conjunctions;
  // Multi-word relation phrases, e.g. {"next", "to"}.
  std::vector<std::vector<std::string>> relations;
};

// Deterministic parse of a template utterance. Throws UnparseableError for
// anything outside the grammar.
DependencyTree parse_controlled(std::string_view utterance,
                                const ControlledGrammar& grammar,
                                std::string utterance_id = "");

}  // namespace eda::deptree

#endif  // EDA_DEPTREE_H_
