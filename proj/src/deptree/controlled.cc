#include <string>
#include <vector>

#include "eda/deptree.h"
#include "eda/error.h"

namespace eda::deptree {

namespace {

// Recursive-descent recognizer over one sentence's tokens. Each rule appends
// tokens with local heads fixed up once the phrase head is known.
class SentenceParser {
 public:
  SentenceParser(const std::vector<std::string>& words, const ControlledGrammar& g,
                 const std::string& utterance)
      : words_(words), g_(g), utterance_(utterance) {
    tokens_.resize(words.size());
    for (std::size_t i = 0; i < words.size(); ++i) {
      tokens_[i].index = static_cast<int>(i);
      tokens_[i].surface = words[i];
    }
  }

  Sentence parse_first() {
    int root;
    if (is(0, g_.pronouns) && is(1, g_.copulas) && !at_end(2)) {
      set(0, Pos::kPron, "nsubj");
      set(1, Pos::kVerb, "cop");
      pos_ = 2;
      root = noun_phrase();
      attach(0, root);
      attach(1, root);
    } else {
      root = noun_phrase();
    }
    tokens_[root].head = kRoot;
    tokens_[root].deprel = "root";
    if (match_relation() >= 0) relation_phrase(root);
    finish(root);
    return tokens_;
  }

  Sentence parse_followup() {
    if (!is(0, g_.pronouns)) fail("follow-up sentence must start with a pronoun");
    pos_ = 1;
    if (at_end(pos_)) {
      set(0, Pos::kPron, "root");
      tokens_[0].head = kRoot;
      finish(0);
      return tokens_;
    }
    if (!is(1, g_.copulas)) fail("expected copula after pronoun");
    set(0, Pos::kPron, "nsubj");
    set(1, Pos::kVerb, "cop");
    pos_ = 2;
    int root;
    if (is(pos_, g_.adverbs) || match_relation() >= 0) {
      int adverb = -1;
      if (is(pos_, g_.adverbs)) {
        adverb = pos_;
        set(pos_++, Pos::kOther, "advmod");
      }
      std::vector<int> rel = relation_words();
      root = noun_phrase();
      for (int r : rel) attach(r, root);
      if (adverb >= 0) attach(adverb, root);
    } else if (is(pos_, g_.adjectives)) {
      root = pos_;
      set(pos_++, Pos::kAdj, "root");
      if (is(pos_, g_.conjunctions)) {
        const int cc = pos_;
        set(pos_++, Pos::kOther, "cc");
        if (!is(pos_, g_.adjectives)) fail("expected adjective after conjunction");
        const int conj = pos_;
        set(pos_++, Pos::kAdj, "conj");
        attach(conj, root);
        attach(cc, conj);
      }
    } else {
      fail("unexpected word after copula");
    }
    tokens_[root].head = kRoot;
    tokens_[root].deprel = "root";
    attach(0, root);
    attach(1, root);
    finish(root);
    return tokens_;
  }

 private:
  bool at_end(int i) const {
    return i >= static_cast<int>(words_.size()) || words_[i] == ".";
  }
  bool is(int i, const std::set<std::string>& set) const {
    return !at_end(i) && set.count(words_[i]) > 0;
  }
  void set(int i, Pos pos, const char* deprel) {
    tokens_[i].pos = pos;
    tokens_[i].deprel = deprel;
  }
  void attach(int dep, int head) { tokens_[dep].head = head; }

  [[noreturn]] void fail(const std::string& why) const {
    throw UnparseableError("\"" + utterance_ + "\": " + why);
  }

  // det? adj* noun; returns the noun's index.
  int noun_phrase() {
    std::vector<int> mods;
    if (is(pos_, g_.determiners)) {
      set(pos_, Pos::kDet, "det");
      mods.push_back(pos_++);
    }
    while (is(pos_, g_.adjectives)) {
      set(pos_, Pos::kAdj, "amod");
      mods.push_back(pos_++);
    }
    if (!is(pos_, g_.nouns)) fail("expected object name");
    const int noun = pos_;
    set(pos_++, Pos::kNoun, "");
    for (int m : mods) attach(m, noun);
    return noun;
  }

  // Index into g_.relations of the longest relation phrase starting at pos_.
  int match_relation() const {
    int best = -1;
    std::size_t best_len = 0;
    for (std::size_t r = 0; r < g_.relations.size(); ++r) {
      const auto& phrase = g_.relations[r];
      bool ok = !phrase.empty();
      for (std::size_t k = 0; ok && k < phrase.size(); ++k) {
        ok = !at_end(pos_ + static_cast<int>(k)) && words_[pos_ + k] == phrase[k];
      }
      if (ok && phrase.size() > best_len) {
        best = static_cast<int>(r);
        best_len = phrase.size();
      }
    }
    return best;
  }

  std::vector<int> relation_words() {
    const int r = match_relation();
    if (r < 0) fail("expected relation phrase");
    std::vector<int> out;
    for (std::size_t k = 0; k < g_.relations[r].size(); ++k) {
      set(pos_, Pos::kAdp, "case");
      out.push_back(pos_++);
    }
    return out;
  }

  void relation_phrase(int main) {
    std::vector<int> rel = relation_words();
    const int aux = noun_phrase();
    for (int r : rel) attach(r, aux);
    tokens_[aux].deprel = "nmod";
    attach(aux, main);
  }

  void finish(int root) {
    if (pos_ < static_cast<int>(words_.size()) && words_[pos_] == ".") {
      set(pos_, Pos::kOther, "punct");
      attach(pos_, root);
      ++pos_;
    }
    if (pos_ != static_cast<int>(words_.size())) fail("trailing words");
  }

  const std::vector<std::string>& words_;
  const ControlledGrammar& g_;
  const std::string& utterance_;
  Sentence tokens_;
  int pos_ = 0;
};

}  // namespace

DependencyTree parse_controlled(std::string_view utterance, const ControlledGrammar& grammar,
                                std::string utterance_id) {
  const std::string text(utterance);
  const std::vector<std::string> words = tokenize(utterance);
  if (words.empty()) throw UnparseableError("empty utterance");

  // Split after each ".", keeping the period with its sentence.
  std::vector<std::vector<std::string>> chunks(1);
  for (const std::string& w : words) {
    chunks.back().push_back(w);
    if (w == ".") chunks.emplace_back();
  }
  if (chunks.back().empty()) chunks.pop_back();

  std::vector<Sentence> sentences;
  for (std::size_t s = 0; s < chunks.size(); ++s) {
    if (chunks[s].size() == 1 && chunks[s][0] == ".") {
      throw UnparseableError("\"" + text + "\": empty sentence");
    }
    SentenceParser p(chunks[s], grammar, text);
    sentences.push_back(s == 0 ? p.parse_first() : p.parse_followup());
  }
  return DependencyTree(std::move(utterance_id), std::move(sentences));
}

}  // namespace eda::deptree
