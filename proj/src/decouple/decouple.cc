#include "eda/decouple.h"

#include <algorithm>
#include <set>

#include "eda/error.h"

namespace eda::decouple {

using deptree::DependencyTree;
using deptree::kRoot;
using deptree::Pos;

namespace {

constexpr std::string_view kShortNames[] = {"Main", "Auxi", "Attr", "Pron", "Rel", "None"};
constexpr std::string_view kLongNames[] = {"MainObject", "AuxiliaryObject", "Attribute",
                                           "Pronoun",    "Relationship",    "None"};

// Adpositions that attach a part or property rather than another object
// ("a chair with armrests").
const std::set<std::string, std::less<>> kPartAdpositions = {"with", "without"};

// Words that express a spatial relation when they head a predicate or modify
// an auxiliary noun adverbially.
const std::set<std::string, std::less<>> kSpatialWords = {
    "next",   "near",     "close",   "beside",  "besides", "left",     "right",
    "under",  "beneath",  "below",   "underneath", "above", "over",    "on",
    "onto",   "in",       "inside",  "into",    "behind",  "front",    "between",
    "across", "against",  "along",   "around",  "by",      "at",       "opposite",
    "facing", "directly", "adjacent", "atop",   "nearby",  "far",      "toward",
    "towards", "closest", "farthest", "nearest", "just",   "immediately"};

const std::set<std::string, std::less<>> kCopulas = {"is", "are", "was", "were", "be", "'s"};

std::string_view base_rel(std::string_view deprel) {
  const auto p = deprel.find(':');
  return p == std::string_view::npos ? deprel : deprel.substr(0, p);
}

class Decoupler {
 public:
  explicit Decoupler(const DependencyTree& tree)
      : tree_(tree), n_(static_cast<int>(tree.token_count())) {
    out_.utterance_id = tree.utterance_id();
    out_.assignment.assign(n_, ComponentKind::kNone);
    out_.owner.assign(n_, -1);
    done_.assign(n_, false);
  }

  SemanticComponents run() {
    if (tree_.sentences().empty()) {
      throw DecoupleError(tree_.utterance_id(), "empty utterance");
    }
    const int main = select_main();
    out_.main_head = main;
    main_surface_ = tree_.token(main).surface;
    mark_main_span(main);
    classify_modifiers(main, main, Role::kMain);

    for (int s = 0; s < static_cast<int>(tree_.sentences().size()); ++s) {
      classify_clause(s);
    }
    // Remaining pronouns are references the rules could not place; they are
    // kept as Pronoun so link_pronouns can report them.
    for (int g = 0; g < n_; ++g) {
      if (!done_[g] && tok(g).pos == Pos::kPron) assign(g, ComponentKind::kPronoun, -1);
    }
    std::sort(out_.auxi_heads.begin(), out_.auxi_heads.end());
    return std::move(out_);
  }

 private:
  enum class Role { kMain, kAuxiliary, kAttribute };

  const deptree::Token& tok(int g) const { return tree_.token(g); }
  std::string_view rel(int g) const { return base_rel(tok(g).deprel); }
  bool is_noun(int g) const { return tok(g).pos == Pos::kNoun; }
  bool spatial(int g) const { return kSpatialWords.count(tok(g).surface) > 0; }
  bool has_child(int g, std::string_view relation) const {
    for (int c : tree_.children(g)) {
      if (rel(c) == relation) return true;
    }
    return false;
  }

  void assign(int g, ComponentKind kind, int owner) {
    out_.assignment[g] = kind;
    out_.owner[g] = owner;
    done_[g] = true;
  }
  void skip(int g) { done_[g] = true; }

  // Main-object head: the first sentence's root if it is a noun, else the
  // shallowest-leftmost subject/predicate noun below it, else the
  // shallowest-leftmost noun of the sentence.
  int select_main() const {
    const int root = tree_.sentence_root(0);
    if (is_noun(root) && !has_child(root, "case")) return root;
    std::vector<int> frontier = {root};
    while (!frontier.empty()) {
      std::vector<int> next;
      for (int h : frontier) {
        for (int c : tree_.children(h)) {
          const auto r = rel(c);
          if (is_noun(c) && (r == "nsubj" || r == "attr" || r == "obj" || r == "dobj")) return c;
          next.push_back(c);
        }
      }
      std::sort(next.begin(), next.end());
      frontier = std::move(next);
    }
    int best = -1;
    const int end = static_cast<int>(tree_.sentences()[0].size());
    for (int g = 0; g < end; ++g) {
      if (is_noun(g) && (best < 0 || tree_.depth(g) < tree_.depth(best))) best = g;
    }
    if (best < 0) throw DecoupleError(tree_.utterance_id(), "no main-object noun in first sentence");
    return best;
  }

  void mark_main_span(int head) {
    assign(head, ComponentKind::kMainObject, -1);
    for (int c : tree_.children(head)) {
      if (rel(c) == "compound" && is_noun(c)) mark_main_span(c);
    }
  }

  // Noun attached through an adposition: either a part ("with legs") or an
  // auxiliary object ("next to the table").
  void classify_oblique(int noun, int owner, Role role) {
    std::vector<int> cases;
    bool part = false;
    for (int c : tree_.children(noun)) {
      if (rel(c) == "case") {
        cases.push_back(c);
        if (kPartAdpositions.count(tok(c).surface)) part = true;
      }
    }
    const bool only_part = part && std::all_of(cases.begin(), cases.end(), [&](int c) {
                             return kPartAdpositions.count(tok(c).surface) > 0;
                           });
    // Relation words always belong to the clause owner (main or pronoun),
    // never to the auxiliary noun they introduce.
    const int rel_owner = role == Role::kAuxiliary ? out_.owner[owner] : owner;
    if (only_part) {
      const ComponentKind kind =
          role == Role::kAuxiliary ? ComponentKind::kAuxiliaryObject : ComponentKind::kAttribute;
      assign(noun, kind, owner);
      for (int c : cases) assign(c, ComponentKind::kRelationship, rel_owner);
      classify_modifiers(noun, owner, role == Role::kAuxiliary ? Role::kAuxiliary : Role::kAttribute);
      return;
    }
    make_auxiliary(noun, rel_owner);
  }

  void make_auxiliary(int noun, int clause_owner) {
    assign(noun, ComponentKind::kAuxiliaryObject, clause_owner);
    out_.auxi_heads.push_back(noun);
    for (int c : tree_.children(noun)) {
      if (done_[c]) continue;
      const auto r = rel(c);
      if (r == "case" || (r == "advmod" && spatial(c))) {
        assign(c, ComponentKind::kRelationship, clause_owner);
        classify_modifiers(c, clause_owner, Role::kAttribute, /*relation=*/true);
      }
    }
    classify_modifiers(noun, noun, Role::kAuxiliary);
  }

  // Assigns the dependents of head. owner is the token the dependents are
  // attached to semantically (main, pronoun or auxiliary head).
  void classify_modifiers(int head, int owner, Role role, bool relation = false) {
    for (int c : tree_.children(head)) {
      if (done_[c]) continue;
      const auto r = rel(c);
      const Pos pos = tok(c).pos;
      if (relation) {
        // Inside a multi-word relation ("right next to"): stay relational.
        if (r == "advmod" || r == "fixed" || r == "case" || r == "mwe") {
          assign(c, ComponentKind::kRelationship, owner);
          classify_modifiers(c, owner, role, true);
        } else {
          skip(c);
        }
        continue;
      }
      if (r == "det" || r == "punct" || r == "cop" || r == "aux" || r == "cc" ||
          r == "mark" || r == "expl" || r == "discourse" || r == "dep") {
        skip(c);
        continue;
      }
      if (r == "nsubj" && pos == Pos::kPron && role == Role::kMain) {
        assign(c, ComponentKind::kPronoun, -1);
        if (tree_.sentence_of(c) == tree_.sentence_of(out_.main_head)) {
          out_.pronoun_links[c] = out_.main_head;
        }
        continue;
      }
      if ((r == "nmod" || r == "obl") && is_noun(c)) {
        classify_oblique(c, owner, role);
        continue;
      }
      if ((r == "acl" || r == "relcl") && role == Role::kMain) {
        classify_relative(c, owner);
        continue;
      }
      if (role == Role::kAuxiliary) {
        if (r == "amod" || r == "nummod" || r == "compound" || r == "advmod" || r == "conj" ||
            r == "appos" || r == "nmod") {
          assign(c, ComponentKind::kAuxiliaryObject, owner);
          classify_modifiers(c, owner, Role::kAuxiliary);
        } else {
          skip(c);
        }
        continue;
      }
      if (r == "advmod" && spatial(c)) {
        assign(c, ComponentKind::kRelationship, owner);
        continue;
      }
      if (r == "amod" || r == "nummod" || r == "advmod" || r == "compound" ||
          (r == "conj" && (role == Role::kAttribute || pos == Pos::kAdj || pos == Pos::kNum))) {
        assign(c, ComponentKind::kAttribute, owner);
        classify_modifiers(c, owner, Role::kAttribute);
        continue;
      }
      skip(c);  // unknown or irrelevant relation
    }
  }

  // acl / relcl under the main noun: "the chair that is brown",
  // "the chair facing the table".
  void classify_relative(int pred, int owner) {
    for (int c : tree_.children(pred)) {
      if (!done_[c] && tok(c).pos == Pos::kPron && rel(c) == "nsubj") {
        assign(c, ComponentKind::kPronoun, -1);
        out_.pronoun_links[c] = out_.main_head;
      }
    }
    classify_predicate(pred, owner);
  }

  // Predicate of a clause whose subject is the main object (or a pronoun
  // standing for it).
  void classify_predicate(int pred, int owner) {
    const Pos pos = tok(pred).pos;
    if (done_[pred]) {
      classify_modifiers(pred, owner, Role::kAttribute);
      return;
    }
    if (pos == Pos::kNoun) {
      bool has_case = false;
      for (int c : tree_.children(pred)) has_case = has_case || rel(c) == "case";
      if (has_case) {
        classify_oblique(pred, owner, Role::kMain);
      } else if (tok(pred).surface == main_surface_) {
        assign(pred, ComponentKind::kMainObject, -1);
        classify_modifiers(pred, owner, Role::kMain);
      } else {
        assign(pred, ComponentKind::kAttribute, owner);
        classify_modifiers(pred, owner, Role::kAttribute);
      }
      return;
    }
    if (pos == Pos::kAdj || pos == Pos::kNum || pos == Pos::kAdp || pos == Pos::kOther) {
      if (spatial(pred) || pos == Pos::kAdp) {
        assign(pred, ComponentKind::kRelationship, owner);
        classify_relation_args(pred, owner);
      } else {
        assign(pred, ComponentKind::kAttribute, owner);
        classify_modifiers(pred, owner, Role::kAttribute);
      }
      return;
    }
    if (pos == Pos::kVerb) {
      if (kCopulas.count(tok(pred).surface)) {
        skip(pred);
        // Older annotation schemes hang the predicate off the copula.
        for (int c : tree_.children(pred)) {
          if (done_[c]) continue;
          const auto r = rel(c);
          if (r == "attr" || r == "acomp" || r == "xcomp") classify_predicate(c, owner);
        }
        classify_relation_args(pred, owner);
        return;
      }
      bool has_object = false;
      for (int c : tree_.children(pred)) {
        const auto r = rel(c);
        has_object = has_object || ((r == "obj" || r == "obl" || r == "dobj") && is_noun(c));
      }
      if (has_object) {
        assign(pred, ComponentKind::kRelationship, owner);
        classify_relation_args(pred, owner);
      } else {
        skip(pred);
        classify_modifiers(pred, owner, Role::kAttribute);
      }
      return;
    }
    skip(pred);
  }

  // Arguments of a relational predicate: object nouns become auxiliary
  // objects, spatial adverbs join the relationship.
  void classify_relation_args(int pred, int owner) {
    for (int c : tree_.children(pred)) {
      if (done_[c]) continue;
      const auto r = rel(c);
      if ((r == "obj" || r == "dobj" || r == "obl" || r == "nmod" || r == "pobj") && is_noun(c)) {
        make_auxiliary(c, owner);
      } else if ((r == "advmod" || r == "case" || r == "fixed" || r == "prep") &&
                 (spatial(c) || r == "case")) {
        assign(c, ComponentKind::kRelationship, owner);
        classify_relation_args(c, owner);
      } else if (r == "det" || r == "punct" || r == "cop" || r == "aux" || r == "cc" ||
                 r == "expl") {
        skip(c);
      }
    }
  }

  void classify_clause(int s) {
    const int root = tree_.sentence_root(s);
    if (root == out_.main_head) return;
    int subject = -1;
    if (tok(root).pos == Pos::kPron) {
      if (!has_child(root, "nsubj")) subject = root;
    } else {
      for (int c : tree_.children(root)) {
        if (rel(c) == "nsubj" && tok(c).pos == Pos::kPron) {
          subject = c;
          break;
        }
      }
    }
    if (subject >= 0) {
      if (!done_[subject]) assign(subject, ComponentKind::kPronoun, -1);
      if (s == 0) out_.pronoun_links[subject] = out_.main_head;
      if (subject == root) return;
      classify_predicate(root, s == 0 ? out_.main_head : subject);
    } else if (s == 0) {
      // The first sentence's predicate always describes the main object.
      classify_predicate(root, out_.main_head);
    }
  }

  const DependencyTree& tree_;
  const int n_;
  SemanticComponents out_;
  std::vector<bool> done_;
  std::string main_surface_;
};

// A pronoun stands for the main object when it is the subject of its clause
// or a bare clause of its own ("it .").
bool clause_subject(const DependencyTree& tree, int p) {
  const int head = tree.global_head(p);
  if (head == kRoot) {
    for (int c : tree.children(p)) {
      if (base_rel(tree.token(c).deprel) == "nsubj") return false;
    }
    return true;
  }
  return base_rel(tree.token(p).deprel) == "nsubj" && tree.global_head(head) == kRoot;
}

}  // namespace

std::string_view kind_name(ComponentKind kind) { return kShortNames[static_cast<int>(kind)]; }

ComponentKind kind_from_name(std::string_view name) {
  for (int i = 0; i < 6; ++i) {
    if (name == kShortNames[i] || name == kLongNames[i]) return static_cast<ComponentKind>(i);
  }
  throw InvalidInput("unknown component kind: " + std::string(name));
}

std::vector<int> SemanticComponents::indices_of(ComponentKind kind) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == kind) out.push_back(static_cast<int>(i));
  }
  return out;
}

SemanticComponents decouple(const DependencyTree& tree) { return Decoupler(tree).run(); }

SemanticComponents link_pronouns(SemanticComponents c, const DependencyTree& tree) {
  for (std::size_t g = 0; g < c.assignment.size(); ++g) {
    const int p = static_cast<int>(g);
    if (c.assignment[g] != ComponentKind::kPronoun || c.pronoun_links.count(p)) continue;
    if (!clause_subject(tree, p)) {
      c.warnings.push_back("pronoun \"" + tree.token(p).surface + "\" at " + std::to_string(p) +
                           " has no resolvable antecedent");
      continue;
    }
    c.pronoun_links[p] = c.main_head;
    for (int& o : c.owner) {
      if (o == p) o = c.main_head;
    }
  }
  return c;
}

SemanticComponents decouple_utterance(const DependencyTree& tree) {
  return link_pronouns(decouple(tree), tree);
}

MaskedUtterance mask_object_name(const SemanticComponents& components,
                                 const DependencyTree& tree) {
  const int n = static_cast<int>(tree.token_count());
  if (static_cast<int>(components.size()) != n) {
    throw ShapeError("components and tree disagree on token count");
  }
  const auto is_main = [&](int g) {
    return components.assignment[g] == ComponentKind::kMainObject;
  };
  // run_of[g]: index of the first token of g's run, or g itself.
  std::vector<int> run_of(n);
  for (int g = 0; g < n; ++g) {
    run_of[g] = (g > 0 && is_main(g) && is_main(g - 1) &&
                 tree.sentence_of(g) == tree.sentence_of(g - 1))
                    ? run_of[g - 1]
                    : g;
  }
  // Representative of each run: the token whose head lies outside the run.
  std::vector<int> rep(n);
  for (int g = 0; g < n; ++g) rep[g] = g;
  for (int g = 0; g < n;) {
    int end = g + 1;
    while (end < n && run_of[end] == g) ++end;
    int keep = g;
    for (int k = g; k < end; ++k) {
      const int h = tree.global_head(k);
      if (h == kRoot || h < g || h >= end) {
        keep = k;
        break;
      }
    }
    for (int k = g; k < end; ++k) rep[k] = keep;
    g = end;
  }
  std::vector<int> new_index(n, -1);
  int next = 0;
  for (int g = 0; g < n; ++g) {
    if (rep[g] == g) new_index[g] = next++;
  }
  const auto remap = [&](int g) { return g < 0 ? g : new_index[rep[g]]; };

  std::vector<deptree::Sentence> sentences(tree.sentences().size());
  for (int g = 0; g < n; ++g) {
    if (rep[g] != g) continue;
    const int s = tree.sentence_of(g);
    deptree::Token t = tree.token(g);
    const int h = tree.global_head(g);
    t.head = h == kRoot ? kRoot : remap(h) - remap(tree.sentence_offset(s));
    if (is_main(g)) {
      t.surface = std::string(kMaskToken);
      t.pos = Pos::kNoun;
    }
    t.index = static_cast<int>(sentences[s].size());
    sentences[s].push_back(std::move(t));
  }

  MaskedUtterance out{"", DependencyTree(tree.utterance_id(), std::move(sentences)), {}};
  SemanticComponents& c = out.components;
  c.utterance_id = components.utterance_id;
  c.assignment.resize(next);
  c.owner.resize(next);
  for (int g = 0; g < n; ++g) {
    if (rep[g] != g) continue;
    c.assignment[new_index[g]] = components.assignment[g];
    c.owner[new_index[g]] = remap(components.owner[g]);
  }
  c.main_head = remap(components.main_head);
  for (int a : components.auxi_heads) c.auxi_heads.push_back(remap(a));
  for (const auto& [p, m] : components.pronoun_links) c.pronoun_links[remap(p)] = remap(m);
  c.warnings = components.warnings;
  out.text = out.tree.text();
  return out;
}

nlohmann::json to_json(const SemanticComponents& c) {
  nlohmann::json assignment = nlohmann::json::array();
  for (ComponentKind k : c.assignment) assignment.push_back(kind_name(k));
  nlohmann::json links = nlohmann::json::array();
  for (const auto& [p, m] : c.pronoun_links) links.push_back({p, m});
  return {{"utterance_id", c.utterance_id}, {"assignment", std::move(assignment)},
          {"main_head", c.main_head},       {"auxi_heads", c.auxi_heads},
          {"pronoun_links", std::move(links)}, {"owner", c.owner},
          {"warnings", c.warnings}};
}

SemanticComponents components_from_json(const nlohmann::json& j) {
  try {
    SemanticComponents c;
    c.utterance_id = j.at("utterance_id").get<std::string>();
    for (const auto& a : j.at("assignment")) c.assignment.push_back(kind_from_name(a.get<std::string>()));
    c.main_head = j.at("main_head").get<int>();
    c.auxi_heads = j.at("auxi_heads").get<std::vector<int>>();
    for (const auto& l : j.at("pronoun_links")) c.pronoun_links[l.at(0).get<int>()] = l.at(1).get<int>();
    c.owner = j.contains("owner") ? j.at("owner").get<std::vector<int>>()
                                  : std::vector<int>(c.assignment.size(), -1);
    if (j.contains("warnings")) c.warnings = j.at("warnings").get<std::vector<std::string>>();
    if (c.owner.size() != c.assignment.size()) throw InvalidInput("owner length mismatch");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("bad components JSON: ") + e.what());
  }
}

}  // namespace eda::decouple
