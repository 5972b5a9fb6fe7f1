#include <string>

#include "doctest.h"
#include "eda/deptree.h"
#include "eda/error.h"

namespace dt = eda::deptree;
using dt::Pos;
using dt::Token;

namespace {

dt::Sentence sentence(std::initializer_list<std::tuple<const char*, Pos, int, const char*>> rows) {
  dt::Sentence s;
  for (const auto& [surface, pos, head, rel] : rows) {
    s.push_back(Token{static_cast<int>(s.size()), surface, pos, head, rel});
  }
  return s;
}

const char* kTwoSentences =
    "# newdoc id = d1\n"
    "# utterance_id = u1\n"
    "1\tIt\tit\tPRON\t_\t_\t2\tnsubj\t_\t_\n"
    "2\tsits\tsit\tVERB\t_\t_\t0\troot\t_\t_\n"
    "\n"
    "# utterance_id = u1\n"
    "1\tIt\tit\tPRON\t_\t_\t3\tnsubj\t_\t_\n"
    "2\tis\tbe\tAUX\t_\t_\t3\tcop\t_\t_\n"
    "3\tbrown\tbrown\tADJ\t_\t_\t0\troot\t_\t_\n"
    "\n"
    "# sent_id = s9\n"
    "1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n"
    "1\tdoor\tdoor\tPROPN\t_\t_\t0\troot\t_\t_\n"
    "1.1\tgap\t_\t_\t_\t_\t_\t_\t_\t_\n";

}  // namespace

TEST_CASE("tokenize lowercases and splits punctuation") {
  CHECK(dt::tokenize("It is a Brown chair. It is (tall)!") ==
        std::vector<std::string>{"it", "is", "a", "brown", "chair", ".", "it", "is", "(",
                                 "tall", ")", "!"});
  CHECK(dt::tokenize("   ").empty());
}

TEST_CASE("global indexing across sentences") {
  dt::DependencyTree tree(
      "u", {sentence({{"chair", Pos::kNoun, -1, "root"}, {".", Pos::kOther, 0, "punct"}}),
            sentence({{"it", Pos::kPron, 1, "nsubj"}, {"brown", Pos::kAdj, -1, "root"}})});
  CHECK(tree.token_count() == 4);
  CHECK(tree.global_head(2) == 3);
  CHECK(tree.global_head(3) == dt::kRoot);
  CHECK(tree.sentence_root(1) == 3);
  CHECK(tree.children(3) == std::vector<int>{2});
  CHECK(tree.children(0) == std::vector<int>{1});
  CHECK(tree.depth(2) == 1);
  CHECK(tree.sentence_of(2) == 1);
  CHECK(tree.text() == "chair . it brown");
}

TEST_CASE("structural validation") {
  using S = std::vector<dt::Sentence>;
  CHECK_THROWS_AS(dt::DependencyTree("c", S{sentence({{"a", Pos::kNoun, 1, "x"}, {"b", Pos::kNoun, 0, "x"}})}),
                  eda::StructuralError);
  CHECK_THROWS_AS(dt::DependencyTree("r", S{sentence({{"a", Pos::kNoun, -1, "root"}, {"b", Pos::kNoun, -1, "root"}})}),
                  eda::StructuralError);
  CHECK_THROWS_AS(dt::DependencyTree("s", S{sentence({{"a", Pos::kNoun, 0, "root"}})}),
                  eda::StructuralError);
  CHECK_THROWS_AS(dt::DependencyTree("o", S{sentence({{"a", Pos::kNoun, -1, "root"}, {"b", Pos::kNoun, 5, "x"}})}),
                  eda::StructuralError);
  CHECK_THROWS_AS(dt::DependencyTree("w", S{sentence({{"a b", Pos::kNoun, -1, "root"}})}),
                  eda::StructuralError);
}

TEST_CASE("capacity keeps the empty slot free") {
  dt::Sentence s = sentence({{"chair", Pos::kNoun, -1, "root"}});
  for (int i = 1; i < 255; ++i) s.push_back(Token{i, "x", Pos::kOther, 0, "dep"});
  CHECK_NOTHROW(dt::DependencyTree("ok", {s}));
  s.push_back(Token{255, "x", Pos::kOther, 0, "dep"});
  CHECK_THROWS_AS(dt::DependencyTree("full", {s}), eda::CapacityError);
  CHECK_THROWS_AS(dt::DependencyTree("small", {sentence({{"a", Pos::kNoun, -1, "root"}})}, 1),
                  eda::CapacityError);
}

TEST_CASE("parse_conllu groups sentences by utterance id") {
  const auto trees = dt::parse_conllu(kTwoSentences);
  REQUIRE(trees.size() == 2);
  CHECK(trees[0].utterance_id() == "u1");
  CHECK(trees[0].sentences().size() == 2);
  CHECK(trees[0].token(0).surface == "it");
  CHECK(trees[0].token(4).pos == Pos::kAdj);
  CHECK(trees[0].global_head(2) == 4);
  CHECK(trees[1].utterance_id() == "d1");
  CHECK(trees[1].token(0).pos == Pos::kNoun);
}

TEST_CASE("parse_conllu without comments numbers utterances") {
  const auto trees = dt::parse_conllu(
      "1\ta\t_\tNOUN\t_\t_\t0\troot\t_\t_\n\n1\tb\t_\tNOUN\t_\t_\t0\troot\t_\t_\n");
  REQUIRE(trees.size() == 2);
  CHECK(trees[0].utterance_id() == "utt-0");
  CHECK(trees[1].utterance_id() == "utt-1");
}

TEST_CASE("parse_conllu reports the failing line") {
  try {
    dt::parse_conllu("# c\n1\ta\t_\tNOUN\t_\t_\t0\troot\t_\n");
    FAIL("expected ParseError");
  } catch (const eda::ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(dt::parse_conllu("2\ta\t_\tNOUN\t_\t_\t0\troot\t_\t_\n"), eda::ParseError);
  CHECK_THROWS_AS(dt::parse_conllu("1\ta\t_\tNOUN\t_\t_\tx\troot\t_\t_\n"), eda::ParseError);
  CHECK_THROWS_AS(dt::parse_conllu("1\ta\t_\tNOUN\t_\t_\t1\troot\t_\t_\n"), eda::StructuralError);
}

TEST_CASE("CoNLL-U and JSON round trips") {
  const auto trees = dt::parse_conllu(kTwoSentences);
  CHECK(dt::parse_conllu(dt::to_conllu(trees)) == trees);
  for (const auto& t : trees) CHECK(dt::tree_from_json(dt::to_json(t)) == t);
  CHECK_THROWS_AS(dt::tree_from_json(nlohmann::json{{"sentences", 3}}), eda::InvalidInput);
}

TEST_CASE("controlled grammar parses the template shapes") {
  dt::ControlledGrammar g;
  g.determiners = {"a", "the"};
  g.pronouns = {"it"};
  g.copulas = {"is"};
  g.adjectives = {"brown", "black", "wooden"};
  g.nouns = {"chair", "table"};
  g.adverbs = {"directly"};
  g.conjunctions = {"and"};
  g.relations = {{"next", "to"}, {"under"}};

  const auto t = dt::parse_controlled("a brown chair next to the black table . it is wooden and black .", g, "x");
  REQUIRE(t.sentences().size() == 2);
  CHECK(t.token(2).deprel == "root");
  CHECK(t.token(7).deprel == "nmod");
  CHECK(t.global_head(7) == 2);
  CHECK(t.token(3).deprel == "case");
  CHECK(t.global_head(3) == 7);
  CHECK(t.token(11).deprel == "root");
  CHECK(t.token(13).deprel == "conj");

  const auto u = dt::parse_controlled("it is a chair . it is directly under the table .", g);
  CHECK(u.token(8).deprel == "case");
  CHECK(u.token(10).deprel == "root");
  CHECK(u.global_head(7) == 10);

  CHECK_THROWS_AS(dt::parse_controlled("a chair sits", g), eda::UnparseableError);
  CHECK_THROWS_AS(dt::parse_controlled("chair . table", g), eda::UnparseableError);
  CHECK_THROWS_AS(dt::parse_controlled("", g), eda::UnparseableError);
}
