#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "eda/error.h"
#include "eda/numcore/gradcheck.h"
#include "eda/toybench.h"

namespace tb = eda::toybench;
namespace nc = eda::numcore;
using eda::decouple::ComponentKind;

namespace {

const tb::Vocab& V() { return tb::default_vocab(); }

int index_in(const std::vector<std::string>& list, const std::string& w) {
  const auto it = std::find(list.begin(), list.end(), w);
  return it == list.end() ? -1 : static_cast<int>(it - list.begin());
}

// Geometry written out again from the published thresholds.
bool oracle_relation(const std::string& rel, const tb::Box& a, const tb::Box& b) {
  const double dx = a.center[0] - b.center[0], dy = a.center[1] - b.center[1],
               dz = a.center[2] - b.center[2];
  const double flat = std::hypot(dx, dy), full = std::sqrt(dx * dx + dy * dy + dz * dz);
  if (rel == "next to") return flat < 2.0 && std::fabs(dz) < 0.5;
  if (rel == "under") return dz < -0.5 && flat < 2.5;
  if (rel == "above") return dz > 0.5 && flat < 2.5;
  if (rel == "left of") return dx < -0.5 && full < 4.0;
  if (rel == "right of") return dx > 0.5 && full < 4.0;
  if (rel == "near") return full < 2.5;
  FAIL("unknown relation " << rel);
  return false;
}

// Reads the description back from the surface text and filters the scene
// with it. The first noun is the target's, a second noun is the auxiliary
// object's and a color right before it belongs to that object.
std::vector<int> oracle_referents(const std::string& text, const tb::ToyScene& scene) {
  std::vector<std::string> w;
  std::istringstream in(text);
  for (std::string s; in >> s;) w.push_back(s);
  int cat = -1, aux_cat = -1, aux_color = -1;
  std::string rel;
  std::vector<int> colors, materials, sizes;
  for (std::size_t i = 0; i < w.size(); ++i) {
    for (const auto& r : V().relations) {
      if (i + r.words.size() <= w.size() &&
          std::equal(r.words.begin(), r.words.end(), w.begin() + i)) {
        rel = r.name;
      }
    }
    const int c = index_in(V().categories, w[i]);
    if (c >= 0) {
      if (cat < 0) {
        cat = c;
      } else {
        aux_cat = c;
        const int col = i > 0 ? index_in(V().colors, w[i - 1]) : -1;
        if (col >= 0) {
          aux_color = col;
          colors.erase(std::find(colors.begin(), colors.end(), col));
        }
      }
    }
    if (int x = index_in(V().colors, w[i]); x >= 0) colors.push_back(x);
    if (int x = index_in(V().materials, w[i]); x >= 0) materials.push_back(x);
    if (int x = index_in(V().sizes, w[i]); x >= 0) sizes.push_back(x);
  }
  std::vector<int> out;
  const auto& obj = scene.objects;
  for (std::size_t i = 0; i < obj.size(); ++i) {
    bool ok = cat < 0 || obj[i].category == cat;
    for (int x : colors) ok = ok && obj[i].color == x;
    for (int x : materials) ok = ok && obj[i].material == x;
    for (int x : sizes) ok = ok && obj[i].size_tag == x;
    if (ok && !rel.empty()) {
      bool found = false;
      for (std::size_t j = 0; j < obj.size(); ++j) {
        found = found || (j != i && obj[j].category == aux_cat &&
                          (aux_color < 0 || obj[j].color == aux_color) &&
                          oracle_relation(rel, obj[i].box, obj[j].box));
      }
      ok = found;
    }
    if (ok) out.push_back(static_cast<int>(i));
  }
  return out;
}

double oracle_iou(const tb::Box& a, const tb::Box& b) {
  double inter = 1;
  for (int d = 0; d < 3; ++d) {
    const double lo = std::max(a.center[d] - a.size[d] / 2, b.center[d] - b.size[d] / 2);
    const double hi = std::min(a.center[d] + a.size[d] / 2, b.center[d] + b.size[d] / 2);
    inter *= hi > lo ? hi - lo : 0;
  }
  const double va = a.size[0] * a.size[1] * a.size[2], vb = b.size[0] * b.size[1] * b.size[2];
  return inter / (va + vb - inter);
}

tb::TrainConfig small_config() {
  tb::TrainConfig c;
  c.train_scenes = 40;
  c.eval_scenes = 20;
  c.epochs = 3;
  return c;
}

}  // namespace

TEST_CASE("vocab: default word lists and lookups") {
  CHECK(V().categories.size() == 12);
  CHECK(V().id("chair") >= 0);
  CHECK(V().words[V().id("chair")] == "chair");
  CHECK_THROWS_AS(V().id("sofa-bed"), eda::InvalidInput);
  CHECK(V().hash != 0);
  std::set<std::string> unique(V().words.begin(), V().words.end());
  CHECK(unique.size() == V().size());
}

TEST_CASE("vocab: duplicate content words are rejected") {
  nlohmann::json j = nlohmann::json::parse(R"({"version":1,"categories":["chair","table"],
    "colors":["red","chair"],"materials":["metal"],"sizes":["small"],
    "relations":[{"name":"near","words":["near"]}],"determiners":["a","the"],"pronouns":["it","this"],"copula":"is",
    "adverbs":["directly"],"conjunctions":["and"],"punct":".","mask":"object"})");
  CHECK_THROWS_AS(tb::vocab_from_json(j), eda::ConfigError);
  j["colors"] = {"red"};
  CHECK_NOTHROW(tb::vocab_from_json(j));
  j["relations"] = {"near"};
  CHECK_THROWS_AS(tb::vocab_from_json(j), eda::ConfigError);
}

TEST_CASE("box_iou: hand-computed cases") {
  const tb::Box a{{0, 0, 0}, {2, 2, 2}};
  CHECK(tb::box_iou(a, a) == doctest::Approx(1.0));
  CHECK(tb::box_iou(a, tb::Box{{5, 0, 0}, {2, 2, 2}}) == 0.0);
  // Shifted by 1 along x: intersection 1x2x2 = 4, union 8 + 8 - 4 = 12.
  CHECK(tb::box_iou(a, tb::Box{{1, 0, 0}, {2, 2, 2}}) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("relation_holds matches the geometric thresholds") {
  tb::ToyObject a, b;
  a.box = {{2, 2, 1}, {1, 1, 1}};
  b.box = {{3, 2, 1}, {1, 1, 1}};
  auto r = [](const char* name) {
    for (std::size_t i = 0; i < V().relations.size(); ++i)
      if (V().relations[i].name == name) return static_cast<int>(i);
    return -1;
  };
  CHECK(tb::relation_holds(V(), r("next to"), a, b));
  CHECK(tb::relation_holds(V(), r("left of"), a, b));
  CHECK_FALSE(tb::relation_holds(V(), r("right of"), a, b));
  CHECK(tb::relation_holds(V(), r("right of"), b, a));
  CHECK(tb::relation_holds(V(), r("near"), a, b));
  b.box.center = {2, 2, 3};
  CHECK(tb::relation_holds(V(), r("under"), a, b));
  CHECK(tb::relation_holds(V(), r("above"), b, a));
  CHECK_FALSE(tb::relation_holds(V(), r("next to"), a, b));
  CHECK_THROWS_AS(tb::relation_holds(V(), 99, a, b), eda::InvalidInput);
}

TEST_CASE("gen_scene: same seed gives the same scene") {
  const tb::SceneConfig cfg;
  const auto a = tb::gen_scene(7, cfg, V(), "s");
  const auto b = tb::gen_scene(7, cfg, V(), "s");
  CHECK(a == b);
  CHECK(tb::to_json(a).dump() == tb::to_json(b).dump());
  CHECK_FALSE(tb::gen_scene(8, cfg, V(), "s") == a);
}

TEST_CASE("gen_scene: invariants over 10^4 scenes") {
  const tb::SceneConfig cfg;
  int multiple = 0;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    const auto s = tb::gen_scene(seed, cfg, V());
    const int n = static_cast<int>(s.objects.size());
    REQUIRE(n >= cfg.min_objects);
    REQUIRE(n <= cfg.max_objects);
    const int focus_cat = s.objects[s.focus].category;
    int same = 0;
    for (int i = 0; i < n; ++i) {
      const auto& o = s.objects[i];
      same += o.category == focus_cat;
      for (int d = 0; d < 3; ++d) {
        REQUIRE(o.box.center[d] >= 0);
        REQUIRE(o.box.center[d] <= 10);
        REQUIRE(o.box.size[d] >= 0.3);
        REQUIRE(o.box.size[d] <= 2.5);
      }
      for (int j = 0; j < i; ++j) REQUIRE(oracle_iou(o.box, s.objects[j].box) < cfg.max_pair_iou);
    }
    REQUIRE((same >= 2) == s.multiple);
    REQUIRE(same <= cfg.max_same_category);
    multiple += s.multiple;
  }
  // multiple_prob = 0.8; a 5 sigma band around 8000.
  CHECK(multiple > 7800);
  CHECK(multiple < 8200);
}

TEST_CASE("gen_scene: a single-object config yields the unique regime") {
  tb::SceneConfig cfg;
  cfg.min_objects = cfg.max_objects = 1;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = tb::gen_scene(seed, cfg, V());
    CHECK(s.objects.size() == 1);
    CHECK_FALSE(s.multiple);
  }
}

TEST_CASE("gen_scene: bad configs are rejected") {
  tb::SceneConfig cfg;
  cfg.max_objects = 2;
  cfg.min_objects = 3;
  CHECK_THROWS_AS(tb::gen_scene(1, cfg, V()), eda::ConfigError);
  cfg = {};
  cfg.multiple_prob = 1.5;
  CHECK_THROWS_AS(tb::gen_scene(1, cfg, V()), eda::ConfigError);
}

TEST_CASE("gen_corpus: every utterance singles out its target") {
  tb::CorpusConfig cfg;
  cfg.seed = 11;
  cfg.scenes = 500;
  const auto corpus = tb::gen_corpus(cfg, V());
  int count = 0, relational = 0, masked_unique = 0;
  for (const auto& rec : corpus) {
    for (const auto& u : rec.utterances) {
      ++count;
      CAPTURE(u.text);
      REQUIRE(oracle_referents(u.text, rec.scene) == std::vector<int>{u.target});
      REQUIRE(tb::semantic_filter(rec.scene, u.description, V()) == std::vector<int>{u.target});
      relational += u.description.relation >= 0;
      // The masked text drops the name and nothing else.
      CHECK(u.masked_text.find(V().categories[rec.scene.objects[u.target].category] + " ") ==
            std::string::npos);
      tb::Description nameless = u.description;
      nameless.category = -1;
      CHECK(u.masked_unique ==
            (tb::semantic_filter(rec.scene, nameless, V()) == std::vector<int>{u.target}));
      masked_unique += u.masked_unique;
    }
  }
  CHECK(count >= 1900);
  CHECK(relational > count / 10);
  CHECK(masked_unique > count / 2);
}

TEST_CASE("gen_corpus: the decoupler recovers the gold components") {
  tb::CorpusConfig cfg;
  cfg.seed = 12;
  cfg.scenes = 300;
  for (const auto& rec : tb::gen_corpus(cfg, V())) {
    for (const auto& u : rec.utterances) {
      CAPTURE(u.text);
      const auto got = eda::decouple::decouple_utterance(u.gold_tree);
      REQUIRE(got.assignment == u.gold_components.assignment);
      REQUIRE(got.main_head == u.gold_components.main_head);
      REQUIRE(got.owner == u.gold_components.owner);
      const auto masked = eda::decouple::decouple_utterance(u.masked_tree);
      REQUIRE(masked.assignment == u.masked_components.assignment);
    }
  }
}

TEST_CASE("gen_utterance: attribute-only descriptions appear in the unique regime") {
  tb::ToyScene s;
  tb::ToyObject chair, table;
  chair.category = index_in(V().categories, "chair");
  chair.color = 0;
  chair.box = {{2, 2, 2}, {1, 1, 1}};
  table.category = index_in(V().categories, "table");
  table.color = 1;
  table.box = {{8, 8, 8}, {1, 1, 1}};
  s.objects = {chair, table};
  tb::Rng rng(3);
  int without_relation = 0;
  for (int i = 0; i < 100; ++i) {
    const auto u = tb::gen_utterance(s, 0, rng, V(), "u");
    REQUIRE(u.has_value());
    CHECK(oracle_referents(u->text, s) == std::vector<int>{0});
    without_relation += u->description.relation < 0;
  }
  CHECK(without_relation == 100);  // no relation holds across the room
}

TEST_CASE("gen_utterance: identical twins cannot be described") {
  tb::ToyScene s;
  tb::ToyObject a;
  a.box = {{2, 2, 2}, {1, 1, 1}};
  tb::ToyObject b = a;
  b.box.center = {8, 8, 8};
  s.objects = {a, b};
  tb::Rng rng(1);
  CHECK_FALSE(tb::gen_utterance(s, 0, rng, V(), "u").has_value());
}

TEST_CASE("corpus: JSONL round trip and determinism") {
  tb::CorpusConfig cfg;
  cfg.seed = 5;
  cfg.scenes = 30;
  const auto a = tb::gen_corpus(cfg, V());
  const std::string text = tb::corpus_to_jsonl(a);
  CHECK(text == tb::corpus_to_jsonl(tb::gen_corpus(cfg, V())));
  const auto back = tb::corpus_from_jsonl(text, V());
  REQUIRE(back.size() == a.size());
  CHECK(tb::corpus_to_jsonl(back) == text);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(back[i].scene == a[i].scene);
  CHECK_THROWS_AS(tb::corpus_from_jsonl("{not json}\n", V()), eda::ParseError);
}

TEST_CASE("model: size, determinism and checkpoint round trip") {
  const auto m = tb::ToyModel::init(3, V());
  CHECK(m.parameter_count() < 100000);
  const auto again = tb::ToyModel::init(3, V());
  for (std::size_t p = 0; p < m.parameters().size(); ++p) {
    CHECK(m.parameters()[p]->data() == again.parameters()[p]->data());
  }
  const auto j = tb::to_json(m);
  const auto back = tb::model_from_json(nlohmann::json::parse(j.dump()), V());
  CHECK(tb::to_json(back).dump() == j.dump());
  auto bad = j;
  bad["vocab_hash"] = V().hash + 1;
  CHECK_THROWS_AS(tb::model_from_json(bad, V()), eda::InvalidInput);
  bad = j;
  bad["params"]["w2"].erase(0);
  CHECK_THROWS_AS(tb::model_from_json(bad, V()), eda::InvalidInput);
}

TEST_CASE("model: forward features are unit rows and logits are scaled dot products") {
  tb::CorpusConfig cfg;
  cfg.scenes = 1;
  const auto rec = tb::gen_corpus(cfg, V())[0];
  const auto& u = rec.utterances.at(0);
  const auto m = tb::ToyModel::init(1, V());
  const double tau = 0.07;
  const auto f = tb::forward(m, rec.scene, u.gold_tree, V(), tau);
  REQUIRE(f.o.rows() == rec.scene.objects.size());
  REQUIRE(f.t.rows() == u.gold_tree.token_count() + 1);
  REQUIRE(f.o.cols() == tb::kFeatureDim);
  for (std::size_t r = 0; r < f.o.rows(); ++r) {
    double s = 0;
    for (double x : f.o.row(r)) s += x * x;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  for (std::size_t r = 0; r < f.t.rows(); ++r) {
    double s = 0;
    for (double x : f.t.row(r)) s += x * x;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  for (std::size_t i = 0; i < f.o.rows(); ++i)
    for (std::size_t j = 0; j < f.t.rows(); ++j) {
      double s = 0;
      for (int c = 0; c < tb::kFeatureDim; ++c) s += f.o(i, c) * f.t(j, c);
      CHECK(std::fabs(f.l_pred(i, j) - s / tau) < 1e-10);
    }
}

TEST_CASE("model: utterance loss gradients match finite differences") {
  tb::CorpusConfig cfg;
  cfg.seed = 2;
  cfg.scenes = 3;
  const auto corpus = tb::gen_corpus(cfg, V());
  const tb::TrainConfig tc;
  const auto m = tb::ToyModel::init(4, V());
  for (const auto& rec : corpus) {
    const auto& u = rec.utterances.at(0);
    const auto desc = tb::object_descriptors(rec.scene, V());
    // w2 and the head table enter both encoders and the composition.
    nc::ScalarFn via_w2 = [&](nc::Tape& tape, const nc::Var& x) {
      auto vars = tb::bind(tape, m, false);
      vars.w2 = x;
      return tb::utterance_loss(vars, tb::encode_objects(vars, desc), u, rec.scene, V(), tc);
    };
    nc::ScalarFn via_child = [&](nc::Tape& tape, const nc::Var& x) {
      auto vars = tb::bind(tape, m, false);
      vars.child_word = x;
      return tb::utterance_loss(vars, tb::encode_objects(vars, desc), u, rec.scene, V(), tc);
    };
    CHECK(nc::fd_check(via_w2, m.w2).max_rel_error < 1e-4);
    CHECK(nc::fd_check(via_child, m.child_word).max_rel_error < 1e-4);
  }
}

TEST_CASE("train config: JSON round trip and unknown keys") {
  tb::TrainConfig c;
  c.epochs = 17;
  c.lr = 0.5;
  c.components = {ComponentKind::kMainObject, ComponentKind::kPronoun};
  c.use_position_loss = false;
  const auto back = tb::train_config_from_json(tb::to_json(c));
  CHECK(tb::to_json(back) == tb::to_json(c));
  CHECK(back.epochs == 17);
  CHECK_FALSE(back.use_position_loss);
  auto j = tb::to_json(c);
  j["learning_rate"] = 0.1;
  CHECK_THROWS_AS(tb::train_config_from_json(j), eda::ConfigError);
  j = tb::to_json(c);
  j["scene"]["colour"] = 1;
  CHECK_THROWS_AS(tb::train_config_from_json(j), eda::ConfigError);
  j = tb::to_json(c);
  j["losses"] = "";
  CHECK_THROWS_AS(tb::train_config_from_json(j), eda::ConfigError);
}

TEST_CASE("components: parsing and restriction") {
  CHECK(tb::parse_components("main,attr,pron,auxi,rel") == tb::kAllComponents);
  CHECK(tb::components_string(tb::kAllComponents) == "main,attr,pron,auxi,rel");
  CHECK_THROWS_AS(tb::parse_components("main,color"), eda::ConfigError);
  CHECK_THROWS_AS(tb::parse_components("attr"), eda::ConfigError);

  tb::CorpusConfig cfg;
  cfg.seed = 9;
  cfg.scenes = 20;
  for (const auto& rec : tb::gen_corpus(cfg, V())) {
    for (const auto& u : rec.utterances) {
      const auto r = tb::restrict_components(u.gold_components, {ComponentKind::kMainObject});
      REQUIRE(r.main_head == u.gold_components.main_head);
      CHECK(r.indices_of(ComponentKind::kMainObject) ==
            u.gold_components.indices_of(ComponentKind::kMainObject));
      CHECK(r.indices_of(ComponentKind::kAttribute).empty());
      CHECK(r.indices_of(ComponentKind::kAuxiliaryObject).empty());
      CHECK(r.auxi_heads.empty());
      CHECK(r.pronoun_links.empty());
    }
  }
}

TEST_CASE("evaluate: an untrained model is near chance") {
  tb::TrainConfig c;
  c.eval_scenes = 600;
  const auto ev = tb::eval_corpus(c, V());
  double chance = 0;
  int n = 0;
  for (const auto& rec : ev)
    for (std::size_t u = 0; u < rec.utterances.size(); ++u, ++n) chance += 1.0 / rec.scene.objects.size();
  REQUIRE(n >= 2000);
  chance /= n;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto m = tb::ToyModel::init(seed, V());
    const auto r = tb::evaluate(m, ev, tb::EvalMode::kRegular, tb::kAllComponents, V(), c.loss.tau);
    CHECK(r.evaluated == n);
    CHECK(r.chance == doctest::Approx(chance).epsilon(1e-12));
    CHECK(std::fabs(r.accuracy - chance) < 0.05);
  }
}

TEST_CASE("train: loss falls over the first ten epochs") {
  tb::TrainConfig c;
  c.epochs = 10;
  const auto corpus = tb::train_corpus(c, V());
  for (std::uint64_t seed : {1, 2, 3}) {
    c.seed = seed;
    const auto r = tb::train(c, corpus, V());
    REQUIRE(r.loss_history.size() == 10);
    for (double l : r.loss_history) REQUIRE(std::isfinite(l));
    CHECK(r.loss_history.back() < r.loss_history.front());
  }
}

TEST_CASE("train: same config gives bitwise identical checkpoints") {
  const auto c = small_config();
  const auto corpus = tb::train_corpus(c, V());
  const auto a = tb::train(c, corpus, V());
  const auto b = tb::train(c, corpus, V());
  CHECK(tb::to_json(a.model).dump() == tb::to_json(b.model).dump());
  CHECK(a.loss_history == b.loss_history);
}

TEST_CASE("run_cell: one result per seed") {
  auto c = small_config();
  const auto cell = tb::loss_grid().back();
  const auto r = tb::run_cell(c, cell, {1, 2}, V());
  CHECK(r.regular.size() == 2);
  CHECK(r.masked.size() == 2);
  CHECK(r.mean_regular() >= 0);
  CHECK(tb::format_table({r}).find(cell.name) != std::string::npos);
}
